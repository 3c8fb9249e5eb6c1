//! Parse, print, compile and decompile a strategy.

use bounded_pd::dsl;
use bounded_pd::game::GameConfig;

fn main() {
    let text = "strategy   GRIM # trigger\nif opp != C then goto punish\nalways play C\nlabel punish\nalways play D\n";
    let src = dsl::parse(text).unwrap();
    print!("{}", dsl::print(&src));
    let program = dsl::compile(&src, &GameConfig::ftpd(10)).unwrap();
    for (pc, ins) in program.instructions.iter().enumerate() {
        println!("  {pc:>2}: {ins:?}");
    }
    println!("worst-case cost: {:?}", program.worst_case_cost);
    print!("decompiled:\n{}", dsl::print(&dsl::decompile(&program).unwrap()));
    match dsl::parse("strategy x\nalways play Q\n") {
        Ok(_) => unreachable!(),
        Err(d) => println!("diagnostic: {}", d.with_file("x.pdstrat")),
    }
}
