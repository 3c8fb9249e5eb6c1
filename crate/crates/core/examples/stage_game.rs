//! Stage payoffs and iterated dominance for the intro table.

use bounded_pd::game::{dominance_check, format_payoff, payoff, validate_table, Action, GameMode, PayoffTable, Regime};

fn main() {
    let table = PayoffTable::intro();
    println!("violations: {:?}", validate_table(&table, GameMode::Opd, Regime::Plain));
    for mode in [GameMode::Ftpd, GameMode::Opd] {
        println!("\n{mode:?} row payoffs");
        let legal = Action::legal(mode);
        for &a in legal {
            let row: Vec<String> = legal
                .iter()
                .map(|&b| format_payoff(&payoff(a, b, &table, mode).unwrap().first))
                .collect();
            println!("  {a}: {}", row.join("\t"));
        }
        let report = dominance_check(&table, mode);
        for d in &report.relations {
            println!("  {} dominated by {} ({:?}, round {})", d.dominated, d.by, d.strength, d.round);
        }
        println!("  surviving: {:?}", report.surviving);
    }
}
