//! FTPD matches: mutual GRIM and the counting defector.

use bounded_pd::ftpd::run_match;
use bounded_pd::game::{ceil_log2, format_payoff, GameConfig, PayoffTable};
use bounded_pd::library;

fn main() {
    let table = PayoffTable::intro();
    let cfg = GameConfig::ftpd(10);
    let grim = library::get("GRIM", &cfg).unwrap();
    let trace = run_match(&grim, &grim, &cfg, &table).unwrap();
    println!(
        "GRIM vs GRIM, N=10: {} {}",
        format_payoff(&trace.totals[0]),
        format_payoff(&trace.totals[1])
    );

    for n in [8u64, 16, 32] {
        let cfg = GameConfig::ftpd(n).with_k(ceil_log2(n) - 1);
        let cd = library::get("CountingDefector", &cfg).unwrap();
        let grim = library::get("GRIM", &cfg).unwrap();
        let trace = run_match(&cd, &grim, &cfg, &table).unwrap();
        let moves: String = trace.actions(0).iter().map(|a| a.to_string()).collect();
        println!("CountingDefector vs GRIM, N={n}, k={}: {moves} -> {}", cfg.k, trace.totals[0]);
    }
    let cfg = GameConfig::ftpd(4);
    let alld = library::get("AllD", &cfg).unwrap();
    print!("{}", run_match(&library::get("GRIM", &cfg).unwrap(), &alld, &cfg, &table).unwrap().to_csv(None));
}
