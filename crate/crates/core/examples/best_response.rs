//! Exhaustive best responses and equilibrium checks over small programs.

use bounded_pd::analysis::{best_response, equilibrium_check, search_size, SearchSpace};
use bounded_pd::game::{GameConfig, PayoffTable};
use bounded_pd::library;

fn main() {
    let table = PayoffTable::intro();
    let space = SearchSpace::new(6);
    for (opp, n) in [("AllC", 3), ("AllD", 3), ("GRIM", 5)] {
        let cfg = GameConfig::ftpd(n);
        let found = best_response(&library::get(opp, &cfg).unwrap(), &cfg, &table, &space).unwrap();
        println!(
            "best reply to {opp} at N={n}: {} ({} of about {} candidates)\n{}",
            found.payoff,
            found.searched,
            search_size(&space, &cfg),
            found.source
        );
    }
    let cfg = GameConfig::ftpd(5);
    let grim = library::get("GRIM", &cfg).unwrap();
    let v = equilibrium_check(&grim, &grim, &cfg, &table, &space).unwrap();
    println!("(GRIM, GRIM) N=5: nash={} cooperative={}", v.is_nash(), v.cooperative);
}
