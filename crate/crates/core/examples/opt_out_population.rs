//! An opt-out population of OFT, AllD and GRIM players with per-player
//! payoffs, opt-outs and unpaired ticks.

use bounded_pd::game::{GameConfig, PayoffTable};
use bounded_pd::library;
use bounded_pd::opd::run_population;

fn main() {
    let cfg = GameConfig::opd(50, 4, 2).with_seed(7);
    let entries = vec![
        (library::get("OFT", &cfg).unwrap(), 4),
        (library::get("AllD", &cfg).unwrap(), 2),
        (library::get("GRIM", &cfg).unwrap(), 2),
    ];
    let trace = run_population(&entries, &cfg, &PayoffTable::intro()).unwrap();
    print!("{}", trace.summary_csv(None));
    println!("splits: {}", trace.splits);
}
