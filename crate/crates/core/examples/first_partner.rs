//! Paired comparison: a cooperative first partner against a random one.

use bounded_pd::analysis::first_partner_experiment;
use bounded_pd::game::{GameConfig, PayoffTable};
use bounded_pd::library;

fn main() {
    let cfg = GameConfig::opd(60, 4, 3).with_seed(2);
    let oft = library::get("OFT", &cfg).unwrap();
    let alld = library::get("AllD", &cfg).unwrap();
    let report = first_partner_experiment(&oft, &[(oft.clone(), 3), (alld, 4)], &["OFT"], &cfg, &PayoffTable::intro(), 500).unwrap();
    println!("cooperative first partner: {}", report.cooperative);
    println!("random first partner:      {}", report.random);
    println!("difference:                {}", report.difference);
    println!("cooperative not worse at 95%: {}", report.cooperative_not_worse());
}
