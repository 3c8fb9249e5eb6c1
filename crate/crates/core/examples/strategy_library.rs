//! The builtin catalog with documented and measured tick costs.

use bounded_pd::game::GameConfig;
use bounded_pd::library;

fn main() {
    let cfg = GameConfig::ftpd(100);
    print!("{}", library::listing(&cfg));
    for (name, measured, documented) in library::verify_costs(&cfg) {
        println!("{name}: measured {measured:?}, documented {documented}");
    }
    println!("\n{}", library::counting_defector_source(6));
}
