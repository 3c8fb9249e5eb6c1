//! Security level and competitive ratio of OFT in an open pool.

use bounded_pd::analysis::{competitive_ratio, pool::BenchmarkSearch, AnalysisReport, PopulationModel};
use bounded_pd::game::{GameConfig, PayoffTable};
use bounded_pd::library;

fn main() {
    let table = PayoffTable::intro();
    println!("{}", AnalysisReport::CSV_HEADER);
    for n in [50u64, 100, 200] {
        let cfg = GameConfig::opd(n, 1, 1).with_instantaneous_rematch(true).with_seed(1);
        let model = PopulationModel::new(0.5, &cfg);
        let oft = library::get("OFT", &cfg).unwrap();
        let report = competitive_ratio(&oft, &model, &cfg, &table, 500, &BenchmarkSearch::default()).unwrap();
        println!("{}", report.csv_row());
        if n == 200 {
            print!("{report}");
        }
    }
}
