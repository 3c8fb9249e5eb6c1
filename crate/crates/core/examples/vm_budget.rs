//! Per-tick comparison budget: a wide counter compare suspends and the tick
//! plays W.

use bounded_pd::dsl;
use bounded_pd::game::{Action, GameConfig, Payoff};
use bounded_pd::vm::{trace, Observation};

fn main() {
    let src = dsl::parse("strategy Wide\ncounter i: 6 bits\nif i >= 3 then play D\nalways inc i play C\n").unwrap();
    for k in [2, 6] {
        let cfg = GameConfig::ftpd(8).with_k(k);
        let program = dsl::compile(&src, &cfg).unwrap();
        println!("k={k} worst-case cost {:?}", program.worst_case_cost);
        let mut obs = vec![Observation::first(8)];
        obs.extend((1..8).map(|_| Observation::after(Action::C, Action::C, Payoff::from_integer(1), 8)));
        for line in trace(&program, &obs, k) {
            println!("  {line}");
        }
    }
}
