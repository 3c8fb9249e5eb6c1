//! Two-player finite-horizon matches.

use std::fmt::Write as _;

use crate::game::{payoff, Action, GameConfig, GameError, GameMode, Payoff, PayoffTable};
use crate::vm::{reset, Observation, StrategyProgram, VmFault, VmState};

/// One player's result for one tick.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Move {
    pub action: Action,
    pub spent: u32,
    pub fault: Option<VmFault>,
}

/// Ticks `vm` once; a fault is reported and the tick plays W.
pub fn step(vm: &mut VmState, program: &StrategyProgram, obs: &Observation, k: u32) -> Move {
    match vm.tick(program, obs, k) {
        Ok(report) => Move {
            action: report.action,
            spent: report.spent,
            fault: None,
        },
        Err(fault) => Move {
            action: Action::W,
            spent: vm.spent,
            fault: Some(fault),
        },
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TickRecord {
    /// 1-based tick index.
    pub tick: u64,
    pub actions: [Action; 2],
    pub payoffs: [Payoff; 2],
    pub costs: [u32; 2],
    pub faults: [Option<VmFault>; 2],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchTrace {
    pub records: Vec<TickRecord>,
    pub totals: [Payoff; 2],
}

impl MatchTrace {
    /// CSV with columns `tick,a1,a2,pay1,pay2,cost1,cost2`, after an optional
    /// `# ...` comment line.
    pub fn to_csv(&self, comment: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(c) = comment {
            let _ = writeln!(out, "# {c}");
        }
        out.push_str("tick,a1,a2,pay1,pay2,cost1,cost2\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.tick, r.actions[0], r.actions[1], r.payoffs[0], r.payoffs[1], r.costs[0], r.costs[1]
            );
        }
        out
    }

    pub fn actions(&self, player: usize) -> Vec<Action> {
        self.records.iter().map(|r| r.actions[player]).collect()
    }
}

/// A match in progress. Both machines see the same snapshot of the last
/// completed tick before either moves.
#[derive(Clone, Debug)]
pub struct MatchState<'a> {
    programs: [&'a StrategyProgram; 2],
    pub tick: u64,
    pub vms: [VmState; 2],
    pub history: Vec<[Action; 2]>,
    pub totals: [Payoff; 2],
    last_payoffs: [Payoff; 2],
}

impl<'a> MatchState<'a> {
    pub fn new(p1: &'a StrategyProgram, p2: &'a StrategyProgram) -> Self {
        MatchState {
            programs: [p1, p2],
            tick: 0,
            vms: [reset(p1), reset(p2)],
            history: Vec::new(),
            totals: [Payoff::default(), Payoff::default()],
            last_payoffs: [Payoff::default(), Payoff::default()],
        }
    }

    fn observation(&self, player: usize, horizon: u64) -> Observation {
        match self.history.last() {
            None => Observation::first(horizon),
            Some(a) => Observation::after(a[player], a[1 - player], self.last_payoffs[player], horizon),
        }
    }

    /// Plays one tick.
    pub fn advance(&mut self, config: &GameConfig, table: &PayoffTable) -> Result<TickRecord, GameError> {
        let obs = [self.observation(0, config.n), self.observation(1, config.n)];
        let m0 = step(&mut self.vms[0], self.programs[0], &obs[0], config.k);
        let m1 = step(&mut self.vms[1], self.programs[1], &obs[1], config.k);
        let out = payoff(m0.action, m1.action, table, GameMode::Ftpd)?;
        self.tick += 1;
        self.history.push([m0.action, m1.action]);
        self.last_payoffs = [out.first, out.second];
        self.totals[0] += out.first;
        self.totals[1] += out.second;
        Ok(TickRecord {
            tick: self.tick,
            actions: [m0.action, m1.action],
            payoffs: [out.first, out.second],
            costs: [m0.spent, m1.spent],
            faults: [m0.fault, m1.fault],
        })
    }
}

/// Plays `config.n` ticks. Emitting O is an illegal-action error here.
pub fn run_match(
    p1: &StrategyProgram,
    p2: &StrategyProgram,
    config: &GameConfig,
    table: &PayoffTable,
) -> Result<MatchTrace, GameError> {
    let mut state = MatchState::new(p1, p2);
    let mut records = Vec::with_capacity(config.n as usize);
    for _ in 0..config.n {
        records.push(state.advance(config, table)?);
    }
    Ok(MatchTrace {
        records,
        totals: state.totals,
    })
}

/// Totals of a match, without the per-tick record.
pub fn match_totals(
    p1: &StrategyProgram,
    p2: &StrategyProgram,
    config: &GameConfig,
    table: &PayoffTable,
) -> Result<[Payoff; 2], GameError> {
    let mut state = MatchState::new(p1, p2);
    for _ in 0..config.n {
        state.advance(config, table)?;
    }
    Ok(state.totals)
}

/// Player 1's total when playing `candidate` against `opponent`, minus its
/// total when playing `baseline`.
pub fn deviation_gain(
    opponent: &StrategyProgram,
    candidate: &StrategyProgram,
    baseline: &StrategyProgram,
    config: &GameConfig,
    table: &PayoffTable,
) -> Result<Payoff, GameError> {
    let with = run_match(candidate, opponent, config, table)?.totals[0];
    let without = run_match(baseline, opponent, config, table)?.totals[0];
    Ok(with - without)
}

/// True if `player` never plays W or D before the opponent's first non-C
/// action (ticks strictly after it are unrestricted).
pub fn defects_only_after_provocation(trace: &MatchTrace, player: usize) -> bool {
    let first_bad = trace.records.iter().position(|r| r.actions[1 - player] != Action::C);
    let limit = first_bad.map_or(trace.records.len(), |i| i + 1);
    trace.records[..limit]
        .iter()
        .all(|r| !matches!(r.actions[player], Action::W | Action::D))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::get;

    fn p(n: i64) -> Payoff {
        Payoff::from_integer(n)
    }

    #[test]
    fn grim_pair_cooperates() {
        let cfg = GameConfig::ftpd(10);
        let g = get("GRIM", &cfg).unwrap();
        let t = run_match(&g, &g, &cfg, &PayoffTable::intro()).unwrap();
        assert_eq!(t.totals, [p(10), p(10)]);
        assert_eq!(t.records.len(), 10);
    }

    #[test]
    fn counting_defector_loses_one_tick_to_the_compare() {
        let cfg = GameConfig::ftpd(10);
        let d = get("CountingDefector", &cfg).unwrap();
        let g = get("GRIM", &cfg).unwrap();
        let t = run_match(&d, &g, &cfg, &PayoffTable::intro()).unwrap();
        let expect: Vec<Action> = [vec![Action::C; 8], vec![Action::W, Action::D]].concat();
        assert_eq!(t.actions(0), expect);
        assert_eq!(t.totals[0], p(7));
    }

    #[test]
    fn deviation_gains() {
        let cfg = GameConfig::ftpd(10);
        let table = PayoffTable::intro();
        let g = get("GRIM", &cfg).unwrap();
        let d = get("CountingDefector", &cfg).unwrap();
        let all_d = get("AllD", &cfg).unwrap();
        assert_eq!(deviation_gain(&g, &d, &g, &cfg, &table).unwrap(), p(-3));
        assert_eq!(deviation_gain(&g, &g, &g, &cfg, &table).unwrap(), p(0));
        assert_eq!(deviation_gain(&g, &all_d, &g, &cfg, &table).unwrap(), p(-17));
    }

    #[test]
    fn opt_out_is_illegal_here() {
        let cfg = GameConfig::ftpd(4);
        let oft = get("OFT", &cfg).unwrap();
        let all_d = get("AllD", &cfg).unwrap();
        assert!(matches!(
            run_match(&oft, &all_d, &cfg, &PayoffTable::intro()),
            Err(GameError::IllegalAction(..))
        ));
    }

    #[test]
    fn csv_layout() {
        let cfg = GameConfig::ftpd(2);
        let a = get("AllD", &cfg).unwrap();
        let c = get("AllC", &cfg).unwrap();
        let csv = run_match(&a, &c, &cfg, &PayoffTable::intro()).unwrap().to_csv(Some("seed=0"));
        assert_eq!(csv, "# seed=0\ntick,a1,a2,pay1,pay2,cost1,cost2\n1,D,C,2,-2,0,0\n2,D,C,2,-2,0,0\n");
    }
}
