//! Populations with opting out and random rematching.
//!
//! `2K` players start in random pairs. Each tick every pair plays one stage;
//! any O splits the pair and both partners enter the pool. The pool is
//! rematched every `t` ticks, or at the end of every tick in instantaneous
//! mode. A player's machine keeps running across partners, but its
//! observations start over (`none`) with each new partner.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ftpd::step;
use crate::game::{payoff_with, Action, GameConfig, GameError, GameMode, Payoff, PayoffTable, UnpairedPayoff};
use crate::vm::{reset, Observation, StrategyProgram, VmState};

/// What a player remembers of its current partnership.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Memory {
    last: Option<(Action, Action, Payoff)>,
}

impl Memory {
    pub fn observation(&self, horizon: u64) -> Observation {
        match self.last {
            None => Observation::first(horizon),
            Some((own, opp, pay)) => Observation::after(own, opp, pay, horizon),
        }
    }

    fn watching(&self, opponent: Action, horizon: u64) -> Observation {
        let mut obs = self.observation(horizon);
        obs.opponent_last_action = Some(opponent);
        obs
    }
}

/// Result of one stage for a pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairOutcome {
    pub actions: [Action; 2],
    pub payoffs: [Payoff; 2],
    pub split: bool,
}

/// Plays one stage for a pair and updates both memories.
///
/// In instantaneous mode a player whose partner waits gets a second look:
/// its machine is rerun from the start of the tick seeing the partner's W,
/// and if that run opts out the split happens this tick.
pub fn pair_tick(
    vms: [&mut VmState; 2],
    programs: [&StrategyProgram; 2],
    memories: [&mut Memory; 2],
    config: &GameConfig,
    table: &PayoffTable,
) -> Result<PairOutcome, GameError> {
    let [vm0, vm1] = vms;
    let [mem0, mem1] = memories;
    let horizon = config.n;
    let before = [vm0.clone(), vm1.clone()];
    let mut actions = [
        step(vm0, programs[0], &mem0.observation(horizon), config.k).action,
        step(vm1, programs[1], &mem1.observation(horizon), config.k).action,
    ];
    if config.instantaneous_rematch {
        let mems = [&*mem0, &*mem1];
        let vms = [vm0, vm1];
        for me in 0..2 {
            let other = 1 - me;
            if actions[other] == Action::W && actions[me] != Action::O {
                let mut retry = before[me].clone();
                let obs = mems[me].watching(Action::W, horizon);
                if step(&mut retry, programs[me], &obs, config.k).action == Action::O {
                    *vms[me] = retry;
                    actions[me] = Action::O;
                }
            }
        }
    }
    let out = payoff_with(actions[0], actions[1], table, GameMode::Opd, config.split_payoff)?;
    mem0.last = Some((actions[0], actions[1], out.first));
    mem1.last = Some((actions[1], actions[0], out.second));
    Ok(PairOutcome {
        actions,
        payoffs: [out.first, out.second],
        split: out.split,
    })
}

/// Payoff for one unpaired tick.
pub fn unpaired_payoff(config: &GameConfig, table: &PayoffTable) -> Payoff {
    match config.unpaired_payoff {
        UnpairedPayoff::Zero => Payoff::default(),
        UnpairedPayoff::QHat => table.q_hat,
    }
}

/// `r`: mean wait from a split to the next rematch, assuming the split tick
/// is uniform over the period.
pub fn expected_rematch_delay(config: &GameConfig) -> f64 {
    if config.instantaneous_rematch {
        0.0
    } else {
        (config.t.max(1) - 1) as f64 / 2.0
    }
}

/// True when the pool is rematched at the end of `tick` (1-based).
pub fn rematch_due(config: &GameConfig, tick: u64) -> bool {
    config.instantaneous_rematch || tick.is_multiple_of(config.t.max(1))
}

/// Uniform random matching of `pool`. The pool is sorted by id before
/// shuffling so the result depends only on the pool contents and the rng;
/// with an odd pool the last player after shuffling stays unpaired.
pub fn rematch(pool: &[usize], rng: &mut ChaCha8Rng) -> (Vec<(usize, usize)>, Option<usize>) {
    let mut ids = pool.to_vec();
    ids.sort_unstable();
    ids.shuffle(rng);
    let left = if ids.len() % 2 == 1 { ids.pop() } else { None };
    let pairs = ids.chunks_exact(2).map(|c| (c[0].min(c[1]), c[0].max(c[1]))).collect();
    (pairs, left)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    Play,
    Split,
    Unpaired,
    Rematch,
}

impl EventKind {
    fn as_str(self) -> &'static str {
        match self {
            EventKind::Play => "play",
            EventKind::Split => "split",
            EventKind::Unpaired => "unpaired",
            EventKind::Rematch => "rematch",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpdEvent {
    pub tick: u64,
    pub kind: EventKind,
    pub player: usize,
    pub partner: Option<usize>,
    pub action: Option<Action>,
    pub payoff: Payoff,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlayerSummary {
    pub id: usize,
    pub strategy: String,
    pub payoff: Payoff,
    pub opt_outs: u64,
    pub unpaired_ticks: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpdTrace {
    pub events: Vec<OpdEvent>,
    pub players: Vec<PlayerSummary>,
    pub splits: u64,
}

impl OpdTrace {
    /// Event CSV: `tick,event,player,partner,action,payoff`.
    pub fn to_csv(&self, comment: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(c) = comment {
            let _ = writeln!(out, "# {c}");
        }
        out.push_str("tick,event,player,partner,action,payoff\n");
        for e in &self.events {
            let partner = e.partner.map(|p| p.to_string()).unwrap_or_default();
            let action = e.action.map(|a| a.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{},{}", e.tick, e.kind.as_str(), e.player, partner, action, e.payoff);
        }
        out
    }

    /// Per-player CSV: `player,strategy,payoff,opt_outs,unpaired_ticks`.
    pub fn summary_csv(&self, comment: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(c) = comment {
            let _ = writeln!(out, "# {c}");
        }
        out.push_str("player,strategy,payoff,opt_outs,unpaired_ticks\n");
        for p in &self.players {
            let _ = writeln!(out, "{},{},{},{},{}", p.id, p.strategy, p.payoff, p.opt_outs, p.unpaired_ticks);
        }
        out
    }

    pub fn payoff(&self, player: usize) -> Payoff {
        self.players[player].payoff
    }
}

struct Player {
    program: usize,
    vm: VmState,
    memory: Memory,
    partner: Option<usize>,
    payoff: Payoff,
    opt_outs: u64,
    unpaired_ticks: u64,
}

/// A population in progress.
pub struct Population<'a> {
    programs: &'a [StrategyProgram],
    players: Vec<Player>,
    tick: u64,
    rng: ChaCha8Rng,
    splits: u64,
    record: bool,
    events: Vec<OpdEvent>,
}

impl<'a> Population<'a> {
    /// One player per entry of `assignment`, each an index into `programs`.
    /// Initial pairs are drawn at random from `config.seed`.
    pub fn new(programs: &'a [StrategyProgram], assignment: &[usize], config: &GameConfig) -> Result<Self, GameError> {
        config.validate()?;
        if config.mode != GameMode::Opd {
            return Err(GameError::InvalidConfig("populations need mode=opd".into()));
        }
        if assignment.is_empty() || assignment.len() % 2 == 1 {
            return Err(GameError::InvalidConfig(format!(
                "a population needs an even number of players, got {}",
                assignment.len()
            )));
        }
        if let Some(&bad) = assignment.iter().find(|&&i| i >= programs.len()) {
            return Err(GameError::InvalidConfig(format!("no program with index {bad}")));
        }
        let players = assignment
            .iter()
            .map(|&program| Player {
                program,
                vm: reset(&programs[program]),
                memory: Memory::default(),
                partner: None,
                payoff: Payoff::default(),
                opt_outs: 0,
                unpaired_ticks: 0,
            })
            .collect();
        let mut pop = Population {
            programs,
            players,
            tick: 0,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            splits: 0,
            record: true,
            events: Vec::new(),
        };
        let everyone: Vec<usize> = (0..pop.players.len()).collect();
        let (pairs, _) = rematch(&everyone, &mut pop.rng);
        pop.pair_up(&pairs);
        Ok(pop)
    }

    /// Replaces the random initial pairing. Players not named stay in the pool.
    pub fn with_initial_pairs(mut self, pairs: &[(usize, usize)]) -> Result<Self, GameError> {
        let n = self.players.len();
        let mut seen = vec![false; n];
        for &(a, b) in pairs {
            if a >= n || b >= n || a == b || seen[a] || seen[b] {
                return Err(GameError::InvalidConfig(format!("bad initial pair ({a}, {b})")));
            }
            seen[a] = true;
            seen[b] = true;
        }
        for p in &mut self.players {
            p.partner = None;
        }
        self.events.clear();
        self.pair_up(pairs);
        Ok(self)
    }

    /// Turns event recording on or off (summaries are always kept).
    pub fn recording(mut self, on: bool) -> Self {
        self.record = on;
        if !on {
            self.events.clear();
        }
        self
    }

    fn pair_up(&mut self, pairs: &[(usize, usize)]) {
        for &(a, b) in pairs {
            self.players[a].partner = Some(b);
            self.players[b].partner = Some(a);
            self.players[a].memory = Memory::default();
            self.players[b].memory = Memory::default();
            if self.record {
                for (x, y) in [(a, b), (b, a)] {
                    self.events.push(OpdEvent {
                        tick: self.tick,
                        kind: EventKind::Rematch,
                        player: x,
                        partner: Some(y),
                        action: None,
                        payoff: Payoff::default(),
                    });
                }
            }
        }
    }

    fn pairs(&self) -> Vec<(usize, usize)> {
        self.players
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.partner.filter(|&j| i < j).map(|j| (i, j)))
            .collect()
    }

    /// Plays one global tick.
    pub fn advance(&mut self, config: &GameConfig, table: &PayoffTable) -> Result<(), GameError> {
        self.tick += 1;
        let tick = self.tick;
        let idle: Vec<usize> = (0..self.players.len()).filter(|&i| self.players[i].partner.is_none()).collect();
        for (a, b) in self.pairs() {
            let (left, right) = self.players.split_at_mut(b);
            let (pa, pb) = (&mut left[a], &mut right[0]);
            let progs = [&self.programs[pa.program], &self.programs[pb.program]];
            let out = pair_tick([&mut pa.vm, &mut pb.vm], progs, [&mut pa.memory, &mut pb.memory], config, table)?;
            pa.payoff += out.payoffs[0];
            pb.payoff += out.payoffs[1];
            for (me, p) in [(0, &mut *pa), (1, &mut *pb)] {
                if out.split && out.actions[me] == Action::O {
                    p.opt_outs += 1;
                }
            }
            if out.split {
                pa.partner = None;
                pb.partner = None;
                self.splits += 1;
            }
            if self.record {
                let kind = if out.split { EventKind::Split } else { EventKind::Play };
                for (me, (x, y)) in [(a, b), (b, a)].into_iter().enumerate() {
                    self.events.push(OpdEvent {
                        tick,
                        kind,
                        player: x,
                        partner: Some(y),
                        action: Some(out.actions[me]),
                        payoff: out.payoffs[me],
                    });
                }
            }
        }
        let idle_pay = unpaired_payoff(config, table);
        for i in idle {
            let p = &mut self.players[i];
            p.unpaired_ticks += 1;
            p.payoff += idle_pay;
            if self.record {
                self.events.push(OpdEvent {
                    tick,
                    kind: EventKind::Unpaired,
                    player: i,
                    partner: None,
                    action: None,
                    payoff: idle_pay,
                });
            }
        }
        if rematch_due(config, tick) {
            let pool: Vec<usize> = (0..self.players.len()).filter(|&i| self.players[i].partner.is_none()).collect();
            if pool.len() >= 2 {
                let (pairs, _) = rematch(&pool, &mut self.rng);
                self.pair_up(&pairs);
            }
        }
        Ok(())
    }

    pub fn finish(self) -> OpdTrace {
        let programs = self.programs;
        OpdTrace {
            events: self.events,
            players: self
                .players
                .into_iter()
                .enumerate()
                .map(|(id, p)| PlayerSummary {
                    id,
                    strategy: programs[p.program].name.clone(),
                    payoff: p.payoff,
                    opt_outs: p.opt_outs,
                    unpaired_ticks: p.unpaired_ticks,
                })
                .collect(),
            splits: self.splits,
        }
    }

    /// Plays all `config.n` ticks.
    pub fn run(mut self, config: &GameConfig, table: &PayoffTable) -> Result<OpdTrace, GameError> {
        for _ in 0..config.n {
            self.advance(config, table)?;
        }
        Ok(self.finish())
    }
}

/// Runs a population given as `(program, count)` entries; player ids follow
/// entry order.
pub fn run_population(
    entries: &[(StrategyProgram, usize)],
    config: &GameConfig,
    table: &PayoffTable,
) -> Result<OpdTrace, GameError> {
    let programs: Vec<StrategyProgram> = entries.iter().map(|(p, _)| p.clone()).collect();
    let assignment: Vec<usize> = entries.iter().enumerate().flat_map(|(i, (_, n))| std::iter::repeat_n(i, *n)).collect();
    Population::new(&programs, &assignment, config)?.run(config, table)
}

/// A population file line: `count x strategy`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PopulationEntry {
    pub count: usize,
    pub strategy: String,
}

/// Parses a population file. `#` starts a comment.
pub fn parse_population(text: &str) -> Result<Vec<PopulationEntry>, GameError> {
    let mut entries = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: &str| GameError::ConfigSyntax {
            line: no + 1,
            message: message.to_string(),
        };
        let mut parts = line.split_whitespace();
        let count = parts
            .next()
            .and_then(|c| c.parse::<usize>().ok())
            .ok_or_else(|| err("expected a player count"))?;
        if parts.next() != Some("x") {
            return Err(err("expected `x` after the count"));
        }
        let strategy = parts.next().ok_or_else(|| err("expected a strategy name or file"))?;
        if parts.next().is_some() {
            return Err(err("trailing input after the strategy"));
        }
        entries.push(PopulationEntry {
            count,
            strategy: strategy.to_string(),
        });
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::get;

    fn opd(n: u64, k: usize, t: u64) -> GameConfig {
        GameConfig::opd(n, k, t).with_seed(7)
    }

    #[test]
    fn grim_pair_scores_n_r() {
        let cfg = opd(10, 1, 1);
        let g = get("GRIM", &cfg).unwrap();
        let trace = run_population(&[(g, 2)], &cfg, &PayoffTable::intro()).unwrap();
        assert_eq!(trace.payoff(0), Payoff::from_integer(10));
        assert_eq!(trace.payoff(1), Payoff::from_integer(10));
        assert_eq!(trace.splits, 0);
    }

    #[test]
    fn oft_leaves_defectors_on_tick_two() {
        let cfg = opd(2, 2, 1);
        let entries = [(get("OFT", &cfg).unwrap(), 2), (get("AllD", &cfg).unwrap(), 2)];
        let programs: Vec<_> = entries.iter().map(|e| e.0.clone()).collect();
        let pop = Population::new(&programs, &[0, 0, 1, 1], &cfg)
            .unwrap()
            .with_initial_pairs(&[(0, 2), (1, 3)])
            .unwrap();
        let trace = pop.run(&cfg, &PayoffTable::intro()).unwrap();
        let splits: Vec<_> = trace.events.iter().filter(|e| e.kind == EventKind::Split).collect();
        assert_eq!(splits.len(), 4);
        assert!(splits.iter().all(|e| e.tick == 2));
        assert_eq!(trace.players[0].opt_outs, 1);
        assert_eq!(trace.players[2].opt_outs, 0);
    }

    #[test]
    fn rematch_parity_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (pairs, left) = rematch(&[4, 9], &mut rng);
        assert_eq!((pairs, left), (vec![(4, 9)], None));
        let (pairs, left) = rematch(&[0, 1, 2], &mut rng);
        assert_eq!(pairs.len(), 1);
        assert!(left.is_some());
        let a = rematch(&[3, 1, 2, 0], &mut ChaCha8Rng::seed_from_u64(5));
        let b = rematch(&[0, 1, 2, 3], &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }

    #[test]
    fn rematch_delay() {
        assert_eq!(expected_rematch_delay(&opd(10, 1, 1)), 0.0);
        assert_eq!(expected_rematch_delay(&opd(10, 1, 5)), 2.0);
        assert_eq!(expected_rematch_delay(&opd(10, 1, 5).with_instantaneous_rematch(true)), 0.0);
    }

    #[test]
    fn instantaneous_mode_opts_out_against_a_waiter() {
        let cfg = opd(3, 1, 1).with_instantaneous_rematch(true);
        let trace = run_population(
            &[(get("OFT", &cfg).unwrap(), 1), (get("AllW", &cfg).unwrap(), 1)],
            &cfg,
            &PayoffTable::intro(),
        )
        .unwrap();
        let first = trace.events.iter().find(|e| e.kind == EventKind::Split).unwrap();
        assert_eq!(first.tick, 1);
    }

    #[test]
    fn odd_population_rejected() {
        let cfg = opd(3, 1, 1);
        assert!(run_population(&[(get("AllC", &cfg).unwrap(), 3)], &cfg, &PayoffTable::intro()).is_err());
    }

    #[test]
    fn population_file() {
        let e = parse_population("# pool\n2 x OFT\n1 x my.pdstrat # file\n").unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e[1].strategy, "my.pdstrat");
        assert!(matches!(parse_population("2 OFT"), Err(GameError::ConfigSyntax { line: 1, .. })));
    }
}
