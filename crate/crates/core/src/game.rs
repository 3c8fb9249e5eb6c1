//! Actions, payoff tables, game configuration and the stage-payoff and
//! dominance primitives shared by every engine.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{One, Zero};
use thiserror::Error;

/// Exact payoff units.
pub type Payoff = Rational64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error("action {0} is not legal in {1} mode")]
    IllegalAction(Action, GameMode),
    #[error("invalid game configuration: {0}")]
    InvalidConfig(String),
    #[error("{line}: {message}")]
    ConfigSyntax { line: usize, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    /// Cooperate.
    C,
    /// Defect.
    D,
    /// Wait: what a player "plays" when it emitted nothing this tick.
    W,
    /// Opt out (OPD only).
    O,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::C, Action::D, Action::W, Action::O];

    pub fn as_char(self) -> char {
        match self {
            Action::C => 'C',
            Action::D => 'D',
            Action::W => 'W',
            Action::O => 'O',
        }
    }

    pub fn from_char(c: char) -> Option<Action> {
        match c {
            'C' => Some(Action::C),
            'D' => Some(Action::D),
            'W' => Some(Action::W),
            'O' => Some(Action::O),
            _ => None,
        }
    }

    /// Actions available in `mode`.
    pub fn legal(mode: GameMode) -> &'static [Action] {
        match mode {
            GameMode::Ftpd => &Action::ALL[..3],
            GameMode::Opd => &Action::ALL,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum GameMode {
    #[default]
    Ftpd,
    Opd,
}

impl fmt::Display for GameMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GameMode::Ftpd => "ftpd",
            GameMode::Opd => "opd",
        })
    }
}

impl FromStr for GameMode {
    type Err = GameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ftpd" => Ok(GameMode::Ftpd),
            "opd" => Ok(GameMode::Opd),
            other => Err(GameError::InvalidConfig(format!("unknown mode `{other}`"))),
        }
    }
}

/// How a split pays the two partners.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SplitPayoff {
    /// Both partners receive `Q`.
    #[default]
    Symmetric,
    /// The player who opted out receives `Q`, an abandoned partner receives `Q_hat`.
    Asymmetric,
}

/// What an unpaired player receives per tick.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum UnpairedPayoff {
    #[default]
    Zero,
    QHat,
}

/// The full payoff map. Mixed wait pairs such as `(W, C)` always pay 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PayoffTable {
    pub t: Payoff,
    pub r: Payoff,
    pub p: Payoff,
    pub s: Payoff,
    /// Paid to both players when both wait.
    pub h: Payoff,
    /// Paid on a split.
    pub q: Payoff,
    pub q_hat: Payoff,
}

fn int(v: i64) -> Payoff {
    Payoff::from_integer(v)
}

impl PayoffTable {
    pub fn new(t: Payoff, r: Payoff, p: Payoff, s: Payoff) -> Self {
        PayoffTable {
            t,
            r,
            p,
            s,
            h: Payoff::zero(),
            q: Payoff::zero(),
            q_hat: Payoff::zero(),
        }
    }

    pub fn from_integers(t: i64, r: i64, p: i64, s: i64) -> Self {
        Self::new(int(t), int(r), int(p), int(s))
    }

    /// `(T, R, P, S) = (2, 1, -1, -2)`, `H = 0`, `Q = 0`.
    pub fn intro() -> Self {
        Self::from_integers(2, 1, -1, -2)
    }

    /// The intro table with a strictly negative both-wait payoff (`H = Q_hat = -1/100`).
    pub fn intro_epsilon() -> Self {
        let eps = Payoff::new(-1, 100);
        PayoffTable {
            h: eps,
            q_hat: eps,
            ..Self::intro()
        }
    }

    pub fn with_h(mut self, h: Payoff) -> Self {
        self.h = h;
        self
    }

    pub fn with_q(mut self, q: Payoff, q_hat: Payoff) -> Self {
        self.q = q;
        self.q_hat = q_hat;
        self
    }

    /// Named presets accepted by `--table`.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "intro" => Some(Self::intro()),
            "intro-eps" => Some(Self::intro_epsilon()),
            _ => None,
        }
    }
}

/// Result of one stage of play for a pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageOutcome {
    pub first: Payoff,
    pub second: Payoff,
    /// True when the pair splits (some player opted out).
    pub split: bool,
}

/// Stage payoff with the symmetric split rule.
pub fn payoff(a: Action, b: Action, table: &PayoffTable, mode: GameMode) -> Result<StageOutcome, GameError> {
    payoff_with(a, b, table, mode, SplitPayoff::Symmetric)
}

pub fn payoff_with(
    a: Action,
    b: Action,
    table: &PayoffTable,
    mode: GameMode,
    split: SplitPayoff,
) -> Result<StageOutcome, GameError> {
    use Action::*;
    for x in [a, b] {
        if x == O && mode == GameMode::Ftpd {
            return Err(GameError::IllegalAction(x, mode));
        }
    }
    let stay = |first: &Payoff, second: &Payoff| StageOutcome {
        first: *first,
        second: *second,
        split: false,
    };
    let zero = Payoff::zero();
    Ok(match (a, b) {
        (O, O) => StageOutcome {
            first: table.q,
            second: table.q,
            split: true,
        },
        (O, _) | (_, O) => {
            let (first, second) = match split {
                SplitPayoff::Symmetric => (table.q, table.q),
                SplitPayoff::Asymmetric if a == O => (table.q, table.q_hat),
                SplitPayoff::Asymmetric => (table.q_hat, table.q),
            };
            StageOutcome {
                first,
                second,
                split: true,
            }
        }
        (C, C) => stay(&table.r, &table.r),
        (C, D) => stay(&table.s, &table.t),
        (D, C) => stay(&table.t, &table.s),
        (D, D) => stay(&table.p, &table.p),
        (W, W) => stay(&table.h, &table.h),
        _ => stay(&zero, &zero),
    })
}

/// A violated ordering constraint, named by its inequality.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation(pub &'static str);

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.0)
    }
}

/// Which OPD parameter regime the caller wants checked on top of the PD ordering.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Regime {
    #[default]
    Plain,
    /// `P >= Q >= 0` and `Q_hat < 0`.
    OptOutReduction,
}

/// Returns every violated constraint; an empty list means the table is valid.
pub fn validate_table(table: &PayoffTable, mode: GameMode, regime: Regime) -> Vec<Violation> {
    let mut out = Vec::new();
    if table.t <= table.r {
        out.push(Violation("T > R"));
    }
    if table.r <= table.p {
        out.push(Violation("R > P"));
    }
    if table.p <= table.s {
        out.push(Violation("P > S"));
    }
    if table.r * 2 <= table.t + table.s {
        out.push(Violation("2R > T + S"));
    }
    if table.h > Payoff::zero() {
        out.push(Violation("H <= 0"));
    }
    if mode == GameMode::Opd && regime == Regime::OptOutReduction {
        if table.p < table.q {
            out.push(Violation("P >= Q"));
        }
        if table.q < Payoff::zero() {
            out.push(Violation("Q >= 0"));
        }
        if table.q_hat >= Payoff::zero() {
            out.push(Violation("Q_hat < 0"));
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strength {
    Weak,
    Strict,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Domination {
    pub dominated: Action,
    pub by: Action,
    pub strength: Strength,
    /// Elimination round in which the relation was found (0 = full matrix).
    pub round: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DominanceReport {
    pub relations: Vec<Domination>,
    /// Actions that survive iterated elimination of strictly dominated actions.
    pub surviving: Vec<Action>,
}

impl DominanceReport {
    pub fn is_strictly_dominated(&self, dominated: Action, by: Action) -> bool {
        self.relations
            .iter()
            .any(|d| d.dominated == dominated && d.by == by && d.strength == Strength::Strict)
    }

    pub fn is_dominated(&self, dominated: Action, by: Action) -> bool {
        self.relations.iter().any(|d| d.dominated == dominated && d.by == by)
    }
}

/// Row-player stage payoff, used by the dominance check.
fn row_payoff(a: Action, b: Action, table: &PayoffTable, mode: GameMode) -> Payoff {
    payoff(a, b, table, mode).expect("legal actions").first
}

/// Iterated dominance over the symmetric stage game. Round 0 compares rows over
/// the full action set; later rounds drop strictly dominated actions (for both
/// players, by symmetry) and compare again.
pub fn dominance_check(table: &PayoffTable, mode: GameMode) -> DominanceReport {
    let mut alive: Vec<Action> = Action::legal(mode).to_vec();
    let mut report = DominanceReport::default();
    for round in 0.. {
        let mut strictly = Vec::new();
        for &x in &alive {
            for &y in &alive {
                if x == y {
                    continue;
                }
                let mut ge = true;
                let mut gt_all = true;
                let mut gt_any = false;
                for &col in &alive {
                    let py = row_payoff(y, col, table, mode);
                    let px = row_payoff(x, col, table, mode);
                    ge &= py >= px;
                    gt_all &= py > px;
                    gt_any |= py > px;
                }
                let strength = if gt_all {
                    Some(Strength::Strict)
                } else if ge && gt_any {
                    Some(Strength::Weak)
                } else {
                    None
                };
                if let Some(strength) = strength {
                    let known = report.relations.iter().any(|d| d.dominated == x && d.by == y);
                    if !known {
                        report.relations.push(Domination {
                            dominated: x,
                            by: y,
                            strength,
                            round,
                        });
                    }
                    if strength == Strength::Strict {
                        strictly.push(x);
                    }
                }
            }
        }
        if strictly.is_empty() {
            break;
        }
        alive.retain(|a| !strictly.contains(a));
    }
    report.surviving = alive;
    report
}

/// Game parameters shared by all engines.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GameConfig {
    /// Horizon in clock ticks.
    pub n: u64,
    pub mode: GameMode,
    /// OPD rematch period.
    pub t: u64,
    /// Pair count; the OPD population holds `2K` players.
    pub k_pairs: usize,
    /// XOR-units a player may spend per tick.
    pub k: u32,
    pub instantaneous_rematch: bool,
    pub seed: u64,
    pub split_payoff: SplitPayoff,
    pub unpaired_payoff: UnpairedPayoff,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            n: 10,
            mode: GameMode::Ftpd,
            t: 1,
            k_pairs: 1,
            k: 2,
            instantaneous_rematch: false,
            seed: 0,
            split_payoff: SplitPayoff::Symmetric,
            unpaired_payoff: UnpairedPayoff::Zero,
        }
    }
}

/// `ceil(log2(x))` for `x >= 1`.
pub fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

impl GameConfig {
    pub fn ftpd(n: u64) -> Self {
        GameConfig {
            n,
            ..Default::default()
        }
    }

    pub fn opd(n: u64, k_pairs: usize, t: u64) -> Self {
        GameConfig {
            n,
            mode: GameMode::Opd,
            t,
            k_pairs,
            ..Default::default()
        }
    }

    pub fn with_k(mut self, k: u32) -> Self {
        self.k = k;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_instantaneous_rematch(mut self, on: bool) -> Self {
        self.instantaneous_rematch = on;
        self
    }

    /// Bits needed for a value in `0..=N`.
    pub fn horizon_width(&self) -> u32 {
        ceil_log2(self.n + 1).max(1)
    }

    /// Whether `k < ceil(log2 N)`, the complexity bound under which counting to
    /// the horizon cannot fit in one tick.
    pub fn satisfies_complexity_bound(&self) -> bool {
        self.k < ceil_log2(self.n)
    }

    /// Hard constraints. The complexity bound is not among them; see
    /// [`GameConfig::satisfies_complexity_bound`].
    pub fn validate(&self) -> Result<(), GameError> {
        if self.n == 0 {
            return Err(GameError::InvalidConfig("N must be at least 1".into()));
        }
        if self.k < 2 {
            return Err(GameError::InvalidConfig("k must be at least 2".into()));
        }
        if self.mode == GameMode::Opd {
            if self.t == 0 {
                return Err(GameError::InvalidConfig("t must be at least 1".into()));
            }
            if self.k_pairs == 0 {
                return Err(GameError::InvalidConfig("K must be at least 1".into()));
            }
        }
        Ok(())
    }
}

/// Parses an exact payoff written as an integer or `p/q`.
pub fn parse_payoff(s: &str) -> Option<Payoff> {
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p: i64 = p.trim().parse().ok()?;
            let q: i64 = q.trim().parse().ok()?;
            if q == 0 {
                None
            } else {
                Some(Payoff::new(p, q))
            }
        }
        None => s.parse::<i64>().ok().map(Payoff::from_integer),
    }
}

/// Formats a payoff as an integer when possible, else `p/q`.
pub fn format_payoff(p: &Payoff) -> String {
    if p.denom().is_one() {
        p.numer().to_string()
    } else {
        format!("{}/{}", p.numer(), p.denom())
    }
}

/// Contents of a `key=value` game file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GameFile {
    pub table: PayoffTable,
    pub config: GameConfig,
}

impl GameFile {
    /// Parses `key=value` lines; `#` starts a comment. Missing keys keep the
    /// intro table and [`GameConfig::default`] values.
    pub fn parse(text: &str) -> Result<GameFile, GameError> {
        let mut table = PayoffTable::intro();
        let mut config = GameConfig::default();
        let mut seen = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: String| GameError::ConfigSyntax { line, message };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, found `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.insert(key.to_string(), line).is_some() {
                return Err(err(format!("duplicate key `{key}`")));
            }
            let pay = || parse_payoff(value).ok_or_else(|| err(format!("bad payoff `{value}` for {key}")));
            let num = || {
                value
                    .parse::<u64>()
                    .map_err(|_| err(format!("bad integer `{value}` for {key}")))
            };
            match key {
                "T" => table.t = pay()?,
                "R" => table.r = pay()?,
                "P" => table.p = pay()?,
                "S" => table.s = pay()?,
                "H" => table.h = pay()?,
                "Q" => table.q = pay()?,
                "Q_hat" => table.q_hat = pay()?,
                "N" => config.n = num()?,
                "t" => config.t = num()?,
                "K" => config.k_pairs = num()? as usize,
                "k" => config.k = num()? as u32,
                "seed" => config.seed = num()?,
                "mode" => config.mode = value.parse().map_err(|e: GameError| err(e.to_string()))?,
                "instantaneous_rematch" => {
                    config.instantaneous_rematch = match value {
                        "true" | "1" | "yes" => true,
                        "false" | "0" | "no" => false,
                        _ => return Err(err(format!("bad flag `{value}`"))),
                    }
                }
                "split" => {
                    config.split_payoff = match value {
                        "symmetric" => SplitPayoff::Symmetric,
                        "asymmetric" => SplitPayoff::Asymmetric,
                        _ => return Err(err(format!("bad split rule `{value}`"))),
                    }
                }
                "unpaired" => {
                    config.unpaired_payoff = match value {
                        "zero" => UnpairedPayoff::Zero,
                        "q_hat" => UnpairedPayoff::QHat,
                        _ => return Err(err(format!("bad unpaired rule `{value}`"))),
                    }
                }
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        Ok(GameFile { table, config })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Action::*;

    fn p(v: i64) -> Payoff {
        Payoff::from_integer(v)
    }

    #[test]
    fn intro_table_payoffs() {
        let t = PayoffTable::intro();
        let o = payoff(D, C, &t, GameMode::Ftpd).unwrap();
        assert_eq!((o.first, o.second), (p(2), p(-2)));
        let o = payoff(W, C, &t, GameMode::Ftpd).unwrap();
        assert_eq!((o.first, o.second), (p(0), p(0)));
        let o = payoff(W, W, &t.clone().with_h(p(-1)), GameMode::Ftpd).unwrap();
        assert_eq!((o.first, o.second), (p(-1), p(-1)));
    }

    #[test]
    fn opt_out_splits_with_q() {
        let t = PayoffTable::intro();
        let o = payoff(O, D, &t, GameMode::Opd).unwrap();
        assert_eq!((o.first, o.second, o.split), (p(0), p(0), true));
        assert_eq!(payoff(O, D, &t, GameMode::Ftpd), Err(GameError::IllegalAction(O, GameMode::Ftpd)));
    }

    #[test]
    fn asymmetric_split_pays_q_hat_to_abandoned_partner() {
        let t = PayoffTable::intro().with_q(p(0), p(-1));
        let o = payoff_with(C, O, &t, GameMode::Opd, SplitPayoff::Asymmetric).unwrap();
        assert_eq!((o.first, o.second), (p(-1), p(0)));
        let o = payoff_with(O, O, &t, GameMode::Opd, SplitPayoff::Asymmetric).unwrap();
        assert_eq!((o.first, o.second), (p(0), p(0)));
    }

    #[test]
    fn validation_names_violations() {
        assert!(validate_table(&PayoffTable::intro(), GameMode::Ftpd, Regime::Plain).is_empty());
        let v = validate_table(&PayoffTable::from_integers(1, 1, 0, -1), GameMode::Ftpd, Regime::Plain);
        assert!(v.contains(&Violation("T > R")));
        let v = validate_table(&PayoffTable::from_integers(5, 2, 1, 0), GameMode::Ftpd, Regime::Plain);
        assert_eq!(v, vec![Violation("2R > T + S")]);
        let bad_h = PayoffTable::intro().with_h(p(1));
        assert_eq!(validate_table(&bad_h, GameMode::Ftpd, Regime::Plain), vec![Violation("H <= 0")]);
        let opd = PayoffTable::intro();
        let v = validate_table(&opd, GameMode::Opd, Regime::OptOutReduction);
        assert!(v.contains(&Violation("P >= Q")));
        assert!(v.contains(&Violation("Q_hat < 0")));
    }

    #[test]
    fn wait_strictly_dominated_when_p_positive_h_negative() {
        let t = PayoffTable::from_integers(3, 2, 1, 0).with_h(p(-1));
        let r = dominance_check(&t, GameMode::Ftpd);
        assert!(r.is_strictly_dominated(W, D));
        assert_eq!(r.surviving, vec![D]);
    }

    #[test]
    fn wait_only_weakly_dominated_when_p_and_h_zero() {
        // Row D = (T, 0, 0), row W = (0, 0, 0) over columns (C, D, W).
        let t = PayoffTable::from_integers(3, 2, 0, -1);
        let r = dominance_check(&t, GameMode::Ftpd);
        assert!(!r.is_strictly_dominated(W, D));
        assert!(r.is_dominated(W, D));
    }

    #[test]
    fn opt_out_gives_no_gain_in_reduction_regime() {
        let t = PayoffTable::from_integers(3, 2, 1, 0).with_h(p(-1)).with_q(p(0), p(-1));
        assert!(validate_table(&t, GameMode::Opd, Regime::OptOutReduction).is_empty());
        let r = dominance_check(&t, GameMode::Opd);
        // The O column pays Q to every row, so only weak dominance survives it.
        assert!(r.is_dominated(W, D) && !r.is_strictly_dominated(W, D));
        assert!(r.is_dominated(O, D));
        assert!(!r.is_dominated(D, O));
    }

    #[test]
    fn config_file_round_values() {
        let f = GameFile::parse("T=2\nR=1\nP=-1\nS=-2\nH=-1/100 # eps\nN=16\nmode=opd\nt=3\nK=4\nk=3\nseed=9\ninstantaneous_rematch=true\n").unwrap();
        assert_eq!(f.table.h, Payoff::new(-1, 100));
        assert_eq!(f.config.n, 16);
        assert_eq!(f.config.mode, GameMode::Opd);
        assert_eq!((f.config.t, f.config.k_pairs, f.config.k, f.config.seed), (3, 4, 3, 9));
        assert!(f.config.instantaneous_rematch);
        assert!(matches!(GameFile::parse("N=x"), Err(GameError::ConfigSyntax { line: 1, .. })));
        assert!(GameFile::parse("Z=1").is_err());
    }

    #[test]
    fn horizon_width_and_bound() {
        assert_eq!(GameConfig::ftpd(1000).horizon_width(), 10);
        assert_eq!(GameConfig::ftpd(16).horizon_width(), 5);
        assert!(GameConfig::ftpd(10).satisfies_complexity_bound());
        assert!(!GameConfig::ftpd(4).satisfies_complexity_bound());
        assert!(GameConfig::ftpd(5).satisfies_complexity_bound());
    }
}
