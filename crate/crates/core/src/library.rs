//! Built-in strategies.
//!
//! Fixed strategies ship as `.pdstrat` files under `strategies/`. The counting
//! defector depends on the horizon and is generated per configuration.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::dsl::{self, CompileError, StrategySource};
use crate::game::{GameConfig, GameMode};
use crate::vm::{StrategyProgram, TickCost};

#[derive(Debug, Error)]
pub enum LibraryError {
    #[error("unknown strategy `{0}` (try --list-strategies)")]
    Unknown(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// Located diagnostic, already formatted as `file:line:col: message`.
    #[error("{0}")]
    Parse(String),
    #[error("{path}: {source}")]
    Compile {
        path: String,
        #[source]
        source: CompileError,
    },
}

/// Documented worst-case per-tick compare cost of a builtin.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DocumentedCost {
    Fixed(u32),
    /// Bit width of a counter that can hold `N`.
    HorizonWidth,
}

impl DocumentedCost {
    pub fn for_config(self, config: &GameConfig) -> u32 {
        match self {
            DocumentedCost::Fixed(c) => c,
            DocumentedCost::HorizonWidth => config.horizon_width(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Builtin {
    pub name: &'static str,
    pub summary: &'static str,
    pub cost: DocumentedCost,
    pub mode: Option<GameMode>,
    source: Option<&'static str>,
}

const CATALOG: &[Builtin] = &[
    Builtin {
        name: "GRIM",
        summary: "cooperate until the opponent plays anything but C, then defect",
        cost: DocumentedCost::Fixed(2),
        mode: None,
        source: Some(include_str!("../strategies/grim.pdstrat")),
    },
    Builtin {
        name: "OFT",
        summary: "Opt-for-Tat: cooperate, opt out after any non-C",
        cost: DocumentedCost::Fixed(2),
        mode: Some(GameMode::Opd),
        source: Some(include_str!("../strategies/oft.pdstrat")),
    },
    Builtin {
        name: "TFT",
        summary: "Tit-for-Tat: cooperate, defect after any non-C",
        cost: DocumentedCost::Fixed(2),
        mode: None,
        source: Some(include_str!("../strategies/tft.pdstrat")),
    },
    Builtin {
        name: "AllC",
        summary: "always cooperate",
        cost: DocumentedCost::Fixed(0),
        mode: None,
        source: Some(include_str!("../strategies/allc.pdstrat")),
    },
    Builtin {
        name: "AllD",
        summary: "always defect",
        cost: DocumentedCost::Fixed(0),
        mode: None,
        source: Some(include_str!("../strategies/alld.pdstrat")),
    },
    Builtin {
        name: "AllW",
        summary: "always wait",
        cost: DocumentedCost::Fixed(0),
        mode: None,
        source: Some(include_str!("../strategies/allw.pdstrat")),
    },
    Builtin {
        name: "CountingDefector",
        summary: "cooperate for N-2 ticks, then check a counter against N-2 and defect",
        cost: DocumentedCost::HorizonWidth,
        mode: None,
        source: None,
    },
];

pub fn list() -> &'static [Builtin] {
    CATALOG
}

pub fn lookup(name: &str) -> Option<&'static Builtin> {
    CATALOG.iter().find(|b| b.name.eq_ignore_ascii_case(name))
}

/// Source of the counting defector for horizon `n`: an unrolled run of
/// `n - 2` cooperative ticks, each bumping the counter, then a single
/// counter compare against `N - 2` that gates defection.
pub fn counting_defector_source(n: u64) -> String {
    let width = crate::game::ceil_log2(n.saturating_add(1)).max(1);
    let steps = n.saturating_sub(2);
    let mut out = String::new();
    let _ = writeln!(out, "strategy CountingDefector");
    let _ = writeln!(out, "counter i: {width} bits");
    for s in 0..steps {
        if s > 0 {
            let _ = writeln!(out, "label t{s}");
        }
        let next = if s + 1 < steps { format!("t{}", s + 1) } else { "check".to_string() };
        let _ = writeln!(out, "always inc i play C goto {next}");
    }
    if steps > 0 {
        let _ = writeln!(out, "label check");
    }
    let _ = writeln!(out, "if i >= N - 2 then goto defect");
    let _ = writeln!(out, "always play C");
    let _ = writeln!(out, "label defect");
    let _ = writeln!(out, "always play D");
    out
}

impl Builtin {
    pub fn source_text(&self, config: &GameConfig) -> String {
        match self.source {
            Some(text) => text.to_string(),
            None => counting_defector_source(config.n),
        }
    }

    pub fn source(&self, config: &GameConfig) -> StrategySource {
        dsl::parse(&self.source_text(config)).expect("builtin sources parse")
    }

    pub fn compile(&self, config: &GameConfig) -> StrategyProgram {
        dsl::compile(&self.source(config), config).expect("builtin sources compile")
    }
}

/// Compiled builtin for `config`.
pub fn get(name: &str, config: &GameConfig) -> Result<StrategyProgram, LibraryError> {
    lookup(name)
        .map(|b| b.compile(config))
        .ok_or_else(|| LibraryError::Unknown(name.to_string()))
}

/// Compiles a `.pdstrat` file.
pub fn load_file(path: &Path, config: &GameConfig) -> Result<StrategyProgram, LibraryError> {
    let shown = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|source| LibraryError::Io {
        path: shown.clone(),
        source,
    })?;
    let src = dsl::parse_bytes(&bytes).map_err(|d| LibraryError::Parse(d.with_file(&shown)))?;
    dsl::compile(&src, config).map_err(|source| LibraryError::Compile { path: shown, source })
}

/// A builtin name, or else a path to a strategy file.
pub fn resolve(spec: &str, config: &GameConfig) -> Result<StrategyProgram, LibraryError> {
    if let Some(b) = lookup(spec) {
        return Ok(b.compile(config));
    }
    let path = Path::new(spec);
    if path.extension().is_some() || path.exists() {
        return load_file(path, config);
    }
    Err(LibraryError::Unknown(spec.to_string()))
}

/// One line per builtin, as printed by `--list-strategies`.
pub fn listing(config: &GameConfig) -> String {
    let mut out = String::new();
    for b in CATALOG {
        let cost = match b.cost {
            DocumentedCost::Fixed(c) => c.to_string(),
            DocumentedCost::HorizonWidth => format!("{} (ceil log2(N+1) at N={})", b.cost.for_config(config), config.n),
        };
        let _ = writeln!(out, "{:<17} cost {:<26} {}", b.name, cost, b.summary);
    }
    out
}

/// Checks every builtin's measured worst-case cost against its documented one.
pub fn verify_costs(config: &GameConfig) -> Vec<(&'static str, TickCost, u32)> {
    CATALOG
        .iter()
        .filter_map(|b| {
            let measured = b.compile(config).worst_case_cost;
            let documented = b.cost.for_config(config);
            (measured != TickCost::Bounded(documented)).then_some((b.name, measured, documented))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Action;
    use crate::vm::{reset, Observation};
    use num_rational::Rational64;

    #[test]
    fn documented_costs_hold() {
        for n in [3, 4, 10, 16, 100, 1000] {
            let bad = verify_costs(&GameConfig::ftpd(n));
            assert!(bad.is_empty(), "N={n}: {bad:?}");
        }
        let cfg = GameConfig::ftpd(1000);
        assert_eq!(get("CountingDefector", &cfg).unwrap().worst_case_cost, TickCost::Bounded(10));
    }

    #[test]
    fn first_moves() {
        let cfg = GameConfig::ftpd(10);
        let first = Observation::first(10);
        for (name, action) in [("GRIM", Action::C), ("alld", Action::D), ("AllW", Action::W), ("OFT", Action::C)] {
            let p = get(name, &cfg).unwrap();
            assert_eq!(reset(&p).tick(&p, &first, 2).unwrap().action, action, "{name}");
        }
    }

    #[test]
    fn oft_opts_out_after_defection() {
        let cfg = GameConfig::opd(10, 1, 1);
        let p = get("OFT", &cfg).unwrap();
        let mut vm = reset(&p);
        vm.tick(&p, &Observation::first(10), 2).unwrap();
        let obs = Observation::after(Action::C, Action::D, Rational64::from_integer(-2), 10);
        assert_eq!(vm.tick(&p, &obs, 2).unwrap().action, Action::O);
    }

    #[test]
    fn unknown_names_fail() {
        assert!(matches!(get("Pavlov", &GameConfig::default()), Err(LibraryError::Unknown(_))));
        assert!(matches!(resolve("Pavlov", &GameConfig::default()), Err(LibraryError::Unknown(_))));
    }

    #[test]
    fn counting_defector_for_tiny_horizons() {
        for n in 1..=3 {
            let cfg = GameConfig::ftpd(n);
            get("CountingDefector", &cfg).unwrap();
        }
    }
}
