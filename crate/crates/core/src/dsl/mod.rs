//! Strategy description language.
//!
//! ```text
//! strategy GRIM
//! if opp != C then goto punish   # first tick: opp is none, guard is false
//! always play C
//! label punish
//! always play D
//! ```
//!
//! A program is a list of sections. The first section is the entry; `label X`
//! opens a new one. Each tick evaluates the rules of the current section in
//! order and fires the first whose guard holds. `play A` emits the tick's
//! action; the next tick starts again at the top of the section, or at `L`
//! when the rule ends in `play A goto L`. A bare `goto L` continues evaluating
//! `L` within the same tick. A section whose rules all fail plays W.

pub(crate) mod compile;
mod parse;

use std::fmt::{self, Write as _};

pub use compile::{canonicalize, compile, decompile, CompileError, MAX_COUNTER_WIDTH};
pub use parse::{parse, parse_bytes, Diagnostic};

use crate::game::{format_payoff, Action, Payoff};
use crate::vm::CmpOp;

/// Name of the entry section when the source does not label it.
pub const ENTRY_LABEL: &str = "start";

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StrategySource {
    pub name: String,
    pub counters: Vec<CounterDecl>,
    pub sections: Vec<Section>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CounterDecl {
    pub name: String,
    pub width: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Section {
    /// `None` only for an unlabeled entry section.
    pub label: Option<String>,
    pub rules: Vec<Rule>,
}

impl Section {
    pub fn name(&self) -> &str {
        self.label.as_deref().unwrap_or(ENTRY_LABEL)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rule {
    /// Conjunction of terms; empty means `always`.
    pub guard: Vec<Term>,
    pub body: Vec<Stmt>,
}

impl Rule {
    pub fn always(body: Vec<Stmt>) -> Self {
        Rule { guard: Vec::new(), body }
    }

    pub fn is_always(&self) -> bool {
        self.guard.is_empty()
    }

    pub fn play(&self) -> Option<Action> {
        self.body.iter().find_map(|s| match s {
            Stmt::Play(a) => Some(*a),
            _ => None,
        })
    }

    pub fn goto(&self) -> Option<&str> {
        self.body.iter().find_map(|s| match s {
            Stmt::Goto(l) => Some(l.as_str()),
            _ => None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Term {
    pub field: Field,
    pub op: CmpOp,
    pub value: Literal,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Field {
    /// Opponent's last action.
    Opp,
    /// Own last action.
    Own,
    /// Last payoff received.
    Payoff,
    Counter(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Literal {
    Action(Action),
    None,
    Int(u64),
    Payoff(Payoff),
    /// `N - m` (`m = 0` prints as `N`).
    HorizonMinus(u64),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Stmt {
    Play(Action),
    Inc(String),
    Goto(String),
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Opp => f.write_str("opp"),
            Field::Own => f.write_str("own"),
            Field::Payoff => f.write_str("payoff"),
            Field::Counter(name) => f.write_str(name),
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Action(a) => write!(f, "{a}"),
            Literal::None => f.write_str("none"),
            Literal::Int(v) => write!(f, "{v}"),
            Literal::Payoff(p) => f.write_str(&format_payoff(p)),
            Literal::HorizonMinus(0) => f.write_str("N"),
            Literal::HorizonMinus(m) => write!(f, "N - {m}"),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.field, self.op.symbol(), self.value)
    }
}

impl fmt::Display for Stmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stmt::Play(a) => write!(f, "play {a}"),
            Stmt::Inc(c) => write!(f, "inc {c}"),
            Stmt::Goto(l) => write!(f, "goto {l}"),
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.guard.is_empty() {
            f.write_str("always")?;
        } else {
            f.write_str("if ")?;
            for (i, t) in self.guard.iter().enumerate() {
                if i > 0 {
                    f.write_str(" and ")?;
                }
                write!(f, "{t}")?;
            }
            f.write_str(" then")?;
        }
        for s in &self.body {
            write!(f, " {s}")?;
        }
        Ok(())
    }
}

/// Canonical text: one declaration or rule per line, no comments.
pub fn print(src: &StrategySource) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "strategy {}", src.name);
    for c in &src.counters {
        let _ = writeln!(out, "counter {}: {} bits", c.name, c.width);
    }
    for section in &src.sections {
        if let Some(label) = &section.label {
            let _ = writeln!(out, "label {label}");
        }
        for rule in &section.rules {
            let _ = writeln!(out, "{rule}");
        }
    }
    out
}

impl fmt::Display for StrategySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print(self))
    }
}

/// Normalizes formatting: `parse` then `print`.
pub fn roundtrip(text: &str) -> Result<String, Diagnostic> {
    parse(text).map(|s| print(&s))
}
