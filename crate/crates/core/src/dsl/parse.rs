use std::collections::HashSet;
use std::fmt;

use super::{CounterDecl, Field, Literal, Rule, Section, Stmt, StrategySource, Term, ENTRY_LABEL};
use crate::dsl::MAX_COUNTER_WIDTH;
use crate::game::{Action, Payoff};
use crate::vm::CmpOp;

/// A located parse error. Lines and columns are 1-based.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl Diagnostic {
    /// `file:line:col: message`.
    pub fn with_file(&self, file: &str) -> String {
        format!("{file}:{self}")
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for Diagnostic {}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(u64),
    Sym(&'static str),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(v) => write!(f, "`{v}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
        }
    }
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

const KEYWORDS: &[&str] = &[
    "strategy", "counter", "bits", "if", "then", "always", "and", "play", "inc", "goto", "label", "none", "N", "opp",
    "own", "payoff", "C", "D", "W", "O",
];

fn lex(text: &str) -> Result<(Vec<Spanned>, (usize, usize)), Diagnostic> {
    let mut toks = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);
    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, col);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars<'_>>| {
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            c
        };
        if c == '#' {
            while let Some(&c) = chars.peek() {
                if c == '\n' {
                    break;
                }
                bump(&mut chars);
            }
        } else if c.is_whitespace() {
            bump(&mut chars);
        } else if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    s.push(c);
                    bump(&mut chars);
                } else {
                    break;
                }
            }
            toks.push(Spanned {
                tok: Tok::Ident(s),
                line: tl,
                col: tc,
            });
        } else if c.is_ascii_digit() {
            let mut v: u64 = 0;
            while let Some(&c) = chars.peek() {
                if let Some(d) = c.to_digit(10) {
                    v = v.checked_mul(10).and_then(|v| v.checked_add(d as u64)).ok_or(Diagnostic {
                        line: tl,
                        col: tc,
                        message: "integer literal too large".into(),
                    })?;
                    bump(&mut chars);
                } else {
                    break;
                }
            }
            toks.push(Spanned {
                tok: Tok::Int(v),
                line: tl,
                col: tc,
            });
        } else {
            bump(&mut chars);
            let sym = match c {
                '=' | '!' | '>' if chars.peek() == Some(&'=') => {
                    bump(&mut chars);
                    match c {
                        '=' => "==",
                        '!' => "!=",
                        _ => ">=",
                    }
                }
                '<' => "<",
                ':' => ":",
                '-' => "-",
                '/' => "/",
                _ => {
                    return Err(Diagnostic {
                        line: tl,
                        col: tc,
                        message: format!("unexpected character `{}`", c.escape_debug()),
                    })
                }
            };
            toks.push(Spanned {
                tok: Tok::Sym(sym),
                line: tl,
                col: tc,
            });
        }
    }
    Ok((toks, (line, col)))
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    eof: (usize, usize),
    counters: Vec<CounterDecl>,
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn peek_ident(&self) -> Option<&str> {
        match self.peek() {
            Some(Tok::Ident(s)) => Some(s),
            _ => None,
        }
    }

    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map(|s| (s.line, s.col)).unwrap_or(self.eof)
    }

    fn error_at<T>(&self, (line, col): (usize, usize), message: impl Into<String>) -> PResult<T> {
        Err(Diagnostic {
            line,
            col,
            message: message.into(),
        })
    }

    fn error<T>(&self, expected: &str) -> PResult<T> {
        let found = match self.peek() {
            Some(t) => t.to_string(),
            None => "end of input".into(),
        };
        self.error_at(self.here(), format!("expected {expected}, found {found}"))
    }

    fn keyword(&mut self, kw: &str) -> PResult<()> {
        if self.peek_ident() == Some(kw) {
            self.pos += 1;
            Ok(())
        } else {
            self.error(&format!("`{kw}`"))
        }
    }

    fn sym(&mut self, sym: &'static str) -> PResult<()> {
        if self.peek() == Some(&Tok::Sym(sym)) {
            self.pos += 1;
            Ok(())
        } else {
            self.error(&format!("`{sym}`"))
        }
    }

    fn name(&mut self, what: &str) -> PResult<String> {
        match self.peek() {
            Some(Tok::Ident(s)) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.error(what),
        }
    }

    fn int(&mut self) -> PResult<u64> {
        match self.peek() {
            Some(Tok::Int(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(v)
            }
            _ => self.error("integer"),
        }
    }

    fn action(&mut self) -> PResult<Action> {
        let a = self
            .peek_ident()
            .filter(|s| s.len() == 1)
            .and_then(|s| Action::from_char(s.chars().next().unwrap()));
        match a {
            Some(a) => {
                self.pos += 1;
                Ok(a)
            }
            None => self.error("action (C, D, W or O)"),
        }
    }

    fn program(&mut self) -> PResult<StrategySource> {
        self.keyword("strategy")?;
        let name = self.name("strategy name")?;
        while self.peek_ident() == Some("counter") {
            self.pos += 1;
            let at = self.here();
            let cname = self.name("counter name")?;
            if self.counters.iter().any(|c| c.name == cname) {
                return self.error_at(at, format!("duplicate counter `{cname}`"));
            }
            self.sym(":")?;
            let wat = self.here();
            let width = self.int()?;
            if width == 0 {
                return self.error_at(wat, "counter width must be at least 1 bit");
            }
            if width > MAX_COUNTER_WIDTH as u64 {
                return self.error_at(
                    wat,
                    format!("counter width {width} exceeds the cap of {MAX_COUNTER_WIDTH} bits"),
                );
            }
            self.keyword("bits")?;
            self.counters.push(CounterDecl {
                name: cname,
                width: width as u32,
            });
        }
        let mut sections = vec![Section {
            label: None,
            rules: Vec::new(),
        }];
        let mut labels: HashSet<String> = HashSet::new();
        let mut gotos: Vec<(String, (usize, usize))> = Vec::new();
        let mut rule_count = 0;
        while self.peek().is_some() {
            match self.peek_ident() {
                Some("label") => {
                    self.pos += 1;
                    let at = self.here();
                    let label = self.name("label name")?;
                    if label == ENTRY_LABEL || !labels.insert(label.clone()) {
                        return self.error_at(at, format!("duplicate label `{label}`"));
                    }
                    let entry_unused = sections.len() == 1 && sections[0].label.is_none() && sections[0].rules.is_empty();
                    if entry_unused {
                        sections[0].label = Some(label);
                    } else {
                        sections.push(Section {
                            label: Some(label),
                            rules: Vec::new(),
                        });
                    }
                }
                Some("if") | Some("always") => {
                    let rule = self.rule(&mut gotos)?;
                    sections.last_mut().expect("one section").rules.push(rule);
                    rule_count += 1;
                }
                _ => return self.error("`if`, `always` or `label`"),
            }
        }
        if rule_count == 0 {
            return self.error("`if` or `always`");
        }
        if sections[0].label.is_none() {
            labels.insert(ENTRY_LABEL.into());
        }
        for (label, at) in gotos {
            if !labels.contains(&label) {
                return self.error_at(at, format!("unknown label `{label}`"));
            }
        }
        Ok(StrategySource {
            name,
            counters: std::mem::take(&mut self.counters),
            sections,
        })
    }

    fn rule(&mut self, gotos: &mut Vec<(String, (usize, usize))>) -> PResult<Rule> {
        let mut guard = Vec::new();
        if self.peek_ident() == Some("always") {
            self.pos += 1;
        } else {
            self.keyword("if")?;
            guard.push(self.term()?);
            while self.peek_ident() == Some("and") {
                self.pos += 1;
                guard.push(self.term()?);
            }
            self.keyword("then")?;
        }
        let mut body = Vec::new();
        loop {
            match self.peek_ident() {
                Some("play") => {
                    self.pos += 1;
                    body.push(Stmt::Play(self.action()?));
                }
                Some("inc") => {
                    self.pos += 1;
                    let at = self.here();
                    let c = self.name("counter name")?;
                    if !self.counters.iter().any(|d| d.name == c) {
                        return self.error_at(at, format!("unknown counter `{c}`"));
                    }
                    body.push(Stmt::Inc(c));
                }
                Some("goto") => {
                    self.pos += 1;
                    let at = self.here();
                    let label = match self.peek_ident() {
                        Some(ENTRY_LABEL) => {
                            self.pos += 1;
                            ENTRY_LABEL.to_string()
                        }
                        _ => self.name("label name")?,
                    };
                    gotos.push((label.clone(), at));
                    body.push(Stmt::Goto(label));
                }
                _ => break,
            }
        }
        if body.is_empty() {
            return self.error("`play`, `inc` or `goto`");
        }
        Ok(Rule { guard, body })
    }

    fn cmp(&mut self) -> PResult<CmpOp> {
        let op = match self.peek() {
            Some(Tok::Sym("==")) => CmpOp::Eq,
            Some(Tok::Sym("!=")) => CmpOp::Ne,
            Some(Tok::Sym("<")) => CmpOp::Lt,
            Some(Tok::Sym(">=")) => CmpOp::Ge,
            _ => return self.error("comparison (==, !=, <, >=)"),
        };
        self.pos += 1;
        Ok(op)
    }

    fn term(&mut self) -> PResult<Term> {
        let at = self.here();
        let field = match self.peek_ident() {
            Some("opp") => Field::Opp,
            Some("own") => Field::Own,
            Some("payoff") => Field::Payoff,
            Some(s) if self.counters.iter().any(|c| c.name == s) => Field::Counter(s.to_string()),
            Some(s) => return self.error_at(at, format!("unknown field `{s}`")),
            None => return self.error("field"),
        };
        self.pos += 1;
        let op_at = self.here();
        let op = self.cmp()?;
        let value = match field {
            Field::Opp | Field::Own => {
                if matches!(op, CmpOp::Lt | CmpOp::Ge) {
                    return self.error_at(op_at, "actions only support == and !=");
                }
                if self.peek_ident() == Some("none") {
                    self.pos += 1;
                    Literal::None
                } else {
                    Literal::Action(self.action()?)
                }
            }
            Field::Payoff => {
                let negative = self.peek() == Some(&Tok::Sym("-"));
                if negative {
                    self.pos += 1;
                }
                let num = self.int()?;
                let den = if self.peek() == Some(&Tok::Sym("/")) {
                    self.pos += 1;
                    let d_at = self.here();
                    let d = self.int()?;
                    if d == 0 {
                        return self.error_at(d_at, "zero denominator");
                    }
                    d
                } else {
                    1
                };
                let (Ok(n), Ok(d)) = (i64::try_from(num), i64::try_from(den)) else {
                    return self.error_at(at, "payoff literal out of range");
                };
                Literal::Payoff(Payoff::new(if negative { -n } else { n }, d))
            }
            Field::Counter(_) => {
                if self.peek_ident() == Some("N") {
                    self.pos += 1;
                    if self.peek() == Some(&Tok::Sym("-")) {
                        self.sym("-")?;
                        Literal::HorizonMinus(self.int()?)
                    } else {
                        Literal::HorizonMinus(0)
                    }
                } else {
                    Literal::Int(self.int()?)
                }
            }
        };
        Ok(Term { field, op, value })
    }
}

/// Parses strategy source text. Never panics.
pub fn parse(text: &str) -> Result<StrategySource, Diagnostic> {
    let (toks, eof) = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        eof,
        counters: Vec::new(),
    };
    p.program()
}

/// Parses raw bytes, rejecting invalid UTF-8 with a located diagnostic.
pub fn parse_bytes(bytes: &[u8]) -> Result<StrategySource, Diagnostic> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse(text),
        Err(e) => {
            let valid = &bytes[..e.valid_up_to()];
            let text = std::str::from_utf8(valid).unwrap_or("");
            let line = text.matches('\n').count() + 1;
            let col = text.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
            Err(Diagnostic {
                line,
                col,
                message: "invalid UTF-8".into(),
            })
        }
    }
}
