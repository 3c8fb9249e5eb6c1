//! Exhaustive search over small strategy programs.
//!
//! Candidates are canonical sources (see [`crate::dsl::canonicalize`]) built
//! from a fixed alphabet: guards of up to two terms over `opp`, `own` and an
//! optional counter `c`, bodies of `[inc c] [play A] [goto L]`. Payoff guards
//! are left out; a candidate is kept if it compiles to at most `size_bound`
//! instructions and its worst-case tick cost is bounded.

use rayon::prelude::*;

use crate::dsl::{self, compile::rule_size, CounterDecl, Field, Literal, Rule, Section, Stmt, StrategySource, Term};
use crate::game::{Action, GameConfig, Payoff};
use crate::vm::{CmpOp, StrategyProgram, TickCost};

use super::AnalysisError;

/// Largest raw candidate count a search will attempt.
pub const SEARCH_LIMIT: u64 = 200_000_000;

/// Best candidate so far: payoff, canonical text, program.
type Best = (Payoff, String, StrategyProgram);

const COUNTER: &str = "c";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchSpace {
    /// Maximum compiled instruction count.
    pub size_bound: usize,
    pub max_sections: usize,
    pub max_guard_terms: usize,
    /// Allow a counter `c` (incremented by `inc c`, compared against 1..=N).
    pub counter: bool,
}

impl SearchSpace {
    pub fn new(size_bound: usize) -> Self {
        SearchSpace {
            size_bound,
            max_sections: 4,
            max_guard_terms: 2,
            counter: true,
        }
    }
}

struct Alphabet {
    sections: usize,
    /// Per section: every rule that may appear in it, with its size.
    guarded: Vec<Vec<(Rule, usize)>>,
    always: Vec<Vec<(Rule, usize)>>,
}

fn label(i: usize) -> String {
    if i == 0 {
        dsl::ENTRY_LABEL.to_string()
    } else {
        format!("s{i}")
    }
}

fn terms(space: &SearchSpace, config: &GameConfig) -> Vec<Term> {
    let mut values: Vec<Literal> = Action::legal(config.mode).iter().map(|&a| Literal::Action(a)).collect();
    values.push(Literal::None);
    let mut out = Vec::new();
    for field in [Field::Opp, Field::Own] {
        for op in [CmpOp::Eq, CmpOp::Ne] {
            for v in &values {
                out.push(Term {
                    field: field.clone(),
                    op,
                    value: v.clone(),
                });
            }
        }
    }
    if space.counter {
        for op in [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Ge] {
            for v in 1..=config.n {
                out.push(Term {
                    field: Field::Counter(COUNTER.into()),
                    op,
                    value: Literal::Int(v),
                });
            }
        }
    }
    out
}

fn bodies(space: &SearchSpace, config: &GameConfig, sections: usize, me: usize) -> Vec<Vec<Stmt>> {
    let actions = Action::legal(config.mode);
    let mut tails: Vec<Vec<Stmt>> = Vec::new();
    for &a in actions {
        tails.push(vec![Stmt::Play(a)]);
        for l in (0..sections).filter(|&l| l != me) {
            tails.push(vec![Stmt::Play(a), Stmt::Goto(label(l))]);
        }
    }
    // A bare jump to the own section would spin within the tick.
    for l in (0..sections).filter(|&l| l != me) {
        tails.push(vec![Stmt::Goto(label(l))]);
    }
    let mut out = tails.clone();
    if space.counter {
        for t in &tails {
            let mut b = vec![Stmt::Inc(COUNTER.into())];
            b.extend(t.iter().cloned());
            out.push(b);
        }
    }
    out
}

impl Alphabet {
    fn new(space: &SearchSpace, config: &GameConfig, sections: usize) -> Self {
        let terms = terms(space, config);
        let mut guards: Vec<Vec<Term>> = terms.iter().map(|t| vec![t.clone()]).collect();
        if space.max_guard_terms >= 2 {
            for a in &terms {
                for b in &terms {
                    if a != b {
                        guards.push(vec![a.clone(), b.clone()]);
                    }
                }
            }
        }
        let mut guarded = Vec::new();
        let mut always = Vec::new();
        for me in 0..sections {
            let bodies = bodies(space, config, sections, me);
            let mut g = Vec::new();
            for guard in &guards {
                for body in &bodies {
                    let rule = Rule {
                        guard: guard.clone(),
                        body: body.clone(),
                    };
                    let size = rule_size(&rule);
                    if size <= space.size_bound {
                        g.push((rule, size));
                    }
                }
            }
            g.sort_by_key(|(_, s)| *s);
            let mut a: Vec<(Rule, usize)> = bodies
                .iter()
                .map(|b| {
                    let r = Rule::always(b.clone());
                    let s = rule_size(&r);
                    (r, s)
                })
                .collect();
            a.sort_by_key(|(_, s)| *s);
            guarded.push(g);
            always.push(a);
        }
        Alphabet {
            sections,
            guarded,
            always,
        }
    }

    fn min_always(&self, section: usize) -> usize {
        self.always[section].first().map_or(usize::MAX, |r| r.1)
    }

    /// Minimum size of sections `from..`.
    fn min_rest(&self, from: usize) -> usize {
        (from..self.sections).map(|s| self.min_always(s)).sum()
    }

    /// Raw number of rule sequences within `budget` (before the canonical filter).
    fn count(&self, budget: usize) -> u64 {
        // sections[s][b]: ways to fill sections s.. within b instructions.
        let b_max = budget;
        let mut sections = vec![vec![0u64; b_max + 1]; self.sections + 1];
        sections[self.sections] = vec![1; b_max + 1];
        for s in (0..self.sections).rev() {
            // rules[a]: ways to fill the rest of section s within a, then the
            // following sections.
            let mut rules = vec![0u64; b_max + 1];
            for a in 0..=b_max {
                let mut total: u64 = 0;
                for (_, size) in &self.always[s] {
                    if *size > a {
                        break;
                    }
                    total = total.saturating_add(sections[s + 1][a - size]);
                }
                for (_, size) in &self.guarded[s] {
                    if *size > a {
                        break;
                    }
                    total = total.saturating_add(rules[a - size]);
                }
                rules[a] = total;
            }
            sections[s] = rules;
        }
        sections[0][budget]
    }
}

fn uses_counter(sections: &[Section]) -> bool {
    sections.iter().flat_map(|s| &s.rules).any(|r| {
        r.guard.iter().any(|t| matches!(t.field, Field::Counter(_))) || r.body.iter().any(|s| matches!(s, Stmt::Inc(_)))
    })
}

struct Walker<'a, F> {
    alphabet: &'a Alphabet,
    config: &'a GameConfig,
    score: &'a F,
    best: Option<Best>,
    searched: u64,
    /// Labels referenced so far; canonical sources name sections in the order
    /// a breadth-first walk from the entry first reaches them.
    discovered: usize,
}

fn target(rule: &Rule) -> Option<usize> {
    rule.goto().and_then(|l| l.strip_prefix('s')).and_then(|n| n.parse().ok())
}

impl<'a, F: Fn(&StrategyProgram) -> Option<Payoff>> Walker<'a, F> {
    fn section(&mut self, built: &mut Vec<Section>, budget: usize) {
        let i = built.len();
        if i == self.alphabet.sections {
            self.candidate(built);
            return;
        }
        let rest = self.alphabet.min_rest(i + 1);
        if budget < rest || self.discovered < i {
            return;
        }
        built.push(Section {
            label: (i > 0).then(|| label(i)),
            rules: Vec::new(),
        });
        self.rules(built, budget - rest, rest);
        built.pop();
    }

    /// Records the rule's jump target; false if it skips an undiscovered label.
    fn enter(&mut self, rule: &Rule) -> Option<bool> {
        match target(rule) {
            Some(t) if t > self.discovered + 1 => None,
            Some(t) if t == self.discovered + 1 => {
                self.discovered += 1;
                Some(true)
            }
            _ => Some(false),
        }
    }

    fn rules(&mut self, built: &mut Vec<Section>, avail: usize, rest: usize) {
        let i = built.len() - 1;
        let alphabet = self.alphabet;
        for (rule, s) in &alphabet.always[i] {
            if *s > avail {
                break;
            }
            let Some(new) = self.enter(rule) else { continue };
            built[i].rules.push(rule.clone());
            self.section(built, avail - s + rest);
            built[i].rules.pop();
            self.discovered -= new as usize;
        }
        for (rule, s) in &alphabet.guarded[i] {
            if *s + alphabet.min_always(i) > avail {
                break;
            }
            let Some(new) = self.enter(rule) else { continue };
            built[i].rules.push(rule.clone());
            self.rules(built, avail - s, rest);
            built[i].rules.pop();
            self.discovered -= new as usize;
        }
    }

    fn candidate(&mut self, sections: &mut Vec<Section>) {
        let counters = if uses_counter(sections) {
            vec![CounterDecl {
                name: COUNTER.into(),
                width: self.config.horizon_width(),
            }]
        } else {
            Vec::new()
        };
        let src = StrategySource {
            name: "candidate".into(),
            counters,
            sections: std::mem::take(sections),
        };
        self.judge(&src);
        *sections = src.sections;
    }

    fn judge(&mut self, src: &StrategySource) {
        let Ok(program) = dsl::compile(src, self.config) else { return };
        if program.worst_case_cost == TickCost::Unbounded {
            return;
        }
        self.searched += 1;
        let Some(payoff) = (self.score)(&program) else { return };
        let better = match &self.best {
            None => true,
            Some((b, _, _)) if payoff > *b => true,
            Some((b, text, p)) => {
                payoff == *b
                    && (program.instructions.len(), dsl::print(src).as_str()) < (p.instructions.len(), text.as_str())
            }
        };
        if better {
            self.best = Some((payoff, dsl::print(src), program));
        }
    }
}

/// Raw size of the search (an upper bound on candidates compiled).
pub fn search_size(space: &SearchSpace, config: &GameConfig) -> u64 {
    (1..=space.max_sections)
        .map(|s| Alphabet::new(space, config, s).count(space.size_bound))
        .fold(0u64, u64::saturating_add)
}

/// Best candidate found by a search.
#[derive(Clone, Debug)]
pub struct Found {
    pub payoff: Payoff,
    /// Canonical source text.
    pub source: String,
    pub program: StrategyProgram,
    /// Candidates that passed the canonical and cost filters.
    pub searched: u64,
}

/// Maximizes `score` over the search space; ties go to the fewest
/// instructions, then to the lexicographically smallest canonical text. Candidates scored `None` are skipped.
pub fn search<F>(space: &SearchSpace, config: &GameConfig, score: F) -> Result<Found, AnalysisError>
where
    F: Fn(&StrategyProgram) -> Option<Payoff> + Sync,
{
    let estimate = search_size(space, config);
    if estimate > SEARCH_LIMIT {
        return Err(AnalysisError::SearchTooLarge {
            estimate,
            limit: SEARCH_LIMIT,
        });
    }
    // Split the work on the entry section's first rule.
    let mut jobs = Vec::new();
    for sections in 1..=space.max_sections {
        let alphabet = Alphabet::new(space, config, sections);
        let n_first = alphabet.always[0].len() + alphabet.guarded[0].len();
        jobs.push((alphabet, n_first));
    }
    let work: Vec<(usize, usize)> = jobs
        .iter()
        .enumerate()
        .flat_map(|(j, (_, n))| (0..*n).map(move |k| (j, k)))
        .collect();
    let results: Vec<(Option<Best>, u64)> = work
        .par_iter()
        .map(|&(j, k)| {
            let alphabet = &jobs[j].0;
            let mut walker = Walker {
                alphabet,
                config,
                score: &score,
                best: None,
                searched: 0,
                discovered: 0,
            };
            let rest = alphabet.min_rest(1);
            if space.size_bound >= rest {
                let avail = space.size_bound - rest;
                let n_always = alphabet.always[0].len();
                let mut built = vec![Section {
                    label: None,
                    rules: Vec::new(),
                }];
                let first = if k < n_always { &alphabet.always[0][k].0 } else { &alphabet.guarded[0][k - n_always].0 };
                if walker.enter(first).is_none() {
                    return (None, 0);
                }
                if k < n_always {
                    let (rule, s) = &alphabet.always[0][k];
                    if *s <= avail {
                        built[0].rules.push(rule.clone());
                        walker.section(&mut built, avail - s + rest);
                    }
                } else {
                    let (rule, s) = &alphabet.guarded[0][k - n_always];
                    if *s + alphabet.min_always(0) <= avail {
                        built[0].rules.push(rule.clone());
                        walker.rules(&mut built, avail - s, rest);
                    }
                }
            }
            (walker.best, walker.searched)
        })
        .collect();
    let searched = results.iter().map(|r| r.1).sum();
    let best = results
        .into_iter()
        .filter_map(|r| r.0)
        .reduce(|a, b| {
            let key = |x: &Best| (x.2.instructions.len(), x.1.clone());
            if b.0 > a.0 || (b.0 == a.0 && key(&b) < key(&a)) {
                b
            } else {
                a
            }
        });
    match best {
        Some((payoff, source, program)) => Ok(Found {
            payoff,
            source,
            program,
            searched,
        }),
        None => Err(AnalysisError::NoCandidates),
    }
}
