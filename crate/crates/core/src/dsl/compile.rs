use std::collections::{HashMap, HashSet, VecDeque};

use thiserror::Error;

use super::{CounterDecl, Field, Literal, Rule, Section, Stmt, StrategySource, Term, ENTRY_LABEL};
use crate::game::{ceil_log2, Action, GameConfig};
use crate::vm::{CmpOp, Instruction, ObsField, Operand, Register, StrategyProgram, TickCost, ACTION_WIDTH, PAYOFF_WIDTH};

pub const MAX_COUNTER_WIDTH: u32 = 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompileError {
    #[error("counter `{name}` is {width} bits wide; the cap is {MAX_COUNTER_WIDTH}")]
    CounterTooWide { name: String, width: u32 },
    #[error("unknown counter `{0}`")]
    UnknownCounter(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("rule `{rule}`: {reason}")]
    BadRule { rule: String, reason: &'static str },
    #[error("term `{0}` compares values of different kinds")]
    TypeMismatch(String),
    #[error("program has no rules")]
    Empty,
    #[error("cannot decompile: {0}")]
    NotDecompilable(String),
}

fn check_body(rule: &Rule) -> Result<(), CompileError> {
    let bad = |reason| {
        Err(CompileError::BadRule {
            rule: rule.to_string(),
            reason,
        })
    };
    let mut seen_play = false;
    let mut seen_goto = false;
    for s in &rule.body {
        match s {
            _ if seen_goto => return bad("goto must be the last statement"),
            Stmt::Inc(_) if seen_play => return bad("inc must come before play"),
            Stmt::Inc(_) => {}
            Stmt::Play(_) if seen_play => return bad("at most one play per rule"),
            Stmt::Play(_) => seen_play = true,
            Stmt::Goto(_) => seen_goto = true,
        }
    }
    if !seen_play && !seen_goto {
        return bad("a rule must end in play or goto");
    }
    Ok(())
}

fn check_term(term: &Term) -> Result<(), CompileError> {
    let ok = match (&term.field, &term.value) {
        (Field::Opp | Field::Own, Literal::Action(_) | Literal::None) => matches!(term.op, CmpOp::Eq | CmpOp::Ne),
        (Field::Payoff, Literal::Payoff(_)) => true,
        (Field::Counter(_), Literal::Int(_) | Literal::HorizonMinus(_)) => true,
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(CompileError::TypeMismatch(term.to_string()))
    }
}

/// Compare width of `term` under `config`; mirrors the machine's accounting.
pub(crate) fn term_width(term: &Term, counters: &[CounterDecl], config: &GameConfig) -> u32 {
    let horizon = config.horizon_width();
    match (&term.field, &term.value) {
        (Field::Opp | Field::Own, _) => ACTION_WIDTH,
        (Field::Payoff, _) => PAYOFF_WIDTH,
        (Field::Counter(name), value) => {
            let declared = counters.iter().find(|c| &c.name == name).map_or(0, |c| c.width);
            let literal = match value {
                Literal::Int(v) => ceil_log2(v.saturating_add(1)).max(1),
                _ => 0,
            };
            horizon.max(declared).max(literal)
        }
    }
}

fn operands(term: &Term, regs: &HashMap<&str, u16>) -> Result<(Operand, Operand), CompileError> {
    let lhs = match &term.field {
        Field::Opp => Operand::Obs(ObsField::OppAction),
        Field::Own => Operand::Obs(ObsField::OwnAction),
        Field::Payoff => Operand::Obs(ObsField::LastPayoff),
        Field::Counter(c) => Operand::Reg(*regs.get(c.as_str()).ok_or_else(|| CompileError::UnknownCounter(c.clone()))?),
    };
    let rhs = match &term.value {
        Literal::Action(a) => Operand::Action(Some(*a)),
        Literal::None => Operand::Action(None),
        Literal::Int(v) => Operand::Int(*v),
        Literal::Payoff(p) => Operand::Payoff(*p),
        Literal::HorizonMinus(m) => Operand::HorizonMinus(*m),
    };
    Ok((lhs, rhs))
}

pub(crate) fn rule_size(rule: &Rule) -> usize {
    let plays = rule.body.iter().filter(|s| matches!(s, Stmt::Play(_))).count();
    let incs = rule.body.iter().filter(|s| matches!(s, Stmt::Inc(_))).count();
    rule.guard.len() + incs + plays + 1
}

fn needs_fallback(section: &Section) -> bool {
    section.rules.last().is_none_or(|r| !r.is_always())
}

/// Index of the first `always` rule; later rules can never fire.
fn live_rules(section: &Section) -> &[Rule] {
    match section.rules.iter().position(Rule::is_always) {
        Some(i) => &section.rules[..=i],
        None => &section.rules,
    }
}

fn section_index(src: &StrategySource, label: &str) -> Option<usize> {
    src.sections.iter().position(|s| s.name() == label)
}

fn reachable_sections(src: &StrategySource) -> Vec<usize> {
    let mut seen = vec![false; src.sections.len()];
    let mut order = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(i) = queue.pop_front() {
        order.push(i);
        for rule in live_rules(&src.sections[i]) {
            if let Some(j) = rule.goto().and_then(|l| section_index(src, l)) {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    order
}

fn worst_case(src: &StrategySource, config: &GameConfig) -> TickCost {
    fn visit(
        i: usize,
        src: &StrategySource,
        config: &GameConfig,
        memo: &mut [Option<Option<u32>>],
        active: &mut [bool],
    ) -> Option<u32> {
        if let Some(v) = memo[i] {
            return v;
        }
        if active[i] {
            return None;
        }
        active[i] = true;
        let section = &src.sections[i];
        let rules = live_rules(section);
        let mut prefix = 0u32;
        let mut worst = Some(0u32);
        for rule in rules {
            let guard: u32 = rule.guard.iter().map(|t| term_width(t, &src.counters, config)).sum();
            let fire = prefix + guard;
            let after = match (rule.play(), rule.goto()) {
                (None, Some(label)) => match section_index(src, label) {
                    Some(j) => visit(j, src, config, memo, active).map(|c| fire + c),
                    None => Some(fire),
                },
                _ => Some(fire),
            };
            worst = match (worst, after) {
                (Some(a), Some(b)) => Some(a.max(b)),
                _ => None,
            };
            prefix += guard;
        }
        worst = worst.map(|w| w.max(prefix));
        active[i] = false;
        memo[i] = Some(worst);
        worst
    }
    let mut memo = vec![None; src.sections.len()];
    let mut active = vec![false; src.sections.len()];
    // A tick can start in any reachable section, not just the entry.
    let mut worst = 0;
    for i in reachable_sections(src) {
        match visit(i, src, config, &mut memo, &mut active) {
            Some(c) => worst = worst.max(c),
            None => return TickCost::Unbounded,
        }
    }
    TickCost::Bounded(worst)
}

/// Compiles a parsed strategy for `config`. Unreachable rules and sections
/// produce warnings on the returned program, not errors.
pub fn compile(src: &StrategySource, config: &GameConfig) -> Result<StrategyProgram, CompileError> {
    if src.sections.iter().all(|s| s.rules.is_empty()) {
        return Err(CompileError::Empty);
    }
    let mut regs: HashMap<&str, u16> = HashMap::new();
    let mut registers = Vec::new();
    for c in &src.counters {
        if c.width == 0 || c.width > MAX_COUNTER_WIDTH {
            return Err(CompileError::CounterTooWide {
                name: c.name.clone(),
                width: c.width,
            });
        }
        regs.insert(&c.name, registers.len() as u16);
        registers.push(Register {
            name: c.name.clone(),
            width: c.width,
        });
    }

    let mut starts: HashMap<&str, usize> = HashMap::new();
    let mut labels = Vec::new();
    let mut pc = 0usize;
    for section in &src.sections {
        if starts.insert(section.name(), pc).is_some() {
            return Err(CompileError::DuplicateLabel(section.name().to_string()));
        }
        labels.push((section.name().to_string(), pc));
        pc += section.rules.iter().map(rule_size).sum::<usize>();
        if needs_fallback(section) {
            pc += 2;
        }
    }

    let mut warnings = Vec::new();
    let mut code = Vec::with_capacity(pc);
    for section in &src.sections {
        let top = starts[section.name()];
        let live = live_rules(section).len();
        if live < section.rules.len() {
            warnings.push(format!(
                "section `{}`: {} rule(s) after an `always` rule are unreachable",
                section.name(),
                section.rules.len() - live
            ));
        }
        for rule in &section.rules {
            check_body(rule)?;
            let next_rule = code.len() + rule_size(rule);
            for term in &rule.guard {
                check_term(term)?;
                let (lhs, rhs) = operands(term, &regs)?;
                code.push(Instruction::Compare {
                    op: term.op,
                    lhs,
                    rhs,
                    on_true: code.len() + 1,
                    on_false: next_rule,
                });
            }
            let mut jumped = false;
            for stmt in &rule.body {
                match stmt {
                    Stmt::Inc(c) => {
                        let r = *regs.get(c.as_str()).ok_or_else(|| CompileError::UnknownCounter(c.clone()))?;
                        code.push(Instruction::Increment(r));
                    }
                    Stmt::Play(a) => code.push(Instruction::Emit(*a)),
                    Stmt::Goto(l) => {
                        let target = *starts.get(l.as_str()).ok_or_else(|| CompileError::UnknownLabel(l.clone()))?;
                        code.push(Instruction::Jump(target));
                        jumped = true;
                    }
                }
            }
            if !jumped {
                code.push(Instruction::Jump(top));
            }
        }
        if needs_fallback(section) {
            code.push(Instruction::Emit(Action::W));
            code.push(Instruction::Jump(top));
        }
    }
    debug_assert_eq!(code.len(), pc);

    let reachable = reachable_sections(src);
    for (i, s) in src.sections.iter().enumerate() {
        if !reachable.contains(&i) {
            warnings.push(format!("section `{}` is unreachable", s.name()));
        }
    }

    Ok(StrategyProgram {
        name: src.name.clone(),
        instructions: code,
        registers,
        labels,
        horizon: config.n,
        worst_case_cost: worst_case(src, config),
        warnings,
    })
}

fn field_of(op: &Operand, program: &StrategyProgram) -> Option<Field> {
    Some(match op {
        Operand::Obs(ObsField::OppAction) => Field::Opp,
        Operand::Obs(ObsField::OwnAction) => Field::Own,
        Operand::Obs(ObsField::LastPayoff) => Field::Payoff,
        Operand::Reg(r) => Field::Counter(program.registers.get(*r as usize)?.name.clone()),
        _ => return None,
    })
}

fn literal_of(op: &Operand) -> Option<Literal> {
    Some(match op {
        Operand::Action(Some(a)) => Literal::Action(*a),
        Operand::Action(None) => Literal::None,
        Operand::Int(v) => Literal::Int(*v),
        Operand::Payoff(p) => Literal::Payoff(*p),
        Operand::HorizonMinus(m) => Literal::HorizonMinus(*m),
        _ => return None,
    })
}

/// Recovers source from a program laid out by [`compile`]. A section fallback
/// comes back as an explicit `always play W` rule, and `play A goto L` where
/// `L` is the rule's own section comes back as `play A`; both are how
/// [`canonicalize`] writes them.
pub fn decompile(program: &StrategyProgram) -> Result<StrategySource, CompileError> {
    let fail = |why: String| CompileError::NotDecompilable(why);
    if program.labels.is_empty() {
        return Err(fail("program carries no section table".into()));
    }
    let code = &program.instructions;
    let label_at: HashMap<usize, &str> = program.labels.iter().map(|(l, pc)| (*pc, l.as_str())).collect();
    let mut sections = Vec::new();
    for (i, (label, start)) in program.labels.iter().enumerate() {
        let end = program.labels.get(i + 1).map_or(code.len(), |(_, pc)| *pc);
        let mut rules = Vec::new();
        let mut pc = *start;
        while pc < end {
            let mut guard = Vec::new();
            let mut on_false = None;
            while let Some(Instruction::Compare {
                op,
                lhs,
                rhs,
                on_true,
                on_false: f,
            }) = code.get(pc)
            {
                if *on_true != pc + 1 || on_false.is_some_and(|x| x != *f) {
                    return Err(fail(format!("irregular compare at pc {pc}")));
                }
                let field = field_of(lhs, program).ok_or_else(|| fail(format!("bad operand at pc {pc}")))?;
                let value = literal_of(rhs).ok_or_else(|| fail(format!("bad operand at pc {pc}")))?;
                guard.push(Term { field, op: *op, value });
                on_false = Some(*f);
                pc += 1;
            }
            let mut body = Vec::new();
            while let Some(Instruction::Increment(r)) = code.get(pc) {
                let name = program
                    .registers
                    .get(*r as usize)
                    .ok_or_else(|| fail(format!("bad register at pc {pc}")))?;
                body.push(Stmt::Inc(name.name.clone()));
                pc += 1;
            }
            let mut played = false;
            if let Some(Instruction::Emit(a)) = code.get(pc) {
                body.push(Stmt::Play(*a));
                played = true;
                pc += 1;
            }
            match code.get(pc) {
                Some(Instruction::Jump(t)) => {
                    let target = label_at.get(t).ok_or_else(|| fail(format!("jump into a section at pc {pc}")))?;
                    if !(played && t == start) {
                        body.push(Stmt::Goto(target.to_string()));
                    }
                    pc += 1;
                }
                _ => return Err(fail(format!("expected jump at pc {pc}"))),
            }
            if on_false.is_some_and(|f| f != pc) {
                return Err(fail(format!("guard exit does not reach the next rule at pc {pc}")));
            }
            rules.push(Rule { guard, body });
        }
        let label = if i == 0 && label == ENTRY_LABEL {
            None
        } else {
            Some(label.clone())
        };
        sections.push(Section { label, rules });
    }
    Ok(StrategySource {
        name: program.name.clone(),
        counters: program
            .registers
            .iter()
            .map(|r| CounterDecl {
                name: r.name.clone(),
                width: r.width,
            })
            .collect(),
        sections,
    })
}

/// Semantics-preserving normal form:
/// rules after an `always` are dropped, every section ends in an `always`
/// rule (the implicit W fallback is written out), `play A goto <own section>`
/// loses its redundant goto, unreachable sections and unused counters are
/// removed, and non-entry sections are renamed `s1, s2, ...` in breadth-first
/// order of first reference. Guard term order is kept: it decides which
/// compares a failing guard pays for.
pub fn canonicalize(src: &StrategySource) -> StrategySource {
    let order = reachable_sections(src);
    let mut rename: HashMap<String, String> = HashMap::new();
    for (k, &i) in order.iter().enumerate() {
        let new = if k == 0 { ENTRY_LABEL.to_string() } else { format!("s{k}") };
        rename.insert(src.sections[i].name().to_string(), new);
    }
    let mut sections = Vec::new();
    for (k, &i) in order.iter().enumerate() {
        let section = &src.sections[i];
        let own = section.name();
        let mut rules: Vec<Rule> = live_rules(section)
            .iter()
            .map(|r| Rule {
                guard: r.guard.clone(),
                body: r
                    .body
                    .iter()
                    .filter(|s| !(r.play().is_some() && matches!(s, Stmt::Goto(l) if l == own)))
                    .map(|s| match s {
                        Stmt::Goto(l) => Stmt::Goto(rename.get(l).cloned().unwrap_or_else(|| l.clone())),
                        other => other.clone(),
                    })
                    .collect(),
            })
            .collect();
        if rules.last().is_none_or(|r| !r.is_always()) {
            rules.push(Rule::always(vec![Stmt::Play(Action::W)]));
        }
        sections.push(Section {
            label: if k == 0 { None } else { Some(format!("s{k}")) },
            rules,
        });
    }
    let used: HashSet<&str> = sections
        .iter()
        .flat_map(|s| &s.rules)
        .flat_map(|r| {
            r.guard
                .iter()
                .filter_map(|t| match &t.field {
                    Field::Counter(c) => Some(c.as_str()),
                    _ => None,
                })
                .chain(r.body.iter().filter_map(|s| match s {
                    Stmt::Inc(c) => Some(c.as_str()),
                    _ => None,
                }))
        })
        .collect();
    let counters = src.counters.iter().filter(|c| used.contains(c.name.as_str())).cloned().collect();
    StrategySource {
        name: src.name.clone(),
        counters,
        sections,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse, print};

    fn cfg(n: u64) -> GameConfig {
        GameConfig::ftpd(n)
    }

    #[test]
    fn grim_layout_and_cost() {
        let src = parse("strategy GRIM\nif opp != C then goto punish\nalways play C\nlabel punish\nalways play D").unwrap();
        let p = compile(&src, &cfg(10)).unwrap();
        assert_eq!(p.instructions.len(), 6);
        assert_eq!(p.worst_case_cost, TickCost::Bounded(2));
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn all_c_costs_nothing() {
        let p = compile(&parse("strategy AllC\nalways play C").unwrap(), &cfg(10)).unwrap();
        assert_eq!(p.worst_case_cost, TickCost::Bounded(0));
    }

    #[test]
    fn counter_compare_costs_horizon_width() {
        let src = parse("strategy x\ncounter i: 2 bits\nif i >= N - 2 then play D\nalways inc i play C").unwrap();
        assert_eq!(compile(&src, &cfg(1000)).unwrap().worst_case_cost, TickCost::Bounded(10));
        assert_eq!(compile(&src, &cfg(3)).unwrap().worst_case_cost, TickCost::Bounded(2));
    }

    #[test]
    fn chained_gotos_sum_costs() {
        let src = parse("strategy x\nif opp == D then goto a\nalways play C\nlabel a\nif own == C then play D\nalways play C").unwrap();
        assert_eq!(compile(&src, &cfg(10)).unwrap().worst_case_cost, TickCost::Bounded(4));
        let looped = parse("strategy y\nif opp == D then goto start\nalways play C").unwrap();
        assert_eq!(compile(&looped, &cfg(10)).unwrap().worst_case_cost, TickCost::Unbounded);
    }

    #[test]
    fn bad_bodies_rejected() {
        for body in ["play C play D", "goto start play C", "play C inc i", "inc i"] {
            let text = format!("strategy x\ncounter i: 2 bits\nalways {body}");
            let src = parse(&text).unwrap();
            assert!(matches!(compile(&src, &cfg(4)), Err(CompileError::BadRule { .. })), "{body}");
        }
    }

    #[test]
    fn unreachable_rules_warn() {
        let src = parse("strategy x\nalways play C\nalways play D\nlabel lost\nalways play W").unwrap();
        let p = compile(&src, &cfg(4)).unwrap();
        assert_eq!(p.warnings.len(), 2);
    }

    #[test]
    fn decompile_recovers_canonical_form() {
        for text in [
            "strategy AllD\nalways play D\n",
            "strategy GRIM\nif opp != C then goto punish\nalways play C\nlabel punish\nalways play D\n",
            "strategy T\ncounter i: 3 bits\nif i >= N - 1 and opp == C then inc i play D goto s\nlabel s\nalways goto start\n",
        ] {
            let src = parse(text).unwrap();
            let back = decompile(&compile(&src, &cfg(8)).unwrap()).unwrap();
            assert_eq!(canonicalize(&back), canonicalize(&src), "{text}");
        }
        let all_d = parse("strategy AllD\nalways play D").unwrap();
        assert_eq!(print(&decompile(&compile(&all_d, &cfg(8)).unwrap()).unwrap()), "strategy AllD\nalways play D\n");
    }

    #[test]
    fn canonical_form_renames_and_prunes() {
        let src = parse("strategy x\ncounter unused: 2 bits\nif opp == D then goto punish\nalways play C goto start\nalways play W\nlabel orphan\nalways play C\nlabel punish\nif opp == C then play C").unwrap();
        let c = canonicalize(&src);
        assert_eq!(
            print(&c),
            "strategy x\nif opp == D then goto s1\nalways play C\nlabel s1\nif opp == C then play C\nalways play W\n"
        );
        assert_eq!(canonicalize(&c), c);
    }
}
