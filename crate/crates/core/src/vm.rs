//! Cost-accounting strategy machine.
//!
//! A player runs a [`StrategyProgram`] one clock tick at a time. Each tick
//! grants `k` XOR-units. Only `Compare` consumes units, one per operand bit.
//! A compare that does not fit in what is left of the budget suspends and
//! resumes next tick where it stopped; a tick that ends without an `Emit`
//! is recorded as [`Action::W`].
//!
//! Execution is a coroutine: `Emit` ends the tick and the next tick resumes at
//! the instruction after it.

use std::fmt;

use num_traits::Zero;
use thiserror::Error;

use crate::game::{ceil_log2, Action, Payoff};

/// Payoff observations are compared as fixed 8-bit quantities.
pub const PAYOFF_WIDTH: u32 = 8;
/// Width of an action operand.
pub const ACTION_WIDTH: u32 = 2;
/// Zero-cost instructions a single tick may execute before the program is
/// declared stuck.
pub const STEP_LIMIT: usize = 4096;

/// XOR-units needed to compare two `width_bits`-wide values.
pub fn compare_cost(width_bits: u32) -> u32 {
    width_bits
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ObsField {
    OppAction,
    OwnAction,
    LastPayoff,
    Horizon,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Operand {
    Obs(ObsField),
    Reg(u16),
    /// Action literal; `None` is the first-tick "no action yet" value.
    Action(Option<Action>),
    Int(u64),
    Payoff(Payoff),
    /// The horizon minus a constant, saturating at zero.
    HorizonMinus(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Instruction {
    Emit(Action),
    Compare {
        op: CmpOp,
        lhs: Operand,
        rhs: Operand,
        on_true: usize,
        on_false: usize,
    },
    Increment(u16),
    LoadConst { reg: u16, value: u64 },
    LoadObs { reg: u16, field: ObsField },
    Jump(usize),
    Halt,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Register {
    pub name: String,
    pub width: u32,
}

/// Static bound on the XOR-units one tick can need.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TickCost {
    Bounded(u32),
    /// Some path loops through compares within a single tick.
    Unbounded,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StrategyProgram {
    pub name: String,
    pub instructions: Vec<Instruction>,
    pub registers: Vec<Register>,
    /// Section labels and their entry points, in source order.
    pub labels: Vec<(String, usize)>,
    /// Horizon the program was compiled for.
    pub horizon: u64,
    pub worst_case_cost: TickCost,
    pub warnings: Vec<String>,
}

impl StrategyProgram {
    /// A bare program with one register per `(name, width)` pair.
    pub fn from_instructions(name: &str, instructions: Vec<Instruction>, registers: &[(&str, u32)], horizon: u64) -> Self {
        StrategyProgram {
            name: name.to_string(),
            instructions,
            registers: registers
                .iter()
                .map(|(n, w)| Register {
                    name: n.to_string(),
                    width: *w,
                })
                .collect(),
            labels: Vec::new(),
            horizon,
            worst_case_cost: TickCost::Unbounded,
            warnings: Vec::new(),
        }
    }

    pub fn register_count(&self) -> usize {
        self.registers.len()
    }
}

/// What a player may look at before ticking. The tick index is absent on
/// purpose: a player that wants it has to count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Observation {
    pub opponent_last_action: Option<Action>,
    pub own_last_action: Option<Action>,
    pub last_payoff: Payoff,
    pub horizon: u64,
}

impl Observation {
    pub fn first(horizon: u64) -> Self {
        Observation {
            opponent_last_action: None,
            own_last_action: None,
            last_payoff: Payoff::zero(),
            horizon,
        }
    }

    pub fn after(own: Action, opponent: Action, payoff: Payoff, horizon: u64) -> Self {
        Observation {
            opponent_last_action: Some(opponent),
            own_last_action: Some(own),
            last_payoff: payoff,
            horizon,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VmFault {
    #[error("program counter {pc} out of range (program has {len} instructions)")]
    PcOutOfRange { pc: usize, len: usize },
    #[error("register r{reg} out of range at pc {pc}")]
    BadRegister { reg: u16, pc: usize },
    #[error("type mismatch in compare at pc {pc}")]
    TypeMismatch { pc: usize },
    #[error("no progress: {STEP_LIMIT} zero-cost steps in one tick")]
    NoProgress,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Status {
    Running,
    Halted,
    Faulted(VmFault),
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct PendingCompare {
    remaining: u32,
    result: bool,
    on_true: usize,
    on_false: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VmState {
    pub pc: usize,
    pub registers: Vec<u64>,
    /// XOR-units spent in the current tick.
    pub spent: u32,
    pending: Option<PendingCompare>,
    pub emitted: Option<Action>,
    pub status: Status,
}

/// Outcome of one tick.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TickReport {
    /// The program counter when the tick began.
    pub start_pc: usize,
    pub action: Action,
    pub spent: u32,
    /// True if a compare is still in flight at the end of the tick.
    pub suspended: bool,
}

#[derive(Clone, Debug, PartialEq)]
enum Value {
    Action(Option<Action>),
    Int(u64),
    Payoff(Payoff),
}

/// A fresh state at the program entry.
pub fn reset(program: &StrategyProgram) -> VmState {
    VmState {
        pc: 0,
        registers: vec![0; program.registers.len()],
        spent: 0,
        pending: None,
        emitted: None,
        status: Status::Running,
    }
}

fn bits_for(v: u64) -> u32 {
    ceil_log2(v.saturating_add(1)).max(1)
}

impl VmState {
    pub fn is_suspended(&self) -> bool {
        self.pending.is_some()
    }

    fn operand(&self, program: &StrategyProgram, obs: &Observation, op: &Operand) -> Result<(Value, u32), VmFault> {
        let horizon_width = bits_for(obs.horizon);
        Ok(match op {
            Operand::Obs(ObsField::OppAction) => (Value::Action(obs.opponent_last_action), ACTION_WIDTH),
            Operand::Obs(ObsField::OwnAction) => (Value::Action(obs.own_last_action), ACTION_WIDTH),
            Operand::Obs(ObsField::LastPayoff) => (Value::Payoff(obs.last_payoff), PAYOFF_WIDTH),
            Operand::Obs(ObsField::Horizon) => (Value::Int(obs.horizon), horizon_width),
            Operand::Reg(r) => {
                let idx = *r as usize;
                let value = *self
                    .registers
                    .get(idx)
                    .ok_or(VmFault::BadRegister { reg: *r, pc: self.pc })?;
                let width = program.registers[idx].width.max(horizon_width);
                (Value::Int(value), width)
            }
            Operand::Action(a) => (Value::Action(*a), ACTION_WIDTH),
            Operand::Int(v) => (Value::Int(*v), horizon_width.max(bits_for(*v))),
            Operand::Payoff(p) => (Value::Payoff(*p), PAYOFF_WIDTH),
            Operand::HorizonMinus(m) => (Value::Int(obs.horizon.saturating_sub(*m)), horizon_width),
        })
    }

    fn evaluate(&self, op: CmpOp, lhs: &Value, rhs: &Value) -> Result<bool, VmFault> {
        let mismatch = VmFault::TypeMismatch { pc: self.pc };
        match (lhs, rhs) {
            (Value::Action(l), Value::Action(r)) => match op {
                CmpOp::Lt | CmpOp::Ge => Err(mismatch),
                // An unset observation never satisfies a comparison with a
                // concrete action; only `== none` / `!= none` see it.
                _ => Ok(match (l, r) {
                    (None, None) => op == CmpOp::Eq,
                    (None, Some(_)) => false,
                    (Some(_), None) => op == CmpOp::Ne,
                    (Some(a), Some(b)) => (a == b) == (op == CmpOp::Eq),
                }),
            },
            (Value::Int(l), Value::Int(r)) => Ok(ordered(op, l, r)),
            (Value::Payoff(l), Value::Payoff(r)) => Ok(ordered(op, l, r)),
            _ => Err(mismatch),
        }
    }

    fn fault(&mut self, fault: VmFault) -> VmFault {
        self.pending = None;
        self.status = Status::Faulted(fault.clone());
        fault
    }

    /// Runs one clock tick with a budget of `k` XOR-units.
    ///
    /// A fault is returned once; the state then stays faulted and every later
    /// tick plays W.
    pub fn tick(&mut self, program: &StrategyProgram, obs: &Observation, k: u32) -> Result<TickReport, VmFault> {
        self.spent = 0;
        self.emitted = None;
        let start_pc = self.pc;
        let idle = |spent| TickReport {
            start_pc,
            action: Action::W,
            spent,
            suspended: false,
        };
        if self.status != Status::Running {
            return Ok(idle(0));
        }
        let mut steps = 0usize;
        loop {
            steps += 1;
            if steps > STEP_LIMIT {
                return Err(self.fault(VmFault::NoProgress));
            }
            if let Some(p) = self.pending.as_mut() {
                let available = k.saturating_sub(self.spent);
                if p.remaining > available {
                    p.remaining -= available;
                    self.spent += available;
                    return Ok(TickReport {
                        start_pc,
                        action: Action::W,
                        spent: self.spent,
                        suspended: true,
                    });
                }
                self.spent += p.remaining;
                self.pc = if p.result { p.on_true } else { p.on_false };
                self.pending = None;
                continue;
            }
            let Some(instr) = program.instructions.get(self.pc) else {
                let len = program.instructions.len();
                return Err(self.fault(VmFault::PcOutOfRange { pc: self.pc, len }));
            };
            match instr {
                Instruction::Emit(a) => {
                    self.pc += 1;
                    self.emitted = Some(*a);
                    return Ok(TickReport {
                        start_pc,
                        action: *a,
                        spent: self.spent,
                        suspended: false,
                    });
                }
                Instruction::Compare {
                    op,
                    lhs,
                    rhs,
                    on_true,
                    on_false,
                } => {
                    let evaluated = self.operand(program, obs, lhs).and_then(|(l, lw)| {
                        let (r, rw) = self.operand(program, obs, rhs)?;
                        Ok((self.evaluate(*op, &l, &r)?, lw.max(rw)))
                    });
                    let (result, width) = match evaluated {
                        Ok(v) => v,
                        Err(f) => return Err(self.fault(f)),
                    };
                    self.pending = Some(PendingCompare {
                        remaining: compare_cost(width),
                        result,
                        on_true: *on_true,
                        on_false: *on_false,
                    });
                }
                Instruction::Increment(r) => {
                    let idx = *r as usize;
                    let Some(width) = program.registers.get(idx).map(|reg| reg.width) else {
                        return Err(self.fault(VmFault::BadRegister { reg: *r, pc: self.pc }));
                    };
                    let mask = if width >= 64 { u64::MAX } else { (1u64 << width) - 1 };
                    self.registers[idx] = self.registers[idx].wrapping_add(1) & mask;
                    self.pc += 1;
                }
                Instruction::LoadConst { reg, value } => {
                    let idx = *reg as usize;
                    if idx >= self.registers.len() {
                        return Err(self.fault(VmFault::BadRegister { reg: *reg, pc: self.pc }));
                    }
                    self.registers[idx] = *value;
                    self.pc += 1;
                }
                Instruction::LoadObs { reg, field } => {
                    let idx = *reg as usize;
                    if idx >= self.registers.len() {
                        return Err(self.fault(VmFault::BadRegister { reg: *reg, pc: self.pc }));
                    }
                    let value = match field {
                        ObsField::Horizon => obs.horizon,
                        _ => return Err(self.fault(VmFault::TypeMismatch { pc: self.pc })),
                    };
                    self.registers[idx] = value;
                    self.pc += 1;
                }
                Instruction::Jump(target) => self.pc = *target,
                Instruction::Halt => {
                    self.status = Status::Halted;
                    return Ok(idle(self.spent));
                }
            }
        }
    }
}

fn ordered<T: PartialOrd>(op: CmpOp, l: &T, r: &T) -> bool {
    match op {
        CmpOp::Eq => l == r,
        CmpOp::Ne => l != r,
        CmpOp::Lt => l < r,
        CmpOp::Ge => l >= r,
    }
}

/// One line of the debug trace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceLine {
    pub tick: u64,
    pub report: TickReport,
}

impl fmt::Display for TraceLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "tick={} pc={} cost={} action={}{}",
            self.tick,
            self.report.start_pc,
            self.report.spent,
            self.report.action,
            if self.report.suspended { " suspended" } else { "" }
        )
    }
}

/// Runs `program` against a fixed observation sequence and returns the debug
/// trace. Faults end the trace early with the remaining ticks played as W.
pub fn trace(program: &StrategyProgram, observations: &[Observation], k: u32) -> Vec<TraceLine> {
    let mut state = reset(program);
    observations
        .iter()
        .enumerate()
        .map(|(i, obs)| {
            let report = state.tick(program, obs, k).unwrap_or(TickReport {
                start_pc: state.pc,
                action: Action::W,
                spent: 0,
                suspended: false,
            });
            TraceLine {
                tick: i as u64 + 1,
                report,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use Action::*;

    fn grim_asm(horizon: u64) -> StrategyProgram {
        use Instruction::*;
        StrategyProgram::from_instructions(
            "grim",
            vec![
                Compare {
                    op: CmpOp::Ne,
                    lhs: Operand::Obs(ObsField::OppAction),
                    rhs: Operand::Action(Some(C)),
                    on_true: 3,
                    on_false: 1,
                },
                Emit(C),
                Jump(0),
                Emit(D),
                Jump(3),
            ],
            &[],
            horizon,
        )
    }

    #[test]
    fn compare_cost_is_width() {
        assert_eq!(compare_cost(2), 2);
        assert_eq!(compare_cost(1), 1);
        assert_eq!(compare_cost(ceil_log2(1001)), 10);
    }

    #[test]
    fn reset_is_idempotent() {
        let p = grim_asm(10);
        assert_eq!(reset(&p), reset(&p));
    }

    #[test]
    fn grim_fits_in_two_units() {
        let p = grim_asm(10);
        let mut s = reset(&p);
        let r = s.tick(&p, &Observation::first(10), 2).unwrap();
        assert_eq!((r.action, r.spent), (C, 2));
        let r = s.tick(&p, &Observation::after(C, C, Payoff::from_integer(1), 10), 2).unwrap();
        assert_eq!((r.action, r.spent), (C, 2));
        let r = s.tick(&p, &Observation::after(C, W, Payoff::zero(), 10), 2).unwrap();
        assert_eq!(r.action, D);
        for _ in 0..5 {
            let r = s.tick(&p, &Observation::after(D, C, Payoff::from_integer(2), 10), 2).unwrap();
            assert_eq!(r.action, D);
        }
    }

    #[test]
    fn wide_compare_suspends_and_resumes() {
        use Instruction::*;
        // 5-bit counter against N - 2 with N = 16: five units, budget three.
        let p = StrategyProgram::from_instructions(
            "count",
            vec![
                Compare {
                    op: CmpOp::Ge,
                    lhs: Operand::Reg(0),
                    rhs: Operand::HorizonMinus(2),
                    on_true: 1,
                    on_false: 2,
                },
                Emit(D),
                Emit(C),
                Jump(0),
            ],
            &[("i", 5)],
            16,
        );
        let mut s = reset(&p);
        let obs = Observation::first(16);
        let r = s.tick(&p, &obs, 3).unwrap();
        assert_eq!((r.action, r.spent, r.suspended), (W, 3, true));
        let r = s.tick(&p, &obs, 3).unwrap();
        assert_eq!((r.action, r.spent), (C, 2));
    }

    #[test]
    fn jump_out_of_range_faults_then_waits() {
        let p = StrategyProgram::from_instructions("bad", vec![Instruction::Jump(7)], &[], 4);
        let mut s = reset(&p);
        let obs = Observation::first(4);
        assert_eq!(s.tick(&p, &obs, 2), Err(VmFault::PcOutOfRange { pc: 7, len: 1 }));
        assert_eq!(s.tick(&p, &obs, 2).unwrap().action, W);
    }

    #[test]
    fn zero_cost_loop_faults() {
        let p = StrategyProgram::from_instructions("spin", vec![Instruction::Jump(0)], &[], 4);
        let mut s = reset(&p);
        assert_eq!(s.tick(&p, &Observation::first(4), 2), Err(VmFault::NoProgress));
    }

    #[test]
    fn none_semantics() {
        let p = grim_asm(4);
        let s = reset(&p);
        let none = Value::Action(None);
        let c = Value::Action(Some(C));
        assert!(!s.evaluate(CmpOp::Eq, &none, &c).unwrap());
        assert!(!s.evaluate(CmpOp::Ne, &none, &c).unwrap());
        assert!(s.evaluate(CmpOp::Eq, &none, &none).unwrap());
        assert!(s.evaluate(CmpOp::Ne, &c, &none).unwrap());
    }

    #[test]
    fn halt_waits_forever() {
        let p = StrategyProgram::from_instructions("h", vec![Instruction::Emit(C), Instruction::Halt], &[], 4);
        let t = trace(&p, &vec![Observation::first(4); 3], 2);
        let acts: Vec<_> = t.iter().map(|l| l.report.action).collect();
        assert_eq!(acts, vec![C, W, W]);
        assert_eq!(t[0].to_string(), "tick=1 pc=0 cost=0 action=C");
    }

    #[test]
    fn increment_wraps_at_width() {
        use Instruction::*;
        let p = StrategyProgram::from_instructions("w", vec![Increment(0), Emit(C), Jump(0)], &[("c", 2)], 4);
        let mut s = reset(&p);
        for _ in 0..4 {
            s.tick(&p, &Observation::first(4), 2).unwrap();
        }
        assert_eq!(s.registers[0], 0);
    }
}
