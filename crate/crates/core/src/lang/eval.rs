use thiserror::Error;

use super::program::{DecodeError, Program};
use crate::code::{self, Address, Atom, Code, CodeError, Limits, C_MAX, D_MAX};

/// Termination guard for evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalBudget {
    pub max_steps: u64,
    pub max_result_nodes: usize,
}

impl Default for EvalBudget {
    fn default() -> Self {
        EvalBudget { max_steps: 1000, max_result_nodes: C_MAX }
    }
}

impl EvalBudget {
    pub fn with_steps(max_steps: u64) -> Self {
        EvalBudget { max_steps: max_steps.max(1), ..Default::default() }
    }

    fn limits(&self) -> Limits {
        Limits { max_nodes: self.max_result_nodes, max_depth: D_MAX }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("type error: {0}")]
    Type(&'static str),
    #[error("invalid address {0}")]
    AddressInvalid(Address),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("step budget exhausted")]
    BudgetExceeded,
    #[error("result exceeds size limits")]
    SizeExceeded,
}

impl From<CodeError> for EvalError {
    fn from(e: CodeError) -> Self {
        match e {
            CodeError::AddressInvalid(a) | CodeError::NotANode(a) => EvalError::AddressInvalid(a),
            CodeError::SizeExceeded { .. } => EvalError::SizeExceeded,
        }
    }
}

/// Evaluates `p` on `input`. Every constructor evaluated consumes one step.
pub fn eval(p: &Program, input: &Code, budget: EvalBudget) -> Result<Code, EvalError> {
    eval_counted(p, input, budget).0
}

/// Like [`eval`], also reporting the number of steps consumed.
pub fn eval_counted(p: &Program, input: &Code, budget: EvalBudget) -> (Result<Code, EvalError>, u64) {
    let mut m = Machine { used: 0, budget };
    let out = m.run(p, input);
    (out, m.used)
}

struct Machine {
    used: u64,
    budget: EvalBudget,
}

impl Machine {
    fn tick(&mut self) -> Result<(), EvalError> {
        if self.used >= self.budget.max_steps {
            return Err(EvalError::BudgetExceeded);
        }
        self.used += 1;
        Ok(())
    }

    fn check(&self, c: Code) -> Result<Code, EvalError> {
        if c.size() > self.budget.max_result_nodes || c.depth() > D_MAX {
            Err(EvalError::SizeExceeded)
        } else {
            Ok(c)
        }
    }

    fn run(&mut self, p: &Program, input: &Code) -> Result<Code, EvalError> {
        self.tick()?;
        match p {
            Program::Id => Ok(input.clone()),
            Program::Const(v) => self.check(v.clone()),
            Program::Add(k) => {
                let i = input.as_int().ok_or(EvalError::Type("ADD expects an integer leaf"))?;
                let sum = i.checked_add(*k).map(Atom::Int).filter(Atom::is_valid).ok_or(EvalError::SizeExceeded)?;
                Ok(Code::Leaf(sum))
            }
            Program::Read(addr) => Ok(code::read_at(input, addr)?.clone()),
            Program::Put(addr, q) => {
                let v = self.run(q, input)?;
                Ok(code::replace_at(input, addr, v, self.budget.limits())?)
            }
            Program::Append(addr, q) => {
                let v = self.run(q, input)?;
                Ok(code::append_at(input, addr, v, self.budget.limits())?.0)
            }
            Program::Seq(a, b) => {
                let mid = self.run(a, input)?;
                self.run(b, &mid)
            }
            Program::Pair(a, b) => {
                let x = self.run(a, input)?;
                let y = self.run(b, input)?;
                self.check(Code::node(vec![x, y]))
            }
            Program::IfEq(addr, atom, a, b) => {
                let hit = code::read_at(input, addr).map(|c| c.is_leaf(*atom)).unwrap_or(false);
                if hit {
                    self.run(a, input)
                } else {
                    self.run(b, input)
                }
            }
            Program::ApplyAt(src, prog) => {
                let q = Program::decode(code::read_at(input, prog)?)?;
                let arg = code::read_at(input, src)?;
                self.run(&q, arg)
            }
        }
    }
}

/// `SEQ(e, READ(θ))`: runs `e` and projects its result at `θ`.
pub fn theta_recursor(theta: &Address, e: &Program) -> Program {
    Program::seq(e.clone(), Program::Read(theta.clone()))
}
