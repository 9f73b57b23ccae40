//! Selection environments: demand sequences and optional condition flags.

use thiserror::Error;

use crate::code::{layout, Address, Atom, Code, Tok};
use crate::diag::probe;
use crate::lang::Program;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("environment length must be at least 1")]
    Empty,
    #[error("nested script needs at least one sub-experiment and at least 3 terms each")]
    Script,
    #[error("guarded period must be at least 2")]
    Period,
}

/// Sub-experiments `(start, step)`, each rendered as
/// `LP, start, start+step, …, RP` with `terms` interior values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NestedScript {
    pub subexperiments: Vec<(i64, i64)>,
    pub terms: usize,
}

impl NestedScript {
    /// Sub-experiment `k` starts at 1 with step `k`, for `k = 1..=count`.
    pub fn canonical(count: usize, terms: usize) -> NestedScript {
        NestedScript { subexperiments: (1..=count as i64).map(|k| (1, k)).collect(), terms }
    }

    pub fn is_valid(&self) -> bool {
        !self.subexperiments.is_empty() && self.terms >= 3
    }

    /// Demands per sub-experiment including both parentheses.
    pub fn period(&self) -> usize {
        self.terms + 2
    }

    fn render(&self) -> Vec<Atom> {
        let mut out = Vec::with_capacity(self.subexperiments.len() * self.period());
        for &(start, step) in &self.subexperiments {
            out.push(Atom::Tok(Tok::Lp));
            out.extend((0..self.terms as i64).map(|i| Atom::Int(start.saturating_add(i.saturating_mul(step)))));
            out.push(Atom::Tok(Tok::Rp));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Kind {
    Arithmetic { start: i64, step: i64 },
    Nested(Vec<Atom>),
    Guarded { period: usize, action_step: i64, start: i64 },
    Parameter(Vec<i64>),
}

/// A finite demand sequence, optionally with a condition flag per step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Environment {
    pub name: String,
    pub length: usize,
    kind: Kind,
}

/// `demand(t) = start + t·step`.
pub fn arithmetic_env(start: i64, step: i64, length: usize) -> Result<Environment, EnvError> {
    nonempty(length)?;
    Ok(Environment { name: "arithmetic".into(), length, kind: Kind::Arithmetic { start, step } })
}

/// The concatenated parenthesised sub-experiments of `script`.
pub fn nested_env(script: &NestedScript) -> Result<Environment, EnvError> {
    if !script.is_valid() {
        return Err(EnvError::Script);
    }
    let demands = script.render();
    Ok(Environment { name: "nested".into(), length: demands.len(), kind: Kind::Nested(demands) })
}

/// Flag raised at every `period`-th step; the demand grows by `action_step`
/// on flagged steps after the first and is copied otherwise.
pub fn guarded_env(period: usize, action_step: i64, length: usize) -> Result<Environment, EnvError> {
    guarded_env_from(0, period, action_step, length)
}

pub fn guarded_env_from(start: i64, period: usize, action_step: i64, length: usize) -> Result<Environment, EnvError> {
    nonempty(length)?;
    if period < 2 {
        return Err(EnvError::Period);
    }
    Ok(Environment { name: "guarded".into(), length, kind: Kind::Guarded { period, action_step, start } })
}

/// Demands read from an explicit schedule.
pub fn parameter_env(schedule: Vec<i64>) -> Result<Environment, EnvError> {
    nonempty(schedule.len())?;
    Ok(Environment { name: "parameter".into(), length: schedule.len(), kind: Kind::Parameter(schedule) })
}

fn nonempty(length: usize) -> Result<(), EnvError> {
    if length == 0 {
        Err(EnvError::Empty)
    } else {
        Ok(())
    }
}

impl Environment {
    /// The demanded OUT atom at step `t`, or `None` past the end.
    pub fn demand(&self, t: usize) -> Option<Atom> {
        if t >= self.length {
            return None;
        }
        Some(match &self.kind {
            Kind::Arithmetic { start, step } => Atom::Int(start.saturating_add((t as i64).saturating_mul(*step))),
            Kind::Nested(d) => d[t],
            Kind::Guarded { period, action_step, start } => {
                let raises = t / period;
                Atom::Int(start.saturating_add((raises as i64).saturating_mul(*action_step)))
            }
            Kind::Parameter(s) => Atom::Int(s[t]),
        })
    }

    /// The condition flag written before proliferation at step `t`.
    pub fn condition(&self, t: usize) -> Option<bool> {
        match &self.kind {
            Kind::Guarded { period, .. } if t < self.length => Some(t.is_multiple_of(*period)),
            _ => None,
        }
    }

    pub fn demands(&self) -> Vec<Atom> {
        (0..self.length).filter_map(|t| self.demand(t)).collect()
    }
}

/// Address of the environment-owned flag on the notice board.
pub fn flag_address() -> Address {
    Address::new(vec![layout::NB, 1, 2])
}

/// The probe reading the environment flag as TRUE.
pub fn flag_probe() -> Program {
    probe(flag_address(), Atom::Tok(Tok::True))
}

/// Writes `flag` as the first notice-board entry `[NIL, flag]`.
pub fn write_flag(c: &Code, flag: bool) -> Code {
    let entry = Code::node(vec![Code::tok(Tok::Nil), Code::tok(if flag { Tok::True } else { Tok::False })]);
    let mut board = layout::slot(c, layout::NB).and_then(Code::children).map(<[Code]>::to_vec).unwrap_or_default();
    let owned = board
        .first()
        .and_then(Code::children)
        .and_then(|ch| ch.first())
        .is_some_and(|h| h.is_leaf(Atom::Tok(Tok::Nil)));
    if owned {
        board[0] = entry;
    } else {
        board.insert(0, entry);
    }
    layout::with_slot(c, layout::NB, Code::node(board))
}
