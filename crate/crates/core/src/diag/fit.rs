use std::fmt;

use rand::Rng;

use super::trace::{project, MemoryTrace};
use super::Ratio;
use crate::code::{self, layout, read_at, Address, Code, CodeError, Limits, Origin, Population};
use crate::lang::{eval, EvalBudget, Generator, Program};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// θ-content to θ-content.
    Projected,
    /// Whole code to θ-content.
    Contextual,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Projected => "projected",
            Mode::Contextual => "contextual",
        })
    }
}

/// Where a recursor came from. Guarded-rule actions are applied for one
/// generation and never recorded in the REC table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Fitted,
    Guarded,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Recursor {
    pub target: Address,
    pub program: Program,
    /// Position of `program` in the generator sequence that found it.
    pub found_at_index: u64,
    pub mode: Mode,
    pub source: Source,
}

impl Recursor {
    pub fn projected(target: Address, program: Program) -> Recursor {
        Recursor { target, program, found_at_index: 0, mode: Mode::Projected, source: Source::Fitted }
    }
}

/// `r` maps every element of `seq` to its successor.
pub fn fits(r: &Program, seq: &[Code], budget: EvalBudget) -> bool {
    seq.len() >= 2 && seq.windows(2).all(|w| eval(r, &w[0], budget).is_ok_and(|v| v == w[1]))
}

fn fits_pairs(r: &Program, pairs: &[(Code, Code)], budget: EvalBudget) -> bool {
    pairs.iter().all(|(x, y)| eval(r, x, budget).is_ok_and(|v| v == *y))
}

/// The first of at most `k_max` yields of `gen` that fits the trace at `theta`.
pub fn diagonalize(
    memory: &MemoryTrace,
    theta: &Address,
    gen: &Generator,
    k_max: u64,
    budget: EvalBudget,
    mode: Mode,
) -> Option<Recursor> {
    if memory.len() < 2 {
        return None;
    }
    let projected = project(memory, theta).ok()?;
    let pairs: Vec<(Code, Code)> = match mode {
        Mode::Projected => projected.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect(),
        Mode::Contextual => memory.snapshots().iter().cloned().zip(projected.into_iter().skip(1)).collect(),
    };
    let mut gen = gen.clone();
    for _ in 0..k_max {
        let index = gen.position();
        let Ok(p) = gen.next_program() else { break };
        if fits_pairs(&p, &pairs, budget) {
            return Some(Recursor {
                target: theta.clone(),
                program: p,
                found_at_index: index,
                mode,
                source: Source::Fitted,
            });
        }
    }
    None
}

/// Entries of the REC table as (target, program); malformed entries are skipped.
pub fn rec_entries(c: &Code) -> Vec<(Address, Program)> {
    layout::slot(c, layout::REC)
        .and_then(Code::children)
        .unwrap_or(&[])
        .iter()
        .filter_map(|e| {
            let ch = e.children()?;
            let [t, p] = ch else { return None };
            Some((Address::from_code(t)?, Program::decode(p).ok()?))
        })
        .collect()
}

/// Records `program` for `target`, replacing an entry with the same target in
/// place or appending a new one.
pub fn rec_upsert(c: &Code, target: &Address, program: &Program) -> Code {
    let mut table = layout::slot(c, layout::REC).and_then(Code::children).map(<[Code]>::to_vec).unwrap_or_default();
    let entry = Code::node(vec![target.to_code(), program.encode()]);
    let existing = table
        .iter()
        .position(|e| e.children().and_then(|ch| ch.first()).and_then(Address::from_code).as_ref() == Some(target));
    match existing {
        Some(i) => table[i] = entry,
        None => table.push(entry),
    }
    layout::with_slot(c, layout::REC, Code::node(table))
}

/// Address of the REC entry recording `target`.
pub fn rec_entry_address(c: &Code, target: &Address) -> Option<Address> {
    let table = layout::slot(c, layout::REC)?.children()?;
    let i = table
        .iter()
        .position(|e| e.children().and_then(|ch| ch.first()).and_then(Address::from_code).as_ref() == Some(target))?;
    Some(layout::rec().child(i + 1))
}

/// Shape of one proliferation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Proliferation {
    /// Descendants per code.
    pub m: usize,
    /// Share of exploit descendants.
    pub p: Ratio,
    pub memory_cap: usize,
    pub limits: Limits,
}

impl Proliferation {
    /// `⌈p·m⌉`.
    pub fn exploit_count(&self) -> usize {
        self.p.ceil_mul(self.m as u64).min(self.m as u64) as usize
    }
}

/// Explorer editors: every canonical program of size at most 3.
pub fn explore_pool(gen: &Generator) -> Vec<Program> {
    gen.enumeration().programs_up_to(3)
}

fn run_recursor(r: &Recursor, c: &Code, budget: EvalBudget) -> Option<Code> {
    match r.mode {
        Mode::Projected => eval(&r.program, read_at(c, &r.target).ok()?, budget).ok(),
        Mode::Contextual => eval(&r.program, c, budget).ok(),
    }
}

/// `c` with every recursor applied simultaneously: each result is computed
/// from `c` and then written at its target.
pub fn apply_all(c: &Code, recursors: &[Recursor], budget: EvalBudget, limits: Limits) -> Option<Code> {
    let values: Vec<Code> = recursors.iter().map(|r| run_recursor(r, c, budget)).collect::<Option<_>>()?;
    recursors.iter().zip(values).try_fold(c.clone(), |acc, (r, v)| code::replace_at(&acc, &r.target, v, limits).ok())
}

fn record(c: &Code, recursors: &[Recursor]) -> Code {
    recursors
        .iter()
        .filter(|r| r.source == Source::Fitted && r.mode == Mode::Projected && !r.target.starts_with(&layout::rec()))
        .fold(c.clone(), |acc, r| rec_upsert(&acc, &r.target, &r.program))
}

/// `m` descendants of `c`: `⌈p·m⌉` built by the recursors, the rest by a
/// random explorer editor at OUT. Every descendant records the projected
/// fitted recursors targeting outside REC in its REC table and stores `c`
/// in its memory.
pub fn apply_recursors<R: Rng>(
    c: &Code,
    recursors: &[Recursor],
    shape: &Proliferation,
    rng: &mut R,
    explore: &[Program],
    budget: EvalBudget,
) -> Population {
    descendants(c, c, recursors, shape, rng, explore, budget)
}

/// Like [`apply_recursors`], editing `base` while storing `parent` in memory.
pub(crate) fn descendants<R: Rng>(
    parent: &Code,
    base: &Code,
    recursors: &[Recursor],
    shape: &Proliferation,
    rng: &mut R,
    explore: &[Program],
    budget: EvalBudget,
) -> Population {
    let mut pop = Population::new();
    let exploit = if recursors.is_empty() { 0 } else { shape.exploit_count() };
    let recorded = record(base, recursors);
    let remember = |d: Option<Code>| -> Result<Code, CodeError> {
        let d = d.ok_or(CodeError::AddressInvalid(layout::out()))?;
        code::store_memory(parent, &d, shape.memory_cap, shape.limits)
    };
    let dead =
        || code::store_memory(parent, &recorded, shape.memory_cap, shape.limits).unwrap_or_else(|_| recorded.clone());
    if exploit > 0 {
        let built = remember(apply_all(&recorded, recursors, budget, shape.limits));
        for _ in 0..exploit {
            match &built {
                Ok(d) => pop.push(d.clone(), None, Origin::Exploit),
                Err(_) => pop.push_dead(dead(), None, Origin::Exploit),
            };
        }
    }
    for _ in exploit..shape.m {
        let built = if explore.is_empty() {
            None
        } else {
            let editor = &explore[rng.gen_range(0..explore.len())];
            let explorer = Recursor::projected(layout::out(), editor.clone());
            apply_all(&recorded, std::slice::from_ref(&explorer), budget, shape.limits)
        };
        match remember(built) {
            Ok(d) => pop.push(d, None, Origin::Explore),
            Err(_) => pop.push_dead(dead(), None, Origin::Explore),
        };
    }
    pop
}
