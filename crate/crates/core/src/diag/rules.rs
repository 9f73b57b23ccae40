//! Rule detection over long memory: usefulness, guarded implications and
//! noticeable conditions.

use super::trace::{MemoryTrace, Transition};
use super::Ratio;
use crate::code::{layout, read_at, Address, Atom, Code, CodeError, Limits, Tok};
use crate::lang::{eval, EvalBudget, Generator, Grammar, Program};

/// "If condition holds, act by action", with the number of memory
/// transitions on which the condition held.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuardedRule {
    pub condition: Program,
    pub action: Program,
    pub support: usize,
    /// Position of `condition` in the probe sequence.
    pub condition_index: u64,
    /// Position of `action` in the action generator sequence.
    pub action_index: u64,
}

/// Fraction of transitions with `x(before↾θ) = after↾θ`.
pub fn fit_fraction(x: &Program, transitions: &[Transition], theta: &Address, budget: EvalBudget) -> Ratio {
    let hits = transitions.iter().filter(|t| fits_transition(x, t, theta, budget)).count();
    Ratio::new(hits as u64, transitions.len().max(1) as u64)
}

fn fits_transition(x: &Program, t: &Transition, theta: &Address, budget: EvalBudget) -> bool {
    let (Ok(a), Ok(b)) = (read_at(&t.before, theta), read_at(&t.after, theta)) else { return false };
    eval(x, a, budget).is_ok_and(|v| v == *b)
}

/// Among the first `k_max` yields of `gen`, those other than `ID` fitting at
/// least a fraction `tau` of the memory transitions, in generator order.
/// With `tau = 0` every candidate qualifies.
pub fn detect_useful(
    memory: &MemoryTrace,
    theta: &Address,
    tau: Ratio,
    gen: &Generator,
    k_max: u64,
    budget: EvalBudget,
) -> Vec<Program> {
    if memory.len() < 3 {
        return Vec::new();
    }
    let ts = memory.transitions();
    gen.clone()
        .take(k_max as usize)
        .filter(|p| *p != Program::Id && fit_fraction(p, &ts, theta, budget) >= tau)
        .collect()
}

/// `IFEQ(θ, atom, K(TRUE), K(FALSE))`: a boolean probe of one position.
pub fn probe(theta: Address, atom: Atom) -> Program {
    Program::if_eq(theta, atom, Program::Const(Code::tok(Tok::True)), Program::Const(Code::tok(Tok::False)))
}

/// The address and atom of a probe-shaped program.
pub fn as_probe(p: &Program) -> Option<(&Address, Atom)> {
    match p {
        Program::IfEq(theta, atom, yes, no)
            if **yes == Program::Const(Code::tok(Tok::True)) && **no == Program::Const(Code::tok(Tok::False)) =>
        {
            Some((theta, *atom))
        }
        _ => None,
    }
}

/// Boolean probes of a grammar in program order: by address, then atom.
#[derive(Debug, Clone)]
pub struct Probes {
    atoms: Vec<Atom>,
    base: usize,
    digits: Vec<usize>,
    atom: usize,
}

impl Probes {
    pub fn new(grammar: &Grammar) -> Probes {
        Probes { atoms: grammar.atoms(), base: grammar.max_addr_entry, digits: Vec::new(), atom: 0 }
    }

    fn address(&self) -> Address {
        Address(self.digits.iter().map(|d| d + 1).collect())
    }

    fn advance_address(&mut self) -> bool {
        for d in self.digits.iter_mut().rev() {
            *d += 1;
            if *d < self.base {
                return true;
            }
            *d = 0;
        }
        if self.digits.len() >= crate::code::D_MAX || self.base == 0 {
            return false;
        }
        self.digits.push(0);
        true
    }

    /// Skips the remaining atoms of the current address, returning how many
    /// probes were skipped.
    fn skip_address(&mut self) -> usize {
        let skipped = self.atoms.len() - self.atom;
        self.atom = self.atoms.len();
        skipped
    }

    fn next_pair(&mut self) -> Option<(Address, Atom)> {
        if self.atom == self.atoms.len() {
            if !self.advance_address() {
                return None;
            }
            self.atom = 0;
        }
        let out = (self.address(), *self.atoms.get(self.atom)?);
        self.atom += 1;
        Some(out)
    }
}

impl Iterator for Probes {
    type Item = Program;

    fn next(&mut self) -> Option<Program> {
        self.next_pair().map(|(a, v)| probe(a, v))
    }
}

/// `PUT(θ, SEQ(READ(θ), b))`: `b` acting on the θ-content of a whole code.
pub fn lift(theta: &Address, b: Program) -> Program {
    Program::put(theta.clone(), Program::seq(Program::Read(theta.clone()), b))
}

/// A program returning `b(x)` when `a(x) = TRUE` and `x` otherwise.
pub fn guarded_rule(a: &Program, b: &Program) -> Program {
    if let Some((theta, atom)) = as_probe(a) {
        return Program::if_eq(theta.clone(), atom, b.clone(), Program::Id);
    }
    let first = Address::new(vec![1]);
    let second = Address::new(vec![2]);
    Program::seq(
        Program::pair(a.clone(), Program::Id),
        Program::if_eq(
            first,
            Atom::Tok(Tok::True),
            Program::seq(Program::Read(second.clone()), b.clone()),
            Program::Read(second),
        ),
    )
}

/// Small fixed-width bitset over transition indices.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(n: usize) -> Bits {
        Bits(vec![0; n.div_ceil(64)])
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }
    fn covers(&self, other: &Bits) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a & b == *b)
    }
}

/// Guarded rules consistent with every memory transition: the condition is
/// one of the first `k_a` probes, the action one of the first `k_b` yields of
/// `gen`, the condition holds on at least `s_min` transitions, and the action
/// maps `before↾θ` to `after↾θ` on each of them.
pub fn detect_implications(
    memory: &MemoryTrace,
    target: &Address,
    s_min: usize,
    k_a: u64,
    gen: &Generator,
    k_b: u64,
    budget: EvalBudget,
) -> Vec<GuardedRule> {
    if memory.len() < 3 {
        return Vec::new();
    }
    let ts = memory.transitions();
    let n = ts.len();
    if s_min > n {
        return Vec::new();
    }
    let actions: Vec<Program> = gen.clone().take(k_b as usize).collect();
    let fit: Vec<Bits> = actions
        .iter()
        .map(|b| {
            let mut bits = Bits::new(n);
            for (i, t) in ts.iter().enumerate() {
                if fits_transition(b, t, target, budget) {
                    bits.set(i);
                }
            }
            bits
        })
        .collect();

    let mut rules = Vec::new();
    let mut probes = Probes::new(gen.enumeration().grammar());
    let mut index = 0u64;
    let mut current: Option<(Address, Vec<Option<Atom>>)> = None;
    while index < k_a {
        let Some((theta, atom)) = probes.next_pair() else { break };
        let values = match &current {
            Some((a, v)) if *a == theta => v,
            _ => {
                let v: Vec<Option<Atom>> =
                    ts.iter().map(|t| read_at(&t.before, &theta).ok().and_then(Code::atom)).collect();
                current = Some((theta.clone(), v));
                &current.as_ref().expect("just set").1
            }
        };
        if values.iter().all(Option::is_none) {
            index += 1 + probes.skip_address() as u64;
            continue;
        }
        let mut support = Bits::new(n);
        for (i, v) in values.iter().enumerate() {
            if *v == Some(atom) {
                support.set(i);
            }
        }
        let count = support.count();
        if count >= s_min.max(1) {
            for (j, b) in actions.iter().enumerate() {
                if fit[j].covers(&support) {
                    rules.push(GuardedRule {
                        condition: probe(theta.clone(), atom),
                        action: b.clone(),
                        support: count,
                        condition_index: index,
                        action_index: j as u64,
                    });
                }
            }
        }
        index += 1;
    }
    rules
}

/// Conditions implying at least `many` distinct actions, in probe order.
pub fn noticeable(rules: &[GuardedRule], many: usize) -> Vec<Program> {
    let mut out: Vec<(u64, Program, usize)> = Vec::new();
    for r in rules {
        match out.iter_mut().find(|(i, _, _)| *i == r.condition_index) {
            Some(entry) => entry.2 += 1,
            None => out.push((r.condition_index, r.condition.clone(), 1)),
        }
    }
    out.sort_by_key(|e| e.0);
    out.into_iter().filter(|e| e.2 >= many).map(|e| e.1).collect()
}

/// Probes at OUT-level implying at least `many` distinct actions.
pub fn detect_noticeable(
    memory: &MemoryTrace,
    many: usize,
    s_min: usize,
    k_a: u64,
    gen: &Generator,
    k_b: u64,
    budget: EvalBudget,
) -> Vec<Program> {
    noticeable(&detect_implications(memory, &layout::out(), s_min, k_a, gen, k_b, budget), many)
}

fn truth(a: &Program, c: &Code, budget: EvalBudget) -> Code {
    let hit = eval(a, c, budget).is_ok_and(|v| v.is_leaf(Atom::Tok(Tok::True)));
    Code::tok(if hit { Tok::True } else { Tok::False })
}

/// Registers `a` on the notice board of `c` with its current truth value.
/// Registering the same predicate twice is a no-op.
pub fn notify(c: &Code, a: &Program, budget: EvalBudget, limits: Limits) -> Result<Code, CodeError> {
    let encoded = a.encode();
    let board = layout::slot(c, layout::NB).and_then(Code::children).ok_or(CodeError::NotANode(layout::nb()))?;
    if board.iter().any(|e| e.children().and_then(|ch| ch.first()) == Some(&encoded)) {
        return Ok(c.clone());
    }
    let mut entries = board.to_vec();
    entries.push(Code::node(vec![encoded, truth(a, c, budget)]));
    layout::with_slot(c, layout::NB, Code::node(entries)).check_limits(limits)
}

/// Recomputes the truth value of every registered predicate on `c`.
/// Entries whose predicate does not decode are left untouched.
pub fn refresh_notices(c: &Code, budget: EvalBudget) -> Code {
    let Some(board) = layout::slot(c, layout::NB).and_then(Code::children) else { return c.clone() };
    let entries: Vec<Code> = board
        .iter()
        .map(|e| match e.children() {
            Some([pred, _]) => match Program::decode(pred) {
                Ok(a) => Code::node(vec![pred.clone(), truth(&a, c, budget)]),
                Err(_) => e.clone(),
            },
            _ => e.clone(),
        })
        .collect();
    layout::with_slot(c, layout::NB, Code::node(entries))
}
