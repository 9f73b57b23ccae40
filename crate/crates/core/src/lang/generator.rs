//! Simplicity-ordered enumeration of programs.
//!
//! Programs are ordered first by encoded size, then by constructor rank, then
//! field by field; each sub-program or sub-code field is itself compared by
//! size first. Literals come from a finite domain so every size class is
//! finite, which lets the enumeration be indexed directly (unranked) instead
//! of generated and filtered.

use std::cmp::Ordering;
use std::sync::{Arc, RwLock};

use thiserror::Error;

use super::program::Program;
use crate::code::{int_literal_rank, Address, Atom, Code, Tok};

/// Default largest program size the enumeration reaches.
pub const G_MAX: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("program enumeration exhausted")]
pub struct Exhausted;

/// Literal domain and size cap of the enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grammar {
    /// Integer literals range over `-int_bound..=int_bound`.
    pub int_bound: i64,
    /// Address entries range over `1..=max_addr_entry`.
    pub max_addr_entry: usize,
    /// Token literals are the first `tokens` entries of the alphabet.
    pub tokens: usize,
    pub max_size: usize,
}

impl Default for Grammar {
    fn default() -> Self {
        Grammar { int_bound: 3, max_addr_entry: 5, tokens: Tok::ALL.len(), max_size: G_MAX }
    }
}

impl Grammar {
    /// Atom literals in enumeration order.
    pub fn atoms(&self) -> Vec<Atom> {
        let mut out = vec![Atom::Int(0)];
        for k in 1..=self.int_bound {
            out.push(Atom::Int(k));
            out.push(Atom::Int(-k));
        }
        out.extend(Tok::ALL.iter().take(self.tokens).map(|&t| Atom::Tok(t)));
        out
    }

    pub fn contains_atom(&self, a: &Atom) -> bool {
        match a {
            Atom::Int(v) => v.abs() <= self.int_bound,
            Atom::Tok(t) => Tok::ALL.iter().take(self.tokens).any(|x| x == t),
        }
    }

    fn atom_index(&self, a: &Atom) -> Option<u128> {
        if !self.contains_atom(a) {
            return None;
        }
        Some(match a {
            Atom::Int(v) => int_literal_rank(*v) as u128,
            Atom::Tok(t) => (2 * self.int_bound as u128 + 1) + Tok::ALL.iter().position(|x| x == t)? as u128,
        })
    }

    /// Addresses of length `len` in lexicographic order.
    pub fn addresses_of_len(&self, len: usize) -> impl Iterator<Item = Address> + '_ {
        let total = (self.max_addr_entry as u128).saturating_pow(len as u32);
        (0..total).map(move |i| self.unrank_addr(len + 1, i))
    }

    fn unrank_addr(&self, size: usize, mut idx: u128) -> Address {
        let len = size - 1;
        let base = self.max_addr_entry as u128;
        let mut path = vec![0usize; len];
        for slot in path.iter_mut().rev() {
            *slot = (idx % base) as usize + 1;
            idx /= base;
        }
        Address(path)
    }

    fn rank_addr(&self, a: &Address) -> Option<u128> {
        let base = self.max_addr_entry as u128;
        a.path()
            .iter()
            .try_fold(0u128, |acc, &e| (e >= 1 && e <= self.max_addr_entry).then(|| acc * base + (e as u128 - 1)))
    }
}

/// Size-indexed counts of every syntactic category.
#[derive(Debug)]
struct Counts {
    atoms: u128,
    /// ADD literals: the integer part of the atom domain.
    int_atoms: u128,
    addr: Vec<u128>,
    code: Vec<u128>,
    seq: Vec<u128>,
    prog: Vec<u128>,
    /// prog-pair counts: Σ prog(a)·prog(t-a), indexed by t.
    pairs: Vec<u128>,
}

impl Counts {
    fn new(g: &Grammar) -> Counts {
        let n = g.max_size + 1;
        let atoms = g.atoms().len() as u128;
        let mut c = Counts {
            atoms,
            int_atoms: 2 * g.int_bound as u128 + 1,
            addr: vec![0; n],
            code: vec![0; n],
            seq: vec![0; n],
            prog: vec![0; n],
            pairs: vec![0; n],
        };
        for s in 1..n {
            c.addr[s] = (g.max_addr_entry as u128).saturating_pow((s - 1) as u32);
        }
        c.seq[0] = 1;
        for s in 1..n {
            c.code[s] = c.seq[s - 1].saturating_add(if s == 1 { atoms } else { 0 });
            c.seq[s] = (1..=s).fold(0u128, |acc, k| acc.saturating_add(c.code[k].saturating_mul(c.seq[s - k])));
        }
        for s in 2..n {
            c.pairs[s - 2] = c.pair_count(s - 2);
            let mut total = 0u128;
            for ctor in 0..10u8 {
                total = total.saturating_add(c.ctor_count(ctor, s));
            }
            c.prog[s] = total;
        }
        c.pairs[n - 2] = c.pair_count(n - 2);
        c.pairs[n - 1] = c.pair_count(n - 1);
        c
    }

    fn pair_count(&self, t: usize) -> u128 {
        (1..t).fold(0u128, |acc, a| acc.saturating_add(self.prog[a].saturating_mul(self.prog[t - a])))
    }

    /// Number of programs of size `s` with a given constructor. Requires
    /// `prog` and `pairs` filled below `s`.
    fn ctor_count(&self, ctor: u8, s: usize) -> u128 {
        match ctor {
            0 => (s == 2) as u128,
            1 => self.code[s - 2],
            2 => {
                if s == 3 {
                    self.atoms_int()
                } else {
                    0
                }
            }
            3 => self.addr[s - 2],
            4 | 5 => (1..s.saturating_sub(3))
                .fold(0u128, |acc, a| acc.saturating_add(self.addr[a].saturating_mul(self.prog[s - 2 - a]))),
            6 | 7 => self.pairs[s - 2],
            8 => (1..s.saturating_sub(3)).fold(0u128, |acc, a| {
                acc.saturating_add(self.addr[a].saturating_mul(self.atoms).saturating_mul(self.pairs[s - 3 - a]))
            }),
            9 => (1..s - 1).fold(0u128, |acc, a| acc.saturating_add(self.addr[a].saturating_mul(self.addr[s - 2 - a]))),
            _ => 0,
        }
    }

    fn atoms_int(&self) -> u128 {
        self.int_atoms
    }
}

/// A grammar with its count tables and a shared cache of the canonical
/// prefix. Cheap to clone behind `Arc`; safe to share across threads.
#[derive(Debug)]
pub struct Enumeration {
    grammar: Grammar,
    counts: Counts,
    cumulative: Vec<u128>,
    cache: RwLock<Vec<Program>>,
}

const CACHE_CAP: usize = 1 << 18;

impl Enumeration {
    pub fn new(grammar: Grammar) -> Arc<Enumeration> {
        let counts = Counts::new(&grammar);
        let mut cumulative = Vec::with_capacity(counts.prog.len() + 1);
        let mut acc = 0u128;
        cumulative.push(0);
        for &n in &counts.prog {
            acc = acc.saturating_add(n);
            cumulative.push(acc);
        }
        Arc::new(Enumeration { grammar, counts, cumulative, cache: RwLock::new(Vec::new()) })
    }

    pub fn grammar(&self) -> &Grammar {
        &self.grammar
    }

    /// Number of programs of exactly `size`.
    pub fn count_of_size(&self, size: usize) -> u128 {
        self.counts.prog.get(size).copied().unwrap_or(0)
    }

    /// Number of programs of size at most `size`.
    pub fn count_up_to(&self, size: usize) -> u128 {
        self.cumulative[(size + 1).min(self.cumulative.len() - 1)]
    }

    pub fn total(&self) -> u128 {
        *self.cumulative.last().unwrap_or(&0)
    }

    /// The program at canonical position `index`.
    pub fn canonical(&self, index: u128) -> Option<Program> {
        if index >= self.total() {
            return None;
        }
        if index < CACHE_CAP as u128 {
            let i = index as usize;
            if let Some(p) = self.cache.read().expect("cache lock").get(i) {
                return Some(p.clone());
            }
            let mut cache = self.cache.write().expect("cache lock");
            let target = (i + 1).max(cache.len() * 2).min(CACHE_CAP).min(self.total() as usize);
            while cache.len() < target {
                let next = self.unrank_global(cache.len() as u128);
                cache.push(next);
            }
            return Some(cache[i].clone());
        }
        Some(self.unrank_global(index))
    }

    fn unrank_global(&self, index: u128) -> Program {
        let size = self.cumulative.partition_point(|&c| c <= index) - 1;
        self.unrank_program(size, index - self.cumulative[size])
    }

    /// Canonical position of `p`, or `None` if `p` lies outside the literal
    /// domain or the size cap.
    pub fn index_of(&self, p: &Program) -> Option<u128> {
        let s = p.size();
        if s > self.grammar.max_size {
            return None;
        }
        Some(self.cumulative[s] + self.rank_program(p)?)
    }

    /// All programs up to `size`, in canonical order.
    pub fn programs_up_to(&self, size: usize) -> Vec<Program> {
        (0..self.count_up_to(size)).filter_map(|i| self.canonical(i)).collect()
    }

    pub fn unrank_program(&self, s: usize, mut idx: u128) -> Program {
        let c = &self.counts;
        let g = &self.grammar;
        let mut ctor = 0u8;
        loop {
            let n = c.ctor_count(ctor, s);
            if idx < n {
                break;
            }
            idx -= n;
            ctor += 1;
            assert!(ctor < 10, "index out of range for size {s}");
        }
        match ctor {
            0 => Program::Id,
            1 => Program::Const(self.unrank_code(s - 2, idx)),
            2 => match g.atoms()[idx as usize] {
                Atom::Int(k) => Program::Add(k),
                Atom::Tok(_) => unreachable!("integer literals precede tokens"),
            },
            3 => Program::Read(g.unrank_addr(s - 2, idx)),
            4 | 5 => {
                let (a, i) = self.split_addr_prog(s, idx);
                let inner = c.prog[s - 2 - a];
                let addr = g.unrank_addr(a, i / inner);
                let p = self.unrank_program(s - 2 - a, i % inner);
                if ctor == 4 {
                    Program::put(addr, p)
                } else {
                    Program::append(addr, p)
                }
            }
            6 | 7 => {
                let (p, q) = self.unrank_pair(s - 2, idx);
                if ctor == 6 {
                    Program::seq(p, q)
                } else {
                    Program::pair(p, q)
                }
            }
            8 => {
                let mut a = 1;
                loop {
                    let n = c.addr[a].saturating_mul(c.atoms).saturating_mul(c.pairs[s - 3 - a]);
                    if idx < n {
                        break;
                    }
                    idx -= n;
                    a += 1;
                }
                let w = c.pairs[s - 3 - a];
                let per_addr = c.atoms * w;
                let addr = g.unrank_addr(a, idx / per_addr);
                let rest = idx % per_addr;
                let atom = g.atoms()[(rest / w) as usize];
                let (p, q) = self.unrank_pair(s - 3 - a, rest % w);
                Program::if_eq(addr, atom, p, q)
            }
            9 => {
                let mut a = 1;
                loop {
                    let n = c.addr[a] * c.addr[s - 2 - a];
                    if idx < n {
                        break;
                    }
                    idx -= n;
                    a += 1;
                }
                let inner = c.addr[s - 2 - a];
                Program::ApplyAt(g.unrank_addr(a, idx / inner), g.unrank_addr(s - 2 - a, idx % inner))
            }
            _ => unreachable!(),
        }
    }

    fn split_addr_prog(&self, s: usize, mut idx: u128) -> (usize, u128) {
        let c = &self.counts;
        let mut a = 1;
        loop {
            let n = c.addr[a] * c.prog[s - 2 - a];
            if idx < n {
                return (a, idx);
            }
            idx -= n;
            a += 1;
        }
    }

    fn unrank_pair(&self, t: usize, mut idx: u128) -> (Program, Program) {
        let c = &self.counts;
        let mut a = 2;
        loop {
            let n = c.prog[a] * c.prog[t - a];
            if idx < n {
                let inner = c.prog[t - a];
                return (self.unrank_program(a, idx / inner), self.unrank_program(t - a, idx % inner));
            }
            idx -= n;
            a += 1;
        }
    }

    fn unrank_code(&self, s: usize, idx: u128) -> Code {
        if s == 1 && idx < self.counts.atoms {
            return Code::Leaf(self.grammar.atoms()[idx as usize]);
        }
        let idx = if s == 1 { idx - self.counts.atoms } else { idx };
        Code::node(self.unrank_seq(s - 1, idx))
    }

    fn unrank_seq(&self, t: usize, mut idx: u128) -> Vec<Code> {
        let c = &self.counts;
        let mut out = Vec::new();
        let mut rest = t;
        while rest > 0 {
            let mut k = 1;
            loop {
                let n = c.code[k] * c.seq[rest - k];
                if idx < n {
                    break;
                }
                idx -= n;
                k += 1;
            }
            let inner = c.seq[rest - k];
            out.push(self.unrank_code(k, idx / inner));
            idx %= inner;
            rest -= k;
        }
        out
    }

    fn rank_program(&self, p: &Program) -> Option<u128> {
        let c = &self.counts;
        let g = &self.grammar;
        let s = p.size();
        let ctor = p.constructor_rank();
        let before: u128 = (0..ctor).map(|k| c.ctor_count(k, s)).sum();
        let within = match p {
            Program::Id => 0,
            Program::Const(v) => self.rank_code(v)?,
            Program::Add(k) => g.atom_index(&Atom::Int(*k))?,
            Program::Read(a) => g.rank_addr(a)?,
            Program::Put(a, q) | Program::Append(a, q) => {
                let asz = a.len() + 1;
                let skipped: u128 = (1..asz).map(|x| c.addr[x] * c.prog[s - 2 - x]).sum();
                skipped + g.rank_addr(a)? * c.prog[q.size()] + self.rank_program(q)?
            }
            Program::Seq(x, y) | Program::Pair(x, y) => self.rank_pair(x, y)?,
            Program::IfEq(a, atom, x, y) => {
                let asz = a.len() + 1;
                let skipped: u128 = (1..asz).map(|k| c.addr[k] * c.atoms * c.pairs[s - 3 - k]).sum();
                let w = c.pairs[s - 3 - asz];
                skipped + g.rank_addr(a)? * c.atoms * w + g.atom_index(atom)? * w + self.rank_pair(x, y)?
            }
            Program::ApplyAt(a, b) => {
                let asz = a.len() + 1;
                let skipped: u128 = (1..asz).map(|k| c.addr[k] * c.addr[s - 2 - k]).sum();
                skipped + g.rank_addr(a)? * c.addr[b.len() + 1] + g.rank_addr(b)?
            }
        };
        Some(before + within)
    }

    fn rank_pair(&self, x: &Program, y: &Program) -> Option<u128> {
        let c = &self.counts;
        let t = x.size() + y.size();
        let skipped: u128 = (2..x.size()).map(|a| c.prog[a] * c.prog[t - a]).sum();
        Some(skipped + self.rank_program(x)? * c.prog[y.size()] + self.rank_program(y)?)
    }

    fn rank_code(&self, v: &Code) -> Option<u128> {
        match v {
            Code::Leaf(a) if v.size() == 1 => self.grammar.atom_index(a),
            Code::Leaf(_) => None,
            Code::Node(_) => {
                let base = if v.size() == 1 { self.counts.atoms } else { 0 };
                Some(base + self.rank_seq(v.children().unwrap_or(&[]))?)
            }
        }
    }

    fn rank_seq(&self, items: &[Code]) -> Option<u128> {
        let c = &self.counts;
        let Some((first, rest)) = items.split_first() else { return Some(0) };
        let t: usize = items.iter().map(Code::size).sum();
        let k = first.size();
        let skipped: u128 = (1..k).map(|j| c.code[j] * c.seq[t - j]).sum();
        Some(skipped + self.rank_code(first)? * c.seq[t - k] + self.rank_seq(rest)?)
    }
}

/// Total order on programs: size, then constructor rank, then fields.
pub fn program_order(a: &Program, b: &Program) -> Ordering {
    a.size().cmp(&b.size()).then_with(|| same_size_order(a, b))
}

fn same_size_order(a: &Program, b: &Program) -> Ordering {
    use Program::*;
    a.constructor_rank().cmp(&b.constructor_rank()).then_with(|| match (a, b) {
        (Const(x), Const(y)) => code_order(x, y),
        (Add(x), Add(y)) => int_literal_rank(*x).cmp(&int_literal_rank(*y)),
        (Read(x), Read(y)) => x.cmp(y),
        (Put(x, p), Put(y, q)) | (Append(x, p), Append(y, q)) => x.cmp(y).then_with(|| program_order(p, q)),
        (Seq(p1, q1), Seq(p2, q2)) | (Pair(p1, q1), Pair(p2, q2)) => {
            program_order(p1, p2).then_with(|| program_order(q1, q2))
        }
        (IfEq(x, u, p1, q1), IfEq(y, v, p2, q2)) => {
            x.cmp(y).then_with(|| u.cmp(v)).then_with(|| program_order(p1, p2)).then_with(|| program_order(q1, q2))
        }
        (ApplyAt(x1, y1), ApplyAt(x2, y2)) => x1.cmp(x2).then_with(|| y1.cmp(y2)),
        _ => Ordering::Equal,
    })
}

/// Order on literal codes: size, leaves before nodes, atoms by literal order,
/// children lists by first child (size, then order) and then the rest.
pub fn code_order(a: &Code, b: &Code) -> Ordering {
    a.size().cmp(&b.size()).then_with(|| match (a, b) {
        (Code::Leaf(x), Code::Leaf(y)) => x.cmp(y),
        (Code::Leaf(_), Code::Node(_)) => Ordering::Less,
        (Code::Node(_), Code::Leaf(_)) => Ordering::Greater,
        (Code::Node(_), Code::Node(_)) => seq_order(a.children().unwrap_or(&[]), b.children().unwrap_or(&[])),
    })
}

fn seq_order(a: &[Code], b: &[Code]) -> Ordering {
    match (a.split_first(), b.split_first()) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
        (Some((x, xs)), Some((y, ys))) => code_order(x, y).then_with(|| seq_order(xs, ys)),
    }
}

/// A deterministic program enumeration with a priority prefix.
///
/// Priority entries are yielded first, in list order; the canonical
/// enumeration follows with the priority entries suppressed.
#[derive(Debug, Clone)]
pub struct Generator {
    enumeration: Arc<Enumeration>,
    priority: Vec<Program>,
    yielded: u64,
    canonical_next: u128,
}

impl Generator {
    pub fn new(enumeration: Arc<Enumeration>) -> Generator {
        Generator { enumeration, priority: Vec::new(), yielded: 0, canonical_next: 0 }
    }

    pub fn with_priority(enumeration: Arc<Enumeration>, priority: Vec<Program>) -> Generator {
        let mut g = Generator::new(enumeration);
        for p in priority {
            if !g.priority.contains(&p) {
                g.priority.push(p);
            }
        }
        g
    }

    pub fn enumeration(&self) -> &Arc<Enumeration> {
        &self.enumeration
    }

    pub fn priority(&self) -> &[Program] {
        &self.priority
    }

    /// Number of programs yielded so far, i.e. the index of the next yield.
    pub fn position(&self) -> u64 {
        self.yielded
    }

    /// The same generator rewound to its first yield.
    pub fn restarted(&self) -> Generator {
        Generator {
            enumeration: self.enumeration.clone(),
            priority: self.priority.clone(),
            yielded: 0,
            canonical_next: 0,
        }
    }

    pub fn next_program(&mut self) -> Result<Program, Exhausted> {
        if let Some(p) = self.priority.get(self.yielded as usize) {
            self.yielded += 1;
            return Ok(p.clone());
        }
        loop {
            let p = self.enumeration.canonical(self.canonical_next).ok_or(Exhausted)?;
            self.canonical_next += 1;
            if !self.priority.contains(&p) {
                self.yielded += 1;
                return Ok(p);
            }
        }
    }

    /// Moves `p` to the front of the priority list. The result is rewound.
    pub fn promote(&self, p: Program) -> Generator {
        let mut priority = Vec::with_capacity(self.priority.len() + 1);
        priority.extend(self.priority.iter().filter(|q| **q != p).cloned());
        priority.insert(0, p);
        Generator { enumeration: self.enumeration.clone(), priority, yielded: 0, canonical_next: 0 }
    }

    /// Position of `p` in the full sequence of this generator.
    pub fn index_of(&self, p: &Program) -> Option<u128> {
        if let Some(i) = self.priority.iter().position(|q| q == p) {
            return Some(i as u128);
        }
        let canonical = self.enumeration.index_of(p)?;
        let shadowed =
            self.priority.iter().filter(|q| self.enumeration.index_of(q).is_some_and(|j| j < canonical)).count()
                as u128;
        Some(self.priority.len() as u128 + canonical - shadowed)
    }
}

impl Iterator for Generator {
    type Item = Program;

    fn next(&mut self) -> Option<Program> {
        self.next_program().ok()
    }
}
