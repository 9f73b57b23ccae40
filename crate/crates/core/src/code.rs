//! Tree-structured codes: atoms, addresses, populations and the basic
//! read / replace / append / duplicate / memory-store edits.
//!
//! Every edit is a pure function returning a new tree. Subtrees are shared
//! behind `Arc`, so cloning a code is cheap and codes can cross threads.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

/// Default maximum depth of a code.
pub const D_MAX: usize = 32;
/// Default maximum vertex count of a code.
pub const C_MAX: usize = 100_000;
/// Integers must stay strictly below this magnitude.
pub const INT_LIMIT: i64 = 1 << 62;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodeError {
    #[error("address {0} is not valid in this code")]
    AddressInvalid(Address),
    #[error("address {0} does not hold a node")]
    NotANode(Address),
    #[error("code exceeds size limits ({size} vertices, depth {depth})")]
    SizeExceeded { size: usize, depth: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at byte {pos}: {msg}")]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

impl ParseError {
    pub(crate) fn new(pos: usize, msg: impl Into<String>) -> Self {
        ParseError { pos, msg: msg.into() }
    }
}

/// The fixed token alphabet. Declaration order is the literal order used by
/// the program enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tok {
    True,
    False,
    Lp,
    Rp,
    Nil,
    Id,
    K,
    Add,
    Read,
    Put,
    Append,
    Seq,
    Pair,
    IfEq,
    ApplyAt,
}

impl Tok {
    pub const ALL: [Tok; 15] = [
        Tok::True,
        Tok::False,
        Tok::Lp,
        Tok::Rp,
        Tok::Nil,
        Tok::Id,
        Tok::K,
        Tok::Add,
        Tok::Read,
        Tok::Put,
        Tok::Append,
        Tok::Seq,
        Tok::Pair,
        Tok::IfEq,
        Tok::ApplyAt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Tok::True => "TRUE",
            Tok::False => "FALSE",
            Tok::Lp => "LP",
            Tok::Rp => "RP",
            Tok::Nil => "NIL",
            Tok::Id => "ID",
            Tok::K => "K",
            Tok::Add => "ADD",
            Tok::Read => "READ",
            Tok::Put => "PUT",
            Tok::Append => "APPEND",
            Tok::Seq => "SEQ",
            Tok::Pair => "PAIR",
            Tok::IfEq => "IFEQ",
            Tok::ApplyAt => "APPLYAT",
        }
    }

    pub fn from_name(name: &str) -> Option<Tok> {
        Tok::ALL.iter().copied().find(|t| t.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Atom {
    Int(i64),
    Tok(Tok),
}

impl Atom {
    pub fn is_valid(&self) -> bool {
        match *self {
            Atom::Int(v) => v.unsigned_abs() < INT_LIMIT as u64,
            Atom::Tok(_) => true,
        }
    }
}

/// Literal order: integers first as 0, 1, -1, 2, -2, ...; then tokens in
/// alphabet order.
pub fn int_literal_rank(v: i64) -> u64 {
    if v > 0 {
        2 * v as u64 - 1
    } else {
        2 * v.unsigned_abs()
    }
}

impl Ord for Atom {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Atom::Int(a), Atom::Int(b)) => int_literal_rank(*a).cmp(&int_literal_rank(*b)),
            (Atom::Int(_), Atom::Tok(_)) => Ordering::Less,
            (Atom::Tok(_), Atom::Int(_)) => Ordering::Greater,
            (Atom::Tok(a), Atom::Tok(b)) => a.cmp(b),
        }
    }
}

impl PartialOrd for Atom {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Int(v) => write!(f, "{v}"),
            Atom::Tok(t) => f.write_str(t.name()),
        }
    }
}

impl From<i64> for Atom {
    fn from(v: i64) -> Self {
        Atom::Int(v)
    }
}

impl From<Tok> for Atom {
    fn from(t: Tok) -> Self {
        Atom::Tok(t)
    }
}

#[derive(Debug, PartialEq, Eq, Hash)]
pub struct Node {
    children: Vec<Code>,
    size: usize,
    depth: usize,
}

/// A finite ordered tree of atoms.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Code {
    Leaf(Atom),
    Node(Arc<Node>),
}

impl Code {
    pub fn int(v: i64) -> Code {
        Code::Leaf(Atom::Int(v))
    }

    pub fn tok(t: Tok) -> Code {
        Code::Leaf(Atom::Tok(t))
    }

    pub fn node(children: Vec<Code>) -> Code {
        let size = 1 + children.iter().map(Code::size).sum::<usize>();
        let depth = children.iter().map(|c| c.depth() + 1).max().unwrap_or(0);
        Code::Node(Arc::new(Node { children, size, depth }))
    }

    pub fn empty() -> Code {
        Code::node(Vec::new())
    }

    /// Total count of tree vertices.
    pub fn size(&self) -> usize {
        match self {
            Code::Leaf(_) => 1,
            Code::Node(n) => n.size,
        }
    }

    /// Length of the longest root-to-leaf path, counted in edges.
    pub fn depth(&self) -> usize {
        match self {
            Code::Leaf(_) => 0,
            Code::Node(n) => n.depth,
        }
    }

    pub fn children(&self) -> Option<&[Code]> {
        match self {
            Code::Leaf(_) => None,
            Code::Node(n) => Some(&n.children),
        }
    }

    pub fn atom(&self) -> Option<Atom> {
        match self {
            Code::Leaf(a) => Some(*a),
            Code::Node(_) => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Code::Leaf(Atom::Int(v)) => Some(*v),
            _ => None,
        }
    }

    pub fn is_leaf(&self, atom: Atom) -> bool {
        matches!(self, Code::Leaf(a) if *a == atom)
    }

    pub fn check_limits(self, limits: Limits) -> Result<Code, CodeError> {
        if self.size() > limits.max_nodes || self.depth() > limits.max_depth {
            return Err(CodeError::SizeExceeded { size: self.size(), depth: self.depth() });
        }
        Ok(self)
    }

    /// Addresses of every integer leaf, in pre-order.
    pub fn int_leaf_addresses(&self) -> Vec<Address> {
        let mut out = Vec::new();
        let mut path = Vec::new();
        collect_ints(self, &mut path, &mut out);
        out
    }
}

fn collect_ints(c: &Code, path: &mut Vec<usize>, out: &mut Vec<Address>) {
    match c {
        Code::Leaf(Atom::Int(_)) => out.push(Address(path.clone())),
        Code::Leaf(_) => {}
        Code::Node(n) => {
            for (i, child) in n.children.iter().enumerate() {
                path.push(i + 1);
                collect_ints(child, path, out);
                path.pop();
            }
        }
    }
}

impl From<Atom> for Code {
    fn from(a: Atom) -> Self {
        Code::Leaf(a)
    }
}

/// Size/depth caps applied to edit results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_nodes: usize,
    pub max_depth: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_nodes: C_MAX, max_depth: D_MAX }
    }
}

/// Path of 1-based child indices; the empty path is the root.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Address(pub Vec<usize>);

impl Address {
    pub fn root() -> Address {
        Address(Vec::new())
    }

    pub fn new(path: impl Into<Vec<usize>>) -> Address {
        Address(path.into())
    }

    pub fn path(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, index: usize) -> Address {
        let mut p = self.0.clone();
        p.push(index);
        Address(p)
    }

    pub fn join(&self, rest: &Address) -> Address {
        let mut p = self.0.clone();
        p.extend_from_slice(&rest.0);
        Address(p)
    }

    pub fn starts_with(&self, prefix: &Address) -> bool {
        self.0.starts_with(&prefix.0)
    }

    /// The encoding used inside programs: a node of integer leaves.
    pub fn to_code(&self) -> Code {
        Code::node(self.0.iter().map(|&i| Code::int(i as i64)).collect())
    }

    pub fn from_code(c: &Code) -> Option<Address> {
        let children = c.children()?;
        if children.len() > D_MAX {
            return None;
        }
        children
            .iter()
            .map(|ch| match ch.as_int() {
                Some(v) if (1..INT_LIMIT).contains(&v) => Some(v as usize),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(Address)
    }
}

/// Addresses order by length, then lexicographically.
impl Ord for Address {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Address {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{p}")?;
        }
        f.write_str("]")
    }
}

impl FromStr for Address {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let code: Code = s.parse()?;
        Address::from_code(&code).ok_or_else(|| ParseError::new(0, "address must be a list of positive integers"))
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Code::Leaf(a) => write!(f, "{a}"),
            Code::Node(n) => {
                f.write_str("[")?;
                for (i, c) in n.children.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str("]")
            }
        }
    }
}

impl FromStr for Code {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = Cursor::new(s);
        let code = p.code()?;
        p.finish()?;
        Ok(code)
    }
}

/// Parses comma-separated codes such as `1,[2,3],LP`. Whitespace is ignored.
pub fn parse_sequence(s: &str) -> Result<Vec<Code>, ParseError> {
    let compact: String = s.chars().filter(|ch| !ch.is_whitespace()).collect();
    let mut p = Cursor::new(&compact);
    let mut out = vec![p.code()?];
    while p.eat(b',') {
        out.push(p.code()?);
    }
    p.finish()?;
    Ok(out)
}

/// Small hand-rolled scanner shared by the code and program text parsers.
pub(crate) struct Cursor<'a> {
    src: &'a [u8],
    pub(crate) pos: usize,
    depth: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(s: &'a str) -> Self {
        Cursor { src: s.as_bytes(), pos: 0, depth: 0 }
    }

    pub(crate) fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    pub(crate) fn expect(&mut self, b: u8) -> Result<(), ParseError> {
        if self.peek() == Some(b) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected '{}'", b as char)))
        }
    }

    pub(crate) fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub(crate) fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError::new(self.pos, msg)
    }

    pub(crate) fn finish(&self) -> Result<(), ParseError> {
        if self.pos == self.src.len() {
            Ok(())
        } else {
            Err(self.err("trailing input"))
        }
    }

    pub(crate) fn word(&mut self) -> &'a str {
        let start = self.pos;
        while matches!(self.peek(), Some(b'A'..=b'Z')) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("")
    }

    pub(crate) fn atom(&mut self) -> Result<Atom, ParseError> {
        match self.peek() {
            Some(b'-' | b'0'..=b'9') => {
                let start = self.pos;
                self.pos += 1;
                while matches!(self.peek(), Some(b'0'..=b'9')) {
                    self.pos += 1;
                }
                let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                let v: i64 = text.parse().map_err(|_| ParseError::new(start, "bad integer"))?;
                let atom = Atom::Int(v);
                if !atom.is_valid() {
                    return Err(ParseError::new(start, "integer out of range"));
                }
                Ok(atom)
            }
            Some(b'A'..=b'Z') => {
                let start = self.pos;
                let w = self.word();
                Tok::from_name(w).map(Atom::Tok).ok_or_else(|| ParseError::new(start, format!("unknown token {w}")))
            }
            _ => Err(self.err("expected atom")),
        }
    }

    pub(crate) fn code(&mut self) -> Result<Code, ParseError> {
        if self.peek() == Some(b'[') {
            self.depth += 1;
            if self.depth > D_MAX + 1 {
                return Err(self.err("code too deep"));
            }
            self.pos += 1;
            let mut children = Vec::new();
            if !self.eat(b']') {
                loop {
                    children.push(self.code()?);
                    if self.eat(b']') {
                        break;
                    }
                    self.expect(b',')?;
                }
            }
            self.depth -= 1;
            let node = Code::node(children);
            if node.size() > C_MAX {
                return Err(self.err("code too large"));
            }
            Ok(node)
        } else {
            self.atom().map(Code::Leaf)
        }
    }
}

/// Contents of `c` at `addr`.
pub fn read_at<'a>(c: &'a Code, addr: &Address) -> Result<&'a Code, CodeError> {
    let mut cur = c;
    for &step in &addr.0 {
        cur = step
            .checked_sub(1)
            .and_then(|i| cur.children().and_then(|ch| ch.get(i)))
            .ok_or_else(|| CodeError::AddressInvalid(addr.clone()))?;
    }
    Ok(cur)
}

fn rebuild(
    c: &Code,
    path: &[usize],
    full: &Address,
    f: &mut dyn FnMut(&Code) -> Result<Code, CodeError>,
) -> Result<Code, CodeError> {
    match path.split_first() {
        None => f(c),
        Some((&step, rest)) => {
            let children = c.children().ok_or_else(|| CodeError::AddressInvalid(full.clone()))?;
            let idx = step
                .checked_sub(1)
                .filter(|&i| i < children.len())
                .ok_or_else(|| CodeError::AddressInvalid(full.clone()))?;
            let mut next = children.to_vec();
            next[idx] = rebuild(&children[idx], rest, full, f)?;
            Ok(Code::node(next))
        }
    }
}

/// `c` with the subtree at `addr` replaced by `s`.
pub fn replace_at(c: &Code, addr: &Address, s: Code, limits: Limits) -> Result<Code, CodeError> {
    let mut slot = Some(s);
    rebuild(c, &addr.0, addr, &mut |_| Ok(slot.take().expect("replacement used once")))?.check_limits(limits)
}

/// Appends `s` as the last child of the node at `addr`; returns the new code
/// and the address of the appended child.
pub fn append_at(c: &Code, addr: &Address, s: Code, limits: Limits) -> Result<(Code, Address), CodeError> {
    let mut slot = Some(s);
    let mut new_index = 0;
    let out = rebuild(c, &addr.0, addr, &mut |target| {
        let children = target.children().ok_or_else(|| CodeError::NotANode(addr.clone()))?;
        let mut next = children.to_vec();
        next.push(slot.take().expect("appended once"));
        new_index = next.len();
        Ok(Code::node(next))
    })?
    .check_limits(limits)?;
    Ok((out, addr.child(new_index)))
}

pub fn structural_eq(a: &Code, b: &Code) -> bool {
    a == b
}

/// A member of a population. Equal codes are still distinct members.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Member {
    pub id: u64,
    pub code: Code,
    pub parent_id: Option<u64>,
    /// Produced by a failing editor; never selected.
    pub dead_on_arrival: bool,
    pub origin: Origin,
}

/// How a member came to be.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Seed,
    Exploit,
    Explore,
    Variant,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Population {
    members: Vec<Member>,
    next_id: u64,
}

impl Population {
    pub fn new() -> Self {
        Population::default()
    }

    /// Population whose ids continue after `next_id`.
    pub fn starting_at(next_id: u64) -> Self {
        Population { members: Vec::new(), next_id }
    }

    pub fn push(&mut self, code: Code, parent_id: Option<u64>, origin: Origin) -> u64 {
        self.push_member(code, parent_id, origin, false)
    }

    pub fn push_dead(&mut self, code: Code, parent_id: Option<u64>, origin: Origin) -> u64 {
        self.push_member(code, parent_id, origin, true)
    }

    fn push_member(&mut self, code: Code, parent_id: Option<u64>, origin: Origin, dead: bool) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        self.members.push(Member { id, code, parent_id, dead_on_arrival: dead, origin });
        id
    }

    /// Appends members of `other`, renumbering them with fresh ids.
    pub fn absorb(&mut self, other: Population) {
        for m in other.members {
            self.push_member(m.code, m.parent_id, m.origin, m.dead_on_arrival);
        }
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn members_mut(&mut self) -> &mut [Member] {
        &mut self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    /// Keeps only members for which `keep` holds; ids are untouched.
    pub fn retain(&mut self, mut keep: impl FnMut(&Member) -> bool) {
        self.members.retain(|m| keep(m));
    }
}

/// `c ↦ {c, c}`.
pub fn duplicate(c: &Code) -> Population {
    let mut pop = Population::new();
    pop.push(c.clone(), None, Origin::Variant);
    pop.push(c.clone(), None, Origin::Variant);
    pop
}

/// Fixed root-slot convention of every evolved code.
/// One member per editor holding `alg(e)(c)`. An editor that fails on `c`
/// yields a dead-on-arrival copy of `c`.
pub fn variants_of(c: &Code, editors: &[crate::lang::Program], budget: crate::lang::EvalBudget) -> Population {
    let mut pop = Population::new();
    for e in editors {
        match crate::lang::eval(e, c, budget) {
            Ok(v) => pop.push(v, None, Origin::Variant),
            Err(_) => pop.push_dead(c.clone(), None, Origin::Variant),
        };
    }
    pop
}

pub mod layout {
    use super::*;

    pub const OUT: usize = 1;
    pub const REC: usize = 2;
    pub const MEM: usize = 3;
    pub const CFG: usize = 4;
    pub const NB: usize = 5;
    pub const SLOTS: usize = 5;

    pub fn out() -> Address {
        Address(vec![OUT])
    }
    pub fn rec() -> Address {
        Address(vec![REC])
    }
    pub fn mem() -> Address {
        Address(vec![MEM])
    }
    pub fn cfg() -> Address {
        Address(vec![CFG])
    }
    pub fn nb() -> Address {
        Address(vec![NB])
    }

    /// Diagonalization parameters carried in the CFG slot.
    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub struct CfgParams {
        /// Memory length used by diagonalization.
        pub n: i64,
        pub p_num: i64,
        pub p_den: i64,
        pub k_max: i64,
        pub s_budget: i64,
    }

    impl Default for CfgParams {
        fn default() -> Self {
            CfgParams { n: 3, p_num: 3, p_den: 4, k_max: 5000, s_budget: 1000 }
        }
    }

    impl CfgParams {
        pub const FIELDS: usize = 5;

        pub fn is_valid(&self) -> bool {
            self.n >= 1 && self.p_num >= 1 && self.p_num <= self.p_den && self.k_max >= 1 && self.s_budget >= 1
        }

        pub fn to_code(&self) -> Code {
            Code::node(vec![
                Code::int(self.n),
                Code::int(self.p_num),
                Code::int(self.p_den),
                Code::int(self.k_max),
                Code::int(self.s_budget),
            ])
        }

        pub fn from_code(c: &Code) -> Option<CfgParams> {
            let ch = c.children()?;
            if ch.len() != Self::FIELDS {
                return None;
            }
            let v: Vec<i64> = ch.iter().map(Code::as_int).collect::<Option<_>>()?;
            let p = CfgParams { n: v[0], p_num: v[1], p_den: v[2], k_max: v[3], s_budget: v[4] };
            p.is_valid().then_some(p)
        }

        /// Address of the memory length `n` inside a code.
        pub fn n_address() -> Address {
            Address(vec![CFG, 1])
        }
    }

    /// Fresh layout-conforming code: OUT = NIL, empty REC/MEM/NB.
    pub fn seed(cfg: &CfgParams) -> Code {
        Code::node(vec![Code::tok(Tok::Nil), Code::empty(), Code::empty(), cfg.to_code(), Code::empty()])
    }

    pub fn conforms(c: &Code) -> bool {
        let Some(ch) = c.children() else { return false };
        ch.len() == SLOTS
            && ch[REC - 1].children().is_some()
            && ch[MEM - 1].children().is_some()
            && ch[NB - 1].children().is_some()
            && CfgParams::from_code(&ch[CFG - 1]).is_some()
    }

    pub fn slot(c: &Code, slot: usize) -> Option<&Code> {
        c.children().and_then(|ch| ch.get(slot - 1))
    }

    pub fn with_slot(c: &Code, slot: usize, value: Code) -> Code {
        let mut ch = c.children().map(<[Code]>::to_vec).unwrap_or_default();
        if ch.len() >= slot {
            ch[slot - 1] = value;
        }
        Code::node(ch)
    }

    pub fn cfg_of(c: &Code) -> Option<CfgParams> {
        slot(c, CFG).and_then(CfgParams::from_code)
    }

    /// The memory log of `c`, oldest first.
    pub fn memory(c: &Code) -> &[Code] {
        slot(c, MEM).and_then(Code::children).unwrap_or(&[])
    }

    /// `c` with its memory slot emptied.
    pub fn flatten(c: &Code) -> Code {
        with_slot(c, MEM, Code::empty())
    }
}

/// Appends a flattened snapshot of `predecessor` to the memory log of
/// `successor`, dropping the oldest entries so at most `cap` remain.
pub fn store_memory(predecessor: &Code, successor: &Code, cap: usize, limits: Limits) -> Result<Code, CodeError> {
    let cap = cap.max(1);
    let old = layout::memory(successor);
    let keep_from = (old.len() + 1).saturating_sub(cap);
    let mut log: Vec<Code> = old[keep_from.min(old.len())..].to_vec();
    log.push(layout::flatten(predecessor));
    if !layout::conforms(successor) {
        return Err(CodeError::AddressInvalid(layout::mem()));
    }
    layout::with_slot(successor, layout::MEM, Code::node(log)).check_limits(limits)
}
