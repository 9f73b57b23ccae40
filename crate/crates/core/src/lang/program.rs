use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::code::{Address, Atom, Code, Cursor, ParseError, Tok};

/// An executable program. Programs are codes; this is the decoded view.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Program {
    Id,
    Const(Code),
    Add(i64),
    Read(Address),
    Put(Address, Box<Program>),
    Append(Address, Box<Program>),
    Seq(Box<Program>, Box<Program>),
    Pair(Box<Program>, Box<Program>),
    IfEq(Address, Atom, Box<Program>, Box<Program>),
    ApplyAt(Address, Address),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("not a program: malformed at {at}")]
pub struct DecodeError {
    /// Address of the offending subtree within the decoded code.
    pub at: Address,
}

impl Program {
    pub fn seq(p: Program, q: Program) -> Program {
        Program::Seq(Box::new(p), Box::new(q))
    }

    pub fn pair(p: Program, q: Program) -> Program {
        Program::Pair(Box::new(p), Box::new(q))
    }

    pub fn put(addr: Address, p: Program) -> Program {
        Program::Put(addr, Box::new(p))
    }

    pub fn append(addr: Address, p: Program) -> Program {
        Program::Append(addr, Box::new(p))
    }

    pub fn if_eq(addr: Address, atom: impl Into<Atom>, p: Program, q: Program) -> Program {
        Program::IfEq(addr, atom.into(), Box::new(p), Box::new(q))
    }

    /// Position of the constructor in the fixed rank order.
    pub fn constructor_rank(&self) -> u8 {
        match self {
            Program::Id => 0,
            Program::Const(_) => 1,
            Program::Add(_) => 2,
            Program::Read(_) => 3,
            Program::Put(..) => 4,
            Program::Append(..) => 5,
            Program::Seq(..) => 6,
            Program::Pair(..) => 7,
            Program::IfEq(..) => 8,
            Program::ApplyAt(..) => 9,
        }
    }

    /// Vertex count of the encoded form.
    pub fn size(&self) -> usize {
        let addr = |a: &Address| 1 + a.len();
        match self {
            Program::Id => 2,
            Program::Const(v) => 2 + v.size(),
            Program::Add(_) => 3,
            Program::Read(a) => 2 + addr(a),
            Program::Put(a, p) | Program::Append(a, p) => 2 + addr(a) + p.size(),
            Program::Seq(p, q) | Program::Pair(p, q) => 2 + p.size() + q.size(),
            Program::IfEq(a, _, p, q) => 3 + addr(a) + p.size() + q.size(),
            Program::ApplyAt(a, b) => 2 + addr(a) + addr(b),
        }
    }

    pub fn encode(&self) -> Code {
        let t = Code::tok;
        match self {
            Program::Id => Code::node(vec![t(Tok::Id)]),
            Program::Const(v) => Code::node(vec![t(Tok::K), v.clone()]),
            Program::Add(k) => Code::node(vec![t(Tok::Add), Code::int(*k)]),
            Program::Read(a) => Code::node(vec![t(Tok::Read), a.to_code()]),
            Program::Put(a, p) => Code::node(vec![t(Tok::Put), a.to_code(), p.encode()]),
            Program::Append(a, p) => Code::node(vec![t(Tok::Append), a.to_code(), p.encode()]),
            Program::Seq(p, q) => Code::node(vec![t(Tok::Seq), p.encode(), q.encode()]),
            Program::Pair(p, q) => Code::node(vec![t(Tok::Pair), p.encode(), q.encode()]),
            Program::IfEq(a, v, p, q) => {
                Code::node(vec![t(Tok::IfEq), a.to_code(), Code::Leaf(*v), p.encode(), q.encode()])
            }
            Program::ApplyAt(a, b) => Code::node(vec![t(Tok::ApplyAt), a.to_code(), b.to_code()]),
        }
    }

    /// Validates `c` against the grammar. Total: recursion is bounded by the
    /// depth of `c`.
    pub fn decode(c: &Code) -> Result<Program, DecodeError> {
        let mut path = Vec::new();
        decode_at(c, &mut path)
    }
}

fn decode_at(c: &Code, path: &mut Vec<usize>) -> Result<Program, DecodeError> {
    let fail = |path: &Vec<usize>| DecodeError { at: Address(path.clone()) };
    let ch = c.children().ok_or_else(|| fail(path))?;
    let Some(Atom::Tok(head)) = ch.first().and_then(Code::atom) else {
        path.push(1);
        let e = fail(path);
        path.pop();
        return Err(e);
    };
    let arity = match head {
        Tok::Id => 0,
        Tok::K | Tok::Add | Tok::Read => 1,
        Tok::Put | Tok::Append | Tok::Seq | Tok::Pair | Tok::ApplyAt => 2,
        Tok::IfEq => 4,
        _ => {
            path.push(1);
            let e = fail(path);
            path.pop();
            return Err(e);
        }
    };
    if ch.len() != arity + 1 {
        return Err(fail(path));
    }
    let field = |i: usize, path: &mut Vec<usize>, kind: Field| -> Result<FieldValue, DecodeError> {
        path.push(i + 1);
        let out = match kind {
            Field::Addr => Address::from_code(&ch[i]).map(FieldValue::Addr).ok_or_else(|| fail(path)),
            Field::Int => match ch[i].atom() {
                Some(a @ Atom::Int(v)) if a.is_valid() => Ok(FieldValue::Int(v)),
                _ => Err(fail(path)),
            },
            Field::Atom => match ch[i].atom() {
                Some(a) if a.is_valid() => Ok(FieldValue::Atom(a)),
                _ => Err(fail(path)),
            },
            Field::Prog => decode_at(&ch[i], path).map(|p| FieldValue::Prog(Box::new(p))),
        };
        path.pop();
        out
    };
    Ok(match head {
        Tok::Id => Program::Id,
        Tok::K => Program::Const(ch[1].clone()),
        Tok::Add => Program::Add(field(1, path, Field::Int)?.int()),
        Tok::Read => Program::Read(field(1, path, Field::Addr)?.addr()),
        Tok::Put => Program::Put(field(1, path, Field::Addr)?.addr(), field(2, path, Field::Prog)?.prog()),
        Tok::Append => Program::Append(field(1, path, Field::Addr)?.addr(), field(2, path, Field::Prog)?.prog()),
        Tok::Seq => Program::Seq(field(1, path, Field::Prog)?.prog(), field(2, path, Field::Prog)?.prog()),
        Tok::Pair => Program::Pair(field(1, path, Field::Prog)?.prog(), field(2, path, Field::Prog)?.prog()),
        Tok::IfEq => Program::IfEq(
            field(1, path, Field::Addr)?.addr(),
            field(2, path, Field::Atom)?.atom(),
            field(3, path, Field::Prog)?.prog(),
            field(4, path, Field::Prog)?.prog(),
        ),
        Tok::ApplyAt => Program::ApplyAt(field(1, path, Field::Addr)?.addr(), field(2, path, Field::Addr)?.addr()),
        _ => unreachable!("arity check rejects non-constructor heads"),
    })
}

#[derive(Clone, Copy)]
enum Field {
    Addr,
    Int,
    Atom,
    Prog,
}

enum FieldValue {
    Addr(Address),
    Int(i64),
    Atom(Atom),
    Prog(Box<Program>),
}

impl FieldValue {
    fn addr(self) -> Address {
        match self {
            FieldValue::Addr(a) => a,
            _ => unreachable!(),
        }
    }
    fn int(self) -> i64 {
        match self {
            FieldValue::Int(v) => v,
            _ => unreachable!(),
        }
    }
    fn atom(self) -> Atom {
        match self {
            FieldValue::Atom(a) => a,
            _ => unreachable!(),
        }
    }
    fn prog(self) -> Box<Program> {
        match self {
            FieldValue::Prog(p) => p,
            _ => unreachable!(),
        }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Program::Id => f.write_str("ID"),
            Program::Const(v) => write!(f, "K({v})"),
            Program::Add(k) => write!(f, "ADD({k})"),
            Program::Read(a) => write!(f, "READ({a})"),
            Program::Put(a, p) => write!(f, "PUT({a},{p})"),
            Program::Append(a, p) => write!(f, "APPEND({a},{p})"),
            Program::Seq(p, q) => write!(f, "SEQ({p},{q})"),
            Program::Pair(p, q) => write!(f, "PAIR({p},{q})"),
            Program::IfEq(a, v, p, q) => write!(f, "IFEQ({a},{v},{p},{q})"),
            Program::ApplyAt(a, b) => write!(f, "APPLYAT({a},{b})"),
        }
    }
}

impl FromStr for Program {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut cur = Cursor::new(s);
        let p = parse_program(&mut cur, 0)?;
        cur.finish()?;
        Ok(p)
    }
}

fn parse_addr(cur: &mut Cursor<'_>) -> Result<Address, ParseError> {
    let start = cur.pos;
    let code = cur.code()?;
    Address::from_code(&code).ok_or_else(|| ParseError::new(start, "expected address"))
}

fn parse_program(cur: &mut Cursor<'_>, depth: usize) -> Result<Program, ParseError> {
    if depth > crate::code::D_MAX {
        return Err(cur.err("program too deep"));
    }
    let start = cur.pos;
    let word = cur.word();
    if word == "ID" {
        return Ok(Program::Id);
    }
    cur.expect(b'(')?;
    let sub = |cur: &mut Cursor<'_>| parse_program(cur, depth + 1);
    let p = match word {
        "K" => Program::Const(cur.code()?),
        "ADD" => match cur.atom()? {
            Atom::Int(k) => Program::Add(k),
            _ => return Err(ParseError::new(start, "ADD takes an integer")),
        },
        "READ" => Program::Read(parse_addr(cur)?),
        "PUT" | "APPEND" => {
            let a = parse_addr(cur)?;
            cur.expect(b',')?;
            let p = sub(cur)?;
            if word == "PUT" {
                Program::put(a, p)
            } else {
                Program::append(a, p)
            }
        }
        "SEQ" | "PAIR" => {
            let p = sub(cur)?;
            cur.expect(b',')?;
            let q = sub(cur)?;
            if word == "SEQ" {
                Program::seq(p, q)
            } else {
                Program::pair(p, q)
            }
        }
        "IFEQ" => {
            let a = parse_addr(cur)?;
            cur.expect(b',')?;
            let v = cur.atom()?;
            cur.expect(b',')?;
            let p = sub(cur)?;
            cur.expect(b',')?;
            let q = sub(cur)?;
            Program::if_eq(a, v, p, q)
        }
        "APPLYAT" => {
            let a = parse_addr(cur)?;
            cur.expect(b',')?;
            Program::ApplyAt(a, parse_addr(cur)?)
        }
        _ => return Err(ParseError::new(start, format!("unknown constructor '{word}'"))),
    };
    cur.expect(b')')?;
    Ok(p)
}
