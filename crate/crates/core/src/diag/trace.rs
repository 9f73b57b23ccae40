use thiserror::Error;

use crate::code::{layout, read_at, Address, Code};

/// Ancestor snapshots along one surviving branch, oldest first.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MemoryTrace {
    snapshots: Vec<Code>,
}

/// One step of a branch: a snapshot and its immediate successor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub before: Code,
    pub after: Code,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("address {address} invalid in snapshot {snapshot}")]
pub struct ProjectionGap {
    /// 1-based position of the first snapshot lacking the address.
    pub snapshot: usize,
    pub address: Address,
}

impl MemoryTrace {
    pub fn new(snapshots: Vec<Code>) -> Self {
        MemoryTrace { snapshots }
    }

    /// The memory log of `c` followed by `c` itself.
    pub fn of_code(c: &Code) -> Self {
        let mut snapshots = layout::memory(c).to_vec();
        snapshots.push(c.clone());
        MemoryTrace { snapshots }
    }

    /// The last `n` snapshots.
    pub fn window(&self, n: usize) -> MemoryTrace {
        let from = self.snapshots.len().saturating_sub(n);
        MemoryTrace { snapshots: self.snapshots[from..].to_vec() }
    }

    pub fn snapshots(&self) -> &[Code] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn last(&self) -> Option<&Code> {
        self.snapshots.last()
    }

    pub fn transitions(&self) -> Vec<Transition> {
        self.snapshots.windows(2).map(|w| Transition { before: w[0].clone(), after: w[1].clone() }).collect()
    }
}

impl FromIterator<Code> for MemoryTrace {
    fn from_iter<I: IntoIterator<Item = Code>>(iter: I) -> Self {
        MemoryTrace { snapshots: iter.into_iter().collect() }
    }
}

/// `[c_i ↾ θ]` over the trace.
pub fn project(memory: &MemoryTrace, theta: &Address) -> Result<Vec<Code>, ProjectionGap> {
    memory
        .snapshots
        .iter()
        .enumerate()
        .map(|(i, c)| read_at(c, theta).cloned().map_err(|_| ProjectionGap { snapshot: i + 1, address: theta.clone() }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::layout::{self, CfgParams};

    fn with_out(v: i64) -> Code {
        layout::with_slot(&layout::seed(&CfgParams::default()), layout::OUT, Code::int(v))
    }

    #[test]
    fn projects_out_slot() {
        let m: MemoryTrace = (1..=3).map(with_out).collect();
        assert_eq!(project(&m, &layout::out()).unwrap(), vec![Code::int(1), Code::int(2), Code::int(3)]);
        assert_eq!(project(&m, &Address::root()).unwrap(), m.snapshots().to_vec());
    }

    #[test]
    fn gap_names_the_snapshot() {
        let m = MemoryTrace::new(vec![with_out(1), Code::int(0), with_out(3)]);
        assert_eq!(project(&m, &layout::out()).unwrap_err().snapshot, 2);
    }

    #[test]
    fn window_and_transitions() {
        let m: MemoryTrace = (1..=5).map(Code::int).collect();
        let w = m.window(3);
        assert_eq!(w.snapshots(), &[Code::int(3), Code::int(4), Code::int(5)]);
        let t = w.transitions();
        assert_eq!(t.len(), 2);
        assert_eq!(t[1], Transition { before: Code::int(4), after: Code::int(5) });
        assert_eq!(m.window(10).len(), 5);
    }
}
