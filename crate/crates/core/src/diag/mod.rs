//! Simplest-fit search over branch memory and rule detection.

pub mod fit;
pub mod rules;
pub mod trace;

use std::cmp::Ordering;
use std::fmt;

pub use fit::{apply_recursors, diagonalize, explore_pool, fits, Mode, Proliferation, Recursor, Source};
pub use rules::{
    detect_implications, detect_noticeable, detect_useful, fit_fraction, guarded_rule, lift, notify, probe,
    refresh_notices, GuardedRule, Probes,
};
pub use trace::{project, MemoryTrace, ProjectionGap, Transition};

/// A non-negative rational `num/den` with `den > 0`.
#[derive(Debug, Clone, Copy, Eq)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Ratio {
        assert!(den > 0, "zero denominator");
        Ratio { num, den }
    }

    /// `⌈self·k⌉`.
    pub fn ceil_mul(&self, k: u64) -> u64 {
        (self.num * k).div_ceil(self.den)
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl PartialEq for Ratio {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}
