//! The program language: syntax, evaluation and enumeration.

pub mod eval;
pub mod generator;
pub mod program;

pub use eval::{eval, eval_counted, theta_recursor, EvalBudget, EvalError};
pub use generator::{code_order, program_order, Enumeration, Exhausted, Generator, Grammar, G_MAX};
pub use program::{DecodeError, Program};
