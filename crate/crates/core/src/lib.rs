//! Self-editing programs that learn from their own memory.

pub mod cli;
pub mod code;
pub mod diag;
pub mod env;
pub mod evolution;
pub mod lang;
