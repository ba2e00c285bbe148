//! Test support: random models and a reference checker.

pub mod gen;
pub mod oracle;
