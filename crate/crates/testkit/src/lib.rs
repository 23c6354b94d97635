//! Brute-force oracles and fixture generators for the depkit test suites.
//!
//! Every oracle here is written independently of the engine it checks: no
//! shared helpers beyond the public data types.

pub mod fixtures;
pub mod gen;
pub mod oracle;
