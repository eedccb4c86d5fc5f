//! Verification toolchain for hybrid communicating sequential processes.

pub mod assertion;
pub mod chan;
pub mod expr;
pub mod harness;
pub mod job;
pub mod lang;
pub mod linear;
pub mod obligation;
pub mod ode;
pub mod oracle;
pub mod semantics;
pub mod solver;
pub mod specgen;
pub mod sync_engine;
