//! Search-based falsification of simulated plants.
//!
//! A run searches the parameters of a test sequence for an input that makes
//! a plant violate a signal temporal logic requirement. The search is guided
//! by a blend of the requirement's robustness and an optional engineer-written
//! fitness expression; the verdict only ever depends on robustness.

pub mod arith;
pub mod cli;
pub mod fitness;
pub mod plants;
pub mod search;
pub mod stl;
pub mod syntax;
pub mod testseq;
pub mod trace;

pub use trace::Trace;
