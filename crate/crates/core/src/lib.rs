//! An RTL-style compiler middle-end that obtains loop-invariant code motion by
//! composing first-iteration loop unrolling (checked against a reverse node
//! mapping) with a global common-subexpression elimination whose invariants
//! are re-verified before use.

pub mod cleanup;
pub mod cse3;
pub mod difftest;
pub mod dup;
pub mod fixtures;
pub mod gen;
pub mod hset;
pub mod interp;
pub mod ir;
pub mod pipeline;
pub mod typing;
