//! Failed error propagation (FEP) measurement for MiniLang programs.
//!
//! The pipeline diffs a buggy and a fixed version of a function, places
//! aligned program points in both, executes them on generated inputs and
//! classifies every paired execution as noFEP, intFEP, extFEP or sysFEP.

pub mod classify;
pub mod corpus;
pub mod diff;
pub mod inputgen;
pub mod instrument;
pub mod minilang;
pub mod mutation;
pub mod pipeline;
pub mod stats;
pub mod tracer;
