//! Semiring-generic belief propagation over bipartite string diagrams.
//!
//! A diagram is a bipartite graph of variables (spiders) and factor tensors
//! ([`scheme`]). Messages are vectors over a commutative semiring
//! ([`algebra`]) and are updated by dense tensor contraction ([`tensor`]).
//! The [`engine`] runs the updates to a fixed point; on trees the result is
//! exact, which [`oracle`] confirms by enumeration. Loopy diagrams are
//! reduced to trees by [`jtree`]. Documents are read and written by
//! [`format`].

pub mod algebra;
pub mod checks;
pub mod engine;
pub mod fixtures;
pub mod format;
pub mod jtree;
pub mod oracle;
pub mod scheme;
pub mod tensor;

pub use algebra::{Boolean, Dual, DualNum, MaxTimes, NatCount, Prob, Semiring};
pub use engine::{run_bp, BpOutcome, EngineError, RunConfig, Schedule};
pub use scheme::{FactorGraph, FactorNode, GraphMode, ObjectType, VariableNode};
pub use tensor::{DenseTensor, Message};
