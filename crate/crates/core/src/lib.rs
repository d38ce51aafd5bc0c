//! Approximate mutually unbiased bases built from resolvable block designs.
//!
//! The pipeline runs factor pair -> plan -> trimmed design -> bases -> report.

pub mod designs;
pub mod gfield;
pub mod mubgen;
pub mod pipeline;
pub mod planner;
pub mod trims;
pub mod unitaries;

pub use designs::{Block, Design, LatinSquares, ParallelClass};
pub use gfield::{Field, PrimePower};
pub use mubgen::{BasisSet, SpectrumReport};
pub use planner::{choose_plan, FactorizationPlan, Resources, Route, Target};
