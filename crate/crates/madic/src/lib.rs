//! Exact-arithmetic toolkit for finite-depth measures on the m-adic
//! sequence space {0, …, m−1}^ℕ.
//!
//! A measure is stored as a sparse mass-labelled m-ary tree with exact
//! rational node masses ([`TreeMeasure`]). On top of that sit density
//! profiles f_n = m^{αn}·μ(B_n(x)) along paths, finite-depth oscillation
//! estimators, the uniform/greedy measure constructions, and the
//! marked-interval machinery (pigeonhole selection, per-level marked
//! sets, geometric avoidance decay). Every ordering and every check is
//! decided in exact integer arithmetic; floating point appears only in
//! display strings.

pub mod cli;
pub mod density;
pub mod error;
pub mod measure;
pub mod space;
pub mod theory;

pub use error::{Error, Result};
pub use measure::{BranchingSpec, GreedyResult, GreedyTrace, TreeMeasure};
pub use space::{AlphaParam, FirstDifference, Interval, Prefix, WScaled};
