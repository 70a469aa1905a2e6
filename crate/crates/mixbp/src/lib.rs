//! Marginal MAP (mixed) inference for discrete pairwise and higher-order
//! graphical models.
//!
//! The crate provides:
//!
//! - exact oracles (enumeration and forest elimination) for partition
//!   functions, marginals, MAP and marginal-MAP queries;
//! - a weighted message-passing engine covering sum-product, max-product,
//!   annealed, mixed-product and hybrid belief propagation;
//! - entropy-weight construction (Bethe, tree-reweighted, provably convex)
//!   and truncated free-energy evaluation with TRW upper bounds;
//! - convergent proximal-point solvers;
//! - EM coordinate ascent and taboo local search baselines;
//! - junction-graph BP for higher-order factor models;
//! - UAI-format parsing/serialization and benchmark model generators.
//!
//! Data-parallel sweeps (oracle scans, multi-start solves, benchmark trials)
//! run on rayon when the `parallel` feature (default) is enabled and fall
//! back to sequential execution otherwise. Results are deterministic for a
//! given seed in both modes.

pub mod baselines;
pub mod energy;
pub mod error;
pub mod io;
pub mod jgraph;
pub mod logsum;
pub mod model;
pub mod mp;
pub mod oracle;
pub mod par;
pub mod proximal;
pub mod report;
pub mod testutil;

pub use error::{Error, Result};
pub use model::{PairwiseModel, Role};
pub use report::SolveReport;
