//! Solver run reports.

use serde::{Deserialize, Serialize};

/// Fixed-point diagnostics attached to a solve.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Residuals {
    /// Max absolute log-message change in the final sweep.
    pub message_change: f64,
    /// Reparameterization residual of the final mixed beliefs, when probed.
    pub reparameterization: Option<f64>,
    /// Sum-consistency residual (sum-node sources).
    pub consistency_sum: Option<f64>,
    /// Max-consistency residual (max-to-max edges).
    pub consistency_max: Option<f64>,
    /// Argmax-restricted-sum consistency residual (max-to-sum edges).
    pub consistency_argmax: Option<f64>,
}

/// Outcome of one solver invocation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub algorithm: String,
    /// Decoded max-node states as `(variable, state)` pairs in index order.
    pub decode: Vec<(usize, usize)>,
    /// Exact objective of the decode, when computable.
    pub q_exact: Option<f64>,
    /// Per-iteration objective values (algorithm specific; may be empty).
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub residuals: Residuals,
    /// Upper bound on the optimum (TRW runs only).
    pub bound: Option<f64>,
    /// Whether the bound came from a converged run.
    pub bound_valid: Option<bool>,
    /// Final singleton beliefs, when the algorithm produces them.
    pub node_beliefs: Option<Vec<Vec<f64>>>,
    pub seed: u64,
    pub wall_time_ms: f64,
}

impl SolveReport {
    pub fn new(algorithm: &str) -> Self {
        SolveReport {
            algorithm: algorithm.to_string(),
            decode: Vec::new(),
            q_exact: None,
            objective_trace: Vec::new(),
            converged: false,
            iterations: 0,
            residuals: Residuals::default(),
            bound: None,
            bound_valid: None,
            node_beliefs: None,
            seed: 0,
            wall_time_ms: 0.0,
        }
    }

    /// Decoded states as a vector parallel to `max_nodes`.
    pub fn decode_states(&self) -> Vec<usize> {
        self.decode.iter().map(|&(_, s)| s).collect()
    }
}
