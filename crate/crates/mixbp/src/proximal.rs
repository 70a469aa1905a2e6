//! Convergent proximal-point solvers.
//!
//! Each outer iteration shifts the max-node log-potentials by
//! `lambda_t * log tau_B` and re-solves an annealed inner problem at
//! temperature `lambda_t` with warm-started messages. The inner problem is
//! a standard marginalization task when `lambda_t = 1`.

use crate::energy::{bethe_weights, trw_upper_bound, trw_weights, ConvexityCertificate};
use crate::error::{Error, Result};
use crate::logsum::kl_divergence;
use crate::model::{PairwiseModel, Role};
use crate::mp::{
    beliefs_from_messages, mixed_beliefs_from_messages, check_mixed_consistency, BeliefSet,
    MessageSet, SolverOptions,
};
use crate::oracle::{OracleOptions, QEvaluator};
use crate::par::Parallelism;
use crate::report::{Residuals, SolveReport};
use std::time::Instant;

/// Outer step-size schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaSchedule {
    Constant(f64),
    /// `lambda_t = 1 / t`.
    Harmonic,
}

impl LambdaSchedule {
    fn at(&self, t: usize) -> f64 {
        match self {
            LambdaSchedule::Constant(l) => *l,
            LambdaSchedule::Harmonic => 1.0 / t as f64,
        }
    }
}

/// Entropy approximation used by the inner solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProximalFlavor {
    Bethe,
    Trw,
}

#[derive(Debug, Clone)]
pub struct ProximalOptions {
    pub schedule: LambdaSchedule,
    pub max_outer: usize,
    pub inner_iters: usize,
    pub inner_damped_iters: usize,
    pub inner_damping: f64,
    /// Outer tolerance on the max absolute change of `log tau_B`.
    pub tol: f64,
    /// Subtrees sampled for the TRW flavor.
    pub trw_trees: usize,
    pub seed: u64,
    pub parallelism: Parallelism,
    pub oracle: OracleOptions,
}

impl Default for ProximalOptions {
    fn default() -> Self {
        ProximalOptions {
            schedule: LambdaSchedule::Constant(1.0),
            max_outer: 100,
            inner_iters: 5,
            inner_damped_iters: 5,
            inner_damping: 0.1,
            tol: 1e-6,
            trw_trees: 10,
            seed: 0,
            parallelism: Parallelism::default(),
            oracle: OracleOptions::default(),
        }
    }
}

/// Log floor replacing `ln 0` when folding beliefs back into potentials.
const LOG_FLOOR: f64 = -1e6;

/// Probability floor for the outer convergence metric: states whose mass
/// drops below this are treated as extinguished (their raw log keeps
/// drifting linearly forever at integral optima).
const CONV_FLOOR: f64 = 1e-12;

fn shifted_model(model: &PairwiseModel, lambda: f64, tau_b: &[Vec<f64>]) -> PairwiseModel {
    let node_logpot: Vec<Vec<f64>> = (0..model.num_vars())
        .map(|i| {
            let base = model.node_logpot(i);
            match model.role(i) {
                Role::Sum => base.to_vec(),
                Role::Max => base
                    .iter()
                    .zip(&tau_b[i])
                    .map(|(&t, &p)| {
                        if t == f64::NEG_INFINITY {
                            f64::NEG_INFINITY
                        } else {
                            let lp = if p > 0.0 { p.ln().max(LOG_FLOOR) } else { LOG_FLOOR };
                            t + lambda * lp
                        }
                    })
                    .collect(),
            }
        })
        .collect();
    PairwiseModel::new(
        model.cards().to_vec(),
        model.roles().to_vec(),
        node_logpot,
        model.edges().iter().map(|e| (e.i, e.j)).collect(),
        model.edges().iter().map(|e| e.logpot.clone()).collect(),
    )
    .expect("shifted model preserves structure")
}

/// Proximal-point marginal MAP solver. TRW flavor additionally reports the
/// upper bound evaluated on the original potentials at the final beliefs.
pub fn run_proximal(
    model: &PairwiseModel,
    flavor: ProximalFlavor,
    opts: &ProximalOptions,
) -> Result<SolveReport> {
    let start = Instant::now();
    let weights = match flavor {
        ProximalFlavor::Bethe => bethe_weights(model, 1.0),
        ProximalFlavor::Trw => trw_weights(model, opts.trw_trees, 1.0, opts.seed)?,
    };
    let algorithm = match flavor {
        ProximalFlavor::Bethe => "proximal-bethe",
        ProximalFlavor::Trw => "proximal-trw",
    };
    let mut tau_b: Vec<Vec<f64>> = model
        .cards()
        .iter()
        .map(|&c| vec![1.0 / c as f64; c])
        .collect();
    let mut msgs = MessageSet::uniform(model);
    let mut converged = false;
    let mut outer_delta = f64::INFINITY;
    let mut iterations = 0;
    let mut trace = Vec::with_capacity(opts.max_outer);
    let zero_temp = weights.at_epsilon(0.0);
    let mut beliefs = BeliefSet::uniform(model);
    let mut final_shifted = model.clone();
    for t in 1..=opts.max_outer {
        let lambda = opts.schedule.at(t);
        if !(lambda > 0.0) {
            return Err(Error::InvalidArgument("step size must stay positive".into()));
        }
        let shifted = shifted_model(model, lambda, &tau_b);
        let w_inner = weights.at_epsilon(lambda);
        let inner_opts = SolverOptions {
            max_iters: opts.inner_iters,
            extra_damped_iters: opts.inner_damped_iters,
            damping: opts.inner_damping,
            tol: opts.tol,
            ..SolverOptions::deterministic()
        };
        crate::mp::run_warm(&shifted, &w_inner, &mut msgs, &inner_opts);
        beliefs = beliefs_from_messages(&shifted, &w_inner, &msgs);
        // objective on the original potentials at temperature zero
        trace.push(crate::energy::free_energy_unchecked(model, &beliefs, &zero_temp));
        let mut delta = 0.0f64;
        for &i in &model.max_nodes() {
            for (s, &p) in beliefs.node[i].iter().enumerate() {
                let new_lp = p.max(CONV_FLOOR).ln();
                let old_lp = tau_b[i][s].max(CONV_FLOOR).ln();
                delta = delta.max((new_lp - old_lp).abs());
            }
            tau_b[i] = beliefs.node[i].clone();
        }
        iterations = t;
        outer_delta = delta;
        final_shifted = shifted;
        if model.max_nodes().is_empty() || delta <= opts.tol {
            converged = true;
            break;
        }
    }
    // decode from the final max-node marginals
    let decode: Vec<(usize, usize)> = model
        .max_nodes()
        .iter()
        .map(|&i| {
            let mut best = 0;
            for (s, &p) in beliefs.node[i].iter().enumerate() {
                if p > beliefs.node[i][best] {
                    best = s;
                }
            }
            (i, best)
        })
        .collect();
    let qe = QEvaluator::new(model);
    let xb: Vec<usize> = decode.iter().map(|&(_, s)| s).collect();
    let q_exact = qe.evaluate(&xb, &opts.oracle).ok();
    let mixed = mixed_beliefs_from_messages(&final_shifted, &weights.rho, &msgs);
    let cons = check_mixed_consistency(model, &mixed);
    let mut report = SolveReport::new(algorithm);
    report.decode = decode;
    report.q_exact = q_exact;
    report.objective_trace = trace;
    report.converged = converged;
    report.iterations = iterations;
    report.seed = opts.seed;
    report.residuals = Residuals {
        message_change: outer_delta,
        reparameterization: None,
        consistency_sum: cons.sum,
        consistency_max: cons.max,
        consistency_argmax: cons.argmax,
    };
    if flavor == ProximalFlavor::Trw {
        let bound = trw_upper_bound(model, &beliefs, &weights, outer_delta, opts.tol);
        report.bound = Some(bound.value);
        report.bound_valid = Some(bound.valid);
    }
    report.node_beliefs = Some(beliefs.node.clone());
    report.wall_time_ms = start.elapsed().as_secs_f64() * 1000.0;
    Ok(report)
}

/// Weighted KL proximal distance over the max part:
/// `sum_i kappa_i KL(tau_i || prev_i) + sum_(ij) kappa_dir KL over the
/// conditional pair tables`.
pub fn pairwise_proximal_distance(
    model: &PairwiseModel,
    tau: &BeliefSet,
    tau_prev: &BeliefSet,
    cert: &ConvexityCertificate,
) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..model.num_vars() {
        if model.role(i) != Role::Max {
            continue;
        }
        let d = kl_divergence(&tau.node[i], &tau_prev.node[i]);
        if d.is_infinite() {
            return Err(Error::InvalidArgument(format!(
                "previous marginal of node {} vanishes on the support of the new one",
                i
            )));
        }
        total += cert.kappa_node[i] * d;
    }
    for (e, edge) in model.edges().iter().enumerate() {
        if model.role(edge.i) != Role::Max || model.role(edge.j) != Role::Max {
            continue;
        }
        let (ci, cj) = (model.card(edge.i), model.card(edge.j));
        let cur = &tau.edge[e];
        let prev = &tau_prev.edge[e];
        // conditional of x_i given x_j, expectation under the current pair belief
        let mut cond_i_given_j = 0.0;
        let mut cond_j_given_i = 0.0;
        let col_sum = |tab: &[f64], xj: usize| -> f64 { (0..ci).map(|xi| tab[xi * cj + xj]).sum() };
        let row_sum = |tab: &[f64], xi: usize| -> f64 { (0..cj).map(|xj| tab[xi * cj + xj]).sum() };
        for xi in 0..ci {
            for xj in 0..cj {
                let p = cur[xi * cj + xj];
                if p <= 0.0 {
                    continue;
                }
                let q = prev[xi * cj + xj];
                if q <= 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "previous pair belief of edge {} vanishes on the support of the new one",
                        e
                    )));
                }
                let pj = col_sum(cur, xj);
                let qj = col_sum(prev, xj);
                let pi = row_sum(cur, xi);
                let qi = row_sum(prev, xi);
                cond_i_given_j += p * ((p / pj).ln() - (q / qj).ln());
                cond_j_given_i += p * ((p / pi).ln() - (q / qi).ln());
            }
        }
        total += cert.kappa_dir[e][0] * cond_i_given_j + cert.kappa_dir[e][1] * cond_j_given_i;
    }
    Ok(total)
}
