//! Fixed-point diagnostics for mixed beliefs.

use super::{argmax_set, MixedBeliefSet, ARGMAX_TIE_TOL};
use crate::error::{Error, Result};
use crate::model::{ConfigIter, PairwiseModel, Role};
use crate::oracle::{OracleOptions, QEvaluator};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Probe budget when the joint space is too large to cover.
const REPARAM_PROBES: usize = 1000;
const REPARAM_EXHAUSTIVE_CAP: u128 = 1 << 16;
const REPARAM_SEED: u64 = 0x5eed;

/// Max deviation of `sum_i log b_i + sum_ij rho_ij log(b_ij / b_i b_j)` from
/// the joint potential, up to one constant fixed by the first probe.
///
/// Probes every configuration when the joint space is small, otherwise 1000
/// seeded random configurations. Errors if a probe hits a zero belief on a
/// configuration with positive probability.
pub fn check_reparameterization(
    model: &PairwiseModel,
    rho: &[f64],
    beliefs: &MixedBeliefSet,
) -> Result<f64> {
    let log_score = |x: &[usize]| -> Result<Option<f64>> {
        let theta = model.energy(x).expect("in-range probe");
        if theta == f64::NEG_INFINITY {
            return Ok(None);
        }
        let mut lp = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            let b = beliefs.node[i][xi];
            if b <= 0.0 {
                return Err(Error::StructuralViolation(format!(
                    "zero belief at node {} state {} on a positive-probability configuration",
                    i, xi
                )));
            }
            lp += b.ln();
        }
        for (e, edge) in model.edges().iter().enumerate() {
            let bij = beliefs.edge[e][x[edge.i] * model.card(edge.j) + x[edge.j]];
            if bij <= 0.0 {
                return Err(Error::StructuralViolation(format!(
                    "zero pair belief on edge {} at a positive-probability configuration",
                    e
                )));
            }
            let bi = beliefs.node[edge.i][x[edge.i]];
            let bj = beliefs.node[edge.j][x[edge.j]];
            lp += rho[e] * (bij.ln() - bi.ln() - bj.ln());
        }
        Ok(Some(lp - theta))
    };
    let mut offset: Option<f64> = None;
    let mut residual = 0.0f64;
    let mut consume = |x: &[usize]| -> Result<()> {
        if let Some(v) = log_score(x)? {
            match offset {
                None => offset = Some(v),
                Some(c) => residual = residual.max((v - c).abs()),
            }
        }
        Ok(())
    };
    if model.num_joint_states() <= REPARAM_EXHAUSTIVE_CAP {
        for x in ConfigIter::new(model.cards()) {
            consume(&x)?;
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(REPARAM_SEED);
        for _ in 0..REPARAM_PROBES {
            let x: Vec<usize> = model.cards().iter().map(|&c| rng.random_range(0..c)).collect();
            consume(&x)?;
        }
    }
    Ok(residual)
}

/// Per-class residuals of the three marginalization conditions at a
/// mixed-product fixed point. `None` means no edge of that class exists.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConsistencyResiduals {
    /// `sum_{x_i} b_ij = b_j` for sum-node sources.
    pub sum: Option<f64>,
    /// `max_{x_i} b_ij = b_j` between max nodes.
    pub max: Option<f64>,
    /// `sum_{x_i in argmax b_i} b_ij = b_j` from max to sum nodes.
    pub argmax: Option<f64>,
}

fn vector_residual(mut projected: Vec<f64>, target: &[f64]) -> f64 {
    // both sides are defined up to scale; compare normalized
    let s: f64 = projected.iter().sum();
    if s > 0.0 {
        for v in projected.iter_mut() {
            *v /= s;
        }
    }
    let t: f64 = target.iter().sum();
    projected
        .iter()
        .zip(target)
        .map(|(&p, &q)| (p - if t > 0.0 { q / t } else { q }).abs())
        .fold(0.0, f64::max)
}

/// Evaluate the three mixed-consistency conditions over every applicable
/// directed edge.
pub fn check_mixed_consistency(model: &PairwiseModel, beliefs: &MixedBeliefSet) -> ConsistencyResiduals {
    let mut out = ConsistencyResiduals::default();
    let bump = |slot: &mut Option<f64>, v: f64| {
        *slot = Some(slot.map_or(v, |old: f64| old.max(v)));
    };
    for (e, edge) in model.edges().iter().enumerate() {
        let (ci, cj) = (model.card(edge.i), model.card(edge.j));
        let tab = &beliefs.edge[e];
        // direction i -> j marginalizes x_i; direction j -> i marginalizes x_j
        for (src, dst, card_src, card_dst, index) in [
            (edge.i, edge.j, ci, cj, true),
            (edge.j, edge.i, cj, ci, false),
        ] {
            let cell = |xs: usize, xd: usize| -> f64 {
                if index {
                    tab[xs * cj + xd]
                } else {
                    tab[xd * cj + xs]
                }
            };
            let target = &beliefs.node[dst];
            match (model.role(src), model.role(dst)) {
                (Role::Sum, _) => {
                    let proj: Vec<f64> = (0..card_dst)
                        .map(|xd| (0..card_src).map(|xs| cell(xs, xd)).sum())
                        .collect();
                    bump(&mut out.sum, vector_residual(proj, target));
                }
                (Role::Max, Role::Max) => {
                    let proj: Vec<f64> = (0..card_dst)
                        .map(|xd| (0..card_src).map(|xs| cell(xs, xd)).fold(0.0, f64::max))
                        .collect();
                    bump(&mut out.max, vector_residual(proj, target));
                }
                (Role::Max, Role::Sum) => {
                    let log_b: Vec<f64> = beliefs.node[src]
                        .iter()
                        .map(|&p| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY })
                        .collect();
                    let set = argmax_set(&log_b, ARGMAX_TIE_TOL);
                    let proj: Vec<f64> = (0..card_dst)
                        .map(|xd| set.iter().map(|&xs| cell(xs, xd)).sum())
                        .collect();
                    bump(&mut out.argmax, vector_residual(proj, target));
                }
            }
        }
    }
    out
}

/// For each candidate set `subset` of max nodes, check that no configuration
/// differing from `xb` only inside the subset improves the exact objective
/// by more than 1e-9.
pub fn verify_local_optimality(
    model: &PairwiseModel,
    xb: &[usize],
    subsets: &[Vec<usize>],
    opts: &OracleOptions,
) -> Result<Vec<bool>> {
    let qe = QEvaluator::new(model);
    let b_nodes = qe.max_nodes().to_vec();
    let pos_of = |var: usize| -> Result<usize> {
        b_nodes
            .iter()
            .position(|&v| v == var)
            .ok_or_else(|| Error::InvalidArgument(format!("variable {} is not a max node", var)))
    };
    let base = qe.evaluate(xb, opts)?;
    let mut scratch = qe.scratch();
    let mut results = Vec::with_capacity(subsets.len());
    for subset in subsets {
        let positions: Vec<usize> = subset.iter().map(|&v| pos_of(v)).collect::<Result<_>>()?;
        let cards: Vec<usize> = subset.iter().map(|&v| model.card(v)).collect();
        let states: u128 = cards.iter().map(|&c| c as u128).product();
        if states > opts.max_states as u128 {
            return Err(Error::ResourceLimit {
                required: states,
                cap: opts.max_states,
            });
        }
        let mut ok = true;
        let mut candidate = xb.to_vec();
        for assign in ConfigIter::new(&cards) {
            for (k, &p) in positions.iter().enumerate() {
                candidate[p] = assign[k];
            }
            let q = qe.evaluate_with(&candidate, opts, &mut scratch)?;
            if q > base + 1e-9 {
                ok = false;
                break;
            }
        }
        for &p in &positions {
            candidate[p] = xb[p];
        }
        results.push(ok);
    }
    Ok(results)
}
