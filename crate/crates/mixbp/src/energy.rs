//! Entropy weights and truncated free energies.
//!
//! The pairwise objective is `<theta, tau> + sum_i w_i H_i - sum_ij w_ij I_ij`
//! with singleton weights fixed by node roles and a temperature, and pairwise
//! weights by per-edge coefficients: `w_i = 1` on sum nodes and `epsilon` on
//! max nodes; `w_ij = rho_ij` on sum-sum and cross edges and
//! `epsilon * rho_ij` on max-max edges.

use crate::error::{Error, Result};
use crate::logsum::{dot_logpot, entropy};
use crate::model::{PairwiseModel, Role, UnionFind};
use crate::mp::BeliefSet;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Witness that max-part entropy weights are provably convex:
/// `kappa_i + sum_{i' in N(i)} kappa_{i'->i} = 1` per max node and
/// `kappa_{i->j} + kappa_{j->i} = rho_ij` per max-max edge.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvexityCertificate {
    /// Per variable; meaningful for max nodes only.
    pub kappa_node: Vec<f64>,
    /// Per edge `[kappa_{i->j}, kappa_{j->i}]` in the model's edge order;
    /// meaningful for max-max edges only.
    pub kappa_dir: Vec<[f64; 2]>,
}

impl ConvexityCertificate {
    /// Check both certificate identities to the given tolerance.
    pub fn validate(&self, model: &PairwiseModel, rho: &[f64], tol: f64) -> bool {
        let mut incoming = vec![0.0; model.num_vars()];
        for (e, edge) in model.edges().iter().enumerate() {
            if model.role(edge.i) == Role::Max && model.role(edge.j) == Role::Max {
                incoming[edge.j] += self.kappa_dir[e][0];
                incoming[edge.i] += self.kappa_dir[e][1];
                let s = self.kappa_dir[e][0] + self.kappa_dir[e][1];
                if (s - rho[e]).abs() > tol || self.kappa_dir[e][0] < 0.0 || self.kappa_dir[e][1] < 0.0 {
                    return false;
                }
            }
        }
        for i in 0..model.num_vars() {
            if model.role(i) == Role::Max {
                if self.kappa_node[i] < 0.0 {
                    return false;
                }
                if (self.kappa_node[i] + incoming[i] - 1.0).abs() > tol {
                    return false;
                }
            }
        }
        true
    }
}

/// Per-edge entropy coefficients plus the temperature.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntropyWeights {
    /// Per-edge coefficient in the model's edge order.
    pub rho: Vec<f64>,
    /// Temperature applied to max-node entropy terms.
    pub epsilon: f64,
    /// Convexity witness for the max-part weights, when constructed.
    pub certificate: Option<ConvexityCertificate>,
    /// Stored subtree collection behind TRW coefficients (edge index sets);
    /// empty for Bethe weights.
    pub trees: Vec<Vec<usize>>,
}

impl EntropyWeights {
    /// Singleton weight of a node under the temperature.
    #[inline]
    pub fn w_node(&self, model: &PairwiseModel, i: usize) -> f64 {
        match model.role(i) {
            Role::Sum => 1.0,
            Role::Max => self.epsilon,
        }
    }

    /// Pairwise weight of an edge under the temperature.
    #[inline]
    pub fn w_pair(&self, model: &PairwiseModel, e: usize) -> f64 {
        let edge = &model.edges()[e];
        if model.role(edge.i) == Role::Max && model.role(edge.j) == Role::Max {
            self.epsilon * self.rho[e]
        } else {
            self.rho[e]
        }
    }

    /// Same weights at a different temperature.
    pub fn at_epsilon(&self, epsilon: f64) -> EntropyWeights {
        EntropyWeights {
            epsilon,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("weights serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse {
            token: 0,
            message: format!("weights document: {}", e),
        })
    }
}

/// Bethe weights: every edge coefficient is 1.
pub fn bethe_weights(model: &PairwiseModel, epsilon: f64) -> EntropyWeights {
    EntropyWeights {
        rho: vec![1.0; model.edges().len()],
        epsilon,
        certificate: None,
        trees: Vec::new(),
    }
}

/// Provably convex coefficients for the max-max edges: each max node keeps
/// half its unit budget and splits the rest equally over incident max-max
/// directions; isolated max nodes keep the full budget.
pub fn convex_weights_b(model: &PairwiseModel) -> (Vec<f64>, ConvexityCertificate) {
    let n = model.num_vars();
    let ne = model.edges().len();
    let mut deg_b = vec![0usize; n];
    for edge in model.edges() {
        if model.role(edge.i) == Role::Max && model.role(edge.j) == Role::Max {
            deg_b[edge.i] += 1;
            deg_b[edge.j] += 1;
        }
    }
    let mut kappa_node = vec![0.0; n];
    for i in 0..n {
        if model.role(i) == Role::Max {
            kappa_node[i] = if deg_b[i] == 0 { 1.0 } else { 0.5 };
        }
    }
    let mut kappa_dir = vec![[0.0, 0.0]; ne];
    let mut rho = vec![0.0; ne];
    for (e, edge) in model.edges().iter().enumerate() {
        if model.role(edge.i) == Role::Max && model.role(edge.j) == Role::Max {
            // each endpoint allots 1/(2 deg) to every incoming direction
            let into_j = 0.5 / deg_b[edge.j] as f64;
            let into_i = 0.5 / deg_b[edge.i] as f64;
            kappa_dir[e] = [into_j, into_i];
            rho[e] = into_i + into_j;
        }
    }
    (rho, ConvexityCertificate { kappa_node, kappa_dir })
}

/// Appearance-probability weights derived from an explicit subtree
/// collection over sum-sum and cross edges; max-max edges come from
/// [`convex_weights_b`].
pub fn weights_from_trees(
    model: &PairwiseModel,
    trees: &[Vec<usize>],
    epsilon: f64,
) -> Result<EntropyWeights> {
    if trees.is_empty() {
        return Err(Error::InvalidArgument("tree collection is empty".into()));
    }
    let ne = model.edges().len();
    let mut counts = vec![0usize; ne];
    for t in trees {
        for &e in t {
            if e >= ne {
                return Err(Error::InvalidArgument(format!("tree references unknown edge {}", e)));
            }
            counts[e] += 1;
        }
    }
    let (rho_b, cert) = convex_weights_b(model);
    let mut rho = vec![0.0; ne];
    for (e, edge) in model.edges().iter().enumerate() {
        rho[e] = if model.role(edge.i) == Role::Max && model.role(edge.j) == Role::Max {
            rho_b[e]
        } else {
            counts[e] as f64 / trees.len() as f64
        };
    }
    Ok(EntropyWeights {
        rho,
        epsilon,
        certificate: Some(cert),
        trees: trees.to_vec(),
    })
}

/// Sample a tree-reweighted coefficient set: each subtree is a random
/// spanning forest of the sum subgraph augmented with one uniformly chosen
/// cross edge per sum component, then extra subtrees are added until every
/// sum-sum and cross edge appears at least once (message passing needs
/// strictly positive pairwise weights).
pub fn trw_weights(
    model: &PairwiseModel,
    num_trees: usize,
    epsilon: f64,
    seed: u64,
) -> Result<EntropyWeights> {
    if num_trees == 0 {
        return Err(Error::InvalidArgument("num_trees must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let part = model.partition_edges();
    // sum-node component labels
    let mut uf = UnionFind::new(model.num_vars());
    for &e in &part.edges_a {
        let edge = &model.edges()[e];
        uf.union(edge.i, edge.j);
    }
    let sum_nodes = model.sum_nodes();
    let mut comp_of = std::collections::HashMap::new();
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for &v in &sum_nodes {
        let root = uf.find(v);
        let c = *comp_of.entry(root).or_insert_with(|| {
            comps.push(Vec::new());
            comps.len() - 1
        });
        comps[c].push(v);
    }
    // cross edges grouped by the sum-side component
    let mut cross_by_comp: Vec<Vec<usize>> = vec![Vec::new(); comps.len()];
    for &e in &part.edges_ab {
        let edge = &model.edges()[e];
        let sum_end = if model.role(edge.i) == Role::Sum { edge.i } else { edge.j };
        let c = comp_of[&uf.find(sum_end)];
        cross_by_comp[c].push(e);
    }
    let sample_tree = |rng: &mut ChaCha8Rng, forced: Option<usize>| -> Vec<usize> {
        // randomized minimum spanning forest over iid uniform edge weights,
        // with an optionally forced sum-sum edge
        let mut weighted: Vec<(f64, usize)> = part
            .edges_a
            .iter()
            .map(|&e| {
                let w = if Some(e) == forced { -1.0 } else { rng.random::<f64>() };
                (w, e)
            })
            .collect();
        weighted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let mut uf2 = UnionFind::new(model.num_vars());
        let mut tree: Vec<usize> = Vec::new();
        for (_, e) in weighted {
            let edge = &model.edges()[e];
            if uf2.union(edge.i, edge.j) {
                tree.push(e);
            }
        }
        // one cross edge per sum component
        for (c, cross) in cross_by_comp.iter().enumerate() {
            if cross.is_empty() {
                continue;
            }
            let pick = if let Some(f) = forced {
                if cross.contains(&f) {
                    f
                } else {
                    cross[rng.random_range(0..cross.len())]
                }
            } else {
                cross[rng.random_range(0..cross.len())]
            };
            let _ = c;
            tree.push(pick);
        }
        tree.sort_unstable();
        tree
    };
    let mut trees: Vec<Vec<usize>> = (0..num_trees).map(|_| sample_tree(&mut rng, None)).collect();
    // coverage pass
    let mut covered = vec![false; model.edges().len()];
    for t in &trees {
        for &e in t {
            covered[e] = true;
        }
    }
    for e in part.edges_a.iter().chain(&part.edges_ab) {
        if !covered[*e] {
            let t = sample_tree(&mut rng, Some(*e));
            for &x in &t {
                covered[x] = true;
            }
            trees.push(t);
        }
    }
    weights_from_trees(model, &trees, epsilon)
}

/// Max residual of the local-consistency constraints: node normalization,
/// edge normalization, and both one-sided marginalizations per edge.
pub fn consistency_residual(model: &PairwiseModel, beliefs: &BeliefSet) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..model.num_vars() {
        let s: f64 = beliefs.node[i].iter().sum();
        worst = worst.max((s - 1.0).abs());
    }
    for (e, edge) in model.edges().iter().enumerate() {
        let (ci, cj) = (model.card(edge.i), model.card(edge.j));
        let tab = &beliefs.edge[e];
        let s: f64 = tab.iter().sum();
        worst = worst.max((s - 1.0).abs());
        for xj in 0..cj {
            let m: f64 = (0..ci).map(|xi| tab[xi * cj + xj]).sum();
            worst = worst.max((m - beliefs.node[edge.j][xj]).abs());
        }
        for xi in 0..ci {
            let m: f64 = (0..cj).map(|xj| tab[xi * cj + xj]).sum();
            worst = worst.max((m - beliefs.node[edge.i][xi]).abs());
        }
    }
    worst
}

/// Weighted truncated free energy at the given beliefs, without the
/// local-consistency gate. Entropy terms use `0 ln 0 = 0`; mutual
/// information is computed as `H_i + H_j - H_ij`.
pub fn free_energy_unchecked(
    model: &PairwiseModel,
    beliefs: &BeliefSet,
    weights: &EntropyWeights,
) -> f64 {
    let mut value = 0.0;
    let mut node_entropy = vec![0.0; model.num_vars()];
    for i in 0..model.num_vars() {
        let tau = &beliefs.node[i];
        let d = dot_logpot(model.node_logpot(i), tau);
        if d == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        value += d;
        node_entropy[i] = entropy(tau);
        value += weights.w_node(model, i) * node_entropy[i];
    }
    for (e, edge) in model.edges().iter().enumerate() {
        let tab = &beliefs.edge[e];
        let d = dot_logpot(&edge.logpot, tab);
        if d == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        value += d;
        let mi = node_entropy[edge.i] + node_entropy[edge.j] - entropy(tab);
        value -= weights.w_pair(model, e) * mi;
    }
    value
}

/// Weighted truncated free energy; errors if the beliefs are not locally
/// consistent to 1e-6.
pub fn eval_free_energy(
    model: &PairwiseModel,
    beliefs: &BeliefSet,
    weights: &EntropyWeights,
) -> Result<f64> {
    let residual = consistency_residual(model, beliefs);
    if residual > 1e-6 {
        return Err(Error::Inconsistent { residual });
    }
    Ok(free_energy_unchecked(model, beliefs, weights))
}

/// TRW objective value at the zero-temperature weights plus a validity flag
/// driven by the caller's convergence residual.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoundValue {
    pub value: f64,
    pub valid: bool,
}

/// Upper-bound read-out: the truncated TRW objective at temperature zero.
/// The value is returned even when not converged, flagged invalid.
pub fn trw_upper_bound(
    model: &PairwiseModel,
    beliefs: &BeliefSet,
    weights: &EntropyWeights,
    convergence_residual: f64,
    tol: f64,
) -> BoundValue {
    let zero_temp = weights.at_epsilon(0.0);
    BoundValue {
        value: free_energy_unchecked(model, beliefs, &zero_temp),
        valid: convergence_residual <= tol,
    }
}
