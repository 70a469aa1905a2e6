//! Small model zoo shared by unit, integration and acceptance tests.

use crate::model::{PairwiseModel, Role};
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Two-variable demo model: a binary max node `b` (0 = rainy, 1 = sunny)
/// with prior [0.4, 0.6], and a binary sum node `a` (0 = walk, 1 = drive)
/// coupled through the conditional table
/// `p(a|b) = [[1/8, 7/8], [1/2, 1/2]]`.
///
/// Variable order: 0 = a (sum), 1 = b (max). The joint is normalized, so the
/// log-partition function is 0, the marginal-MAP answer is `sunny` with
/// value `ln 0.6`, and the joint MAP is `(drive, rainy)` with value `ln 0.35`.
pub fn weather_model() -> PairwiseModel {
    let node_a = vec![0.0, 0.0];
    let node_b = vec![(0.4f64).ln(), (0.6f64).ln()];
    // edge (b, a): rows indexed by x_b, columns by x_a
    let table = vec![
        (1.0f64 / 8.0).ln(),
        (7.0f64 / 8.0).ln(),
        (0.5f64).ln(),
        (0.5f64).ln(),
    ];
    PairwiseModel::new(
        vec![2, 2],
        vec![Role::Sum, Role::Max],
        vec![node_a, node_b],
        vec![(1, 0)],
        vec![table],
    )
    .expect("valid demo model")
}

/// Random model on a tree backbone plus optional extra edges.
///
/// Node potentials are N(0, 0.1^2) per entry; edge potentials N(0, sigma^2).
/// Roles cycle through `role_pool`. With `extra_edge_prob = 0` the graph is
/// a spanning tree.
pub fn random_model_with_extras<R: Rng>(
    rng: &mut R,
    n: usize,
    card: usize,
    sigma: f64,
    role_pool: &[Role],
    extra_edge_prob: f64,
) -> PairwiseModel {
    let node_noise = Normal::new(0.0, 0.1).unwrap();
    let edge_noise = Normal::new(0.0, sigma.max(1e-12)).unwrap();
    let cards = vec![card; n];
    let roles: Vec<Role> = (0..n).map(|i| role_pool[i % role_pool.len()]).collect();
    let node_logpot: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..card).map(|_| node_noise.sample(rng)).collect())
        .collect();
    let mut edges = Vec::new();
    for i in 1..n {
        let p = rng.random_range(0..i);
        edges.push((p, i));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if edges.contains(&(i, j)) || edges.contains(&(j, i)) {
                continue;
            }
            if rng.random::<f64>() < extra_edge_prob {
                edges.push((i, j));
            }
        }
    }
    let edge_logpot: Vec<Vec<f64>> = edges
        .iter()
        .map(|_| (0..card * card).map(|_| edge_noise.sample(rng)).collect())
        .collect();
    PairwiseModel::new(cards, roles, node_logpot, edges, edge_logpot).expect("valid random model")
}

/// Random tree-structured model (see [`random_model_with_extras`]).
pub fn random_tree_model<R: Rng>(
    rng: &mut R,
    n: usize,
    card: usize,
    sigma: f64,
    role_pool: &[Role],
) -> PairwiseModel {
    random_model_with_extras(rng, n, card, sigma, role_pool, 0.0)
}

/// Random loopy-ish model (tree backbone plus extra edges with prob 0.3).
pub fn random_model<R: Rng>(
    rng: &mut R,
    n: usize,
    card: usize,
    sigma: f64,
    role_pool: &[Role],
) -> PairwiseModel {
    random_model_with_extras(rng, n, card, sigma, role_pool, 0.3)
}

/// Random tree whose max nodes form a connected block at the root with sum
/// subtrees hanging below, so mixed elimination is single-pass tractable.
/// Variables 0..n_max are max nodes, the rest sum nodes.
pub fn random_ab_tree_model<R: Rng>(
    rng: &mut R,
    n_max: usize,
    n_sum: usize,
    card: usize,
    sigma: f64,
) -> PairwiseModel {
    let n = n_max + n_sum;
    let node_noise = Normal::new(0.0, 0.1).unwrap();
    let edge_noise = Normal::new(0.0, sigma.max(1e-12)).unwrap();
    let mut edges = Vec::new();
    for i in 1..n_max {
        edges.push((rng.random_range(0..i), i));
    }
    for i in n_max..n {
        edges.push((rng.random_range(0..i), i));
    }
    let mut roles = vec![Role::Max; n_max];
    roles.extend(vec![Role::Sum; n_sum]);
    let node_logpot: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..card).map(|_| node_noise.sample(rng)).collect())
        .collect();
    let edge_logpot: Vec<Vec<f64>> = edges
        .iter()
        .map(|_| (0..card * card).map(|_| edge_noise.sample(rng)).collect())
        .collect();
    PairwiseModel::new(vec![card; n], roles, node_logpot, edges, edge_logpot)
        .expect("valid block tree")
}

/// The four-node toy tree used to compare hybrid decodes: sum nodes 0, 1
/// form the backbone, max node 2 hangs off node 0 and max node 3 off node 1.
pub fn toy_four_node_tree<R: Rng>(rng: &mut R, card: usize, sigma: f64) -> PairwiseModel {
    let node_noise = Normal::new(0.0, 0.1).unwrap();
    let edge_noise = Normal::new(0.0, sigma.max(1e-12)).unwrap();
    let node_logpot: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..card).map(|_| node_noise.sample(rng)).collect())
        .collect();
    let edges = vec![(0, 1), (0, 2), (1, 3)];
    let edge_logpot: Vec<Vec<f64>> = edges
        .iter()
        .map(|_| (0..card * card).map(|_| edge_noise.sample(rng)).collect())
        .collect();
    PairwiseModel::new(
        vec![card; 4],
        vec![Role::Sum, Role::Sum, Role::Max, Role::Max],
        node_logpot,
        edges,
        edge_logpot,
    )
    .expect("valid toy tree")
}
