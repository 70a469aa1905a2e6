//! Pairwise discrete models with a sum/max node partition.
//!
//! A model is a set of discrete variables, each flagged as a sum node
//! (marginalized) or a max node (optimized), together with node and edge
//! log-potentials. Models are immutable after construction and safe to share
//! across concurrent solver runs.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Inference role of a variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    /// Marginalized out.
    Sum,
    /// Maximized over.
    Max,
}

/// An undirected edge with its pairwise log-potential table.
#[derive(Debug, Clone)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    /// Row-major `cards[i] x cards[j]` table of log-potential values.
    pub logpot: Vec<f64>,
}

impl Edge {
    #[inline]
    pub fn value(&self, card_j: usize, xi: usize, xj: usize) -> f64 {
        self.logpot[xi * card_j + xj]
    }
}

/// A pairwise discrete graphical model.
#[derive(Debug, Clone)]
pub struct PairwiseModel {
    cards: Vec<usize>,
    roles: Vec<Role>,
    node_logpot: Vec<Vec<f64>>,
    edges: Vec<Edge>,
    /// Per node: `(edge index, neighbor)` pairs in edge order.
    neighbors: Vec<Vec<(usize, usize)>>,
}

/// Classification of the edge set by endpoint roles.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GraphPartition {
    /// Both endpoints are sum nodes.
    pub edges_a: Vec<usize>,
    /// Both endpoints are max nodes.
    pub edges_b: Vec<usize>,
    /// One endpoint of each role.
    pub edges_ab: Vec<usize>,
}

impl PairwiseModel {
    /// Build a model, validating structure.
    pub fn new(
        cards: Vec<usize>,
        roles: Vec<Role>,
        node_logpot: Vec<Vec<f64>>,
        edges: Vec<(usize, usize)>,
        edge_logpot: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = cards.len();
        if roles.len() != n || node_logpot.len() != n {
            return Err(Error::Structural(
                "cards, roles and node potentials must have equal length".into(),
            ));
        }
        if cards.iter().any(|&c| c == 0) {
            return Err(Error::Structural("variable cardinality must be >= 1".into()));
        }
        for (i, pot) in node_logpot.iter().enumerate() {
            if pot.len() != cards[i] {
                return Err(Error::Structural(format!(
                    "node potential {} has length {}, expected {}",
                    i,
                    pot.len(),
                    cards[i]
                )));
            }
            if pot.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
                return Err(Error::Structural(format!(
                    "node potential {} contains non-finite entries other than -inf",
                    i
                )));
            }
            if pot.iter().all(|&v| v == f64::NEG_INFINITY) {
                return Err(Error::Structural(format!(
                    "node potential {} has no finite entry",
                    i
                )));
            }
        }
        if edges.len() != edge_logpot.len() {
            return Err(Error::Structural(
                "edge list and edge potentials must have equal length".into(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        let mut built = Vec::with_capacity(edges.len());
        for (e, (&(i, j), pot)) in edges.iter().zip(edge_logpot).enumerate() {
            if i == j {
                return Err(Error::Structural(format!("edge {} is a self-loop", e)));
            }
            if i >= n || j >= n {
                return Err(Error::Structural(format!("edge {} references unknown variable", e)));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(Error::Structural(format!("duplicate edge ({}, {})", i, j)));
            }
            if pot.len() != cards[i] * cards[j] {
                return Err(Error::Structural(format!(
                    "edge potential {} has {} entries, expected {}",
                    e,
                    pot.len(),
                    cards[i] * cards[j]
                )));
            }
            if pot.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
                return Err(Error::Structural(format!(
                    "edge potential {} contains non-finite entries other than -inf",
                    e
                )));
            }
            if pot.iter().all(|&v| v == f64::NEG_INFINITY) {
                return Err(Error::Structural(format!("edge potential {} has no finite entry", e)));
            }
            built.push(Edge { i, j, logpot: pot });
        }
        let mut neighbors = vec![Vec::new(); n];
        for (e, edge) in built.iter().enumerate() {
            neighbors[edge.i].push((e, edge.j));
            neighbors[edge.j].push((e, edge.i));
        }
        Ok(PairwiseModel {
            cards,
            roles,
            node_logpot,
            edges: built,
            neighbors,
        })
    }

    #[inline]
    pub fn num_vars(&self) -> usize {
        self.cards.len()
    }

    #[inline]
    pub fn card(&self, i: usize) -> usize {
        self.cards[i]
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    #[inline]
    pub fn role(&self, i: usize) -> Role {
        self.roles[i]
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn node_logpot(&self, i: usize) -> &[f64] {
        &self.node_logpot[i]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// `(edge index, neighbor)` pairs incident to `i`.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.neighbors[i]
    }

    /// Pairwise log-potential looked up with `src` as the first argument.
    #[inline]
    pub fn edge_logpot(&self, e: usize, src: usize, x_src: usize, x_dst: usize) -> f64 {
        let edge = &self.edges[e];
        if edge.i == src {
            edge.value(self.cards[edge.j], x_src, x_dst)
        } else {
            edge.value(self.cards[edge.j], x_dst, x_src)
        }
    }

    /// Max nodes in index order.
    pub fn max_nodes(&self) -> Vec<usize> {
        (0..self.num_vars()).filter(|&i| self.roles[i] == Role::Max).collect()
    }

    /// Sum nodes in index order.
    pub fn sum_nodes(&self) -> Vec<usize> {
        (0..self.num_vars()).filter(|&i| self.roles[i] == Role::Sum).collect()
    }

    /// Total joint potential of a full configuration.
    pub fn energy(&self, x: &[usize]) -> Result<f64> {
        if x.len() != self.num_vars() {
            return Err(Error::InvalidConfiguration(format!(
                "configuration has {} entries, model has {} variables",
                x.len(),
                self.num_vars()
            )));
        }
        for (i, &xi) in x.iter().enumerate() {
            if xi >= self.cards[i] {
                return Err(Error::InvalidConfiguration(format!(
                    "state {} out of range for variable {} (card {})",
                    xi, i, self.cards[i]
                )));
            }
        }
        let mut total = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            let v = self.node_logpot[i][xi];
            if v == f64::NEG_INFINITY {
                return Ok(f64::NEG_INFINITY);
            }
            total += v;
        }
        for edge in &self.edges {
            let v = edge.value(self.cards[edge.j], x[edge.i], x[edge.j]);
            if v == f64::NEG_INFINITY {
                return Ok(f64::NEG_INFINITY);
            }
            total += v;
        }
        Ok(total)
    }

    /// Classify edges by endpoint roles.
    pub fn partition_edges(&self) -> GraphPartition {
        let mut p = GraphPartition::default();
        for (e, edge) in self.edges.iter().enumerate() {
            match (self.roles[edge.i], self.roles[edge.j]) {
                (Role::Sum, Role::Sum) => p.edges_a.push(e),
                (Role::Max, Role::Max) => p.edges_b.push(e),
                _ => p.edges_ab.push(e),
            }
        }
        p
    }

    /// Whether the whole graph is a forest.
    pub fn is_forest(&self) -> bool {
        let mut uf = UnionFind::new(self.num_vars());
        self.edges.iter().all(|e| uf.union(e.i, e.j))
    }

    /// Test for tractable mixed-elimination structure and return a witness
    /// order (all max nodes first, then all sum nodes, each node preceded by
    /// its unique earlier neighbor).
    ///
    /// The graph qualifies iff it is a forest and, orienting each tree from a
    /// root chosen among its max nodes (any tree without max nodes roots
    /// arbitrarily), no sum node is the parent of a max node.
    pub fn ab_tree_order(&self) -> Option<Vec<usize>> {
        if !self.is_forest() {
            return None;
        }
        let n = self.num_vars();
        let mut visited = vec![false; n];
        let mut max_order = Vec::new();
        let mut sum_order = Vec::new();
        // roots: lowest-index max node per tree when one exists
        let mut component = vec![usize::MAX; n];
        let mut comp_root: Vec<usize> = Vec::new();
        for start in 0..n {
            if component[start] != usize::MAX {
                continue;
            }
            let c = comp_root.len();
            let mut stack = vec![start];
            component[start] = c;
            let mut root = start;
            while let Some(v) = stack.pop() {
                if self.roles[v] == Role::Max && (self.roles[root] != Role::Max || v < root) {
                    root = v;
                }
                for &(_, w) in &self.neighbors[v] {
                    if component[w] == usize::MAX {
                        component[w] = c;
                        stack.push(w);
                    }
                }
            }
            comp_root.push(root);
        }
        for &root in &comp_root {
            // BFS from the root; reject a sum parent over a max child
            let mut queue = std::collections::VecDeque::new();
            visited[root] = true;
            queue.push_back(root);
            while let Some(v) = queue.pop_front() {
                match self.roles[v] {
                    Role::Max => max_order.push(v),
                    Role::Sum => sum_order.push(v),
                }
                for &(_, w) in &self.neighbors[v] {
                    if !visited[w] {
                        if self.roles[v] == Role::Sum && self.roles[w] == Role::Max {
                            return None;
                        }
                        visited[w] = true;
                        queue.push_back(w);
                    }
                }
            }
        }
        max_order.extend(sum_order);
        Some(max_order)
    }

    /// Convenience wrapper for [`PairwiseModel::ab_tree_order`].
    pub fn is_ab_tree(&self) -> bool {
        self.ab_tree_order().is_some()
    }

    /// Number of joint states, exact in `u128`.
    pub fn num_joint_states(&self) -> u128 {
        self.cards.iter().map(|&c| c as u128).product()
    }
}

/// Iterate all configurations of `cards` in lexicographic order with the
/// last variable varying fastest.
pub struct ConfigIter {
    cards: Vec<usize>,
    current: Vec<usize>,
    done: bool,
}

impl ConfigIter {
    pub fn new(cards: &[usize]) -> Self {
        ConfigIter {
            current: vec![0; cards.len()],
            done: cards.iter().any(|&c| c == 0),
            cards: cards.to_vec(),
        }
    }
}

impl Iterator for ConfigIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        let mut k = self.cards.len();
        loop {
            if k == 0 {
                self.done = true;
                break;
            }
            k -= 1;
            self.current[k] += 1;
            if self.current[k] < self.cards[k] {
                break;
            }
            self.current[k] = 0;
        }
        Some(out)
    }
}

/// Decode the `idx`-th configuration in the same order as [`ConfigIter`].
pub fn config_from_index(cards: &[usize], mut idx: u128) -> Vec<usize> {
    let mut out = vec![0; cards.len()];
    for k in (0..cards.len()).rev() {
        let c = cards[k] as u128;
        out[k] = (idx % c) as usize;
        idx /= c;
    }
    out
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false if `a` and `b` were already connected.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}
