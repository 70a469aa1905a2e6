//! Higher-order factor models and junction-graph message passing.
//!
//! Clusters come from a constrained min-fill elimination (sum variables
//! before max variables), factors attach to the first cluster covering their
//! scope, and each max variable is assigned to the first cluster containing
//! it. Max clusters send argmax-restricted sum messages; sum clusters send
//! plain sum messages.

use crate::error::{Error, Result};
use crate::logsum::{entropy, max_normalize, to_probabilities, StreamingLse};
use crate::model::{ConfigIter, PairwiseModel, Role};
use crate::mp::{ARGMAX_TIE_TOL, SolverOptions};
use crate::report::{Residuals, SolveReport};
use std::collections::HashSet;
use std::time::Instant;

/// One factor: an ordered variable scope and a log table over the scope's
/// joint states, row-major with the last scope variable fastest.
#[derive(Debug, Clone)]
pub struct Factor {
    pub scope: Vec<usize>,
    pub table: Vec<f64>,
}

/// Discrete model over arbitrary-arity factors.
#[derive(Debug, Clone)]
pub struct FactorModel {
    pub cards: Vec<usize>,
    pub roles: Vec<Role>,
    pub factors: Vec<Factor>,
}

fn scope_strides(scope: &[usize], cards: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; scope.len()];
    for k in (0..scope.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * cards[scope[k + 1]];
    }
    strides
}

impl FactorModel {
    pub fn new(cards: Vec<usize>, roles: Vec<Role>, factors: Vec<Factor>) -> Result<Self> {
        if cards.len() != roles.len() {
            return Err(Error::Structural("cards and roles length mismatch".into()));
        }
        if cards.iter().any(|&c| c == 0) {
            return Err(Error::Structural("variable cardinality must be >= 1".into()));
        }
        for (fi, f) in factors.iter().enumerate() {
            if f.scope.is_empty() {
                return Err(Error::Structural(format!("factor {} has empty scope", fi)));
            }
            let mut seen = HashSet::new();
            for &v in &f.scope {
                if v >= cards.len() {
                    return Err(Error::Structural(format!(
                        "factor {} references unknown variable {}",
                        fi, v
                    )));
                }
                if !seen.insert(v) {
                    return Err(Error::Structural(format!(
                        "factor {} repeats variable {}",
                        fi, v
                    )));
                }
            }
            let expect: usize = f.scope.iter().map(|&v| cards[v]).product();
            if f.table.len() != expect {
                return Err(Error::Structural(format!(
                    "factor {} table has {} entries, expected {}",
                    fi,
                    f.table.len(),
                    expect
                )));
            }
        }
        Ok(FactorModel { cards, roles, factors })
    }

    pub fn num_vars(&self) -> usize {
        self.cards.len()
    }

    pub fn max_nodes(&self) -> Vec<usize> {
        (0..self.num_vars()).filter(|&i| self.roles[i] == Role::Max).collect()
    }

    pub fn sum_nodes(&self) -> Vec<usize> {
        (0..self.num_vars()).filter(|&i| self.roles[i] == Role::Sum).collect()
    }

    pub fn energy(&self, x: &[usize]) -> Result<f64> {
        if x.len() != self.num_vars() {
            return Err(Error::InvalidConfiguration("configuration length mismatch".into()));
        }
        for (i, &xi) in x.iter().enumerate() {
            if xi >= self.cards[i] {
                return Err(Error::InvalidConfiguration(format!(
                    "state {} out of range for variable {}",
                    xi, i
                )));
            }
        }
        let mut total = 0.0;
        for f in &self.factors {
            let strides = scope_strides(&f.scope, &self.cards);
            let idx: usize = f.scope.iter().zip(&strides).map(|(&v, &s)| x[v] * s).sum();
            let t = f.table[idx];
            if t == f64::NEG_INFINITY {
                return Ok(f64::NEG_INFINITY);
            }
            total += t;
        }
        Ok(total)
    }

    /// Exact `Q(x_B)` by enumeration over the sum variables, under the cap.
    pub fn q_value(&self, xb: &[usize], max_states: u64) -> Result<f64> {
        let b = self.max_nodes();
        if xb.len() != b.len() {
            return Err(Error::InvalidConfiguration("max assignment length mismatch".into()));
        }
        let a = self.sum_nodes();
        let a_cards: Vec<usize> = a.iter().map(|&v| self.cards[v]).collect();
        let states: u128 = a_cards.iter().map(|&c| c as u128).product();
        if states > max_states as u128 {
            return Err(Error::ResourceLimit {
                required: states,
                cap: max_states,
            });
        }
        let mut full = vec![0usize; self.num_vars()];
        for (k, &v) in b.iter().enumerate() {
            full[v] = xb[k];
        }
        let mut acc = StreamingLse::new();
        for xa in ConfigIter::new(&a_cards) {
            for (k, &v) in a.iter().enumerate() {
                full[v] = xa[k];
            }
            acc.push(self.energy(&full)?);
        }
        Ok(acc.value())
    }

    /// Exact marginal MAP by enumerating max configurations.
    pub fn marginal_map_exact(&self, max_states: u64) -> Result<(Vec<usize>, f64)> {
        let b = self.max_nodes();
        let b_cards: Vec<usize> = b.iter().map(|&v| self.cards[v]).collect();
        let states: u128 = b_cards.iter().map(|&c| c as u128).product();
        if states > max_states as u128 {
            return Err(Error::ResourceLimit {
                required: states,
                cap: max_states,
            });
        }
        let mut best: Option<(Vec<usize>, f64)> = None;
        for xb in ConfigIter::new(&b_cards) {
            let q = self.q_value(&xb, max_states)?;
            let better = match &best {
                None => true,
                Some((_, v)) => q > *v,
            };
            if better {
                best = Some((xb, q));
            }
        }
        Ok(best.expect("nonempty scan"))
    }

    /// Lossless view of a pairwise model.
    pub fn from_pairwise(model: &PairwiseModel) -> FactorModel {
        let mut factors = Vec::new();
        for i in 0..model.num_vars() {
            factors.push(Factor {
                scope: vec![i],
                table: model.node_logpot(i).to_vec(),
            });
        }
        for edge in model.edges() {
            factors.push(Factor {
                scope: vec![edge.i, edge.j],
                table: edge.logpot.clone(),
            });
        }
        FactorModel {
            cards: model.cards().to_vec(),
            roles: model.roles().to_vec(),
            factors,
        }
    }

    /// Collapse into a pairwise model; errors if any factor has arity > 2.
    /// Factors sharing a scope are merged additively.
    pub fn to_pairwise(&self) -> Result<PairwiseModel> {
        let n = self.num_vars();
        let mut node: Vec<Vec<f64>> = self.cards.iter().map(|&c| vec![0.0; c]).collect();
        let mut edge_index: std::collections::HashMap<(usize, usize), usize> =
            std::collections::HashMap::new();
        let mut edges: Vec<(usize, usize)> = Vec::new();
        let mut tables: Vec<Vec<f64>> = Vec::new();
        for f in &self.factors {
            match f.scope.len() {
                1 => {
                    let v = f.scope[0];
                    for (slot, &t) in node[v].iter_mut().zip(&f.table) {
                        *slot = add_logpot(*slot, t);
                    }
                }
                2 => {
                    let (i, j) = (f.scope[0], f.scope[1]);
                    let key = (i.min(j), i.max(j));
                    let e = *edge_index.entry(key).or_insert_with(|| {
                        edges.push(key);
                        tables.push(vec![0.0; self.cards[key.0] * self.cards[key.1]]);
                        tables.len() - 1
                    });
                    let (ci, cj) = (self.cards[i], self.cards[j]);
                    for xi in 0..ci {
                        for xj in 0..cj {
                            let t = f.table[xi * cj + xj];
                            let idx = if i <= j {
                                xi * self.cards[key.1] + xj
                            } else {
                                xj * self.cards[key.1] + xi
                            };
                            tables[e][idx] = add_logpot(tables[e][idx], t);
                        }
                    }
                }
                k => {
                    return Err(Error::Structural(format!(
                        "factor of arity {} cannot be collapsed to a pairwise model",
                        k
                    )))
                }
            }
        }
        let _ = n;
        PairwiseModel::new(self.cards.clone(), self.roles.clone(), node, edges, tables)
    }

    /// Clamp variables to observed states: sliced tables, cardinality 1.
    pub fn clamp(&self, evidence: &[(usize, usize)]) -> Result<FactorModel> {
        let mut fixed: Vec<Option<usize>> = vec![None; self.num_vars()];
        for &(v, s) in evidence {
            if v >= self.num_vars() || s >= self.cards[v] {
                return Err(Error::InvalidArgument(format!(
                    "evidence ({}, {}) out of range",
                    v, s
                )));
            }
            fixed[v] = Some(s);
        }
        let mut cards = self.cards.clone();
        for (v, f) in fixed.iter().enumerate() {
            if f.is_some() {
                cards[v] = 1;
            }
        }
        let mut factors = Vec::with_capacity(self.factors.len());
        for f in &self.factors {
            let old_strides = scope_strides(&f.scope, &self.cards);
            let scope_cards: Vec<usize> = f
                .scope
                .iter()
                .map(|&v| if fixed[v].is_some() { 1 } else { self.cards[v] })
                .collect();
            let mut table = Vec::with_capacity(scope_cards.iter().product());
            for cfg in ConfigIter::new(&scope_cards) {
                let mut idx = 0;
                for (k, &v) in f.scope.iter().enumerate() {
                    let state = fixed[v].unwrap_or(cfg[k]);
                    idx += state * old_strides[k];
                }
                table.push(f.table[idx]);
            }
            factors.push(Factor {
                scope: f.scope.clone(),
                table,
            });
        }
        FactorModel::new(cards, self.roles.clone(), factors)
    }
}

#[inline]
fn add_logpot(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        a + b
    }
}

/// A cluster: sorted variable set, combined log-potential, and its share of
/// the max-variable partition.
#[derive(Debug, Clone)]
pub struct Cluster {
    pub vars: Vec<usize>,
    pub logpot: Vec<f64>,
    pub pi: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct JgEdge {
    pub k: usize,
    pub l: usize,
    pub sep: Vec<usize>,
}

/// A junction graph: clusters with assigned factors, separators on edges,
/// and a disjoint cover of the max variables.
#[derive(Debug, Clone)]
pub struct JunctionGraph {
    pub cards: Vec<usize>,
    pub roles: Vec<Role>,
    pub clusters: Vec<Cluster>,
    pub edges: Vec<JgEdge>,
}

impl JunctionGraph {
    pub fn cluster_cards(&self, k: usize) -> Vec<usize> {
        self.clusters[k].vars.iter().map(|&v| self.cards[v]).collect()
    }

    /// Max clusters are those with a nonempty partition cell.
    pub fn is_max_cluster(&self, k: usize) -> bool {
        !self.clusters[k].pi.is_empty()
    }
}

/// Constrained min-fill elimination order: all sum variables before any max
/// variable, min-fill with lowest-index ties within each phase.
fn elimination_order(fm: &FactorModel) -> Vec<usize> {
    let n = fm.num_vars();
    let mut adj: Vec<HashSet<usize>> = vec![HashSet::new(); n];
    for f in &fm.factors {
        for (a, &u) in f.scope.iter().enumerate() {
            for &v in &f.scope[a + 1..] {
                adj[u].insert(v);
                adj[v].insert(u);
            }
        }
    }
    let mut remaining: Vec<bool> = vec![true; n];
    let mut order = Vec::with_capacity(n);
    let fill_count = |adj: &Vec<HashSet<usize>>, v: usize| -> usize {
        let nbrs: Vec<usize> = adj[v].iter().cloned().collect();
        let mut fill = 0;
        for (a, &x) in nbrs.iter().enumerate() {
            for &y in &nbrs[a + 1..] {
                if !adj[x].contains(&y) {
                    fill += 1;
                }
            }
        }
        fill
    };
    for phase in [Role::Sum, Role::Max] {
        loop {
            let mut best: Option<(usize, usize)> = None; // (fill, var)
            for v in 0..n {
                if !remaining[v] || fm.roles[v] != phase {
                    continue;
                }
                let fill = fill_count(&adj, v);
                if best.map_or(true, |(bf, bv)| fill < bf || (fill == bf && v < bv)) {
                    best = Some((fill, v));
                }
            }
            let Some((_, v)) = best else { break };
            // connect neighbors, remove v
            let nbrs: Vec<usize> = adj[v].iter().cloned().collect();
            for (a, &x) in nbrs.iter().enumerate() {
                for &y in &nbrs[a + 1..] {
                    adj[x].insert(y);
                    adj[y].insert(x);
                }
            }
            for &x in &nbrs {
                adj[x].remove(&v);
            }
            adj[v].clear();
            remaining[v] = false;
            order.push(v);
        }
    }
    order
}

/// Build a junction graph by constrained min-fill elimination; see module
/// docs for factor and partition assignment.
pub fn build_junction_graph(fm: &FactorModel) -> Result<JunctionGraph> {
    let n = fm.num_vars();
    let order = elimination_order(fm);
    // induced clusters
    let mut adj: Vec<HashSet<usize>> = vec![HashSet::new(); n];
    for f in &fm.factors {
        for (a, &u) in f.scope.iter().enumerate() {
            for &v in &f.scope[a + 1..] {
                adj[u].insert(v);
                adj[v].insert(u);
            }
        }
    }
    let mut raw_clusters: Vec<Vec<usize>> = Vec::new();
    let mut elim_clique: Vec<usize> = vec![usize::MAX; n]; // var -> raw cluster index
    for &v in &order {
        let mut cluster: Vec<usize> = adj[v].iter().cloned().collect();
        cluster.push(v);
        cluster.sort_unstable();
        elim_clique[v] = raw_clusters.len();
        raw_clusters.push(cluster);
        let nbrs: Vec<usize> = adj[v].iter().cloned().collect();
        for (a, &x) in nbrs.iter().enumerate() {
            for &y in &nbrs[a + 1..] {
                adj[x].insert(y);
                adj[y].insert(x);
            }
        }
        for &x in &nbrs {
            adj[x].remove(&v);
        }
        adj[v].clear();
    }
    // drop clusters subsumed by another (keep the earliest of equals)
    let mut keep: Vec<bool> = vec![true; raw_clusters.len()];
    for a in 0..raw_clusters.len() {
        if !keep[a] {
            continue;
        }
        for b in 0..raw_clusters.len() {
            if a == b || !keep[b] {
                continue;
            }
            let sub = raw_clusters[a].iter().all(|v| raw_clusters[b].contains(v));
            if sub && (raw_clusters[a].len() < raw_clusters[b].len() || a > b) {
                keep[a] = false;
                break;
            }
        }
    }
    let mut surviving_of_raw: Vec<usize> = vec![usize::MAX; raw_clusters.len()];
    let mut cluster_vars: Vec<Vec<usize>> = Vec::new();
    for (r, c) in raw_clusters.iter().enumerate() {
        if keep[r] {
            surviving_of_raw[r] = cluster_vars.len();
            cluster_vars.push(c.clone());
        }
    }
    for (r, c) in raw_clusters.iter().enumerate() {
        if !keep[r] {
            surviving_of_raw[r] = cluster_vars
                .iter()
                .position(|host| c.iter().all(|v| host.contains(v)))
                .expect("dropped cluster has a subsuming host");
        }
    }
    let nc = cluster_vars.len();
    // maximum spanning forest over intersection sizes
    let mut cand: Vec<(usize, usize, usize)> = Vec::new(); // (overlap, k, l)
    for k in 0..nc {
        for l in (k + 1)..nc {
            let overlap = cluster_vars[k].iter().filter(|v| cluster_vars[l].contains(v)).count();
            if overlap > 0 {
                cand.push((overlap, k, l));
            }
        }
    }
    cand.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut uf = crate::model::UnionFind::new(nc);
    let mut edges = Vec::new();
    for (_, k, l) in cand {
        if uf.union(k, l) {
            let sep: Vec<usize> = cluster_vars[k]
                .iter()
                .filter(|v| cluster_vars[l].contains(v))
                .cloned()
                .collect();
            edges.push(JgEdge { k, l, sep });
        }
    }
    // factor assignment: first covering cluster
    let mut logpots: Vec<Vec<f64>> = cluster_vars
        .iter()
        .map(|c| {
            let size: usize = c.iter().map(|&v| fm.cards[v]).product();
            vec![0.0; size]
        })
        .collect();
    for f in &fm.factors {
        let host = cluster_vars
            .iter()
            .position(|c| f.scope.iter().all(|v| c.contains(v)))
            .ok_or_else(|| Error::Structural("factor scope not covered by any cluster".into()))?;
        let cvars = &cluster_vars[host];
        let ccards: Vec<usize> = cvars.iter().map(|&v| fm.cards[v]).collect();
        let fstrides = scope_strides(&f.scope, &fm.cards);
        let positions: Vec<usize> = f
            .scope
            .iter()
            .map(|v| cvars.iter().position(|c| c == v).unwrap())
            .collect();
        for (idx, cfg) in ConfigIter::new(&ccards).enumerate() {
            let fidx: usize = positions
                .iter()
                .zip(&fstrides)
                .map(|(&p, &s)| cfg[p] * s)
                .sum();
            logpots[host][idx] = add_logpot(logpots[host][idx], f.table[fidx]);
        }
    }
    // partition of the max variables: each max variable lands in the
    // surviving cluster hosting its elimination clique, keeping the argmax
    // restriction in the late (max-phase) clusters
    let mut pis: Vec<Vec<usize>> = vec![Vec::new(); nc];
    for v in fm.max_nodes() {
        let host = surviving_of_raw[elim_clique[v]];
        pis[host].push(v);
    }
    for pi in pis.iter_mut() {
        pi.sort_unstable();
    }
    let clusters = cluster_vars
        .into_iter()
        .zip(logpots)
        .zip(pis)
        .map(|((vars, logpot), pi)| Cluster { vars, logpot, pi })
        .collect();
    Ok(JunctionGraph {
        cards: fm.cards.clone(),
        roles: fm.roles.clone(),
        clusters,
        edges,
    })
}

/// Running intersection: for each variable, the clusters containing it and
/// the edges whose separators contain it form a connected tree.
pub fn check_running_intersection(jg: &JunctionGraph) -> bool {
    for v in 0..jg.cards.len() {
        let members: Vec<usize> = (0..jg.clusters.len())
            .filter(|&k| jg.clusters[k].vars.contains(&v))
            .collect();
        if members.is_empty() {
            continue;
        }
        let touching: Vec<&JgEdge> = jg.edges.iter().filter(|e| e.sep.contains(&v)).collect();
        // tree on the members: connected with exactly |members| - 1 edges
        if touching.len() != members.len() - 1 {
            return false;
        }
        let mut uf = crate::model::UnionFind::new(jg.clusters.len());
        for e in &touching {
            if !uf.union(e.k, e.l) {
                return false; // cycle within the variable's subgraph
            }
        }
        let root = uf.find(members[0]);
        if !members.iter().all(|&m| uf.find(m) == root) {
            return false;
        }
    }
    true
}

fn sub_index_map(cvars: &[usize], ccards: &[usize], sub: &[usize], cards: &[usize]) -> Vec<usize> {
    let sub_strides = scope_strides(sub, cards);
    let positions: Vec<usize> = sub
        .iter()
        .map(|v| cvars.iter().position(|c| c == v).unwrap())
        .collect();
    ConfigIter::new(ccards)
        .map(|cfg| {
            positions
                .iter()
                .zip(&sub_strides)
                .map(|(&p, &s)| cfg[p] * s)
                .sum()
        })
        .collect()
}

struct JgEngine<'a> {
    jg: &'a JunctionGraph,
    /// Directed edges: (edge, from_k_to_l), id = 2*edge + dir.
    sched: Vec<(usize, bool)>,
    /// Per directed edge: map from source-cluster state to separator state.
    sep_maps: Vec<Vec<usize>>,
    /// Per cluster: incident directed-edge ids pointing into the cluster.
    incoming: Vec<Vec<usize>>,
    /// Per cluster: map from cluster state to pi state (max clusters).
    pi_maps: Vec<Vec<usize>>,
    pi_sizes: Vec<usize>,
    sep_sizes: Vec<usize>,
}

impl<'a> JgEngine<'a> {
    fn new(jg: &'a JunctionGraph) -> Self {
        let mut sched: Vec<(usize, bool)> = Vec::new();
        for (e, _) in jg.edges.iter().enumerate() {
            sched.push((e, true));
            sched.push((e, false));
        }
        sched.sort_by_key(|&(e, fwd)| {
            let edge = &jg.edges[e];
            if fwd {
                (edge.k, edge.l)
            } else {
                (edge.l, edge.k)
            }
        });
        let mut sep_maps = Vec::with_capacity(jg.edges.len() * 2);
        let mut sep_sizes = Vec::with_capacity(jg.edges.len() * 2);
        let mut incoming = vec![Vec::new(); jg.clusters.len()];
        for (e, edge) in jg.edges.iter().enumerate() {
            for (dir, (src, dst)) in [(0usize, (edge.k, edge.l)), (1usize, (edge.l, edge.k))] {
                let id = 2 * e + dir;
                let cvars = &jg.clusters[src].vars;
                let ccards = jg.cluster_cards(src);
                sep_maps.push(sub_index_map(cvars, &ccards, &edge.sep, &jg.cards));
                sep_sizes.push(edge.sep.iter().map(|&v| jg.cards[v]).product());
                incoming[dst].push(id);
            }
        }
        let mut pi_maps = Vec::with_capacity(jg.clusters.len());
        let mut pi_sizes = Vec::with_capacity(jg.clusters.len());
        for c in &jg.clusters {
            if c.pi.is_empty() {
                pi_maps.push(Vec::new());
                pi_sizes.push(0);
            } else {
                let ccards = c.vars.iter().map(|&v| jg.cards[v]).collect::<Vec<_>>();
                pi_maps.push(sub_index_map(&c.vars, &ccards, &c.pi, &jg.cards));
                pi_sizes.push(c.pi.iter().map(|&v| jg.cards[v]).product());
            }
        }
        JgEngine {
            jg,
            sched,
            sep_maps,
            incoming,
            pi_maps,
            pi_sizes,
            sep_sizes,
        }
    }

    /// Cluster log-belief: potential plus all incoming messages, aligned.
    fn belief(&self, msgs: &[Vec<f64>], k: usize) -> Vec<f64> {
        let mut b = self.jg.clusters[k].logpot.clone();
        for &id in &self.incoming[k] {
            // id points into k; its separator map is defined on the source
            // cluster, so build the aligned map on k instead
            let e = id / 2;
            let edge = &self.jg.edges[e];
            let ccards = self.jg.cluster_cards(k);
            let map = sub_index_map(&self.jg.clusters[k].vars, &ccards, &edge.sep, &self.jg.cards);
            for (slot, &s) in b.iter_mut().zip(&map) {
                *slot = add_logpot(*slot, msgs[id][s]);
            }
        }
        b
    }

    fn message(&self, msgs: &[Vec<f64>], e: usize, fwd: bool, sum_only: bool) -> Vec<f64> {
        let edge = &self.jg.edges[e];
        let (src, _dst, id, rev_id) = if fwd {
            (edge.k, edge.l, 2 * e, 2 * e + 1)
        } else {
            (edge.l, edge.k, 2 * e + 1, 2 * e)
        };
        let csize = self.jg.clusters[src].logpot.len();
        // product of potential and incoming messages excluding the reverse
        let mut t = self.jg.clusters[src].logpot.clone();
        for &in_id in &self.incoming[src] {
            if in_id == rev_id {
                continue;
            }
            let ein = in_id / 2;
            let edge_in = &self.jg.edges[ein];
            let ccards = self.jg.cluster_cards(src);
            let map = sub_index_map(&self.jg.clusters[src].vars, &ccards, &edge_in.sep, &self.jg.cards);
            for (slot, &sep_idx) in t.iter_mut().zip(&map) {
                *slot = add_logpot(*slot, msgs[in_id][sep_idx]);
            }
        }
        // optional argmax restriction over the cluster's partition cell
        let allowed: Option<(Vec<bool>, &Vec<usize>)> = if !sum_only && self.jg.is_max_cluster(src) {
            let b = self.belief(msgs, src);
            let pi_map = &self.pi_maps[src];
            let mut proj = vec![f64::NEG_INFINITY; self.pi_sizes[src]];
            for (ci, &p) in pi_map.iter().enumerate() {
                proj[p] = crate::logsum::logsumexp2(proj[p], b[ci]);
            }
            let set = crate::mp::argmax_set(&proj, ARGMAX_TIE_TOL);
            let mut ok = vec![false; self.pi_sizes[src]];
            for s in set {
                ok[s] = true;
            }
            Some((ok, pi_map))
        } else {
            None
        };
        let sep_map = &self.sep_maps[id];
        let mut out = vec![f64::NEG_INFINITY; self.sep_sizes[id]];
        for ci in 0..csize {
            if let Some((ok, pi_map)) = &allowed {
                if !ok[pi_map[ci]] {
                    continue;
                }
            }
            let v = t[ci];
            if v == f64::NEG_INFINITY {
                continue;
            }
            let s = sep_map[ci];
            out[s] = crate::logsum::logsumexp2(out[s], v);
        }
        max_normalize(&mut out);
        out
    }
}

fn drive_sweeps(
    engine: &JgEngine<'_>,
    msgs: &mut [Vec<f64>],
    iters: usize,
    damped_iters: usize,
    damping: f64,
    tol: f64,
    sum_only: bool,
) -> (usize, bool, f64) {
    let total = iters + damped_iters;
    let mut delta = f64::INFINITY;
    for it in 0..total {
        let gamma = if it >= iters { damping } else { 0.0 };
        let mut worst = 0.0f64;
        for &(e, fwd) in &engine.sched {
            let id = 2 * e + if fwd { 0 } else { 1 };
            let mut new = engine.message(msgs, e, fwd, sum_only);
            if gamma > 0.0 {
                for (v, &o) in new.iter_mut().zip(&msgs[id]) {
                    *v = if *v == f64::NEG_INFINITY || o == f64::NEG_INFINITY {
                        f64::NEG_INFINITY
                    } else {
                        (1.0 - gamma) * *v + gamma * o
                    };
                }
                max_normalize(&mut new);
            }
            for (&a, &b) in new.iter().zip(&msgs[id]) {
                let d = if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
                    0.0
                } else {
                    (a - b).abs()
                };
                worst = worst.max(d);
            }
            msgs[id] = new;
        }
        delta = worst;
        if worst <= tol {
            return (it + 1, true, delta);
        }
    }
    (total, false, delta)
}

/// Mixed-product junction-graph BP: optional sum-product warm start, then
/// round-robin mixed messages with the standard two-phase drive; decode per
/// max cluster.
pub fn run_mixed_jgbp(jg: &JunctionGraph, opts: &SolverOptions) -> Result<SolveReport> {
    let start = Instant::now();
    let engine = JgEngine::new(jg);
    let mut msgs: Vec<Vec<f64>> = (0..jg.edges.len() * 2)
        .map(|id| vec![0.0; engine.sep_sizes[id]])
        .collect();
    if opts.use_sum_product_init {
        drive_sweeps(&engine, &mut msgs, opts.max_iters, 0, 0.0, opts.tol, true);
    }
    let (iterations, converged, delta) = drive_sweeps(
        &engine,
        &mut msgs,
        opts.max_iters,
        opts.extra_damped_iters,
        opts.damping,
        opts.tol,
        false,
    );
    // decode each max cluster from its partition-cell projection
    let mut decode: Vec<(usize, usize)> = Vec::new();
    for k in 0..jg.clusters.len() {
        if !jg.is_max_cluster(k) {
            continue;
        }
        let b = engine.belief(&msgs, k);
        let pi = &jg.clusters[k].pi;
        let mut proj = vec![f64::NEG_INFINITY; engine.pi_sizes[k]];
        for (ci, &p) in engine.pi_maps[k].iter().enumerate() {
            proj[p] = crate::logsum::logsumexp2(proj[p], b[ci]);
        }
        let mut best = 0;
        for (s, &v) in proj.iter().enumerate() {
            if v > proj[best] {
                best = s;
            }
        }
        // unpack the pi-joint state (last variable fastest)
        let pi_cards: Vec<usize> = pi.iter().map(|&v| jg.cards[v]).collect();
        let cfg = crate::model::config_from_index(&pi_cards, best as u128);
        for (v, s) in pi.iter().zip(cfg) {
            decode.push((*v, s));
        }
    }
    decode.sort_by_key(|&(v, _)| v);
    let mut report = SolveReport::new("mixed-jgbp");
    report.decode = decode;
    report.converged = converged;
    report.iterations = iterations;
    report.residuals = Residuals {
        message_change: delta,
        ..Default::default()
    };
    report.wall_time_ms = start.elapsed().as_secs_f64() * 1000.0;
    Ok(report)
}

/// The cluster objective: `<theta, tau>` plus sum-cluster entropies, max
/// clusters' conditional entropies given their partition cells, minus
/// separator entropies (separator beliefs projected from the lower-indexed
/// endpoint).
pub fn eval_cluster_objective(jg: &JunctionGraph, cluster_beliefs: &[Vec<f64>]) -> f64 {
    let mut value = 0.0;
    for (k, c) in jg.clusters.iter().enumerate() {
        let b = &cluster_beliefs[k];
        value += crate::logsum::dot_logpot(&c.logpot, b);
        let h = entropy(b);
        if c.pi.is_empty() {
            value += h;
        } else {
            let ccards = jg.cluster_cards(k);
            let pi_map = sub_index_map(&c.vars, &ccards, &c.pi, &jg.cards);
            let pi_size: usize = c.pi.iter().map(|&v| jg.cards[v]).product();
            let mut proj = vec![0.0; pi_size];
            for (ci, &p) in pi_map.iter().enumerate() {
                proj[p] += b[ci];
            }
            value += h - entropy(&proj);
        }
    }
    for e in &jg.edges {
        let k = e.k.min(e.l);
        let ccards = jg.cluster_cards(k);
        let map = sub_index_map(&jg.clusters[k].vars, &ccards, &e.sep, &jg.cards);
        let sep_size: usize = e.sep.iter().map(|&v| jg.cards[v]).product();
        let mut proj = vec![0.0; sep_size];
        for (ci, &p) in map.iter().enumerate() {
            proj[p] += cluster_beliefs[k][ci];
        }
        value -= entropy(&proj);
    }
    value
}

/// Normalized cluster beliefs at the current messages (for tests and
/// diagnostics).
pub fn cluster_beliefs(jg: &JunctionGraph, opts: &SolverOptions) -> Result<Vec<Vec<f64>>> {
    let engine = JgEngine::new(jg);
    let mut msgs: Vec<Vec<f64>> = (0..jg.edges.len() * 2)
        .map(|id| vec![0.0; engine.sep_sizes[id]])
        .collect();
    if opts.use_sum_product_init {
        drive_sweeps(&engine, &mut msgs, opts.max_iters, 0, 0.0, opts.tol, true);
    }
    drive_sweeps(
        &engine,
        &mut msgs,
        opts.max_iters,
        opts.extra_damped_iters,
        opts.damping,
        opts.tol,
        false,
    );
    Ok((0..jg.clusters.len())
        .map(|k| to_probabilities(&engine.belief(&msgs, k)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::bethe_weights;
    use crate::model::Role;
    use crate::mp::run_mixed_product;
    use crate::oracle::{self, OracleOptions};
    use crate::testutil::{random_tree_model, weather_model};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn fig4_model(rng: &mut ChaCha8Rng, sigma: f64) -> FactorModel {
        // vars a..f = 0..5; sum = {c, d, e} = {2, 3, 4}; max = {a, b, f}
        let scopes: Vec<Vec<usize>> = vec![
            vec![1, 3, 4],
            vec![1, 2, 4],
            vec![0, 1, 2],
            vec![1, 4, 5],
        ];
        let noise = Normal::new(0.0, sigma).unwrap();
        let factors = scopes
            .into_iter()
            .map(|scope| {
                let size = 1usize << scope.len(); // binary vars
                Factor {
                    table: (0..size).map(|_| noise.sample(rng)).collect(),
                    scope,
                }
            })
            .collect();
        let roles = vec![Role::Max, Role::Max, Role::Sum, Role::Sum, Role::Sum, Role::Max];
        FactorModel::new(vec![2; 6], roles, factors).unwrap()
    }

    #[test]
    fn single_factor_single_cluster() {
        let fm = FactorModel::new(
            vec![2, 2],
            vec![Role::Sum, Role::Max],
            vec![Factor {
                scope: vec![0, 1],
                table: vec![0.1, 0.2, 0.3, 0.4],
            }],
        )
        .unwrap();
        let jg = build_junction_graph(&fm).unwrap();
        assert_eq!(jg.clusters.len(), 1);
        assert!(jg.edges.is_empty());
        assert_eq!(jg.clusters[0].pi, vec![1]);
        assert!(check_running_intersection(&jg));
    }

    #[test]
    fn chain_clusters_are_edges() {
        let n = 5;
        let mut factors: Vec<Factor> = (0..n)
            .map(|i| Factor {
                scope: vec![i],
                table: vec![0.0; 2],
            })
            .collect();
        for i in 0..n - 1 {
            factors.push(Factor {
                scope: vec![i, i + 1],
                table: vec![0.1, 0.2, 0.3, 0.4],
            });
        }
        let fm = FactorModel::new(vec![2; n], vec![Role::Sum; n], factors).unwrap();
        let jg = build_junction_graph(&fm).unwrap();
        let mut got: Vec<Vec<usize>> = jg.clusters.iter().map(|c| c.vars.clone()).collect();
        got.sort();
        let expect: Vec<Vec<usize>> = (0..n - 1).map(|i| vec![i, i + 1]).collect();
        assert_eq!(got, expect);
        assert!(check_running_intersection(&jg));
        let mut seps: Vec<Vec<usize>> = jg.edges.iter().map(|e| e.sep.clone()).collect();
        seps.sort();
        assert_eq!(seps, vec![vec![1], vec![2], vec![3]]);
    }

    #[test]
    fn fig4_structure_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let fm = fig4_model(&mut rng, 1.0);
        let jg = build_junction_graph(&fm).unwrap();
        assert!(check_running_intersection(&jg));
        // pi partitions the max variables
        let mut covered: Vec<usize> = jg.clusters.iter().flat_map(|c| c.pi.clone()).collect();
        covered.sort_unstable();
        assert_eq!(covered, vec![0, 1, 5]);
        for c in &jg.clusters {
            for &v in &c.pi {
                assert!(c.vars.contains(&v));
            }
        }
        // hand trace of the constrained min-fill on this structure:
        // eliminate 3 -> {1,3,4}; 2 -> {0,1,2,4}; 4 -> {0,1,4,5}; the max
        // phase only adds subsumed clusters
        let mut got: Vec<Vec<usize>> = jg.clusters.iter().map(|c| c.vars.clone()).collect();
        got.sort();
        assert_eq!(got, vec![vec![0, 1, 2, 4], vec![0, 1, 4, 5], vec![1, 3, 4]]);
        // energy preservation on all configurations
        for x in crate::model::ConfigIter::new(&fm.cards) {
            let direct = fm.energy(&x).unwrap();
            let mut via_clusters = 0.0;
            for c in &jg.clusters {
                let ccards: Vec<usize> = c.vars.iter().map(|&v| fm.cards[v]).collect();
                let strides = scope_strides(&c.vars, &fm.cards);
                let _ = ccards;
                let idx: usize = c.vars.iter().zip(&strides).map(|(&v, &s)| x[v] * s).sum();
                via_clusters += c.logpot[idx];
            }
            assert!((direct - via_clusters).abs() < 1e-10);
        }
    }

    #[test]
    fn running_intersection_detects_violation() {
        // two clusters sharing a variable but connected with an empty
        // separator violate the property
        let jg = JunctionGraph {
            cards: vec![2, 2, 2],
            roles: vec![Role::Sum; 3],
            clusters: vec![
                Cluster {
                    vars: vec![0, 1],
                    logpot: vec![0.0; 4],
                    pi: vec![],
                },
                Cluster {
                    vars: vec![1, 2],
                    logpot: vec![0.0; 4],
                    pi: vec![],
                },
            ],
            edges: vec![JgEdge {
                k: 0,
                l: 1,
                sep: vec![],
            }],
        };
        assert!(!check_running_intersection(&jg));
    }

    #[test]
    fn random_models_satisfy_running_intersection() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.random_range(4..9);
            let nf = rng.random_range(2..6);
            let noise = Normal::new(0.0, 1.0).unwrap();
            let mut factors = Vec::new();
            for _ in 0..nf {
                let arity = rng.random_range(1..4.min(n));
                let mut scope: Vec<usize> = Vec::new();
                while scope.len() < arity {
                    let v = rng.random_range(0..n);
                    if !scope.contains(&v) {
                        scope.push(v);
                    }
                }
                let size = 1usize << scope.len();
                factors.push(Factor {
                    table: (0..size).map(|_| noise.sample(&mut rng)).collect(),
                    scope,
                });
            }
            // every variable gets a unary factor so all appear
            for v in 0..n {
                factors.push(Factor {
                    scope: vec![v],
                    table: vec![0.0; 2],
                });
            }
            let roles: Vec<Role> = (0..n)
                .map(|i| if i % 2 == 0 { Role::Sum } else { Role::Max })
                .collect();
            let fm = FactorModel::new(vec![2; n], roles, factors).unwrap();
            let jg = build_junction_graph(&fm).unwrap();
            assert!(check_running_intersection(&jg));
        }
    }

    #[test]
    fn jgbp_matches_mixed_product_on_weather() {
        let m = weather_model();
        let fm = FactorModel::from_pairwise(&m);
        let jg = build_junction_graph(&fm).unwrap();
        let report = run_mixed_jgbp(&jg, &SolverOptions::deterministic()).unwrap();
        assert_eq!(report.decode, vec![(1, 1)]);
        let w = bethe_weights(&m, 0.0);
        let mp = run_mixed_product(&m, &w, &SolverOptions::deterministic()).unwrap();
        assert_eq!(report.decode, mp.decode);
    }

    #[test]
    fn junction_tree_beliefs_exact_on_sum_trees() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let oracle_opts = OracleOptions::default();
        for _ in 0..5 {
            let m = random_tree_model(&mut rng, 6, 2, 1.0, &[Role::Sum]);
            let fm = FactorModel::from_pairwise(&m);
            let jg = build_junction_graph(&fm).unwrap();
            let beliefs = cluster_beliefs(&jg, &SolverOptions::deterministic()).unwrap();
            let (node, _) = oracle::marginals_exact(&m, &oracle_opts).unwrap();
            // project each cluster belief onto each member variable
            for (k, c) in jg.clusters.iter().enumerate() {
                let ccards = jg.cluster_cards(k);
                for (pos, &v) in c.vars.iter().enumerate() {
                    let mut proj = vec![0.0; m.card(v)];
                    for (idx, cfg) in crate::model::ConfigIter::new(&ccards).enumerate() {
                        proj[cfg[pos]] += beliefs[k][idx];
                    }
                    for (a, b) in proj.iter().zip(&node[v]) {
                        assert!((a - b).abs() < 1e-7, "cluster {} var {}: {} vs {}", k, v, a, b);
                    }
                }
            }
        }
    }

    #[test]
    fn fig4_decode_is_hamming1_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let cap = 1 << 20;
        for _ in 0..10 {
            let fm = fig4_model(&mut rng, 1.0);
            let jg = build_junction_graph(&fm).unwrap();
            let opts = SolverOptions {
                num_random_inits: 0,
                use_sum_product_init: true,
                ..Default::default()
            };
            let report = run_mixed_jgbp(&jg, &opts).unwrap();
            if !report.converged {
                continue;
            }
            let xb = report.decode_states();
            let q = fm.q_value(&xb, cap).unwrap();
            let b = fm.max_nodes();
            for (pos, &v) in b.iter().enumerate() {
                for s in 0..fm.cards[v] {
                    if s == xb[pos] {
                        continue;
                    }
                    let mut alt = xb.clone();
                    alt[pos] = s;
                    let q_alt = fm.q_value(&alt, cap).unwrap();
                    assert!(
                        q_alt <= q + 1e-9,
                        "single flip improved the objective: {} -> {}",
                        q,
                        q_alt
                    );
                }
            }
        }
    }

    #[test]
    fn jgbp_agrees_with_pairwise_mixed_product_on_trees() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut agree = 0;
        let total = 100;
        let opts = SolverOptions {
            num_random_inits: 0,
            use_sum_product_init: true,
            ..Default::default()
        };
        for _ in 0..total {
            let m = random_tree_model(&mut rng, 6, 2, 1.0, &[Role::Sum, Role::Max]);
            let fm = FactorModel::from_pairwise(&m);
            let jg = build_junction_graph(&fm).unwrap();
            let a = run_mixed_jgbp(&jg, &opts).unwrap();
            let w = bethe_weights(&m, 0.0);
            let b = run_mixed_product(&m, &w, &opts).unwrap();
            if a.decode == b.decode {
                agree += 1;
            }
        }
        assert!(agree >= 95, "only {}/{} decodes agree", agree, total);
    }

    #[test]
    fn cluster_objective_matches_exact_optimum_on_ab_trees() {
        // point-mass-on-max, exact-on-sum cluster beliefs of a junction tree
        // evaluate to the exact mixed optimum
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let oracle_opts = OracleOptions::default();
        let mut checked = 0;
        for _ in 0..15 {
            let m = random_tree_model(&mut rng, 5, 2, 1.0, &[Role::Max, Role::Sum, Role::Sum]);
            if !m.is_ab_tree() {
                continue;
            }
            let (xb, v) = oracle::marginal_map_exact(&m, &oracle_opts).unwrap();
            let fm = FactorModel::from_pairwise(&m);
            let jg = build_junction_graph(&fm).unwrap();
            // exact cluster beliefs of the clamped distribution
            let b_nodes = m.max_nodes();
            let q = oracle::q_value(&m, &xb, &oracle_opts).unwrap();
            let beliefs: Vec<Vec<f64>> = jg
                .clusters
                .iter()
                .map(|c| {
                    let ccards: Vec<usize> = c.vars.iter().map(|&v| m.card(v)).collect();
                    let mut table = vec![0.0; ccards.iter().product()];
                    for x in crate::model::ConfigIter::new(m.cards()) {
                        if !b_nodes.iter().enumerate().all(|(k, &bv)| x[bv] == xb[k]) {
                            continue;
                        }
                        let t = m.energy(&x).unwrap();
                        if t == f64::NEG_INFINITY {
                            continue;
                        }
                        let p = (t - q).exp();
                        let mut idx = 0;
                        for (pos, &cv) in c.vars.iter().enumerate() {
                            let _ = pos;
                            idx = idx * m.card(cv) + x[cv];
                        }
                        table[idx] += p;
                    }
                    table
                })
                .collect();
            let obj = eval_cluster_objective(&jg, &beliefs);
            assert!((obj - v).abs() < 1e-8, "{} vs {}", obj, v);
            checked += 1;
        }
        assert!(checked >= 5);
    }

    #[test]
    fn clamp_slices_tables() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let fm = fig4_model(&mut rng, 1.0);
        let clamped = fm.clamp(&[(2, 1)]).unwrap();
        assert_eq!(clamped.cards[2], 1);
        // energies agree after substituting the clamped state
        for x in crate::model::ConfigIter::new(&clamped.cards) {
            let mut orig = x.clone();
            orig[2] = 1;
            assert!((clamped.energy(&x).unwrap() - fm.energy(&orig).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn pairwise_roundtrip_through_factor_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let m = crate::testutil::random_model(&mut rng, 5, 3, 1.0, &[Role::Sum, Role::Max]);
        let fm = FactorModel::from_pairwise(&m);
        let m2 = fm.to_pairwise().unwrap();
        for x in crate::model::ConfigIter::new(m.cards()) {
            assert!((m.energy(&x).unwrap() - m2.energy(&x).unwrap()).abs() < 1e-12);
        }
    }
}
