//! Exact inference oracles.
//!
//! Everything here is ground truth: full enumeration under an explicit state
//! cap, or single-pass elimination when the summed subgraph is a forest.
//! Exceeding a cap is a typed error, never a silent approximation. All
//! accumulation uses log-sum-exp with a fixed reduction order per call, so
//! results are deterministic in both sequential and parallel modes.

use crate::error::{Error, Result};
use crate::logsum::{logsumexp, StreamingLse};
use crate::model::{config_from_index, ConfigIter, PairwiseModel, Role, UnionFind};
use crate::par::{map_chunked, Parallelism};

/// Caps and execution mode for exact computations.
#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    /// Maximum number of states enumerated by any single scan.
    pub max_states: u64,
    pub parallelism: Parallelism,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            max_states: 1 << 26,
            parallelism: Parallelism::default(),
        }
    }
}

impl OracleOptions {
    pub fn with_cap(max_states: u64) -> Self {
        OracleOptions {
            max_states,
            ..Default::default()
        }
    }

    fn check(&self, required: u128) -> Result<()> {
        if required > self.max_states as u128 {
            Err(Error::ResourceLimit {
                required,
                cap: self.max_states,
            })
        } else {
            Ok(())
        }
    }
}

/// Full exact summary of a small model.
#[derive(Debug, Clone)]
pub struct ExactResult {
    pub log_partition: f64,
    pub node_marginals: Vec<Vec<f64>>,
    pub edge_marginals: Vec<Vec<f64>>,
    pub map_config: Vec<usize>,
    pub map_value: f64,
    /// Optimal max-node configuration, parallel to `model.max_nodes()`.
    pub mmap_config: Vec<usize>,
    pub mmap_value: f64,
}

/// Precomputed evaluator for `Q(x_B) = log sum_{x_A} exp(theta(x))`.
///
/// Clamping the max nodes reduces the model to its sum subgraph with
/// adjusted node potentials; the sum runs by forest elimination when
/// possible and by capped enumeration otherwise.
pub struct QEvaluator<'a> {
    model: &'a PairwiseModel,
    a_nodes: Vec<usize>,
    b_nodes: Vec<usize>,
    /// Per A position: slot of the variable in `a_nodes`.
    a_pos: Vec<usize>,
    /// Cross edges per A position: `(edge, b position)`.
    cross: Vec<Vec<(usize, usize)>>,
    /// Edges internal to the sum subgraph.
    ea_edges: Vec<usize>,
    /// Edges internal to the max subgraph.
    eb_edges: Vec<usize>,
    /// Bottom-up elimination schedule when the sum subgraph is a forest:
    /// `(a position, parent a position, connecting edge)`, children first;
    /// parent == usize::MAX marks a root.
    forest_order: Option<Vec<(usize, usize, usize)>>,
    pot_offsets: Vec<usize>,
    pot_len: usize,
}

/// Reusable scratch space for [`QEvaluator::evaluate_with`].
pub struct QScratch {
    pots: Vec<f64>,
    msg: Vec<f64>,
}

impl<'a> QEvaluator<'a> {
    pub fn new(model: &'a PairwiseModel) -> Self {
        let n = model.num_vars();
        let a_nodes = model.sum_nodes();
        let b_nodes = model.max_nodes();
        let mut a_pos = vec![usize::MAX; n];
        for (k, &v) in a_nodes.iter().enumerate() {
            a_pos[v] = k;
        }
        let mut b_pos = vec![usize::MAX; n];
        for (k, &v) in b_nodes.iter().enumerate() {
            b_pos[v] = k;
        }
        let mut cross = vec![Vec::new(); a_nodes.len()];
        let mut ea_edges = Vec::new();
        let mut eb_edges = Vec::new();
        for (e, edge) in model.edges().iter().enumerate() {
            match (model.role(edge.i), model.role(edge.j)) {
                (Role::Sum, Role::Sum) => ea_edges.push(e),
                (Role::Max, Role::Max) => eb_edges.push(e),
                (Role::Sum, Role::Max) => cross[a_pos[edge.i]].push((e, b_pos[edge.j])),
                (Role::Max, Role::Sum) => cross[a_pos[edge.j]].push((e, b_pos[edge.i])),
            }
        }
        // forest detection and bottom-up schedule over the sum subgraph
        let mut uf = UnionFind::new(a_nodes.len());
        let mut forest = true;
        for &e in &ea_edges {
            let edge = &model.edges()[e];
            if !uf.union(a_pos[edge.i], a_pos[edge.j]) {
                forest = false;
                break;
            }
        }
        let forest_order = if forest {
            let mut adj = vec![Vec::new(); a_nodes.len()];
            for &e in &ea_edges {
                let edge = &model.edges()[e];
                adj[a_pos[edge.i]].push((e, a_pos[edge.j]));
                adj[a_pos[edge.j]].push((e, a_pos[edge.i]));
            }
            let mut order = Vec::with_capacity(a_nodes.len());
            let mut seen = vec![false; a_nodes.len()];
            for root in 0..a_nodes.len() {
                if seen[root] {
                    continue;
                }
                seen[root] = true;
                let mut bfs = vec![(root, usize::MAX, usize::MAX)];
                let mut head = 0;
                while head < bfs.len() {
                    let (v, _, _) = bfs[head];
                    head += 1;
                    for &(e, w) in &adj[v] {
                        if !seen[w] {
                            seen[w] = true;
                            bfs.push((w, v, e));
                        }
                    }
                }
                bfs.reverse();
                order.extend(bfs);
            }
            Some(order)
        } else {
            None
        };
        let mut pot_offsets = Vec::with_capacity(a_nodes.len() + 1);
        let mut off = 0;
        for &v in &a_nodes {
            pot_offsets.push(off);
            off += model.card(v);
        }
        pot_offsets.push(off);
        QEvaluator {
            model,
            a_nodes,
            b_nodes,
            a_pos,
            cross,
            ea_edges,
            eb_edges,
            forest_order,
            pot_offsets,
            pot_len: off,
        }
    }

    pub fn scratch(&self) -> QScratch {
        let max_card = self
            .a_nodes
            .iter()
            .map(|&v| self.model.card(v))
            .max()
            .unwrap_or(1);
        QScratch {
            pots: vec![0.0; self.pot_len],
            msg: vec![0.0; max_card],
        }
    }

    pub fn max_nodes(&self) -> &[usize] {
        &self.b_nodes
    }

    /// Whether `evaluate` uses forest elimination (no enumeration cap).
    pub fn is_forest(&self) -> bool {
        self.forest_order.is_some()
    }

    /// Number of max-node joint states.
    pub fn num_b_states(&self) -> u128 {
        self.b_nodes.iter().map(|&v| self.model.card(v) as u128).product()
    }

    pub fn evaluate(&self, xb: &[usize], opts: &OracleOptions) -> Result<f64> {
        let mut scratch = self.scratch();
        self.evaluate_with(xb, opts, &mut scratch)
    }

    pub fn evaluate_with(&self, xb: &[usize], opts: &OracleOptions, s: &mut QScratch) -> Result<f64> {
        if xb.len() != self.b_nodes.len() {
            return Err(Error::InvalidConfiguration(format!(
                "max assignment has {} entries, expected {}",
                xb.len(),
                self.b_nodes.len()
            )));
        }
        for (k, (&x, &v)) in xb.iter().zip(&self.b_nodes).enumerate() {
            if x >= self.model.card(v) {
                return Err(Error::InvalidConfiguration(format!(
                    "state {} out of range for max node {} (position {})",
                    x, v, k
                )));
            }
        }
        // constant part: clamped node and max-max edge terms
        let mut constant = 0.0;
        for (k, &v) in self.b_nodes.iter().enumerate() {
            let t = self.model.node_logpot(v)[xb[k]];
            if t == f64::NEG_INFINITY {
                return Ok(f64::NEG_INFINITY);
            }
            constant += t;
        }
        for &e in &self.eb_edges {
            let edge = &self.model.edges()[e];
            let (pi, pj) = (self.b_pos_of(edge.i), self.b_pos_of(edge.j));
            let t = edge.value(self.model.card(edge.j), xb[pi], xb[pj]);
            if t == f64::NEG_INFINITY {
                return Ok(f64::NEG_INFINITY);
            }
            constant += t;
        }
        if self.a_nodes.is_empty() {
            return Ok(constant);
        }
        // reduced node potentials on the sum subgraph
        for (k, &v) in self.a_nodes.iter().enumerate() {
            let off = self.pot_offsets[k];
            let card = self.model.card(v);
            s.pots[off..off + card].copy_from_slice(self.model.node_logpot(v));
            for &(e, bp) in &self.cross[k] {
                for xa in 0..card {
                    let t = self.model.edge_logpot(e, v, xa, xb[bp]);
                    let slot = &mut s.pots[off + xa];
                    *slot = if t == f64::NEG_INFINITY || *slot == f64::NEG_INFINITY {
                        f64::NEG_INFINITY
                    } else {
                        *slot + t
                    };
                }
            }
        }
        if let Some(order) = &self.forest_order {
            for &(v, parent, e) in order {
                let off_v = self.pot_offsets[v];
                let card_v = self.model.card(self.a_nodes[v]);
                if parent == usize::MAX {
                    let total = logsumexp(&s.pots[off_v..off_v + card_v]);
                    if total == f64::NEG_INFINITY {
                        return Ok(f64::NEG_INFINITY);
                    }
                    constant += total;
                } else {
                    let off_p = self.pot_offsets[parent];
                    let card_p = self.model.card(self.a_nodes[parent]);
                    let var_v = self.a_nodes[v];
                    for xp in 0..card_p {
                        let mut acc = StreamingLse::new();
                        for xv in 0..card_v {
                            let pot = s.pots[off_v + xv];
                            if pot == f64::NEG_INFINITY {
                                continue;
                            }
                            let t = self.model.edge_logpot(e, var_v, xv, xp);
                            if t == f64::NEG_INFINITY {
                                continue;
                            }
                            acc.push(pot + t);
                        }
                        s.msg[xp] = acc.value();
                    }
                    for xp in 0..card_p {
                        let slot = &mut s.pots[off_p + xp];
                        *slot = if s.msg[xp] == f64::NEG_INFINITY || *slot == f64::NEG_INFINITY {
                            f64::NEG_INFINITY
                        } else {
                            *slot + s.msg[xp]
                        };
                    }
                }
            }
            Ok(constant)
        } else {
            let cards: Vec<usize> = self.a_nodes.iter().map(|&v| self.model.card(v)).collect();
            let states: u128 = cards.iter().map(|&c| c as u128).product();
            opts.check(states)?;
            let mut acc = StreamingLse::new();
            for xa in ConfigIter::new(&cards) {
                let mut total = 0.0;
                for (k, &x) in xa.iter().enumerate() {
                    let t = s.pots[self.pot_offsets[k] + x];
                    if t == f64::NEG_INFINITY {
                        total = f64::NEG_INFINITY;
                        break;
                    }
                    total += t;
                }
                if total == f64::NEG_INFINITY {
                    continue;
                }
                for &e in &self.ea_edges {
                    let edge = &self.model.edges()[e];
                    let t = edge.value(
                        self.model.card(edge.j),
                        xa[self.a_pos[edge.i]],
                        xa[self.a_pos[edge.j]],
                    );
                    if t == f64::NEG_INFINITY {
                        total = f64::NEG_INFINITY;
                        break;
                    }
                    total += t;
                }
                acc.push(total);
            }
            let v = acc.value();
            Ok(if v == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                constant + v
            })
        }
    }

    fn b_pos_of(&self, var: usize) -> usize {
        self.b_nodes.iter().position(|&v| v == var).expect("max node")
    }
}

/// `Q(x_B)` for a single max-node assignment.
pub fn q_value(model: &PairwiseModel, xb: &[usize], opts: &OracleOptions) -> Result<f64> {
    QEvaluator::new(model).evaluate(xb, opts)
}

/// Scan result carrying the best and runner-up values.
#[derive(Debug, Clone)]
struct ScanBest {
    index: u128,
    value: f64,
    runner_up: f64,
}

fn merge_best(mut acc: ScanBest, other: ScanBest) -> ScanBest {
    // earlier chunks come first, so strict comparisons keep the
    // lexicographically smallest argmax
    if other.value > acc.value {
        acc.runner_up = acc.value.max(other.runner_up);
        acc.value = other.value;
        acc.index = other.index;
    } else {
        acc.runner_up = acc.runner_up.max(other.value);
    }
    acc
}

/// Globally optimal max-node assignment by exhaustive scoring.
///
/// Ties break to the lexicographically smallest configuration. Also returns
/// the best value achieved by any other configuration (`-inf` when the scan
/// had a single candidate), which callers use to detect unique optima.
pub fn marginal_map_exact_with_gap(
    model: &PairwiseModel,
    opts: &OracleOptions,
) -> Result<(Vec<usize>, f64, f64)> {
    let qe = QEvaluator::new(model);
    let b_cards: Vec<usize> = qe.max_nodes().iter().map(|&v| model.card(v)).collect();
    let total = qe.num_b_states();
    if qe.max_nodes().is_empty() {
        let v = qe.evaluate(&[], opts)?;
        return Ok((Vec::new(), v, f64::NEG_INFINITY));
    }
    opts.check(total)?;
    let scan = |s: u128, e: u128| -> Result<ScanBest> {
        let mut scratch = qe.scratch();
        let mut best = ScanBest {
            index: s,
            value: f64::NEG_INFINITY,
            runner_up: f64::NEG_INFINITY,
        };
        for idx in s..e {
            let xb = config_from_index(&b_cards, idx);
            let v = qe.evaluate_with(&xb, opts, &mut scratch)?;
            if v > best.value {
                best.runner_up = best.value;
                best.value = v;
                best.index = idx;
            } else if v > best.runner_up {
                best.runner_up = v;
            }
        }
        Ok(best)
    };
    let parts = map_chunked(
        opts.parallelism,
        total,
        4096,
        scan,
        Vec::new(),
        |mut acc: Vec<Result<ScanBest>>, r| {
            acc.push(r);
            acc
        },
    );
    let mut best: Option<ScanBest> = None;
    for part in parts {
        let part = part?;
        best = Some(match best {
            None => part,
            Some(b) => merge_best(b, part),
        });
    }
    let best = best.expect("at least one candidate");
    Ok((
        config_from_index(&b_cards, best.index),
        best.value,
        best.runner_up,
    ))
}

/// Globally optimal max-node assignment (see [`marginal_map_exact_with_gap`]).
pub fn marginal_map_exact(model: &PairwiseModel, opts: &OracleOptions) -> Result<(Vec<usize>, f64)> {
    let (cfg, v, _) = marginal_map_exact_with_gap(model, opts)?;
    Ok((cfg, v))
}

/// Log-partition function by full enumeration under the cap.
pub fn log_partition_exact(model: &PairwiseModel, opts: &OracleOptions) -> Result<f64> {
    let total = model.num_joint_states();
    opts.check(total)?;
    let cards = model.cards().to_vec();
    let scan = |s: u128, e: u128| {
        let mut acc = StreamingLse::new();
        for idx in s..e {
            let x = config_from_index(&cards, idx);
            acc.push(model.energy(&x).expect("in-range enumeration"));
        }
        acc
    };
    let total_lse = map_chunked(
        opts.parallelism,
        total,
        8192,
        scan,
        StreamingLse::new(),
        |mut acc, part| {
            acc.merge(part);
            acc
        },
    );
    Ok(total_lse.value())
}

/// Joint MAP configuration and value; also returns the runner-up value.
pub fn map_exact_with_gap(model: &PairwiseModel, opts: &OracleOptions) -> Result<(Vec<usize>, f64, f64)> {
    let total = model.num_joint_states();
    opts.check(total)?;
    let cards = model.cards().to_vec();
    let scan = |s: u128, e: u128| {
        let mut best = ScanBest {
            index: s,
            value: f64::NEG_INFINITY,
            runner_up: f64::NEG_INFINITY,
        };
        for idx in s..e {
            let x = config_from_index(&cards, idx);
            let v = model.energy(&x).expect("in-range enumeration");
            if v > best.value {
                best.runner_up = best.value;
                best.value = v;
                best.index = idx;
            } else if v > best.runner_up {
                best.runner_up = v;
            }
        }
        best
    };
    let folded = map_chunked(
        opts.parallelism,
        total,
        8192,
        scan,
        None,
        |acc: Option<ScanBest>, part| {
            Some(match acc {
                None => part,
                Some(b) => merge_best(b, part),
            })
        },
    );
    let best = folded.expect("nonempty state space");
    Ok((config_from_index(&cards, best.index), best.value, best.runner_up))
}

/// Joint MAP configuration and value.
pub fn map_exact(model: &PairwiseModel, opts: &OracleOptions) -> Result<(Vec<usize>, f64)> {
    let (cfg, v, _) = map_exact_with_gap(model, opts)?;
    Ok((cfg, v))
}

/// Exact node and edge marginals by full enumeration under the cap.
pub fn marginals_exact(
    model: &PairwiseModel,
    opts: &OracleOptions,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let phi = log_partition_exact(model, opts)?;
    let mut node: Vec<Vec<f64>> = model.cards().iter().map(|&c| vec![0.0; c]).collect();
    let mut edge: Vec<Vec<f64>> = model
        .edges()
        .iter()
        .map(|e| vec![0.0; model.card(e.i) * model.card(e.j)])
        .collect();
    for x in ConfigIter::new(model.cards()) {
        let p = (model.energy(&x).expect("in-range enumeration") - phi).exp();
        if p == 0.0 {
            continue;
        }
        for (i, &xi) in x.iter().enumerate() {
            node[i][xi] += p;
        }
        for (e, ed) in model.edges().iter().enumerate() {
            edge[e][x[ed.i] * model.card(ed.j) + x[ed.j]] += p;
        }
    }
    Ok((node, edge))
}

/// Smoothed marginal-MAP value `eps * log sum_{x_B} exp(Q(x_B)/eps)`.
pub fn smoothed_phi(model: &PairwiseModel, eps: f64, opts: &OracleOptions) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "smoothing temperature must be positive, got {}",
            eps
        )));
    }
    let qe = QEvaluator::new(model);
    let b_cards: Vec<usize> = qe.max_nodes().iter().map(|&v| model.card(v)).collect();
    let total = qe.num_b_states();
    if qe.max_nodes().is_empty() {
        return qe.evaluate(&[], opts);
    }
    opts.check(total)?;
    let scan = |s: u128, e: u128| -> Result<StreamingLse> {
        let mut scratch = qe.scratch();
        let mut acc = StreamingLse::new();
        for idx in s..e {
            let xb = config_from_index(&b_cards, idx);
            let q = qe.evaluate_with(&xb, opts, &mut scratch)?;
            if q != f64::NEG_INFINITY {
                acc.push(q / eps);
            }
        }
        Ok(acc)
    };
    let parts = map_chunked(
        opts.parallelism,
        total,
        4096,
        scan,
        Vec::new(),
        |mut acc: Vec<Result<StreamingLse>>, r| {
            acc.push(r);
            acc
        },
    );
    let mut acc = StreamingLse::new();
    for p in parts {
        acc.merge(p?);
    }
    Ok(eps * acc.value())
}

/// Exact conditional entropy of the sum nodes given the max nodes, computed
/// directly and cross-checked against the chain rule `H - H_B` to 1e-10.
pub fn conditional_entropy_exact(model: &PairwiseModel, opts: &OracleOptions) -> Result<f64> {
    let total = model.num_joint_states();
    opts.check(total)?;
    let qe = QEvaluator::new(model);
    let b_cards: Vec<usize> = qe.max_nodes().iter().map(|&v| model.card(v)).collect();
    let nb = qe.num_b_states();
    opts.check(nb)?;
    let phi = log_partition_exact(model, opts)?;
    // Q per max configuration, indexed like ConfigIter over b_cards
    let mut q_vals = Vec::with_capacity(nb as usize);
    let mut scratch = qe.scratch();
    for xb in ConfigIter::new(&b_cards) {
        q_vals.push(qe.evaluate_with(&xb, opts, &mut scratch)?);
    }
    let mut h_joint = 0.0;
    let mut h_cond_direct = 0.0;
    let b_nodes = qe.max_nodes().to_vec();
    let b_strides = {
        let mut s = vec![1u128; b_cards.len()];
        for k in (0..b_cards.len().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * b_cards[k + 1] as u128;
        }
        s
    };
    for x in ConfigIter::new(model.cards()) {
        let t = model.energy(&x).expect("in-range enumeration");
        if t == f64::NEG_INFINITY {
            continue;
        }
        let p = (t - phi).exp();
        if p == 0.0 {
            continue;
        }
        let mut b_idx = 0u128;
        for (k, &v) in b_nodes.iter().enumerate() {
            b_idx += x[v] as u128 * b_strides[k];
        }
        let q = q_vals[b_idx as usize];
        h_joint -= p * (t - phi);
        h_cond_direct -= p * (t - q);
    }
    let mut h_b = 0.0;
    for &q in &q_vals {
        if q == f64::NEG_INFINITY {
            continue;
        }
        let pb = (q - phi).exp();
        if pb > 0.0 {
            h_b -= pb * (q - phi);
        }
    }
    let chain = h_joint - h_b;
    if (chain - h_cond_direct).abs() > 1e-10 {
        return Err(Error::Inconsistent {
            residual: (chain - h_cond_direct).abs(),
        });
    }
    Ok(h_cond_direct)
}

/// Conditional entropy `H(A|B)` of an explicit normalized joint table
/// (row-major, last variable fastest).
pub fn conditional_entropy_table(joint: &[f64], cards: &[usize], is_max: &[bool]) -> Result<f64> {
    let total: usize = cards.iter().product();
    if joint.len() != total || is_max.len() != cards.len() {
        return Err(Error::Structural("joint table shape mismatch".into()));
    }
    let sum: f64 = joint.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || joint.iter().any(|&p| p < 0.0) {
        return Err(Error::InvalidArgument("joint table must be a normalized distribution".into()));
    }
    let b_cards: Vec<usize> = cards
        .iter()
        .zip(is_max)
        .filter(|(_, &m)| m)
        .map(|(&c, _)| c)
        .collect();
    let nb: usize = b_cards.iter().product();
    let mut pb = vec![0.0; nb.max(1)];
    for (x, &p) in ConfigIter::new(cards).zip(joint.iter()) {
        if p == 0.0 {
            continue;
        }
        let mut b_idx = 0;
        for (k, &m) in is_max.iter().enumerate() {
            if m {
                b_idx = b_idx * cards[k] + x[k];
            }
        }
        pb[b_idx] += p;
    }
    let mut h = 0.0;
    for (x, &p) in ConfigIter::new(cards).zip(joint.iter()) {
        if p <= 0.0 {
            continue;
        }
        let mut b_idx = 0;
        for (k, &m) in is_max.iter().enumerate() {
            if m {
                b_idx = b_idx * cards[k] + x[k];
            }
        }
        h -= p * (p / pb[b_idx]).ln();
    }
    Ok(h)
}

/// Exact node and edge marginals of the distribution with the max nodes
/// clamped to `xb` (max nodes receive point masses).
pub fn clamped_marginals(
    model: &PairwiseModel,
    xb: &[usize],
    opts: &OracleOptions,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let qe = QEvaluator::new(model);
    let b_nodes = qe.max_nodes().to_vec();
    if xb.len() != b_nodes.len() {
        return Err(Error::InvalidConfiguration("clamp length mismatch".into()));
    }
    let a_nodes = model.sum_nodes();
    let a_cards: Vec<usize> = a_nodes.iter().map(|&v| model.card(v)).collect();
    let states: u128 = a_cards.iter().map(|&c| c as u128).product();
    opts.check(states)?;
    let q = qe.evaluate(xb, opts)?;
    if q == f64::NEG_INFINITY {
        return Err(Error::InvalidConfiguration(
            "clamped configuration has zero probability".into(),
        ));
    }
    let mut node: Vec<Vec<f64>> = model.cards().iter().map(|&c| vec![0.0; c]).collect();
    let mut edge: Vec<Vec<f64>> = model
        .edges()
        .iter()
        .map(|e| vec![0.0; model.card(e.i) * model.card(e.j)])
        .collect();
    let mut full = vec![0usize; model.num_vars()];
    for (k, &v) in b_nodes.iter().enumerate() {
        full[v] = xb[k];
    }
    for xa in ConfigIter::new(&a_cards) {
        for (k, &v) in a_nodes.iter().enumerate() {
            full[v] = xa[k];
        }
        let t = model.energy(&full).expect("in-range enumeration");
        if t == f64::NEG_INFINITY {
            continue;
        }
        let p = (t - q).exp();
        for (i, &xi) in full.iter().enumerate() {
            node[i][xi] += p;
        }
        for (e, ed) in model.edges().iter().enumerate() {
            edge[e][full[ed.i] * model.card(ed.j) + full[ed.j]] += p;
        }
    }
    Ok((node, edge))
}

/// Assemble the full exact summary.
pub fn exact_result(model: &PairwiseModel, opts: &OracleOptions) -> Result<ExactResult> {
    let log_partition = log_partition_exact(model, opts)?;
    let (node_marginals, edge_marginals) = marginals_exact(model, opts)?;
    let (map_config, map_value) = map_exact(model, opts)?;
    let (mmap_config, mmap_value) = marginal_map_exact(model, opts)?;
    Ok(ExactResult {
        log_partition,
        node_marginals,
        edge_marginals,
        map_config,
        map_value,
        mmap_config,
        mmap_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Role;
    use crate::testutil::{random_model, random_tree_model, weather_model};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn opts() -> OracleOptions {
        OracleOptions::default()
    }

    #[test]
    fn weather_q_values() {
        let m = weather_model();
        assert!((q_value(&m, &[1], &opts()).unwrap() - (0.6f64).ln()).abs() < 1e-12);
        assert!((q_value(&m, &[0], &opts()).unwrap() - (0.4f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn two_var_q_by_enumeration() {
        // A = {0}, B = {1}, psi_12 = [[3,1],[1,2]], unit node potentials
        let table = vec![(3.0f64).ln(), 0.0, 0.0, (2.0f64).ln()];
        let m = PairwiseModel::new(
            vec![2, 2],
            vec![Role::Sum, Role::Max],
            vec![vec![0.0; 2], vec![0.0; 2]],
            vec![(0, 1)],
            vec![table],
        )
        .unwrap();
        assert!((q_value(&m, &[0], &opts()).unwrap() - (4.0f64).ln()).abs() < 1e-12);
        assert!((q_value(&m, &[1], &opts()).unwrap() - (3.0f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn weather_exact_summary() {
        let m = weather_model();
        let r = exact_result(&m, &opts()).unwrap();
        assert!(r.log_partition.abs() < 1e-12);
        assert_eq!(r.mmap_config, vec![1]);
        assert!((r.mmap_value - (0.6f64).ln()).abs() < 1e-12);
        assert_eq!(r.map_config, vec![1, 0]); // (drive, rainy)
        assert!((r.map_value - (0.35f64).ln()).abs() < 1e-12);
        assert!((r.node_marginals[1][0] - 0.4).abs() < 1e-12);
        assert!((r.node_marginals[1][1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn mmap_degenerate_role_sets() {
        let m = weather_model();
        // all-sum variant: mmap equals the log-partition function
        let all_sum = PairwiseModel::new(
            m.cards().to_vec(),
            vec![Role::Sum, Role::Sum],
            (0..2).map(|i| m.node_logpot(i).to_vec()).collect(),
            m.edges().iter().map(|e| (e.i, e.j)).collect(),
            m.edges().iter().map(|e| e.logpot.clone()).collect(),
        )
        .unwrap();
        let (cfg, v) = marginal_map_exact(&all_sum, &opts()).unwrap();
        assert!(cfg.is_empty());
        assert!((v - log_partition_exact(&all_sum, &opts()).unwrap()).abs() < 1e-12);
        // all-max variant: mmap equals joint MAP
        let all_max = PairwiseModel::new(
            m.cards().to_vec(),
            vec![Role::Max, Role::Max],
            (0..2).map(|i| m.node_logpot(i).to_vec()).collect(),
            m.edges().iter().map(|e| (e.i, e.j)).collect(),
            m.edges().iter().map(|e| e.logpot.clone()).collect(),
        )
        .unwrap();
        let (cfg, v) = marginal_map_exact(&all_max, &opts()).unwrap();
        let (map_cfg, map_v) = map_exact(&all_max, &opts()).unwrap();
        assert_eq!(cfg, map_cfg);
        assert!((v - map_v).abs() < 1e-12);
    }

    #[test]
    fn single_var_partition() {
        let m = PairwiseModel::new(
            vec![2],
            vec![Role::Sum],
            vec![vec![0.0, 0.0]],
            vec![],
            vec![],
        )
        .unwrap();
        assert!((log_partition_exact(&m, &opts()).unwrap() - (2.0f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn smoothed_phi_at_one_is_partition() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let m = random_model(&mut rng, 5, 2, 1.0, &[Role::Sum, Role::Max]);
            let a = smoothed_phi(&m, 1.0, &opts()).unwrap();
            let b = log_partition_exact(&m, &opts()).unwrap();
            assert!((a - b).abs() < 1e-10, "{} vs {}", a, b);
        }
    }

    #[test]
    fn smoothed_phi_weather_limit() {
        let m = weather_model();
        let target = (0.6f64).ln();
        let mut prev = f64::INFINITY;
        for &eps in &[1e-1, 1e-2, 1e-3] {
            let v = smoothed_phi(&m, eps, &opts()).unwrap();
            assert!(v <= prev + 1e-12);
            prev = v;
        }
        assert!((prev - target).abs() < 1e-3);
    }

    #[test]
    fn smoothed_phi_tied_closed_form() {
        // psi_12 = [[2,1],[1,2]] with one max node gives constant Q = ln 3,
        // so the smoothed value is ln 3 + eps ln 2.
        let table = vec![(2.0f64).ln(), 0.0, 0.0, (2.0f64).ln()];
        let m = PairwiseModel::new(
            vec![2, 2],
            vec![Role::Sum, Role::Max],
            vec![vec![0.0; 2], vec![0.0; 2]],
            vec![(0, 1)],
            vec![table],
        )
        .unwrap();
        for &eps in &[1.0, 0.3, 1e-2, 1e-4] {
            let v = smoothed_phi(&m, eps, &opts()).unwrap();
            let expect = (3.0f64).ln() + eps * (2.0f64).ln();
            assert!((v - expect).abs() < 1e-10);
        }
        assert!(smoothed_phi(&m, 0.0, &opts()).is_err());
    }

    #[test]
    fn monotone_smoothing_on_random_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let m = random_model(&mut rng, 5, 3, 1.5, &[Role::Max, Role::Sum]);
            let e1 = smoothed_phi(&m, 0.05, &opts()).unwrap();
            let e2 = smoothed_phi(&m, 0.3, &opts()).unwrap();
            let e3 = smoothed_phi(&m, 1.0, &opts()).unwrap();
            assert!(e1 <= e2 + 1e-10 && e2 <= e3 + 1e-10);
        }
    }

    #[test]
    fn mmap_between_map_and_partition() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..15 {
            let m = random_model(&mut rng, 6, 2, 1.0, &[Role::Sum, Role::Max]);
            let phi = log_partition_exact(&m, &opts()).unwrap();
            let (_, map_v) = map_exact(&m, &opts()).unwrap();
            let (_, mmap_v) = marginal_map_exact(&m, &opts()).unwrap();
            assert!(map_v <= mmap_v + 1e-9);
            assert!(mmap_v <= phi + 1e-9);
        }
    }

    #[test]
    fn tree_elimination_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..20 {
            let m = random_tree_model(&mut rng, 7, 3, 1.0, &[Role::Sum, Role::Sum, Role::Max]);
            let qe = QEvaluator::new(&m);
            assert!(qe.is_forest());
            let b_cards: Vec<usize> = m.max_nodes().iter().map(|&v| m.card(v)).collect();
            for xb in crate::model::ConfigIter::new(&b_cards) {
                let fast = qe.evaluate(&xb, &opts()).unwrap();
                // independent route: log-partition of the clamped slice via
                // direct summation over full configurations
                let mut acc = StreamingLse::new();
                let b_nodes = m.max_nodes();
                for x in crate::model::ConfigIter::new(m.cards()) {
                    if b_nodes.iter().enumerate().all(|(k, &v)| x[v] == xb[k]) {
                        acc.push(m.energy(&x).unwrap());
                    }
                }
                assert!((fast - acc.value()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn duality_value_at_clamped_optimum() {
        // E_tau[theta] + H(A|B) evaluated at the clamped distribution
        // tau(x) = 1(x_B = xb) p(x_A | x_B = xb) equals the marginal-MAP
        // value at the optimum and never exceeds it elsewhere.
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..10 {
            let m = random_model(&mut rng, 5, 2, 1.2, &[Role::Sum, Role::Max]);
            let (xb_star, mmap_v) = marginal_map_exact(&m, &opts()).unwrap();
            let qe = QEvaluator::new(&m);
            let b_nodes = m.max_nodes();
            let b_cards: Vec<usize> = b_nodes.iter().map(|&v| m.card(v)).collect();
            let is_max: Vec<bool> = (0..m.num_vars()).map(|i| m.role(i) == Role::Max).collect();
            for xb in crate::model::ConfigIter::new(&b_cards) {
                let q = qe.evaluate(&xb, &opts()).unwrap();
                // build the clamped joint table
                let mut table = Vec::new();
                let mut expected_theta = 0.0;
                for x in crate::model::ConfigIter::new(m.cards()) {
                    let clamped = b_nodes.iter().enumerate().all(|(k, &v)| x[v] == xb[k]);
                    let t = m.energy(&x).unwrap();
                    let p = if clamped { (t - q).exp() } else { 0.0 };
                    if p > 0.0 {
                        expected_theta += p * t;
                    }
                    table.push(p);
                }
                let h_cond = conditional_entropy_table(&table, m.cards(), &is_max).unwrap();
                let objective = expected_theta + h_cond;
                assert!((objective - q).abs() < 1e-8);
                if xb == xb_star {
                    assert!((objective - mmap_v).abs() < 1e-8);
                } else {
                    assert!(objective <= mmap_v + 1e-9);
                }
            }
        }
    }

    #[test]
    fn conditional_entropy_uniform_and_point() {
        // independent uniform 2x2 joint: H(A|B) = ln 2
        let h = conditional_entropy_table(&[0.25; 4], &[2, 2], &[false, true]).unwrap();
        assert!((h - (2.0f64).ln()).abs() < 1e-12);
        let h = conditional_entropy_table(&[1.0, 0.0, 0.0, 0.0], &[2, 2], &[false, true]).unwrap();
        assert!(h.abs() < 1e-12);
    }

    #[test]
    fn conditional_entropy_weather() {
        let m = weather_model();
        let h = conditional_entropy_exact(&m, &opts()).unwrap();
        let hb = -(0.4f64 * (0.4f64).ln() + 0.6 * (0.6f64).ln());
        // H(A|B) = H - H_B with the full joint entropy computed by hand
        let mut hj = 0.0;
        for x in crate::model::ConfigIter::new(m.cards()) {
            let p = m.energy(&x).unwrap().exp();
            hj -= p * p.ln();
        }
        assert!((h - (hj - hb)).abs() < 1e-10);
    }

    #[test]
    fn cap_produces_typed_error() {
        let m = crate::io::gen_hmm(20, 1.0, 3).unwrap();
        let tight = OracleOptions::with_cap(100);
        match marginal_map_exact(&m, &tight) {
            Err(Error::ResourceLimit { required, cap }) => {
                assert_eq!(cap, 100);
                assert!(required > 100);
            }
            other => panic!("expected resource limit, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn clamped_marginals_normalized() {
        let m = weather_model();
        let (node, edge) = clamped_marginals(&m, &[1], &opts()).unwrap();
        assert!((node[1][1] - 1.0).abs() < 1e-12);
        assert!((node[0][0] - 0.5).abs() < 1e-12);
        assert!((edge[0].iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let m = crate::io::gen_hmm(12, 1.0, 9).unwrap();
        let seq = OracleOptions {
            parallelism: Parallelism::Sequential,
            ..Default::default()
        };
        let par = OracleOptions::default();
        let (ca, va) = marginal_map_exact(&m, &seq).unwrap();
        let (cb, vb) = marginal_map_exact(&m, &par).unwrap();
        assert_eq!(ca, cb);
        assert_eq!(va.to_bits(), vb.to_bits());
    }
}
