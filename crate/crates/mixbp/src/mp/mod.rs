//! Weighted message passing and its belief-propagation special cases.
//!
//! A single update rule family covers all solvers here. With singleton
//! weight `w_i` on the source and pairwise weight `w_ij` on the edge, the
//! generic update is
//!
//! ```text
//! m_{i->j}(x_j) <- [ sum_{x_i} (psi_i m_{~i})^{1/w_i} (psi_ij / m_{j->i})^{1/w_ij} ]^{w_ij}
//! ```
//!
//! where `m_{~i}` is the product of all messages into `i`. Sum-product,
//! max-product, the mixed-product hybrid (with its argmax-restricted update
//! from max to sum nodes) and the annealed scheme are the zero-temperature
//! or unit-weight instances of this update.
//!
//! Everything runs in the log domain; messages are max-normalized after
//! every update. The schedule is a fixed round-robin over directed edges in
//! `(source, target)` lexicographic order, updated asynchronously.

mod check;

pub use check::{check_mixed_consistency, check_reparameterization, verify_local_optimality, ConsistencyResiduals};

use crate::energy::{free_energy_unchecked, EntropyWeights};
use crate::error::{Error, Result};
use crate::logsum::{max_normalize, to_probabilities, StreamingLse};
use crate::model::{PairwiseModel, Role};
use crate::oracle::{OracleOptions, QEvaluator};
use crate::par::{map_indexed, Parallelism};
use crate::report::{Residuals, SolveReport};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::time::Instant;

/// Log-domain tie tolerance for argmax sets.
pub const ARGMAX_TIE_TOL: f64 = 1e-9;

/// Directed log-messages, one table per directed edge.
#[derive(Debug, Clone)]
pub struct MessageSet {
    /// Indexed by `2 * edge + dir`, where dir 0 sends from the stored edge's
    /// `i` endpoint to `j` and dir 1 the reverse. Each table ranges over the
    /// destination's states.
    tables: Vec<Vec<f64>>,
}

impl MessageSet {
    pub fn uniform(model: &PairwiseModel) -> Self {
        let mut tables = Vec::with_capacity(model.edges().len() * 2);
        for edge in model.edges() {
            tables.push(vec![0.0; model.card(edge.j)]);
            tables.push(vec![0.0; model.card(edge.i)]);
        }
        MessageSet { tables }
    }

    pub fn random(model: &PairwiseModel, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut msgs = MessageSet::uniform(model);
        for t in &mut msgs.tables {
            for v in t.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            max_normalize(t);
        }
        msgs
    }

    #[inline]
    fn get(&self, de: usize) -> &[f64] {
        &self.tables[de]
    }

    /// Max absolute entrywise difference, with both `-inf` counting as 0.
    pub fn max_diff(&self, other: &MessageSet) -> f64 {
        let mut worst = 0.0f64;
        for (a, b) in self.tables.iter().zip(&other.tables) {
            for (&x, &y) in a.iter().zip(b) {
                let d = if x == f64::NEG_INFINITY && y == f64::NEG_INFINITY {
                    0.0
                } else {
                    (x - y).abs()
                };
                worst = worst.max(d);
            }
        }
        worst
    }
}

/// Local marginals decoded from messages (probability domain).
#[derive(Debug, Clone)]
pub struct BeliefSet {
    pub node: Vec<Vec<f64>>,
    /// Row-major over the stored edge orientation.
    pub edge: Vec<Vec<f64>>,
}

impl BeliefSet {
    pub fn uniform(model: &PairwiseModel) -> Self {
        BeliefSet {
            node: model
                .cards()
                .iter()
                .map(|&c| vec![1.0 / c as f64; c])
                .collect(),
            edge: model
                .edges()
                .iter()
                .map(|e| {
                    let n = model.card(e.i) * model.card(e.j);
                    vec![1.0 / n as f64; n]
                })
                .collect(),
        }
    }

    pub fn point_mass(model: &PairwiseModel, x: &[usize]) -> Self {
        let mut b = BeliefSet {
            node: model.cards().iter().map(|&c| vec![0.0; c]).collect(),
            edge: model
                .edges()
                .iter()
                .map(|e| vec![0.0; model.card(e.i) * model.card(e.j)])
                .collect(),
        };
        for (i, &xi) in x.iter().enumerate() {
            b.node[i][xi] = 1.0;
        }
        for (e, edge) in model.edges().iter().enumerate() {
            b.edge[e][x[edge.i] * model.card(edge.j) + x[edge.j]] = 1.0;
        }
        b
    }
}

/// Softened beliefs `b_i ~ psi_i m_{~i}` used for decoding and the
/// fixed-point diagnostics.
#[derive(Debug, Clone)]
pub struct MixedBeliefSet {
    pub node: Vec<Vec<f64>>,
    pub edge: Vec<Vec<f64>>,
}

/// Solver options mirroring the standard experimental protocol: 50 sweeps,
/// then 100 damped sweeps at 0.1, five random starts plus a sum-product
/// start, tolerance 1e-6 on the max log-message change.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub max_iters: usize,
    pub extra_damped_iters: usize,
    pub damping: f64,
    pub tol: f64,
    pub num_random_inits: usize,
    pub use_sum_product_init: bool,
    pub seed: u64,
    pub parallelism: Parallelism,
    pub oracle: OracleOptions,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 50,
            extra_damped_iters: 100,
            damping: 0.1,
            tol: 1e-6,
            num_random_inits: 5,
            use_sum_product_init: true,
            seed: 0,
            parallelism: Parallelism::default(),
            oracle: OracleOptions::default(),
        }
    }
}

impl SolverOptions {
    /// Single deterministic run from uniform messages.
    pub fn deterministic() -> Self {
        SolverOptions {
            num_random_inits: 0,
            use_sum_product_init: false,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::InvalidArgument(format!(
                "damping must lie in [0, 1), got {}",
                self.damping
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct DirEdge {
    id: usize,
    e: usize,
    src: usize,
    dst: usize,
}

fn schedule(model: &PairwiseModel) -> Vec<DirEdge> {
    let mut out = Vec::with_capacity(model.edges().len() * 2);
    for (e, edge) in model.edges().iter().enumerate() {
        out.push(DirEdge {
            id: 2 * e,
            e,
            src: edge.i,
            dst: edge.j,
        });
        out.push(DirEdge {
            id: 2 * e + 1,
            e,
            src: edge.j,
            dst: edge.i,
        });
    }
    out.sort_by_key(|d| (d.src, d.dst));
    out
}

/// Per-directed-edge update semantics.
#[derive(Debug, Clone, Copy, PartialEq)]
enum MsgKind {
    /// Generic positive-weight update.
    Weighted { w_src: f64, w_edge: f64 },
    /// Sum-product with an edge coefficient.
    SumProd { rho: f64 },
    /// Max-product with an edge coefficient.
    MaxProd { rho: f64 },
    /// Sum restricted to the argmax states of the source belief.
    ArgmaxProd { rho: f64 },
}

/// Update-rule family for a full run.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Rule<'a> {
    Weighted(&'a EntropyWeights),
    Mixed { rho: &'a [f64] },
    Hybrid { rho: &'a [f64] },
    SumProduct,
    MaxProduct,
}

impl<'a> Rule<'a> {
    fn kind(&self, model: &PairwiseModel, de: &DirEdge) -> MsgKind {
        match self {
            Rule::Weighted(w) => MsgKind::Weighted {
                w_src: w.w_node(model, de.src),
                w_edge: w.w_pair(model, de.e),
            },
            Rule::Mixed { rho } => match (model.role(de.src), model.role(de.dst)) {
                (Role::Sum, _) => MsgKind::SumProd { rho: rho[de.e] },
                (Role::Max, Role::Max) => MsgKind::MaxProd { rho: rho[de.e] },
                (Role::Max, Role::Sum) => MsgKind::ArgmaxProd { rho: rho[de.e] },
            },
            Rule::Hybrid { rho } => match model.role(de.src) {
                Role::Sum => MsgKind::SumProd { rho: rho[de.e] },
                Role::Max => MsgKind::MaxProd { rho: rho[de.e] },
            },
            Rule::SumProduct => MsgKind::SumProd { rho: 1.0 },
            Rule::MaxProduct => MsgKind::MaxProd { rho: 1.0 },
        }
    }

}

/// Pre-potential of the source node: `theta_i + sum of incoming messages`.
fn eta(model: &PairwiseModel, msgs: &MessageSet, i: usize) -> Vec<f64> {
    let mut out = model.node_logpot(i).to_vec();
    for &(e, _) in model.neighbors(i) {
        let edge = &model.edges()[e];
        let de = if edge.j == i { 2 * e } else { 2 * e + 1 };
        for (v, &m) in out.iter_mut().zip(msgs.get(de)) {
            *v = if *v == f64::NEG_INFINITY || m == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                *v + m
            };
        }
    }
    out
}

/// Argmax states of a log table within the tie tolerance; `-inf` entries
/// never qualify.
pub(crate) fn argmax_set(table: &[f64], tol: f64) -> Vec<usize> {
    let m = table.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return Vec::new();
    }
    table
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= m - tol)
        .map(|(k, _)| k)
        .collect()
}

/// One raw (unnormalized, undamped) message update.
fn compute_message(model: &PairwiseModel, msgs: &MessageSet, de: &DirEdge, kind: MsgKind) -> Vec<f64> {
    let card_src = model.card(de.src);
    let card_dst = model.card(de.dst);
    let eta_src = eta(model, msgs, de.src);
    let rev = if model.edges()[de.e].i == de.dst {
        2 * de.e
    } else {
        2 * de.e + 1
    };
    let mu_rev = msgs.get(rev); // message dst -> src over X_src
    let mut out = vec![f64::NEG_INFINITY; card_dst];
    let active: Vec<usize> = match kind {
        MsgKind::ArgmaxProd { .. } => argmax_set(&eta_src, ARGMAX_TIE_TOL),
        _ => (0..card_src).collect(),
    };
    for x_dst in 0..card_dst {
        match kind {
            MsgKind::Weighted { w_src, w_edge } => {
                let mut acc = StreamingLse::new();
                for &x_src in &active {
                    if eta_src[x_src] == f64::NEG_INFINITY {
                        continue;
                    }
                    let t = model.edge_logpot(de.e, de.src, x_src, x_dst);
                    if t == f64::NEG_INFINITY {
                        continue;
                    }
                    acc.push(eta_src[x_src] / w_src + (t - mu_rev[x_src]) / w_edge);
                }
                let v = acc.value();
                out[x_dst] = if v == f64::NEG_INFINITY { v } else { w_edge * v };
            }
            MsgKind::SumProd { rho } | MsgKind::ArgmaxProd { rho } => {
                let mut acc = StreamingLse::new();
                for &x_src in &active {
                    if eta_src[x_src] == f64::NEG_INFINITY {
                        continue;
                    }
                    let t = model.edge_logpot(de.e, de.src, x_src, x_dst);
                    if t == f64::NEG_INFINITY {
                        continue;
                    }
                    acc.push(eta_src[x_src] + (t - mu_rev[x_src]) / rho);
                }
                let v = acc.value();
                out[x_dst] = if v == f64::NEG_INFINITY { v } else { rho * v };
            }
            MsgKind::MaxProd { rho } => {
                let mut best = f64::NEG_INFINITY;
                for &x_src in &active {
                    if eta_src[x_src] == f64::NEG_INFINITY {
                        continue;
                    }
                    let t = model.edge_logpot(de.e, de.src, x_src, x_dst);
                    if t == f64::NEG_INFINITY {
                        continue;
                    }
                    best = best.max(rho * eta_src[x_src] + t - mu_rev[x_src]);
                }
                out[x_dst] = best;
            }
        }
    }
    out
}

/// Single exposed weighted update (normalized, undamped), for callers that
/// drive their own sweeps.
pub fn weighted_update(
    model: &PairwiseModel,
    weights: &EntropyWeights,
    msgs: &MessageSet,
    src: usize,
    dst: usize,
) -> Result<Vec<f64>> {
    let e = model
        .neighbors(src)
        .iter()
        .find(|&&(_, n)| n == dst)
        .map(|&(e, _)| e)
        .ok_or_else(|| Error::InvalidArgument(format!("no edge between {} and {}", src, dst)))?;
    let w_src = weights.w_node(model, src);
    let w_edge = weights.w_pair(model, e);
    if !(w_src > 0.0) || !(w_edge > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "weights must be positive (w_i = {}, w_ij = {})",
            w_src, w_edge
        )));
    }
    let de = DirEdge {
        id: 0,
        e,
        src,
        dst,
    };
    let mut m = compute_message(model, msgs, &de, MsgKind::Weighted { w_src, w_edge });
    max_normalize(&mut m);
    Ok(m)
}

/// Single exposed mixed-product update (normalized, undamped), dispatching
/// on endpoint roles.
pub fn mixed_update(
    model: &PairwiseModel,
    rho: &[f64],
    msgs: &MessageSet,
    src: usize,
    dst: usize,
) -> Result<Vec<f64>> {
    let e = model
        .neighbors(src)
        .iter()
        .find(|&&(_, n)| n == dst)
        .map(|&(e, _)| e)
        .ok_or_else(|| Error::InvalidArgument(format!("no edge between {} and {}", src, dst)))?;
    let de = DirEdge {
        id: 0,
        e,
        src,
        dst,
    };
    let kind = Rule::Mixed { rho }.kind(model, &de);
    let mut m = compute_message(model, msgs, &de, kind);
    max_normalize(&mut m);
    Ok(m)
}

/// Run `iters` round-robin sweeps; returns `(sweeps done, converged, last delta)`.
fn run_sweeps(
    model: &PairwiseModel,
    rule: Rule<'_>,
    msgs: &mut MessageSet,
    iters: usize,
    damping: f64,
    tol: f64,
) -> (usize, bool, f64) {
    let sched = schedule(model);
    let mut last_delta = f64::INFINITY;
    for it in 0..iters {
        let mut delta = 0.0f64;
        for de in &sched {
            let kind = rule.kind(model, de);
            let mut new = compute_message(model, msgs, de, kind);
            max_normalize(&mut new);
            if damping > 0.0 {
                let old = msgs.get(de.id);
                for (v, &o) in new.iter_mut().zip(old) {
                    *v = if *v == f64::NEG_INFINITY || o == f64::NEG_INFINITY {
                        f64::NEG_INFINITY
                    } else {
                        (1.0 - damping) * *v + damping * o
                    };
                }
                max_normalize(&mut new);
            }
            let old = msgs.get(de.id);
            for (&n, &o) in new.iter().zip(old) {
                let d = if n == f64::NEG_INFINITY && o == f64::NEG_INFINITY {
                    0.0
                } else {
                    (n - o).abs()
                };
                delta = delta.max(d);
            }
            msgs.tables[de.id] = new;
        }
        last_delta = delta;
        if delta <= tol {
            return (it + 1, true, delta);
        }
    }
    (iters, false, last_delta)
}

/// Standard two-phase drive: undamped sweeps, then damped sweeps.
pub(crate) fn run_two_phase(
    model: &PairwiseModel,
    rule: Rule<'_>,
    msgs: &mut MessageSet,
    opts: &SolverOptions,
) -> (usize, bool, f64) {
    let (it1, conv, delta) = run_sweeps(model, rule, msgs, opts.max_iters, 0.0, opts.tol);
    if conv {
        return (it1, true, delta);
    }
    let (it2, conv, delta) = run_sweeps(
        model,
        rule,
        msgs,
        opts.extra_damped_iters,
        opts.damping,
        opts.tol,
    );
    (it1 + it2, conv, delta)
}

/// Local marginals from messages under positive weights.
pub fn beliefs_from_messages(
    model: &PairwiseModel,
    weights: &EntropyWeights,
    msgs: &MessageSet,
) -> BeliefSet {
    let n = model.num_vars();
    let mut node_log: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let w = weights.w_node(model, i);
        let mut t = eta(model, msgs, i);
        for v in t.iter_mut() {
            if *v != f64::NEG_INFINITY {
                *v /= w;
            }
        }
        max_normalize(&mut t);
        node_log.push(t);
    }
    let node: Vec<Vec<f64>> = node_log.iter().map(|t| to_probabilities(t)).collect();
    let mut edge = Vec::with_capacity(model.edges().len());
    for (e, ed) in model.edges().iter().enumerate() {
        let w = weights.w_pair(model, e);
        let (ci, cj) = (model.card(ed.i), model.card(ed.j));
        let mi = msgs.get(2 * e); // i -> j, over X_j
        let mj = msgs.get(2 * e + 1); // j -> i, over X_i
        let mut tab = vec![f64::NEG_INFINITY; ci * cj];
        for xi in 0..ci {
            let base_i = node_log[ed.i][xi];
            if base_i == f64::NEG_INFINITY {
                continue;
            }
            for xj in 0..cj {
                let base_j = node_log[ed.j][xj];
                if base_j == f64::NEG_INFINITY {
                    continue;
                }
                let t = ed.value(cj, xi, xj);
                if t == f64::NEG_INFINITY {
                    continue;
                }
                tab[xi * cj + xj] = base_i + base_j + (t - mi[xj] - mj[xi]) / w;
            }
        }
        edge.push(to_probabilities(&tab));
    }
    BeliefSet { node, edge }
}

/// Mixed beliefs `b_i ~ psi_i m_{~i}` and their pair counterparts with the
/// `1/rho` edge correction.
pub fn mixed_beliefs_from_messages(
    model: &PairwiseModel,
    rho: &[f64],
    msgs: &MessageSet,
) -> MixedBeliefSet {
    let n = model.num_vars();
    let mut node_log: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut t = eta(model, msgs, i);
        max_normalize(&mut t);
        node_log.push(t);
    }
    let node: Vec<Vec<f64>> = node_log.iter().map(|t| to_probabilities(t)).collect();
    let mut edge = Vec::with_capacity(model.edges().len());
    for (e, ed) in model.edges().iter().enumerate() {
        let (ci, cj) = (model.card(ed.i), model.card(ed.j));
        let mi = msgs.get(2 * e);
        let mj = msgs.get(2 * e + 1);
        let mut tab = vec![f64::NEG_INFINITY; ci * cj];
        for xi in 0..ci {
            if node_log[ed.i][xi] == f64::NEG_INFINITY {
                continue;
            }
            for xj in 0..cj {
                if node_log[ed.j][xj] == f64::NEG_INFINITY {
                    continue;
                }
                let t = ed.value(cj, xi, xj);
                if t == f64::NEG_INFINITY {
                    continue;
                }
                tab[xi * cj + xj] =
                    node_log[ed.i][xi] + node_log[ed.j][xj] + (t - mi[xj] - mj[xi]) / rho[e];
            }
        }
        edge.push(to_probabilities(&tab));
    }
    MixedBeliefSet { node, edge }
}

/// Decode max nodes from singleton beliefs, lowest index on ties.
fn decode_max_nodes(model: &PairwiseModel, node_beliefs: &[Vec<f64>]) -> Vec<(usize, usize)> {
    model
        .max_nodes()
        .iter()
        .map(|&i| {
            let mut best = 0;
            for (s, &v) in node_beliefs[i].iter().enumerate() {
                if v > node_beliefs[i][best] {
                    best = s;
                }
            }
            (i, best)
        })
        .collect()
}

fn q_of_decode(qe: &QEvaluator<'_>, decode: &[(usize, usize)], opts: &OracleOptions) -> Option<f64> {
    let xb: Vec<usize> = decode.iter().map(|&(_, s)| s).collect();
    qe.evaluate(&xb, opts).ok()
}

/// How a trial's messages start.
#[derive(Debug, Clone)]
enum InitSpec {
    Uniform,
    Random(u64),
    SumProduct,
}

struct Trial {
    report: SolveReport,
    score: f64,
}

/// Shared driver: run the rule from each configured start, score by exact
/// objective when computable (truncated Bethe objective otherwise), keep the
/// best.
fn run_best_of_inits(
    model: &PairwiseModel,
    rule: Rule<'_>,
    rho_for_beliefs: &[f64],
    opts: &SolverOptions,
    algorithm: &str,
    allow_sp_init: bool,
) -> Result<SolveReport> {
    opts.validate()?;
    let start = Instant::now();
    let mut inits: Vec<InitSpec> = Vec::new();
    if opts.use_sum_product_init && allow_sp_init {
        inits.push(InitSpec::SumProduct);
    }
    for k in 0..opts.num_random_inits {
        inits.push(InitSpec::Random(opts.seed.wrapping_add(k as u64 + 1)));
    }
    if inits.is_empty() {
        inits.push(InitSpec::Uniform);
    }
    let sp_messages: Option<MessageSet> = if inits.iter().any(|i| matches!(i, InitSpec::SumProduct)) {
        let mut m = MessageSet::uniform(model);
        run_two_phase(model, Rule::SumProduct, &mut m, opts);
        Some(m)
    } else {
        None
    };
    let qe = QEvaluator::new(model);
    let bethe_score = crate::energy::bethe_weights(model, 0.0);
    let run_one = |spec: &InitSpec| -> Trial {
        let mut msgs = match spec {
            InitSpec::Uniform => MessageSet::uniform(model),
            InitSpec::Random(s) => MessageSet::random(model, *s),
            InitSpec::SumProduct => sp_messages.clone().expect("prepared above"),
        };
        let (iterations, converged, delta) = run_two_phase(model, rule, &mut msgs, opts);
        let beliefs = mixed_beliefs_from_messages(model, rho_for_beliefs, &msgs);
        let decode = decode_max_nodes(model, &beliefs.node);
        let q_exact = q_of_decode(&qe, &decode, &opts.oracle);
        let score = q_exact.unwrap_or_else(|| {
            free_energy_unchecked(
                model,
                &BeliefSet {
                    node: beliefs.node.clone(),
                    edge: beliefs.edge.clone(),
                },
                &bethe_score,
            )
        });
        let mut report = SolveReport::new(algorithm);
        report.decode = decode;
        report.q_exact = q_exact;
        report.converged = converged;
        report.iterations = iterations;
        report.seed = opts.seed;
        report.residuals = Residuals {
            message_change: delta,
            reparameterization: check_reparameterization(model, rho_for_beliefs, &beliefs).ok(),
            ..Default::default()
        };
        let cons = check_mixed_consistency(model, &beliefs);
        report.residuals.consistency_sum = cons.sum;
        report.residuals.consistency_max = cons.max;
        report.residuals.consistency_argmax = cons.argmax;
        report.node_beliefs = Some(beliefs.node);
        Trial { report, score }
    };
    let trials = map_indexed(opts.parallelism, inits.len(), |k| run_one(&inits[k]));
    let mut best: Option<Trial> = None;
    for t in trials {
        best = Some(match best {
            None => t,
            Some(b) => {
                if t.score > b.score {
                    t
                } else {
                    b
                }
            }
        });
    }
    let mut report = best.expect("at least one trial").report;
    report.wall_time_ms = start.elapsed().as_secs_f64() * 1000.0;
    Ok(report)
}

/// Generic weighted message passing at fixed positive weights.
pub fn run_generic(
    model: &PairwiseModel,
    weights: &EntropyWeights,
    opts: &SolverOptions,
) -> Result<(MessageSet, BeliefSet, SolveReport)> {
    opts.validate()?;
    for i in 0..model.num_vars() {
        if !(weights.w_node(model, i) > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "singleton weight of node {} must be positive",
                i
            )));
        }
    }
    for e in 0..model.edges().len() {
        if !(weights.w_pair(model, e) > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "pairwise weight of edge {} must be positive",
                e
            )));
        }
    }
    let start = Instant::now();
    let mut msgs = MessageSet::uniform(model);
    let (iterations, converged, delta) =
        run_two_phase(model, Rule::Weighted(weights), &mut msgs, opts);
    let beliefs = beliefs_from_messages(model, weights, &msgs);
    let mut report = SolveReport::new("weighted");
    report.decode = decode_max_nodes(model, &beliefs.node);
    report.converged = converged;
    report.iterations = iterations;
    report.seed = opts.seed;
    report.residuals.message_change = delta;
    let qe = QEvaluator::new(model);
    report.q_exact = q_of_decode(&qe, &report.decode, &opts.oracle);
    report.node_beliefs = Some(beliefs.node.clone());
    report.wall_time_ms = start.elapsed().as_secs_f64() * 1000.0;
    Ok((msgs, beliefs, report))
}

/// Annealed scheme: sweep with weights at temperature `1/t`, decode from the
/// mixed beliefs at the end.
pub fn run_annealed(
    model: &PairwiseModel,
    weights: &EntropyWeights,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    opts.validate()?;
    let start = Instant::now();
    let mut msgs = MessageSet::uniform(model);
    let total = opts.max_iters + opts.extra_damped_iters;
    let mut converged = false;
    let mut iterations = 0;
    let mut delta = f64::INFINITY;
    for t in 1..=total {
        let w_t = weights.at_epsilon(1.0 / t as f64);
        let damping = if t > opts.max_iters { opts.damping } else { 0.0 };
        let (_, _, d) = run_sweeps(model, Rule::Weighted(&w_t), &mut msgs, 1, damping, opts.tol);
        iterations = t;
        delta = d;
        if d <= opts.tol && t > 1 {
            converged = true;
            break;
        }
    }
    let beliefs = mixed_beliefs_from_messages(model, &weights.rho, &msgs);
    let mut report = SolveReport::new("annealed");
    report.decode = decode_max_nodes(model, &beliefs.node);
    report.converged = converged;
    report.iterations = iterations;
    report.seed = opts.seed;
    report.residuals.message_change = delta;
    let qe = QEvaluator::new(model);
    report.q_exact = q_of_decode(&qe, &report.decode, &opts.oracle);
    report.node_beliefs = Some(beliefs.node);
    report.wall_time_ms = start.elapsed().as_secs_f64() * 1000.0;
    Ok(report)
}

/// Mixed-product belief propagation: sum-product from sum nodes,
/// max-product between max nodes, argmax-restricted sums from max to sum
/// nodes; best of the configured starts.
pub fn run_mixed_product(
    model: &PairwiseModel,
    weights: &EntropyWeights,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    run_best_of_inits(
        model,
        Rule::Mixed { rho: &weights.rho },
        &weights.rho,
        opts,
        "mixed-product",
        true,
    )
}

/// Hybrid variant that sends plain max-product messages from max nodes
/// everywhere (no argmax restriction).
pub fn run_jiang(
    model: &PairwiseModel,
    weights: &EntropyWeights,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    run_best_of_inits(
        model,
        Rule::Hybrid { rho: &weights.rho },
        &weights.rho,
        opts,
        "hybrid-max",
        true,
    )
}

/// Plain sum-product BP; max nodes are decoded from singleton marginals.
pub fn run_sum_product(model: &PairwiseModel, opts: &SolverOptions) -> Result<SolveReport> {
    let rho = vec![1.0; model.edges().len()];
    run_best_of_inits(model, Rule::SumProduct, &rho, opts, "sum-product", false)
}

/// Plain max-product BP; max nodes are decoded from singleton max-marginals.
pub fn run_max_product(model: &PairwiseModel, opts: &SolverOptions) -> Result<SolveReport> {
    let rho = vec![1.0; model.edges().len()];
    run_best_of_inits(model, Rule::MaxProduct, &rho, opts, "max-product", false)
}

/// Warm-started generic weighted sweeps on existing messages; returns
/// `(sweeps, converged, last delta)`.
pub fn run_warm(
    model: &PairwiseModel,
    weights: &EntropyWeights,
    msgs: &mut MessageSet,
    opts: &SolverOptions,
) -> (usize, bool, f64) {
    run_two_phase(model, Rule::Weighted(weights), msgs, opts)
}

/// Update family selector for message-level runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BpVariant {
    SumProduct,
    MaxProduct,
    Mixed,
    Hybrid,
}

/// Drive one variant to its fixed point, optionally from given starting
/// messages; returns the final messages with `(converged, sweeps, delta)`.
pub fn run_variant(
    model: &PairwiseModel,
    variant: BpVariant,
    rho: &[f64],
    opts: &SolverOptions,
    init: Option<MessageSet>,
) -> (MessageSet, bool, usize, f64) {
    let rule = match variant {
        BpVariant::SumProduct => Rule::SumProduct,
        BpVariant::MaxProduct => Rule::MaxProduct,
        BpVariant::Mixed => Rule::Mixed { rho },
        BpVariant::Hybrid => Rule::Hybrid { rho },
    };
    let mut msgs = init.unwrap_or_else(|| MessageSet::uniform(model));
    let (iterations, converged, delta) = run_two_phase(model, rule, &mut msgs, opts);
    (msgs, converged, iterations, delta)
}

/// One full round-robin sweep of the generic weighted update at temperature
/// `epsilon`, and of the mixed-product update, from the same start. Used to
/// study the zero-temperature limit.
pub fn one_round_weighted_vs_mixed(
    model: &PairwiseModel,
    weights: &EntropyWeights,
    epsilon: f64,
    init: &MessageSet,
) -> (MessageSet, MessageSet) {
    let w_eps = weights.at_epsilon(epsilon);
    let mut a = init.clone();
    run_sweeps(model, Rule::Weighted(&w_eps), &mut a, 1, 0.0, 0.0);
    let mut b = init.clone();
    run_sweeps(model, Rule::Mixed { rho: &weights.rho }, &mut b, 1, 0.0, 0.0);
    (a, b)
}

/// Run mixed-product from explicit starting messages, reporting the decode
/// after every sweep. Used by fixed-point tests.
pub fn mixed_product_decode_trace(
    model: &PairwiseModel,
    weights: &EntropyWeights,
    msgs: &mut MessageSet,
    sweeps: usize,
) -> Vec<Vec<(usize, usize)>> {
    let mut out = Vec::with_capacity(sweeps);
    for _ in 0..sweeps {
        run_sweeps(model, Rule::Mixed { rho: &weights.rho }, msgs, 1, 0.0, 0.0);
        let beliefs = mixed_beliefs_from_messages(model, &weights.rho, msgs);
        out.push(decode_max_nodes(model, &beliefs.node));
    }
    out
}

/// Sum of per-state log-beliefs used by tests that need raw belief tables.
pub fn node_mixed_belief(model: &PairwiseModel, msgs: &MessageSet, i: usize) -> Vec<f64> {
    let mut t = eta(model, msgs, i);
    max_normalize(&mut t);
    t
}
