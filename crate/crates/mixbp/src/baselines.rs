//! Comparison baselines: EM coordinate ascent and taboo local search.

use crate::error::{Error, Result};
use crate::model::{PairwiseModel, Role};
use crate::mp::{run_generic, run_max_product, run_sum_product, SolverOptions};
use crate::oracle::{OracleOptions, QEvaluator};
use crate::par::{map_indexed, Parallelism};
use crate::report::SolveReport;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;
use std::time::Instant;

/// How a coordinate step is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepMethod {
    /// Tree elimination / capped enumeration.
    Exact,
    /// Belief propagation approximation.
    Bp,
}

#[derive(Debug, Clone)]
pub struct EmOptions {
    pub max_rounds: usize,
    pub e_step: StepMethod,
    pub m_step: StepMethod,
    pub num_random_inits: usize,
    /// Extra start from the argmax of sum-product marginals.
    pub use_marginal_init: bool,
    pub seed: u64,
    pub parallelism: Parallelism,
    pub oracle: OracleOptions,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            max_rounds: 100,
            e_step: StepMethod::Exact,
            m_step: StepMethod::Exact,
            num_random_inits: 5,
            use_marginal_init: true,
            seed: 0,
            parallelism: Parallelism::default(),
            oracle: OracleOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TabooOptions {
    pub max_steps: usize,
    pub num_random_inits: usize,
    /// Extra start from the greedy sequential initializer.
    pub use_sequential_init: bool,
    pub seed: u64,
    pub parallelism: Parallelism,
    pub oracle: OracleOptions,
}

impl Default for TabooOptions {
    fn default() -> Self {
        TabooOptions {
            max_steps: 500,
            num_random_inits: 5,
            use_sequential_init: true,
            seed: 0,
            parallelism: Parallelism::default(),
            oracle: OracleOptions::default(),
        }
    }
}

/// Sum-subgraph view with the max nodes absorbed at fixed states: variables
/// are the sum nodes reindexed in order.
fn clamp_to_sum_submodel(model: &PairwiseModel, xb: &[usize]) -> PairwiseModel {
    let a_nodes = model.sum_nodes();
    let b_nodes = model.max_nodes();
    let mut a_pos = vec![usize::MAX; model.num_vars()];
    for (k, &v) in a_nodes.iter().enumerate() {
        a_pos[v] = k;
    }
    let mut b_pos = vec![usize::MAX; model.num_vars()];
    for (k, &v) in b_nodes.iter().enumerate() {
        b_pos[v] = k;
    }
    let mut node: Vec<Vec<f64>> = a_nodes.iter().map(|&v| model.node_logpot(v).to_vec()).collect();
    let mut edges = Vec::new();
    let mut tables = Vec::new();
    for (e, edge) in model.edges().iter().enumerate() {
        match (model.role(edge.i), model.role(edge.j)) {
            (Role::Sum, Role::Sum) => {
                edges.push((a_pos[edge.i], a_pos[edge.j]));
                tables.push(edge.logpot.clone());
            }
            (Role::Sum, Role::Max) => {
                let xb_j = xb[b_pos[edge.j]];
                for (xa, slot) in node[a_pos[edge.i]].iter_mut().enumerate() {
                    let t = model.edge_logpot(e, edge.i, xa, xb_j);
                    *slot = if *slot == f64::NEG_INFINITY || t == f64::NEG_INFINITY {
                        f64::NEG_INFINITY
                    } else {
                        *slot + t
                    };
                }
            }
            (Role::Max, Role::Sum) => {
                let xb_i = xb[b_pos[edge.i]];
                for (xa, slot) in node[a_pos[edge.j]].iter_mut().enumerate() {
                    let t = model.edge_logpot(e, edge.j, xa, xb_i);
                    *slot = if *slot == f64::NEG_INFINITY || t == f64::NEG_INFINITY {
                        f64::NEG_INFINITY
                    } else {
                        *slot + t
                    };
                }
            }
            (Role::Max, Role::Max) => {}
        }
    }
    PairwiseModel::new(
        a_nodes.iter().map(|&v| model.card(v)).collect(),
        vec![Role::Sum; a_nodes.len()],
        node,
        edges,
        tables,
    )
    .expect("clamped submodel preserves structure")
}

/// Marginals of the sum nodes given clamped max nodes, indexed by original
/// variable id (max nodes map to point masses).
fn clamped_sum_marginals(
    model: &PairwiseModel,
    xb: &[usize],
    method: StepMethod,
    opts: &OracleOptions,
) -> Result<Vec<Vec<f64>>> {
    let sub = clamp_to_sum_submodel(model, xb);
    let a_nodes = model.sum_nodes();
    let use_bp = match method {
        StepMethod::Bp => true,
        // the clamped sum subgraph is a forest for every model family here;
        // BP on a forest is exact, so only non-forests fall back to
        // enumeration
        StepMethod::Exact => sub.is_forest(),
    };
    let sub_marginals: Vec<Vec<f64>> = if use_bp {
        let w = crate::energy::bethe_weights(&sub, 1.0);
        let mut o = SolverOptions::deterministic();
        o.max_iters = 2 * sub.num_vars().max(10);
        o.tol = 1e-12;
        let (_, beliefs, _) = run_generic(&sub, &w, &o)?;
        beliefs.node
    } else {
        crate::oracle::marginals_exact(&sub, opts)?.0
    };
    let mut out: Vec<Vec<f64>> = model
        .cards()
        .iter()
        .map(|&c| vec![0.0; c])
        .collect();
    for (k, &v) in a_nodes.iter().enumerate() {
        out[v] = sub_marginals[k].clone();
    }
    for (k, &v) in model.max_nodes().iter().enumerate() {
        out[v][xb[k]] = 1.0;
    }
    Ok(out)
}

/// Max-subgraph model with expected cross-edge contributions folded into the
/// node potentials.
fn expected_max_submodel(model: &PairwiseModel, tau: &[Vec<f64>]) -> PairwiseModel {
    let b_nodes = model.max_nodes();
    let mut b_pos = vec![usize::MAX; model.num_vars()];
    for (k, &v) in b_nodes.iter().enumerate() {
        b_pos[v] = k;
    }
    let mut node: Vec<Vec<f64>> = b_nodes.iter().map(|&v| model.node_logpot(v).to_vec()).collect();
    let mut edges = Vec::new();
    let mut tables = Vec::new();
    for (e, edge) in model.edges().iter().enumerate() {
        match (model.role(edge.i), model.role(edge.j)) {
            (Role::Max, Role::Max) => {
                edges.push((b_pos[edge.i], b_pos[edge.j]));
                tables.push(edge.logpot.clone());
            }
            (Role::Sum, Role::Max) | (Role::Max, Role::Sum) => {
                let (b_var, a_var) = if model.role(edge.i) == Role::Max {
                    (edge.i, edge.j)
                } else {
                    (edge.j, edge.i)
                };
                for (xb_state, slot) in node[b_pos[b_var]].iter_mut().enumerate() {
                    if *slot == f64::NEG_INFINITY {
                        continue;
                    }
                    let mut expect = 0.0;
                    for (xa, &p) in tau[a_var].iter().enumerate() {
                        if p <= 0.0 {
                            continue;
                        }
                        let t = model.edge_logpot(e, b_var, xb_state, xa);
                        if t == f64::NEG_INFINITY {
                            expect = f64::NEG_INFINITY;
                            break;
                        }
                        expect += p * t;
                    }
                    *slot = if expect == f64::NEG_INFINITY {
                        f64::NEG_INFINITY
                    } else {
                        *slot + expect
                    };
                }
            }
            (Role::Sum, Role::Sum) => {}
        }
    }
    PairwiseModel::new(
        b_nodes.iter().map(|&v| model.card(v)).collect(),
        vec![Role::Max; b_nodes.len()],
        node,
        edges,
        tables,
    )
    .expect("expected submodel preserves structure")
}

fn maximize_submodel(sub: &PairwiseModel, method: StepMethod, opts: &OracleOptions) -> Result<Vec<usize>> {
    if sub.num_vars() == 0 {
        return Ok(Vec::new());
    }
    match method {
        StepMethod::Exact => {
            let (cfg, _) = crate::oracle::map_exact(sub, opts)?;
            Ok(cfg)
        }
        StepMethod::Bp => {
            let report = run_max_product(sub, &SolverOptions::deterministic())?;
            Ok(report.decode_states())
        }
    }
}

fn random_xb<R: Rng>(model: &PairwiseModel, rng: &mut R) -> Vec<usize> {
    model
        .max_nodes()
        .iter()
        .map(|&v| rng.random_range(0..model.card(v)))
        .collect()
}

/// EM coordinate ascent from one start; returns the visited configurations'
/// objective trace alongside the final state.
fn em_from(
    model: &PairwiseModel,
    init: Vec<usize>,
    opts: &EmOptions,
    qe: &QEvaluator<'_>,
) -> Result<(Vec<usize>, Vec<f64>, bool, usize)> {
    let mut x = init;
    let mut visited: HashSet<Vec<usize>> = HashSet::new();
    visited.insert(x.clone());
    let mut trace = Vec::new();
    if let Ok(q) = qe.evaluate(&x, &opts.oracle) {
        trace.push(q);
    }
    let mut converged = false;
    let mut rounds = 0;
    for _ in 0..opts.max_rounds {
        rounds += 1;
        let tau = clamped_sum_marginals(model, &x, opts.e_step, &opts.oracle)?;
        let sub = expected_max_submodel(model, &tau);
        let next = maximize_submodel(&sub, opts.m_step, &opts.oracle)?;
        if let Ok(q) = qe.evaluate(&next, &opts.oracle) {
            trace.push(q);
        }
        if next == x {
            converged = true;
            break;
        }
        if !visited.insert(next.clone()) {
            x = next;
            break; // cycle
        }
        x = next;
    }
    Ok((x, trace, converged, rounds))
}

/// EM for marginal MAP: alternate exact/BP expectation over the sum nodes
/// with maximization of the expected potentials over the max nodes.
pub fn run_em(model: &PairwiseModel, opts: &EmOptions) -> Result<SolveReport> {
    if opts.max_rounds == 0 {
        return Err(Error::InvalidArgument("EM needs at least one round".into()));
    }
    let start = Instant::now();
    let qe = QEvaluator::new(model);
    let mut inits: Vec<Vec<usize>> = Vec::new();
    if opts.use_marginal_init {
        let sp = run_sum_product(model, &SolverOptions::deterministic())?;
        inits.push(sp.decode_states());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.num_random_inits {
        inits.push(random_xb(model, &mut rng));
    }
    if inits.is_empty() {
        inits.push(vec![0; model.max_nodes().len()]);
    }
    let runs = map_indexed(opts.parallelism, inits.len(), |k| {
        em_from(model, inits[k].clone(), opts, &qe)
    });
    let mut best: Option<(Vec<usize>, Vec<f64>, bool, usize, f64)> = None;
    for r in runs {
        let (x, trace, converged, rounds) = r?;
        let score = qe
            .evaluate(&x, &opts.oracle)
            .unwrap_or(f64::NEG_INFINITY);
        let better = best.as_ref().map_or(true, |b| score > b.4);
        if better {
            best = Some((x, trace, converged, rounds, score));
        }
    }
    let (x, trace, converged, rounds, score) = best.expect("at least one EM start");
    let mut report = SolveReport::new("em");
    report.decode = model.max_nodes().into_iter().zip(x).collect();
    report.q_exact = if score == f64::NEG_INFINITY { None } else { Some(score) };
    report.objective_trace = trace;
    report.converged = converged;
    report.iterations = rounds;
    report.seed = opts.seed;
    report.wall_time_ms = start.elapsed().as_secs_f64() * 1000.0;
    Ok(report)
}

/// Run EM from a caller-chosen start (single trajectory).
pub fn run_em_from(model: &PairwiseModel, init: Vec<usize>, opts: &EmOptions) -> Result<SolveReport> {
    let start = Instant::now();
    let qe = QEvaluator::new(model);
    let (x, trace, converged, rounds) = em_from(model, init, opts, &qe)?;
    let mut report = SolveReport::new("em");
    report.q_exact = qe.evaluate(&x, &opts.oracle).ok();
    report.decode = model.max_nodes().into_iter().zip(x).collect();
    report.objective_trace = trace;
    report.converged = converged;
    report.iterations = rounds;
    report.seed = opts.seed;
    report.wall_time_ms = start.elapsed().as_secs_f64() * 1000.0;
    Ok(report)
}

/// Greedy pass over the max nodes in index order: each node takes the
/// argmax of its potential plus fixed-neighbor terms plus expected terms
/// under the sum-product marginals for everything not yet fixed.
pub fn default_sequential_init(model: &PairwiseModel, opts: &OracleOptions) -> Result<Vec<usize>> {
    let _ = opts;
    let b_nodes = model.max_nodes();
    if b_nodes.is_empty() {
        return Ok(Vec::new());
    }
    let sp = run_sum_product(model, &SolverOptions::deterministic())?;
    let tau = sp.node_beliefs.expect("sum-product reports beliefs");
    let mut fixed: Vec<Option<usize>> = vec![None; model.num_vars()];
    let mut out = Vec::with_capacity(b_nodes.len());
    for &i in &b_nodes {
        let mut scores = model.node_logpot(i).to_vec();
        for &(e, nbr) in model.neighbors(i) {
            for (xi, slot) in scores.iter_mut().enumerate() {
                if *slot == f64::NEG_INFINITY {
                    continue;
                }
                let contribution = if let Some(xn) = fixed[nbr] {
                    model.edge_logpot(e, i, xi, xn)
                } else {
                    let mut expect = 0.0;
                    for (xn, &p) in tau[nbr].iter().enumerate() {
                        if p <= 0.0 {
                            continue;
                        }
                        let t = model.edge_logpot(e, i, xi, xn);
                        if t == f64::NEG_INFINITY {
                            expect = f64::NEG_INFINITY;
                            break;
                        }
                        expect += p * t;
                    }
                    expect
                };
                *slot = if contribution == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else {
                    *slot + contribution
                };
            }
        }
        let mut best = 0;
        for (s, &v) in scores.iter().enumerate() {
            if v > scores[best] {
                best = s;
            }
        }
        fixed[i] = Some(best);
        out.push(best);
    }
    Ok(out)
}

struct TabooRun {
    best: Vec<usize>,
    best_q: f64,
    trace: Vec<f64>,
}

fn taboo_from(
    model: &PairwiseModel,
    init: Vec<usize>,
    opts: &TabooOptions,
    qe: &QEvaluator<'_>,
) -> Result<TabooRun> {
    let b_nodes = model.max_nodes();
    let mut scratch = qe.scratch();
    let mut current = init;
    let mut current_q = qe.evaluate_with(&current, &opts.oracle, &mut scratch)?;
    let mut visited: HashSet<Vec<usize>> = HashSet::new();
    visited.insert(current.clone());
    let mut best = current.clone();
    let mut best_q = current_q;
    let mut trace = vec![best_q];
    for _ in 0..opts.max_steps {
        // steepest non-taboo move over single-variable flips, even if worse
        let mut chosen: Option<(Vec<usize>, f64)> = None;
        for (pos, &v) in b_nodes.iter().enumerate() {
            for s in 0..model.card(v) {
                if s == current[pos] {
                    continue;
                }
                let mut cand = current.clone();
                cand[pos] = s;
                if visited.contains(&cand) {
                    continue;
                }
                let q = qe.evaluate_with(&cand, &opts.oracle, &mut scratch)?;
                if chosen.as_ref().map_or(true, |(_, cq)| q > *cq) {
                    chosen = Some((cand, q));
                }
            }
        }
        let Some((next, q)) = chosen else { break };
        current = next;
        current_q = q;
        visited.insert(current.clone());
        if current_q > best_q {
            best_q = current_q;
            best = current.clone();
        }
        trace.push(best_q);
    }
    Ok(TabooRun {
        best,
        best_q,
        trace,
    })
}

/// Taboo local search over the max configurations: steepest single-flip
/// moves excluding every visited configuration, tracking the best ever.
pub fn run_taboo(model: &PairwiseModel, opts: &TabooOptions) -> Result<SolveReport> {
    if opts.max_steps == 0 {
        return Err(Error::InvalidArgument("taboo search needs at least one step".into()));
    }
    let start = Instant::now();
    let qe = QEvaluator::new(model);
    let mut inits: Vec<Vec<usize>> = Vec::new();
    if opts.use_sequential_init {
        inits.push(default_sequential_init(model, &opts.oracle)?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.num_random_inits {
        inits.push(random_xb(model, &mut rng));
    }
    if inits.is_empty() {
        inits.push(vec![0; model.max_nodes().len()]);
    }
    let runs = map_indexed(opts.parallelism, inits.len(), |k| {
        taboo_from(model, inits[k].clone(), opts, &qe)
    });
    let mut best: Option<TabooRun> = None;
    for r in runs {
        let r = r?;
        let better = best.as_ref().map_or(true, |b| r.best_q > b.best_q);
        if better {
            best = Some(r);
        }
    }
    let run = best.expect("at least one taboo start");
    let mut report = SolveReport::new("taboo");
    report.decode = model.max_nodes().into_iter().zip(run.best).collect();
    report.q_exact = Some(run.best_q);
    report.objective_trace = run.trace;
    report.converged = true;
    report.seed = opts.seed;
    report.wall_time_ms = start.elapsed().as_secs_f64() * 1000.0;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PairwiseModel;
    use crate::oracle;
    use crate::testutil::{random_model, random_tree_model, weather_model};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn em_weather_e_step_matches_hand_computation() {
        let m = weather_model();
        let tau = clamped_sum_marginals(&m, &[0], StepMethod::Exact, &OracleOptions::default()).unwrap();
        assert!((tau[0][0] - 1.0 / 8.0).abs() < 1e-10);
        assert!((tau[0][1] - 7.0 / 8.0).abs() < 1e-10);
    }

    #[test]
    fn em_weather_reaches_fixed_point() {
        let m = weather_model();
        let report = run_em_from(&m, vec![0], &EmOptions::default()).unwrap();
        assert!(report.converged);
        // the trace never decreases (exact EM ascent)
        for w in report.objective_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9);
        }
        // from the sunny start EM stays at sunny
        let report = run_em_from(&m, vec![1], &EmOptions::default()).unwrap();
        assert_eq!(report.decode, vec![(1, 1)]);
        assert!((report.q_exact.unwrap() - (0.6f64).ln()).abs() < 1e-9);
    }

    #[test]
    fn em_decoupled_max_block_is_pure_map() {
        // sum chain and max chain with no cross edges
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sum_block = random_tree_model(&mut rng, 3, 2, 1.0, &[Role::Sum]);
        let max_block = random_tree_model(&mut rng, 3, 2, 1.0, &[Role::Max]);
        let mut cards = sum_block.cards().to_vec();
        cards.extend_from_slice(max_block.cards());
        let mut roles = sum_block.roles().to_vec();
        roles.extend_from_slice(max_block.roles());
        let mut pots: Vec<Vec<f64>> = (0..3).map(|i| sum_block.node_logpot(i).to_vec()).collect();
        pots.extend((0..3).map(|i| max_block.node_logpot(i).to_vec()));
        let mut edges: Vec<(usize, usize)> = sum_block.edges().iter().map(|e| (e.i, e.j)).collect();
        let mut tabs: Vec<Vec<f64>> = sum_block.edges().iter().map(|e| e.logpot.clone()).collect();
        for e in max_block.edges() {
            edges.push((e.i + 3, e.j + 3));
            tabs.push(e.logpot.clone());
        }
        let m = PairwiseModel::new(cards, roles, pots, edges, tabs).unwrap();
        let report = run_em_from(&m, vec![0, 0, 0], &EmOptions::default()).unwrap();
        let (map_cfg, _) = oracle::map_exact(&max_block, &OracleOptions::default()).unwrap();
        assert_eq!(report.decode_states(), map_cfg);
        assert!(report.iterations <= 2);
    }

    #[test]
    fn em_all_max_is_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_tree_model(&mut rng, 4, 2, 1.0, &[Role::Max]);
        let report = run_em(&m, &EmOptions::default()).unwrap();
        let (cfg, v) = oracle::map_exact(&m, &OracleOptions::default()).unwrap();
        assert_eq!(report.decode_states(), cfg);
        assert!((report.q_exact.unwrap() - v).abs() < 1e-9);
    }

    #[test]
    fn em_exact_steps_are_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..8 {
            let m = random_model(&mut rng, 6, 2, 1.2, &[Role::Sum, Role::Max]);
            let report = run_em(&m, &EmOptions::default()).unwrap();
            for w in report.objective_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "EM objective dropped: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn taboo_weather_two_steps() {
        let m = weather_model();
        let mut opts = TabooOptions::default();
        opts.max_steps = 2;
        opts.num_random_inits = 1;
        opts.use_sequential_init = false;
        let report = run_taboo(&m, &opts).unwrap();
        assert_eq!(report.decode, vec![(1, 1)]);
        assert!((report.q_exact.unwrap() - (0.6f64).ln()).abs() < 1e-9);
    }

    #[test]
    fn taboo_zero_coupling_finds_independent_argmax() {
        let m = crate::io::gen_hmm(8, 0.0, 5).unwrap();
        let report = run_taboo(&m, &TabooOptions::default()).unwrap();
        let (cfg, v) = oracle::marginal_map_exact(&m, &OracleOptions::default()).unwrap();
        assert!((report.q_exact.unwrap() - v).abs() < 1e-9);
        let _ = cfg;
    }

    #[test]
    fn taboo_keeps_best_ever_from_optimal_init() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let m = random_model(&mut rng, 6, 2, 1.5, &[Role::Sum, Role::Max]);
        let (cfg, v) = oracle::marginal_map_exact(&m, &OracleOptions::default()).unwrap();
        let qe = QEvaluator::new(&m);
        let run = taboo_from(&m, cfg, &TabooOptions::default(), &qe).unwrap();
        assert!((run.best_q - v).abs() < 1e-9);
    }

    #[test]
    fn taboo_visits_global_optimum_with_enough_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..5 {
            let m = random_model(&mut rng, 7, 2, 1.5, &[Role::Sum, Role::Max, Role::Max]);
            let states: usize = m.max_nodes().iter().map(|&v| m.card(v)).product();
            assert!(states <= 512);
            let mut opts = TabooOptions::default();
            opts.max_steps = 512;
            opts.num_random_inits = 1;
            opts.use_sequential_init = false;
            let report = run_taboo(&m, &opts).unwrap();
            let (_, v) = oracle::marginal_map_exact(&m, &OracleOptions::default()).unwrap();
            assert!(
                (report.q_exact.unwrap() - v).abs() < 1e-9,
                "taboo missed the optimum: {} vs {}",
                report.q_exact.unwrap(),
                v
            );
        }
    }

    #[test]
    fn sequential_init_weather_and_degenerate_cases() {
        let m = weather_model();
        let init = default_sequential_init(&m, &OracleOptions::default()).unwrap();
        assert_eq!(init, vec![1]); // sunny
        // no max nodes
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let all_sum = random_tree_model(&mut rng, 4, 2, 1.0, &[Role::Sum]);
        assert!(default_sequential_init(&all_sum, &OracleOptions::default())
            .unwrap()
            .is_empty());
        // uniform potentials tie-break to state 0
        let uniform = PairwiseModel::new(
            vec![2, 2],
            vec![Role::Max, Role::Max],
            vec![vec![0.0; 2]; 2],
            vec![(0, 1)],
            vec![vec![0.0; 4]],
        )
        .unwrap();
        let init = default_sequential_init(&uniform, &OracleOptions::default()).unwrap();
        assert_eq!(init, vec![0, 0]);
    }
}
