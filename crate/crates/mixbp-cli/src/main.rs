//! Command-line frontend: solve single instances, generate benchmark
//! models, run benchmark sweeps, and check fixed-point residuals.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 malformed input file,
//! 3 enumeration cap exceeded, 4 invalid flags or unusable arguments.

use clap::{Parser, Subcommand, ValueEnum};
use mixbp::baselines::{run_em, run_taboo, EmOptions, TabooOptions};
use mixbp::energy::bethe_weights;
use mixbp::jgraph::{build_junction_graph, run_mixed_jgbp, FactorModel};
use mixbp::model::PairwiseModel;
use mixbp::mp::{
    self, check_mixed_consistency, check_reparameterization, mixed_beliefs_from_messages,
    run_annealed, run_jiang, run_max_product, run_mixed_product, run_sum_product, BpVariant,
    SolverOptions,
};
use mixbp::oracle::{self, OracleOptions, QEvaluator};
use mixbp::proximal::{run_proximal, ProximalFlavor, ProximalOptions};
use mixbp::report::SolveReport;
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "mixbp", version, about = "Marginal MAP inference for discrete graphical models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Alg {
    SumProduct,
    MaxProduct,
    MixedBethe,
    Jiang,
    AnnealedBethe,
    ProximalBethe,
    ProximalTrw,
    Em,
    Taboo,
    MixedJgbp,
}

impl Alg {
    fn name(self) -> &'static str {
        match self {
            Alg::SumProduct => "sum-product",
            Alg::MaxProduct => "max-product",
            Alg::MixedBethe => "mixed-bethe",
            Alg::Jiang => "jiang",
            Alg::AnnealedBethe => "annealed-bethe",
            Alg::ProximalBethe => "proximal-bethe",
            Alg::ProximalTrw => "proximal-trw",
            Alg::Em => "em",
            Alg::Taboo => "taboo",
            Alg::MixedJgbp => "mixed-jgbp",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Family {
    Hmm,
    Tree,
    Grid,
    UaiFile,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Pattern {
    SumLoopy,
    MaxLoopy,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Reference {
    Oracle,
    Best,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Parser)]
struct CommonSolveFlags {
    /// Maximum undamped sweeps (message passing) or outer iterations
    /// (proximal).
    #[arg(long, default_value_t = 50)]
    max_iters: usize,
    /// Damping coefficient for the extra damped sweeps.
    #[arg(long, default_value_t = 0.1)]
    damping: f64,
    /// Number of random restarts.
    #[arg(long, default_value_t = 5)]
    inits: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads for data-parallel scans (0 = library default).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Enumeration cap for exact computations.
    #[arg(long, default_value_t = 1u64 << 26)]
    cap: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one model with a chosen algorithm; prints a JSON report.
    Solve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        evid: Option<PathBuf>,
        #[arg(long, value_enum)]
        alg: Alg,
        #[command(flatten)]
        common: CommonSolveFlags,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a benchmark model and its query file.
    Gen {
        #[arg(long, value_enum)]
        family: Family,
        /// Node count for hmm/tree families.
        #[arg(long, default_value_t = 20)]
        n: usize,
        /// Grid side length.
        #[arg(long, default_value_t = 10)]
        side: usize,
        /// Per-variable cardinality for grids.
        #[arg(long, default_value_t = 3)]
        card: usize,
        #[arg(long, value_enum, default_value = "sum-loopy")]
        pattern: Pattern,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path prefix; writes `<out>.uai` and `<out>.query`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a benchmark sweep; emits per-(sigma, algorithm) CSV rows and a
    /// JSON summary.
    Bench {
        #[arg(long, value_enum)]
        family: Family,
        /// Model/query files for the uai-file family.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        query: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 6)]
        side: usize,
        #[arg(long, default_value_t = 3)]
        card: usize,
        #[arg(long, value_enum, default_value = "sum-loopy")]
        pattern: Pattern,
        /// Comma-separated coupling strengths.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 1.0, 1.5])]
        sigmas: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Comma-separated algorithm list.
        #[arg(long, value_enum, value_delimiter = ',',
              default_values_t = vec![Alg::MixedBethe, Alg::ProximalBethe, Alg::Taboo])]
        algs: Vec<Alg>,
        #[arg(long, value_enum, default_value = "oracle")]
        reference: Reference,
        #[command(flatten)]
        common: CommonSolveFlags,
        /// CSV output path (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutputFormat,
    },
    /// Run to convergence and report fixed-point residuals.
    Check {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        evid: Option<PathBuf>,
        #[arg(long, value_enum)]
        alg: Alg,
        /// Double one pair-belief entry before checking, to demonstrate
        /// nonzero residuals.
        #[arg(long, default_value_t = false)]
        perturb: bool,
        #[command(flatten)]
        common: CommonSolveFlags,
    },
}

enum CliError {
    Usage(String),
    Core(mixbp::Error),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{}", m),
            CliError::Core(e) => write!(f, "{}", e),
            CliError::Io(m) => write!(f, "{}", m),
        }
    }
}

impl From<mixbp::Error> for CliError {
    fn from(e: mixbp::Error) -> Self {
        CliError::Core(e)
    }
}

fn exit_code(e: &CliError) -> u8 {
    match e {
        CliError::Usage(_) => 4,
        CliError::Io(_) => 4,
        CliError::Core(c) => match c {
            mixbp::Error::Parse { .. } | mixbp::Error::Structural(_) => 2,
            mixbp::Error::ResourceLimit { .. } => 3,
            mixbp::Error::InvalidArgument(_) | mixbp::Error::InvalidConfiguration(_) => 4,
            _ => 1,
        },
    }
}

type CliResult<T> = Result<T, CliError>;

fn read_file(path: &PathBuf) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {}", path.display(), e)))
}

fn load_model(
    model: &PathBuf,
    query: &PathBuf,
    evid: Option<&PathBuf>,
) -> CliResult<FactorModel> {
    let fm = mixbp::io::parse_uai(&read_file(model)?)?;
    let mut fm = fm;
    if let Some(evid_path) = evid {
        let pairs = mixbp::io::parse_evidence(&read_file(evid_path)?, fm.num_vars())?;
        fm = fm.clamp(&pairs)?;
    }
    let q = mixbp::io::parse_query(&read_file(query)?, fm.num_vars())?;
    for &v in &q {
        if fm.cards[v] == 1 {
            return Err(CliError::Usage(format!(
                "query variable {} is fixed by evidence",
                v
            )));
        }
    }
    Ok(mixbp::io::apply_query(&fm, &q)?)
}

fn solver_options(common: &CommonSolveFlags) -> SolverOptions {
    SolverOptions {
        max_iters: common.max_iters,
        damping: common.damping,
        num_random_inits: common.inits,
        seed: common.seed,
        oracle: OracleOptions::with_cap(common.cap),
        ..Default::default()
    }
}

fn proximal_options(common: &CommonSolveFlags) -> ProximalOptions {
    ProximalOptions {
        max_outer: common.max_iters.max(100),
        seed: common.seed,
        oracle: OracleOptions::with_cap(common.cap),
        ..Default::default()
    }
}

fn run_alg(model: &PairwiseModel, alg: Alg, common: &CommonSolveFlags) -> CliResult<SolveReport> {
    let opts = solver_options(common);
    let report = match alg {
        Alg::SumProduct => run_sum_product(model, &opts)?,
        Alg::MaxProduct => run_max_product(model, &opts)?,
        Alg::MixedBethe => run_mixed_product(model, &bethe_weights(model, 0.0), &opts)?,
        Alg::Jiang => run_jiang(model, &bethe_weights(model, 0.0), &opts)?,
        Alg::AnnealedBethe => run_annealed(model, &bethe_weights(model, 1.0), &opts)?,
        Alg::ProximalBethe => run_proximal(model, ProximalFlavor::Bethe, &proximal_options(common))?,
        Alg::ProximalTrw => run_proximal(model, ProximalFlavor::Trw, &proximal_options(common))?,
        Alg::Em => {
            let em = EmOptions {
                num_random_inits: common.inits,
                seed: common.seed,
                oracle: OracleOptions::with_cap(common.cap),
                ..Default::default()
            };
            run_em(model, &em)?
        }
        Alg::Taboo => {
            let taboo = TabooOptions {
                num_random_inits: common.inits,
                seed: common.seed,
                oracle: OracleOptions::with_cap(common.cap),
                ..Default::default()
            };
            run_taboo(model, &taboo)?
        }
        Alg::MixedJgbp => {
            let fm = FactorModel::from_pairwise(model);
            let jg = build_junction_graph(&fm)?;
            let mut report = run_mixed_jgbp(&jg, &opts)?;
            let qe = QEvaluator::new(model);
            report.q_exact = qe
                .evaluate(&report.decode_states(), &OracleOptions::with_cap(common.cap))
                .ok();
            report
        }
    };
    Ok(report)
}

fn emit(text: &str, out: Option<&PathBuf>) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {}", path.display(), e))),
        None => {
            println!("{}", text);
            Ok(())
        }
    }
}

fn cmd_solve(
    model: PathBuf,
    query: PathBuf,
    evid: Option<PathBuf>,
    alg: Alg,
    common: CommonSolveFlags,
    out: Option<PathBuf>,
) -> CliResult<()> {
    mixbp::par::configure_threads(common.jobs);
    let fm = load_model(&model, &query, evid.as_ref())?;
    let report = match alg {
        Alg::MixedJgbp => {
            let jg = build_junction_graph(&fm)?;
            let mut report = run_mixed_jgbp(&jg, &solver_options(&common))?;
            report.q_exact = fm.q_value(&report.decode_states(), common.cap).ok();
            report
        }
        _ => {
            let pairwise = fm.to_pairwise().map_err(|_| {
                CliError::Usage(format!(
                    "model has factors of arity > 2; use --alg mixed-jgbp for '{}'",
                    alg.name()
                ))
            })?;
            run_alg(&pairwise, alg, &common)?
        }
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    emit(&json, out.as_ref())
}

fn cmd_gen(
    family: Family,
    n: usize,
    side: usize,
    card: usize,
    pattern: Pattern,
    sigma: f64,
    seed: u64,
    out: PathBuf,
) -> CliResult<()> {
    let model = match family {
        Family::Hmm => mixbp::io::gen_hmm(n, sigma, seed)?,
        Family::Tree => mixbp::io::gen_latent_tree(n, sigma, seed)?,
        Family::Grid => {
            let p = match pattern {
                Pattern::SumLoopy => mixbp::io::GridPattern::SumLoopy,
                Pattern::MaxLoopy => mixbp::io::GridPattern::MaxLoopy,
            };
            mixbp::io::gen_grid(side, p, sigma, seed, card)?
        }
        Family::UaiFile => {
            return Err(CliError::Usage(
                "gen requires a synthetic family (hmm, tree or grid)".into(),
            ))
        }
    };
    let fm = FactorModel::from_pairwise(&model);
    let uai_path = out.with_extension("uai");
    let query_path = out.with_extension("query");
    std::fs::write(&uai_path, mixbp::io::to_uai_string(&fm))
        .map_err(|e| CliError::Io(format!("cannot write {}: {}", uai_path.display(), e)))?;
    std::fs::write(&query_path, mixbp::io::to_query_string(&model.max_nodes()))
        .map_err(|e| CliError::Io(format!("cannot write {}: {}", query_path.display(), e)))?;
    println!("{}", uai_path.display());
    println!("{}", query_path.display());
    Ok(())
}

#[derive(Serialize)]
struct BenchRow {
    sigma: f64,
    algorithm: String,
    success_rate: f64,
    mean_rel_error: f64,
    mean_bound_gap: Option<f64>,
    converged_frac: f64,
    trials: usize,
}

#[derive(Serialize)]
struct BenchSummary {
    schema: String,
    family: String,
    reference: String,
    seed: u64,
    trials: usize,
    sigmas: Vec<f64>,
    algorithms: Vec<String>,
    rows: Vec<BenchRow>,
    wall_time_ms: f64,
}

struct TrialOutcome {
    q: f64,
    converged: bool,
    bound: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    family: Family,
    model: Option<PathBuf>,
    query: Option<PathBuf>,
    n: usize,
    side: usize,
    card: usize,
    pattern: Pattern,
    sigmas: Vec<f64>,
    trials: usize,
    algs: Vec<Alg>,
    reference: Reference,
    common: CommonSolveFlags,
    out: Option<PathBuf>,
    format: OutputFormat,
) -> CliResult<()> {
    if trials == 0 {
        return Err(CliError::Usage("trials must be at least 1".into()));
    }
    if sigmas.iter().any(|&s| !(s > 0.0)) {
        return Err(CliError::Usage("sigma values must be positive".into()));
    }
    if algs.contains(&Alg::MixedJgbp) && family == Family::UaiFile {
        // allowed; other algorithms require a pairwise model below
    }
    mixbp::par::configure_threads(common.jobs);
    let start = std::time::Instant::now();
    let fixed_model: Option<PairwiseModel> = match family {
        Family::UaiFile => {
            let model = model.ok_or_else(|| CliError::Usage("uai-file family needs --model".into()))?;
            let query = query.ok_or_else(|| CliError::Usage("uai-file family needs --query".into()))?;
            let fm = load_model(&model, &query, None)?;
            Some(fm.to_pairwise().map_err(|_| {
                CliError::Usage("benchmarks currently require pairwise-representable models".into())
            })?)
        }
        _ => None,
    };
    let gen_model = |sigma: f64, trial: usize| -> mixbp::Result<PairwiseModel> {
        let seed = common.seed.wrapping_add(trial as u64);
        match family {
            Family::Hmm => mixbp::io::gen_hmm(n, sigma, seed),
            Family::Tree => mixbp::io::gen_latent_tree(n, sigma, seed),
            Family::Grid => {
                let p = match pattern {
                    Pattern::SumLoopy => mixbp::io::GridPattern::SumLoopy,
                    Pattern::MaxLoopy => mixbp::io::GridPattern::MaxLoopy,
                };
                mixbp::io::gen_grid(side, p, sigma, seed, card)
            }
            Family::UaiFile => Ok(fixed_model.clone().expect("loaded above")),
        }
    };
    let oracle_opts = OracleOptions::with_cap(common.cap);
    let mut rows = Vec::new();
    for &sigma in &sigmas {
        // per trial: each algorithm's outcome plus the reference value
        let trial_results: Vec<mixbp::Result<(Vec<TrialOutcome>, f64)>> =
            mixbp::par::map_indexed(mixbp::par::Parallelism::default(), trials, |t| {
                let m = gen_model(sigma, t)?;
                let qe = QEvaluator::new(&m);
                let mut outcomes = Vec::with_capacity(algs.len());
                for &alg in &algs {
                    let mut c = CommonSolveFlags {
                        max_iters: common.max_iters,
                        damping: common.damping,
                        inits: common.inits,
                        seed: common.seed.wrapping_add(t as u64),
                        jobs: 0,
                        cap: common.cap,
                    };
                    c.seed = common.seed.wrapping_add(t as u64);
                    let report = run_alg(&m, alg, &c).map_err(|e| match e {
                        CliError::Core(c) => c,
                        other => mixbp::Error::InvalidArgument(other.to_string()),
                    })?;
                    let q = match report.q_exact {
                        Some(q) => q,
                        None => qe.evaluate(&report.decode_states(), &oracle_opts)?,
                    };
                    outcomes.push(TrialOutcome {
                        q,
                        converged: report.converged,
                        bound: report.bound,
                    });
                }
                let reference_value = match reference {
                    Reference::Oracle => oracle::marginal_map_exact(&m, &oracle_opts)?.1,
                    Reference::Best => outcomes
                        .iter()
                        .map(|o| o.q)
                        .fold(f64::NEG_INFINITY, f64::max),
                };
                Ok((outcomes, reference_value))
            });
        let mut per_alg: Vec<Vec<(f64, bool, Option<f64>, f64)>> = vec![Vec::new(); algs.len()];
        for r in trial_results {
            let (outcomes, reference_value) = r?;
            for (k, o) in outcomes.into_iter().enumerate() {
                per_alg[k].push((o.q, o.converged, o.bound, reference_value));
            }
        }
        for (k, alg) in algs.iter().enumerate() {
            let data = &per_alg[k];
            let nt = data.len() as f64;
            let success = data.iter().filter(|(q, _, _, r)| *q >= r - 1e-9).count() as f64 / nt;
            let mean_err = data.iter().map(|(q, _, _, r)| (r - q).max(0.0)).sum::<f64>() / nt;
            let converged_frac = data.iter().filter(|(_, c, _, _)| *c).count() as f64 / nt;
            let bound_gaps: Vec<f64> = data
                .iter()
                .filter(|(_, c, b, _)| *c && b.is_some())
                .map(|(_, _, b, r)| b.unwrap() - r)
                .collect();
            let mean_bound_gap = if bound_gaps.is_empty() {
                None
            } else {
                Some(bound_gaps.iter().sum::<f64>() / bound_gaps.len() as f64)
            };
            rows.push(BenchRow {
                sigma,
                algorithm: alg.name().to_string(),
                success_rate: success,
                mean_rel_error: mean_err,
                mean_bound_gap,
                converged_frac,
                trials: data.len(),
            });
        }
    }
    let family_name = match family {
        Family::Hmm => "hmm",
        Family::Tree => "tree",
        Family::Grid => "grid",
        Family::UaiFile => "uai-file",
    };
    let reference_name = match reference {
        Reference::Oracle => "oracle",
        Reference::Best => "best-of-algorithms",
    };
    let summary = BenchSummary {
        schema: "mixbp-bench-v1".into(),
        family: family_name.into(),
        reference: reference_name.into(),
        seed: common.seed,
        trials,
        sigmas: sigmas.clone(),
        algorithms: algs.iter().map(|a| a.name().to_string()).collect(),
        rows,
        wall_time_ms: start.elapsed().as_secs_f64() * 1000.0,
    };
    let text = match format {
        OutputFormat::Csv => {
            let mut s = format!(
                "# mixbp-bench-v1 family={} reference={} seed={} trials={}\n",
                family_name, reference_name, common.seed, trials
            );
            s.push_str("sigma,algorithm,success_rate,mean_rel_error,mean_bound_gap,converged_frac,trials\n");
            for r in &summary.rows {
                s.push_str(&format!(
                    "{:.6},{},{:.6},{:.6},{},{:.6},{}\n",
                    r.sigma,
                    r.algorithm,
                    r.success_rate,
                    r.mean_rel_error,
                    r.mean_bound_gap
                        .map(|g| format!("{:.6}", g))
                        .unwrap_or_default(),
                    r.converged_frac,
                    r.trials
                ));
            }
            s
        }
        OutputFormat::Json => serde_json::to_string_pretty(&summary).expect("summary serializes"),
    };
    emit(&text, out.as_ref())
}

#[derive(Serialize)]
struct CheckReport {
    algorithm: String,
    converged: bool,
    message_change: f64,
    reparameterization: Option<f64>,
    consistency_sum: Option<f64>,
    consistency_max: Option<f64>,
    consistency_argmax: Option<f64>,
    perturbed: Option<Box<CheckReport>>,
}

fn cmd_check(
    model: PathBuf,
    query: PathBuf,
    evid: Option<PathBuf>,
    alg: Alg,
    perturb: bool,
    common: CommonSolveFlags,
) -> CliResult<()> {
    mixbp::par::configure_threads(common.jobs);
    let fm = load_model(&model, &query, evid.as_ref())?;
    let pairwise = fm
        .to_pairwise()
        .map_err(|_| CliError::Usage("check requires a pairwise-representable model".into()))?;
    let variant = match alg {
        Alg::SumProduct => BpVariant::SumProduct,
        Alg::MaxProduct => BpVariant::MaxProduct,
        Alg::MixedBethe => BpVariant::Mixed,
        Alg::Jiang => BpVariant::Hybrid,
        other => {
            return Err(CliError::Usage(format!(
                "check supports message-passing algorithms, not '{}'",
                other.name()
            )))
        }
    };
    let opts = SolverOptions {
        max_iters: common.max_iters,
        damping: common.damping,
        seed: common.seed,
        ..SolverOptions::deterministic()
    };
    let rho = vec![1.0; pairwise.edges().len()];
    let (msgs, converged, _iters, delta) = mp::run_variant(&pairwise, variant, &rho, &opts, None);
    let beliefs = mixed_beliefs_from_messages(&pairwise, &rho, &msgs);
    let build = |beliefs: &mixbp::mp::MixedBeliefSet| -> CheckReport {
        let cons = check_mixed_consistency(&pairwise, beliefs);
        CheckReport {
            algorithm: alg.name().to_string(),
            converged,
            message_change: delta,
            reparameterization: check_reparameterization(&pairwise, &rho, beliefs).ok(),
            consistency_sum: cons.sum,
            consistency_max: cons.max,
            consistency_argmax: cons.argmax,
            perturbed: None,
        }
    };
    let mut report = build(&beliefs);
    if perturb {
        let mut damaged = beliefs;
        if let Some(first) = damaged.edge.first_mut() {
            first[0] *= 2.0;
        } else if let Some(first) = damaged.node.first_mut() {
            first[0] *= 2.0;
        }
        report.perturbed = Some(Box::new(build(&damaged)));
    }
    let json = serde_json::to_string_pretty(&report).expect("check report serializes");
    println!("{}", json);
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Solve {
            model,
            query,
            evid,
            alg,
            common,
            out,
        } => cmd_solve(model, query, evid, alg, common, out),
        Command::Gen {
            family,
            n,
            side,
            card,
            pattern,
            sigma,
            seed,
            out,
        } => cmd_gen(family, n, side, card, pattern, sigma, seed, out),
        Command::Bench {
            family,
            model,
            query,
            n,
            side,
            card,
            pattern,
            sigmas,
            trials,
            algs,
            reference,
            common,
            out,
            format,
        } => cmd_bench(
            family, model, query, n, side, card, pattern, sigmas, trials, algs, reference, common,
            out, format,
        ),
        Command::Check {
            model,
            query,
            evid,
            alg,
            perturb,
            common,
        } => cmd_check(model, query, evid, alg, perturb, common),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{}", e);
                return ExitCode::SUCCESS;
            }
            eprint!("{}", e);
            return ExitCode::from(4);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(exit_code(&e))
        }
    }
}
