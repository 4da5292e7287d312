mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use nlfs::baselines::BaselineConfig;
use nlfs::diagnostics::{summarize, PosteriorSummary};
use nlfs::distributions::{child_seed, rng_from_seed};
use nlfs::io::{curve_table, monitored, params_table, read_dataset, read_draws, trace_table, write_draws, DrawsFile};
use nlfs::sampler::NormalPrior;
use nlfs::simulation::{results_table, run_study, Method, Scenario, StudyResult, StudySettings, TruthSpec};
use nlfs::{run_nlfs, ChainDraws, FunctionSpace, NlfsConfig, Rescaling, Shrinkage};

use config::ConfigFile;

const DRAWS_FILE: &str = "draws.csv";

/// Failure classes, each with its own exit status.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<nlfs::Error> for Failure {
    fn from(e: nlfs::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Data(e.to_string())
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

type Outcome<T = ()> = Result<T, Failure>;

#[derive(Parser)]
#[command(
    name = "nlfs",
    version,
    about = "Spline regression shrunk toward non-linear parametric families"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one dataset and write curve, parameter and trace summaries.
    Fit(FitArgs),
    /// Run a replicated simulation study and write the RMSE table.
    Simulate(SimulateArgs),
    /// Recompute summaries from a stored draws file.
    Summarize(SummarizeArgs),
}

#[derive(Args)]
struct FitArgs {
    /// CSV file with header `x,y`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory [default: .]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Method id, e.g. `nlfs_hill_os` or `pspline`; excludes --space and --shrinkage.
    #[arg(long)]
    method: Option<String>,
    /// Target space: `hill`, `power` or `hill+power` [default: hill]
    #[arg(long)]
    space: Option<String>,
    /// Scale prior: `os` (bounded slice) or `hc` (half-Cauchy) [default: os]
    #[arg(long)]
    shrinkage: Option<String>,
    /// Total iterations including burn-in [default: 10000]
    #[arg(long)]
    draws: Option<usize>,
    /// Discarded leading iterations [default: 2000]
    #[arg(long)]
    burn_in: Option<usize>,
    /// Interior knots of the cubic spline [default: 15]
    #[arg(long)]
    knots: Option<usize>,
    /// Lower bound of tau² for the slice prior [default: 0.001]
    #[arg(long)]
    tau2_min: Option<f64>,
    /// Upper bound of tau² for the slice prior [default: 10]
    #[arg(long)]
    tau2_max: Option<f64>,
    /// Prior mean of the intercept [default: 0]
    #[arg(long, allow_hyphen_values = true)]
    intercept_mean: Option<f64>,
    /// Prior variance of the intercept [default: 20 for NLFS, 1 for the comparison fits]
    #[arg(long)]
    intercept_var: Option<f64>,
    /// Evaluation points of the curve on the rescaled covariate [default: 101]
    #[arg(long)]
    grid_points: Option<usize>,
    /// Credible level of the intervals [default: 0.95]
    #[arg(long)]
    level: Option<f64>,
    /// Chain seed; generated and logged when absent.
    #[arg(long)]
    seed: Option<u64>,
    /// TOML file whose `[fit]` table supplies defaults for these flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Comma-separated truths: `hill`, `power`, `hill_downturn` [default: all]
    #[arg(long, value_delimiter = ',')]
    truth: Option<Vec<String>>,
    /// Comma-separated sample sizes [default: 50,100,200,500]
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Comma-separated noise variances [default: 0.005,0.05]
    #[arg(long, value_delimiter = ',')]
    sigma2: Option<Vec<f64>>,
    /// Comma-separated method ids or `all` [default: all]
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Replicates per scenario [default: 100]
    #[arg(long)]
    reps: Option<usize>,
    /// Worker threads [default: available cores]
    #[arg(long)]
    workers: Option<usize>,
    /// Total iterations per fit including burn-in [default: 10000]
    #[arg(long)]
    draws: Option<usize>,
    /// Discarded leading iterations per fit [default: 2000]
    #[arg(long)]
    burn_in: Option<usize>,
    /// Study seed; generated and logged when absent.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [default: .]
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML file whose `[simulate]` table supplies defaults for these flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Draws file written by `fit`.
    #[arg(long)]
    draws: Option<PathBuf>,
    /// Output directory [default: .]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Credible level of the intervals [default: 0.95]
    #[arg(long)]
    level: Option<f64>,
    /// TOML file whose `[summarize]` table supplies defaults for these flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn log(msg: impl AsRef<str>) {
    eprintln!("nlfs: {}", msg.as_ref());
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let nanos = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_nanos() as u64);
        let seed = child_seed(nanos, &[u64::from(std::process::id())]);
        log(format!("no --seed given; using generated seed {seed}"));
        seed
    })
}

fn check_level(level: f64) -> Outcome<f64> {
    if level > 0.0 && level < 1.0 {
        Ok(level)
    } else {
        Err(usage(format!("--level must lie in (0, 1), got {level}")))
    }
}

fn check_chain(draws: usize, burn_in: usize) -> Outcome {
    if draws == 0 || burn_in >= draws {
        return Err(usage(format!(
            "need 0 <= --burn-in < --draws, got {burn_in} and {draws}"
        )));
    }
    Ok(())
}

fn prepare_out(dir: &Path) -> Outcome {
    fs::create_dir_all(dir).map_err(|e| Failure::Data(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, contents: &str) -> Outcome {
    fs::write(path, contents).map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))
}

fn read_file(path: &Path) -> Outcome<String> {
    fs::read_to_string(path).map_err(|e| Failure::Data(format!("cannot read {}: {e}", path.display())))
}

/// Curve, parameter and trace tables for one chain.
fn write_summaries(dir: &Path, draws: &ChainDraws, rescaling: &Rescaling, level: f64) -> Outcome<PosteriorSummary> {
    let summary = summarize(draws, level)?;
    write_file(&dir.join("summary_curve.csv"), &curve_table(&summary, rescaling))?;
    write_file(&dir.join("summary_params.csv"), &params_table(&summary))?;
    for name in monitored(draws) {
        write_file(&dir.join(format!("trace_{name}.csv")), &trace_table(draws, name)?)?;
    }
    Ok(summary)
}

fn grid(points: usize) -> Outcome<Vec<f64>> {
    if points < 2 {
        return Err(usage("--grid-points must be at least 2"));
    }
    Ok((0..points).map(|i| i as f64 / (points - 1) as f64).collect())
}

fn parse_shrinkage(s: &str) -> Outcome<Shrinkage> {
    match s.trim().to_ascii_lowercase().as_str() {
        "os" => Ok(Shrinkage::own_slice()),
        "hc" => Ok(Shrinkage::HalfCauchy),
        other => Err(usage(format!("unknown shrinkage '{other}'; expected `os` or `hc`"))),
    }
}

fn cmd_fit(args: FitArgs) -> Outcome {
    let file = ConfigFile::load(args.config.as_deref()).map_err(usage)?.fit;
    let input = args
        .input
        .or(file.input)
        .ok_or_else(|| usage("fit needs --input (or `input` in the config file)"))?;
    let out = args.out.or(file.out).unwrap_or_else(|| PathBuf::from("."));
    let method = args.method.or(file.method);
    let space = args.space.or(file.space);
    let shrinkage = args.shrinkage.or(file.shrinkage);
    let n_draws = args.draws.or(file.draws).unwrap_or(10_000);
    let burn_in = args.burn_in.or(file.burn_in).unwrap_or(2_000);
    let knots = args.knots.or(file.knots).unwrap_or(15);
    let level = check_level(args.level.or(file.level).unwrap_or(0.95))?;
    let grid = grid(args.grid_points.or(file.grid_points).unwrap_or(101))?;
    check_chain(n_draws, burn_in)?;
    if knots == 0 {
        return Err(usage("--knots must be positive"));
    }

    let method = method
        .map(|m| m.parse::<Method>().map_err(|e| usage(e.to_string())))
        .transpose()?;
    if method.is_some() && (space.is_some() || shrinkage.is_some()) {
        return Err(usage("--method cannot be combined with --space or --shrinkage"));
    }

    let defaults = NlfsConfig::default();
    let (tau_lo, tau_hi) = defaults.tau2_bounds;
    let intercept_mean = args.intercept_mean.or(file.intercept_mean);
    let intercept_var = args.intercept_var.or(file.intercept_var);
    let nlfs = NlfsConfig {
        n_draws,
        burn_in,
        n_internal_knots: knots,
        shrinkage: parse_shrinkage(shrinkage.as_deref().unwrap_or("os"))?,
        tau2_bounds: (
            args.tau2_min.or(file.tau2_min).unwrap_or(tau_lo),
            args.tau2_max.or(file.tau2_max).unwrap_or(tau_hi),
        ),
        intercept_prior: NormalPrior {
            mean: intercept_mean.unwrap_or(defaults.intercept_prior.mean),
            var: intercept_var.unwrap_or(defaults.intercept_prior.var),
        },
        grid: grid.clone(),
        ..defaults
    };
    nlfs.validate().map_err(|e| usage(e.to_string()))?;
    let base = BaselineConfig::default();
    let baseline = BaselineConfig {
        n_draws,
        burn_in,
        n_internal_knots: knots,
        intercept_prior: NormalPrior {
            mean: intercept_mean.unwrap_or(base.intercept_prior.mean),
            var: intercept_var.unwrap_or(base.intercept_prior.var),
        },
        grid,
        ..base
    };
    let space = match &method {
        Some(_) => None,
        None => Some(FunctionSpace::parse(space.as_deref().unwrap_or("hill")).map_err(|e| usage(e.to_string()))?),
    };

    let text = fs::File::open(&input).map_err(|e| Failure::Data(format!("cannot open {}: {e}", input.display())))?;
    let (data, rescaling) = read_dataset(text)?;
    let seed = resolve_seed(args.seed.or(file.seed));
    let mut rng = rng_from_seed(seed);
    let label = method.map_or_else(
        || format!("nlfs({})", space.as_ref().expect("set without --method").name()),
        |m| m.id().to_string(),
    );
    log(format!("fitting {label} to {} observations (seed {seed})", data.len()));
    let started = Instant::now();
    let draws = match (method, &space) {
        (Some(m), _) => m.fit(&data, &StudySettings { nlfs, baseline }, &mut rng)?,
        (None, Some(space)) => run_nlfs(&data, space, &nlfs, &mut rng)?,
        (None, None) => unreachable!("space is parsed whenever no method is given"),
    };

    prepare_out(&out)?;
    let stored = DrawsFile { draws, rescaling };
    write_file(&out.join(DRAWS_FILE), &write_draws(&stored))?;
    let summary = write_summaries(&out, &stored.draws, &stored.rescaling, level)?;
    let mut done = format!("done in {:.1}s", started.elapsed().as_secs_f64());
    if let Some(omega) = summary.param("omega") {
        let _ = write!(done, "; posterior mean omega {:.3}", omega.mean);
    }
    if summary.numerical_rejections > 0 {
        let _ = write!(
            done,
            "; {} proposals rejected on numerical grounds",
            summary.numerical_rejections
        );
    }
    log(format!("{done}; outputs in {}", out.display()));
    Ok(())
}

fn parse_methods(ids: &[String]) -> Outcome<Vec<Method>> {
    if ids.iter().any(|m| m.trim().eq_ignore_ascii_case("all")) {
        return Ok(Method::ALL.to_vec());
    }
    ids.iter()
        .map(|m| m.parse::<Method>().map_err(|e| usage(e.to_string())))
        .collect()
}

fn replicates_table(results: &[StudyResult]) -> String {
    let mut s = String::from("truth,n,sigma2,method,rep,rmse,omega,error\n");
    for r in results {
        let sc = &r.scenario;
        for rep in &r.replicates {
            let (rmse, omega, err) = match &rep.result {
                Ok(fit) => (
                    fit.rmse.to_string(),
                    fit.omega.map_or(String::new(), |w| w.to_string()),
                    String::new(),
                ),
                Err(e) => (String::new(), String::new(), e.to_string().replace([',', '\n'], ";")),
            };
            let _ = writeln!(
                s,
                "{},{},{},{},{},{rmse},{omega},{err}",
                sc.truth.name(),
                sc.n,
                sc.sigma2,
                sc.method,
                rep.rep
            );
        }
    }
    s
}

fn cmd_simulate(args: SimulateArgs) -> Outcome {
    let file = ConfigFile::load(args.config.as_deref()).map_err(usage)?.simulate;
    let truths = match args.truth.or(file.truth) {
        None => TruthSpec::ALL.to_vec(),
        Some(names) => names
            .iter()
            .map(|t| t.parse::<TruthSpec>().map_err(|e| usage(e.to_string())))
            .collect::<Outcome<_>>()?,
    };
    let sizes = args.n.or(file.n).unwrap_or_else(|| vec![50, 100, 200, 500]);
    let noise = args.sigma2.or(file.sigma2).unwrap_or_else(|| vec![0.005, 0.05]);
    let methods = match args.methods.or(file.methods) {
        None => Method::ALL.to_vec(),
        Some(ids) => parse_methods(&ids)?,
    };
    let reps = args.reps.or(file.reps).unwrap_or(100);
    let workers = args
        .workers
        .or(file.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let n_draws = args.draws.or(file.draws).unwrap_or(10_000);
    let burn_in = args.burn_in.or(file.burn_in).unwrap_or(2_000);
    let out = args.out.or(file.out).unwrap_or_else(|| PathBuf::from("."));
    if reps == 0 {
        return Err(usage("--reps must be at least 1"));
    }
    if workers == 0 {
        return Err(usage("--workers must be at least 1"));
    }
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(usage("--n needs positive sample sizes"));
    }
    if noise.is_empty() || noise.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(usage("--sigma2 needs positive finite variances"));
    }
    if truths.is_empty() || methods.is_empty() {
        return Err(usage("empty --truth or --methods list"));
    }
    check_chain(n_draws, burn_in)?;

    let seed = resolve_seed(args.seed.or(file.seed));
    let scenarios = Scenario::grid(&truths, &sizes, &noise, &methods, reps, seed);
    let settings = StudySettings::default().with_chain_length(n_draws, burn_in);
    log(format!(
        "running {} scenarios x {reps} replicates on {workers} worker(s) (seed {seed})",
        scenarios.len()
    ));
    let started = Instant::now();
    let results = run_study(&scenarios, workers, &settings)?;
    let failed: usize = results.iter().map(|r| r.failures().len()).sum();
    if failed > 0 {
        log(format!("{failed} replicate fit(s) failed; see study_replicates.csv"));
    }

    prepare_out(&out)?;
    write_file(&out.join("study_results.csv"), &results_table(&results))?;
    write_file(&out.join("study_replicates.csv"), &replicates_table(&results))?;
    log(format!(
        "done in {:.1}s; outputs in {}",
        started.elapsed().as_secs_f64(),
        out.display()
    ));
    Ok(())
}

fn cmd_summarize(args: SummarizeArgs) -> Outcome {
    let file = ConfigFile::load(args.config.as_deref()).map_err(usage)?.summarize;
    let path = args
        .draws
        .or(file.draws)
        .ok_or_else(|| usage("summarize needs --draws (or `draws` in the config file)"))?;
    let out = args.out.or(file.out).unwrap_or_else(|| PathBuf::from("."));
    let level = check_level(args.level.or(file.level).unwrap_or(0.95))?;
    let stored = read_draws(&read_file(&path)?)?;
    prepare_out(&out)?;
    write_summaries(&out, &stored.draws, &stored.rescaling, level)?;
    log(format!(
        "summarized {} draws of {}",
        stored.draws.len(),
        stored.draws.method
    ));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Summarize(a) => cmd_summarize(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            log(format!("error: {}", f.message()));
            ExitCode::from(f.code())
        }
    }
}
