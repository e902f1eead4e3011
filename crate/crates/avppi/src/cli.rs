//! Command line: `analyze`, `simulate` and `tune`.
//!
//! Every effective setting, after merging flags, the optional `--config`
//! file and the defaults, is written to a manifest next to the output
//! (`FILE.manifest.txt`), or to stderr as `# key=value` lines when the
//! output goes to stdout.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use avppi_core::{
    rho_opt, tau_heuristic, Analyzer, CsConfig, ErrorKind, EstimatorFlavor, FnLoss, Grid, Population, Prior,
    Region, StreamState,
};
use clap::{Args, Parser, Subcommand};

use crate::config::ConfigFile;
use crate::error::{AppError, Result};
use crate::io::{self as fmt, Manifest, RecordReader};
use crate::sim::{self, Method, ReplayData, Scenario, SimConfig};

const DEFAULT_ALPHA: f64 = 0.1;
const DEFAULT_T_STAR: u64 = 500;
const DEFAULT_START_N: u64 = 40;
const DEFAULT_PRIOR_DOF: f64 = 3.0;
/// Half-width of the automatic θ grid, in standard errors of the label mean.
const AUTO_GRID_SE: f64 = 8.0;

#[derive(Debug, Parser)]
#[command(name = "avppi", version, about = "Streaming confidence sequences for prediction-powered estimates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stream a label,prediction file and print one interval per labelled row.
    Analyze(AnalyzeArgs),
    /// Monte Carlo coverage and width study.
    Simulate(SimulateArgs),
    /// Print the mixture parameter ρ and the prior scale τ tuned at t*.
    Tune(TuneArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// key = value file with defaults for any long flag.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Sample size at which ρ and the default prior scale are tuned.
    #[arg(long)]
    t_star: Option<u64>,
    /// Mixture parameter; overrides the value tuned at t*.
    #[arg(long)]
    rho: Option<f64>,
    /// Error budget of the unlabelled-mean sequence (default α/10).
    #[arg(long)]
    delta: Option<f64>,
    /// Prior location (default 0).
    #[arg(long)]
    prior_location: Option<f64>,
    /// Prior scale (default 1/√t*).
    #[arg(long)]
    prior_scale: Option<f64>,
    /// Degrees of freedom of the Student-t prior.
    #[arg(long)]
    prior_dof: Option<f64>,
    /// Treat the unlabelled pool as the whole population.
    #[arg(long)]
    assume_infinite_unlabelled: bool,
    /// Output file (default stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: Common,
    /// CSV with `label` and `prediction` columns.
    #[arg(long)]
    data: Option<PathBuf>,
    /// classical, ppi or ppi++.
    #[arg(long)]
    method: Option<String>,
    /// none, gaussian, laplace, student-t or improper.
    #[arg(long)]
    prior: Option<String>,
    /// Known mean of the predictions over the population.
    #[arg(long, allow_hyphen_values = true)]
    population_mean: Option<f64>,
    /// Count labelled predictions in the unlabelled pool too.
    #[arg(long)]
    pool_labelled: bool,
    /// θ grid `lo:hi:steps` for inversion by search.
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    /// squared (closed form) or generic (subgradients on the buffered data).
    #[arg(long)]
    loss: Option<String>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// noisy, biased, exact or replay.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    sigma_y: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    upsilon: Option<f64>,
    /// Noise degrees of freedom, a number > 2 or `inf`.
    #[arg(long)]
    df: Option<String>,
    #[arg(long)]
    noise_scale: Option<f64>,
    /// Known σ of the exact scenario.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    reps: Option<u64>,
    #[arg(long)]
    n_max: Option<u64>,
    /// First n reported (the miscoverage clock starts here).
    #[arg(long)]
    start_n: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated subset of classical, ppi, ppi++ (known-sigma for
    /// the exact scenario).
    #[arg(long)]
    method: Option<String>,
    /// Comma-separated priors; each method runs once per prior.
    #[arg(long)]
    prior: Option<String>,
    /// Size of the unlabelled pool (synthetic) or of the held-out split
    /// (replay). Synthetic runs without it use the known prediction mean.
    #[arg(long)]
    n_unlabelled: Option<usize>,
    /// Replay: labelled (and possibly unlabelled) records.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Replay: extra prediction-only records.
    #[arg(long)]
    unlabelled: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Args)]
struct TuneArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    t_star: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
}

const COMMON_KEYS: &[&str] = &[
    "alpha",
    "t-star",
    "rho",
    "delta",
    "prior-location",
    "prior-scale",
    "prior-dof",
    "assume-infinite-unlabelled",
    "out",
];
const ANALYZE_KEYS: &[&str] = &["data", "method", "prior", "population-mean", "pool-labelled", "grid", "loss"];
const SIMULATE_KEYS: &[&str] = &[
    "scenario",
    "sigma-y",
    "upsilon",
    "df",
    "noise-scale",
    "sigma",
    "reps",
    "n-max",
    "start-n",
    "seed",
    "method",
    "prior",
    "n-unlabelled",
    "data",
    "unlabelled",
    "jobs",
];

/// Runs the command line with the process's stdout and stderr; returns
/// the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

/// Like [`run`] with explicit output streams.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests also arrive here.
            return if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                2
            } else {
                let _ = write!(stdout, "{}", e.render());
                0
            };
        }
    };
    let command_line = args
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join(" ");
    let result = match cli.command {
        Command::Analyze(a) => analyze(a, &command_line, stdout, stderr),
        Command::Simulate(a) => simulate(a, &command_line, stdout, stderr),
        Command::Tune(a) => tune(a, stdout),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.code()
        }
    }
}

fn load_config(path: &Option<PathBuf>, known: &[&[&str]]) -> Result<ConfigFile> {
    let file = match path {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let keys: Vec<&str> = known.iter().flat_map(|k| k.iter().copied()).collect();
    file.check_keys(&keys)?;
    Ok(file)
}

fn new_manifest(command_line: &str, command: &str) -> Manifest {
    let mut m = Manifest::default();
    m.push("command-line", command_line);
    m.push("command", command);
    m.push("version", env!("CARGO_PKG_VERSION"));
    let now = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
    m.push("started-unix", now.as_secs());
    m
}

/// α, t*, ρ, δ and the prior hyperparameters after merging.
struct Resolved {
    cs: CsConfig,
    prior_location: f64,
    prior_scale: f64,
    prior_dof: f64,
    assume_infinite: bool,
    out: Option<PathBuf>,
}

fn resolve_common(c: &Common, file: &ConfigFile, m: &mut Manifest) -> Result<Resolved> {
    let alpha = file.pick(c.alpha, "alpha")?.unwrap_or(DEFAULT_ALPHA);
    let t_star = file.pick(c.t_star, "t-star")?.unwrap_or(DEFAULT_T_STAR);
    let mut cs = CsConfig::new(alpha, t_star)?;
    if let Some(rho) = file.pick(c.rho, "rho")? {
        cs = cs.with_rho(rho);
    }
    if let Some(delta) = file.pick(c.delta, "delta")? {
        cs = cs.with_delta(delta);
    }
    cs.validate()?;
    let prior_scale = match file.pick(c.prior_scale, "prior-scale")? {
        Some(s) => s,
        None => tau_heuristic(t_star)?,
    };
    let r = Resolved {
        cs,
        prior_location: file.pick(c.prior_location, "prior-location")?.unwrap_or(0.0),
        prior_scale,
        prior_dof: file.pick(c.prior_dof, "prior-dof")?.unwrap_or(DEFAULT_PRIOR_DOF),
        assume_infinite: file.switch(c.assume_infinite_unlabelled, "assume-infinite-unlabelled")?,
        out: file.pick(c.out.clone(), "out")?,
    };
    m.push("alpha", fmt::fmt_num(alpha));
    m.push("t-star", t_star);
    m.push("rho", fmt::fmt_num(cs.rho));
    m.push("delta", cs.delta.map_or("alpha/10".to_string(), fmt::fmt_num));
    m.push("prior-location", fmt::fmt_num(r.prior_location));
    m.push("prior-scale", fmt::fmt_num(r.prior_scale));
    m.push("prior-dof", fmt::fmt_num(r.prior_dof));
    m.push("assume-infinite-unlabelled", r.assume_infinite);
    Ok(r)
}

impl Resolved {
    fn prior(&self, name: &str) -> Result<Option<Prior>> {
        let (loc, scale) = (self.prior_location, self.prior_scale);
        Ok(match name.trim() {
            "none" => None,
            "gaussian" => Some(Prior::gaussian(loc, scale)?),
            "laplace" => Some(Prior::laplace(loc, scale)?),
            "student-t" => Some(Prior::student_t(loc, scale, self.prior_dof)?),
            "improper" => Some(Prior::Improper),
            other => return Err(AppError::config(format!("unknown prior `{other}`"))),
        })
    }
}

fn parse_flavor(name: &str) -> Result<EstimatorFlavor> {
    match name.trim() {
        "classical" => Ok(EstimatorFlavor::Classical),
        "ppi" => Ok(EstimatorFlavor::Ppi),
        "ppi++" => Ok(EstimatorFlavor::PpiPlus),
        other => Err(AppError::config(format!("unknown method `{other}`"))),
    }
}

fn parse_grid(text: &str) -> Result<Grid> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || AppError::config(format!("grid `{text}`: expected lo:hi:steps"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let steps: usize = parts[2].trim().parse().map_err(|_| bad())?;
    Ok(Grid::new(lo, hi, steps)?)
}

/// Opens `--out` (or stdout) and returns where its manifest goes.
fn open_out<'a>(out: &Option<PathBuf>, stdout: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| AppError::config(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(stdout),
    })
}

fn write_manifest(m: &Manifest, out: &Option<PathBuf>, stderr: &mut dyn Write) -> Result<()> {
    match out {
        Some(p) => {
            let path = Manifest::path_for(p);
            let f = File::create(&path)
                .map_err(|e| AppError::config(format!("cannot create {}: {e}", path.display())))?;
            let mut w = BufWriter::new(f);
            m.write_to(&mut w, "")?;
            w.flush()?;
        }
        None => m.write_to(stderr, "# ")?,
    }
    Ok(())
}

fn analyze(a: AnalyzeArgs, command_line: &str, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let file = load_config(&a.common.config, &[COMMON_KEYS, ANALYZE_KEYS])?;
    let mut m = new_manifest(command_line, "analyze");
    let r = resolve_common(&a.common, &file, &mut m)?;
    let data: PathBuf = file
        .pick(a.data.clone(), "data")?
        .ok_or_else(|| AppError::config("--data is required"))?;
    let method = file.pick(a.method.clone(), "method")?.unwrap_or_else(|| "ppi++".into());
    let prior_name = file.pick(a.prior.clone(), "prior")?.unwrap_or_else(|| "none".into());
    let population_mean: Option<f64> = file.pick(a.population_mean, "population-mean")?;
    let pool_labelled = file.switch(a.pool_labelled, "pool-labelled")?;
    let grid = file.pick(a.grid.clone(), "grid")?.map(|g| parse_grid(&g)).transpose()?;
    let loss = file.pick(a.loss.clone(), "loss")?.unwrap_or_else(|| "squared".into());
    let generic = match loss.as_str() {
        "squared" => false,
        "generic" => true,
        other => return Err(AppError::config(format!("unknown loss `{other}`"))),
    };

    let population = match (population_mean, r.assume_infinite) {
        (Some(_), true) => {
            return Err(AppError::config(
                "--population-mean and --assume-infinite-unlabelled are exclusive",
            ))
        }
        (Some(mu), false) => Population::KnownMean(mu),
        (None, true) => Population::AssumeInfinite,
        (None, false) => Population::Finite,
    };
    let flavor = parse_flavor(&method)?;
    let cfg = r.cs.with_prior(r.prior(&prior_name)?).with_population(population);
    let squared_by_search = FnLoss(|theta: f64, _: Option<&[f64]>, y: f64| theta - y);
    let analyzer = Analyzer::new(flavor, cfg)?;
    let analyzer = if generic {
        analyzer.with_loss(&squared_by_search)?
    } else {
        analyzer
    };

    m.push("data", data.display());
    m.push("method", flavor.name());
    m.push("prior", &prior_name);
    m.push(
        "population",
        match population {
            Population::Finite => "finite".to_string(),
            Population::AssumeInfinite => "assume-infinite".to_string(),
            Population::KnownMean(mu) => format!("known-mean:{}", fmt::fmt_num(mu)),
        },
    );
    m.push("pool-labelled", pool_labelled);
    m.push("loss", &loss);
    m.push(
        "grid",
        match grid {
            Some(g) => format!("{}:{}:{}", fmt::fmt_num(g.lo), fmt::fmt_num(g.hi), g.steps),
            None if generic => format!("auto(mean_y +- {AUTO_GRID_SE} se, 2001 points)"),
            None => "none".to_string(),
        },
    );

    let reader = RecordReader::open(&data)?;
    let mut state = if generic { StreamState::buffered() } else { StreamState::new() }.with_pooling(pool_labelled);
    let mut out = open_out(&r.out, stdout)?;
    writeln!(out, "{}", fmt::INTERVAL_HEADER)?;
    let mut skipped = 0u64;
    for rec in reader {
        let (line, obs) = rec?;
        let labelled = obs.is_labelled();
        state
            .update(obs)
            .map_err(|e| AppError::data(format!("line {line}: {e}")))?;
        if !labelled || state.n() < 3 {
            continue;
        }
        let g = match grid {
            Some(g) => Some(g),
            None if generic => Some(auto_grid(&state)?),
            None => None,
        };
        let (center, lower, upper) = match analyzer.invert(&state, g) {
            Ok(Region::Interval(iv)) => (iv.center, iv.lower(), iv.upper()),
            Ok(Region::Grid(region)) => match region.hull() {
                Some((lo, hi)) => (0.5 * (lo + hi), lo, hi),
                None => (f64::NAN, f64::NAN, f64::NAN),
            },
            Err(e) if e.kind() == ErrorKind::Undefined => {
                if skipped == 0 {
                    writeln!(stderr, "warning: line {line}: {e}; such rows are skipped")?;
                }
                skipped += 1;
                continue;
            }
            Err(e) => return Err(AppError::from(e)),
        };
        fmt::write_interval_row(&mut out, state.n(), state.records(), center, lower, upper)?;
    }
    out.flush()?;
    drop(out);
    if skipped > 1 {
        writeln!(stderr, "warning: {skipped} rows skipped in total")?;
    }
    m.push("rows-skipped", skipped);
    write_manifest(&m, &r.out, stderr)
}

fn auto_grid(state: &StreamState) -> Result<Grid> {
    let n = state.n() as f64;
    let mean = state.mean_y();
    let sd = (state.s_yy() / (n - 1.0)).sqrt();
    let half = (AUTO_GRID_SE * sd / n.sqrt()).max(1e-9 * mean.abs().max(1.0));
    Ok(Grid::around(mean, half)?)
}

fn generated_seed() -> u64 {
    let nanos = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default().as_nanos() as u64;
    nanos ^ (u64::from(std::process::id()) << 32)
}

fn simulate(a: SimulateArgs, command_line: &str, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let file = load_config(&a.common.config, &[COMMON_KEYS, SIMULATE_KEYS])?;
    let mut m = new_manifest(command_line, "simulate");
    let r = resolve_common(&a.common, &file, &mut m)?;
    let kind = file.pick(a.scenario.clone(), "scenario")?.unwrap_or_else(|| "noisy".into());
    let n_unlabelled: Option<usize> = file.pick(a.n_unlabelled, "n-unlabelled")?;
    let scenario = match kind.as_str() {
        "noisy" => {
            let s = file
                .pick(a.sigma_y, "sigma-y")?
                .ok_or_else(|| AppError::config("the noisy scenario needs --sigma-y"))?;
            Scenario::noisy(s)?
        }
        "biased" => {
            let df = file.pick(a.df.clone(), "df")?.unwrap_or_else(|| "inf".into());
            let dof = match df.trim() {
                "inf" | "infinity" => None,
                d => Some(
                    d.parse::<f64>()
                        .map_err(|_| AppError::config(format!("--df `{d}` is neither a number nor inf")))?,
                ),
            };
            Scenario::biased(
                file.pick(a.upsilon, "upsilon")?.unwrap_or(0.0),
                dof,
                file.pick(a.noise_scale, "noise-scale")?.unwrap_or(10.0),
            )?
        }
        "exact" => Scenario::exact(file.pick(a.sigma, "sigma")?.unwrap_or(1.0))?,
        "replay" => {
            let data: PathBuf = file
                .pick(a.data.clone(), "data")?
                .ok_or_else(|| AppError::config("replay needs --data"))?;
            let extra = match file.pick(a.unlabelled.clone(), "unlabelled")? {
                Some(p) => {
                    m.push("unlabelled", p.display());
                    fmt::read_all(&p)?
                }
                None => Vec::new(),
            };
            m.push("data", data.display());
            let mut d = ReplayData::new(display_name(&data), fmt::read_all(&data)?, extra)?;
            d.n_unlabelled = n_unlabelled;
            m.push("theta-star", format!("{} (mean label of the full file)", fmt::fmt_num(d.theta_star())));
            Scenario::Replay(Arc::new(d))
        }
        other => return Err(AppError::config(format!("unknown scenario `{other}`"))),
    };
    let exact = matches!(scenario, Scenario::Exact { .. });
    let default_methods = if exact { "known-sigma" } else { "classical,ppi,ppi++" };
    let method_list = file.pick(a.method.clone(), "method")?.unwrap_or_else(|| default_methods.into());
    let prior_list = file.pick(a.prior.clone(), "prior")?.unwrap_or_else(|| "none".into());
    let priors = prior_list
        .split(',')
        .map(|p| r.prior(p))
        .collect::<Result<Vec<_>>>()?;
    let mut methods = Vec::new();
    for name in method_list.split(',') {
        for &prior in &priors {
            let method = if name.trim() == "known-sigma" {
                Method::KnownSigma { prior }
            } else {
                let flavor = parse_flavor(name)?;
                if flavor == EstimatorFlavor::Classical && prior.is_some() {
                    continue;
                }
                Method::Estimator { flavor, prior }
            };
            methods.push(method);
        }
    }

    let seed = match file.pick(a.seed, "seed")? {
        Some(s) => s,
        None => {
            let s = generated_seed();
            writeln!(stderr, "seed: {s}")?;
            s
        }
    };
    let jobs = file
        .pick(a.jobs, "jobs")?
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let cfg = SimConfig {
        scenario: scenario.clone(),
        n_max: file.pick(a.n_max, "n-max")?.unwrap_or(1000),
        reps: file.pick(a.reps, "reps")?.unwrap_or(100),
        base_seed: seed,
        n_unlabelled: if matches!(scenario, Scenario::Replay(_)) { None } else { n_unlabelled },
        assume_infinite: r.assume_infinite,
        cs: r.cs.with_start_n(file.pick(a.start_n, "start-n")?.unwrap_or(DEFAULT_START_N)),
    };

    m.push("scenario", &scenario);
    if let Some(lambda) = scenario.lambda_star() {
        m.push("lambda-star", fmt::fmt_num(lambda));
    }
    m.push(
        "methods",
        methods.iter().map(Method::label).collect::<Vec<_>>().join(","),
    );
    m.push("reps", cfg.reps);
    m.push("n-max", cfg.n_max);
    m.push("start-n", cfg.cs.start_n);
    m.push("seed", seed);
    m.push(
        "n-unlabelled",
        n_unlabelled.map_or("none".to_string(), |n| n.to_string()),
    );
    m.push("jobs", jobs);

    let rows = sim::run_replications(&cfg, &methods, jobs)?;
    let to_file = r.out.is_some();
    {
        let mut out = open_out(&r.out, &mut *stdout)?;
        fmt::write_metrics(&mut out, &rows)?;
    }
    // The summary shares stdout only when the table went to a file.
    let summary: &mut dyn Write = if to_file { stdout } else { &mut *stderr };
    writeln!(summary, "method,n,avg_volume,cum_miscoverage")?;
    for method in &methods {
        let label = method.label();
        if let Some(row) = sim::lookup(&rows, &label, cfg.n_max) {
            writeln!(
                summary,
                "{label},{},{},{}",
                row.n,
                fmt::fmt_sig(row.avg_volume, 6),
                fmt::fmt_sig(row.cum_miscoverage, 6)
            )?;
        }
    }
    write_manifest(&m, &r.out, stderr)
}

fn display_name(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn tune(a: TuneArgs, stdout: &mut dyn Write) -> Result<()> {
    let file = load_config(&a.config, &[&["alpha", "t-star"]])?;
    let alpha = file.pick(a.alpha, "alpha")?.unwrap_or(DEFAULT_ALPHA);
    let t_star = file.pick(a.t_star, "t-star")?.unwrap_or(DEFAULT_T_STAR);
    let rho = rho_opt(t_star, alpha)
        .map_err(|_| AppError::config(format!("need α in (0, 1) and t* ≥ 1, got α = {alpha}, t* = {t_star}")))?;
    let tau = tau_heuristic(t_star)?;
    writeln!(stdout, "rho={}", fmt::fmt_sig(rho, 12))?;
    writeln!(stdout, "tau={}", fmt::fmt_sig(tau, 12))?;
    Ok(())
}
