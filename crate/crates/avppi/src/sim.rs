//! Monte Carlo harness: synthetic and replayed streams, replications,
//! and the two curves every study reports, the average interval width and
//! the cumulative miscoverage rate.
//!
//! Replication `r` draws from `ChaCha8Rng::seed_from_u64(base_seed)` on
//! stream `r`, so its data do not depend on how replications are spread
//! over threads. Within a replication every method sees the same data.
//! Results are folded into the aggregates in replication order, which makes
//! the output bit-identical for any worker count.

use std::fmt;
use std::sync::Arc;

use avppi_core::cs::{radius_ba_with, radius_na, CsConfig, Population};
use avppi_core::ppi::{Analyzer, EstimatorFlavor, Region};
use avppi_core::{ErrorKind, EtaEvaluator, Observation, Prior, StreamState};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StudentT};
use rayon::prelude::*;

use crate::error::{AppError, Result};
use crate::io::MetricRow;

/// Replications evaluated in parallel before folding into the totals;
/// bounds memory at `CHUNK × n_max` per method.
const CHUNK: u64 = 64;

/// `Y ~ N(0, 1)`, `f = Y + N(0, σ_Y²)`.
pub fn gen_noisy(rng: &mut ChaCha8Rng, sigma_y: f64, n: usize) -> Vec<(f64, f64)> {
    let z = Normal::new(0.0, 1.0).expect("unit normal");
    (0..n)
        .map(|_| {
            let y: f64 = z.sample(rng);
            (y, y + sigma_y * z.sample(rng))
        })
        .collect()
}

/// `X ~ N(0, 1)`, `Y = X + scale·ε` with `ε ~ t_dof` (`None` for a
/// Gaussian), `f = X + υ`.
pub fn gen_biased(
    rng: &mut ChaCha8Rng,
    upsilon: f64,
    dof: Option<f64>,
    noise_scale: f64,
    n: usize,
) -> Result<Vec<(f64, f64)>> {
    check_dof(dof)?;
    let z = Normal::new(0.0, 1.0).expect("unit normal");
    let t = dof.map(|d| StudentT::new(d).expect("dof checked"));
    Ok((0..n)
        .map(|_| {
            let x: f64 = z.sample(rng);
            let eps = match &t {
                Some(t) => t.sample(rng),
                None => z.sample(rng),
            };
            (x + noise_scale * eps, x + upsilon)
        })
        .collect())
}

fn check_dof(dof: Option<f64>) -> Result<()> {
    match dof {
        Some(d) if !(d > 2.0) => Err(AppError::config(format!(
            "Student-t noise needs dof > 2 for a finite variance, got {d}"
        ))),
        _ => Ok(()),
    }
}

/// Labelled rows and extra predictions for replay.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayData {
    pub name: String,
    /// `(label, prediction)`.
    pub labelled: Vec<(f64, f64)>,
    /// Predictions that never carry labels (label-less rows and any
    /// separate unlabelled file); always part of the pool.
    pub unlabelled: Vec<f64>,
    /// How many held-out labelled rows join the pool; `None` means all
    /// rows not streamed.
    pub n_unlabelled: Option<usize>,
}

impl ReplayData {
    pub fn new(name: impl Into<String>, records: Vec<Observation>, extra: Vec<Observation>) -> Result<Self> {
        let mut labelled = Vec::new();
        let mut unlabelled = Vec::new();
        for o in records.into_iter().chain(extra) {
            match o.label {
                Some(y) => labelled.push((y, o.prediction)),
                None => unlabelled.push(o.prediction),
            }
        }
        if labelled.is_empty() {
            return Err(AppError::config("replay needs labelled rows"));
        }
        Ok(Self {
            name: name.into(),
            labelled,
            unlabelled,
            n_unlabelled: None,
        })
    }

    /// Mean label over every labelled row in the file.
    pub fn theta_star(&self) -> f64 {
        self.labelled.iter().map(|p| p.0).sum::<f64>() / self.labelled.len() as f64
    }
}

/// Labelled `(y, f)` pairs in stream order, and the unlabelled pool.
type Draw = (Vec<(f64, f64)>, Vec<f64>);

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    Noisy { sigma_y: f64 },
    Biased {
        upsilon: f64,
        dof: Option<f64>,
        noise_scale: f64,
    },
    /// `Y ~ N(0, σ²)` analysed with σ known.
    Exact { sigma: f64 },
    Replay(Arc<ReplayData>),
}

impl Scenario {
    pub fn noisy(sigma_y: f64) -> Result<Self> {
        if !(sigma_y >= 0.0 && sigma_y.is_finite()) {
            return Err(AppError::config("sigma-y must be finite and ≥ 0"));
        }
        Ok(Scenario::Noisy { sigma_y })
    }

    pub fn biased(upsilon: f64, dof: Option<f64>, noise_scale: f64) -> Result<Self> {
        check_dof(dof)?;
        if !upsilon.is_finite() || !(noise_scale > 0.0 && noise_scale.is_finite()) {
            return Err(AppError::config("upsilon must be finite and the noise scale positive"));
        }
        Ok(Scenario::Biased {
            upsilon,
            dof,
            noise_scale,
        })
    }

    pub fn exact(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(AppError::config("sigma must be positive"));
        }
        Ok(Scenario::Exact { sigma })
    }

    pub fn theta_star(&self) -> f64 {
        match self {
            Scenario::Replay(d) => d.theta_star(),
            _ => 0.0,
        }
    }

    /// Population mean of the predictions, when the generator fixes it.
    pub fn mean_f(&self) -> Option<f64> {
        match self {
            Scenario::Noisy { .. } | Scenario::Exact { .. } => Some(0.0),
            Scenario::Biased { upsilon, .. } => Some(*upsilon),
            Scenario::Replay(_) => None,
        }
    }

    /// Population power-tuning coefficient.
    pub fn lambda_star(&self) -> Option<f64> {
        match self {
            Scenario::Noisy { sigma_y } => Some(1.0 / (1.0 + sigma_y * sigma_y)),
            Scenario::Biased { .. } | Scenario::Exact { .. } => Some(1.0),
            Scenario::Replay(_) => None,
        }
    }

    /// Labelled pairs `(y, f)` in stream order and the unlabelled pool.
    /// `pool` is the synthetic pool size (ignored by replay).
    fn draw(&self, rng: &mut ChaCha8Rng, n_max: usize, pool: Option<usize>) -> Result<Draw> {
        let synthetic = |rng: &mut ChaCha8Rng, n: usize| -> Result<Vec<(f64, f64)>> {
            match self {
                Scenario::Noisy { sigma_y } => Ok(gen_noisy(rng, *sigma_y, n)),
                Scenario::Biased {
                    upsilon,
                    dof,
                    noise_scale,
                } => gen_biased(rng, *upsilon, *dof, *noise_scale, n),
                Scenario::Exact { sigma } => {
                    let d = Normal::new(0.0, *sigma).expect("positive sigma");
                    Ok((0..n)
                        .map(|_| {
                            let y = d.sample(rng);
                            (y, y)
                        })
                        .collect())
                }
                Scenario::Replay(_) => unreachable!(),
            }
        };
        match self {
            Scenario::Replay(d) => {
                let mut idx: Vec<usize> = (0..d.labelled.len()).collect();
                idx.shuffle(rng);
                let held = d.n_unlabelled.unwrap_or(d.labelled.len() - n_max);
                let stream = idx[..n_max].iter().map(|&i| d.labelled[i]).collect();
                let pool = idx[n_max..n_max + held]
                    .iter()
                    .map(|&i| d.labelled[i].1)
                    .chain(d.unlabelled.iter().copied())
                    .collect();
                Ok((stream, pool))
            }
            _ => {
                let labelled = synthetic(rng, n_max)?;
                let pool = match pool {
                    Some(m) => synthetic(rng, m)?.into_iter().map(|p| p.1).collect(),
                    None => Vec::new(),
                };
                Ok((labelled, pool))
            }
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::Noisy { sigma_y } => write!(f, "noisy(sigma_y={sigma_y})"),
            Scenario::Biased {
                upsilon,
                dof,
                noise_scale,
            } => match dof {
                Some(d) => write!(f, "biased(upsilon={upsilon},df={d},scale={noise_scale})"),
                None => write!(f, "biased(upsilon={upsilon},df=inf,scale={noise_scale})"),
            },
            Scenario::Exact { sigma } => write!(f, "exact(sigma={sigma})"),
            Scenario::Replay(d) => write!(f, "replay({})", d.name),
        }
    }
}

/// One curve of a study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Estimator {
        flavor: EstimatorFlavor,
        prior: Option<Prior>,
    },
    /// The label mean with the true σ plugged in: exact for Gaussian data.
    KnownSigma { prior: Option<Prior> },
}

impl Method {
    pub fn label(&self) -> String {
        let (base, prior) = match self {
            Method::Estimator { flavor, prior } => (flavor.name(), prior),
            Method::KnownSigma { prior } => ("known-sigma", prior),
        };
        match prior {
            Some(p) => format!("{base}({})", p.tag()),
            None => base.to_string(),
        }
    }
}

/// Everything a study needs besides its methods.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scenario: Scenario,
    pub n_max: u64,
    pub reps: u64,
    pub base_seed: u64,
    /// Synthetic unlabelled pool size; `None` uses the known population
    /// mean of the predictions instead of a pool.
    pub n_unlabelled: Option<usize>,
    /// Treat the pool as the population (no measure-of-fit sequence).
    pub assume_infinite: bool,
    /// α, ρ, δ and the metric start; prior and population are set per
    /// method.
    pub cs: CsConfig,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.cs.validate()?;
        if self.reps == 0 {
            return Err(AppError::config("reps must be ≥ 1"));
        }
        if self.n_max < self.cs.start_n {
            return Err(AppError::config(format!(
                "n-max ({}) must be ≥ the metric start ({})",
                self.n_max, self.cs.start_n
            )));
        }
        if let Scenario::Replay(d) = &self.scenario {
            let held = d.n_unlabelled.unwrap_or(0);
            if self.n_max as usize + held > d.labelled.len() {
                return Err(AppError::config(format!(
                    "n-max + held-out rows ({} + {held}) exceed the {} labelled rows",
                    self.n_max,
                    d.labelled.len()
                )));
            }
        }
        Ok(())
    }

    fn population(&self) -> Population {
        let has_pool = matches!(self.scenario, Scenario::Replay(_)) || self.n_unlabelled.is_some();
        match (has_pool, self.scenario.mean_f()) {
            (false, Some(m)) => Population::KnownMean(m),
            _ if self.assume_infinite => Population::AssumeInfinite,
            _ => Population::Finite,
        }
    }
}

enum Evaluator {
    Estimator(Analyzer<'static>),
    KnownSigma { sigma: f64, eta: Option<EtaEvaluator> },
}

/// Per-method trace of one replication.
struct Trace {
    /// Width at each `n` from the metric start; NaN when undefined.
    widths: Vec<f64>,
    /// Offset of the first `n` whose interval misses θ*.
    first_miss: Option<usize>,
}

fn build(cfg: &SimConfig, methods: &[Method]) -> Result<Vec<Evaluator>> {
    let population = cfg.population();
    methods
        .iter()
        .map(|m| match *m {
            Method::Estimator { flavor, prior } => {
                let c = cfg.cs.with_prior(prior).with_population(population);
                Ok(Evaluator::Estimator(Analyzer::new(flavor, c)?))
            }
            Method::KnownSigma { prior } => match &cfg.scenario {
                Scenario::Exact { sigma } => Ok(Evaluator::KnownSigma {
                    sigma: *sigma,
                    eta: prior.map(EtaEvaluator::new),
                }),
                _ => Err(AppError::config("known-sigma methods need the exact scenario")),
            },
        })
        .collect()
}

fn is_undefined(e: &avppi_core::Error) -> bool {
    e.kind() == ErrorKind::Undefined
}

fn run_one(cfg: &SimConfig, evals: &[Evaluator], rep: u64) -> Result<Vec<Trace>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.base_seed);
    rng.set_stream(rep);
    let (labelled, pool) = cfg.scenario.draw(&mut rng, cfg.n_max as usize, cfg.n_unlabelled)?;
    let theta_star = cfg.scenario.theta_star();
    let start = cfg.cs.start_n;
    let span = (cfg.n_max - start + 1) as usize;
    let mut traces: Vec<Trace> = evals
        .iter()
        .map(|_| Trace {
            widths: vec![f64::NAN; span],
            first_miss: None,
        })
        .collect();

    let mut st = StreamState::new();
    for f in pool {
        st.update(Observation::unlabelled(f))?;
    }
    for (i, &(y, f)) in labelled.iter().enumerate() {
        st.update(Observation::labelled(y, f))?;
        let n = i as u64 + 1;
        if n < start {
            continue;
        }
        let k = (n - start) as usize;
        for (ev, tr) in evals.iter().zip(&mut traces) {
            let interval = match ev {
                Evaluator::Estimator(a) => match a.invert(&st, None) {
                    Ok(Region::Interval(iv)) => Some((iv.lower(), iv.upper())),
                    Ok(Region::Grid(_)) => unreachable!("no grid requested"),
                    Err(e) if is_undefined(&e) => None,
                    Err(e) => return Err(e.into()),
                },
                Evaluator::KnownSigma { sigma, eta } => {
                    let c = &cfg.cs;
                    let mean = st.mean_y();
                    let r = match eta {
                        Some(e) => radius_ba_with(e, n, mean, *sigma, c.alpha)?,
                        None => radius_na(n, *sigma, c.rho, c.alpha)?,
                    };
                    Some((mean - r, mean + r))
                }
            };
            if let Some((lo, hi)) = interval {
                tr.widths[k] = hi - lo;
                if tr.first_miss.is_none() && !(lo <= theta_star && theta_star <= hi) {
                    tr.first_miss = Some(k);
                }
            }
        }
    }
    Ok(traces)
}

/// Runs `cfg.reps` replications on `jobs` worker threads and aggregates
/// one row per method and `n` in `[start_n, n_max]`.
pub fn run_replications(cfg: &SimConfig, methods: &[Method], jobs: usize) -> Result<Vec<MetricRow>> {
    cfg.validate()?;
    if methods.is_empty() {
        return Err(AppError::config("no methods selected"));
    }
    let evals = build(cfg, methods)?;
    let span = (cfg.n_max - cfg.cs.start_n + 1) as usize;
    let mut sum = vec![vec![0.0f64; span]; methods.len()];
    let mut count = vec![vec![0u64; span]; methods.len()];
    let mut misses = vec![vec![0u64; span]; methods.len()];

    let workers = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| AppError::config(format!("cannot start worker threads: {e}")))?;
    let mut next = 0;
    while next < cfg.reps {
        let end = (next + CHUNK).min(cfg.reps);
        let chunk: Vec<Result<Vec<Trace>>> =
            workers.install(|| (next..end).into_par_iter().map(|r| run_one(cfg, &evals, r)).collect());
        for traces in chunk {
            for (m, tr) in traces?.into_iter().enumerate() {
                for (k, w) in tr.widths.iter().enumerate() {
                    if !w.is_nan() {
                        sum[m][k] += w;
                        count[m][k] += 1;
                    }
                }
                if let Some(k) = tr.first_miss {
                    misses[m][k] += 1;
                }
            }
        }
        next = end;
    }

    let scenario = cfg.scenario.to_string();
    let mut rows = Vec::with_capacity(methods.len() * span);
    for (m, method) in methods.iter().enumerate() {
        let label = method.label();
        let mut failed = 0u64;
        for k in 0..span {
            failed += misses[m][k];
            let avg = if count[m][k] == 0 {
                f64::NAN
            } else {
                sum[m][k] / count[m][k] as f64
            };
            rows.push(MetricRow {
                scenario: scenario.clone(),
                method: label.clone(),
                n: cfg.cs.start_n + k as u64,
                avg_volume: avg,
                cum_miscoverage: failed as f64 / cfg.reps as f64,
            });
        }
    }
    Ok(rows)
}

/// Rows of `rows` for one method at one `n`.
pub fn lookup<'a>(rows: &'a [MetricRow], method: &str, n: u64) -> Option<&'a MetricRow> {
    rows.iter().find(|r| r.method == method && r.n == n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(scenario: Scenario, reps: u64, n_max: u64) -> SimConfig {
        SimConfig {
            scenario,
            n_max,
            reps,
            base_seed: 42,
            n_unlabelled: None,
            assume_infinite: false,
            cs: CsConfig::new(0.1, 100).unwrap().with_start_n(10),
        }
    }

    fn ppi(flavor: EstimatorFlavor) -> Method {
        Method::Estimator { flavor, prior: None }
    }

    #[test]
    fn noiseless_predictions_copy_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(gen_noisy(&mut rng, 0.0, 50).iter().all(|(y, f)| y == f));
    }

    #[test]
    fn dof_boundary() {
        assert!(Scenario::biased(0.0, Some(2.0), 10.0).is_err());
        assert!(Scenario::biased(0.0, Some(5.0), 10.0).is_ok());
        assert!(Scenario::biased(0.0, None, 10.0).is_ok());
    }

    #[test]
    fn single_replication_reports_its_own_width() {
        let c = cfg(Scenario::noisy(0.5).unwrap(), 1, 30);
        let rows = run_replications(&c, &[ppi(EstimatorFlavor::Classical)], 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        rng.set_stream(0);
        let data = gen_noisy(&mut rng, 0.5, 30);
        let mut st = StreamState::new();
        for &(y, f) in &data[..20] {
            st.update(Observation::labelled(y, f)).unwrap();
        }
        let a = Analyzer::new(EstimatorFlavor::Classical, c.cs.with_population(Population::KnownMean(0.0))).unwrap();
        let Region::Interval(iv) = a.invert(&st, None).unwrap() else { unreachable!() };
        assert_eq!(lookup(&rows, "classical", 20).unwrap().avg_volume, iv.width());
    }

    #[test]
    fn miscoverage_is_monotone_and_rows_are_complete() {
        let c = cfg(Scenario::noisy(0.8).unwrap(), 50, 60);
        let methods = [
            ppi(EstimatorFlavor::Classical),
            ppi(EstimatorFlavor::Ppi),
            ppi(EstimatorFlavor::PpiPlus),
        ];
        let rows = run_replications(&c, &methods, 2).unwrap();
        assert_eq!(rows.len(), 3 * 51);
        for m in &methods {
            let curve: Vec<_> = rows.iter().filter(|r| r.method == m.label()).collect();
            assert!(curve.windows(2).all(|w| w[0].cum_miscoverage <= w[1].cum_miscoverage));
        }
    }

    #[test]
    fn replay_uses_every_row_once() {
        let obs: Vec<_> = (0..10).map(|i| Observation::labelled(i as f64, i as f64 + 0.5)).collect();
        let data = Arc::new(ReplayData::new("t", obs, Vec::new()).unwrap());
        let s = Scenario::Replay(data);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (stream, pool) = s.draw(&mut rng, 6, None).unwrap();
        let mut seen: Vec<f64> = stream.iter().map(|p| p.1).chain(pool).collect();
        seen.sort_by(f64::total_cmp);
        assert_eq!(seen, (0..10).map(|i| i as f64 + 0.5).collect::<Vec<_>>());
    }

    #[test]
    fn replay_of_identical_rows_is_trivially_covered() {
        let obs = vec![Observation::labelled(2.0, 1.0); 30];
        let mut data = ReplayData::new("flat", obs, Vec::new()).unwrap();
        data.n_unlabelled = Some(10);
        let c = cfg(Scenario::Replay(Arc::new(data)), 5, 20);
        let rows = run_replications(&c, &[ppi(EstimatorFlavor::Classical)], 1).unwrap();
        assert!(rows.iter().all(|r| r.avg_volume == 0.0 && r.cum_miscoverage == 0.0));
    }

    #[test]
    fn replay_rejects_oversized_splits() {
        let obs = vec![Observation::labelled(2.0, 1.0); 30];
        let mut data = ReplayData::new("flat", obs, Vec::new()).unwrap();
        data.n_unlabelled = Some(20);
        let c = cfg(Scenario::Replay(Arc::new(data)), 5, 20);
        assert!(run_replications(&c, &[ppi(EstimatorFlavor::Ppi)], 1).is_err());
    }
}
