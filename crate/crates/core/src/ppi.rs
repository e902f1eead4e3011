//! Prediction-powered estimators and confidence sequences.
//!
//! For a loss with subgradient `ℓ′_θ` write `Uᵢ = ℓ′_θ(Xᵢ, f(Xᵢ))`,
//! `Vᵢ = ℓ′_θ(Xᵢ, Yᵢ)` on labelled records and `Ũⱼ = ℓ′_θ(X̃ⱼ, f(X̃ⱼ))`
//! on the unlabelled pool. Then
//!
//! * `m̂_θ = mean(Ũ)` estimates the measure of fit,
//! * `Δ̂_θ = (V̄ − Ū) − (λ − 1)(Ū − m̂_θ)` estimates the rectifier,
//! * `ĝ_θ = m̂_θ + Δ̂_θ = V̄ − λ(Ū − m̂_θ)` estimates `E[ℓ′_θ(X, Y)]`,
//!
//! with `λ = 1` for PPI and `λ = λ̂` (power tuning) for PPI++. A CS for
//! `g_θ` is inverted into a region `{θ : 0 ∈ C_θ}` for the minimizer θ*.
//! For the squared loss every scale is θ-free and the region is an
//! interval around the closed-form root; other losses go through a grid
//! over buffered records.

use alloc::vec::Vec;

use libm::{fabs, sqrt};

use crate::cs::{radius_ba_with, radius_na, rho_opt, CsConfig, Interval, Population};
use crate::cv::{lambda_hat, nu_cv, nu_cv_plus_at, residual_sum};
use crate::error::{Error, Result};
use crate::eta::EtaEvaluator;
use crate::loss::{Loss, LossKind, SQUARED};
use crate::moments::{PairMoments, PoolMoments, StreamState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorFlavor {
    /// Labels only.
    Classical,
    /// Control-variate coefficient fixed at 1.
    Ppi,
    /// Power-tuned coefficient λ̂.
    PpiPlus,
}

impl EstimatorFlavor {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorFlavor::Classical => "classical",
            EstimatorFlavor::Ppi => "ppi",
            EstimatorFlavor::PpiPlus => "ppi++",
        }
    }
}

/// A point estimate plus the control-variate coefficient behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub lambda: Option<f64>,
    /// λ̂ was undefined (constant predictions) and 0 was used instead.
    pub lambda_fallback: bool,
}

/// A CS for `g_θ` at one θ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GCs {
    pub g_hat: f64,
    /// Scale of the labelled term: `σ̂ᵍ` without assistance, `σ̂^Δ` with.
    pub sigma_delta: f64,
    /// Scale of the unlabelled term `σ̂^f`; zero unless assisted with a
    /// finite pool.
    pub sigma_f: f64,
    pub radius: f64,
    /// `(radius_delta, radius_m)` for the assisted (Minkowski) form.
    pub components: Option<(f64, f64)>,
    pub lambda: Option<f64>,
    pub lambda_fallback: bool,
}

impl GCs {
    pub fn contains_zero(&self) -> bool {
        fabs(self.g_hat) <= self.radius
    }
}

/// An evenly spaced grid of candidate θ values, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, steps: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) || steps < 2 {
            return Err(Error::Config("grid needs finite lo < hi and at least 2 steps"));
        }
        Ok(Self { lo, hi, steps })
    }

    /// Centered at `center` with half-width `half_width`, 2001 points.
    pub fn around(center: f64, half_width: f64) -> Result<Self> {
        Self::new(center - half_width, center + half_width, 2001)
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.steps - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.steps {
            self.hi
        } else {
            self.lo + i as f64 * self.step()
        }
    }
}

/// The grid points that survive inversion, as maximal runs.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRegion {
    pub grid: Grid,
    /// `[first, last]` grid point of each run, ascending.
    pub pieces: Vec<(f64, f64)>,
    pub level: f64,
    pub t: u64,
}

impl GridRegion {
    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// The region reaches a grid endpoint, so the true region may extend
    /// past the grid.
    pub fn touches_boundary(&self) -> bool {
        match (self.pieces.first(), self.pieces.last()) {
            (Some(first), Some(last)) => first.0 <= self.grid.lo || last.1 >= self.grid.hi,
            _ => false,
        }
    }

    pub fn hull(&self) -> Option<(f64, f64)> {
        Some((self.pieces.first()?.0, self.pieces.last()?.1))
    }
}

/// Confidence region for θ*.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Interval(Interval),
    Grid(GridRegion),
}

impl Region {
    pub fn contains(&self, theta: f64) -> bool {
        match self {
            Region::Interval(iv) => iv.contains(theta),
            Region::Grid(g) => g.pieces.iter().any(|&(a, b)| a <= theta && theta <= b),
        }
    }

    /// Hull as `(lower, upper)`; `None` for an empty grid region.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match self {
            Region::Interval(iv) => Some((iv.lower(), iv.upper())),
            Region::Grid(g) => g.hull(),
        }
    }
}

/// How λ is chosen for [`EstimatorFlavor::PpiPlus`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tuning {
    /// λ̂ from the labelled co-moments, with the tuned-coefficient
    /// variance estimator.
    Estimated,
    /// A fixed coefficient, with the fixed-coefficient variance
    /// estimator. `Fixed(1.0)` reproduces PPI exactly.
    Fixed(f64),
}

/// Subgradient moments at one θ.
struct AtTheta {
    pair: PairMoments,
    /// `None` when the pool is treated as the population.
    pool: Option<PoolMoments>,
    m_hat: f64,
}

/// Computes estimates and CSs for one estimator flavor and configuration.
pub struct Analyzer<'a> {
    flavor: EstimatorFlavor,
    cfg: CsConfig,
    tuning: Tuning,
    loss: &'a dyn Loss,
    eta: Option<EtaEvaluator>,
    delta: f64,
    kappa: f64,
}

impl core::fmt::Debug for Analyzer<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Analyzer")
            .field("flavor", &self.flavor)
            .field("cfg", &self.cfg)
            .field("tuning", &self.tuning)
            .field("loss", &self.loss.kind())
            .finish()
    }
}

impl Analyzer<'static> {
    /// Squared-loss analyzer. Bayes assistance is on iff `cfg.prior` is set.
    pub fn new(flavor: EstimatorFlavor, cfg: CsConfig) -> Result<Self> {
        let (delta, kappa) = cfg.budget()?;
        if cfg.prior.is_some() && flavor == EstimatorFlavor::Classical {
            return Err(Error::Config(
                "Bayes assistance acts on the rectifier; use ppi or ppi++",
            ));
        }
        Ok(Self {
            flavor,
            cfg,
            tuning: Tuning::Estimated,
            loss: &SQUARED,
            eta: cfg.prior.map(EtaEvaluator::new),
            delta,
            kappa,
        })
    }
}

impl<'a> Analyzer<'a> {
    pub fn with_loss<'b>(self, loss: &'b dyn Loss) -> Result<Analyzer<'b>> {
        if loss.kind() == LossKind::Generic {
            if let Population::KnownMean(_) = self.cfg.population {
                return Err(Error::Config(
                    "a known population mean only determines the measure of fit for the squared loss",
                ));
            }
        }
        Ok(Analyzer {
            flavor: self.flavor,
            cfg: self.cfg,
            tuning: self.tuning,
            loss,
            eta: self.eta,
            delta: self.delta,
            kappa: self.kappa,
        })
    }

    pub fn with_tuning(mut self, tuning: Tuning) -> Self {
        self.tuning = tuning;
        self
    }

    pub fn flavor(&self) -> EstimatorFlavor {
        self.flavor
    }

    pub fn config(&self) -> &CsConfig {
        &self.cfg
    }

    pub fn is_assisted(&self) -> bool {
        self.eta.is_some()
    }

    fn uses_pool(&self) -> bool {
        self.flavor != EstimatorFlavor::Classical
    }

    fn at_theta(&self, state: &StreamState, theta: f64) -> Result<AtTheta> {
        let need_pool = self.uses_pool();
        let (pair, pool_sample) = match self.loss.kind() {
            LossKind::Squared => (state.labelled().reflect(theta), state.pool().reflect(theta)),
            LossKind::Generic => self.generic_moments(state, theta)?,
        };
        let (pool, m_hat) = match self.cfg.population {
            Population::KnownMean(mu) => (None, theta - mu),
            _ if !need_pool => (None, f64::NAN),
            population => {
                if pool_sample.count == 0 {
                    return Err(Error::InsufficientData {
                        what: "unlabelled pool",
                        needed: 1,
                        have: 0,
                    });
                }
                let pool = population.is_finite().then_some(pool_sample);
                (pool, pool_sample.mean)
            }
        };
        Ok(AtTheta { pair, pool, m_hat })
    }

    fn generic_moments(&self, state: &StreamState, theta: f64) -> Result<(PairMoments, PoolMoments)> {
        let buf = state
            .buffer()
            .ok_or(Error::Config("losses other than squared need a buffered stream"))?;
        let loss = self.loss;
        let pair = PairMoments::from_pairs(buf.iter().filter_map(|o| {
            let x = o.covariates.as_deref();
            o.label.map(|y| {
                (
                    loss.subgradient(theta, x, o.prediction),
                    loss.subgradient(theta, x, y),
                )
            })
        }));
        let pooled = state.pools_labelled();
        let pool = PoolMoments::from_values(
            buf.iter()
                .filter(|o| pooled || !o.is_labelled())
                .map(|o| loss.subgradient(theta, o.covariates.as_deref(), o.prediction)),
        );
        Ok((pair, pool))
    }

    /// `(λ, fell_back)` for the current flavor.
    fn coefficient(&self, pair: &PairMoments) -> Result<(f64, bool)> {
        match (self.flavor, self.tuning) {
            (EstimatorFlavor::Classical, _) => Ok((0.0, false)),
            (EstimatorFlavor::Ppi, _) => Ok((1.0, false)),
            (EstimatorFlavor::PpiPlus, Tuning::Fixed(l)) => Ok((l, false)),
            (EstimatorFlavor::PpiPlus, Tuning::Estimated) => match lambda_hat(pair) {
                Ok(l) => Ok((l, false)),
                Err(Error::DegeneratePredictor) => Ok((0.0, true)),
                Err(e) => Err(e),
            },
        }
    }

    fn is_tuned(&self) -> bool {
        self.flavor == EstimatorFlavor::PpiPlus && self.tuning == Tuning::Estimated
    }

    fn estimate(&self, value: f64, lambda: f64, fallback: bool) -> Estimate {
        Estimate {
            value,
            lambda: self.uses_pool().then_some(lambda),
            lambda_fallback: fallback,
        }
    }

    /// Measure-of-fit estimate `m̂_θ`.
    pub fn m_hat(&self, state: &StreamState, theta: f64) -> Result<f64> {
        if let Population::KnownMean(mu) = self.cfg.population {
            return Ok(theta - mu);
        }
        let pool = match self.loss.kind() {
            LossKind::Squared => state.pool().reflect(theta),
            LossKind::Generic => self.generic_moments(state, theta)?.1,
        };
        if pool.count == 0 {
            return Err(Error::InsufficientData {
                what: "unlabelled pool",
                needed: 1,
                have: 0,
            });
        }
        Ok(pool.mean)
    }

    /// Rectifier estimate `Δ̂_θ`.
    pub fn delta_hat(&self, state: &StreamState, theta: f64) -> Result<Estimate> {
        if !self.uses_pool() {
            return Err(Error::Config("the classical estimator has no rectifier"));
        }
        let needed = if self.is_tuned() { 2 } else { 1 };
        if state.n() < needed {
            return Err(Error::InsufficientData {
                what: "rectifier",
                needed,
                have: state.n(),
            });
        }
        let at = self.at_theta(state, theta)?;
        let (lambda, fallback) = self.coefficient(&at.pair)?;
        let p = &at.pair;
        let value = (p.mean_v - p.mean_u) - (lambda - 1.0) * (p.mean_u - at.m_hat);
        Ok(self.estimate(value, lambda, fallback))
    }

    /// Closed-form root of `ĝ_θ = 0` for the squared loss.
    pub fn theta_hat(&self, state: &StreamState) -> Result<Estimate> {
        if self.loss.kind() != LossKind::Squared {
            return Err(Error::Config("closed-form θ̂ exists only for the squared loss"));
        }
        let needed = if self.is_tuned() { 2 } else { 1 };
        if state.n() < needed {
            return Err(Error::InsufficientData {
                what: "point estimate",
                needed,
                have: state.n(),
            });
        }
        if !self.uses_pool() {
            return Ok(self.estimate(state.mean_y(), 0.0, false));
        }
        let pool_mean = match self.cfg.population {
            Population::KnownMean(mu) => mu,
            _ if state.big_n() == 0 => {
                return Err(Error::InsufficientData {
                    what: "unlabelled pool",
                    needed: 1,
                    have: 0,
                })
            }
            _ => state.mean_ftilde(),
        };
        let (lambda, fallback) = self.coefficient(state.labelled())?;
        let value = state.mean_y() - lambda * (state.mean_f() - pool_mean);
        Ok(self.estimate(value, lambda, fallback))
    }

    /// CS for `g_θ` at one θ.
    pub fn cs_g(&self, state: &StreamState, theta: f64) -> Result<GCs> {
        if state.n() < 3 {
            return Err(Error::InsufficientData {
                what: "confidence sequence",
                needed: 3,
                have: state.n(),
            });
        }
        let at = self.at_theta(state, theta)?;
        let p = &at.pair;
        let n = p.n;
        let alpha = self.cfg.alpha;

        if self.flavor == EstimatorFlavor::Classical {
            let sigma = sqrt(p.s_vv / (n - 1) as f64);
            return Ok(GCs {
                g_hat: p.mean_v,
                sigma_delta: sigma,
                sigma_f: 0.0,
                radius: radius_na(n, sigma, self.cfg.rho, alpha)?,
                components: None,
                lambda: None,
                lambda_fallback: false,
            });
        }

        let (lambda, fallback) = self.coefficient(p)?;
        let g_hat = p.mean_v - lambda * (p.mean_u - at.m_hat);
        let big_n = at.pool.map(|q| q.count);

        let Some(eta) = &self.eta else {
            let nu = if self.is_tuned() {
                nu_cv_plus_at(p, lambda, big_n)?
            } else {
                nu_cv(p, lambda, at.pool.as_ref())?
            };
            let sigma = sqrt(nu.max(0.0));
            return Ok(GCs {
                g_hat,
                sigma_delta: sigma,
                sigma_f: 0.0,
                radius: radius_na(n, sigma, self.cfg.rho, alpha)?,
                components: None,
                lambda: Some(lambda),
                lambda_fallback: fallback,
            });
        };

        // Rectifier term: CV estimate of E[V − U] with control variate U.
        let rect = p.rectifier();
        let delta_hat = rect.mean_v - (lambda - 1.0) * (p.mean_u - at.m_hat);
        let nu_delta = if self.is_tuned() {
            nu_cv_plus_at(&rect, lambda - 1.0, big_n)?
        } else {
            let mut nu = residual_sum(&rect, lambda - 1.0) / (n - 1) as f64;
            if let Some(q) = &at.pool {
                if q.count < 2 {
                    return Err(Error::InsufficientData {
                        what: "unlabelled pool variance",
                        needed: 2,
                        have: q.count,
                    });
                }
                let bn = q.count as f64;
                let l1 = lambda - 1.0;
                nu += n as f64 * l1 * l1 * q.s / (bn * (bn - 1.0));
            }
            nu
        };
        let sigma_delta = sqrt(nu_delta.max(0.0));
        let radius_delta = if sigma_delta == 0.0 && rect.s_vv == 0.0 {
            // Constant rectifier sample: Δ̂ is its exact running mean.
            0.0
        } else {
            radius_ba_with(eta, n, delta_hat, sigma_delta, self.kappa)?
        };

        let (sigma_f, radius_m) = match &at.pool {
            None => (0.0, 0.0),
            Some(q) => {
                let var = q.variance().ok_or(Error::InsufficientData {
                    what: "unlabelled pool variance",
                    needed: 2,
                    have: q.count,
                })?;
                let sf = sqrt(var);
                let rho_m = rho_opt(q.count, self.delta)?;
                (sf, radius_na(q.count, sf, rho_m, self.delta)?)
            }
        };

        Ok(GCs {
            g_hat,
            sigma_delta,
            sigma_f,
            radius: radius_delta + radius_m,
            components: Some((radius_delta, radius_m)),
            lambda: Some(lambda),
            lambda_fallback: fallback,
        })
    }

    /// Confidence region for θ*. The squared loss without a grid yields
    /// the closed-form interval; otherwise every grid point θ with
    /// `0 ∈ C_θ` is kept.
    pub fn invert(&self, state: &StreamState, grid: Option<Grid>) -> Result<Region> {
        let level = 1.0 - self.cfg.alpha;
        match (self.loss.kind(), grid) {
            (LossKind::Squared, None) => {
                let center = self.theta_hat(state)?.value;
                let cs = self.cs_g(state, center)?;
                Ok(Region::Interval(Interval {
                    center,
                    radius: cs.radius,
                    level,
                    t: state.n(),
                }))
            }
            (LossKind::Generic, None) => Err(Error::Config("generic losses need a θ grid")),
            (_, Some(grid)) => {
                let mut pieces: Vec<(f64, f64)> = Vec::new();
                let mut run: Option<(f64, f64)> = None;
                for i in 0..grid.steps {
                    let theta = grid.point(i);
                    if self.cs_g(state, theta)?.contains_zero() {
                        run = Some(match run {
                            Some((a, _)) => (a, theta),
                            None => (theta, theta),
                        });
                    } else if let Some(r) = run.take() {
                        pieces.push(r);
                    }
                }
                if let Some(r) = run {
                    pieces.push(r);
                }
                Ok(Region::Grid(GridRegion {
                    grid,
                    pieces,
                    level,
                    t: state.n(),
                }))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::Observation;
    use crate::prior::Prior;

    fn stream(pairs: &[(f64, f64)], pool: &[f64]) -> StreamState {
        let mut st = StreamState::buffered();
        for &(y, f) in pairs {
            st.update(Observation::labelled(y, f)).unwrap();
        }
        for &f in pool {
            st.update(Observation::unlabelled(f)).unwrap();
        }
        st
    }

    fn cfg() -> CsConfig {
        CsConfig::new(0.1, 100).unwrap()
    }

    const PAIRS: [(f64, f64); 6] = [
        (0.2, 0.1),
        (1.3, 1.0),
        (-0.7, -0.2),
        (0.9, 1.4),
        (2.1, 1.6),
        (-0.4, -0.9),
    ];
    const POOL: [f64; 9] = [0.0, 0.3, -0.5, 1.2, 0.8, -1.1, 0.4, 2.0, 0.1];

    #[test]
    fn m_hat_examples() {
        let st = stream(&[], &[0.2, 0.6]);
        let a = Analyzer::new(EstimatorFlavor::Ppi, cfg()).unwrap();
        assert!(fabs(a.m_hat(&st, 1.0).unwrap() - 0.6) < 1e-15);
        assert_eq!(a.m_hat(&st, 0.4).unwrap(), 0.0);
        let empty = StreamState::new();
        assert!(matches!(
            a.m_hat(&empty, 0.0),
            Err(Error::InsufficientData { .. })
        ));
        let known = Analyzer::new(
            EstimatorFlavor::Ppi,
            cfg().with_population(Population::KnownMean(0.25)),
        )
        .unwrap();
        assert_eq!(known.m_hat(&empty, 1.0).unwrap(), 0.75);
    }

    #[test]
    fn perfect_predictions_have_zero_rectifier() {
        let pairs: Vec<(f64, f64)> = PAIRS.iter().map(|&(y, _)| (y, y)).collect();
        let st = stream(&pairs, &POOL);
        let a = Analyzer::new(EstimatorFlavor::Ppi, cfg()).unwrap();
        assert_eq!(a.delta_hat(&st, 0.3).unwrap().value, 0.0);
    }

    #[test]
    fn centered_control_variate_returns_label_mean() {
        // Pool mean equals labelled prediction mean.
        let pairs = [(1.0, 0.0), (2.0, 1.0), (4.0, 2.0)];
        let st = stream(&pairs, &[1.0, 0.5, 1.5]);
        for flavor in [EstimatorFlavor::Classical, EstimatorFlavor::Ppi, EstimatorFlavor::PpiPlus] {
            let a = Analyzer::new(flavor, cfg()).unwrap();
            let th = a.theta_hat(&st).unwrap().value;
            assert!(fabs(th - 7.0 / 3.0) < 1e-14, "{flavor:?}: {th}");
        }
    }

    #[test]
    fn ppi_plus_pinned_at_one_is_ppi() {
        let st = stream(&PAIRS, &POOL);
        let ppi = Analyzer::new(EstimatorFlavor::Ppi, cfg()).unwrap();
        let pinned = Analyzer::new(EstimatorFlavor::PpiPlus, cfg())
            .unwrap()
            .with_tuning(Tuning::Fixed(1.0));
        assert_eq!(ppi.theta_hat(&st), pinned.theta_hat(&st));
        assert_eq!(ppi.delta_hat(&st, 0.7), pinned.delta_hat(&st, 0.7));
        assert_eq!(ppi.cs_g(&st, 0.7), pinned.cs_g(&st, 0.7));
        let g = Some(Prior::gaussian(0.0, 0.3).unwrap());
        let ppi = Analyzer::new(EstimatorFlavor::Ppi, cfg().with_prior(g)).unwrap();
        let pinned = Analyzer::new(EstimatorFlavor::PpiPlus, cfg().with_prior(g))
            .unwrap()
            .with_tuning(Tuning::Fixed(1.0));
        assert_eq!(ppi.cs_g(&st, -0.2), pinned.cs_g(&st, -0.2));
    }

    #[test]
    fn constant_predictions_fall_back_to_classical_coefficient() {
        let pairs = [(0.1, 1.0), (0.5, 1.0), (0.9, 1.0), (1.4, 1.0)];
        let st = stream(&pairs, &POOL);
        let a = Analyzer::new(EstimatorFlavor::PpiPlus, cfg()).unwrap();
        let d = a.delta_hat(&st, 0.0).unwrap();
        assert!(d.lambda_fallback);
        assert_eq!(d.lambda, Some(0.0));
        let th = a.theta_hat(&st).unwrap();
        assert!(fabs(th.value - 0.725) < 1e-15);
    }

    #[test]
    fn minkowski_components_add_up() {
        let st = stream(&PAIRS, &POOL);
        for flavor in [EstimatorFlavor::Ppi, EstimatorFlavor::PpiPlus] {
            let a = Analyzer::new(
                flavor,
                cfg().with_prior(Some(Prior::laplace(0.0, 0.5).unwrap())),
            )
            .unwrap();
            let cs = a.cs_g(&st, 0.4).unwrap();
            let (rd, rm) = cs.components.unwrap();
            assert_eq!(cs.radius, rd + rm);
            assert!(rm > 0.0);
        }
    }

    #[test]
    fn classical_radius_uses_label_sd() {
        let st = stream(&PAIRS, &POOL);
        let c = cfg();
        let a = Analyzer::new(EstimatorFlavor::Classical, c).unwrap();
        let cs = a.cs_g(&st, 0.0).unwrap();
        let sd = sqrt(st.s_yy() / 5.0);
        assert_eq!(cs.radius, radius_na(6, sd, c.rho, c.alpha).unwrap());
    }

    #[test]
    fn classical_with_prior_is_rejected() {
        let c = cfg().with_prior(Some(Prior::Improper));
        assert!(Analyzer::new(EstimatorFlavor::Classical, c).is_err());
    }

    #[test]
    fn identical_data_gives_a_point_region() {
        let pairs = [(0.5, 0.5); 5];
        let st = stream(&pairs, &[0.5; 5]);
        for flavor in [EstimatorFlavor::Classical, EstimatorFlavor::Ppi] {
            let a = Analyzer::new(flavor, cfg()).unwrap();
            match a.invert(&st, None).unwrap() {
                Region::Interval(iv) => {
                    assert_eq!(iv.center, 0.5);
                    assert_eq!(iv.radius, 0.0);
                }
                r => panic!("{r:?}"),
            }
        }
        let a = Analyzer::new(
            EstimatorFlavor::Ppi,
            cfg().with_prior(Some(Prior::gaussian(0.0, 0.1).unwrap())),
        )
        .unwrap();
        let cs = a.cs_g(&st, 0.5).unwrap();
        assert_eq!(cs.components.unwrap().0, 0.0);
    }

    #[test]
    fn grid_region_flags_empty_and_boundary() {
        let st = stream(&PAIRS, &POOL);
        let a = Analyzer::new(EstimatorFlavor::Ppi, cfg()).unwrap();
        let far = a.invert(&st, Some(Grid::new(50.0, 60.0, 11).unwrap())).unwrap();
        match far {
            Region::Grid(g) => {
                assert!(g.is_empty());
                assert!(!g.touches_boundary());
            }
            r => panic!("{r:?}"),
        }
        let narrow = a.invert(&st, Some(Grid::new(0.3, 0.31, 11).unwrap())).unwrap();
        match narrow {
            Region::Grid(g) => assert!(g.touches_boundary()),
            r => panic!("{r:?}"),
        }
    }

    #[test]
    fn generic_loss_requires_buffer_and_grid() {
        let loss = crate::loss::FnLoss(|th: f64, _: Option<&[f64]>, y: f64| th - y);
        let a = Analyzer::new(EstimatorFlavor::Ppi, cfg())
            .unwrap()
            .with_loss(&loss)
            .unwrap();
        let st = stream(&PAIRS, &POOL);
        assert!(a.invert(&st, None).is_err());
        let mut unbuffered = StreamState::new();
        unbuffered.update(Observation::labelled(1.0, 1.0)).unwrap();
        assert!(a.m_hat(&unbuffered, 0.0).is_err());
        let known = Analyzer::new(
            EstimatorFlavor::Ppi,
            cfg().with_population(Population::KnownMean(0.0)),
        )
        .unwrap();
        assert!(known.with_loss(&loss).is_err());
    }
}
