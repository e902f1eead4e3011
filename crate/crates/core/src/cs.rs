//! Confidence-sequence radii and their hyperparameters.

use core::f64::consts::{E, PI};

use libm::{log, sqrt};

use crate::error::{Error, Result};
use crate::eta::EtaEvaluator;
use crate::prior::Prior;
use crate::special::lambert_w_m1;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain("level α must lie in (0, 1)"))
    }
}

fn check_t(t: u64) -> Result<()> {
    if t == 0 {
        Err(Error::Domain("time index must be ≥ 1"))
    } else {
        Ok(())
    }
}

/// Half-width of the non-assisted (Gaussian-mixture) asymptotic CS:
///
/// `(σ̂/√t)·√((1 + 1/(tρ²))·log((tρ² + 1)/α²))`.
///
/// Independent of the running mean.
pub fn radius_na(t: u64, sigma_hat: f64, rho: f64, alpha: f64) -> Result<f64> {
    check_t(t)?;
    check_alpha(alpha)?;
    if !(sigma_hat >= 0.0 && sigma_hat.is_finite()) {
        return Err(Error::Domain("σ̂ must be finite and non-negative"));
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Domain("ρ must be positive and finite"));
    }
    let tf = t as f64;
    let k = tf * rho * rho;
    Ok(sigma_hat / sqrt(tf) * sqrt((1.0 + 1.0 / k) * log((k + 1.0) / (alpha * alpha))))
}

/// Half-width of the Bayes-assisted asymptotic CS under `prior`:
///
/// `(σ̂/√t)·√(log(t / (2π α² η_t(ẑ)²)))` with `ẑ = mean_hat/σ̂`.
///
/// Builds a fresh [`EtaEvaluator`]; use [`radius_ba_with`] in loops.
pub fn radius_ba(t: u64, mean_hat: f64, sigma_hat: f64, prior: &Prior, alpha: f64) -> Result<f64> {
    radius_ba_with(&EtaEvaluator::new(*prior), t, mean_hat, sigma_hat, alpha)
}

pub fn radius_ba_with(
    eta: &EtaEvaluator,
    t: u64,
    mean_hat: f64,
    sigma_hat: f64,
    alpha: f64,
) -> Result<f64> {
    check_t(t)?;
    check_alpha(alpha)?;
    if !(sigma_hat >= 0.0 && sigma_hat.is_finite()) || !mean_hat.is_finite() {
        return Err(Error::Domain("mean and σ̂ must be finite, σ̂ non-negative"));
    }
    if sigma_hat == 0.0 {
        return Err(Error::DegenerateScale);
    }
    let tf = t as f64;
    let scale = sigma_hat / sqrt(tf);
    if let Prior::Improper = eta.prior() {
        return Ok(scale * sqrt(log(tf / (alpha * alpha))));
    }
    let log_eta = eta.log_eta(mean_hat / sigma_hat, t)?;
    let radicand = log(tf) - log(2.0 * PI) - 2.0 * log(alpha) - 2.0 * log_eta;
    Ok(scale * sqrt(radicand.max(0.0)))
}

/// `ρ` minimizing the non-assisted width at `t_star`:
/// `√((−W₋₁(−α² e⁻¹) − 1)/t*)`.
pub fn rho_opt(t_star: u64, alpha: f64) -> Result<f64> {
    check_t(t_star)?;
    check_alpha(alpha)?;
    let w = lambert_w_m1(-alpha * alpha / E)?;
    Ok(sqrt((-w - 1.0) / t_star as f64))
}

/// Prior scale at which prior and data weigh equally on the Gaussian
/// posterior mean at `t_star`: `1/√t*`.
pub fn tau_heuristic(t_star: u64) -> Result<f64> {
    check_t(t_star)?;
    Ok(1.0 / sqrt(t_star as f64))
}

/// A symmetric interval `center ± radius` at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub center: f64,
    pub radius: f64,
    /// Confidence level `1 − α`.
    pub level: f64,
    pub t: u64,
}

impl Interval {
    pub fn lower(&self) -> f64 {
        self.center - self.radius
    }

    pub fn upper(&self) -> f64 {
        self.center + self.radius
    }

    pub fn width(&self) -> f64 {
        2.0 * self.radius
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower() <= x && x <= self.upper()
    }
}

/// How the unlabelled pool relates to the population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Population {
    /// The pool is a finite sample; its mean carries its own CS.
    Finite,
    /// `E[f(X)]` is known exactly (squared loss only).
    KnownMean(f64),
    /// The pool is treated as exhaustive: its mean is plugged in with no
    /// uncertainty.
    AssumeInfinite,
}

impl Population {
    pub fn is_finite(&self) -> bool {
        matches!(self, Population::Finite)
    }
}

/// Settings shared by every CS computed from a stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsConfig {
    pub alpha: f64,
    /// Budget of the measure-of-fit sequence in finite-pool mode; `None`
    /// means `α/10`.
    pub delta: Option<f64>,
    pub rho: f64,
    /// `None` for the non-assisted sequences.
    pub prior: Option<Prior>,
    pub t_star: u64,
    pub start_n: u64,
    pub population: Population,
}

impl CsConfig {
    /// Non-assisted, finite-pool configuration with `ρ` tuned at `t_star`.
    pub fn new(alpha: f64, t_star: u64) -> Result<Self> {
        let rho = rho_opt(t_star, alpha)
            .map_err(|_| Error::Config("α must lie in (0, 1) and t* must be ≥ 1"))?;
        Ok(Self {
            alpha,
            delta: None,
            rho,
            prior: None,
            t_star,
            start_n: 40,
            population: Population::Finite,
        })
    }

    pub fn with_prior(mut self, prior: Option<Prior>) -> Self {
        self.prior = prior;
        self
    }

    pub fn with_population(mut self, population: Population) -> Self {
        self.population = population;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn with_start_n(mut self, start_n: u64) -> Self {
        self.start_n = start_n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config("α must lie in (0, 1)"));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::Config("ρ must be positive and finite"));
        }
        if self.t_star == 0 || self.start_n == 0 {
            return Err(Error::Config("t* and the metric start must be ≥ 1"));
        }
        if let Some(d) = self.delta {
            if !(d >= 0.0 && d < self.alpha) {
                return Err(Error::Config("δ must lie in [0, α)"));
            }
        }
        if let Population::KnownMean(m) = self.population {
            if !m.is_finite() {
                return Err(Error::Config("known population mean must be finite"));
            }
        }
        Ok(())
    }

    /// `(δ, κ)`: the split of α between the measure-of-fit sequence and
    /// the rectifier sequence.
    pub fn budget(&self) -> Result<(f64, f64)> {
        self.validate()?;
        if !self.population.is_finite() {
            return Ok((0.0, self.alpha));
        }
        let delta = self.delta.unwrap_or(self.alpha / 10.0);
        if delta <= 0.0 {
            return Err(Error::Config("a finite unlabelled pool needs δ > 0"));
        }
        Ok((delta, self.alpha - delta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use libm::fabs;

    #[test]
    fn zero_variance_gives_zero_radius() {
        for (t, rho, alpha) in [(1u64, 0.1, 0.05), (1000, 2.0, 0.5)] {
            assert_eq!(radius_na(t, 0.0, rho, alpha).unwrap(), 0.0);
        }
    }

    #[test]
    fn tau_examples() {
        assert!(fabs(tau_heuristic(100).unwrap() - 0.1) < 1e-15);
        assert_eq!(tau_heuristic(1).unwrap(), 1.0);
        assert!(fabs(tau_heuristic(10_000).unwrap() - 0.01) < 1e-15);
    }

    #[test]
    fn rho_scales_as_inverse_root_t_star() {
        for alpha in [0.01, 0.05, 0.1, 0.2] {
            let r1 = rho_opt(250, alpha).unwrap();
            let r4 = rho_opt(1000, alpha).unwrap();
            assert!(r1.is_finite() && r1 > 0.0);
            assert!(fabs(r4 - r1 / 2.0) <= 1e-15 * r1);
        }
    }

    #[test]
    fn ba_rejects_zero_scale() {
        let p = Prior::gaussian(0.0, 1.0).unwrap();
        assert_eq!(radius_ba(10, 0.0, 0.0, &p, 0.1), Err(Error::DegenerateScale));
    }

    #[test]
    fn domain_checks() {
        assert!(radius_na(0, 1.0, 1.0, 0.1).is_err());
        assert!(radius_na(1, 1.0, 0.0, 0.1).is_err());
        assert!(radius_na(1, 1.0, 1.0, 1.0).is_err());
        assert!(rho_opt(10, 0.0).is_err());
    }

    #[test]
    fn budget_split() {
        let cfg = CsConfig::new(0.1, 100).unwrap();
        let (d, k) = cfg.budget().unwrap();
        assert!(fabs(d - 0.01) < 1e-15 && fabs(k - 0.09) < 1e-15);
        let known = cfg.with_population(Population::KnownMean(0.0));
        assert_eq!(known.budget().unwrap(), (0.0, 0.1));
        assert!(cfg.with_delta(0.1).budget().is_err());
        assert!(cfg.with_delta(0.0).budget().is_err());
        assert!(known.with_delta(0.0).budget().is_ok());
    }
}
