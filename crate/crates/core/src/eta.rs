//! The mixture density `η_t(z) = ∫ N(z; ζ, 1/t) π(ζ) dζ`.
//!
//! Everything is computed on the log scale: for a standardized mean far
//! in the prior's tail `η_t` underflows long before the radius it feeds
//! becomes large.
//!
//! * Gaussian prior: closed form `N(z; μ₀, τ² + 1/t)`.
//! * Improper prior: the constant `(2π)^{-1/2}`.
//! * Student-t prior: Gauss–Hermite after the change of variable
//!   `ζ = z + √(2/t)·x`, doubling the node count from 64 until two
//!   successive estimates agree to 1e-9; used only when the prior is no
//!   sharper than the kernel, so the integrand is smooth on the node
//!   spacing.
//! * Otherwise (Laplace, whose kink defeats Gauss–Hermite, or a prior
//!   sharper than the kernel): adaptive Gauss–Kronrod with breakpoints at
//!   the kernel center and the prior's location, spread over both
//!   length scales.

use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{exp, fabs, log, sqrt};

use crate::error::{Error, Result};
use crate::prior::Prior;
use crate::quadrature::{adaptive_gk, GaussHermite};
use crate::special::{log_add_exp, log_erfc};

const HERMITE_SIZES: [usize; 3] = [64, 128, 256];
const HERMITE_TOL: f64 = 1e-9;
const KRONROD_TOL: f64 = 1e-12;
const KRONROD_MAX_SEGMENTS: usize = 4000;

/// Evaluates `log η_t` for one prior, holding the Gauss–Hermite rules so
/// repeated calls do not rebuild them.
#[derive(Debug, Clone)]
pub struct EtaEvaluator {
    prior: Prior,
    force_quadrature: bool,
    rules: Vec<GaussHermite>,
}

impl EtaEvaluator {
    pub fn new(prior: Prior) -> Self {
        let rules = match prior {
            Prior::StudentT { .. } => HERMITE_SIZES.iter().map(|&n| GaussHermite::new(n)).collect(),
            _ => Vec::new(),
        };
        Self {
            prior,
            force_quadrature: false,
            rules,
        }
    }

    /// Like [`EtaEvaluator::new`] but never takes the Gaussian closed
    /// form; used to cross-check the numerical path.
    pub fn quadrature_only(prior: Prior) -> Self {
        let rules = match prior {
            Prior::Gaussian { .. } | Prior::StudentT { .. } => {
                HERMITE_SIZES.iter().map(|&n| GaussHermite::new(n)).collect()
            }
            _ => Vec::new(),
        };
        Self {
            prior,
            force_quadrature: true,
            rules,
        }
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn log_eta(&self, z: f64, t: u64) -> Result<f64> {
        if t == 0 {
            return Err(Error::Domain("η_t needs t ≥ 1"));
        }
        if !z.is_finite() {
            return Err(Error::Domain("η_t needs a finite argument"));
        }
        match self.prior {
            Prior::Improper => Ok(-0.5 * log(2.0 * PI)),
            Prior::Gaussian { location, scale } if !self.force_quadrature => {
                let v = scale * scale + 1.0 / t as f64;
                let d = z - location;
                Ok(-0.5 * log(2.0 * PI * v) - 0.5 * d * d / v)
            }
            _ => self.log_eta_numeric(z, t),
        }
    }

    pub fn eta(&self, z: f64, t: u64) -> Result<f64> {
        self.log_eta(z, t).map(exp)
    }

    fn log_eta_numeric(&self, z: f64, t: u64) -> Result<f64> {
        let sd = 1.0 / sqrt(t as f64);
        let scale = self.prior.scale().unwrap_or(f64::INFINITY);
        if !self.rules.is_empty() && scale >= sd {
            if let Some(v) = self.log_eta_hermite(z, t) {
                return Ok(v);
            }
        }
        self.log_eta_kronrod(z, t)
    }

    fn log_eta_hermite(&self, z: f64, t: u64) -> Option<f64> {
        let h = sqrt(2.0 / t as f64);
        let prior = &self.prior;
        let estimate = |rule: &GaussHermite| {
            let mut top = f64::NEG_INFINITY;
            let terms: Vec<f64> = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(&x, &w)| {
                    let l = log(w) + prior.log_density(z + h * x);
                    top = top.max(l);
                    l
                })
                .collect();
            let sum: f64 = terms.iter().map(|l| exp(l - top)).sum();
            top + log(sum) - 0.5 * log(PI)
        };
        let mut prev = estimate(&self.rules[0]);
        for rule in &self.rules[1..] {
            let next = estimate(rule);
            if fabs(next - prev) <= HERMITE_TOL {
                return Some(next);
            }
            prev = next;
        }
        None
    }

    fn log_eta_kronrod(&self, z: f64, t: u64) -> Result<f64> {
        let tf = t as f64;
        let sd = 1.0 / sqrt(tf);
        let loc = self.prior.location();
        let scale = self.prior.scale().unwrap_or(sd);
        let log_kernel_norm = 0.5 * log(tf / (2.0 * PI));
        let prior = self.prior;
        let g = move |zeta: f64| {
            let d = z - zeta;
            log_kernel_norm - 0.5 * tf * d * d + prior.log_density(zeta)
        };

        let lo = z.min(loc) - 40.0 * (sd + scale);
        let hi = z.max(loc) + 40.0 * (sd + scale);
        let mut breaks: Vec<f64> = Vec::with_capacity(32);
        breaks.push(lo);
        breaks.push(hi);
        for k in [0.0, 1.0, 3.0, 8.0, 20.0] {
            breaks.push(z + k * sd);
            breaks.push(z - k * sd);
        }
        for k in [0.0, 1.0, 4.0, 16.0] {
            breaks.push(loc + k * scale);
            breaks.push(loc - k * scale);
        }
        breaks.retain(|b| *b >= lo && *b <= hi);
        breaks.sort_by(|a, b| a.total_cmp(b));
        breaks.dedup();

        let (a, b) = (z.min(loc), z.max(loc));
        let mut top = breaks.iter().map(|&x| g(x)).fold(f64::NEG_INFINITY, f64::max);
        for i in 0..=64 {
            top = top.max(g(a + (b - a) * i as f64 / 64.0));
        }

        let r = adaptive_gk(
            |x| exp(g(x) - top),
            &breaks,
            KRONROD_TOL,
            0.0,
            KRONROD_MAX_SEGMENTS,
        );
        if !r.converged || !(r.value > 0.0) {
            return Err(Error::Quadrature {
                z,
                t,
                estimate: r.value,
                error: r.error,
            });
        }
        Ok(top + log(r.value))
    }
}

/// `log η_t(z)` for a one-off evaluation.
pub fn log_eta(z: f64, t: u64, prior: &Prior) -> Result<f64> {
    EtaEvaluator::new(*prior).log_eta(z, t)
}

/// `η_t(z)`; returns 0 when the density underflows.
pub fn eta(z: f64, t: u64, prior: &Prior) -> Result<f64> {
    log_eta(z, t, prior).map(exp)
}

/// Closed form of `log η_t` for a Laplace prior, via the
/// exponential-times-Gaussian-tail identity.
pub fn log_eta_laplace_closed(z: f64, t: u64, location: f64, scale: f64) -> f64 {
    let sigma = 1.0 / sqrt(t as f64);
    let s2 = sigma * sigma;
    let u = z - location;
    let a = s2 / (2.0 * scale * scale);
    let denom = sigma * core::f64::consts::SQRT_2;
    let l1 = a - u / scale + log_erfc((s2 / scale - u) / denom);
    let l2 = a + u / scale + log_erfc((s2 / scale + u) / denom);
    -log(4.0 * scale) + log_add_exp(l1, l2)
}
