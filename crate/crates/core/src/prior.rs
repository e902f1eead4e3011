//! Priors on the standardized rectifier `Δ/σ`.

use core::f64::consts::PI;
use core::fmt;

use libm::{fabs, lgamma, log, log1p};

use crate::error::{Error, Result};

/// Mixing density for the Bayes-assisted radius. Locations and scales are
/// in standardized units (the prior is on `mean/σ`, not on the mean).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prior {
    Gaussian { location: f64, scale: f64 },
    Laplace { location: f64, scale: f64 },
    StudentT { location: f64, scale: f64, dof: f64 },
    /// The flat density `(2π)^{-1/2}`; not normalizable.
    Improper,
}

fn check_scale(scale: f64) -> Result<()> {
    if scale > 0.0 && scale.is_finite() {
        Ok(())
    } else {
        Err(Error::Config("prior scale must be positive and finite"))
    }
}

fn check_location(location: f64) -> Result<()> {
    if location.is_finite() {
        Ok(())
    } else {
        Err(Error::Config("prior location must be finite"))
    }
}

impl Prior {
    pub fn gaussian(location: f64, scale: f64) -> Result<Self> {
        check_location(location)?;
        check_scale(scale)?;
        Ok(Prior::Gaussian { location, scale })
    }

    pub fn laplace(location: f64, scale: f64) -> Result<Self> {
        check_location(location)?;
        check_scale(scale)?;
        Ok(Prior::Laplace { location, scale })
    }

    pub fn student_t(location: f64, scale: f64, dof: f64) -> Result<Self> {
        check_location(location)?;
        check_scale(scale)?;
        if !(dof > 0.0) {
            return Err(Error::Config("Student-t prior needs positive degrees of freedom"));
        }
        Ok(Prior::StudentT {
            location,
            scale,
            dof,
        })
    }

    pub fn is_proper(&self) -> bool {
        !matches!(self, Prior::Improper)
    }

    pub fn location(&self) -> f64 {
        match *self {
            Prior::Gaussian { location, .. }
            | Prior::Laplace { location, .. }
            | Prior::StudentT { location, .. } => location,
            Prior::Improper => 0.0,
        }
    }

    pub fn scale(&self) -> Option<f64> {
        match *self {
            Prior::Gaussian { scale, .. }
            | Prior::Laplace { scale, .. }
            | Prior::StudentT { scale, .. } => Some(scale),
            Prior::Improper => None,
        }
    }

    /// One-letter tag used in method labels.
    pub fn tag(&self) -> char {
        match self {
            Prior::Gaussian { .. } => 'G',
            Prior::Laplace { .. } => 'L',
            Prior::StudentT { .. } => 'T',
            Prior::Improper => 'I',
        }
    }

    pub fn log_density(&self, x: f64) -> f64 {
        match *self {
            Prior::Gaussian { location, scale } => {
                let u = (x - location) / scale;
                -0.5 * u * u - log(scale) - 0.5 * log(2.0 * PI)
            }
            Prior::Laplace { location, scale } => -fabs(x - location) / scale - log(2.0 * scale),
            Prior::StudentT {
                location,
                scale,
                dof,
            } => {
                let u = (x - location) / scale;
                student_t_log_norm(dof) - log(scale) - 0.5 * (dof + 1.0) * log1p(u * u / dof)
            }
            Prior::Improper => -0.5 * log(2.0 * PI),
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        libm::exp(self.log_density(x))
    }
}

/// `log Γ((ν+1)/2) − log Γ(ν/2) − ½ log(νπ)`.
pub(crate) fn student_t_log_norm(dof: f64) -> f64 {
    lgamma(0.5 * (dof + 1.0)) - lgamma(0.5 * dof) - 0.5 * log(dof * PI)
}

impl fmt::Display for Prior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prior::Gaussian { location, scale } => write!(f, "gaussian({location}, {scale})"),
            Prior::Laplace { location, scale } => write!(f, "laplace({location}, {scale})"),
            Prior::StudentT {
                location,
                scale,
                dof,
            } => write!(f, "student-t({location}, {scale}, dof {dof})"),
            Prior::Improper => write!(f, "improper"),
        }
    }
}
