//! Scalar special functions used by the radius formulas.

use core::f64::consts::{E, PI};

use libm::{erfc, exp, fabs, log, sqrt};

use crate::error::{Error, Result};

/// Lower real branch `W₋₁(x)` of the Lambert W function, for
/// `x ∈ [−1/e, 0)`.
///
/// Starts from the branch-point series near `−1/e` and from the
/// `log(−x) − log(−log(−x))` asymptote elsewhere, then applies Halley
/// steps until the relative step drops below 1e-15.
pub fn lambert_w_m1(x: f64) -> Result<f64> {
    let branch = -1.0 / E;
    if !(x >= branch && x < 0.0) {
        return Err(Error::Domain("W₋₁ is real only on [-1/e, 0)"));
    }
    if x == branch {
        return Ok(-1.0);
    }
    let mut w = if x < -0.25 {
        let p = -sqrt(2.0 * (1.0 + E * x));
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else {
        let l1 = log(-x);
        let l2 = log(-l1);
        l1 - l2 + l2 / l1
    };
    for _ in 0..64 {
        let ew = exp(w);
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if fabs(step) <= 1e-15 * fabs(w) {
            break;
        }
    }
    Ok(w)
}

/// Scaled complementary error function `exp(x²) erfc(x)` for `x ≥ 0`.
fn erfcx_nonneg(x: f64) -> f64 {
    if x < 4.0 {
        return exp(x * x) * erfc(x);
    }
    // Continued fraction erfc(x) = e^{-x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …)))).
    let mut tail = x;
    for k in (1..=60).rev() {
        tail = x + (k as f64 / 2.0) / tail;
    }
    1.0 / (sqrt(PI) * tail)
}

/// `log(erfc(x))`, finite for every finite `x`.
pub fn log_erfc(x: f64) -> f64 {
    if x < 4.0 {
        log(erfc(x))
    } else {
        -x * x + log(erfcx_nonneg(x))
    }
}

/// `log(eᵃ + eᵇ)` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + libm::log1p(exp(lo - hi))
}
