//! Control-variate estimators of `E[V]` from pairs `(Uᵢ, Vᵢ)` and an
//! auxiliary pool `Ũⱼ` with the same law as `U`, and consistent
//! estimators of their asymptotic variances.
//!
//! A pool of `None` means the pool is exhaustive: `E[U]` is known and
//! the ratio `n/N` is zero.

use crate::error::{Error, Result};
use crate::moments::{PairMoments, PoolMoments};

/// `ĉov(U, V) / v̂ar(U)`; the `n − 1` normalizations cancel.
pub fn lambda_hat(pair: &PairMoments) -> Result<f64> {
    if pair.n < 2 {
        return Err(Error::InsufficientData {
            what: "power-tuning coefficient",
            needed: 2,
            have: pair.n,
        });
    }
    if pair.s_uu <= 0.0 {
        return Err(Error::DegeneratePredictor);
    }
    Ok(pair.s_uv / pair.s_uu)
}

/// `Σ(Vᵢ − V̄ − λ(Uᵢ − Ū))²`, expanded in the stored co-moments.
pub fn residual_sum(pair: &PairMoments, lambda: f64) -> f64 {
    (pair.s_vv - 2.0 * lambda * pair.s_uv + lambda * lambda * pair.s_uu).max(0.0)
}

fn need_three(pair: &PairMoments) -> Result<()> {
    if pair.n < 3 {
        return Err(Error::InsufficientData {
            what: "control-variate variance",
            needed: 3,
            have: pair.n,
        });
    }
    Ok(())
}

/// `ν̂ᶜᵛ_λ = RSS(λ)/(n − 2) + n λ² S_Ũ / (N(N − 1))`.
pub fn nu_cv(pair: &PairMoments, lambda: f64, pool: Option<&PoolMoments>) -> Result<f64> {
    need_three(pair)?;
    if !lambda.is_finite() {
        return Err(Error::Domain("control-variate coefficient must be finite"));
    }
    let n = pair.n as f64;
    let mut nu = residual_sum(pair, lambda) / (n - 2.0);
    if let Some(pool) = pool {
        if pool.count < 2 {
            return Err(Error::InsufficientData {
                what: "unlabelled pool variance",
                needed: 2,
                have: pool.count,
            });
        }
        let big_n = pool.count as f64;
        nu += n * lambda * lambda * pool.s / (big_n * (big_n - 1.0));
    }
    Ok(nu)
}

/// `ν̂ᶜᵛ⁺` evaluated at an explicit coefficient:
/// `(1 − n/N) RSS(λ)/(n − 2) + (n/N) S_VV/(n − 1)`.
pub fn nu_cv_plus_at(pair: &PairMoments, lambda: f64, big_n: Option<u64>) -> Result<f64> {
    need_three(pair)?;
    let n = pair.n as f64;
    let ratio = match big_n {
        None => 0.0,
        Some(big) if big < pair.n => {
            return Err(Error::InvalidRatio {
                n: pair.n,
                big_n: big,
            })
        }
        Some(big) => n / big as f64,
    };
    Ok((1.0 - ratio) * residual_sum(pair, lambda) / (n - 2.0) + ratio * pair.s_vv / (n - 1.0))
}

/// `ν̂ᶜᵛ⁺` at the tuned coefficient λ̂.
pub fn nu_cv_plus(pair: &PairMoments, big_n: Option<u64>) -> Result<f64> {
    let lambda = lambda_hat(pair)?;
    nu_cv_plus_at(pair, lambda, big_n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::{Observation, StreamState, VarFlavor};

    fn state(labelled: &[(f64, f64)], pool: &[f64]) -> StreamState {
        let mut st = StreamState::new();
        for &(y, f) in labelled {
            st.update(Observation::labelled(y, f)).unwrap();
        }
        for &f in pool {
            st.update(Observation::unlabelled(f)).unwrap();
        }
        st
    }

    #[test]
    fn perfect_predictions_give_zero_tuned_variance_in_the_limit() {
        let pts: alloc::vec::Vec<(f64, f64)> =
            (0..50).map(|i| (i as f64 * 0.37 - 3.0, i as f64 * 0.37 - 3.0)).collect();
        let st = state(&pts, &[]);
        let nu = nu_cv_plus(st.labelled(), None).unwrap();
        assert!(nu.abs() < 1e-12, "{nu}");
    }

    #[test]
    fn uncorrelated_predictions_recover_label_variance() {
        // F is orthogonal to Y by construction, so λ̂ = 0.
        let ys = [1.0, -1.0, 1.0, -1.0, 2.0, -2.0, 2.0, -2.0];
        let fs = [1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0];
        let pts: alloc::vec::Vec<_> = ys.iter().copied().zip(fs.iter().copied()).collect();
        let st = state(&pts, &[]);
        assert!(st.lambda_hat().unwrap().abs() < 1e-15);
        let nu = nu_cv_plus(st.labelled(), None).unwrap();
        let var_y = st.s_yy() / (st.n() - 2) as f64;
        assert!((nu - var_y).abs() < 1e-12);
    }

    #[test]
    fn closed_form_matches_literal_sums() {
        let pts = [(0.5, 0.1), (1.5, 1.9), (-0.2, 0.3), (2.0, 2.5), (0.7, 0.0), (1.2, 1.0)];
        let pool = [0.2, 1.1, -0.5, 0.9, 1.7, 0.4, 0.8, 0.0];
        let st = state(&pts, &pool);
        let lambda = 0.8;
        let n = pts.len() as f64;
        let big_n = pool.len() as f64;
        let (my, mf) = (
            pts.iter().map(|p| p.0).sum::<f64>() / n,
            pts.iter().map(|p| p.1).sum::<f64>() / n,
        );
        let mp = pool.iter().sum::<f64>() / big_n;
        let rss: f64 = pts
            .iter()
            .map(|&(y, f)| (y - my - lambda * (f - mf)).powi(2))
            .sum();
        let sp: f64 = pool.iter().map(|f| (f - mp).powi(2)).sum();
        let expect = rss / (n - 2.0) + n * lambda * lambda * sp / (big_n * (big_n - 1.0));
        let got = st.var_estimator(lambda, VarFlavor::Cv).unwrap();
        assert!((got - expect).abs() < 1e-12 * expect);

        let lh = st.lambda_hat().unwrap();
        let rss_hat: f64 = pts
            .iter()
            .map(|&(y, f)| (y - my - lh * (f - mf)).powi(2))
            .sum();
        let syy: f64 = pts.iter().map(|p| (p.0 - my).powi(2)).sum();
        let r = n / big_n;
        let expect = (1.0 - r) * rss_hat / (n - 2.0) + r * syy / (n - 1.0);
        let got = st.var_estimator(f64::NAN, VarFlavor::CvPlus).unwrap();
        assert!((got - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn error_paths() {
        let st = state(&[(0.0, 0.0), (1.0, 2.0)], &[1.0, 2.0, 3.0]);
        assert!(matches!(
            st.var_estimator(1.0, VarFlavor::Cv),
            Err(Error::InsufficientData { needed: 3, .. })
        ));
        let st = state(&[(0.0, 0.0), (1.0, 2.0), (2.0, 1.0), (3.0, 3.0)], &[1.0, 2.0]);
        assert_eq!(
            st.var_estimator(1.0, VarFlavor::CvPlus),
            Err(Error::InvalidRatio { n: 4, big_n: 2 })
        );
        assert!(st.var_estimator(1.0, VarFlavor::Cv).is_ok());
    }
}
