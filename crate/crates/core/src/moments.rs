//! Streaming sufficient statistics for labelled pairs and unlabelled
//! predictions.
//!
//! Every squared-loss estimator in [`crate::ppi`] is a function of the
//! counts, means and centered second moments kept here, so one O(1)
//! update per record is enough. Generic losses, whose subgradients depend
//! on θ, need the raw records; [`StreamState::buffered`] keeps them.

use alloc::vec::Vec;

use crate::cv;
use crate::error::{Error, Result};

/// One record of the stream: a prediction, plus a label when the record
/// is labelled.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub prediction: f64,
    pub label: Option<f64>,
    /// Raw inputs, only needed by losses that look at them.
    pub covariates: Option<Vec<f64>>,
}

impl Observation {
    pub fn labelled(label: f64, prediction: f64) -> Self {
        Self {
            prediction,
            label: Some(label),
            covariates: None,
        }
    }

    pub fn unlabelled(prediction: f64) -> Self {
        Self {
            prediction,
            label: None,
            covariates: None,
        }
    }

    pub fn with_covariates(mut self, covariates: Vec<f64>) -> Self {
        self.covariates = Some(covariates);
        self
    }

    pub fn is_labelled(&self) -> bool {
        self.label.is_some()
    }

    fn validate(&self, index: u64) -> Result<()> {
        if !self.prediction.is_finite() {
            return Err(Error::Data {
                index,
                field: "prediction",
            });
        }
        if matches!(self.label, Some(y) if !y.is_finite()) {
            return Err(Error::Data {
                index,
                field: "label",
            });
        }
        if let Some(x) = &self.covariates {
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data {
                    index,
                    field: "covariate",
                });
            }
        }
        Ok(())
    }
}

/// Count, means and centered co-moments of a paired sample `(u, v)`.
///
/// `s_uu = Σ(uᵢ − ū)²`, `s_vv = Σ(vᵢ − v̄)²`, `s_uv = Σ(uᵢ − ū)(vᵢ − v̄)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PairMoments {
    pub n: u64,
    pub mean_u: f64,
    pub mean_v: f64,
    pub s_uu: f64,
    pub s_vv: f64,
    pub s_uv: f64,
}

impl PairMoments {
    pub fn push(&mut self, u: f64, v: f64) {
        self.n += 1;
        let k = self.n as f64;
        let du = u - self.mean_u;
        let dv = v - self.mean_v;
        self.mean_u += du / k;
        self.mean_v += dv / k;
        self.s_uu += du * (u - self.mean_u);
        self.s_vv += dv * (v - self.mean_v);
        self.s_uv += du * (v - self.mean_v);
        // Rounding can push |s_uv| a few ulps past √(s_uu·s_vv).
        let bound = libm::sqrt(self.s_uu * self.s_vv);
        self.s_uv = self.s_uv.clamp(-bound, bound);
    }

    /// Two-pass moments of `(u, v)` pairs.
    pub fn from_pairs<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (f64, f64)> + Clone,
    {
        let mut n = 0u64;
        let (mut su, mut sv) = (0.0, 0.0);
        for (u, v) in pairs.clone() {
            n += 1;
            su += u;
            sv += v;
        }
        if n == 0 {
            return Self::default();
        }
        let mean_u = su / n as f64;
        let mean_v = sv / n as f64;
        let (mut s_uu, mut s_vv, mut s_uv) = (0.0, 0.0, 0.0);
        for (u, v) in pairs {
            let du = u - mean_u;
            let dv = v - mean_v;
            s_uu += du * du;
            s_vv += dv * dv;
            s_uv += du * dv;
        }
        Self {
            n,
            mean_u,
            mean_v,
            s_uu,
            s_vv,
            s_uv,
        }
    }

    /// Moments of `(u, v − u)`, derived exactly from those of `(u, v)`.
    pub fn rectifier(&self) -> Self {
        Self {
            n: self.n,
            mean_u: self.mean_u,
            mean_v: self.mean_v - self.mean_u,
            s_uu: self.s_uu,
            s_vv: (self.s_vv - 2.0 * self.s_uv + self.s_uu).max(0.0),
            s_uv: self.s_uv - self.s_uu,
        }
    }

    /// Moments of `(a − u, a − v)`; centered sums are unchanged.
    pub fn reflect(&self, a: f64) -> Self {
        Self {
            mean_u: a - self.mean_u,
            mean_v: a - self.mean_v,
            ..*self
        }
    }

    pub fn var_u(&self) -> Option<f64> {
        (self.n >= 2).then(|| self.s_uu / (self.n - 1) as f64)
    }

    pub fn var_v(&self) -> Option<f64> {
        (self.n >= 2).then(|| self.s_vv / (self.n - 1) as f64)
    }
}

/// Count, mean and centered sum of squares of a univariate sample.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PoolMoments {
    pub count: u64,
    pub mean: f64,
    pub s: f64,
}

impl PoolMoments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.s += d * (x - self.mean);
    }

    pub fn from_values<I>(values: I) -> Self
    where
        I: IntoIterator<Item = f64> + Clone,
    {
        let (count, sum) = values
            .clone()
            .into_iter()
            .fold((0u64, 0.0), |(c, s), x| (c + 1, s + x));
        if count == 0 {
            return Self::default();
        }
        let mean = sum / count as f64;
        let s = values.into_iter().map(|x| (x - mean) * (x - mean)).sum();
        Self { count, mean, s }
    }

    /// `a − x` for every element.
    pub fn reflect(&self, a: f64) -> Self {
        Self {
            mean: a - self.mean,
            ..*self
        }
    }

    pub fn variance(&self) -> Option<f64> {
        (self.count >= 2).then(|| self.s / (self.count - 1) as f64)
    }
}

/// Which of the two variance estimators for control-variate means to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarFlavor {
    /// Fixed coefficient λ, unlabelled mean estimated from the pool.
    Cv,
    /// Tuned coefficient λ̂.
    CvPlus,
}

/// Running state of a labelled/unlabelled stream.
///
/// Labelled records feed the `(F, Y)` co-moments; unlabelled records feed
/// the pool of predictions `F̃`. With pooling enabled, labelled
/// predictions also enter the pool, which is the interleaved-stream
/// convention where `N` counts every prediction seen so far.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StreamState {
    labelled: PairMoments,
    pool: PoolMoments,
    pool_labelled: bool,
    records: u64,
    buffer: Option<Vec<Observation>>,
}

impl StreamState {
    pub fn new() -> Self {
        Self::default()
    }

    /// A state that also retains every record, for losses whose
    /// subgradients cannot be pre-aggregated.
    pub fn buffered() -> Self {
        Self {
            buffer: Some(Vec::new()),
            ..Self::default()
        }
    }

    pub fn with_pooling(mut self, pool_labelled: bool) -> Self {
        self.pool_labelled = pool_labelled;
        self
    }

    /// Folds one record into the state. Invalid records leave the state
    /// untouched.
    pub fn update(&mut self, obs: Observation) -> Result<()> {
        obs.validate(self.records)?;
        self.records += 1;
        match obs.label {
            Some(y) => {
                self.labelled.push(obs.prediction, y);
                if self.pool_labelled {
                    self.pool.push(obs.prediction);
                }
            }
            None => self.pool.push(obs.prediction),
        }
        if let Some(buf) = &mut self.buffer {
            buf.push(obs);
        }
        Ok(())
    }

    /// Number of labelled records.
    pub fn n(&self) -> u64 {
        self.labelled.n
    }

    /// Number of predictions in the unlabelled pool.
    pub fn big_n(&self) -> u64 {
        self.pool.count
    }

    /// Records consumed, labelled or not.
    pub fn records(&self) -> u64 {
        self.records
    }

    pub fn mean_y(&self) -> f64 {
        self.labelled.mean_v
    }

    pub fn mean_f(&self) -> f64 {
        self.labelled.mean_u
    }

    pub fn mean_ftilde(&self) -> f64 {
        self.pool.mean
    }

    pub fn s_yy(&self) -> f64 {
        self.labelled.s_vv
    }

    pub fn s_ff(&self) -> f64 {
        self.labelled.s_uu
    }

    pub fn s_yf(&self) -> f64 {
        self.labelled.s_uv
    }

    pub fn s_ftft(&self) -> f64 {
        self.pool.s
    }

    /// Labelled co-moments with `u = f(X)` and `v = Y`.
    pub fn labelled(&self) -> &PairMoments {
        &self.labelled
    }

    pub fn pool(&self) -> &PoolMoments {
        &self.pool
    }

    pub fn pools_labelled(&self) -> bool {
        self.pool_labelled
    }

    pub fn buffer(&self) -> Option<&[Observation]> {
        self.buffer.as_deref()
    }

    /// Power-tuning coefficient `λ̂ = ĉov(Y, F) / v̂ar(F)`.
    pub fn lambda_hat(&self) -> Result<f64> {
        cv::lambda_hat(&self.labelled)
    }

    /// `ν̂ᶜᵛ_λ` or `ν̂ᶜᵛ⁺` for the `(F, Y)` pairs against the current pool.
    /// For [`VarFlavor::CvPlus`] the coefficient is λ̂ and `lambda` is
    /// ignored.
    pub fn var_estimator(&self, lambda: f64, flavor: VarFlavor) -> Result<f64> {
        match flavor {
            VarFlavor::Cv => cv::nu_cv(&self.labelled, lambda, Some(&self.pool)),
            VarFlavor::CvPlus => cv::nu_cv_plus(&self.labelled, Some(self.pool.count)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labelled(points: &[(f64, f64)]) -> StreamState {
        let mut st = StreamState::new();
        for &(y, f) in points {
            st.update(Observation::labelled(y, f)).unwrap();
        }
        st
    }

    #[test]
    fn single_point_has_no_scatter() {
        let st = labelled(&[(1.0, 1.0)]);
        assert_eq!(st.n(), 1);
        assert_eq!(st.mean_y(), 1.0);
        assert_eq!(st.s_yy(), 0.0);
    }

    #[test]
    fn two_points_by_hand() {
        let st = labelled(&[(0.0, 0.0), (2.0, 2.0)]);
        assert_eq!(st.mean_y(), 1.0);
        assert_eq!(st.s_yy(), 2.0);
        assert_eq!(st.s_yf(), 2.0);
        assert_eq!(st.s_ff(), 2.0);
        assert_eq!(st.lambda_hat().unwrap(), 1.0);
    }

    #[test]
    fn identical_values_have_zero_centered_sums() {
        let mut st = StreamState::new();
        for _ in 0..17 {
            st.update(Observation::labelled(0.3, -1.7)).unwrap();
            st.update(Observation::unlabelled(2.9)).unwrap();
        }
        assert_eq!(st.s_yy(), 0.0);
        assert_eq!(st.s_ff(), 0.0);
        assert_eq!(st.s_yf(), 0.0);
        assert_eq!(st.s_ftft(), 0.0);
    }

    #[test]
    fn non_finite_record_is_rejected_with_its_index() {
        let mut st = StreamState::new();
        st.update(Observation::labelled(1.0, 1.0)).unwrap();
        st.update(Observation::unlabelled(0.0)).unwrap();
        let err = st.update(Observation::labelled(f64::NAN, 0.0)).unwrap_err();
        assert_eq!(
            err,
            Error::Data {
                index: 2,
                field: "label"
            }
        );
        let err = st.update(Observation::unlabelled(f64::INFINITY)).unwrap_err();
        assert_eq!(
            err,
            Error::Data {
                index: 2,
                field: "prediction"
            }
        );
        assert_eq!(st.n(), 1);
        assert_eq!(st.big_n(), 1);
    }

    #[test]
    fn labelled_predictions_stay_out_of_the_pool_by_default() {
        let mut st = StreamState::new();
        st.update(Observation::labelled(1.0, 0.5)).unwrap();
        assert_eq!(st.big_n(), 0);
        let mut pooled = StreamState::new().with_pooling(true);
        pooled.update(Observation::labelled(1.0, 0.5)).unwrap();
        pooled.update(Observation::unlabelled(1.5)).unwrap();
        assert_eq!(pooled.big_n(), 2);
        assert_eq!(pooled.mean_ftilde(), 1.0);
    }

    #[test]
    fn constant_predictions_are_degenerate() {
        let st = labelled(&[(0.0, 1.0), (1.0, 1.0), (2.0, 1.0)]);
        assert_eq!(st.lambda_hat(), Err(Error::DegeneratePredictor));
    }

    #[test]
    fn buffer_only_in_buffered_mode() {
        let mut st = StreamState::buffered();
        st.update(Observation::labelled(1.0, 2.0)).unwrap();
        st.update(Observation::unlabelled(3.0)).unwrap();
        assert_eq!(st.buffer().unwrap().len(), 2);
        assert!(StreamState::new().buffer().is_none());
    }

    #[test]
    fn rectifier_moments_match_direct_computation() {
        let pts = [(0.3, 1.0), (1.1, 0.2), (-0.4, 0.9), (2.5, 2.2), (0.0, -1.0)];
        let pm = PairMoments::from_pairs(pts.iter().copied());
        let direct = PairMoments::from_pairs(pts.iter().map(|&(u, v)| (u, v - u)));
        let derived = pm.rectifier();
        for (a, b) in [
            (derived.mean_v, direct.mean_v),
            (derived.s_vv, direct.s_vv),
            (derived.s_uv, direct.s_uv),
        ] {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
        }
    }
}
