//! Estimands defined by convex losses, through their subgradients in θ.

/// Whether closed-form squared-loss shortcuts apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Squared,
    Generic,
}

/// A convex loss `ℓ_θ(x, y)` seen through its subgradient `ℓ′_θ(x, y)`.
pub trait Loss: Sync {
    fn subgradient(&self, theta: f64, covariates: Option<&[f64]>, y: f64) -> f64;

    fn kind(&self) -> LossKind {
        LossKind::Generic
    }
}

/// `ℓ_θ(x, y) = (θ − y)²/2`, whose minimizer is the mean of `Y`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SquaredLoss;

impl Loss for SquaredLoss {
    fn subgradient(&self, theta: f64, _covariates: Option<&[f64]>, y: f64) -> f64 {
        theta - y
    }

    fn kind(&self) -> LossKind {
        LossKind::Squared
    }
}

/// Any closure `(θ, x, y) ↦ ℓ′_θ(x, y)`; always evaluated on buffered
/// records.
#[derive(Debug, Clone, Copy)]
pub struct FnLoss<F>(pub F);

impl<F> Loss for FnLoss<F>
where
    F: Fn(f64, Option<&[f64]>, f64) -> f64 + Sync,
{
    fn subgradient(&self, theta: f64, covariates: Option<&[f64]>, y: f64) -> f64 {
        (self.0)(theta, covariates, y)
    }
}

pub(crate) static SQUARED: SquaredLoss = SquaredLoss;
