//! Streaming confidence sequences for prediction-powered estimates.
//!
//! Streams of labelled pairs `(Y, f(X))` and unlabelled predictions
//! `f(X̃)` are summarized by [`StreamState`]. An [`Analyzer`] turns the
//! summary into point estimates and confidence sequences for a
//! loss-minimizer θ*, optionally sharpening the rectifier term with a
//! prior on how biased the predictions are.
//!
//! The crate is `no_std` (it needs `alloc`); file formats, the simulation
//! harness and the command line live in the `avppi` crate.

#![no_std]

extern crate alloc;

pub mod cs;
pub mod cv;
pub mod error;
pub mod eta;
pub mod loss;
pub mod moments;
pub mod ppi;
pub mod prior;
pub mod quadrature;
pub mod special;

pub use cs::{radius_ba, radius_na, rho_opt, tau_heuristic, CsConfig, Interval, Population};
pub use error::{Error, ErrorKind, Result};
pub use eta::{eta, log_eta, EtaEvaluator};
pub use loss::{FnLoss, Loss, LossKind, SquaredLoss};
pub use moments::{Observation, PairMoments, PoolMoments, StreamState, VarFlavor};
pub use ppi::{Analyzer, Estimate, EstimatorFlavor, GCs, Grid, GridRegion, Region, Tuning};
pub use prior::Prior;
