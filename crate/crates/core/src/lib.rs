//! Automated point-of-interest (POI) search for Gaussian template attacks.
//!
//! The crate bundles everything needed to run a profiled side-channel
//! campaign against the first-round AES S-box without a human picking
//! sample indices:
//!
//! * [`trace`]: the trace container, intermediate-value labelling and the
//!   `SCAT` on-disk format.
//! * [`sim`]: a synthetic Hamming-weight leakage simulator with unprotected
//!   and two boolean-masked scenarios.
//! * [`poi`]: correlation / SNR scoring and greedy top-k selection.
//! * [`template`]: Gaussian templates, discriminant scores and key ranking.
//! * [`metrics`]: guessing-entropy curves, `q_tge` and box-plot statistics.
//! * [`eda`]: a univariate marginal distribution algorithm (UMDA) whose
//!   fitness is the outcome of a template attack.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! `*F64` / `*F32` aliases below fix the precision for everyday use.

pub mod aes;
pub mod eda;
mod error;
pub mod linalg;
pub mod metrics;
pub mod poi;
pub mod rng;
pub mod sim;
pub mod template;
pub mod trace;

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

pub use error::{Error, Result};

/// Floating-point type the statistical core is written against.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lossless-enough conversion from a stored `f32` sample.
    fn from_sample(x: f32) -> Self;

    fn from_count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize representable as float")
    }

    fn from_f64_lossy(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 representable as float")
    }

    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    fn from_sample(x: f32) -> Self {
        x
    }
}

impl Scalar for f64 {
    fn from_sample(x: f32) -> Self {
        f64::from(x)
    }
}

pub type PoiScoresF64 = poi::PoiScores<f64>;
pub type PoiScoresF32 = poi::PoiScores<f32>;
pub type TemplateModelF64 = template::TemplateModel<f64>;
pub type TemplateModelF32 = template::TemplateModel<f32>;
pub type KeyGuessingVectorF64 = template::KeyGuessingVector<f64>;
pub type KeyGuessingVectorF32 = template::KeyGuessingVector<f32>;
pub type CholeskyF64 = linalg::Cholesky<f64>;

pub use eda::{UmdaConfig, UmdaOutcome, UmdaState};
pub use metrics::{BoxStats, GeCurve};
pub use poi::{PoiCandidate, ScoreMethod};
pub use sim::SimConfig;
pub use trace::{LeakageModel, SchemeTag, TraceSet};
