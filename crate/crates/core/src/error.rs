use thiserror::Error;

use crate::ode::OdeFailure;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("cannot parse nonlinearity `{0}` (expected gp:<g>, log:<g>, sqrt[:g], quartic[:g], linear or custom:<path>)")]
    UnknownNonlinearity(String),

    #[error("sampled function rejected: {0}")]
    BadSamples(String),

    #[error("integration failed at t = {t}: {reason}")]
    Integration {
        t: f64,
        reason: String,
        partial: Box<OdeFailure>,
    },

    #[error(
        "nonlinearity makes no progress separating the states (rate {rate:e} at alpha = {alpha})"
    )]
    NoProgress { alpha: f64, rate: f64 },

    #[error("kbar shows no linear growth around z0 = {z0} (best slope {g_local:e})")]
    NoGrowth { z0: f64, g_local: f64 },

    #[error("no finite Lipschitz constant: estimate grew from {coarse:e} to {refined:e} under grid refinement")]
    NotLipschitz { coarse: f64, refined: f64 },

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("postselected overlap deviates from 1 by only {epsilon:e} at t1 = {t1}; raise t1")]
    EpsilonTooSmall { epsilon: f64, t1: f64 },

    #[error("nonlinearity is unbounded on [0,1] (sup |kappa| >= {0:e})")]
    UnboundedKappa(f64),

    #[error("audit budget exceeded: N = {n} above cap {cap}")]
    BudgetExceeded { n: usize, cap: usize },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
