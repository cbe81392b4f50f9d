use thiserror::Error;

/// Everything that can go wrong in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("negative probability {p} at index ({k}, {l})")]
    NegativeProbability { k: usize, l: usize, p: f64 },

    #[error("total probability mass {mass} is not 1")]
    MassNotOne { mass: f64 },

    #[error("duplicate index ({k}, {l})")]
    DuplicateIndex { k: usize, l: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid index: {0}")]
    InvalidIndex(String),

    #[error("requested size {requested} exceeds configured capacity {limit}")]
    CapacityExceeded { requested: usize, limit: usize },

    #[error("{op}: no convergence after {iterations} iterations")]
    NoConvergence { op: &'static str, iterations: usize },

    #[error("{op}: iterate left the admissible domain")]
    LeftDomain { op: &'static str },

    #[error("{op}: Hessian determinant {det} is not positive")]
    SingularHessian { op: &'static str, det: f64 },

    #[error("{op}: no sign change on the search interval")]
    NoSignChange { op: &'static str },

    #[error("critical point at t = {t} has non-positive slope {slope}")]
    NonIncreasingAtRoot { t: f64, slope: f64 },

    #[error("class violation: {0}")]
    ClassViolation(String),

    #[error("no root of h_Y(x) = 1 on the search interval")]
    NoRoot,

    #[error("root {root} of h_Y(x) = 1 has the wrong sign for E Y = {mean}")]
    RootSignMismatch { root: f64, mean: f64 },

    #[error("second factorial moment E Y(Y-1) is zero")]
    DegenerateSecondMoment,

    #[error("t = {t} outside family interval [{lo}, {hi}]")]
    OutOfInterval { t: f64, lo: f64, hi: f64 },

    #[error("entry ({k}, {l}) evaluates to {value} at t = {t}")]
    NegativeEntry { k: usize, l: usize, t: f64, value: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad input rather than numerical failure.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::NegativeProbability { .. }
                | Error::MassNotOne { .. }
                | Error::DuplicateIndex { .. }
                | Error::InvalidParameter(_)
                | Error::InvalidIndex(_)
                | Error::CapacityExceeded { .. }
                | Error::OutOfInterval { .. }
                | Error::NegativeEntry { .. }
                | Error::Config(_)
                | Error::Json(_)
                | Error::Io(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
