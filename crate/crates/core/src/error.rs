use thiserror::Error;

use crate::model::{StationSet, Violation};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid model: {}", format_violations(.0))]
    InvalidModel(Vec<Violation>),

    #[error("degenerate traffic: rho_hat = {rho_hat} is within 1e-12 of 1")]
    DegenerateTraffic { rho_hat: f64 },

    #[error(
        "p_tilde has {} essential classes; the chain is never ergodic unless every \
         class residual vanishes (residuals: {residuals:?}). With independent compound \
         Poisson arrivals at each queue the system is never ergodic",
        .classes.len()
    )]
    MultipleEssentialClasses {
        classes: Vec<StationSet>,
        residuals: Vec<f64>,
    },

    #[error("linear system is numerically singular ({0})")]
    SingularSystem(String),

    #[error("{stations} stations exceed the face-enumeration limit of {limit}")]
    TooManyFaces { stations: usize, limit: usize },

    #[error("Lyapunov certificate failed on face {face} at station {}: {reason}", .coordinate + 1)]
    CertificateFailed {
        face: String,
        coordinate: usize,
        reason: String,
    },

    #[error("unstable regime: N*alpha = {load} >= 1")]
    UnstableRegime { load: f64 },

    #[error("closed form has a non-negligible imaginary part ({imag:e} vs real {real}); check A1-A3")]
    ComplexResidual { real: f64, imag: f64 },

    #[error("eigenvalue mu_{index} = {value} is too close to 1")]
    DegenerateEigenvalue { index: usize, value: String },

    #[error("missing field `{0}`")]
    MissingField(&'static str),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("unsupported travel or batch law: {0}")]
    UnsupportedLaw(String),

    #[error("state space of {states} states exceeds the limit of {limit}")]
    StateSpaceTooLarge { states: usize, limit: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for errors caused by the input itself rather than by a solver.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidModel(_)
                | Error::MissingField(_)
                | Error::Parse(_)
                | Error::InvalidConfig(_)
        )
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
