use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate shockwave: both traffic states have density {density} veh/m")]
    DegenerateShockwave { density: f64 },

    #[error("time {t} s is outside the profile domain [0, {t_end}] s")]
    OutOfDomain { t: f64, t_end: f64 },

    #[error("infeasible speed profile: {0}")]
    InfeasibleProfile(String),

    #[error("engine power {power} W is outside the fuel map domain [{min}, {max}] W")]
    OutOfMapDomain { power: f64, min: f64, max: f64 },

    #[error("no feasible power-split policy: first blocked step {step}")]
    InfeasibleInstance { step: usize },

    #[error("inconsistent schedule at step {step}: {reason}")]
    InconsistentSchedule { step: usize, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }

    /// True when the root cause is an infeasible optimization instance.
    pub fn is_infeasible(&self) -> bool {
        match self {
            Error::InfeasibleProfile(_) | Error::InfeasibleInstance { .. } => true,
            Error::Stage { source, .. } => source.is_infeasible(),
            _ => false,
        }
    }

    /// True when the root cause is a filesystem or (de)serialization failure.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } | Error::Csv(_) | Error::Json(_) => true,
            Error::Stage { source, .. } => source.is_io(),
            _ => false,
        }
    }
}
