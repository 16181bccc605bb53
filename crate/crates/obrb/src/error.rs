use std::io;
use std::path::PathBuf;

use crate::checkpoint::CheckpointError;
use crate::config::ConfigError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Config { path: String, source: ConfigError },
    #[error("setup: {0}")]
    Setup(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("solver failure at t = {t} (step {step}): {source}{}", checkpoint_note(.checkpoint))]
    Solver {
        source: obrb_core::Error,
        t: f64,
        step: u64,
        checkpoint: Option<PathBuf>,
    },
    #[error("solver failure in {member}: {message}")]
    MemberSolver { member: String, message: String },
    #[error("assertion failed: {message}{}", checkpoint_note(.counterexample))]
    Assertion {
        message: String,
        counterexample: Option<PathBuf>,
    },
}

fn checkpoint_note(p: &Option<PathBuf>) -> String {
    match p {
        Some(p) => format!(" (state written to {})", p.display()),
        None => String::new(),
    }
}

impl Error {
    /// Process exit status: 1 assertion, 2 usage or configuration, 3 solver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Assertion { .. } => 1,
            Error::Config { .. } | Error::Setup(_) | Error::Io { .. } | Error::Checkpoint(_) => 2,
            Error::Solver { .. } | Error::MemberSolver { .. } => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Self {
        let path = path.into();
        move |source| Error::Io { path, source }
    }

    /// Classifies a core error raised before time stepping starts.
    pub(crate) fn from_core(e: obrb_core::Error, t: f64, step: u64) -> Self {
        use obrb_core::Error as E;
        match e {
            E::NotConverged { .. }
            | E::SingularCoupling(_)
            | E::CflViolation { .. }
            | E::NonFinite { .. }
            | E::Incompressibility { .. }
            | E::SteadyNotReached { .. } => Error::Solver {
                source: e,
                t,
                step,
                checkpoint: None,
            },
            other => Error::Setup(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
