use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the planner and its supporting modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("time {0} lies outside [0, 1]")]
    Domain(f64),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("duplicate support time {0}")]
    DuplicateTime(f64),

    #[error("gram factorization failed after jitter escalation to {0:e}")]
    Factorization(f64),

    #[error("singular {0} system")]
    Singular(&'static str),

    #[error("support size {size} exceeds the cap of {cap}")]
    SupportOverflow { size: usize, cap: usize },

    #[error("invalid body point: link {link}, fraction {fraction}")]
    BodyPoint { link: usize, fraction: f64 },

    #[error("scene generation failed after {0} rejections")]
    Generation(usize),

    #[error("invalid scene: {0}")]
    Scene(String),

    #[error("legendre root iteration did not converge for n = {0}")]
    Quadrature(usize),

    #[error("benchmark aborted: {0}")]
    Bench(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::Domain(t))
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
