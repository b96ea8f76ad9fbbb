use crate::signal::TimeAxis;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Error type shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Observed and synthetic data were recorded on different clocks.
    #[error(
        "time axis mismatch: nt={} dt={} s vs nt={} dt={} s",
        a.nt, a.dt, b.nt, b.dt
    )]
    AxisMismatch { a: TimeAxis, b: TimeAxis },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("acquisition geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// Time step violates the CFL stability bound of the scheme.
    #[error("time step {dt:.6e} s violates the stability bound; maximum admissible dt is {max_dt:.6e} s")]
    Stability { dt: f64, max_dt: f64 },

    /// A non-finite value appeared in the wavefield mid-run.
    #[error("solution diverged (non-finite value) at time step {step}")]
    Divergence { step: usize },

    /// A one-signed trace has no mass in the selected part.
    #[error("degenerate {part} part: mass {mass:.3e} is not above the floor {floor:.3e}")]
    DegeneratePart {
        part: &'static str,
        mass: f64,
        floor: f64,
    },

    /// Error from a per-shot computation, annotated with the shot index.
    #[error("shot {shot}: {source}")]
    Shot { shot: usize, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Attach a shot index to an error coming out of a per-shot loop.
    pub fn for_shot(self, shot: usize) -> Error {
        Error::Shot {
            shot,
            source: Box::new(self),
        }
    }

    /// Process exit code contract: 1 for validation/configuration problems,
    /// 2 for numerical failures discovered mid-compute.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Divergence { .. } | Error::DegeneratePart { .. } => 2,
            Error::Shot { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}
