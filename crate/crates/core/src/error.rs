//! Error type shared by all solver and I/O paths.

use thiserror::Error;

/// Errors produced by the geometry, linear-algebra, solver and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    /// The division-model denominator vanished; the point maps to infinity.
    #[error("degenerate distortion: division-model denominator ~ 0")]
    DegenerateDistortion,

    /// Projected point has non-positive depth.
    #[error("point behind camera (depth <= 0)")]
    BehindCamera,

    /// A fixed-point or iterative routine did not converge.
    #[error("iteration did not converge")]
    NoConvergence,

    /// The configuration is rank-degenerate for the requested null-space
    /// dimension (singular-value gap ratio below threshold).
    #[error("rank-degenerate configuration (singular-value gap ratio {gap_ratio:.3e})")]
    RankDegenerate { gap_ratio: f64 },

    /// Gauss-Jordan elimination hit a pivot that is numerically zero.
    #[error("singular pivot in Gauss-Jordan elimination")]
    PivotSingular,

    /// An eigenvalue routine failed to converge or produce valid pairs.
    #[error("eigenvalue decomposition failed")]
    EigenFailure,

    /// RQ decomposition of a projection matrix with a singular leading block.
    #[error("singular calibration block in projection matrix")]
    SingularCalibration,

    /// The offline elimination template hit a rank drop at runtime; the
    /// sample is degenerate for the solver.
    #[error("elimination template rank drop (degenerate sample)")]
    TemplateSingular,

    /// No candidate satisfied the feasibility constraints (e.g. f > 0).
    #[error("no feasible solution")]
    NoFeasibleSolution,

    /// RANSAC exhausted its iterations without a single feasible model.
    #[error("no model found by robust estimation")]
    NoModelFound,

    /// Not enough correspondences for the requested operation.
    #[error("insufficient data: need {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code used by the CLI: 2 for infeasibility, 3 for degeneracy,
    /// 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NoFeasibleSolution | Error::NoModelFound => 2,
            Error::RankDegenerate { .. }
            | Error::PivotSingular
            | Error::TemplateSingular
            | Error::EigenFailure
            | Error::SingularCalibration => 3,
            _ => 1,
        }
    }

    /// Stable machine-readable identifier for result files.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DegenerateDistortion => "degenerate_distortion",
            Error::BehindCamera => "behind_camera",
            Error::NoConvergence => "no_convergence",
            Error::RankDegenerate { .. } => "rank_degenerate",
            Error::PivotSingular => "pivot_singular",
            Error::EigenFailure => "eigen_failure",
            Error::SingularCalibration => "singular_calibration",
            Error::TemplateSingular => "template_singular",
            Error::NoFeasibleSolution => "no_feasible_solution",
            Error::NoModelFound => "no_model_found",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::Io(_) => "io",
            Error::Parse(_) => "parse",
        }
    }
}
