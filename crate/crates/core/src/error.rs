use std::path::PathBuf;

/// Errors raised by the solvers and the scenario layer.
///
/// Variants are split in two families: configuration problems (bad input,
/// inconsistent grids, unreadable files) and numerical failures detected
/// while a simulation runs. [`Error::is_numerical`] tells them apart; the
/// command-line front end maps the two families to different exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("window [{start}, {end}) lies outside the spatial grid")]
    WindowOutsideGrid { start: f64, end: f64 },

    #[error("wave packet overlaps the grid edge (edge density ratio {ratio:.3e})")]
    EdgeOverlap { ratio: f64 },

    #[error("unresolved packet: sigma = {sigma} is below 4 dx = {min}")]
    UnresolvedPacket { sigma: f64, min: f64 },

    #[error("potential is flagged sharp; the classical flow needs a smooth potential")]
    SharpPotential,

    #[error("duplicate fermion momenta at positions {0} and {1}")]
    DuplicateMomenta(usize, usize),

    #[error("index ({row}, {col}) out of range for a {n}x{n} carrier matrix")]
    IndexOutOfRange { row: usize, col: usize, n: usize },

    #[error("envelope amplitude is not symmetric under coordinate exchange of derivatives")]
    NonSymmetricAmplitude,

    #[error("dynamics is not separable across axes: {0}")]
    NonSeparable(String),

    #[error("stencil point p = {p} is outside the sampled range")]
    StencilOutOfRange { p: f64 },

    #[error("scale separation not satisfied: {0}")]
    ScaleCheckFailed(String),

    #[error("negative occupation {value:e} at state {index}")]
    NegativeOccupation { index: usize, value: f64 },

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    // numerical failures
    #[error("time step too large: dt * E_max / hbar = {ratio:.3} (must stay below 0.5)")]
    StepTooLarge { ratio: f64 },

    #[error("norm drift {drift:.3e} exceeds 1e-8")]
    NormDrift { drift: f64 },

    #[error("wave function reached the grid edge (edge probability {mass:.3e})")]
    EdgeContact { mass: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("negative density {value:e} at cell {index}")]
    NegativeDensity { index: usize, value: f64 },

    #[error("characteristics leave the grid while boundary cells carry mass {mass:.3e}")]
    Outflow { mass: f64 },
}

impl Error {
    /// True for failures detected while integrating (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StepTooLarge { .. }
                | Error::NormDrift { .. }
                | Error::EdgeContact { .. }
                | Error::NonFinite(_)
                | Error::NegativeDensity { .. }
                | Error::Outflow { .. }
        )
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
