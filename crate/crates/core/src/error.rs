use thiserror::Error;

/// Errors raised by grid construction, operators, transforms and solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid needs at least 3 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("grid bounds must satisfy lo < hi (lo = {lo}, hi = {hi})")]
    InvalidBounds { lo: f64, hi: f64 },
    #[error("grid nodes must be strictly increasing and finite (violated at index {0})")]
    NonMonotoneGrid(usize),
    #[error("cluster center {center} must lie strictly inside ({lo}, {hi})")]
    CenterOutsideDomain { center: f64, lo: f64, hi: f64 },
    #[error("cluster density must be positive and finite, got {0}")]
    InvalidDensity(f64),
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("scale entry {index} is {value}; scales must be finite and non-negative")]
    InvalidScale { index: usize, value: f64 },
    #[error("dense matrix path limited to {limit} nodes, operator has {size}")]
    TooLarge { size: usize, limit: usize },
    #[error("singular tridiagonal system at row {0}")]
    SingularSystem(usize),

    #[error("surface parse error at row {row}, column {column}: {message}")]
    SurfaceParse {
        row: usize,
        column: usize,
        message: String,
    },
    #[error("surface knots must be strictly increasing ({axis} axis, index {index})")]
    SurfaceKnots { axis: &'static str, index: usize },
    #[error("surface value at row {row}, column {column} is {value}; values must be positive and finite")]
    SurfaceValue { row: usize, column: usize, value: f64 },
    #[error("i/o error: {0}")]
    Io(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("point x = {x} lies outside the model domain (x > {lower})")]
    OutsideDomain { x: f64, lower: f64 },
    #[error("time level {level} out of range (solution has {levels} levels)")]
    LevelOutOfRange { level: usize, levels: usize },

    #[error("deltas are not strictly increasing at node {0}; the delta map would be multivalued")]
    NonMonotoneDelta(usize),
    #[error("delta map is degenerate: only {0} nodes have deltas inside the admissible band")]
    DegenerateMap(usize),
    #[error("quadrature did not converge (exclusion zone |x| < {excluded})")]
    QuadratureFailed { excluded: f64 },
    #[error("polynomial fit needs at least {needed} nodes, got {actual}")]
    FitTooSmall { needed: usize, actual: usize },
    #[error("second derivative {value} is below the admissible floor {floor}")]
    CurvatureBelowFloor { value: f64, floor: f64 },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
