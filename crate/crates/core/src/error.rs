use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate bounding box along axis {axis}")]
    DegenerateBox { axis: usize },
    #[error("subdivision count must be at least 1 (got {counts:?})")]
    ZeroSubdivision { counts: [usize; 3] },
    #[error("anisotropic cells (h = {h:?}) are not allowed for this mesh")]
    AnisotropicCells { h: [f64; 3] },
    #[error("mesh shift parameter {0} outside [0, 1)")]
    ShiftOutOfRange(f64),
    #[error("the discrete surface does not intersect the background mesh")]
    EmptyActiveMesh,
    #[error("level set evaluation is singular at {point:?}")]
    SingularLevelSet { point: [f64; 3] },
    #[error("point {point:?} lies outside the reach of the surface")]
    OutsideReach { point: [f64; 3] },
    #[error("closest point iteration did not converge from {point:?}")]
    ClosestPointNotConverged { point: [f64; 3] },
    #[error("unmatched surface segment on interior face {face} of cell {cell}")]
    UnmatchedSegment { cell: usize, face: usize },
    #[error("quadrature of degree {0} is not supported")]
    UnsupportedDegree(usize),
    #[error("cell {0} is not part of the active mesh")]
    InactiveCell(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value produced during {0}")]
    NonFinite(&'static str),
    #[error("matrix is singular or numerically singular")]
    SingularMatrix,
    #[error("matrix dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("eigenvalue iteration did not converge: {0}")]
    NotConverged(String),
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
