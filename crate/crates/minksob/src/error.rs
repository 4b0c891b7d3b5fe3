use thiserror::Error;

/// Errors surfaced by the geometry, solver and verification layers.
///
/// Variants that indicate a violated theorem hypothesis (rather than bad
/// input or a numerical failure) are marked: the CLI maps those to a
/// distinct exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("simplex {simplex} is not spacelike (Gram min eigenvalue {min_eig:.3e} below threshold {threshold:.3e})")]
    NonSpacelikeSimplex {
        simplex: usize,
        min_eig: f64,
        threshold: f64,
    },

    #[error("surface is not spacelike: {0}")]
    NotSpacelike(String),

    #[error("mesh is not a manifold with boundary: face {0:?} is shared by more than two simplices")]
    NonManifold(Vec<usize>),

    #[error("vertex {0} has a degenerate star; tangent plane estimate is rank-deficient")]
    DegenerateVertexStar(usize),

    #[error("vertex {vertex} has {got} usable neighbors but the quadratic fit needs {needed}")]
    InsufficientNeighbors {
        vertex: usize,
        got: usize,
        needed: usize,
    },

    /// Hypothesis violation: a variant was asked for on a submanifold of the
    /// wrong codimension.
    #[error("wrong codimension: expected intrinsic dimension {expected}, got {got}")]
    WrongCodimension { expected: usize, got: usize },

    /// Hypothesis violation: the mean-convex variant was invoked on a
    /// surface whose mean curvature is not everywhere zero or timelike
    /// past-pointing.
    #[error("mean convexity violated at vertex {vertex}: H = {h:?}")]
    MeanConvexityViolated { vertex: usize, h: Vec<f64> },

    /// Hypothesis violation: the Neumann problem needs a nonempty boundary.
    #[error("surface has empty boundary; the flux normalization is undefined")]
    EmptyBoundary,

    #[error("density is not positive: min value {0:.3e}")]
    NonpositiveDensity(f64),

    #[error("degenerate density: boundary and source integrals vanish")]
    DegenerateDensity,

    #[error("conjugate gradient did not converge: residual {residual:.3e} after {iterations} iterations (target {target:.3e})")]
    SolverDiverged {
        residual: f64,
        iterations: usize,
        target: f64,
    },

    #[error("discrete system is incompatible: defect {defect:.3e} exceeds tolerance {tolerance:.3e}")]
    IncompatibleSystem { defect: f64, tolerance: f64 },

    #[error("point (vertex {vertex}) lies outside B_r: {reason}")]
    NotInBr { vertex: usize, reason: String },

    #[error("minimizer of the transport functional sits on the boundary (vertex {0})")]
    BoundaryMinimizer(usize),

    #[error("reconstructed witness at vertex {vertex} is outside B_r: {reason}")]
    WitnessOutsideBr { vertex: usize, reason: String },

    #[error("volume estimate requested with zero samples")]
    ZeroSamples,

    #[error("maximal slope must be >= 1, got {0}")]
    SlopeBelowOne(f64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    /// True for errors that mean a theorem hypothesis failed on otherwise
    /// well-formed input.
    pub fn is_hypothesis_violation(&self) -> bool {
        matches!(
            self,
            Error::WrongCodimension { .. }
                | Error::MeanConvexityViolated { .. }
                | Error::EmptyBoundary
                | Error::NotSpacelike(_)
                | Error::NonSpacelikeSimplex { .. }
        )
    }
}
