use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain radius must be positive and finite, got {0}")]
    InvalidDomain(f64),

    #[error("radius must be positive and finite, got {0}")]
    NonPositiveRadius(f64),

    #[error("inclusions {0} and {1} overlap (center distance {2:.6e} <= radius sum {3:.6e})")]
    OverlappingInclusions(usize, usize, f64, f64),

    #[error("inclusion {index} is not strictly inside the domain (|center| + radius = {reach:.6e}, R = {domain_radius:.6e})")]
    InclusionOutsideDomain {
        index: usize,
        reach: f64,
        domain_radius: f64,
    },

    #[error("radius list has {got} entries but the lattice has {expected} sites")]
    RadiusListLengthMismatch { expected: usize, got: usize },

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("point {0:?} lies outside the domain")]
    PointOutsideDomain([f64; 3]),

    #[error("kernel evaluated at coincident points {0:?}")]
    CoincidentPoints([f64; 3]),

    #[error("capacitary potential evaluated at the sphere center")]
    EvaluationAtCenter,

    #[error("point {point:?} lies inside inclusion {index}")]
    PointInsideInclusion { index: usize, point: [f64; 3] },

    #[error("interaction matrix is singular (pivot ratio {0:.3e})")]
    SingularSystem(f64),

    #[error("linear solve residual {0:.3e} exceeds the acceptance threshold")]
    ResidualTooLarge(f64),

    #[error("quadrature did not converge: relative error {achieved:.3e} > target {target:.3e}")]
    QuadratureNotConverged { achieved: f64, target: f64 },

    #[error("invalid quadrature specification: {0}")]
    InvalidQuadrature(String),

    #[error("root not bracketed: {0}")]
    RootNotBracketed(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("geometry is not an identical-sphere lattice: {0}")]
    GeometryNotLattice(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
