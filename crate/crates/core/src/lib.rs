//! Meshfree integration on surface point clouds.
//!
//! Estimates integrals of functions over piecewise-smooth surfaces (and flat
//! domains) given only scattered points, normals, and optional curvature.
//! Interpolation is norm-minimizing Hermite-Birkhoff collocation in a
//! weighted truncated Fourier space on a bounding box; integration is either
//! a Poisson-solvability ratio (method 1) or divergence-theorem dimension
//! reduction down to boundary quadrature (method 2), with an augmented
//! trial space for singular integrands.

pub mod fourier;
pub mod geometry;
pub mod harness;
pub mod integrators;
pub mod linsolve;
pub mod operators;

pub use fourier::{BoxDomain, ConstraintSystem, FourierBasis, WeightMode};
pub use geometry::{BoundaryQuadrature, LevelSetSurface, PointCloud, SurfacePoint};
pub use linsolve::MinNormSolution;
pub use operators::{Functional, SingularAugmentation};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
pub type Complex = num_complex::Complex64;

/// Execution strategy for row-parallel assembly. `Parallel` uses the rayon
/// pool when the `parallel` feature is enabled and silently degrades to
/// sequential execution otherwise, so callers need no cfg of their own.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    Parallel,
}

impl Parallelism {
    pub fn auto() -> Self {
        if cfg!(feature = "parallel") {
            Parallelism::Parallel
        } else {
            Parallelism::Sequential
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("projection did not converge: residual {residual:.3e} at {last:?}")]
    ProjectionFailed { last: Vec3, residual: f64 },
    #[error("level-set gradient vanishes at {0:?}")]
    DegeneratePoint(Vec3),
    #[error("sampling failed: {0}")]
    Sampling(String),
    #[error("Voronoi cell {0} has no interior points")]
    DegenerateCell(usize),
    #[error("curve component with fewer than 3 points")]
    ComponentTooSmall,
    #[error("curvature required but missing on surface point")]
    MissingCurvature,
    #[error("functional anchored at the singular point")]
    SingularAnchor,
    #[error("direction vector must be nonzero")]
    ZeroDirection,
    #[error("collocation anchor {0:?} lies outside the basis box")]
    AnchorOutsideBox(Vec3),
    #[error("non-finite entries in constraint system")]
    NonFinite,
    #[error("constraint system has no rows")]
    EmptySystem,
    #[error("kernel matrix is numerically indefinite; consider the V-path")]
    IllConditioned,
    #[error("subdomain {id}: {source}")]
    Subdomain { id: usize, source: Box<Error> },
    #[error("circle nodes are not uniformly spaced")]
    NonuniformSpacing,
    #[error("curve endpoints must be members of the node set")]
    EndpointMissing,
    #[error("linear algebra backend error: {0}")]
    Linalg(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
