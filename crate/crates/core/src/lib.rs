//! Stabilized cut discontinuous Galerkin discretization of stationary
//! advection-reaction problems on closed surfaces given as level sets.
//!
//! The surface is reconstructed as a piecewise planar interface on a
//! Cartesian background mesh. Discontinuous `Q^k` functions live on the cut
//! cells, the transport is discretized with an upwind flux across the
//! surface edges and ghost penalties on cell faces and in the normal
//! direction make the system robust with respect to the cut position.
//!
//! Everything is generic over the scalar type (`f32` or `f64`); the aliases
//! at the crate root fix it to `f64`.

pub mod analysis;
pub mod assembly;
pub mod basis;
pub mod discretization;
pub mod error;
pub mod geometry;
pub mod levelset;
pub mod mesh;
pub mod quadrature;
pub mod scalar;
pub mod solver;
pub mod space;
pub mod sparse;
pub mod spectrum;
pub mod vec3;

pub use analysis::{diagnostics, eoc, error_norms, DiagnosticsReport, ErrorReport, ManufacturedProblem};
pub use assembly::{
    assemble, compute_scalings, discrete_coefficients, AssembledSystem, PenaltyParameters, ProblemData,
    ScalingConstants,
};
pub use discretization::Discretization;
pub use error::{Error, Result};
pub use geometry::{GeometryOptions, SurfaceGeometry};
pub use levelset::LevelSet;
pub use mesh::{refine_counts, ActiveMesh, BackgroundMesh};
pub use scalar::Real;
pub use solver::{solve, solve_bicgstab, solve_direct, SolveReport, SolverMethod, SolverOptions};
pub use space::{DgSpace, FieldVector};
pub use sparse::SparseMatrix;
pub use spectrum::{estimate_condition, SpectrumOptions, SpectrumReport};
pub use vec3::Vec3;

pub type Point = Vec3<f64>;
pub type Mesh = BackgroundMesh<f64>;
pub type Surface = LevelSet<f64>;
pub type Geometry = SurfaceGeometry<f64>;
pub type Space = DgSpace<f64>;
pub type Field = FieldVector<f64>;
pub type Problem = ProblemData<f64>;
pub type Penalties = PenaltyParameters<f64>;
pub type Scalings = ScalingConstants<f64>;
pub type System = AssembledSystem<f64>;
pub type Matrix = SparseMatrix<f64>;
pub type Manufactured = ManufacturedProblem<f64>;
