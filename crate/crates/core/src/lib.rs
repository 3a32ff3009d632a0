//! Sobolev-type metrics `G^P` with `P = 1 + AΔ^p` on immersed surfaces in ℝ³.
//!
//! Surfaces are sampled on a rectangular parameter grid. The crate builds the induced
//! geometry, assembles and inverts `P`, integrates geodesics in momentum form and
//! evaluates conserved quantities along them.

pub mod analytic;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod geodesics;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod operator;
pub mod quadrature;
pub mod sparse;

pub use diagnostics::DiagnosticsRecord;
pub use error::{Error, Result};
pub use field::{ScalarField, TangentField, VectorField};
pub use geodesics::{
    Frame, GeodesicState, Integrator, MomentumDensity, SolverConfig, Trajectory, VectorMomentumState,
};
pub use geometry::{GeometryCache, Immersion, NodeGeometry};
pub use grid::{Boundary, ParamGrid, SeamShift};
pub use io::{Experiment, RunConfig};
pub use nalgebra::{Matrix2, Vector2, Vector3};
pub use operator::{AssembledOperator, LinearSolverOptions, OperatorParams};
