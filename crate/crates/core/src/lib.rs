//! γ-flows of convex hypersurfaces: admissible speeds and their calculus,
//! property certification, exact model solutions, explicit solvers, ancient
//! solution diagnostics and a scenario runner.
//!
//! Everything numeric is generic over [`scalar::Scalar`] (f32 or f64); the
//! aliases below fix f64.

// `!(x > 0)` guards are deliberate: they reject NaN along with nonpositives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ancient_analysis;
pub mod certification;
pub mod error;
pub mod flow_solver;
pub mod linalg;
pub mod model_solutions;
pub mod runner;
pub mod scalar;
pub mod speed_calculus;

pub use error::{FlowError, Result};

pub type SpeedFunction = speed_calculus::Speed<f64>;
pub type ConeSpec = speed_calculus::ConeSpec<f64>;
pub type SupportProfile = flow_solver::SupportProfile<f64>;
pub type GraphPatch = flow_solver::GraphPatch<f64>;
pub type Trajectory = flow_solver::Trajectory<f64>;
pub type Snapshot = flow_solver::Snapshot<f64>;
pub type ShrinkingCylinder = model_solutions::ShrinkingCylinder<f64>;
pub type TranslatingParaboloid = model_solutions::TranslatingParaboloid<f64>;
pub type SymMatrix = linalg::SymMatrix<f64>;
