//! Stochastic homogenization toolkit: random geometries on periodic windows,
//! corrector problems, permeability, two-scale reaction limits and ergodic
//! averaging checks.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar for callers that do not care.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod cellproblem;
pub mod ergodic;
pub mod error;
pub mod fields;
pub mod geometry;
pub(crate) mod linalg;
pub mod reaction;
pub mod scalar;
pub mod stokes;
pub mod tensor;

pub use cellproblem::{homogenize, HomogenizedTensor, SolverConfig};
pub use error::{Error, Result};
pub use ergodic::{ConvergenceTable, Observable, Sweep};
pub use fields::{CoefficientField, TorusGrid};
pub use geometry::{GeometryRecipe, PhaseField, PointSet, Window};
pub use reaction::{MacroState, ReactionParams};
pub use scalar::Real;
pub use stokes::{permeability, PermeabilityTensor, StokesConfig};
pub use tensor::SmallMatrix;

pub type Window64 = Window<f64>;
pub type Window32 = Window<f32>;
pub type PointSet64 = PointSet<f64>;
pub type PointSet32 = PointSet<f32>;
pub type PhaseField64 = PhaseField<f64>;
pub type PhaseField32 = PhaseField<f32>;
pub type TorusGrid64 = TorusGrid<f64>;
pub type TorusGrid32 = TorusGrid<f32>;
pub type CoefficientField64 = CoefficientField<f64>;
pub type CoefficientField32 = CoefficientField<f32>;
pub type Tensor64 = SmallMatrix<f64>;
pub type Tensor32 = SmallMatrix<f32>;
pub type HomogenizedTensor64 = HomogenizedTensor<f64>;
pub type HomogenizedTensor32 = HomogenizedTensor<f32>;
pub type PermeabilityTensor64 = PermeabilityTensor<f64>;
pub type PermeabilityTensor32 = PermeabilityTensor<f32>;
pub type MacroState64 = MacroState<f64>;
pub type MacroState32 = MacroState<f32>;
pub type ConvergenceTable64 = ConvergenceTable<f64>;
pub type ConvergenceTable32 = ConvergenceTable<f32>;
