//! Space-time B-spline discretizations of transport and convection-diffusion
//! problems with a nonlinear stabilization that enforces the discrete
//! maximum principle.
//!
//! The numerical core is generic over the scalar type ([`Real`], implemented
//! for `f32` and `f64`); the aliases at the crate root fix it to `f64`.

pub mod assembly;
pub mod error;
pub mod linear;
pub mod nonlinear;
pub mod problem;
pub mod quadrature;
pub mod scalar;
pub mod sparse;
pub mod stabilization;
pub mod splines;
pub mod tensor;
pub mod timeslabs;

pub use error::{Error, Result};
pub use scalar::Real;

pub type KnotVector64 = splines::KnotVector<f64>;
pub type TensorSpace64 = tensor::TensorSpace<f64>;
pub type ProblemData64 = problem::ProblemData<f64>;
pub type CsrMatrix64 = sparse::CsrMatrix<f64>;
pub type SlabChain64 = timeslabs::SlabChain<f64>;
pub type Trajectory64 = timeslabs::Trajectory<f64>;
