//! Model problem data: convection field, diffusion, source and boundary data.
//!
//! All callables receive the full coordinate of a point, spatial components
//! first and, for transient problems, time last.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::scalar::Real;

pub type ScalarField<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;
/// Vector-valued field writing its components into the output slice.
pub type VectorField<T> = Arc<dyn Fn(&[T], &mut [T]) + Send + Sync>;

/// Transient or steady convection-diffusion problem on a box domain.
#[derive(Clone)]
pub struct ProblemData<T> {
    pub spatial_dim: usize,
    pub transient: bool,
    /// Divergence-free convection field, `spatial_dim` components.
    pub velocity: VectorField<T>,
    pub diffusion: T,
    pub source: ScalarField<T>,
    pub dirichlet: ScalarField<T>,
    pub initial: ScalarField<T>,
    pub exact: Option<ScalarField<T>>,
    /// Gradient of the exact solution over all directions, time included.
    pub exact_gradient: Option<VectorField<T>>,
}

impl<T: Real> ProblemData<T> {
    /// Pure transport problem with zero data, to be completed with the
    /// builder methods.
    pub fn new(spatial_dim: usize, transient: bool) -> Self {
        let zero: ScalarField<T> = Arc::new(|_: &[T]| T::zero());
        Self {
            spatial_dim,
            transient,
            velocity: Arc::new(|_: &[T], out: &mut [T]| out.fill(T::zero())),
            diffusion: T::zero(),
            source: zero.clone(),
            dirichlet: zero.clone(),
            initial: zero,
            exact: None,
            exact_gradient: None,
        }
    }

    pub fn with_constant_velocity(mut self, beta: &[T]) -> Self {
        let beta = beta.to_vec();
        self.velocity = Arc::new(move |_: &[T], out: &mut [T]| out.copy_from_slice(&beta));
        self
    }

    pub fn with_velocity(mut self, f: impl Fn(&[T], &mut [T]) + Send + Sync + 'static) -> Self {
        self.velocity = Arc::new(f);
        self
    }

    pub fn with_diffusion(mut self, mu: T) -> Self {
        self.diffusion = mu;
        self
    }

    pub fn with_source(mut self, f: impl Fn(&[T]) -> T + Send + Sync + 'static) -> Self {
        self.source = Arc::new(f);
        self
    }

    pub fn with_dirichlet(mut self, f: impl Fn(&[T]) -> T + Send + Sync + 'static) -> Self {
        self.dirichlet = Arc::new(f);
        self
    }

    pub fn with_initial(mut self, f: impl Fn(&[T]) -> T + Send + Sync + 'static) -> Self {
        self.initial = Arc::new(f);
        self
    }

    pub fn with_exact(
        mut self,
        u: impl Fn(&[T]) -> T + Send + Sync + 'static,
        grad: impl Fn(&[T], &mut [T]) + Send + Sync + 'static,
    ) -> Self {
        self.exact = Some(Arc::new(u));
        self.exact_gradient = Some(Arc::new(grad));
        self
    }

    /// Number of coordinate directions, time included.
    pub fn num_directions(&self) -> usize {
        self.spatial_dim + usize::from(self.transient)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.spatial_dim) {
            return Err(invalid(format!(
                "spatial dimension {} not supported",
                self.spatial_dim
            )));
        }
        if !(self.diffusion >= T::zero()) {
            return Err(invalid("diffusion must be nonnegative"));
        }
        Ok(())
    }

    pub fn velocity_at(&self, point: &[T]) -> Vec<T> {
        let mut beta = vec![T::zero(); self.spatial_dim];
        (self.velocity)(point, &mut beta);
        beta
    }
}

impl<T: fmt::Debug> fmt::Debug for ProblemData<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemData")
            .field("spatial_dim", &self.spatial_dim)
            .field("transient", &self.transient)
            .field("diffusion", &self.diffusion)
            .field("has_exact", &self.exact.is_some())
            .finish_non_exhaustive()
    }
}
