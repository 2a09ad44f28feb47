//! Partitioned space-time integration.
//!
//! The time interval is split into slabs whose boundaries are knots of the
//! global time vector. Raising their multiplicity to `p + 1` decouples the
//! slabs; here each slab simply gets its own open time vector, which spans
//! the same function space. Slabs are solved in order and the terminal
//! layer of one slab is copied into the initial layer of the next.

use std::fmt;

use crate::assembly::{
    apply_constraints, assemble_galerkin, error_integrals, max_velocity_norm, norms_from_integrals, Constraints,
    ErrorNorms,
};
use crate::error::{invalid, Error, Result};
use crate::linear::LinearSolver;
use crate::nonlinear::{solve_nonlinear, IterationRecord, NonlinearConfig, StabilizedProblem};
use crate::problem::ProblemData;
use crate::scalar::Real;
use crate::splines::KnotVector;
use crate::stabilization::{dmp_audit, DmpReport, StabilizationParams, Stabilizer};
use crate::tensor::{NodeKind, TensorSpace};

/// Sequence of slab spaces covering the time interval of a parent space.
#[derive(Debug, Clone)]
pub struct SlabChain<T> {
    boundaries: Vec<T>,
    spaces: Vec<TensorSpace<T>>,
}

/// Splits the time direction of `space` into `n_slabs` slabs with equal
/// numbers of spans, each a multiple of the degree.
pub fn build_chain<T: Real>(space: &TensorSpace<T>, n_slabs: usize) -> Result<SlabChain<T>> {
    SlabChain::uniform(space, n_slabs)
}

impl<T: Real> SlabChain<T> {
    pub fn uniform(space: &TensorSpace<T>, n_slabs: usize) -> Result<Self> {
        let tv = space
            .time_direction()
            .ok_or_else(|| invalid("time slabs need a transient space"))?;
        let m = tv.spans();
        let p = space.degree();
        if n_slabs == 0 || m % n_slabs != 0 || (m / n_slabs) % p != 0 {
            return Err(invalid(format!(
                "{m} time spans cannot be split into {n_slabs} slabs of a multiple of {p} spans"
            )));
        }
        let per = m / n_slabs;
        let distinct = distinct_knots(tv);
        let boundaries: Vec<T> = (0..=n_slabs).map(|l| distinct[l * per]).collect();
        Self::from_boundaries(space, &boundaries)
    }

    /// Slabs between consecutive `boundaries`, which must be knots of the
    /// time vector including both ends, with a multiple of `p` spans in
    /// between.
    pub fn from_boundaries(space: &TensorSpace<T>, boundaries: &[T]) -> Result<Self> {
        let tv = space
            .time_direction()
            .ok_or_else(|| invalid("time slabs need a transient space"))?;
        let p = space.degree();
        let distinct = distinct_knots(tv);
        if boundaries.len() < 2 {
            return Err(invalid("at least two slab boundaries are required"));
        }
        let scale = tv.length().abs();
        let tol = T::lit(1e3) * T::epsilon() * scale;
        let mut positions = Vec::with_capacity(boundaries.len());
        for &b in boundaries {
            let k = distinct
                .iter()
                .position(|&x| (x - b).abs() <= tol)
                .ok_or_else(|| invalid(format!("slab boundary {b} is not a time knot")))?;
            positions.push(k);
        }
        if positions[0] != 0 || *positions.last().unwrap() != distinct.len() - 1 {
            return Err(invalid("slab boundaries must start and end at the time interval ends"));
        }
        let time_axis = space.time_axis().unwrap();
        let mut spaces = Vec::with_capacity(boundaries.len() - 1);
        for w in positions.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a || (b - a) % p != 0 {
                return Err(invalid(format!(
                    "slab with {} spans is not a positive multiple of the degree {p}",
                    b as isize - a as isize
                )));
            }
            let mut knots = vec![distinct[a]; p + 1];
            knots.extend_from_slice(&distinct[a + 1..b]);
            knots.extend(std::iter::repeat(distinct[b]).take(p + 1));
            let slab_tv = KnotVector::from_knots(knots, p)?;
            let mut dirs = space.directions().to_vec();
            dirs[time_axis] = slab_tv;
            spaces.push(TensorSpace::new(dirs, true)?);
        }
        Ok(Self {
            boundaries: positions.iter().map(|&k| distinct[k]).collect(),
            spaces,
        })
    }

    pub fn len(&self) -> usize {
        self.spaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spaces.is_empty()
    }

    pub fn boundaries(&self) -> &[T] {
        &self.boundaries
    }

    pub fn spaces(&self) -> &[TensorSpace<T>] {
        &self.spaces
    }
}

fn distinct_knots<T: Real>(kv: &KnotVector<T>) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for &k in kv.knots() {
        if out.last() != Some(&k) {
            out.push(k);
        }
    }
    out
}

/// How each slab (or a steady problem) is solved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolveMode<T> {
    /// Unstabilized Galerkin, one linear solve.
    Galerkin,
    Stabilized {
        params: StabilizationParams<T>,
        config: NonlinearConfig<T>,
    },
}

#[derive(Debug, Clone)]
pub struct SlabSolution<T> {
    pub space: TensorSpace<T>,
    pub coeffs: Vec<T>,
    pub constraints: Constraints<T>,
    pub iterations: usize,
    pub history: Vec<IterationRecord>,
    /// Relative fixed-point residual (zero for Galerkin solves).
    pub residual: T,
    /// Audit with the stabilized operator, for stabilized solves.
    pub dmp: Option<DmpReport<T>>,
}

/// Solutions of all slabs in time order.
#[derive(Debug, Clone, Default)]
pub struct Trajectory<T> {
    pub slabs: Vec<SlabSolution<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn total_iterations(&self) -> usize {
        self.slabs.iter().map(|s| s.iterations).sum()
    }

    /// Range of all control values, transferred layers included.
    pub fn value_range(&self) -> Option<(T, T)> {
        self.slabs.iter().flat_map(|s| s.coeffs.iter()).fold(None, |acc, &v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
    }

    /// Range of the boundary data over all slabs and of the initial data of
    /// the first slab.
    pub fn data_range(&self) -> Option<(T, T)> {
        let mut acc: Option<(T, T)> = None;
        for (l, s) in self.slabs.iter().enumerate() {
            for (k, kind) in s.constraints.kinds.iter().enumerate() {
                let counts = match kind {
                    NodeKind::Dirichlet => true,
                    NodeKind::Initial => l == 0,
                    NodeKind::Free => false,
                };
                if counts {
                    let v = s.constraints.values[k];
                    acc = Some(acc.map_or((v, v), |(lo, hi)| (lo.min(v), hi.max(v))));
                }
            }
        }
        acc
    }

    /// Amount by which any control value leaves the data range.
    pub fn global_dmp_violation(&self) -> T {
        match (self.value_range(), self.data_range()) {
            (Some((lo, hi)), Some((dlo, dhi))) => T::zero().max(dlo - lo).max(hi - dhi),
            _ => T::zero(),
        }
    }

    /// Error norms over the union of the slabs.
    pub fn error_norms(&self, exact: &dyn Fn(&[T]) -> T, exact_gradient: &dyn Fn(&[T], &mut [T])) -> ErrorNorms<T> {
        let mut acc = [T::zero(); 4];
        for s in &self.slabs {
            let a = error_integrals(&s.space, &s.coeffs, exact, exact_gradient, s.space.degree() + 3);
            for k in 0..4 {
                acc[k] += a[k];
            }
        }
        norms_from_integrals(acc)
    }

    /// Slab whose time interval contains the last coordinate of `point`.
    pub fn slab_at(&self, point: &[T]) -> Option<&SlabSolution<T>> {
        let first = self.slabs.first()?;
        let Some(axis) = first.space.time_axis() else {
            return Some(first);
        };
        let t = point[axis];
        self.slabs
            .iter()
            .find(|s| t <= s.space.direction(axis).end())
            .or(self.slabs.last())
    }

    pub fn evaluate(&self, point: &[T]) -> Option<T> {
        self.slab_at(point).map(|s| s.space.evaluate(&s.coeffs, point))
    }

    /// Control values of the last time layer of the last slab.
    pub fn final_layer(&self) -> Option<Vec<T>> {
        let s = self.slabs.last()?;
        Some(terminal_layer(&s.space, &s.coeffs))
    }
}

fn terminal_layer<T: Real>(space: &TensorSpace<T>, coeffs: &[T]) -> Vec<T> {
    match space.time_axis() {
        Some(a) => {
            let per_layer = space.strides()[a];
            let nt = space.shape()[a];
            coeffs[(nt - 1) * per_layer..].to_vec()
        }
        None => coeffs.to_vec(),
    }
}

/// Failure of one slab; carries the slabs solved before it.
#[derive(Debug, Clone)]
pub struct ChainError<T> {
    pub slab: usize,
    pub error: Error,
    pub partial: Trajectory<T>,
}

impl<T> fmt::Display for ChainError<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "slab {} failed: {}", self.slab, self.error)
    }
}

impl<T: fmt::Debug> std::error::Error for ChainError<T> {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Solves one space with the given constraints.
pub fn solve_space<T: Real>(
    space: &TensorSpace<T>,
    problem: &ProblemData<T>,
    constraints: Constraints<T>,
    mode: &SolveMode<T>,
) -> Result<SlabSolution<T>> {
    let sys = assemble_galerkin(space, problem)?;
    match mode {
        SolveMode::Galerkin => {
            let red = apply_constraints(&sys, &constraints)?;
            let coeffs = red.solve(&mut LinearSolver::new())?;
            Ok(SlabSolution {
                space: space.clone(),
                coeffs,
                constraints,
                iterations: 1,
                history: Vec::new(),
                residual: T::zero(),
                dmp: None,
            })
        }
        SolveMode::Stabilized { params, config } => {
            let beta = max_velocity_norm(space, problem);
            let scaled = params.scaled(space, beta)?;
            let stab = Stabilizer::new(space, &sys.matrix, scaled)?;
            let nl = StabilizedProblem {
                stabilizer: &stab,
                load: &sys.load,
                constraints: &constraints,
            };
            let sol = solve_nonlinear(&nl, space, config, None)?;
            let mask: Vec<bool> = constraints.kinds.iter().map(|k| k.is_constrained()).collect();
            let dmp = dmp_audit(space, &sol.u, &mask, &constraints.values, Some(&sol.operator))?;
            Ok(SlabSolution {
                space: space.clone(),
                coeffs: sol.u,
                constraints,
                iterations: sol.iterations,
                history: sol.history,
                residual: sol.residual,
                dmp: Some(dmp),
            })
        }
    }
}

/// Solves a steady problem, or a transient one without partitioning.
pub fn solve_monolithic<T: Real>(
    space: &TensorSpace<T>,
    problem: &ProblemData<T>,
    mode: &SolveMode<T>,
) -> Result<SlabSolution<T>> {
    let constraints = Constraints::from_problem(space, problem)?;
    solve_space(space, problem, constraints, mode)
}

/// Solves the slabs in order, feeding each terminal layer forward.
pub fn solve_chain<T: Real>(
    chain: &SlabChain<T>,
    problem: &ProblemData<T>,
    mode: &SolveMode<T>,
) -> std::result::Result<Trajectory<T>, ChainError<T>> {
    let mut traj = Trajectory { slabs: Vec::new() };
    for (l, space) in chain.spaces().iter().enumerate() {
        let result = Constraints::from_problem(space, problem).and_then(|mut c| {
            if let Some(prev) = traj.slabs.last() {
                let layer = terminal_layer(&prev.space, &prev.coeffs);
                if layer.len() != space.strides()[space.time_axis().unwrap()] {
                    return Err(invalid("slab layers do not match"));
                }
                for (k, v) in layer.into_iter().enumerate() {
                    debug_assert_eq!(c.kinds[k], NodeKind::Initial);
                    c.values[k] = v;
                }
            }
            solve_space(space, problem, c, mode)
        });
        match result {
            Ok(s) => traj.slabs.push(s),
            Err(error) => {
                return Err(ChainError {
                    slab: l,
                    error,
                    partial: traj,
                })
            }
        }
    }
    Ok(traj)
}
