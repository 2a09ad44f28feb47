//! Fixed-point solvers for the stabilized system `(K + B(u)) u = F`.
//!
//! Relaxed Picard freezes `B` at the current iterate and solves the linear
//! constrained system. The hybrid method runs Picard until the relative
//! update drops below a switch tolerance and continues with Newton steps on
//! `R(u) = (K + B(u)) u - F`, whose Jacobian is approximated column-wise by
//! finite differences on a colored stencil pattern.
//!
//! Iteration stops once the relative update is below the tolerance and the
//! relative fixed-point residual below ten times the tolerance.

use std::fmt;
use std::io::Write;

use crate::assembly::{ConstrainedSystem, Constraints, SystemMatrix};
use crate::error::{invalid, Error, Result};
use crate::linear::LinearSolver;
use crate::scalar::Real;
use crate::sparse::{CsrMatrix, Submatrix};
use crate::stabilization::{StabilizationState, Stabilizer};
use crate::tensor::TensorSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonlinearMethod {
    Picard,
    Hybrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianKind {
    /// Columns of `dR/du` by finite differences.
    FiniteDifference,
    /// `K + B(u)` with `B` frozen; Newton then reduces to unrelaxed Picard.
    PicardOperator,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearConfig<T> {
    /// Relative update `|u^{k+1} - u^k| / |u^k|` at which iteration stops.
    pub tol: T,
    pub max_iters: usize,
    /// Initial Picard relaxation in `(0, 1]`.
    pub relaxation: T,
    /// Lower bound for the relaxation, which is halved whenever the residual
    /// of a Picard step fails to decrease and raised by half (up to
    /// `relaxation`) after ten decreasing ones. Equal to `relaxation` to keep it fixed.
    pub min_relaxation: T,
    pub method: NonlinearMethod,
    /// Relative update below which the hybrid method switches to Newton.
    pub hybrid_switch_tol: T,
    pub jacobian: JacobianKind,
}

impl<T: Real> Default for NonlinearConfig<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-6),
            max_iters: 500,
            relaxation: T::lit(0.5),
            min_relaxation: T::lit(0.5 / 16.0),
            method: NonlinearMethod::Picard,
            hybrid_switch_tol: T::lit(1e-2),
            jacobian: JacobianKind::FiniteDifference,
        }
    }
}

impl<T: Real> NonlinearConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > T::zero()) {
            return Err(invalid("nonlinear tolerance must be positive"));
        }
        if !(self.relaxation > T::zero() && self.relaxation <= T::one()) {
            return Err(invalid("relaxation must lie in (0, 1]"));
        }
        if !(self.min_relaxation > T::zero() && self.min_relaxation <= self.relaxation) {
            return Err(invalid("minimum relaxation must lie in (0, relaxation]"));
        }
        if self.max_iters == 0 {
            return Err(invalid("at least one iteration is required"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Picard,
    Newton,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Picard => "picard",
            Phase::Newton => "newton",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// Relative update of the free values.
    pub update: f64,
    /// Relative fixed-point residual after the update.
    pub residual: f64,
    pub phase: Phase,
}

/// Writes `iter,update,residual,phase` rows with a header line.
pub fn write_history_csv(history: &[IterationRecord], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "iter,update,residual,phase")?;
    for r in history {
        writeln!(out, "{},{:e},{:e},{}", r.iter, r.update, r.residual, r.phase)?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct NonlinearSolution<T> {
    /// Full coefficient vector, constrained values included.
    pub u: Vec<T>,
    pub iterations: usize,
    pub history: Vec<IterationRecord>,
    /// Stabilization at the returned iterate.
    pub state: StabilizationState<T>,
    /// `K + B(u)` at the returned iterate.
    pub operator: CsrMatrix<T>,
    /// Relative fixed-point residual at the returned iterate.
    pub residual: T,
}

fn norm2<T: Real>(v: impl Iterator<Item = T>) -> T {
    v.map(|x| x * x).sum::<T>().sqrt()
}

/// Solution of the unstabilized constrained Galerkin system.
pub fn solve_galerkin<T: Real>(system: &SystemMatrix<T>, constraints: &Constraints<T>) -> Result<Vec<T>> {
    let red = crate::assembly::apply_constraints(system, constraints)?;
    red.solve(&mut LinearSolver::new())
}

/// Galerkin solution with free values clipped to the range of the
/// prescribed data.
pub fn initial_guess<T: Real>(system: &SystemMatrix<T>, constraints: &Constraints<T>) -> Result<Vec<T>> {
    let mut u = solve_galerkin(system, constraints)?;
    if let Some((lo, hi)) = constraints.data_range() {
        for (k, v) in u.iter_mut().enumerate() {
            if !constraints.kinds[k].is_constrained() {
                *v = v.max(lo).min(hi);
            }
        }
    }
    Ok(u)
}

/// Stabilized problem on a fixed space: Galerkin operator, load and
/// constraints.
pub struct StabilizedProblem<'a, T> {
    pub stabilizer: &'a Stabilizer<T>,
    pub load: &'a [T],
    pub constraints: &'a Constraints<T>,
}

impl<'a, T: Real> StabilizedProblem<'a, T> {
    fn check(&self) -> Result<()> {
        let n = self.stabilizer.galerkin().nrows();
        if self.load.len() != n || self.constraints.len() != n {
            return Err(invalid("load, constraints and operator sizes differ"));
        }
        Ok(())
    }

    /// Free part of `(K + B(u)) u - F`.
    pub fn residual(&self, u: &[T]) -> Vec<T> {
        let (kt, _) = self.stabilizer.stabilized_operator(u);
        self.residual_with(&kt, u)
    }

    fn residual_with(&self, kt: &CsrMatrix<T>, u: &[T]) -> Vec<T> {
        let ku = kt.matvec(u);
        (0..u.len())
            .filter(|&k| !self.constraints.kinds[k].is_constrained())
            .map(|k| ku[k] - self.load[k])
            .collect()
    }

    /// Norm of the Galerkin right-hand side after moving the constrained
    /// values over, used to make residuals relative. One when it vanishes.
    pub fn residual_scale(&self) -> T {
        let k = self.stabilizer.galerkin();
        let c = self.constraints;
        let s = norm2((0..c.len()).filter(|&r| !c.kinds[r].is_constrained()).map(|r| {
            let (cols, vals) = k.row(r);
            let mut f = self.load[r];
            for (&j, &v) in cols.iter().zip(vals) {
                if c.kinds[j].is_constrained() {
                    f -= v * c.values[j];
                }
            }
            f
        }));
        if s > T::zero() {
            s
        } else {
            T::one()
        }
    }
}

/// Finite-difference Jacobian of the free residual with respect to the free
/// values, on the pattern `|i - j|_inf <= p + 1`.
pub struct FdJacobian<T> {
    sub: Submatrix<T>,
    full: CsrMatrix<T>,
    free: Vec<usize>,
    /// Free (local) columns of each color.
    colors: Vec<Vec<usize>>,
}

impl<T: Real> FdJacobian<T> {
    pub fn new(space: &TensorSpace<T>, constraints: &Constraints<T>) -> Self {
        let radius = space.degree() + 1;
        let full = CsrMatrix::box_pattern(space.shape(), radius);
        let free = constraints.free_indices();
        let mut local = vec![None; space.len()];
        for (k, &f) in free.iter().enumerate() {
            local[f] = Some(k);
        }
        let sub = Submatrix::extract(&full, &free, &local);
        let c = 2 * radius + 1;
        let ncolors = c.pow(space.num_directions() as u32);
        let mut colors = vec![Vec::new(); ncolors];
        for (k, &f) in free.iter().enumerate() {
            let m = space.unflatten(f);
            let mut color = 0;
            for a in (0..m.len()).rev() {
                color = color * c + m[a] % c;
            }
            colors[color].push(k);
        }
        colors.retain(|v| !v.is_empty());
        Self { sub, full, free, colors }
    }

    /// Jacobian at `u` (full vector) given the residual `r0` there.
    pub fn evaluate(&mut self, problem: &StabilizedProblem<'_, T>, u: &[T], r0: &[T]) -> &CsrMatrix<T> {
        let eps = T::epsilon().sqrt();
        let mut up = u.to_vec();
        let mut steps = vec![T::zero(); self.free.len()];
        let mut color_of = vec![usize::MAX; self.free.len()];
        for (ci, cols) in self.colors.iter().enumerate() {
            for &k in cols {
                color_of[k] = ci;
            }
        }
        self.full.fill_zero();
        let mut global_local = vec![usize::MAX; u.len()];
        for (k, &f) in self.free.iter().enumerate() {
            global_local[f] = k;
        }
        for (ci, cols) in self.colors.iter().enumerate() {
            for &k in cols {
                let g = self.free[k];
                let h = eps * (T::one() + u[g].abs());
                steps[k] = h;
                up[g] = u[g] + h;
            }
            let rp = problem.residual(&up);
            for &k in cols {
                up[self.free[k]] = u[self.free[k]];
            }
            for (row_local, &row) in self.free.iter().enumerate() {
                let dr = rp[row_local] - r0[row_local];
                for pos in self.full.row_range(row) {
                    let col = self.full.col_idx()[pos];
                    let kl = global_local[col];
                    if kl != usize::MAX && color_of[kl] == ci {
                        self.full.values_mut()[pos] = dr / steps[kl];
                    }
                }
            }
        }
        self.sub.refresh(&self.full);
        self.sub.matrix()
    }
}

/// Solves the stabilized problem starting from `initial` (a full vector) or
/// from the clipped Galerkin solution when `None`.
pub fn solve_nonlinear<T: Real>(
    problem: &StabilizedProblem<'_, T>,
    space: &TensorSpace<T>,
    config: &NonlinearConfig<T>,
    initial: Option<&[T]>,
) -> Result<NonlinearSolution<T>> {
    config.validate()?;
    problem.check()?;
    let newton_capable = config.jacobian == JacobianKind::PicardOperator || problem.stabilizer.params().regularized;
    if config.method == NonlinearMethod::Hybrid && !newton_capable {
        return Err(invalid(
            "Newton steps with a finite-difference Jacobian need the regularized stabilization",
        ));
    }
    let c = problem.constraints;
    let mut u = match initial {
        Some(u0) => {
            if u0.len() != c.len() {
                return Err(invalid("initial guess has the wrong length"));
            }
            let mut u = u0.to_vec();
            for (k, v) in u.iter_mut().enumerate() {
                if c.kinds[k].is_constrained() {
                    *v = c.values[k];
                }
            }
            u
        }
        None => initial_guess(
            &SystemMatrix {
                matrix: problem.stabilizer.galerkin().clone(),
                load: problem.load.to_vec(),
            },
            c,
        )?,
    };
    let scale = problem.residual_scale();
    let mut reduced = ConstrainedSystem::new(problem.stabilizer.galerkin(), c)?;
    let mut solver = LinearSolver::new();
    let mut newton_solver = LinearSolver::new();
    let mut jac = None;
    let free = c.free_indices();
    let mut rho = config.relaxation;

    let mut history = Vec::new();
    let mut phase = Phase::Picard;
    let mut switch_tol = config.hybrid_switch_tol;
    let mut stalls = 0;
    let mut best_newton = T::infinity();
    let mut decreases = 0;
    let mut prev_res = T::infinity();
    let (mut kt, _) = problem.stabilizer.stabilized_operator(&u);
    let mut last_update = T::infinity();
    for iter in 1..=config.max_iters {
        let new = match phase {
            Phase::Picard => {
                reduced.update(&kt, problem.load);
                let hat = reduced.solve(&mut solver)?;
                let mut new = u.clone();
                for &k in &free {
                    new[k] = rho * hat[k] + (T::one() - rho) * u[k];
                }
                new
            }
            Phase::Newton => {
                let r = problem.residual_with(&kt, &u);
                let j = match config.jacobian {
                    JacobianKind::FiniteDifference => jac
                        .get_or_insert_with(|| FdJacobian::new(space, c))
                        .evaluate(problem, &u, &r)
                        .clone(),
                    JacobianKind::PicardOperator => {
                        reduced.update(&kt, problem.load);
                        reduced.matrix().clone()
                    }
                };
                let neg: Vec<T> = r.iter().map(|&v| -v).collect();
                let delta = newton_solver.solve(&j, &neg)?;
                let mut new = u.clone();
                for (&k, &d) in free.iter().zip(&delta) {
                    new[k] += d;
                }
                new
            }
        };
        let diff = norm2(free.iter().map(|&k| new[k] - u[k]));
        let base = norm2(free.iter().map(|&k| u[k]));
        let update = if base > T::zero() { diff / base } else { diff };
        if !update.is_finite() {
            return Err(Error::NonConvergence {
                iterations: iter,
                last_update: update.to_f64_lossy(),
                history,
            });
        }
        u = new;
        let (k2, state) = problem.stabilizer.stabilized_operator(&u);
        kt = k2;
        let res = norm2(problem.residual_with(&kt, &u).into_iter()) / scale;
        history.push(IterationRecord {
            iter,
            update: update.to_f64_lossy(),
            residual: res.to_f64_lossy(),
            phase,
        });
        last_update = update;
        // a small update alone can come from a small relaxation, so the
        // fixed-point residual has to agree
        if update < config.tol && res <= T::lit(10.0) * config.tol {
            return Ok(NonlinearSolution {
                u,
                iterations: iter,
                history,
                state,
                operator: kt,
                residual: res,
            });
        }
        if config.method == NonlinearMethod::Hybrid {
            match phase {
                Phase::Picard if update < switch_tol => {
                    phase = Phase::Newton;
                    stalls = 0;
                    best_newton = res;
                }
                Phase::Newton => {
                    if res < best_newton {
                        best_newton = res;
                        stalls = 0;
                    } else {
                        stalls += 1;
                    }
                    if stalls >= 3 {
                        // Newton diverging or cycling: back to Picard, and
                        // require a smaller update before trying again
                        phase = Phase::Picard;
                        switch_tol = switch_tol * T::lit(0.1);
                    }
                }
                _ => {}
            }
        }
        if phase == Phase::Picard {
            if res >= prev_res {
                rho = (rho * T::lit(0.5)).max(config.min_relaxation);
                decreases = 0;
            } else {
                decreases += 1;
                if decreases >= 10 {
                    rho = (rho * T::lit(1.5)).min(config.relaxation);
                    decreases = 0;
                }
            }
        }
        prev_res = res;
    }
    Err(Error::NonConvergence {
        iterations: config.max_iters,
        last_update: last_update.to_f64_lossy(),
        history,
    })
}
