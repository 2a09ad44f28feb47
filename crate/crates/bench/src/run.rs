//! Solving a benchmark case and measuring the result.

use std::time::{Duration, Instant};

use stiga::assembly::ErrorNorms;
use stiga::nonlinear::NonlinearConfig;
use stiga::quadrature::gauss_legendre_on;
use stiga::stabilization::StabilizationParams;
use stiga::tensor::TensorSpace;
use stiga::timeslabs::{build_chain, solve_chain, solve_monolithic, SolveMode, Trajectory};

use crate::cases::{BenchmarkCase, Grid, Profile, Refinement};
use crate::BenchError;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub degree: usize,
    pub refine: Refinement,
    /// Linear control points per direction; the case default when `None`.
    pub control_points: Option<Vec<usize>>,
    pub slabs: Option<usize>,
    pub stabilized: bool,
    pub params: StabilizationParams<f64>,
    pub config: NonlinearConfig<f64>,
}

impl SolveOptions {
    pub fn for_case(case: &BenchmarkCase) -> Self {
        Self {
            degree: 1,
            refine: Refinement::KRefine,
            control_points: None,
            slabs: None,
            stabilized: case.stabilized,
            params: case.params,
            config: NonlinearConfig {
                tol: case.tol,
                ..NonlinearConfig::default()
            },
        }
    }

    pub fn mode(&self) -> SolveMode<f64> {
        if self.stabilized {
            SolveMode::Stabilized {
                params: self.params,
                config: self.config,
            }
        } else {
            SolveMode::Galerkin
        }
    }
}

#[derive(Debug, Clone)]
pub struct CaseRun {
    pub grid: Grid,
    pub space: TensorSpace<f64>,
    pub slabs: usize,
    pub trajectory: Trajectory<f64>,
    pub elapsed: Duration,
}

impl CaseRun {
    pub fn iterations(&self) -> usize {
        self.trajectory.total_iterations()
    }
}

/// Solves `case` on an explicit grid.
pub fn solve_on_grid(case: &BenchmarkCase, grid: Grid, slabs: usize, opts: &SolveOptions) -> Result<CaseRun, BenchError> {
    let start = Instant::now();
    let space = case.space(&grid)?;
    let mode = opts.mode();
    let trajectory = if case.is_transient() {
        let chain = build_chain(&space, slabs)?;
        solve_chain(&chain, &case.problem, &mode).map_err(|e| BenchError::Slab {
            slab: e.slab,
            source: e.error,
        })?
    } else {
        Trajectory {
            slabs: vec![solve_monolithic(&space, &case.problem, &mode)?],
        }
    };
    Ok(CaseRun {
        grid,
        space,
        slabs: if case.is_transient() { slabs } else { 1 },
        trajectory,
        elapsed: start.elapsed(),
    })
}

pub fn solve_case(case: &BenchmarkCase, opts: &SolveOptions) -> Result<CaseRun, BenchError> {
    let slabs = opts.slabs.unwrap_or(case.slabs);
    let cps = opts.control_points.clone().unwrap_or_else(|| case.control_points.clone());
    if cps.len() != case.extents.len() {
        return Err(BenchError::Config(format!(
            "{} needs {} control point counts",
            case.name,
            case.extents.len()
        )));
    }
    let grid = case.grid(opts.degree, &cps, opts.refine, slabs);
    solve_on_grid(case, grid, slabs, opts)
}

pub fn error_norms(case: &BenchmarkCase, run: &CaseRun) -> Option<ErrorNorms<f64>> {
    let u = case.problem.exact.as_ref()?;
    let g = case.problem.exact_gradient.as_ref()?;
    Some(run.trajectory.error_norms(&|p| u(p), &|p, out| g(p, out)))
}

/// `int |u_h(x, T) - u_0(x)| dx` over the spatial domain.
pub fn final_l1_deviation(case: &BenchmarkCase, traj: &Trajectory<f64>) -> f64 {
    let Some(last) = traj.slabs.last() else { return 0.0 };
    let space = &last.space;
    let d = case.problem.spatial_dim;
    let t_end = case.extents[d];
    let nq = space.degree() + 3;
    let rules: Vec<Vec<(Vec<f64>, Vec<f64>)>> = (0..d)
        .map(|a| {
            let k = space.direction(a).knots();
            k.windows(2)
                .filter(|w| w[1] > w[0])
                .map(|w| gauss_legendre_on::<f64>(nq, w[0], w[1]))
                .collect()
        })
        .collect();
    let mut total = 0.0;
    let mut point = vec![0.0; d + 1];
    point[d] = t_end;
    let mut visit = |pt: &[f64], w: f64| {
        point[..d].copy_from_slice(pt);
        let uh = space.evaluate(&last.coeffs, &point);
        total += w * (uh - (case.problem.initial)(&point)).abs();
    };
    match d {
        1 => {
            for (xs, ws) in &rules[0] {
                for (x, w) in xs.iter().zip(ws) {
                    visit(&[*x], *w);
                }
            }
        }
        _ => {
            for (xs, wxs) in &rules[0] {
                for (ys, wys) in &rules[1] {
                    for (x, wx) in xs.iter().zip(wxs) {
                        for (y, wy) in ys.iter().zip(wys) {
                            visit(&[*x, *y], wx * wy);
                        }
                    }
                }
            }
        }
    }
    total
}

/// Samples `(s, point..., value)` along the case profile line.
pub fn sample_profile(case: &BenchmarkCase, traj: &Trajectory<f64>, samples: usize) -> Vec<(f64, Vec<f64>, f64)> {
    let Some(profile) = case.profile else { return Vec::new() };
    let d = case.problem.spatial_dim;
    let t_end = if case.is_transient() { Some(case.extents[d]) } else { None };
    let n = samples.max(2);
    (0..n)
        .filter_map(|k| {
            let s = k as f64 / (n - 1) as f64;
            let mut pt: Vec<f64> = match profile {
                Profile::FinalTime => {
                    let mut v = vec![0.5; d];
                    v[0] = s * case.extents[0];
                    v
                }
                Profile::Horizontal(y) => vec![s * case.extents[0], y],
                Profile::Circle(r) => {
                    let a = 2.0 * std::f64::consts::PI * s;
                    vec![0.5 + r * a.cos(), 0.5 + r * a.sin()]
                }
            };
            if let Some(t) = t_end {
                pt.push(t);
            }
            traj.evaluate(&pt).map(|v| (s, pt, v))
        })
        .collect()
}
