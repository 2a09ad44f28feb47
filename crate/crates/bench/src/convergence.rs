//! Convergence studies over the refinement series of a case.

use std::time::Duration;

use crate::cases::{BenchmarkCase, Refinement, Series};
use crate::run::{error_norms, solve_on_grid, SolveOptions};
use crate::BenchError;

/// Least-squares slope of `log(errors)` against `log(sizes)`.
pub fn fit_rate(sizes: &[f64], errors: &[f64]) -> Result<f64, BenchError> {
    if sizes.len() != errors.len() {
        return Err(BenchError::Config("sizes and errors differ in length".into()));
    }
    if sizes.len() < 2 {
        return Err(BenchError::Config("a rate needs at least two levels".into()));
    }
    if sizes.iter().chain(errors).any(|v| !(*v > 0.0)) {
        return Err(BenchError::Config("sizes and errors must be positive".into()));
    }
    let x: Vec<f64> = sizes.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(BenchError::Config("all sizes are equal".into()));
    }
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelResult {
    pub order: usize,
    pub level: usize,
    /// Spatial mesh size.
    pub h: f64,
    /// Time span length, zero for steady cases.
    pub dt: f64,
    pub l2: f64,
    pub h1: f64,
    pub unknowns: usize,
    pub iterations: usize,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub order: usize,
    pub slabs: usize,
    pub l2_rate: f64,
    pub h1_rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceStudy {
    pub levels: Vec<LevelResult>,
    pub rates: Vec<RateRow>,
}

/// Runs the refinement series of `case` for each order and fits the rates
/// against the refined size (time step or mesh size).
pub fn run_convergence(
    case: &BenchmarkCase,
    orders: &[usize],
    refine: Refinement,
    slabs: usize,
    levels: Option<usize>,
    base: &SolveOptions,
) -> Result<ConvergenceStudy, BenchError> {
    let series = case
        .series
        .as_ref()
        .ok_or_else(|| BenchError::Config(format!("{} has no refinement series", case.name)))?;
    if case.problem.exact.is_none() {
        return Err(BenchError::Config(format!("{} has no exact solution", case.name)));
    }
    let n_levels = levels.unwrap_or(case.series_len()).min(case.series_len());
    if n_levels < 2 {
        return Err(BenchError::Config("a convergence study needs at least two levels".into()));
    }
    let mut study = ConvergenceStudy::default();
    for &p in orders {
        let opts = SolveOptions {
            degree: p,
            refine,
            ..base.clone()
        };
        let mut rows = Vec::with_capacity(n_levels);
        for level in 0..n_levels {
            let grid = case.series_grid(p, level, refine, slabs).expect("level within series");
            let run = solve_on_grid(case, grid, slabs, &opts)?;
            let e = error_norms(case, &run).expect("exact solution checked above");
            let dt = run.space.time_direction().map_or(0.0, |k| k.span_length());
            rows.push(LevelResult {
                order: p,
                level,
                h: run.space.mesh_size(),
                dt,
                l2: e.l2,
                h1: e.h1,
                unknowns: run.space.len(),
                iterations: run.iterations(),
                elapsed: run.elapsed,
            });
        }
        let sizes: Vec<f64> = rows
            .iter()
            .map(|r| match series {
                Series::Time(_) => r.dt,
                Series::Space(_) => r.h,
            })
            .collect();
        let l2: Vec<f64> = rows.iter().map(|r| r.l2).collect();
        let h1: Vec<f64> = rows.iter().map(|r| r.h1).collect();
        study.rates.push(RateRow {
            order: p,
            slabs,
            l2_rate: fit_rate(&sizes, &l2)?,
            h1_rate: fit_rate(&sizes, &h1)?,
        });
        study.levels.extend(rows);
    }
    Ok(study)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_power_rate() {
        let r = fit_rate(&[1.0, 0.5, 0.25], &[1.0, 0.25, 0.0625]).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_level_is_rejected() {
        assert!(fit_rate(&[1.0], &[1.0]).is_err());
        assert!(fit_rate(&[1.0, 1.0], &[1.0, 0.5]).is_err());
    }
}
