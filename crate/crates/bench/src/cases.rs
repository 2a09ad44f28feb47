//! Benchmark problem registry.

use std::f64::consts::PI;

use stiga::problem::ProblemData;
use stiga::splines::{k_refined_spans, KnotVector};
use stiga::stabilization::StabilizationParams;
use stiga::tensor::TensorSpace;
use stiga::Result;

/// How the discretization grows with the order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Refinement {
    /// Same number of control points for every order.
    Fixed,
    /// Control points grow like the nodes of a Lagrangian mesh.
    KRefine,
}

impl std::str::FromStr for Refinement {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fixed" => Ok(Self::Fixed),
            "kref" | "k-refine" => Ok(Self::KRefine),
            other => Err(format!("unknown refinement '{other}', expected fixed or kref")),
        }
    }
}

/// Which direction a convergence study refines.
#[derive(Debug, Clone, PartialEq)]
pub enum Series {
    /// Time spans of the linear base discretization, spatial grid fixed.
    Time(Vec<usize>),
    /// Control points per spatial direction.
    Space(Vec<usize>),
}

/// Line along which the solution is sampled for `profile.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    /// `x` from 0 to the spatial extent at the final time.
    FinalTime,
    /// Horizontal line `y = c` of a steady 2D problem.
    Horizontal(f64),
    /// Circle of the given radius around (0.5, 0.5) at the final time.
    Circle(f64),
}

pub struct BenchmarkCase {
    pub name: &'static str,
    pub problem: ProblemData<f64>,
    /// Spatial extents followed by the final time for transient cases.
    pub extents: Vec<f64>,
    /// Default control points of the linear discretization: per spatial
    /// direction, then in time.
    pub control_points: Vec<usize>,
    pub slabs: usize,
    /// Whether the default solve is stabilized.
    pub stabilized: bool,
    pub params: StabilizationParams<f64>,
    pub tol: f64,
    pub series: Option<Series>,
    pub profile: Option<Profile>,
    pub metadata: Vec<(&'static str, String)>,
}

impl std::fmt::Debug for BenchmarkCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BenchmarkCase")
            .field("name", &self.name)
            .field("extents", &self.extents)
            .field("control_points", &self.control_points)
            .field("slabs", &self.slabs)
            .finish_non_exhaustive()
    }
}

pub const CASE_NAMES: [&str; 5] = [
    "transient_diffusion_1d",
    "steady_convection_2d",
    "sharp_layer_1d",
    "boundary_layer_2d",
    "three_body_rotation",
];

pub fn case_by_name(name: &str) -> Option<BenchmarkCase> {
    match name {
        "transient_diffusion_1d" => Some(case_transient_diffusion_1d()),
        "steady_convection_2d" => Some(case_steady_convection_2d()),
        "sharp_layer_1d" => Some(case_sharp_layer_1d()),
        "boundary_layer_2d" => Some(case_boundary_layer_2d()),
        "three_body_rotation" => Some(case_three_body_rotation()),
        _ => None,
    }
}

/// Spans of a direction with `control_points` linear control points after
/// raising the order to `degree`.
pub fn spans_for(control_points: usize, degree: usize, refine: Refinement) -> usize {
    match refine {
        Refinement::Fixed => control_points.saturating_sub(degree),
        Refinement::KRefine => k_refined_spans(control_points - 1, degree),
    }
}

/// Smallest span count not below `spans` that splits into `slabs` slabs of a
/// multiple of `degree` spans each.
pub fn slab_compatible_spans(spans: usize, degree: usize, slabs: usize) -> usize {
    let unit = degree * slabs.max(1);
    spans.div_ceil(unit) * unit
}

/// Discretization of a case: degree and spans per direction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid {
    pub degree: usize,
    pub spans: Vec<usize>,
}

impl BenchmarkCase {
    pub fn is_transient(&self) -> bool {
        self.problem.transient
    }

    /// Grid from linear control-point counts per direction.
    pub fn grid(&self, degree: usize, control_points: &[usize], refine: Refinement, slabs: usize) -> Grid {
        let mut spans: Vec<usize> = control_points.iter().map(|&c| spans_for(c, degree, refine)).collect();
        if self.is_transient() {
            let last = spans.len() - 1;
            spans[last] = slab_compatible_spans(spans[last], degree, slabs);
        }
        Grid { degree, spans }
    }

    pub fn default_grid(&self, degree: usize, refine: Refinement) -> Grid {
        self.grid(degree, &self.control_points, refine, self.slabs)
    }

    pub fn space(&self, grid: &Grid) -> Result<TensorSpace<f64>> {
        let dirs = self
            .extents
            .iter()
            .zip(&grid.spans)
            .map(|(&l, &m)| KnotVector::open_uniform(l, m, grid.degree))
            .collect::<Result<Vec<_>>>()?;
        TensorSpace::new(dirs, self.is_transient())
    }

    /// Grid of level `level` of the convergence series.
    pub fn series_grid(&self, degree: usize, level: usize, refine: Refinement, slabs: usize) -> Option<Grid> {
        let mut cps = self.control_points.clone();
        match self.series.as_ref()? {
            Series::Time(base) => {
                let last = cps.len() - 1;
                cps[last] = *base.get(level)? + 1;
            }
            Series::Space(n) => {
                let n = *n.get(level)?;
                for c in cps.iter_mut().take(self.problem.spatial_dim) {
                    *c = n;
                }
            }
        }
        Some(self.grid(degree, &cps, refine, slabs))
    }

    pub fn series_len(&self) -> usize {
        match &self.series {
            Some(Series::Time(v)) | Some(Series::Space(v)) => v.len(),
            None => 0,
        }
    }
}

/// Diffusion of `u = (x(x-1))^2 (t(t-1))^2` on `(0,1) x (0,1]`.
///
/// The source is `f = du/dt - d2u/dx2` for that solution.
pub fn case_transient_diffusion_1d() -> BenchmarkCase {
    let u = |x: f64, t: f64| (x * (x - 1.0)).powi(2) * (t * (t - 1.0)).powi(2);
    let problem = ProblemData::new(1, true)
        .with_diffusion(1.0)
        .with_source(|p: &[f64]| {
            let (x, t) = (p[0], p[1]);
            let xx = x * (x - 1.0);
            let tt = t * (t - 1.0);
            2.0 * tt * (2.0 * t - 1.0) * xx * xx - 2.0 * (6.0 * x * x - 6.0 * x + 1.0) * tt * tt
        })
        .with_exact(
            move |p: &[f64]| u(p[0], p[1]),
            |p: &[f64], g: &mut [f64]| {
                let (x, t) = (p[0], p[1]);
                let xx = x * (x - 1.0);
                let tt = t * (t - 1.0);
                g[0] = 2.0 * xx * (2.0 * x - 1.0) * tt * tt;
                g[1] = 2.0 * tt * (2.0 * t - 1.0) * xx * xx;
            },
        );
    BenchmarkCase {
        name: "transient_diffusion_1d",
        problem,
        extents: vec![1.0, 1.0],
        control_points: vec![101, 11],
        slabs: 1,
        stabilized: false,
        params: StabilizationParams::default(),
        tol: 1e-6,
        series: Some(Series::Time(vec![5, 10, 20, 40, 80])),
        profile: Some(Profile::FinalTime),
        metadata: vec![("mu", "1".into()), ("spatial_h", "1/100".into())],
    }
}

/// Steady transport of `sin(2 pi (x - y / tan(theta)))` with
/// `theta = pi / 3`, data on the inflow faces `x = 0` and `y = 0`.
pub fn case_steady_convection_2d() -> BenchmarkCase {
    let theta = PI / 3.0;
    let (c, s) = (theta.cos(), theta.sin());
    let cot = 1.0 / theta.tan();
    let u = move |p: &[f64]| (2.0 * PI * (p[0] - p[1] * cot)).sin();
    let problem = ProblemData::new(2, false)
        .with_constant_velocity(&[c, s])
        .with_dirichlet(u)
        .with_exact(u, move |p: &[f64], g: &mut [f64]| {
            let d = 2.0 * PI * (2.0 * PI * (p[0] - p[1] * cot)).cos();
            g[0] = d;
            g[1] = -d * cot;
        });
    BenchmarkCase {
        name: "steady_convection_2d",
        problem,
        extents: vec![1.0, 1.0],
        control_points: vec![20, 20],
        slabs: 1,
        stabilized: true,
        params: StabilizationParams {
            q: 10.0,
            epsilon: 1e-5,
            sigma: 1e-6,
            gamma: 1e-10,
            ..StabilizationParams::default()
        },
        tol: 1e-6,
        series: Some(Series::Space(vec![20, 40, 80, 160])),
        profile: Some(Profile::Horizontal(0.5)),
        metadata: vec![("theta", "pi/3".into())],
    }
}

fn heaviside(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        0.0
    } else {
        0.5
    }
}

/// Unit-speed transport of the step `1 - H(x - 0.25)` up to `T = 0.5`.
pub fn case_sharp_layer_1d() -> BenchmarkCase {
    let u = |p: &[f64]| 1.0 - heaviside(p[0] - p[p.len() - 1] - 0.25);
    let problem = ProblemData::new(1, true)
        .with_constant_velocity(&[1.0])
        .with_initial(u)
        .with_dirichlet(u);
    BenchmarkCase {
        name: "sharp_layer_1d",
        problem,
        extents: vec![1.0, 0.5],
        control_points: vec![25, 25],
        slabs: 1,
        stabilized: true,
        params: StabilizationParams::default(),
        tol: 1e-5,
        series: None,
        profile: Some(Profile::FinalTime),
        metadata: vec![("beta", "1".into()), ("final_time", "0.5".into())],
    }
}

/// Convection-diffusion with `mu = 1e-4`, `theta = -pi / 3` and the arctan
/// profile on `y = 0`.
pub fn case_boundary_layer_2d() -> BenchmarkCase {
    let theta = -PI / 3.0;
    let problem = ProblemData::new(2, false)
        .with_constant_velocity(&[theta.cos(), theta.sin()])
        .with_diffusion(1e-4)
        .with_dirichlet(|p: &[f64]| {
            if p[1] == 0.0 {
                0.5 + (1e-4 * (p[1] - 5.0 / 6.0)).atan() / PI
            } else {
                0.0
            }
        });
    BenchmarkCase {
        name: "boundary_layer_2d",
        problem,
        extents: vec![1.0, 1.0],
        control_points: vec![50, 50],
        slabs: 1,
        stabilized: true,
        params: StabilizationParams {
            q: 2.0,
            epsilon: 1e-8,
            sigma: 1e-6,
            gamma: 1e-10,
            ..StabilizationParams::default()
        },
        tol: 1e-8,
        series: None,
        profile: Some(Profile::Horizontal(0.1)),
        metadata: vec![("mu", "1e-4".into()), ("theta", "-pi/3".into())],
    }
}

/// Slotted cylinder, cone and cosine hump of radius 0.15 centred at
/// (0.5, 0.75), (0.5, 0.25) and (0.25, 0.5).
///
/// The slot has width 0.05 and reaches up to `y = 0.85`.
pub fn three_body_initial(x: f64, y: f64) -> f64 {
    let r0 = 0.15;
    let r = |cx: f64, cy: f64| ((x - cx).powi(2) + (y - cy).powi(2)).sqrt() / r0;
    let rc = r(0.5, 0.75);
    if rc <= 1.0 {
        return if (x - 0.5).abs() >= 0.025 || y >= 0.85 { 1.0 } else { 0.0 };
    }
    let rk = r(0.5, 0.25);
    if rk <= 1.0 {
        return 1.0 - rk;
    }
    let rh = r(0.25, 0.5);
    if rh <= 1.0 {
        return 0.25 * (1.0 + (PI * rh).cos());
    }
    0.0
}

/// Solid body rotation of the three bodies, one revolution on `(0, 1]`.
pub fn case_three_body_rotation() -> BenchmarkCase {
    let problem = ProblemData::new(2, true)
        .with_velocity(|p: &[f64], b: &mut [f64]| {
            b[0] = -2.0 * PI * (p[1] - 0.5);
            b[1] = 2.0 * PI * (p[0] - 0.5);
        })
        .with_initial(|p: &[f64]| three_body_initial(p[0], p[1]));
    BenchmarkCase {
        name: "three_body_rotation",
        problem,
        extents: vec![1.0, 1.0, 1.0],
        control_points: vec![50, 50, 241],
        slabs: 60,
        stabilized: true,
        params: StabilizationParams::default(),
        tol: 1e-5,
        series: None,
        profile: Some(Profile::Circle(0.25)),
        metadata: vec![("revolutions", "1".into())],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_diffusion_value() {
        let c = case_transient_diffusion_1d();
        let u = c.problem.exact.as_ref().unwrap();
        assert_eq!(u(&[0.5, 0.5]), 0.00390625);
    }

    #[test]
    fn slab_compatible() {
        assert_eq!(slab_compatible_spans(9, 2, 5), 10);
        assert_eq!(slab_compatible_spans(10, 2, 5), 10);
        assert_eq!(slab_compatible_spans(240, 1, 60), 240);
        assert_eq!(spans_for(25, 2, Refinement::KRefine), 47);
        assert_eq!(spans_for(20, 3, Refinement::Fixed), 17);
    }

    #[test]
    fn three_body_values() {
        assert_eq!(three_body_initial(0.5, 0.75), 0.0);
        assert_eq!(three_body_initial(0.45, 0.75), 1.0);
        assert_eq!(three_body_initial(0.5, 0.25), 1.0);
        assert!((three_body_initial(0.25, 0.5) - 0.5).abs() < 1e-15);
        assert_eq!(three_body_initial(0.05, 0.05), 0.0);
    }

    #[test]
    fn registry_is_complete() {
        for name in CASE_NAMES {
            let c = case_by_name(name).unwrap();
            assert_eq!(c.name, name);
            assert_eq!(c.extents.len(), c.control_points.len());
        }
        assert!(case_by_name("nope").is_none());
    }
}
