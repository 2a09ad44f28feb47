//! Galerkin assembly over a tensor space, strong imposition of boundary and
//! initial data, and error norms.
//!
//! In a transient space the operator is treated as a convection-diffusion
//! operator in `d + 1` dimensions with velocity `(beta, 1)` and diffusion
//! acting on the spatial directions only. Steady spaces drop the time
//! direction altogether.

use crate::error::{invalid, Result};
use crate::linear::LinearSolver;
use crate::problem::ProblemData;
use crate::quadrature::gauss_legendre_on;
use crate::scalar::Real;
use crate::sparse::{CsrMatrix, Submatrix};
use crate::tensor::{NodeKind, TensorSpace, MAX_DIRECTIONS};

/// Sparse operator and load vector over the flattened control points.
#[derive(Debug, Clone)]
pub struct SystemMatrix<T> {
    pub matrix: CsrMatrix<T>,
    pub load: Vec<T>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AssemblyOptions {
    /// Gauss points per direction and span; `None` means `p + 1`.
    pub quadrature_points: Option<usize>,
}

/// Basis data of one element at its tensor quadrature points.
pub(crate) struct Element<T> {
    /// Global flat index of each local basis function.
    pub globals: Vec<usize>,
    pub points: Vec<[T; MAX_DIRECTIONS]>,
    pub weights: Vec<T>,
    /// `values[q * nloc + l]`.
    pub values: Vec<T>,
    /// `grads[(q * nloc + l) * ndir + a]`.
    pub grads: Vec<T>,
    pub nloc: usize,
}

/// Visits every nonempty element with the basis values and gradients at its
/// `nq`-point Gauss rule.
pub(crate) fn for_each_element<T: Real>(space: &TensorSpace<T>, nq: usize, mut f: impl FnMut(&Element<T>)) {
    let ndir = space.num_directions();
    let p = space.degree();
    let nloc_dir = p + 1;
    let nloc = nloc_dir.pow(ndir as u32);
    // per direction and span: points, weights, basis values and derivatives
    struct SpanData<T> {
        span: usize,
        pts: Vec<T>,
        wts: Vec<T>,
        vals: Vec<Vec<T>>,
        ders: Vec<Vec<T>>,
    }
    let per_dir: Vec<Vec<SpanData<T>>> = space
        .directions()
        .iter()
        .map(|kv| {
            kv.nonzero_spans()
                .map(|s| {
                    let (pts, wts) = gauss_legendre_on(nq, kv.knots()[s], kv.knots()[s + 1]);
                    let mut vals = Vec::with_capacity(nq);
                    let mut ders = Vec::with_capacity(nq);
                    for &x in &pts {
                        let mut bd = kv.basis_with_derivatives(s, x, 1);
                        ders.push(bd.pop().unwrap());
                        vals.push(bd.pop().unwrap());
                    }
                    SpanData { span: s, pts, wts, vals, ders }
                })
                .collect()
        })
        .collect();

    let nqe = nq.pow(ndir as u32);
    let mut el = Element {
        globals: vec![0; nloc],
        points: vec![[T::zero(); MAX_DIRECTIONS]; nqe],
        weights: vec![T::zero(); nqe],
        values: vec![T::zero(); nqe * nloc],
        grads: vec![T::zero(); nqe * nloc * ndir],
        nloc,
    };
    let counts: Vec<usize> = per_dir.iter().map(|v| v.len()).collect();
    let mut e = [0usize; MAX_DIRECTIONS];
    let strides = space.strides();
    loop {
        let data: Vec<&SpanData<T>> = (0..ndir).map(|a| &per_dir[a][e[a]]).collect();
        for l in 0..nloc {
            let mut rem = l;
            let mut flat = 0;
            for a in 0..ndir {
                let la = rem % nloc_dir;
                rem /= nloc_dir;
                flat += (data[a].span - p + la) * strides[a];
            }
            el.globals[l] = flat;
        }
        for q in 0..nqe {
            let mut rem = q;
            let mut qa = [0usize; MAX_DIRECTIONS];
            let mut w = T::one();
            for a in 0..ndir {
                qa[a] = rem % nq;
                rem /= nq;
                el.points[q][a] = data[a].pts[qa[a]];
                w *= data[a].wts[qa[a]];
            }
            el.weights[q] = w;
            for l in 0..nloc {
                let mut rem = l;
                let mut la = [0usize; MAX_DIRECTIONS];
                let mut v = T::one();
                for a in 0..ndir {
                    la[a] = rem % nloc_dir;
                    rem /= nloc_dir;
                    v *= data[a].vals[qa[a]][la[a]];
                }
                el.values[q * nloc + l] = v;
                for g in 0..ndir {
                    let mut d = T::one();
                    for a in 0..ndir {
                        d *= if a == g {
                            data[a].ders[qa[a]][la[a]]
                        } else {
                            data[a].vals[qa[a]][la[a]]
                        };
                    }
                    el.grads[(q * nloc + l) * ndir + g] = d;
                }
            }
        }
        f(&el);
        let mut a = 0;
        loop {
            if a == ndir {
                return;
            }
            e[a] += 1;
            if e[a] < counts[a] {
                break;
            }
            e[a] = 0;
            a += 1;
        }
    }
}

fn check_compatible<T: Real>(space: &TensorSpace<T>, problem: &ProblemData<T>) -> Result<()> {
    problem.validate()?;
    if problem.spatial_dim != space.spatial_dim() || problem.transient != space.is_transient() {
        return Err(invalid(format!(
            "problem (d = {}, transient = {}) does not match space (d = {}, transient = {})",
            problem.spatial_dim,
            problem.transient,
            space.spatial_dim(),
            space.is_transient()
        )));
    }
    Ok(())
}

/// Galerkin operator `K_ij = (dt phi_j, phi_i) + (beta . grad phi_j, phi_i)
/// + mu (grad phi_j, grad phi_i)` and load `F_i = (g, phi_i)`.
pub fn assemble_galerkin<T: Real>(space: &TensorSpace<T>, problem: &ProblemData<T>) -> Result<SystemMatrix<T>> {
    assemble_galerkin_with(space, problem, &AssemblyOptions::default())
}

pub fn assemble_galerkin_with<T: Real>(
    space: &TensorSpace<T>,
    problem: &ProblemData<T>,
    options: &AssemblyOptions,
) -> Result<SystemMatrix<T>> {
    check_compatible(space, problem)?;
    let nq = options.quadrature_points.unwrap_or(space.degree() + 1);
    if nq == 0 {
        return Err(invalid("quadrature needs at least one point"));
    }
    let ndir = space.num_directions();
    let d = space.spatial_dim();
    let mu = problem.diffusion;
    let mut matrix = CsrMatrix::box_pattern(space.shape(), space.degree());
    let mut load = vec![T::zero(); space.len()];
    let mut local = Vec::new();
    let mut conv = Vec::new();
    let mut beta = vec![T::zero(); d];
    for_each_element(space, nq, |el| {
        let nloc = el.nloc;
        local.clear();
        local.resize(nloc * nloc, T::zero());
        conv.resize(nloc, T::zero());
        for (q, &w) in el.weights.iter().enumerate() {
            let pt = &el.points[q][..ndir];
            (problem.velocity)(pt, &mut beta);
            let g = (problem.source)(pt);
            let vals = &el.values[q * nloc..(q + 1) * nloc];
            let grads = &el.grads[q * nloc * ndir..(q + 1) * nloc * ndir];
            for l in 0..nloc {
                let gr = &grads[l * ndir..(l + 1) * ndir];
                let mut c = if space.is_transient() { gr[d] } else { T::zero() };
                for a in 0..d {
                    c += beta[a] * gr[a];
                }
                conv[l] = c;
            }
            for li in 0..nloc {
                let wi = w * vals[li];
                load[el.globals[li]] += wi * g;
                let gi = &grads[li * ndir..li * ndir + d];
                let row = &mut local[li * nloc..(li + 1) * nloc];
                for lj in 0..nloc {
                    let mut v = wi * conv[lj];
                    if mu != T::zero() {
                        let gj = &grads[lj * ndir..lj * ndir + d];
                        let mut dot = T::zero();
                        for a in 0..d {
                            dot += gi[a] * gj[a];
                        }
                        v += w * mu * dot;
                    }
                    row[lj] += v;
                }
            }
        }
        for li in 0..nloc {
            for lj in 0..nloc {
                matrix.add(el.globals[li], el.globals[lj], local[li * nloc + lj]);
            }
        }
    });
    Ok(SystemMatrix { matrix, load })
}

/// Mass matrix `(phi_j, phi_i)` on the box pattern of radius `p`.
pub fn assemble_mass<T: Real>(space: &TensorSpace<T>) -> CsrMatrix<T> {
    let nq = space.degree() + 1;
    let mut matrix = CsrMatrix::box_pattern(space.shape(), space.degree());
    for_each_element(space, nq, |el| {
        let nloc = el.nloc;
        for (q, &w) in el.weights.iter().enumerate() {
            let vals = &el.values[q * nloc..(q + 1) * nloc];
            for li in 0..nloc {
                for lj in 0..nloc {
                    matrix.add(el.globals[li], el.globals[lj], w * vals[li] * vals[lj]);
                }
            }
        }
    });
    matrix
}

/// Largest Euclidean norm of the convection field over the Gauss points.
pub fn max_velocity_norm<T: Real>(space: &TensorSpace<T>, problem: &ProblemData<T>) -> T {
    let ndir = space.num_directions();
    let mut beta = vec![T::zero(); problem.spatial_dim];
    let mut m = T::zero();
    for_each_element(space, space.degree() + 1, |el| {
        for pt in &el.points {
            (problem.velocity)(&pt[..ndir], &mut beta);
            m = m.max(beta.iter().map(|&b| b * b).sum::<T>().sqrt());
        }
    });
    m
}

/// Node labels and prescribed values; `values` is zero at free nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraints<T> {
    pub kinds: Vec<NodeKind>,
    pub values: Vec<T>,
}

impl<T: Real> Constraints<T> {
    /// Labels from [`TensorSpace::classify_boundary`] with the data sampled
    /// at the Greville abscissae.
    pub fn from_problem(space: &TensorSpace<T>, problem: &ProblemData<T>) -> Result<Self> {
        let kinds = space.classify_boundary(problem)?;
        let values = kinds
            .iter()
            .enumerate()
            .map(|(k, kind)| {
                let x = space.greville_of(&space.unflatten(k));
                match kind {
                    NodeKind::Free => T::zero(),
                    NodeKind::Dirichlet => (problem.dirichlet)(&x),
                    NodeKind::Initial => (problem.initial)(&x),
                }
            })
            .collect();
        Ok(Self { kinds, values })
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn free_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| !self.kinds[k].is_constrained()).collect()
    }

    pub fn constrained_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.kinds[k].is_constrained()).collect()
    }

    /// Smallest and largest prescribed value, `None` without constraints.
    pub fn data_range(&self) -> Option<(T, T)> {
        self.kinds
            .iter()
            .zip(&self.values)
            .filter(|(k, _)| k.is_constrained())
            .fold(None, |acc, (_, &v)| match acc {
                None => Some((v, v)),
                Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
            })
    }

    /// Full coefficient vector with constrained entries set and free ones
    /// taken from `free`.
    pub fn expand(&self, free: &[T]) -> Vec<T> {
        let mut out = self.values.clone();
        let mut it = free.iter();
        for (k, o) in out.iter_mut().enumerate() {
            if !self.kinds[k].is_constrained() {
                *o = *it.next().expect("free vector too short");
            }
        }
        out
    }
}

/// Linear system restricted to the free control points, with the
/// constrained values moved to the right-hand side.
#[derive(Debug, Clone)]
pub struct ConstrainedSystem<T> {
    free: Vec<usize>,
    local: Vec<Option<usize>>,
    sub: Submatrix<T>,
    rhs: Vec<T>,
    values: Vec<T>,
    constrained: Vec<bool>,
}

impl<T: Real> ConstrainedSystem<T> {
    /// Prepares the restriction for matrices sharing the pattern of
    /// `pattern`.
    pub fn new(pattern: &CsrMatrix<T>, constraints: &Constraints<T>) -> Result<Self> {
        if pattern.nrows() != constraints.len() || pattern.ncols() != constraints.len() {
            return Err(invalid("constraints and matrix sizes differ"));
        }
        let free = constraints.free_indices();
        let mut local = vec![None; constraints.len()];
        for (k, &f) in free.iter().enumerate() {
            local[f] = Some(k);
        }
        let sub = Submatrix::extract(pattern, &free, &local);
        Ok(Self {
            rhs: vec![T::zero(); free.len()],
            free,
            local,
            sub,
            values: constraints.values.clone(),
            constrained: constraints.kinds.iter().map(|k| k.is_constrained()).collect(),
        })
    }

    /// Loads matrix values and the reduced right-hand side
    /// `F_f - A_fc u_c`.
    pub fn update(&mut self, matrix: &CsrMatrix<T>, load: &[T]) {
        self.sub.refresh(matrix);
        for (k, &r) in self.free.iter().enumerate() {
            let (cols, vals) = matrix.row(r);
            let mut s = load[r];
            for (&c, &v) in cols.iter().zip(vals) {
                if self.constrained[c] {
                    s -= v * self.values[c];
                }
            }
            self.rhs[k] = s;
        }
    }

    pub fn matrix(&self) -> &CsrMatrix<T> {
        self.sub.matrix()
    }

    pub fn rhs(&self) -> &[T] {
        &self.rhs
    }

    pub fn free_indices(&self) -> &[usize] {
        &self.free
    }

    pub fn local_index(&self, global: usize) -> Option<usize> {
        self.local[global]
    }

    /// Values of the free entries of a full vector.
    pub fn restrict(&self, full: &[T]) -> Vec<T> {
        self.free.iter().map(|&k| full[k]).collect()
    }

    /// Full vector from free values and the constrained data.
    pub fn expand(&self, free: &[T]) -> Vec<T> {
        let mut out = self.values.clone();
        for (&k, &v) in self.free.iter().zip(free) {
            out[k] = v;
        }
        out
    }

    /// Solves the reduced system and returns the full coefficient vector.
    pub fn solve(&self, solver: &mut LinearSolver) -> Result<Vec<T>> {
        let x = solver.solve(self.matrix(), &self.rhs)?;
        Ok(self.expand(&x))
    }
}

/// Restricts `system` to the free control points of `constraints`.
pub fn apply_constraints<T: Real>(system: &SystemMatrix<T>, constraints: &Constraints<T>) -> Result<ConstrainedSystem<T>> {
    let mut c = ConstrainedSystem::new(&system.matrix, constraints)?;
    c.update(&system.matrix, &system.load);
    Ok(c)
}

/// Errors of a discrete solution against an exact one over the whole
/// (space-time) domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms<T> {
    /// `|u - u_h|_L2`, relative when `relative` is set.
    pub l2: T,
    /// Seminorm of the full (space-time) gradient error, relative when
    /// `relative` is set.
    pub h1: T,
    /// False when the exact solution has a vanishing norm and the values are
    /// absolute.
    pub relative: bool,
}

/// Squared error integrals `(|e|^2, |grad e|^2, |u|^2, |grad u|^2)`.
pub fn error_integrals<T: Real>(
    space: &TensorSpace<T>,
    coeffs: &[T],
    exact: &dyn Fn(&[T]) -> T,
    exact_gradient: &dyn Fn(&[T], &mut [T]),
    quadrature_points: usize,
) -> [T; 4] {
    let ndir = space.num_directions();
    let mut acc = [T::zero(); 4];
    let mut g = vec![T::zero(); ndir];
    for_each_element(space, quadrature_points, |el| {
        let nloc = el.nloc;
        for (q, &w) in el.weights.iter().enumerate() {
            let pt = &el.points[q][..ndir];
            let mut uh = T::zero();
            let mut gh = [T::zero(); MAX_DIRECTIONS];
            for l in 0..nloc {
                let c = coeffs[el.globals[l]];
                uh += c * el.values[q * nloc + l];
                for a in 0..ndir {
                    gh[a] += c * el.grads[(q * nloc + l) * ndir + a];
                }
            }
            let u = exact(pt);
            exact_gradient(pt, &mut g);
            acc[0] += w * (u - uh) * (u - uh);
            acc[2] += w * u * u;
            for a in 0..ndir {
                acc[1] += w * (g[a] - gh[a]) * (g[a] - gh[a]);
                acc[3] += w * g[a] * g[a];
            }
        }
    });
    acc
}

/// Converts accumulated squared integrals into (relative) norms.
pub fn norms_from_integrals<T: Real>(acc: [T; 4]) -> ErrorNorms<T> {
    let relative = acc[2] > T::zero() && acc[3] > T::zero();
    if relative {
        ErrorNorms {
            l2: (acc[0] / acc[2]).sqrt(),
            h1: (acc[1] / acc[3]).sqrt(),
            relative,
        }
    } else {
        ErrorNorms {
            l2: acc[0].sqrt(),
            h1: acc[1].sqrt(),
            relative,
        }
    }
}

/// Relative L2 norm and H1 seminorm of the error, integrated with
/// `p + 3` Gauss points per direction and span.
pub fn error_norms<T: Real>(
    space: &TensorSpace<T>,
    coeffs: &[T],
    exact: &dyn Fn(&[T]) -> T,
    exact_gradient: &dyn Fn(&[T], &mut [T]),
) -> Result<ErrorNorms<T>> {
    if coeffs.len() != space.len() {
        return Err(invalid("coefficient vector does not match the space"));
    }
    Ok(norms_from_integrals(error_integrals(
        space,
        coeffs,
        exact,
        exact_gradient,
        space.degree() + 3,
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::solve_linear;
    use approx::assert_abs_diff_eq;

    #[test]
    fn steady_linear_convection_stencil() {
        let space = TensorSpace::<f64>::uniform(&[1.0], &[4], 1, false).unwrap();
        let problem = ProblemData::new(1, false).with_constant_velocity(&[1.0]);
        let sys = assemble_galerkin(&space, &problem).unwrap();
        let k = sys.matrix.to_dense();
        // interior rows: (-1/2, 0, 1/2)
        for r in 1..4 {
            assert_abs_diff_eq!(k[r][r - 1], -0.5, epsilon = 1e-15);
            assert_abs_diff_eq!(k[r][r], 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(k[r][r + 1], 0.5, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(k[0][0], -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(k[4][4], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn mass_sums_to_domain_measure() {
        let space = TensorSpace::<f64>::uniform(&[2.0, 0.5], &[3, 4], 2, true).unwrap();
        let m = assemble_mass(&space);
        let total: f64 = m.values().iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-13);
        let kv = space.direction(0);
        let sums = m.row_sums();
        // corner basis integral: product of 1D end-basis integrals h/(p+1)
        let h0 = kv.span_length() / 3.0;
        let h1 = space.direction(1).span_length() / 3.0;
        assert_abs_diff_eq!(sums[0], h0 * h1, epsilon = 1e-14);
    }

    #[test]
    fn time_derivative_rows_sum_to_zero() {
        let space = TensorSpace::<f64>::uniform(&[1.0, 1.0], &[5, 4], 2, true).unwrap();
        let problem = ProblemData::new(1, true).with_diffusion(0.3).with_constant_velocity(&[0.7]);
        let sys = assemble_galerkin(&space, &problem).unwrap();
        for s in sys.matrix.row_sums() {
            assert!(s.abs() < 1e-13);
        }
    }

    #[test]
    fn constant_data_reproduced() {
        let space = TensorSpace::<f64>::uniform(&[1.0, 1.0], &[4, 4], 2, true).unwrap();
        let problem = ProblemData::new(1, true)
            .with_diffusion(1.0)
            .with_dirichlet(|_| 2.5)
            .with_initial(|_| 2.5);
        let sys = assemble_galerkin(&space, &problem).unwrap();
        let c = Constraints::from_problem(&space, &problem).unwrap();
        let red = apply_constraints(&sys, &c).unwrap();
        let u = red.solve(&mut LinearSolver::new()).unwrap();
        for v in u {
            assert_abs_diff_eq!(v, 2.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn homogeneous_data_keeps_load() {
        let space = TensorSpace::<f64>::uniform(&[1.0, 1.0], &[3, 3], 1, true).unwrap();
        let problem = ProblemData::new(1, true).with_diffusion(1.0).with_source(|x| x[0] + x[1]);
        let sys = assemble_galerkin(&space, &problem).unwrap();
        let c = Constraints::from_problem(&space, &problem).unwrap();
        let red = apply_constraints(&sys, &c).unwrap();
        assert_eq!(red.rhs(), red.restrict(&sys.load).as_slice());
        let x = solve_linear(red.matrix(), red.rhs()).unwrap();
        assert_eq!(x.len(), 6);
    }

    #[test]
    fn interpolated_linear_has_zero_error() {
        let space = TensorSpace::<f64>::uniform(&[1.0, 2.0], &[3, 5], 2, true).unwrap();
        let f = |x: &[f64]| 1.0 + x[0] - 2.0 * x[1];
        let coeffs: Vec<f64> = (0..space.len())
            .map(|k| f(&space.greville_point(&space.unflatten(k)).unwrap()))
            .collect();
        let e = error_norms(&space, &coeffs, &f, &|_, g| {
            g[0] = 1.0;
            g[1] = -2.0;
        })
        .unwrap();
        assert!(e.relative && e.l2 < 1e-12 && e.h1 < 1e-12);
        let z = error_norms(&space, &vec![0.0; space.len()], &|_| 0.0, &|_, g| g.fill(0.0)).unwrap();
        assert!(!z.relative && z.l2 == 0.0);
    }
}
