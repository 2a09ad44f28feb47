//! Shock detector, artificial diffusion and the graph-Laplacian
//! stabilization, in plain and regularized (twice differentiable) form,
//! together with the discrete maximum principle audit.

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use crate::sparse::CsrMatrix;
use crate::tensor::TensorSpace;

/// User-scale stabilization parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilizationParams<T> {
    /// Detector exponent.
    pub q: T,
    pub regularized: bool,
    pub sigma: T,
    pub epsilon: T,
    pub gamma: T,
    /// Characteristic length; `None` uses the largest spatial extent.
    pub length: Option<T>,
}

impl<T: Real> Default for StabilizationParams<T> {
    fn default() -> Self {
        Self {
            q: T::lit(10.0),
            regularized: true,
            sigma: T::lit(1e-6),
            epsilon: T::lit(1e-8),
            gamma: T::lit(1e-10),
            length: None,
        }
    }
}

impl<T: Real> StabilizationParams<T> {
    pub fn plain(q: T) -> Self {
        Self {
            q,
            regularized: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q >= T::one()) {
            return Err(invalid("detector exponent q must be at least 1"));
        }
        if !(self.sigma >= T::zero() && self.epsilon >= T::zero()) {
            return Err(invalid("sigma and epsilon must be nonnegative"));
        }
        if self.regularized && !(self.gamma > T::zero()) {
            return Err(invalid("gamma must be positive for the regularized detector"));
        }
        if let Some(l) = self.length {
            if !(l > T::zero()) {
                return Err(invalid("characteristic length must be positive"));
            }
        }
        Ok(())
    }

    /// Mesh-dependent values `sigma_h = sigma |beta|^2 L^(2(d-3)) h^(2(p+1))`,
    /// `eps_h = eps L^-4 h^2`, `gamma_h = gamma / L`.
    pub fn scaled(&self, space: &TensorSpace<T>, beta_max: T) -> Result<ScaledParams<T>> {
        self.validate()?;
        let l = self.length.unwrap_or_else(|| space.max_spatial_extent());
        let h = space.mesh_size();
        let d = space.spatial_dim() as i32;
        let p = space.degree() as i32;
        Ok(ScaledParams {
            q: self.q,
            regularized: self.regularized,
            sigma_h: self.sigma * beta_max * beta_max * l.powi(2 * (d - 3)) * h.powi(2 * (p + 1)),
            epsilon_h: self.epsilon * l.powi(-4) * h * h,
            gamma_h: self.gamma / l,
        })
    }
}

/// Parameters as used by the detector and the artificial diffusion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledParams<T> {
    pub q: T,
    pub regularized: bool,
    pub sigma_h: T,
    pub epsilon_h: T,
    pub gamma_h: T,
}

impl<T: Real> ScaledParams<T> {
    pub fn plain(q: T) -> Self {
        Self {
            q,
            regularized: false,
            sigma_h: T::zero(),
            epsilon_h: T::zero(),
            gamma_h: T::zero(),
        }
    }
}

/// `sqrt((x - y)^2 + sigma) / 2 + (x + y) / 2`.
#[inline]
pub fn smoothed_max<T: Real>(x: T, y: T, sigma: T) -> T {
    let half = T::lit(0.5);
    ((x - y) * (x - y) + sigma).sqrt() * half + (x + y) * half
}

/// Regularized absolute value from above, `sqrt(x^2 + eps)`.
#[inline]
pub fn abs_upper<T: Real>(x: T, eps: T) -> T {
    (x * x + eps).sqrt()
}

/// Regularized absolute value from below, `x^2 / sqrt(x^2 + eps)`.
#[inline]
pub fn abs_lower<T: Real>(x: T, eps: T) -> T {
    let s = (x * x + eps).sqrt();
    if s == T::zero() {
        T::zero()
    } else {
        x * x / s
    }
}

/// `2x^4 - 5x^3 + 3x^2 + x` below one, one above.
#[inline]
pub fn smooth_limiter<T: Real>(x: T) -> T {
    if x >= T::one() {
        return T::one();
    }
    let x2 = x * x;
    T::lit(2.0) * x2 * x2 - T::lit(5.0) * x2 * x + T::lit(3.0) * x2 + x
}

/// One direction pair of a detector stencil.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorPair<T> {
    pub j: usize,
    /// `1 / |x_j - x_i|`.
    pub inv_dist: T,
    /// Interpolation stencil of the symmetric point, flat indices.
    pub sym: Vec<(usize, T)>,
    /// `1 / |x_sym - x_i|`.
    pub inv_sym_dist: T,
}

/// Direction pairs available at every control point.
///
/// Pairs whose symmetric point does not exist, because the neighbor shell is
/// cut by the boundary of the index box, are left out.
#[derive(Debug, Clone)]
pub struct DetectorStencil<T> {
    offsets: Vec<usize>,
    pairs: Vec<DetectorPair<T>>,
    /// Number of neighbors (excluding the center) of each point.
    neighbor_counts: Vec<usize>,
}

impl<T: Real> DetectorStencil<T> {
    pub fn new(space: &TensorSpace<T>) -> Result<Self> {
        let n = space.len();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut pairs = Vec::new();
        let mut neighbor_counts = Vec::with_capacity(n);
        for flat in 0..n {
            let i = space.unflatten(flat);
            let xi = space.greville_of(&i);
            let mut count = 0;
            let mut err = None;
            space.for_each_in_box(&i, 1, |j| {
                if j == i || err.is_some() {
                    return;
                }
                count += 1;
                match space.symmetric_point(&i, &j) {
                    Ok(sp) => {
                        let xj = space.greville_of(&j);
                        let r = xj
                            .iter()
                            .zip(&xi)
                            .map(|(&a, &b)| (a - b) * (a - b))
                            .sum::<T>()
                            .sqrt();
                        pairs.push(DetectorPair {
                            j: space.flatten(&j),
                            inv_dist: T::one() / r,
                            sym: sp.stencil.iter().map(|(m, w)| (space.flatten(m), *w)).collect(),
                            inv_sym_dist: T::one() / sp.distance,
                        });
                    }
                    Err(Error::NotAvailable(_)) => {}
                    Err(e) => err = Some(e),
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
            neighbor_counts.push(count);
            offsets.push(pairs.len());
        }
        Ok(Self {
            offsets,
            pairs,
            neighbor_counts,
        })
    }

    pub fn len(&self) -> usize {
        self.neighbor_counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbor_counts.is_empty()
    }

    pub fn pairs(&self, i: usize) -> &[DetectorPair<T>] {
        &self.pairs[self.offsets[i]..self.offsets[i + 1]]
    }

    /// True when no direction pair of `i` had to be omitted.
    pub fn is_full(&self, i: usize) -> bool {
        self.offsets[i + 1] - self.offsets[i] == self.neighbor_counts[i]
    }

    /// Detector value at every control point.
    pub fn detector_all(&self, u: &[T], params: &ScaledParams<T>) -> Vec<T> {
        (0..self.len()).map(|i| self.detector(u, i, params)).collect()
    }

    /// Detector value at `i`.
    pub fn detector(&self, u: &[T], i: usize, params: &ScaledParams<T>) -> T {
        let ui = u[i];
        let mut sum_jump = T::zero();
        let mut den = T::zero();
        for pr in self.pairs(i) {
            let us: T = pr.sym.iter().map(|&(k, w)| w * u[k]).sum();
            let a = (u[pr.j] - ui) * pr.inv_dist;
            let b = (us - ui) * pr.inv_sym_dist;
            sum_jump += a + b;
            if params.regularized {
                den += abs_lower(a, params.epsilon_h) + abs_lower(b, params.epsilon_h);
            } else {
                den += a.abs() + b.abs();
            }
        }
        if params.regularized {
            let ratio = (abs_upper(sum_jump, params.epsilon_h) + params.gamma_h) / (den + params.gamma_h);
            smooth_limiter(ratio).powf(params.q)
        } else if den == T::zero() {
            T::zero()
        } else {
            (sum_jump.abs() / den).min(T::one()).powf(params.q)
        }
    }
}

/// Jump and mean of the directional gradient approximations at `i` in the
/// direction of neighbor `j`.
pub fn jump_and_mean<T: Real>(space: &TensorSpace<T>, u: &[T], i: usize, j: usize) -> Result<(T, T)> {
    if u.len() != space.len() || i >= u.len() || j >= u.len() {
        return Err(invalid("index or coefficient vector outside the space"));
    }
    let (mi, mj) = (space.unflatten(i), space.unflatten(j));
    let sp = space.symmetric_point(&mi, &mj)?;
    let xi = space.greville_of(&mi);
    let xj = space.greville_of(&mj);
    let r = xj.iter().zip(&xi).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>().sqrt();
    let us: T = sp.stencil.iter().map(|(m, w)| *w * u[space.flatten(m)]).sum();
    let a = (u[j] - u[i]) / r;
    let b = (us - u[i]) / sp.distance;
    Ok((a + b, (a.abs() + b.abs()) * T::lit(0.5)))
}

/// Artificial diffusion of a pair from `alpha_i K_ij` and `alpha_j K_ji`.
#[inline]
pub fn pair_diffusion<T: Real>(aik: T, ajk: T, params: &ScaledParams<T>) -> T {
    if params.regularized {
        smoothed_max(smoothed_max(aik, ajk, params.sigma_h), T::zero(), params.sigma_h)
    } else {
        aik.max(ajk).max(T::zero())
    }
}

/// Artificial diffusion `nu_ij` for `j != i` in the pattern of `k`.
pub fn artificial_diffusion<T: Real>(k: &CsrMatrix<T>, alpha: &[T], i: usize, j: usize, params: &ScaledParams<T>) -> T {
    pair_diffusion(alpha[i] * k.get(i, j), alpha[j] * k.get(j, i), params)
}

/// Detector values, artificial diffusions and stabilization matrix of one
/// iterate.
#[derive(Debug, Clone)]
pub struct StabilizationState<T> {
    pub alpha: Vec<T>,
    /// `nu_ij` off the diagonal, `nu_ii = sum_j nu_ij` on it.
    pub nu: CsrMatrix<T>,
    /// `B_ij = -nu_ij`, `B_ii = nu_ii`.
    pub matrix: CsrMatrix<T>,
}

/// Builds the stabilization for a fixed Galerkin operator.
#[derive(Debug, Clone)]
pub struct Stabilizer<T> {
    stencil: DetectorStencil<T>,
    galerkin: CsrMatrix<T>,
    transpose: Vec<usize>,
    diag: Vec<usize>,
    params: ScaledParams<T>,
}

impl<T: Real> Stabilizer<T> {
    /// `galerkin` is the operator before constraints are applied.
    pub fn new(space: &TensorSpace<T>, galerkin: &CsrMatrix<T>, params: ScaledParams<T>) -> Result<Self> {
        if galerkin.nrows() != space.len() {
            return Err(invalid("operator does not match the space"));
        }
        let stencil = DetectorStencil::new(space)?;
        Ok(Self::with_stencil(stencil, galerkin, params)?)
    }

    pub fn with_stencil(stencil: DetectorStencil<T>, galerkin: &CsrMatrix<T>, params: ScaledParams<T>) -> Result<Self> {
        let transpose = galerkin.transpose_positions()?;
        let diag = (0..galerkin.nrows())
            .map(|r| galerkin.position(r, r).ok_or_else(|| invalid("operator pattern lacks a diagonal entry")))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            stencil,
            galerkin: galerkin.clone(),
            transpose,
            diag,
            params,
        })
    }

    pub fn params(&self) -> &ScaledParams<T> {
        &self.params
    }

    pub fn stencil(&self) -> &DetectorStencil<T> {
        &self.stencil
    }

    pub fn galerkin(&self) -> &CsrMatrix<T> {
        &self.galerkin
    }

    /// Stabilization of iterate `u`.
    pub fn state(&self, u: &[T]) -> StabilizationState<T> {
        let alpha = self.stencil.detector_all(u, &self.params);
        self.state_from_alpha(alpha)
    }

    pub fn state_from_alpha(&self, alpha: Vec<T>) -> StabilizationState<T> {
        let k = &self.galerkin;
        let kv = k.values();
        let mut nu = k.clone();
        let mut b = k.clone();
        nu.fill_zero();
        b.fill_zero();
        for r in 0..k.nrows() {
            let mut total = T::zero();
            for pos in k.row_range(r) {
                let c = k.col_idx()[pos];
                if c == r {
                    continue;
                }
                let v = pair_diffusion(alpha[r] * kv[pos], alpha[c] * kv[self.transpose[pos]], &self.params);
                nu.values_mut()[pos] = v;
                b.values_mut()[pos] = -v;
                total += v;
            }
            nu.values_mut()[self.diag[r]] = total;
            b.values_mut()[self.diag[r]] = total;
        }
        StabilizationState { alpha, nu, matrix: b }
    }

    /// `K + B(u)` for iterate `u`.
    pub fn stabilized_operator(&self, u: &[T]) -> (CsrMatrix<T>, StabilizationState<T>) {
        let state = self.state(u);
        let mut kt = self.galerkin.clone();
        for (a, &b) in kt.values_mut().iter_mut().zip(state.matrix.values()) {
            *a += b;
        }
        (kt, state)
    }
}

/// Outcome of the discrete maximum principle audit.
#[derive(Debug, Clone, PartialEq)]
pub struct DmpReport<T> {
    /// Range of the prescribed (boundary and initial) values.
    pub data_min: T,
    pub data_max: T,
    /// Range of the free control values.
    pub min: T,
    pub max: T,
    /// Amount by which the free values leave the data range (zero when they
    /// do not).
    pub violation: T,
    /// Local discrete extrema over the neighbor sets, all control points.
    pub extrema: Vec<usize>,
    /// Free, non-flat extrema at which the sign and row-sum conditions on
    /// the stabilized operator were checked.
    pub theorem1_checked: usize,
    pub theorem1_violations: usize,
    /// Largest positive off-diagonal entry or row-sum defect found at a
    /// checked extremum.
    pub theorem1_max_excess: T,
}

impl<T: Real> DmpReport<T> {
    pub fn satisfies_global(&self, tol: T) -> bool {
        self.violation <= tol
    }
}

/// Audits a solution against the global discrete maximum principle and,
/// when the stabilized operator is given, checks at every free
/// non-flat local extremum `i` that `Kt_ij <= tol` for `j != i` and
/// `|sum_j Kt_ij| <= tol`, with `tol = 1e-10 max |Kt|`.
pub fn dmp_audit<T: Real>(
    space: &TensorSpace<T>,
    u: &[T],
    constrained: &[bool],
    constrained_values: &[T],
    stabilized: Option<&CsrMatrix<T>>,
) -> Result<DmpReport<T>> {
    let n = space.len();
    if u.len() != n || constrained.len() != n || constrained_values.len() != n {
        return Err(invalid("audit inputs do not match the space"));
    }
    let (mut dmin, mut dmax) = (T::infinity(), T::neg_infinity());
    let (mut fmin, mut fmax) = (T::infinity(), T::neg_infinity());
    for k in 0..n {
        if constrained[k] {
            dmin = dmin.min(constrained_values[k]);
            dmax = dmax.max(constrained_values[k]);
        } else {
            fmin = fmin.min(u[k]);
            fmax = fmax.max(u[k]);
        }
    }
    let mut violation = T::zero();
    if dmin.is_finite() && fmin.is_finite() {
        violation = violation.max(dmin - fmin).max(fmax - dmax);
    }
    let tol = stabilized.map_or(T::zero(), |m| T::lit(1e-10) * m.max_abs());
    let mut extrema = Vec::new();
    let mut checked = 0;
    let mut violations = 0;
    let mut excess = T::zero();
    for k in 0..n {
        let i = space.unflatten(k);
        let (mut is_min, mut is_max, mut flat) = (true, true, true);
        space.for_each_in_box(&i, 1, |j| {
            let v = u[space.flatten(&j)];
            is_min &= u[k] <= v;
            is_max &= u[k] >= v;
            flat &= u[k] == v;
        });
        if !(is_min || is_max) {
            continue;
        }
        extrema.push(k);
        let Some(kt) = stabilized else { continue };
        if constrained[k] || flat {
            continue;
        }
        checked += 1;
        let (cols, vals) = kt.row(k);
        let mut worst = T::zero();
        let mut sum = T::zero();
        for (&c, &v) in cols.iter().zip(vals) {
            sum += v;
            if c != k {
                worst = worst.max(v);
            }
        }
        worst = worst.max(sum.abs());
        if worst > tol {
            violations += 1;
        }
        excess = excess.max(worst);
    }
    Ok(DmpReport {
        data_min: dmin,
        data_max: dmax,
        min: fmin,
        max: fmax,
        violation,
        extrema,
        theorem1_checked: checked,
        theorem1_violations: violations,
        theorem1_max_excess: excess,
    })
}
