//! Tensor-product space-time spline spaces.
//!
//! Control points are addressed by [`MultiIndex`] (zero-based, one component
//! per direction, time last) or by a flat index. Flattening is lexicographic
//! with the first direction fastest and time slowest, so each time layer is a
//! contiguous block.

use std::fmt;
use std::ops::Deref;

use crate::error::{invalid, Error, Result};
use crate::problem::ProblemData;
use crate::scalar::Real;
use crate::splines::KnotVector;

pub const MAX_DIRECTIONS: usize = 3;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    comps: [usize; MAX_DIRECTIONS],
    len: u8,
}

impl MultiIndex {
    pub fn new(comps: &[usize]) -> Self {
        assert!(comps.len() <= MAX_DIRECTIONS, "too many directions");
        let mut c = [0; MAX_DIRECTIONS];
        c[..comps.len()].copy_from_slice(comps);
        Self {
            comps: c,
            len: comps.len() as u8,
        }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.comps[..self.len as usize]
    }

    /// Index shifted by `offset`, or `None` when a component would go
    /// negative.
    pub fn offset(&self, offset: &[isize]) -> Option<Self> {
        let mut out = *self;
        for (c, &o) in out.comps[..self.len as usize].iter_mut().zip(offset) {
            let v = *c as isize + o;
            if v < 0 {
                return None;
            }
            *c = v as usize;
        }
        Some(out)
    }

    pub(crate) fn set(&mut self, alpha: usize, value: usize) {
        self.comps[alpha] = value;
    }

    /// Largest componentwise distance to `other`.
    pub fn chebyshev_distance(&self, other: &Self) -> usize {
        self.iter()
            .zip(other.iter())
            .map(|(&a, &b)| a.abs_diff(b))
            .max()
            .unwrap_or(0)
    }
}

impl Deref for MultiIndex {
    type Target = [usize];
    fn deref(&self) -> &[usize] {
        self.as_slice()
    }
}

impl<const N: usize> From<[usize; N]> for MultiIndex {
    fn from(c: [usize; N]) -> Self {
        Self::new(&c)
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, c) in self.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Role of a control point with respect to the boundary data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Free,
    /// Spatial boundary control point carrying Dirichlet (inflow) data.
    Dirichlet,
    /// First time layer, carrying initial data.
    Initial,
}

impl NodeKind {
    pub fn is_constrained(self) -> bool {
        self != NodeKind::Free
    }
}

/// Symmetric point of a neighbor pair together with its interpolation
/// stencil on the facet of the neighbor box where it lies.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricPoint<T> {
    pub point: Vec<T>,
    /// `(control point, weight)`; weights are nonnegative and sum to one.
    pub stencil: Vec<(MultiIndex, T)>,
    /// Distance from the Greville point of the center to `point`.
    pub distance: T,
}

/// Tensor product of open knot vectors sharing one degree.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSpace<T> {
    directions: Vec<KnotVector<T>>,
    transient: bool,
    greville: Vec<Vec<T>>,
    shape: Vec<usize>,
    strides: Vec<usize>,
}

impl<T: Real> TensorSpace<T> {
    /// `directions` lists the spatial knot vectors followed, when
    /// `transient`, by the temporal one.
    pub fn new(directions: Vec<KnotVector<T>>, transient: bool) -> Result<Self> {
        let n = directions.len();
        if n == 0 || n > MAX_DIRECTIONS {
            return Err(invalid(format!("{n} directions not supported")));
        }
        if transient && n < 2 {
            return Err(invalid("transient space needs a spatial direction"));
        }
        let p = directions[0].degree();
        if directions.iter().any(|k| k.degree() != p) {
            return Err(invalid("all directions must share one degree"));
        }
        let shape: Vec<usize> = directions.iter().map(|k| k.num_basis()).collect();
        let mut strides = vec![1; n];
        for a in 1..n {
            strides[a] = strides[a - 1] * shape[a - 1];
        }
        let greville = directions.iter().map(|k| k.greville()).collect();
        Ok(Self {
            directions,
            transient,
            greville,
            shape,
            strides,
        })
    }

    /// Space with open uniform knot vectors on `[0, extent]` per direction.
    pub fn uniform(extents: &[T], spans: &[usize], degree: usize, transient: bool) -> Result<Self> {
        if extents.len() != spans.len() {
            return Err(invalid("extents and span counts differ in length"));
        }
        let dirs = extents
            .iter()
            .zip(spans)
            .map(|(&l, &m)| KnotVector::open_uniform(l, m, degree))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dirs, transient)
    }

    pub fn degree(&self) -> usize {
        self.directions[0].degree()
    }

    pub fn num_directions(&self) -> usize {
        self.directions.len()
    }

    pub fn spatial_dim(&self) -> usize {
        self.directions.len() - usize::from(self.transient)
    }

    pub fn is_transient(&self) -> bool {
        self.transient
    }

    pub fn direction(&self, alpha: usize) -> &KnotVector<T> {
        &self.directions[alpha]
    }

    pub fn directions(&self) -> &[KnotVector<T>] {
        &self.directions
    }

    pub fn time_direction(&self) -> Option<&KnotVector<T>> {
        self.transient.then(|| &self.directions[self.directions.len() - 1])
    }

    /// Index of the time direction, if any.
    pub fn time_axis(&self) -> Option<usize> {
        self.transient.then(|| self.directions.len() - 1)
    }

    /// Control points per direction.
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Total number of control points.
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest spatial knot spacing.
    pub fn mesh_size(&self) -> T {
        self.directions[..self.spatial_dim()]
            .iter()
            .map(|k| k.span_length())
            .fold(T::zero(), T::max)
    }

    /// Largest extent among the spatial directions.
    pub fn max_spatial_extent(&self) -> T {
        self.directions[..self.spatial_dim()]
            .iter()
            .map(|k| k.length())
            .fold(T::zero(), T::max)
    }

    pub fn check_index(&self, i: &MultiIndex) -> Result<()> {
        if i.len() != self.num_directions() || i.iter().zip(&self.shape).any(|(&c, &n)| c >= n) {
            return Err(invalid(format!("multi-index {i:?} outside shape {:?}", self.shape)));
        }
        Ok(())
    }

    #[inline]
    pub fn flatten(&self, i: &MultiIndex) -> usize {
        i.iter().zip(&self.strides).map(|(&c, &s)| c * s).sum()
    }

    #[inline]
    pub fn unflatten(&self, mut flat: usize) -> MultiIndex {
        let mut c = [0; MAX_DIRECTIONS];
        for (a, &n) in self.shape.iter().enumerate() {
            c[a] = flat % n;
            flat /= n;
        }
        MultiIndex {
            comps: c,
            len: self.shape.len() as u8,
        }
    }

    pub fn greville_coords(&self, alpha: usize) -> &[T] {
        &self.greville[alpha]
    }

    pub fn greville_point(&self, i: &MultiIndex) -> Result<Vec<T>> {
        self.check_index(i)?;
        Ok(self.greville_of(i))
    }

    pub(crate) fn greville_of(&self, i: &MultiIndex) -> Vec<T> {
        i.iter()
            .enumerate()
            .map(|(a, &c)| self.greville[a][c])
            .collect()
    }

    /// Calls `f` for every index `j` with `|i - j|_inf <= radius` inside the
    /// space, in flat order.
    pub fn for_each_in_box(&self, i: &MultiIndex, radius: usize, mut f: impl FnMut(MultiIndex)) {
        let n = self.num_directions();
        let mut lo = [0; MAX_DIRECTIONS];
        let mut hi = [0; MAX_DIRECTIONS];
        for a in 0..n {
            lo[a] = i[a].saturating_sub(radius);
            hi[a] = (i[a] + radius).min(self.shape[a] - 1);
        }
        let mut cur = MultiIndex::new(&lo[..n]);
        loop {
            f(cur);
            let mut a = 0;
            loop {
                if a == n {
                    return;
                }
                if cur[a] < hi[a] {
                    cur.comps[a] += 1;
                    break;
                }
                cur.comps[a] = lo[a];
                a += 1;
            }
        }
    }

    /// Indices within Chebyshev distance `radius` of `i`, `i` included.
    pub fn index_box(&self, i: &MultiIndex, radius: usize) -> Result<Vec<MultiIndex>> {
        self.check_index(i)?;
        let mut out = Vec::new();
        self.for_each_in_box(i, radius, |j| out.push(j));
        Ok(out)
    }

    /// Neighbor set: indices at Chebyshev distance at most one.
    pub fn neighbors(&self, i: &MultiIndex) -> Result<Vec<MultiIndex>> {
        self.index_box(i, 1)
    }

    /// Indices whose basis functions overlap the support of basis `i`.
    pub fn support_set(&self, i: &MultiIndex) -> Result<Vec<MultiIndex>> {
        self.index_box(i, self.degree())
    }

    /// Point where the ray from the Greville point of `j` through that of
    /// `i` leaves the neighbor box of `i`, with its facet interpolation
    /// stencil.
    ///
    /// Fails with [`Error::NotAvailable`] when `i` has no neighbor on the
    /// exit side in some direction in which `j` differs from `i`.
    pub fn symmetric_point(&self, i: &MultiIndex, j: &MultiIndex) -> Result<SymmetricPoint<T>> {
        self.check_index(i)?;
        self.check_index(j)?;
        if i.chebyshev_distance(j) != 1 {
            return Err(invalid(format!("{j:?} is not a neighbor of {i:?}")));
        }
        let n = self.num_directions();
        let xi = self.greville_of(i);
        // per direction: step towards the exit side (0 when j agrees with i)
        let mut step = [0isize; MAX_DIRECTIONS];
        let mut exit_param = [T::infinity(); MAX_DIRECTIONS];
        let mut ray = [T::zero(); MAX_DIRECTIONS];
        for a in 0..n {
            let s = i[a] as isize - j[a] as isize;
            if s == 0 {
                continue;
            }
            let target = i[a] as isize + s;
            if target < 0 || target as usize >= self.shape[a] {
                return Err(Error::NotAvailable(format!(
                    "{i:?} has no neighbor opposite to {j:?} in direction {a}"
                )));
            }
            step[a] = s;
            ray[a] = xi[a] - self.greville[a][j[a]];
            exit_param[a] = (self.greville[a][target as usize] - xi[a]) / ray[a];
        }
        let t_exit = exit_param[..n].iter().copied().fold(T::infinity(), T::min);
        let snap = T::lit(64.0) * T::epsilon();

        let mut point = xi.clone();
        let mut per_dir: Vec<Vec<(usize, T)>> = Vec::with_capacity(n);
        for a in 0..n {
            if step[a] == 0 {
                per_dir.push(vec![(i[a], T::one())]);
                continue;
            }
            let far = (i[a] as isize + step[a]) as usize;
            if exit_param[a] <= t_exit * (T::one() + snap) {
                point[a] = self.greville[a][far];
                per_dir.push(vec![(far, T::one())]);
            } else {
                let c = xi[a] + t_exit * ray[a];
                point[a] = c;
                let w = ((c - xi[a]) / (self.greville[a][far] - xi[a]))
                    .max(T::zero())
                    .min(T::one());
                let mut nodes = Vec::with_capacity(2);
                if w < T::one() {
                    nodes.push((i[a], T::one() - w));
                }
                if w > T::zero() {
                    nodes.push((far, w));
                }
                per_dir.push(nodes);
            }
        }

        let mut stencil = vec![(MultiIndex::new(&i[..n]), T::one())];
        for (a, nodes) in per_dir.iter().enumerate() {
            let mut next = Vec::with_capacity(stencil.len() * nodes.len());
            for (idx, w) in &stencil {
                for &(c, wa) in nodes {
                    let mut m = *idx;
                    m.set(a, c);
                    next.push((m, *w * wa));
                }
            }
            stencil = next;
        }
        let distance = point
            .iter()
            .zip(&xi)
            .map(|(&p, &x)| (p - x) * (p - x))
            .sum::<T>()
            .sqrt();
        Ok(SymmetricPoint {
            point,
            stencil,
            distance,
        })
    }

    /// Labels every control point as initial, Dirichlet or free.
    ///
    /// The first time layer is initial. Spatial boundary control points are
    /// Dirichlet when the diffusion is positive; for pure transport only
    /// those on a face with inflow (`beta . n < 0` at the Greville point).
    pub fn classify_boundary(&self, problem: &ProblemData<T>) -> Result<Vec<NodeKind>> {
        problem.validate()?;
        if problem.spatial_dim != self.spatial_dim() || problem.transient != self.transient {
            return Err(invalid("problem and space dimensions differ"));
        }
        let d = self.spatial_dim();
        let mut beta = vec![T::zero(); d];
        let mut kinds = vec![NodeKind::Free; self.len()];
        for (flat, kind) in kinds.iter_mut().enumerate() {
            let i = self.unflatten(flat);
            if self.transient && i[d] == 0 {
                *kind = NodeKind::Initial;
                continue;
            }
            let on_boundary = (0..d).any(|a| i[a] == 0 || i[a] + 1 == self.shape[a]);
            if !on_boundary {
                continue;
            }
            if problem.diffusion > T::zero() {
                *kind = NodeKind::Dirichlet;
                continue;
            }
            (problem.velocity)(&self.greville_of(&i), &mut beta);
            let inflow = (0..d).any(|a| {
                (i[a] == 0 && beta[a] > T::zero()) || (i[a] + 1 == self.shape[a] && beta[a] < T::zero())
            });
            if inflow {
                *kind = NodeKind::Dirichlet;
            }
        }
        Ok(kinds)
    }

    /// Flat indices of the layer `i_alpha == index`, in flat order.
    pub fn layer(&self, alpha: usize, index: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&f| (f / self.strides[alpha]) % self.shape[alpha] == index)
            .collect()
    }

    /// Value of the spline with control values `coeffs` at `point`.
    pub fn evaluate(&self, coeffs: &[T], point: &[T]) -> T {
        self.evaluate_with_gradient(coeffs, point, false).0
    }

    /// Value and gradient (all directions) at `point`.
    pub fn evaluate_gradient(&self, coeffs: &[T], point: &[T]) -> (T, Vec<T>) {
        self.evaluate_with_gradient(coeffs, point, true)
    }

    fn evaluate_with_gradient(&self, coeffs: &[T], point: &[T], grad: bool) -> (T, Vec<T>) {
        let n = self.num_directions();
        let p = self.degree();
        let nd = usize::from(grad);
        let mut spans = [0; MAX_DIRECTIONS];
        let mut vals: Vec<Vec<Vec<T>>> = Vec::with_capacity(n);
        for a in 0..n {
            let k = &self.directions[a];
            let x = point[a].max(k.start()).min(k.end());
            spans[a] = k.find_span(x);
            vals.push(k.basis_with_derivatives(spans[a], x, nd));
        }
        let mut value = T::zero();
        let mut gradient = vec![T::zero(); if grad { n } else { 0 }];
        let local = (p + 1).pow(n as u32);
        for l in 0..local {
            let mut rem = l;
            let mut flat = 0;
            let mut loc = [0; MAX_DIRECTIONS];
            for a in 0..n {
                loc[a] = rem % (p + 1);
                rem /= p + 1;
                flat += (spans[a] - p + loc[a]) * self.strides[a];
            }
            let c = coeffs[flat];
            let mut b = T::one();
            for a in 0..n {
                b *= vals[a][0][loc[a]];
            }
            value += c * b;
            if grad {
                for (g, gv) in gradient.iter_mut().enumerate() {
                    let mut d = T::one();
                    for a in 0..n {
                        d *= vals[a][usize::from(a == g)][loc[a]];
                    }
                    *gv += c * d;
                }
            }
        }
        (value, gradient)
    }
}
