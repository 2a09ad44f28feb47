//! One-dimensional B-spline machinery on open knot vectors.
//!
//! Basis indices are zero-based: an open vector with `m` nonzero spans and
//! degree `p` carries the functions `B_0 .. B_{m+p-1}`, and basis `B_i` is
//! supported on `[knots[i], knots[i+p+1]]`.
//!
//! Two evaluation routes are provided. [`KnotVector::eval_basis`] and
//! [`KnotVector::eval_basis_derivative`] follow the Cox-de Boor recursion
//! literally and serve the per-index public contract. The assembly kernels
//! use [`KnotVector::basis_with_derivatives`], which returns all `p + 1`
//! nonzero functions of one span in a single sweep.

use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Open knot vector: the first and last `degree + 1` knots coincide.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector<T> {
    degree: usize,
    spans: usize,
    knots: Vec<T>,
}

impl<T: Real> KnotVector<T> {
    /// Open uniform vector on `[0, length]` with `spans` equal spans.
    pub fn open_uniform(length: T, spans: usize, degree: usize) -> Result<Self> {
        Self::open_uniform_on(T::zero(), length, spans, degree)
    }

    /// Open uniform vector on `[start, end]`.
    pub fn open_uniform_on(start: T, end: T, spans: usize, degree: usize) -> Result<Self> {
        if !(end > start) {
            return Err(invalid(format!("empty interval [{start}, {end}]")));
        }
        if spans == 0 {
            return Err(invalid("knot vector needs at least one span"));
        }
        if degree == 0 {
            return Err(invalid("spline degree must be at least 1"));
        }
        let h = (end - start) / T::count(spans);
        let mut knots = Vec::with_capacity(spans + 2 * degree + 1);
        knots.extend(std::iter::repeat(start).take(degree + 1));
        knots.extend((1..spans).map(|k| start + h * T::count(k)));
        knots.extend(std::iter::repeat(end).take(degree + 1));
        Ok(Self {
            degree,
            spans,
            knots,
        })
    }

    /// Builds a knot vector from an explicit open knot sequence.
    pub fn from_knots(knots: Vec<T>, degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(invalid("spline degree must be at least 1"));
        }
        if knots.len() < 2 * degree + 2 {
            return Err(invalid("too few knots for the requested degree"));
        }
        if knots.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(invalid("knots must be nondecreasing"));
        }
        let first = knots[0];
        let last = knots[knots.len() - 1];
        let open_left = knots[..=degree].iter().all(|&k| k == first);
        let open_right = knots[knots.len() - degree - 1..].iter().all(|&k| k == last);
        if !open_left || !open_right || !(last > first) {
            return Err(invalid("knot vector is not open"));
        }
        let mut run = 1;
        for w in knots.windows(2) {
            run = if w[0] == w[1] { run + 1 } else { 1 };
            if run > degree + 1 {
                return Err(invalid("knot repeated more than degree + 1 times"));
            }
        }
        let spans = knots.windows(2).filter(|w| w[0] < w[1]).count();
        Ok(Self {
            degree,
            spans,
            knots,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    /// Number of nonzero spans `m`.
    pub fn spans(&self) -> usize {
        self.spans
    }

    /// Number of basis functions (control points), `m + p`.
    pub fn num_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn start(&self) -> T {
        self.knots[0]
    }

    pub fn end(&self) -> T {
        self.knots[self.knots.len() - 1]
    }

    pub fn length(&self) -> T {
        self.end() - self.start()
    }

    /// Largest distance between consecutive distinct knots.
    pub fn span_length(&self) -> T {
        self.knots
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(T::zero(), T::max)
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.num_basis() {
            return Err(invalid(format!(
                "basis index {i} out of range 0..{}",
                self.num_basis()
            )));
        }
        Ok(())
    }

    fn check_point(&self, x: T) -> Result<()> {
        if !(x >= self.start() && x <= self.end()) {
            return Err(invalid(format!(
                "point {x} outside [{}, {}]",
                self.start(),
                self.end()
            )));
        }
        Ok(())
    }

    /// Value of basis function `i` at `x` by the Cox-de Boor recursion.
    ///
    /// Terms with a vanishing knot difference are dropped, and the right end
    /// of the parameter interval is closed, so the last function equals one
    /// there.
    pub fn eval_basis(&self, i: usize, x: T) -> Result<T> {
        self.check_index(i)?;
        self.check_point(x)?;
        Ok(cox_de_boor(&self.knots, i, self.degree, x))
    }

    /// Derivative of basis function `i` of order 1 or 2 (at most the degree).
    pub fn eval_basis_derivative(&self, i: usize, x: T, order: usize) -> Result<T> {
        self.check_index(i)?;
        self.check_point(x)?;
        if order == 0 || order > 2 || order > self.degree {
            return Err(invalid(format!(
                "derivative order {order} not supported for degree {}",
                self.degree
            )));
        }
        Ok(cox_de_boor_derivative(&self.knots, i, self.degree, order, x))
    }

    /// Greville abscissae, one per basis function.
    pub fn greville(&self) -> Vec<T> {
        let p = self.degree;
        let pf = T::count(p);
        (0..self.num_basis())
            .map(|i| self.knots[i + 1..=i + p].iter().copied().sum::<T>() / pf)
            .collect()
    }

    /// Index `s` of the knot span `[knots[s], knots[s+1])` containing `x`.
    ///
    /// The right endpoint belongs to the last nonempty span. Basis functions
    /// `s - p ..= s` are the ones not vanishing on that span.
    pub fn find_span(&self, x: T) -> usize {
        let n = self.num_basis();
        let p = self.degree;
        if x >= self.knots[n] {
            return n - 1;
        }
        if x <= self.knots[p] {
            return p;
        }
        let (mut lo, mut hi) = (p, n);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if x < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// Iterator over the indices of nonempty knot spans.
    pub fn nonzero_spans(&self) -> impl Iterator<Item = usize> + '_ {
        (self.degree..self.num_basis()).filter(move |&s| self.knots[s] < self.knots[s + 1])
    }

    /// All nonzero basis functions on span `span` and their derivatives up
    /// to `n_deriv`, evaluated at `x`.
    ///
    /// Entry `[k][a]` of the result is the `k`-th derivative of
    /// `B_{span - p + a}`.
    pub fn basis_with_derivatives(&self, span: usize, x: T, n_deriv: usize) -> Vec<Vec<T>> {
        let p = self.degree;
        let u = &self.knots;
        let zero = T::zero();
        let mut ndu = vec![vec![zero; p + 1]; p + 1];
        let mut left = vec![zero; p + 1];
        let mut right = vec![zero; p + 1];
        ndu[0][0] = T::one();
        for j in 1..=p {
            left[j] = x - u[span + 1 - j];
            right[j] = u[span + j] - x;
            let mut saved = zero;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }

        let mut ders = vec![vec![zero; p + 1]; n_deriv + 1];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        let pi = p as isize;
        let mut a = [vec![zero; p + 1], vec![zero; p + 1]];
        for r in 0..=pi {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = T::one();
            for k in 1..=n_deriv.min(p) as isize {
                let mut d = zero;
                let rk = r - k;
                let pk = pi - k;
                if r >= k {
                    a[s2][0] = a[s1][0] / ndu[(pk + 1) as usize][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk as usize];
                }
                let j1 = if rk >= -1 { 1 } else { -rk };
                let j2 = if r - 1 <= pk { k - 1 } else { pi - r };
                for j in j1..=j2 {
                    let (ju, kk) = (j as usize, (rk + j) as usize);
                    a[s2][ju] = (a[s1][ju] - a[s1][ju - 1]) / ndu[(pk + 1) as usize][kk];
                    d += a[s2][ju] * ndu[kk][pk as usize];
                }
                if r <= pk {
                    let ku = k as usize;
                    a[s2][ku] = -a[s1][ku - 1] / ndu[(pk + 1) as usize][r as usize];
                    d += a[s2][ku] * ndu[r as usize][pk as usize];
                }
                ders[k as usize][r as usize] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut factor = T::count(p);
        for k in 1..=n_deriv {
            for v in ders[k].iter_mut() {
                *v *= factor;
            }
            factor *= if p >= k + 1 { T::count(p - k) } else { zero };
        }
        ders
    }
}

/// Span count of the k-refined vector of degree `degree` built from a linear
/// discretization with `base_spans` spans.
///
/// The control-point count `m + p` then equals `base_spans * p + 1`, the node
/// count of a Lagrangian element mesh of the same order.
pub fn k_refined_spans(base_spans: usize, degree: usize) -> usize {
    (base_spans - 1) * degree + 1
}

/// Open uniform knot vector of degree `degree` on `[0, length]` obtained by
/// k-refining a linear discretization with `base_spans` spans.
pub fn k_refine<T: Real>(length: T, base_spans: usize, degree: usize) -> Result<KnotVector<T>> {
    if base_spans == 0 || degree == 0 {
        return Err(invalid("k-refinement needs positive span count and degree"));
    }
    KnotVector::open_uniform(length, k_refined_spans(base_spans, degree), degree)
}

#[inline]
fn guarded_ratio<T: Real>(num: T, den: T) -> T {
    if den == T::zero() {
        T::zero()
    } else {
        num / den
    }
}

/// Literal Cox-de Boor recursion on an arbitrary knot slice.
pub(crate) fn cox_de_boor<T: Real>(knots: &[T], i: usize, p: usize, x: T) -> T {
    if p == 0 {
        let (a, b) = (knots[i], knots[i + 1]);
        if a <= x && x < b {
            return T::one();
        }
        let end = knots[knots.len() - 1];
        // closed right endpoint
        if x == end && a < b && b == end {
            return T::one();
        }
        return T::zero();
    }
    let left = guarded_ratio(x - knots[i], knots[i + p] - knots[i]);
    let right = guarded_ratio(knots[i + p + 1] - x, knots[i + p + 1] - knots[i + 1]);
    let mut v = T::zero();
    if left != T::zero() {
        v += left * cox_de_boor(knots, i, p - 1, x);
    }
    if right != T::zero() {
        v += right * cox_de_boor(knots, i + 1, p - 1, x);
    }
    v
}

pub(crate) fn cox_de_boor_derivative<T: Real>(
    knots: &[T],
    i: usize,
    p: usize,
    order: usize,
    x: T,
) -> T {
    if order == 0 {
        return cox_de_boor(knots, i, p, x);
    }
    let pf = T::count(p);
    let a = guarded_ratio(pf, knots[i + p] - knots[i]);
    let b = guarded_ratio(pf, knots[i + p + 1] - knots[i + 1]);
    let mut v = T::zero();
    if a != T::zero() {
        v += a * cox_de_boor_derivative(knots, i, p - 1, order - 1, x);
    }
    if b != T::zero() {
        v -= b * cox_de_boor_derivative(knots, i + 1, p - 1, order - 1, x);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn kv(knots: &[f64], p: usize) -> KnotVector<f64> {
        KnotVector::from_knots(knots.to_vec(), p).unwrap()
    }

    #[test]
    fn open_uniform_construction() {
        let k = KnotVector::open_uniform(1.0, 2, 1).unwrap();
        assert_eq!(k.knots(), &[0.0, 0.0, 0.5, 1.0, 1.0]);
        let k = KnotVector::open_uniform(2.0, 2, 2).unwrap();
        assert_eq!(k.knots(), &[0.0, 0.0, 0.0, 1.0, 2.0, 2.0, 2.0]);
        assert_eq!(k.knots().len(), 2 + 2 * 2 + 1);
        assert_eq!(k.num_basis(), 4);
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(KnotVector::open_uniform(1.0, 0, 1).is_err());
        assert!(KnotVector::open_uniform(0.0, 2, 1).is_err());
        assert!(KnotVector::open_uniform(-1.0, 2, 1).is_err());
        assert!(KnotVector::open_uniform(1.0, 2, 0).is_err());
        assert!(KnotVector::from_knots(vec![0.0, 0.0, 0.0, 1.0, 1.0], 1).is_err());
        assert!(KnotVector::from_knots(vec![0.0, 0.5, 1.0, 1.0], 1).is_err());
    }

    #[test]
    fn degree_zero_base_case() {
        let knots = [0.0, 1.0];
        assert_eq!(cox_de_boor(&knots, 0, 0, 0.5), 1.0);
        assert_eq!(cox_de_boor(&knots, 0, 0, 1.0), 1.0);
        assert_eq!(cox_de_boor(&knots, 0, 0, 1.5), 0.0);
    }

    #[test]
    fn quadratic_partition_of_unity_and_interpolatory_ends() {
        let k = kv(&[0.0, 0.0, 0.0, 1.0, 2.0, 2.0, 2.0], 2);
        for &x in &[0.3, 1.0, 1.7] {
            let s: f64 = (0..4).map(|i| k.eval_basis(i, x).unwrap()).sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-14);
        }
        assert_eq!(k.eval_basis(0, 0.0).unwrap(), 1.0);
        assert_eq!(k.eval_basis(3, 2.0).unwrap(), 1.0);
        assert!(k.eval_basis(4, 1.0).is_err());
        assert!(k.eval_basis(0, 2.5).is_err());
        assert!(k.eval_basis(0, -0.1).is_err());
    }

    #[test]
    fn linear_hat_derivative() {
        let k = kv(&[0.0, 0.0, 1.0, 2.0, 2.0], 1);
        assert_eq!(k.eval_basis_derivative(1, 0.5, 1).unwrap(), 1.0);
        assert_eq!(k.eval_basis_derivative(1, 1.5, 1).unwrap(), -1.0);
        assert!(k.eval_basis_derivative(1, 0.5, 2).is_err());
    }

    #[test]
    fn quadratic_derivative_matches_central_difference() {
        let k = kv(&[0.0, 0.0, 0.0, 1.0, 2.0, 2.0, 2.0], 2);
        let d = 1e-6;
        let fd = (k.eval_basis(1, 0.5 + d).unwrap() - k.eval_basis(1, 0.5 - d).unwrap()) / (2.0 * d);
        assert_abs_diff_eq!(k.eval_basis_derivative(1, 0.5, 1).unwrap(), fd, epsilon = 1e-6);
    }

    #[test]
    fn greville_values() {
        let k = kv(&[0.0, 0.0, 0.5, 1.0, 1.0], 1);
        assert_eq!(k.greville(), vec![0.0, 0.5, 1.0]);
        let k = kv(&[0.0, 0.0, 0.0, 1.0, 2.0, 2.0, 2.0], 2);
        assert_eq!(k.greville(), vec![0.0, 0.5, 1.5, 2.0]);
        let g = k.greville();
        for &x in &[0.25, 1.1, 1.9] {
            let v: f64 = (0..4).map(|i| k.eval_basis(i, x).unwrap() * g[i]).sum();
            assert_abs_diff_eq!(v, x, epsilon = 1e-13);
        }
    }

    #[test]
    fn k_refinement_matches_lagrangian_counts() {
        for (p, m, cps) in [(1, 4, 5), (2, 7, 9), (3, 10, 13)] {
            let k: KnotVector<f64> = k_refine(1.0, 4, p).unwrap();
            assert_eq!(k.spans(), m);
            assert_eq!(k.num_basis(), cps);
            assert_eq!(k.num_basis(), 4 * p + 1);
        }
        assert!(k_refine::<f64>(1.0, 0, 2).is_err());
        assert!(k_refine::<f64>(1.0, 3, 0).is_err());
    }

    #[test]
    fn find_span_covers_endpoints() {
        let k = KnotVector::open_uniform(1.0, 4, 2).unwrap();
        assert_eq!(k.find_span(0.0), 2);
        assert_eq!(k.find_span(0.3), 3);
        assert_eq!(k.find_span(1.0), 5);
        assert_eq!(k.nonzero_spans().collect::<Vec<_>>(), vec![2, 3, 4, 5]);
    }

    #[test]
    fn single_precision_instantiation() {
        let k = KnotVector::<f32>::open_uniform(1.0, 3, 2).unwrap();
        let s: f32 = (0..k.num_basis()).map(|i| k.eval_basis(i, 0.4).unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-6);
    }

    fn knot_vector_strategy() -> impl Strategy<Value = KnotVector<f64>> {
        (1usize..=4, 1usize..=9, 0.5f64..3.0)
            .prop_map(|(p, m, l)| KnotVector::open_uniform(l, m, p).unwrap())
    }

    proptest! {
        #[test]
        fn span_sweep_agrees_with_recursion(k in knot_vector_strategy(), t in 0.0f64..=1.0) {
            let x = k.start() + t * k.length();
            let s = k.find_span(x);
            let p = k.degree();
            let nd = p.min(2);
            let ders = k.basis_with_derivatives(s, x, nd);
            for a in 0..=p {
                let i = s - p + a;
                prop_assert!((ders[0][a] - k.eval_basis(i, x).unwrap()).abs() < 1e-13);
                for order in 1..=nd {
                    let reference = cox_de_boor_derivative(k.knots(), i, p, order, x);
                    prop_assert!((ders[order][a] - reference).abs() < 1e-9 * (1.0 + reference.abs()));
                }
            }
        }

        #[test]
        fn nonnegative_and_compact_support(k in knot_vector_strategy(), t in 0.0f64..=1.0) {
            let x = k.start() + t * k.length();
            let p = k.degree();
            for i in 0..k.num_basis() {
                let v = k.eval_basis(i, x).unwrap();
                prop_assert!(v >= 0.0);
                if x < k.knots()[i] || x > k.knots()[i + p + 1] {
                    prop_assert_eq!(v, 0.0);
                }
            }
        }

        #[test]
        fn derivatives_sum_to_zero(k in knot_vector_strategy(), t in 0.01f64..0.99) {
            let x = k.start() + t * k.length();
            let s: f64 = (0..k.num_basis()).map(|i| k.eval_basis_derivative(i, x, 1).unwrap()).sum();
            prop_assert!(s.abs() < 1e-11);
        }
    }
}
