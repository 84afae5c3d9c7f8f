//! Univariate B-splines on p-open dyadic knot vectors: evaluation, dyadic
//! refinement, knot-insertion embeddings and restriction to sub-intervals.

mod dyadic;

pub use dyadic::{DyadicRational, MAX_LOG2_DENOMINATOR};

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Entries of embedding matrices at or below this magnitude are dropped.
pub const EMBEDDING_ZERO: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct KnotVector {
    degree: usize,
    knots: Vec<DyadicRational>,
}

impl KnotVector {
    pub fn new(degree: usize, knots: Vec<DyadicRational>) -> Result<Self> {
        let bad = |msg: String| Err(Error::Precondition(format!("invalid knot vector: {msg}")));
        if degree < 1 {
            return bad("degree must be at least 1".into());
        }
        if knots.len() < 2 * (degree + 1) {
            return bad(format!("{} knots are too few for degree {degree}", knots.len()));
        }
        if knots.windows(2).any(|w| w[0] > w[1]) {
            return bad("knots are not ascending".into());
        }
        let p = degree;
        let n = knots.len();
        if knots[..=p].iter().any(|k| *k != DyadicRational::ZERO)
            || knots[n - p - 1..].iter().any(|k| *k != DyadicRational::ONE)
        {
            return bad(format!("not {p}-open on [0, 1]"));
        }
        for run in knots.chunk_by(|a, b| a == b) {
            let v = run[0];
            let boundary = v == DyadicRational::ZERO || v == DyadicRational::ONE;
            if boundary && run.len() != p + 1 {
                return bad(format!("end knot {v} has multiplicity {} instead of {}", run.len(), p + 1));
            }
            if !boundary && run.len() > p {
                return bad(format!("interior knot {v} has multiplicity {} > {p}", run.len()));
            }
        }
        Ok(Self { degree, knots })
    }

    /// Uniform p-open knot vector with `spans` equal spans; `spans` must be a power of two.
    pub fn uniform(degree: usize, spans: u32) -> Result<Self> {
        if spans == 0 || !spans.is_power_of_two() {
            return Err(Error::Precondition(format!("{spans} spans is not a power of two")));
        }
        let k = spans.trailing_zeros();
        let mut knots = vec![DyadicRational::ZERO; degree + 1];
        knots.extend((1..spans).map(|i| DyadicRational::new(i as i64, k)));
        knots.extend(std::iter::repeat_n(DyadicRational::ONE, degree + 1));
        Self::new(degree, knots)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[DyadicRational] {
        &self.knots
    }

    pub fn num_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Distinct knot values in ascending order.
    pub fn breakpoints(&self) -> Vec<DyadicRational> {
        let mut v = self.knots.clone();
        v.dedup();
        v
    }

    /// Inserts the midpoint of every non-empty span once.
    pub fn dyadic_refine(&self) -> KnotVector {
        let mut knots = Vec::with_capacity(2 * self.knots.len());
        for w in self.knots.windows(2) {
            knots.push(w[0]);
            if w[0] != w[1] {
                knots.push(w[0].midpoint(w[1]));
            }
        }
        knots.push(*self.knots.last().unwrap());
        Self { degree: self.degree, knots }
    }

    pub fn grid_sizes(&self) -> GridSizes {
        let bp = self.breakpoints();
        let spans = bp.windows(2).map(|w| w[1] - w[0]);
        let max = spans.clone().max().unwrap();
        let min = spans.min().unwrap();
        GridSizes { h_max: max.to_f64(), h_min: min.to_f64(), h_max_exact: max, h_min_exact: min }
    }

    /// Mirror image `t -> 1 - t`.
    pub fn reversed(&self) -> KnotVector {
        let knots = self.knots.iter().rev().map(|&k| DyadicRational::ONE - k).collect();
        Self { degree: self.degree, knots }
    }

    /// Whether every knot of `self` occurs in `other` with at least the same multiplicity.
    pub fn is_subset_of(&self, other: &KnotVector) -> bool {
        if self.degree != other.degree {
            return false;
        }
        let (mut i, mut j) = (0, 0);
        while i < self.knots.len() {
            while j < other.knots.len() && other.knots[j] < self.knots[i] {
                j += 1;
            }
            if j == other.knots.len() || other.knots[j] != self.knots[i] {
                return false;
            }
            i += 1;
            j += 1;
        }
        true
    }

    /// Multiset difference `other \ self`; `None` unless `self ⊆ other`.
    fn inserted_knots(&self, other: &KnotVector) -> Option<Vec<DyadicRational>> {
        if !self.is_subset_of(other) {
            return None;
        }
        let mut out = Vec::new();
        let mut i = 0;
        for &k in &other.knots {
            if i < self.knots.len() && self.knots[i] == k {
                i += 1;
            } else {
                out.push(k);
            }
        }
        Some(out)
    }

    /// p-open knot vector of the restriction to `[a, b]`, rescaled to `[0, 1]`.
    pub fn restrict(&self, a: DyadicRational, b: DyadicRational) -> Result<KnotVector> {
        let (zero, one) = (DyadicRational::ZERO, DyadicRational::ONE);
        if !(zero <= a && a < b && b <= one) {
            return Err(Error::Precondition(format!("invalid sub-interval [{a}, {b}]")));
        }
        if a == zero && b == one {
            return Ok(self.clone());
        }
        for x in [a, b] {
            if x != zero && x != one && !self.knots.contains(&x) {
                return Err(Error::Precondition(format!("{x} is not a knot")));
            }
        }
        let len = b - a;
        if len.power_of_two_exponent().is_none() {
            return Err(Error::Precondition(format!("sub-interval length {len} is not a power of two")));
        }
        let p = self.degree;
        let mut knots = vec![zero; p + 1];
        knots.extend(
            self.knots
                .iter()
                .filter(|&&k| a < k && k < b)
                .map(|&k| (k - a).checked_div(len).expect("power-of-two length")),
        );
        knots.extend(std::iter::repeat_n(one, p + 1));
        KnotVector::new(p, knots)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSizes {
    pub h_max: f64,
    pub h_min: f64,
    pub h_max_exact: DyadicRational,
    pub h_min_exact: DyadicRational,
}

/// Values and derivatives of the `p + 1` B-splines that may be non-zero at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisValues {
    pub first_index: usize,
    pub degree: usize,
    pub max_deriv: usize,
    table: Vec<f64>,
}

impl BasisValues {
    /// `d`-th derivative of basis function `first_index + j`.
    #[inline]
    pub fn get(&self, d: usize, j: usize) -> f64 {
        self.table[d * (self.degree + 1) + j]
    }

    pub fn row(&self, d: usize) -> &[f64] {
        &self.table[d * (self.degree + 1)..(d + 1) * (self.degree + 1)]
    }
}

/// A B-spline space together with floating-point copies of its knots.
#[derive(Clone, Debug, PartialEq)]
pub struct SplineSpace {
    knot_vector: KnotVector,
    values: Vec<f64>,
}

impl Eq for SplineSpace {}

impl From<KnotVector> for SplineSpace {
    fn from(knot_vector: KnotVector) -> Self {
        let values = knot_vector.knots.iter().map(|k| k.to_f64()).collect();
        Self { knot_vector, values }
    }
}

impl SplineSpace {
    pub fn new(knot_vector: KnotVector) -> Self {
        knot_vector.into()
    }

    pub fn uniform(degree: usize, spans: u32) -> Result<Self> {
        Ok(KnotVector::uniform(degree, spans)?.into())
    }

    pub fn knot_vector(&self) -> &KnotVector {
        &self.knot_vector
    }

    pub fn degree(&self) -> usize {
        self.knot_vector.degree
    }

    pub fn dim(&self) -> usize {
        self.knot_vector.num_basis()
    }

    pub fn knot_values(&self) -> &[f64] {
        &self.values
    }

    /// Support `[t_i, t_{i+p+1}]` of basis function `i` in exact arithmetic.
    pub fn support(&self, i: usize) -> (DyadicRational, DyadicRational) {
        let k = &self.knot_vector.knots;
        (k[i], k[i + self.degree() + 1])
    }

    /// Index `mu` with `t_mu <= t < t_{mu+1}`; `t = 1` maps to the last non-empty span.
    pub fn find_span(&self, t: f64) -> usize {
        let p = self.degree();
        let n = self.dim();
        if t >= self.values[n] {
            return n - 1;
        }
        // last index in [p, n-1] with values[idx] <= t
        let slice = &self.values[p..n];
        let pos = slice.partition_point(|&k| k <= t);
        p + pos.max(1) - 1
    }

    /// Cox–de Boor evaluation of all non-zero basis functions and their
    /// derivatives up to `max_deriv` at `t`.
    pub fn eval_basis(&self, t: f64, max_deriv: usize) -> Result<BasisValues> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("parameter {t} outside [0, 1]")));
        }
        Ok(self.eval_basis_unchecked(t, max_deriv))
    }

    pub fn eval_basis_unchecked(&self, t: f64, max_deriv: usize) -> BasisValues {
        let p = self.degree();
        let span = self.find_span(t);
        let table = ders_basis_funs(&self.values, span, t, p, max_deriv);
        BasisValues { first_index: span - p, degree: p, max_deriv, table }
    }

    /// Value of the spline `sum_i coeffs[i] B_i` and its derivatives at `t`.
    pub fn eval_spline(&self, coeffs: &[f64], t: f64, max_deriv: usize) -> Vec<f64> {
        let b = self.eval_basis_unchecked(t, max_deriv);
        (0..=max_deriv).map(|d| b.row(d).iter().enumerate().map(|(j, v)| v * coeffs[b.first_index + j]).sum()).collect()
    }

    pub fn dyadic_refine(&self) -> SplineSpace {
        self.knot_vector.dyadic_refine().into()
    }

    pub fn grid_sizes(&self) -> GridSizes {
        self.knot_vector.grid_sizes()
    }

    pub fn reversed(&self) -> SplineSpace {
        self.knot_vector.reversed().into()
    }

    pub fn restrict_to_subinterval(&self, a: DyadicRational, b: DyadicRational) -> Result<SplineSpace> {
        Ok(self.knot_vector.restrict(a, b)?.into())
    }

    /// Basis indices whose support meets the open interval `(a, b)`.
    pub fn active_range(&self, a: DyadicRational, b: DyadicRational) -> std::ops::Range<usize> {
        let n = self.dim();
        let first = (0..n).find(|&i| self.support(i).1 > a).unwrap_or(n);
        let last = (0..n).rev().find(|&i| self.support(i).0 < b).map_or(0, |i| i + 1);
        first..last.max(first)
    }
}

/// Derivatives of the non-vanishing basis functions (The NURBS Book, A2.3).
fn ders_basis_funs(knots: &[f64], span: usize, t: f64, p: usize, n_ders: usize) -> Vec<f64> {
    let mut ndu = vec![vec![0.0; p + 1]; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    ndu[0][0] = 1.0;
    for j in 1..=p {
        left[j] = t - knots[span + 1 - j];
        right[j] = knots[span + j] - t;
        let mut saved = 0.0;
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    let mut ders = vec![0.0; (n_ders + 1) * (p + 1)];
    for j in 0..=p {
        ders[j] = ndu[j][p];
    }
    let mut a = vec![vec![0.0; p + 1]; 2];
    for r in 0..=p {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0][0] = 1.0;
        for k in 1..=n_ders.min(p) {
            let mut d = 0.0;
            let rk = r as isize - k as isize;
            let pk = p - k;
            if r >= k {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                d = a[s2][0] * ndu[rk as usize][pk];
            }
            let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2 = if r as isize - 1 <= pk as isize { k - 1 } else { p - r };
            for j in j1..=j2 {
                let idx = (rk + j as isize) as usize;
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                d += a[s2][j] * ndu[idx][pk];
            }
            if r <= pk {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k * (p + 1) + r] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut factor = p as f64;
    for k in 1..=n_ders.min(p) {
        for j in 0..=p {
            ders[k * (p + 1) + j] *= factor;
        }
        factor *= (p - k) as f64;
    }
    ders
}

/// Dense knot-insertion matrix: row `i` holds the coefficients of coarse basis
/// function `i` in the basis of `fine`.
pub fn embedding_dense(coarse: &KnotVector, fine: &KnotVector) -> Result<Vec<Vec<f64>>> {
    let inserted = coarse
        .inserted_knots(fine)
        .ok_or_else(|| Error::Precondition("knot vectors are not nested (or degrees differ)".into()))?;
    let p = coarse.degree;
    let n_coarse = coarse.num_basis();
    let mut knots: Vec<f64> = coarse.knots.iter().map(|k| k.to_f64()).collect();
    let mut rows: Vec<Vec<f64>> =
        (0..n_coarse).map(|i| (0..n_coarse).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for tau in inserted {
        let tau = tau.to_f64();
        // span k with knots[k] <= tau < knots[k+1]
        let k = knots.partition_point(|&x| x <= tau) - 1;
        let n_cur = knots.len() - p - 1;
        let alpha: Vec<f64> = (k + 1 - p..=k).map(|i| (tau - knots[i]) / (knots[i + p] - knots[i])).collect();
        for row in rows.iter_mut() {
            let mut new = vec![0.0; n_cur + 1];
            for (i, slot) in new.iter_mut().enumerate() {
                *slot = if i + p <= k {
                    row[i]
                } else if i <= k {
                    let a = alpha[i + p - k - 1];
                    a * row[i] + (1.0 - a) * row[i - 1]
                } else {
                    row[i - 1]
                };
            }
            *row = new;
        }
        knots.insert(k + 1, tau);
    }
    Ok(rows)
}

/// Sparse `n_coarse x n_fine` knot-insertion matrix.
pub fn embedding_matrix(coarse: &SplineSpace, fine: &SplineSpace) -> Result<SparseMatrix> {
    let rows = embedding_dense(&coarse.knot_vector, &fine.knot_vector)?;
    SparseMatrix::from_triplets_with_threshold(
        coarse.dim(),
        fine.dim(),
        rows.iter().enumerate().flat_map(|(i, r)| r.iter().enumerate().map(move |(j, &v)| (i, j, v))),
        EMBEDDING_ZERO,
    )
}

/// Coarse basis functions restricted to `[a, b]`, expressed in `fine`, a
/// space on `[a, b]` rescaled to `[0, 1]`.
#[derive(Clone, Debug)]
pub struct RestrictedEmbedding {
    /// Coarse basis indices, one per row of `matrix`.
    pub coarse_indices: std::ops::Range<usize>,
    /// `coarse_indices.len() x fine.dim()`, entries >= 0, columns summing to 1.
    pub matrix: Vec<Vec<f64>>,
}

/// Knot insertion into the coarse space until the knots inside `[a, b]`
/// coincide with those of `fine` (mapped back to `[a, b]`) and `a`, `b`
/// reach multiplicity `p + 1`; the columns living on `[a, b]` then form the
/// fine basis. Fails with [`Error::Precondition`] when the restricted coarse
/// space is not contained in `fine`.
pub fn restricted_embedding(
    coarse: &SplineSpace,
    a: DyadicRational,
    b: DyadicRational,
    fine: &SplineSpace,
) -> Result<RestrictedEmbedding> {
    let p = coarse.degree();
    if fine.degree() != p {
        return Err(Error::Precondition("degree mismatch".into()));
    }
    let (zero, one) = (DyadicRational::ZERO, DyadicRational::ONE);
    if !(zero <= a && a < b && b <= one) {
        return Err(Error::Precondition(format!("invalid sub-interval [{a}, {b}]")));
    }
    let len = b - a;
    let mapped: Vec<DyadicRational> =
        fine.knot_vector.knots[p + 1..fine.knot_vector.knots.len() - p - 1].iter().map(|&s| a + s * len).collect();

    // augmented = coarse ∪ mapped (max multiplicity) with a, b raised to p + 1
    let mut augmented: Vec<DyadicRational> = Vec::new();
    let ck = &coarse.knot_vector.knots;
    let mut values: Vec<DyadicRational> = ck.iter().chain(mapped.iter()).copied().collect();
    values.push(a);
    values.push(b);
    values.sort();
    values.dedup();
    for v in values {
        let mc = ck.iter().filter(|&&k| k == v).count();
        let mf = mapped.iter().filter(|&&k| k == v).count();
        let mut m = mc.max(mf);
        if v == a || v == b {
            m = p + 1;
        }
        augmented.extend(std::iter::repeat_n(v, m));
    }
    // a and b may carry interior multiplicity p + 1 here, which the public
    // constructor rejects
    let augmented = KnotVector { degree: p, knots: augmented };
    let start = augmented.knots.iter().position(|&k| k == a).unwrap();
    let end = (start + fine.knot_vector.knots.len()).min(augmented.knots.len());
    let block: Vec<DyadicRational> = augmented.knots[start..end].to_vec();
    let block_rescaled: Vec<DyadicRational> =
        block.iter().map(|&k| (k - a).checked_div(len).unwrap_or(DyadicRational::from_int(-1))).collect();
    if block_rescaled != fine.knot_vector.knots {
        return Err(Error::Precondition(format!(
            "restriction of the coarse space to [{a}, {b}] is not contained in the fine space"
        )));
    }
    let full = embedding_dense(&coarse.knot_vector, &augmented)?;
    let coarse_indices = coarse.active_range(a, b);
    let matrix = coarse_indices
        .clone()
        .map(|i| {
            full[i][start..start + fine.dim()]
                .iter()
                .map(|&v| if v.abs() <= EMBEDDING_ZERO { 0.0 } else { v })
                .collect()
        })
        .collect();
    Ok(RestrictedEmbedding { coarse_indices, matrix })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kv(p: usize, knots: &[f64]) -> KnotVector {
        KnotVector::new(p, knots.iter().map(|&k| DyadicRational::parse(&k.to_string()).unwrap()).collect()).unwrap()
    }

    fn space(p: usize, knots: &[f64]) -> SplineSpace {
        kv(p, knots).into()
    }

    fn floats(k: &KnotVector) -> Vec<f64> {
        k.knots().iter().map(|x| x.to_f64()).collect()
    }

    /// Plain recursive Cox–de Boor with 0/0 := 0, used as oracle.
    fn cox_de_boor(knots: &[f64], i: usize, p: usize, t: f64) -> f64 {
        if p == 0 {
            let n_last = knots.len() - 1;
            let last_nonempty = (0..n_last).rev().find(|&j| knots[j] < knots[j + 1]).unwrap();
            return if (knots[i] <= t && t < knots[i + 1]) || (t == knots[n_last] && i == last_nonempty) {
                1.0
            } else {
                0.0
            };
        }
        let mut v = 0.0;
        let d1 = knots[i + p] - knots[i];
        if d1 > 0.0 {
            v += (t - knots[i]) / d1 * cox_de_boor(knots, i, p - 1, t);
        }
        let d2 = knots[i + p + 1] - knots[i + 1];
        if d2 > 0.0 {
            v += (knots[i + p + 1] - t) / d2 * cox_de_boor(knots, i + 1, p - 1, t);
        }
        v
    }

    fn cox_de_boor_deriv(knots: &[f64], i: usize, p: usize, t: f64) -> f64 {
        let mut v = 0.0;
        let d1 = knots[i + p] - knots[i];
        if d1 > 0.0 {
            v += p as f64 / d1 * cox_de_boor(knots, i, p - 1, t);
        }
        let d2 = knots[i + p + 1] - knots[i + 1];
        if d2 > 0.0 {
            v -= p as f64 / d2 * cox_de_boor(knots, i + 1, p - 1, t);
        }
        v
    }

    fn eval_all(s: &SplineSpace, t: f64) -> Vec<f64> {
        let b = s.eval_basis(t, 0).unwrap();
        let mut out = vec![0.0; s.dim()];
        for j in 0..=s.degree() {
            out[b.first_index + j] = b.get(0, j);
        }
        out
    }

    #[test]
    fn rejects_invalid_knot_vectors() {
        let d = |x: f64| DyadicRational::parse(&x.to_string()).unwrap();
        assert!(KnotVector::new(1, vec![d(0.0), d(0.0), d(1.0)]).is_err());
        assert!(KnotVector::new(1, vec![d(0.0), d(0.5), d(1.0), d(1.0)]).is_err());
        assert!(
            KnotVector::new(2, vec![d(0.0), d(0.0), d(0.0), d(0.5), d(0.5), d(0.5), d(1.0), d(1.0), d(1.0)]).is_err()
        );
        assert!(KnotVector::new(1, vec![d(0.0), d(0.0), d(0.75), d(0.25), d(1.0), d(1.0)]).is_err());
        assert!(KnotVector::new(0, vec![d(0.0), d(1.0)]).is_err());
        assert!(KnotVector::new(2, vec![d(0.0), d(0.0), d(0.0), d(0.5), d(0.5), d(1.0), d(1.0), d(1.0)]).is_ok());
    }

    #[test]
    fn bernstein_quadratic_at_midpoint() {
        let s = space(2, &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = s.eval_basis(0.5, 0).unwrap();
        assert_eq!(b.first_index, 0);
        assert_eq!(b.row(0), &[0.25, 0.5, 0.25]);
    }

    #[test]
    fn linear_interpolates_at_boundary() {
        let s = space(1, &[0.0, 0.0, 1.0, 1.0]);
        let b = s.eval_basis(0.0, 0).unwrap();
        assert_eq!(b.first_index, 0);
        assert_eq!(b.row(0), &[1.0, 0.0]);
        let b = s.eval_basis(1.0, 0).unwrap();
        assert_eq!(b.row(0), &[0.0, 1.0]);
    }

    #[test]
    fn out_of_domain_is_an_error() {
        let s = space(1, &[0.0, 0.0, 1.0, 1.0]);
        assert!(matches!(s.eval_basis(1.5, 0), Err(Error::Domain(_))));
        assert!(matches!(s.eval_basis(-1e-9, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn cubic_matches_recursive_oracle() {
        let knots = [0.0, 0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0, 1.0];
        let s = space(3, &knots);
        for &t in &[0.25, 0.0, 0.5, 0.7, 1.0] {
            let b = s.eval_basis(t, 1).unwrap();
            for i in 0..s.dim() {
                let v = if i >= b.first_index && i <= b.first_index + 3 { b.get(0, i - b.first_index) } else { 0.0 };
                let dv = if i >= b.first_index && i <= b.first_index + 3 { b.get(1, i - b.first_index) } else { 0.0 };
                assert!((v - cox_de_boor(&knots, i, 3, t)).abs() <= 1e-14, "t={t} i={i}");
                if t < 1.0 {
                    assert!((dv - cox_de_boor_deriv(&knots, i, 3, t)).abs() <= 1e-13, "t={t} i={i}");
                }
            }
        }
    }

    #[test]
    fn dyadic_refinement_examples() {
        assert_eq!(floats(&kv(1, &[0.0, 0.0, 1.0, 1.0]).dyadic_refine()), vec![0.0, 0.0, 0.5, 1.0, 1.0]);
        assert_eq!(
            floats(&kv(2, &[0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0]).dyadic_refine()),
            vec![0.0, 0.0, 0.0, 0.25, 0.5, 0.75, 1.0, 1.0, 1.0]
        );
        assert_eq!(
            floats(&kv(1, &[0.0, 0.0, 1.0, 1.0]).dyadic_refine().dyadic_refine()),
            vec![0.0, 0.0, 0.25, 0.5, 0.75, 1.0, 1.0]
        );
    }

    #[test]
    fn grid_size_examples() {
        let g = kv(1, &[0.0, 0.0, 1.0, 1.0]).grid_sizes();
        assert_eq!((g.h_max, g.h_min), (1.0, 1.0));
        let k = kv(1, &[0.0, 0.0, 0.25, 1.0, 1.0]);
        let g = k.grid_sizes();
        assert_eq!((g.h_max, g.h_min), (0.75, 0.25));
        let r = k.dyadic_refine().grid_sizes();
        assert_eq!((r.h_max, r.h_min), (0.375, 0.125));
    }

    #[test]
    fn embedding_identity_and_linear_example() {
        let s = space(2, &[0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0]);
        assert_eq!(embedding_matrix(&s, &s).unwrap(), SparseMatrix::identity(s.dim()));

        let coarse = space(1, &[0.0, 0.0, 1.0, 1.0]);
        let fine = space(1, &[0.0, 0.0, 0.5, 1.0, 1.0]);
        let e = embedding_matrix(&coarse, &fine).unwrap();
        assert_eq!(e.to_dense(), vec![vec![1.0, 0.5, 0.0], vec![0.0, 0.5, 1.0]]);
        // pointwise reproduction oracle
        for k in 0..20 {
            let t = k as f64 / 19.0;
            let c = eval_all(&coarse, t);
            let f = eval_all(&fine, t);
            for i in 0..2 {
                let via_fine: f64 = (0..3).map(|j| e.get(i, j) * f[j]).sum();
                assert!((via_fine - c[i]).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn embedding_quadratic_refinement() {
        let coarse = space(2, &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let fine = coarse.dyadic_refine();
        let e = embedding_matrix(&coarse, &fine).unwrap();
        assert!(e.values().iter().all(|&v| v >= 0.0));
        // columns sum to one: fine partition of unity
        let col_sums = e.transpose().row_sums();
        assert!(col_sums.iter().all(|s| (s - 1.0).abs() <= 1e-14));
        for k in 0..20 {
            let t = k as f64 / 19.0;
            let c = eval_all(&coarse, t);
            let f = eval_all(&fine, t);
            for i in 0..coarse.dim() {
                let via_fine: f64 = (0..fine.dim()).map(|j| e.get(i, j) * f[j]).sum();
                assert!((via_fine - c[i]).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn embedding_rejects_non_nested() {
        let a = space(1, &[0.0, 0.0, 0.25, 1.0, 1.0]);
        let b = space(1, &[0.0, 0.0, 0.5, 1.0, 1.0]);
        assert!(matches!(embedding_matrix(&a, &b), Err(Error::Precondition(_))));
    }

    #[test]
    fn embedding_handles_multiplicities() {
        let coarse = space(2, &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let fine = space(2, &[0.0, 0.0, 0.0, 0.5, 0.5, 1.0, 1.0, 1.0]);
        let e = embedding_matrix(&coarse, &fine).unwrap();
        for k in 0..20 {
            let t = k as f64 / 19.0;
            let c = eval_all(&coarse, t);
            let f = eval_all(&fine, t);
            for i in 0..coarse.dim() {
                let via_fine: f64 = (0..fine.dim()).map(|j| e.get(i, j) * f[j]).sum();
                assert!((via_fine - c[i]).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn restriction_examples() {
        let s = space(1, &[0.0, 0.0, 0.5, 1.0, 1.0]);
        assert_eq!(s.restrict_to_subinterval(DyadicRational::ZERO, DyadicRational::ONE).unwrap(), s);
        let r = s.restrict_to_subinterval(DyadicRational::ZERO, DyadicRational::HALF).unwrap();
        assert_eq!(floats(r.knot_vector()), vec![0.0, 0.0, 1.0, 1.0]);
        let q = space(2, &[0.0, 0.0, 0.0, 0.25, 0.5, 0.75, 1.0, 1.0, 1.0]);
        let r = q.restrict_to_subinterval(DyadicRational::HALF, DyadicRational::ONE).unwrap();
        assert_eq!(floats(r.knot_vector()), vec![0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0]);
        assert!(q.restrict_to_subinterval(DyadicRational::new(3, 3), DyadicRational::ONE).is_err());
        assert!(q.restrict_to_subinterval(DyadicRational::new(1, 2), DyadicRational::ONE).is_err());
    }

    #[test]
    fn restriction_reproduces_functions_through_common_refinement() {
        // oracle: coarse spline evaluated on [a, b] equals restricted-basis
        // representation obtained from the restricted embedding.
        let q = space(2, &[0.0, 0.0, 0.0, 0.25, 0.5, 0.75, 1.0, 1.0, 1.0]);
        let (a, b) = (DyadicRational::HALF, DyadicRational::ONE);
        let r = q.restrict_to_subinterval(a, b).unwrap();
        let emb = restricted_embedding(&q, a, b, &r).unwrap();
        assert_eq!(emb.coarse_indices, 2..6);
        for k in 0..20 {
            let s = k as f64 / 19.0;
            let t = 0.5 + 0.5 * s;
            let c = eval_all(&q, t);
            let f = eval_all(&r, s);
            for (row, i) in emb.coarse_indices.clone().enumerate() {
                let via: f64 = (0..r.dim()).map(|j| emb.matrix[row][j] * f[j]).sum();
                assert!((via - c[i]).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn restricted_embedding_into_finer_space() {
        let coarse = SplineSpace::uniform(2, 4).unwrap();
        let fine = SplineSpace::uniform(2, 4).unwrap(); // half side refined: spans 1/8 in coarse units
        let (a, b) = (DyadicRational::ZERO, DyadicRational::HALF);
        let emb = restricted_embedding(&coarse, a, b, &fine).unwrap();
        for col in 0..fine.dim() {
            let s: f64 = emb.matrix.iter().map(|r| r[col]).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
        for k in 0..30 {
            let s = k as f64 / 29.0;
            let c = eval_all(&coarse, 0.5 * s);
            let f = eval_all(&fine, s);
            for (row, i) in emb.coarse_indices.clone().enumerate() {
                let via: f64 = (0..fine.dim()).map(|j| emb.matrix[row][j] * f[j]).sum();
                assert!((via - c[i]).abs() <= 1e-14);
            }
        }
        // a coarser target is rejected
        let too_coarse = SplineSpace::uniform(2, 1).unwrap();
        assert!(restricted_embedding(&coarse, a, b, &too_coarse).is_err());
    }

    #[test]
    fn active_range_counts_match_restriction_dimension() {
        let q = SplineSpace::uniform(3, 8).unwrap();
        let (a, b) = (DyadicRational::new(1, 2), DyadicRational::new(3, 2));
        let r = q.restrict_to_subinterval(a, b).unwrap();
        assert_eq!(q.active_range(a, b).len(), r.dim());
    }

    fn arb_space() -> impl Strategy<Value = SplineSpace> {
        (1usize..5, 0u32..4).prop_map(|(p, k)| {
            let mut s = SplineSpace::uniform(p, 1).unwrap();
            for _ in 0..k {
                s = s.dyadic_refine();
            }
            s
        })
    }

    proptest! {
        #[test]
        fn partition_of_unity_and_nonnegativity(s in arb_space(), t in 0.0f64..=1.0) {
            let b = s.eval_basis(t, 0).unwrap();
            let sum: f64 = b.row(0).iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-13);
            prop_assert!(b.row(0).iter().all(|&v| v >= 0.0));
            prop_assert_eq!(b.row(0).len(), s.degree() + 1);
        }

        #[test]
        fn derivative_matches_finite_differences(s in arb_space(), t in 0.01f64..0.99) {
            let h = 1e-6;
            let b = s.eval_basis(t, 1).unwrap();
            let n = s.dim();
            let plus = eval_all(&s, t + h);
            let minus = eval_all(&s, t - h);
            for j in 0..=s.degree() {
                let i = b.first_index + j;
                prop_assume!(i < n);
                let fd = (plus[i] - minus[i]) / (2.0 * h);
                let scale = b.get(1, j).abs().max(1.0);
                // knots inside (t-h, t+h) break the central difference
                let kinked = s.knot_values().iter().any(|&k| (k - t).abs() < 2.0 * h);
                prop_assume!(!kinked);
                prop_assert!((fd - b.get(1, j)).abs() <= 1e-6 * scale);
            }
        }

        #[test]
        fn embedding_reproduces_random_splines(
            s in arb_space(),
            levels in 1u32..3,
            seed in proptest::collection::vec(-1.0f64..1.0, 64),
            ts in proptest::collection::vec(0.0f64..=1.0, 50),
        ) {
            let mut fine = s.clone();
            for _ in 0..levels {
                fine = fine.dyadic_refine();
            }
            let e = embedding_matrix(&s, &fine).unwrap();
            let c: Vec<f64> = (0..s.dim()).map(|i| seed[i % seed.len()]).collect();
            let cf = e.transpose_mul_vec(&c).unwrap();
            for &t in &ts {
                let a = s.eval_spline(&c, t, 0)[0];
                let b = fine.eval_spline(&cf, t, 0)[0];
                prop_assert!((a - b).abs() <= 1e-13);
            }
        }
    }
}
