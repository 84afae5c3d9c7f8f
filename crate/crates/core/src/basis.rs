//! Sign-preserving elimination that turns the constraint matrix `C` into a
//! non-negative, partition-of-unity basis `B` of its null space.
//!
//! `W = C B` is kept explicitly. A row is usable when it has a unique
//! positive or a unique negative entry; eliminating that column with the
//! rank-1 update `B <- B (I - e_c w_m / w_mc)` only ever adds non-negative
//! multiples of one column of `B` to others.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;

use crate::coupling::ConstraintMatrix;
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Relative zero threshold for entries of `W`, scaled by the row's original magnitude.
pub const ELIMINATION_ZERO: f64 = 1e-12;

/// Entries of `B` below this magnitude are dropped during the updates.
const B_ZERO: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq)]
pub struct GlobalBasis {
    /// `n_pw x n_global`.
    pub b: SparseMatrix,
    /// Patch-wise columns removed by the elimination, in step order.
    pub eliminated_dofs: Vec<usize>,
    /// Patch-wise DOF index of each surviving column.
    pub kept_dofs: Vec<usize>,
    pub dof_offsets: Vec<usize>,
}

impl GlobalBasis {
    pub fn n_patchwise(&self) -> usize {
        self.b.n_rows()
    }

    pub fn n_global(&self) -> usize {
        self.b.n_cols()
    }

    /// Patch-wise coefficients `B u` of a global coefficient vector.
    pub fn to_patchwise(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.b.mul_vec(u)
    }
}

struct Elimination {
    w_rows: Vec<BTreeMap<usize, f64>>,
    w_cols: Vec<BTreeSet<usize>>,
    b_cols: Vec<BTreeMap<usize, f64>>,
    scale: Vec<f64>,
    eligible: BTreeSet<(usize, usize)>,
    in_eligible: Vec<Option<usize>>,
}

impl Elimination {
    fn new(c: &SparseMatrix) -> Self {
        let (n_rows, n_cols) = c.shape();
        let mut w_rows = vec![BTreeMap::new(); n_rows];
        let mut w_cols = vec![BTreeSet::new(); n_cols];
        let mut scale = vec![0.0f64; n_rows];
        for (i, j, v) in c.triplets() {
            w_rows[i].insert(j, v);
            w_cols[j].insert(i);
            scale[i] = scale[i].max(v.abs());
        }
        let b_cols = (0..n_cols).map(|j| BTreeMap::from([(j, 1.0)])).collect();
        let mut e = Self { w_rows, w_cols, b_cols, scale, eligible: BTreeSet::new(), in_eligible: vec![None; n_rows] };
        for r in 0..n_rows {
            e.refresh(r);
        }
        e
    }

    /// Columns holding the unique positive and the unique negative entry.
    fn sign_singletons(row: &BTreeMap<usize, f64>) -> (Option<usize>, Option<usize>) {
        let mut pos = (0, 0);
        let mut neg = (0, 0);
        for (&j, &v) in row {
            if v > 0.0 {
                pos = (pos.0 + 1, j);
            } else {
                neg = (neg.0 + 1, j);
            }
        }
        ((pos.0 == 1).then_some(pos.1), (neg.0 == 1).then_some(neg.1))
    }

    fn refresh(&mut self, r: usize) {
        if let Some(nnz) = self.in_eligible[r].take() {
            self.eligible.remove(&(nnz, r));
        }
        let row = &self.w_rows[r];
        if row.is_empty() {
            return;
        }
        let (p, n) = Self::sign_singletons(row);
        if p.is_some() || n.is_some() {
            self.eligible.insert((row.len(), r));
            self.in_eligible[r] = Some(row.len());
        }
    }

    fn remaining_rows(&self) -> usize {
        self.w_rows.iter().filter(|r| !r.is_empty()).count()
    }

    /// Eliminates column `c` using row `m`.
    fn step(&mut self, m: usize, c: usize) {
        let w_mc = self.w_rows[m][&c];
        let factors: Vec<(usize, f64)> =
            self.w_rows[m].iter().filter(|(&k, _)| k != c).map(|(&k, &v)| (k, -v / w_mc)).collect();

        let bc = std::mem::take(&mut self.b_cols[c]);
        for &(k, f) in &factors {
            let col = &mut self.b_cols[k];
            for (&i, &v) in &bc {
                let e = col.entry(i).or_insert(0.0);
                *e += f * v;
                if e.abs() <= B_ZERO {
                    col.remove(&i);
                }
            }
        }

        let rows = std::mem::take(&mut self.w_cols[c]);
        for &r in &rows {
            let w_rc = self.w_rows[r].remove(&c).unwrap_or(0.0);
            let tol = ELIMINATION_ZERO * self.scale[r];
            for &(k, f) in &factors {
                let row = &mut self.w_rows[r];
                let e = row.entry(k).or_insert(0.0);
                *e += f * w_rc;
                if e.abs() <= tol || r == m {
                    row.remove(&k);
                    self.w_cols[k].remove(&r);
                } else {
                    self.w_cols[k].insert(r);
                }
            }
            self.refresh(r);
        }
    }

    fn choose(&self) -> Option<(usize, usize)> {
        let &(_, m) = self.eligible.iter().next()?;
        let row = &self.w_rows[m];
        let (p, n) = Self::sign_singletons(row);
        let c = [p, n]
            .into_iter()
            .flatten()
            .min_by_key(|&j| (self.b_cols[j].len(), row[&j] < 0.0, j))
            .expect("eligible row has a sign singleton");
        Some((m, c))
    }
}

/// Runs the elimination on `C` and returns the non-zero columns of `B`.
pub fn nullspace_basis(cm: &ConstraintMatrix) -> Result<GlobalBasis> {
    let c = &cm.c;
    let n_pw = c.n_cols();
    let mut el = Elimination::new(c);
    let mut eliminated = Vec::new();
    while let Some((m, col)) = el.choose() {
        el.step(m, col);
        eliminated.push(col);
    }
    let remaining = el.remaining_rows();
    if remaining > 0 {
        return Err(Error::EliminationStalled { steps: eliminated.len(), remaining });
    }

    let removed: BTreeSet<usize> = eliminated.iter().copied().collect();
    let mut kept = Vec::with_capacity(n_pw - removed.len());
    let mut triplets = Vec::new();
    for (j, col) in el.b_cols.iter().enumerate() {
        if removed.contains(&j) || col.is_empty() {
            continue;
        }
        let k = kept.len();
        kept.push(j);
        for (&i, &v) in col {
            // tiny negatives are rounding residue of exact cancellations
            let v = if v < 0.0 && v > -ELIMINATION_ZERO { 0.0 } else { v };
            triplets.push((i, k, v));
        }
    }
    let b = SparseMatrix::from_triplets(n_pw, kept.len(), triplets)?;
    Ok(GlobalBasis { b, eliminated_dofs: eliminated, kept_dofs: kept, dof_offsets: cm.dof_offsets.clone() })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BasisReport {
    pub max_cb: f64,
    pub max_c: f64,
    pub min_entry: f64,
    pub max_row_sum_deviation: f64,
    /// `n_global - rank(B)`, only computed for small instances.
    pub rank_deficiency: Option<usize>,
    /// `n_global - (n_pw - rank(C))`, only computed for small instances.
    pub nullity_mismatch: Option<isize>,
    /// Frobenius distance between the projectors onto `span(B)` and
    /// `null(C)`, only computed for small instances.
    pub projector_gap: Option<f64>,
    pub max_row_nnz: usize,
}

impl BasisReport {
    pub fn passes(&self) -> bool {
        self.max_cb <= 1e-10 * (1.0 + self.max_c)
            && self.min_entry >= -1e-12
            && self.max_row_sum_deviation <= 1e-10
            && self.rank_deficiency.is_none_or(|d| d == 0)
            && self.nullity_mismatch.is_none_or(|d| d == 0)
            && self.projector_gap.is_none_or(|d| d <= 1e-9)
    }
}

impl std::fmt::Display for BasisReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "max|CB| {:.3e}, min entry {:.3e}, row-sum deviation {:.3e}",
            self.max_cb, self.min_entry, self.max_row_sum_deviation
        )?;
        if let (Some(rd), Some(nm), Some(pg)) = (self.rank_deficiency, self.nullity_mismatch, self.projector_gap) {
            write!(f, ", rank deficiency {rd}, nullity mismatch {nm}, projector gap {pg:.3e}")?;
        }
        Ok(())
    }
}

/// Largest `n_pw` for which the dense rank checks run.
pub const DENSE_CHECK_LIMIT: usize = 400;

fn dense(m: &SparseMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.n_rows(), m.n_cols(), |i, j| m.get(i, j))
}

/// Singular values above this fraction of the largest count towards the rank.
const RANK_TOL: f64 = 1e-9;

/// Orthonormal basis of the column span and the rank.
fn column_span(d: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    if d.ncols() == 0 || d.nrows() == 0 {
        return (DMatrix::zeros(d.nrows(), 0), 0);
    }
    let tol = RANK_TOL * d.norm().max(1.0);
    let svd = d.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors were requested");
    let r = svd.singular_values.iter().filter(|&&s| s > tol).count();
    (u.columns(0, r).into_owned(), r)
}

/// Orthogonal projector onto the column span of `d`.
fn span_projector(d: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let (u, r) = column_span(d);
    (&u * u.transpose(), r)
}

/// Orthogonal projector onto `null(C)` and `rank(C)`. The null space is
/// spanned by the eigenvectors of `CᵀC` with the smallest eigenvalues; they
/// are re-orthonormalized because the eigen solver does not guarantee
/// orthogonality inside clusters of (near) zero eigenvalues.
fn nullspace_projector(c: &SparseMatrix) -> (DMatrix<f64>, usize) {
    let n = c.n_cols();
    let d = dense(c);
    let (_, rank) = column_span(&d.transpose());
    if rank == 0 {
        return (DMatrix::identity(n, n), 0);
    }
    if rank == n {
        return (DMatrix::zeros(n, n), rank);
    }
    let eig = (d.transpose() * &d).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let v = DMatrix::from_fn(n, n - rank, |i, j| eig.eigenvectors[(i, order[j])]);
    let q = v.qr().q();
    (&q * q.transpose(), rank)
}

pub fn verify_basis(c: &SparseMatrix, b: &SparseMatrix) -> Result<BasisReport> {
    let cb = c.multiply(b)?;
    let max_row_nnz = (0..b.n_rows()).map(|i| b.row_nnz(i)).max().unwrap_or(0);
    let (rank_deficiency, nullity_mismatch, projector_gap) = if b.n_rows() <= DENSE_CHECK_LIMIT {
        let (pb, rb) = span_projector(&dense(b));
        let (pc, rc) = nullspace_projector(c);
        (Some(b.n_cols() - rb), Some(b.n_cols() as isize - (c.n_cols() - rc) as isize), Some((pb - pc).norm()))
    } else {
        (None, None, None)
    };
    Ok(BasisReport {
        max_cb: cb.max_abs(),
        max_c: c.max_abs(),
        min_entry: b.values().iter().copied().fold(f64::INFINITY, f64::min).min(0.0),
        max_row_sum_deviation: b.row_sums().iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max),
        rank_deficiency,
        nullity_mismatch,
        projector_gap,
        max_row_nnz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::build_constraints;
    use crate::geometry::fixtures::*;
    use crate::geometry::MultiPatch;

    fn run(mp: &MultiPatch) -> (ConstraintMatrix, GlobalBasis) {
        let cm = build_constraints(mp).unwrap();
        let gb = nullspace_basis(&cm).unwrap();
        (cm, gb)
    }

    #[test]
    fn no_constraints_gives_identity() {
        let mp = unit_square(2, 4);
        let (cm, gb) = run(&mp);
        assert_eq!(cm.c.n_rows(), 0);
        assert_eq!(gb.b, SparseMatrix::identity(mp.num_patchwise_dofs()));
        assert!(verify_basis(&cm.c, &gb.b).unwrap().passes());
    }

    #[test]
    fn matching_linear_pair_merges_two_functions() {
        let mp = strip(1, 1);
        let (cm, gb) = run(&mp);
        assert_eq!(gb.n_global(), 6);
        let merged: Vec<usize> = (0..6).filter(|&k| (0..8).filter(|&i| gb.b.get(i, k) == 1.0).count() == 2).collect();
        assert_eq!(merged.len(), 2);
        let report = verify_basis(&cm.c, &gb.b).unwrap();
        assert!(report.passes(), "{report:?}");
        let bd = DMatrix::from_fn(8, 6, |i, j| gb.b.get(i, j));
        assert!((span_projector(&bd).0 - nullspace_projector(&cm.c).0).norm() <= 1e-9);
    }

    #[test]
    fn t_junction_layout_span_matches_dense_nullspace() {
        for p in 1..=2 {
            let mp = strip(p, if p == 1 { 2 } else { 4 }).split_patch(1).unwrap();
            let (cm, gb) = run(&mp);
            let n = mp.num_patchwise_dofs();
            let report = verify_basis(&cm.c, &gb.b).unwrap();
            assert!(report.passes(), "{report:?}");
            assert_eq!(gb.eliminated_dofs.len(), n - gb.n_global());
            let bd = DMatrix::from_fn(n, gb.n_global(), |i, j| gb.b.get(i, j));
            assert!((span_projector(&bd).0 - nullspace_projector(&cm.c).0).norm() <= 1e-9);
            // hanging DOFs carry fractional weights
            assert!(gb.b.values().iter().any(|&v| v > 1e-12 && v < 1.0 - 1e-12));
        }
    }

    #[test]
    fn lshape_level3_passes_all_checks() {
        let mut mp = lshape(1, 2);
        for target in [1usize, 0, 2] {
            let k = mp.patches.iter().position(|p| p.root == target && p.level == 0).unwrap();
            mp = mp.split_patch(k).unwrap();
        }
        let k = mp.patches.iter().position(|p| p.root == 1 && p.level == 1).unwrap();
        mp = mp.split_patch(k).unwrap();
        let (cm, gb) = run(&mp);
        let report = verify_basis(&cm.c, &gb.b).unwrap();
        assert!(report.passes(), "{report:?}");
        assert!(report.rank_deficiency.is_some());
        assert!(gb.eliminated_dofs.len() <= cm.c.n_rows());
    }

    #[test]
    fn negated_entry_is_flagged() {
        let b = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 1, -1.0)]).unwrap();
        let c = SparseMatrix::zeros(0, 2);
        let r = verify_basis(&c, &b).unwrap();
        assert_eq!(r.min_entry, -1.0);
        assert!(!r.passes());
    }

    #[test]
    fn stalled_elimination_is_reported() {
        // rows with two positive and two negative entries are never usable
        let c = SparseMatrix::from_dense(&[vec![1.0, 1.0, -1.0, -1.0]]).unwrap();
        let cm = ConstraintMatrix { c, row_meta: vec![], dof_offsets: vec![0, 4] };
        assert!(matches!(nullspace_basis(&cm), Err(Error::EliminationStalled { steps: 0, remaining: 1 })));
    }
}
