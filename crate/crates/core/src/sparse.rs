//! Compressed sparse row matrices and the handful of kernels the solver
//! pipeline needs.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Entries with magnitude at or below this are dropped on compaction.
pub const COMPACTION_THRESHOLD: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self { n_rows, n_cols, row_ptr: vec![0; n_rows + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self { n_rows: n, n_cols: n, row_ptr: (0..=n).collect(), col_idx: (0..n).collect(), values: vec![1.0; n] }
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed
    /// and entries below [`COMPACTION_THRESHOLD`] are dropped.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        Self::from_triplets_with_threshold(n_rows, n_cols, triplets, COMPACTION_THRESHOLD)
    }

    pub fn from_triplets_with_threshold(
        n_rows: usize,
        n_cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
        threshold: f64,
    ) -> Result<Self> {
        let mut t: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        if let Some(&(r, c, _)) = t.iter().find(|&&(r, c, _)| r >= n_rows || c >= n_cols) {
            return Err(Error::DimensionMismatch(format!("entry ({r}, {c}) outside {n_rows}x{n_cols} matrix")));
        }
        t.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(t.len());
        let mut values = Vec::with_capacity(t.len());
        let mut i = 0;
        while i < t.len() {
            let (r, c, mut v) = t[i];
            i += 1;
            while i < t.len() && t[i].0 == r && t[i].1 == c {
                v += t[i].2;
                i += 1;
            }
            if v.abs() > threshold {
                row_ptr[r + 1] += 1;
                col_idx.push(c);
                values.push(v);
            }
        }
        for r in 0..n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self { n_rows, n_cols, row_ptr, col_idx, values })
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::DimensionMismatch("ragged dense rows".into()));
        }
        Self::from_triplets(
            n_rows,
            n_cols,
            rows.iter().enumerate().flat_map(|(i, r)| r.iter().enumerate().map(move |(j, &v)| (i, j, v))),
        )
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`, ascending by column.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for c in 0..self.n_cols {
            counts[c + 1] += counts[c];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                let k = next[j];
                col_idx[k] = i;
                values[k] = v;
                next[j] += 1;
            }
        }
        Self { n_rows: self.n_cols, n_cols: self.n_rows, row_ptr, col_idx, values }
    }

    /// Sparse product `self * rhs` (row-wise Gustavson accumulation).
    pub fn multiply(&self, rhs: &SparseMatrix) -> Result<SparseMatrix> {
        if self.n_cols != rhs.n_rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.n_rows, self.n_cols, rhs.n_rows, rhs.n_cols
            )));
        }
        let mut row_ptr = Vec::with_capacity(self.n_rows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut acc = vec![0.0; rhs.n_cols];
        let mut marker = vec![usize::MAX; rhs.n_cols];
        let mut touched = Vec::new();
        for i in 0..self.n_rows {
            touched.clear();
            for (k, a) in self.row(i) {
                for (j, b) in rhs.row(k) {
                    if marker[j] != i {
                        marker[j] = i;
                        acc[j] = 0.0;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                if acc[j].abs() > COMPACTION_THRESHOLD {
                    col_idx.push(j);
                    values.push(acc[j]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(SparseMatrix { n_rows: self.n_rows, n_cols: rhs.n_cols, row_ptr, col_idx, values })
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_cols {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} for {}x{} matrix",
                x.len(),
                self.n_rows,
                self.n_cols
            )));
        }
        let mut y = vec![0.0; self.n_rows];
        self.mul_vec_into(x, &mut y);
        Ok(y)
    }

    /// `y = self * x` without shape checks; used in inner solver loops.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn transpose_mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_rows {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} for transpose of {}x{} matrix",
                x.len(),
                self.n_rows,
                self.n_cols
            )));
        }
        let mut y = vec![0.0; self.n_cols];
        for (i, &xi) in x.iter().enumerate() {
            for (j, v) in self.row(i) {
                y[j] += v * xi;
            }
        }
        Ok(y)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    /// Rows `rows` and columns `cols` of `self`, renumbered in the given order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Result<SparseMatrix> {
        let mut col_map = vec![usize::MAX; self.n_cols];
        for (new, &old) in cols.iter().enumerate() {
            if old >= self.n_cols {
                return Err(Error::DimensionMismatch(format!("column {old} out of range")));
            }
            col_map[old] = new;
        }
        let mut triplets = Vec::new();
        for (new_i, &i) in rows.iter().enumerate() {
            if i >= self.n_rows {
                return Err(Error::DimensionMismatch(format!("row {i} out of range")));
            }
            for (j, v) in self.row(i) {
                if col_map[j] != usize::MAX {
                    triplets.push((new_i, col_map[j], v));
                }
            }
        }
        SparseMatrix::from_triplets(rows.len(), cols.len(), triplets)
    }

    pub fn select_cols(&self, cols: &[usize]) -> Result<SparseMatrix> {
        let rows: Vec<usize> = (0..self.n_rows).collect();
        self.submatrix(&rows, cols)
    }

    /// Applies the elimination step `M R` with
    /// `R = I - e_n (e_m^T W) / W[m, n]`, i.e. every column `j` of `self`
    /// loses `W[m, j] / W[m, n]` times column `n`.
    pub fn right_rank1_update(&self, w: &SparseMatrix, m: usize, n: usize) -> Result<SparseMatrix> {
        if w.n_cols != self.n_cols || m >= w.n_rows || n >= w.n_cols {
            return Err(Error::DimensionMismatch("rank-1 update indices out of range".into()));
        }
        let pivot = w.get(m, n);
        if pivot == 0.0 {
            return Err(Error::Precondition(format!("zero pivot at ({m}, {n})")));
        }
        let factors: Vec<(usize, f64)> = w.row(m).map(|(j, v)| (j, v / pivot)).collect();
        let mut triplets: Vec<(usize, usize, f64)> = self.triplets().collect();
        for i in 0..self.n_rows {
            let b_in = self.get(i, n);
            if b_in != 0.0 {
                for &(j, f) in &factors {
                    triplets.push((i, j, -f * b_in));
                }
            }
        }
        SparseMatrix::from_triplets(self.n_rows, self.n_cols, triplets)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (i, j, v) in self.triplets() {
            d[i][j] = v;
        }
        d
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        if self.n_rows != self.n_cols {
            return false;
        }
        let tol = rel_tol * self.max_abs();
        self.triplets().all(|(i, j, v)| (v - self.get(j, i)).abs() <= tol)
    }

    /// Coordinate text dump: header `rows cols nnz`, then one `row col value`
    /// triplet per line.
    pub fn write_coordinate<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {} {}", self.n_rows, self.n_cols, self.nnz())?;
        for (i, j, v) in self.triplets() {
            writeln!(out, "{i} {j} {v:.17e}")?;
        }
        Ok(())
    }

    pub fn read_coordinate<R: BufRead>(input: R) -> Result<SparseMatrix> {
        let perr = |line: usize, msg: &str| Error::Parse { location: format!("line {line}"), message: msg.to_string() };
        let mut lines = input.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| perr(1, "missing header"))?;
        let header = header.map_err(|e| perr(1, &e.to_string()))?;
        let dims: Vec<usize> =
            header.split_whitespace().map(|t| t.parse().map_err(|_| perr(1, "bad header"))).collect::<Result<_>>()?;
        if dims.len() != 3 {
            return Err(perr(1, "header must be 'rows cols nnz'"));
        }
        let mut triplets = Vec::with_capacity(dims[2]);
        for (k, line) in lines {
            let line = line.map_err(|e| perr(k + 1, &e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 3 {
                return Err(perr(k + 1, "expected 'row col value'"));
            }
            let i = t[0].parse().map_err(|_| perr(k + 1, "bad row"))?;
            let j = t[1].parse().map_err(|_| perr(k + 1, "bad col"))?;
            let v = t[2].parse().map_err(|_| perr(k + 1, "bad value"))?;
            triplets.push((i, j, v));
        }
        if triplets.len() != dims[2] {
            return Err(perr(1, "nnz does not match number of triplets"));
        }
        SparseMatrix::from_triplets_with_threshold(dims[0], dims[1], triplets, 0.0)
    }
}

/// `v[idx]` as a new vector.
pub fn gather(v: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| v[i]).collect()
}

/// Places `vals[k]` at position `idx[k]` of a zero vector of length `n`.
pub fn scatter(vals: &[f64], idx: &[usize], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (&i, &v) in idx.iter().zip(vals) {
        out[i] = v;
    }
    out
}

/// Block-diagonal assembly of square blocks.
pub fn block_diagonal(blocks: &[SparseMatrix]) -> Result<SparseMatrix> {
    let n: usize = blocks.iter().map(SparseMatrix::n_rows).sum();
    let mut triplets = Vec::with_capacity(blocks.iter().map(SparseMatrix::nnz).sum());
    let mut offset = 0;
    for b in blocks {
        if b.n_rows != b.n_cols {
            return Err(Error::DimensionMismatch("block_diagonal needs square blocks".into()));
        }
        triplets.extend(b.triplets().map(|(i, j, v)| (i + offset, j + offset, v)));
        offset += b.n_rows;
    }
    SparseMatrix::from_triplets_with_threshold(n, n, triplets, 0.0)
}
