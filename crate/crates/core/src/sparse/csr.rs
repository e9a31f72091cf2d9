//! Compressed sparse row storage.
//!
//! Every block of the saddle system and every incomplete factor lives in a
//! [`CsrMatrix`]. Construction goes through a coordinate buffer that is sorted
//! and compressed exactly once, so a matrix built here always satisfies the
//! canonical-form invariants: nondecreasing `row_ptr`, strictly increasing
//! column indices per row and no duplicates.

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Coordinate-format accumulator. Duplicate entries are summed on
/// [`TripletBuilder::build`].
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sort, sum duplicates and compress. Entries that sum to exactly zero
    /// are kept so assembled sparsity patterns are structural.
    pub fn build(mut self) -> Result<CsrMatrix> {
        for &(r, c, _) in &self.entries {
            if r >= self.nrows || c >= self.ncols {
                return Err(Error::InvalidMatrix(format!(
                    "entry ({r}, {c}) outside {}x{}",
                    self.nrows, self.ncols
                )));
            }
        }
        self.entries.sort_by_key(|e| (e.0, e.1));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().expect("nonempty") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..self.nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        })
    }
}

impl CsrMatrix {
    /// Build from raw CSR arrays, validating every structural invariant.
    pub fn from_raw(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != nrows + 1 {
            return Err(Error::InvalidMatrix(format!(
                "row_ptr has length {}, expected {}",
                row_ptr.len(),
                nrows + 1
            )));
        }
        if row_ptr[0] != 0 || row_ptr[nrows] != col_idx.len() || col_idx.len() != values.len() {
            return Err(Error::InvalidMatrix(
                "row_ptr endpoints inconsistent with nnz".into(),
            ));
        }
        for i in 0..nrows {
            if row_ptr[i] > row_ptr[i + 1] {
                return Err(Error::InvalidMatrix(format!("row_ptr decreases at row {i}")));
            }
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            for w in cols.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::InvalidMatrix(format!(
                        "columns not strictly increasing in row {i}"
                    )));
                }
            }
            if let Some(&c) = cols.last() {
                if c >= ncols {
                    return Err(Error::InvalidMatrix(format!(
                        "column {c} out of range in row {i}"
                    )));
                }
            }
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    /// Dense row-major input; exact zeros are dropped.
    pub fn from_dense(nrows: usize, ncols: usize, data: &[f64]) -> Result<Self> {
        check_dim("CsrMatrix::from_dense", nrows * ncols, data.len())?;
        let mut b = TripletBuilder::new(nrows, ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                let v = data[i * ncols + j];
                if v != 0.0 {
                    b.push(i, j, v);
                }
            }
        }
        b.build()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[s..e], &self.values[s..e])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// y = A x, summing each row left to right.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.nrows];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_dim("spmv input", self.ncols, x.len())?;
        check_dim("spmv output", self.nrows, y.len())?;
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
        Ok(())
    }

    /// y += s * A x.
    pub fn spmv_acc(&self, s: f64, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_dim("spmv input", self.ncols, x.len())?;
        check_dim("spmv output", self.nrows, y.len())?;
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi += s * acc;
        }
        Ok(())
    }

    /// y = Aᵀ x.
    pub fn spmv_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("spmv_transpose input", self.nrows, x.len())?;
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[k]] += self.values[k] * xi;
            }
        }
        Ok(y)
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        // rows are visited in increasing order, so each output row stays sorted
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let c = self.col_idx[k];
                let dst = next[c];
                col_idx[dst] = i;
                values[dst] = self.values[k];
                next[c] += 1;
            }
        }
        CsrMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Sparse product self * other.
    pub fn matmul(&self, other: &CsrMatrix) -> Result<CsrMatrix> {
        check_dim("matmul inner dimension", self.ncols, other.nrows)?;
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut acc = vec![0.0; other.ncols];
        let mut marker = vec![usize::MAX; other.ncols];
        let mut touched = Vec::new();
        for i in 0..self.nrows {
            touched.clear();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let a = self.values[k];
                let r = self.col_idx[k];
                for kk in other.row_ptr[r]..other.row_ptr[r + 1] {
                    let c = other.col_idx[kk];
                    if marker[c] != i {
                        marker[c] = i;
                        acc[c] = 0.0;
                        touched.push(c);
                    }
                    acc[c] += a * other.values[kk];
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                col_idx.push(c);
                values.push(acc[c]);
            }
            row_ptr[i + 1] = col_idx.len();
        }
        Ok(CsrMatrix {
            nrows: self.nrows,
            ncols: other.ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// a * self + b * other with the union pattern.
    pub fn linear_combination(&self, a: f64, other: &CsrMatrix, b: f64) -> Result<CsrMatrix> {
        check_dim("linear_combination rows", self.nrows, other.nrows)?;
        check_dim("linear_combination cols", self.ncols, other.ncols)?;
        let mut tb = TripletBuilder::with_capacity(self.nrows, self.ncols, self.nnz() + other.nnz());
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                tb.push(i, j, a * x);
            }
            let (c, v) = other.row(i);
            for (&j, &x) in c.iter().zip(v) {
                tb.push(i, j, b * x);
            }
        }
        tb.build()
    }

    /// Scale column j by s[j].
    pub fn scale_columns(&self, s: &[f64]) -> Result<CsrMatrix> {
        check_dim("scale_columns", self.ncols, s.len())?;
        let mut out = self.clone();
        for (v, &c) in out.values.iter_mut().zip(&out.col_idx) {
            *v *= s[c];
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> CsrMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// Keep only entries whose position is stored in `pattern`.
    pub fn restrict_to_pattern(&self, pattern: &CsrMatrix) -> Result<CsrMatrix> {
        check_dim("restrict_to_pattern rows", pattern.nrows, self.nrows)?;
        check_dim("restrict_to_pattern cols", pattern.ncols, self.ncols)?;
        let mut tb = TripletBuilder::new(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (pc, _) = pattern.row(i);
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                if pc.binary_search(&j).is_ok() {
                    tb.push(i, j, x);
                }
            }
        }
        tb.build()
    }

    /// Lower triangle including the diagonal.
    pub fn lower(&self) -> CsrMatrix {
        let mut tb = TripletBuilder::new(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                if j <= i {
                    tb.push(i, j, x);
                }
            }
        }
        tb.build().expect("entries come from a valid matrix")
    }

    /// Drop rows and columns not selected by the maps. `row_map[i]` gives the
    /// new index of old row `i`.
    pub fn submatrix(
        &self,
        row_map: &[Option<usize>],
        new_rows: usize,
        col_map: &[Option<usize>],
        new_cols: usize,
    ) -> Result<CsrMatrix> {
        check_dim("submatrix row map", self.nrows, row_map.len())?;
        check_dim("submatrix col map", self.ncols, col_map.len())?;
        let mut tb = TripletBuilder::new(new_rows, new_cols);
        for i in 0..self.nrows {
            let Some(ni) = row_map[i] else { continue };
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                if let Some(nj) = col_map[j] {
                    tb.push(ni, nj, x);
                }
            }
        }
        tb.build()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.nrows * self.ncols];
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                d[i * self.ncols + j] = x;
            }
        }
        d
    }

    /// Max |A_ij - A_ji| over stored entries and their mirrors.
    pub fn symmetry_defect(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                worst = worst.max((x - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_zero_spmv() {
        let i3 = CsrMatrix::identity(3);
        assert_eq!(i3.spmv(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        let z = CsrMatrix::zeros(2, 2);
        assert_eq!(z.spmv(&[5.0, 7.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn small_nonsymmetric_spmv() {
        let a = CsrMatrix::from_dense(2, 2, &[2.0, 0.0, 1.0, 3.0]).unwrap();
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.spmv(&[1.0, 1.0]).unwrap(), vec![2.0, 4.0]);
    }

    #[test]
    fn spmv_rejects_bad_length() {
        let a = CsrMatrix::identity(3);
        assert!(matches!(
            a.spmv(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn builder_sums_duplicates() {
        let mut b = TripletBuilder::new(2, 2);
        b.push(1, 0, 1.0);
        b.push(0, 1, 2.0);
        b.push(1, 0, 0.5);
        let a = b.build().unwrap();
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(1, 0), 1.5);
        assert_eq!(a.row_ptr(), &[0, 1, 2]);
    }

    #[test]
    fn from_raw_validates() {
        assert!(CsrMatrix::from_raw(2, 2, vec![0, 2, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::from_raw(2, 2, vec![0, 1, 2], vec![0, 2], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::from_raw(1, 2, vec![0, 2], vec![0, 1], vec![1.0, 1.0]).is_ok());
    }

    #[test]
    fn transpose_and_matmul() {
        let a = CsrMatrix::from_dense(2, 3, &[1.0, 0.0, 2.0, 0.0, 3.0, 4.0]).unwrap();
        let at = a.transpose();
        assert_eq!(at.to_dense(), vec![1.0, 0.0, 0.0, 3.0, 2.0, 4.0]);
        let aat = a.matmul(&at).unwrap();
        assert_eq!(aat.to_dense(), vec![5.0, 8.0, 8.0, 25.0]);
        let y = a.spmv_transpose(&[1.0, 1.0]).unwrap();
        assert_eq!(y, vec![1.0, 3.0, 6.0]);
    }
}
