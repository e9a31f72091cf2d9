use crate::error::{check_dim, Error, Result};

use super::CsrMatrix;

/// Dense `nrows x ncols` block stored column-major. This is the unit the
/// global Krylov methods operate on; the action of `A ⊗ I_s` on an
/// interleaved vector is realised as `A` applied to each column.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiVector {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl MultiVector {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        assert!(ncols >= 1, "MultiVector needs at least one column");
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    /// Column-major data.
    pub fn from_col_major(nrows: usize, ncols: usize, data: Vec<f64>) -> Result<Self> {
        if ncols == 0 {
            return Err(Error::InvalidArgument("MultiVector needs at least one column".into()));
        }
        check_dim("MultiVector data", nrows * ncols, data.len())?;
        Ok(Self { nrows, ncols, data })
    }

    /// Row-major nested rows, convenient for literals in tests.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut mv = Self::from_col_major(nrows, ncols, vec![0.0; nrows * ncols])?;
        for (i, r) in rows.iter().enumerate() {
            check_dim("MultiVector row", ncols, r.len())?;
            for (j, &v) in r.iter().enumerate() {
                mv.set(i, j, v);
            }
        }
        Ok(mv)
    }

    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        let ncols = cols.len();
        let nrows = cols.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(nrows * ncols);
        for c in cols {
            check_dim("MultiVector column", nrows, c.len())?;
            data.extend_from_slice(c);
        }
        Self::from_col_major(nrows, ncols, data)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.nrows + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.nrows + i] = v;
    }

    pub fn same_shape(&self, other: &MultiVector) -> bool {
        self.nrows == other.nrows && self.ncols == other.ncols
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// self += a * x
    pub fn axpy(&mut self, a: f64, x: &MultiVector) {
        debug_assert!(self.same_shape(x));
        for (s, v) in self.data.iter_mut().zip(&x.data) {
            *s += a * v;
        }
    }

    /// self = x + b * self
    pub fn xpby(&mut self, x: &MultiVector, b: f64) {
        debug_assert!(self.same_shape(x));
        for (s, v) in self.data.iter_mut().zip(&x.data) {
            *s = v + b * *s;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Column-wise product `A·X`; equals the action of `A ⊗ I_s` without
/// forming the Kronecker product.
pub fn mv_apply(a: &CsrMatrix, x: &MultiVector) -> Result<MultiVector> {
    check_dim("mv_apply", a.ncols(), x.nrows())?;
    let mut out = MultiVector::zeros(a.nrows(), x.ncols());
    for j in 0..x.ncols() {
        a.spmv_into(x.col(j), out.col_mut(j))?;
    }
    Ok(out)
}

/// `⟨X, Y⟩_F = Trace(Xᵀ Y)`.
pub fn frobenius_inner(x: &MultiVector, y: &MultiVector) -> Result<f64> {
    if !x.same_shape(y) {
        return Err(Error::DimensionMismatch {
            context: "frobenius_inner",
            expected: x.nrows() * x.ncols(),
            got: y.nrows() * y.ncols(),
        });
    }
    Ok(x.as_slice().iter().zip(y.as_slice()).map(|(a, b)| a * b).sum())
}

/// Diamond product of two lists of equally shaped blocks:
/// entry `(i, j)` is `⟨Y_i, Z_j⟩_F`. Returned row-major, `s x r`.
pub fn diamond(ys: &[MultiVector], zs: &[MultiVector]) -> Result<Vec<f64>> {
    let Some(first) = ys.first().or(zs.first()) else {
        return Ok(Vec::new());
    };
    for b in ys.iter().chain(zs) {
        if !b.same_shape(first) {
            return Err(Error::InvalidArgument(format!(
                "diamond: block {}x{} does not match {}x{}",
                b.nrows(),
                b.ncols(),
                first.nrows(),
                first.ncols()
            )));
        }
    }
    let r = zs.len();
    let mut out = vec![0.0; ys.len() * r];
    for (i, y) in ys.iter().enumerate() {
        for (j, z) in zs.iter().enumerate() {
            out[i * r + j] = frobenius_inner(y, z)?;
        }
    }
    Ok(out)
}
