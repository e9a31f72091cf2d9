use crate::error::{check_dim, Error, Result};
use crate::sparse::CsrMatrix;

/// Largest dimension accepted by the dense oracles.
pub const ORACLE_LIMIT: usize = 2000;

pub(crate) fn check_scale(n: usize) -> Result<()> {
    if n > ORACLE_LIMIT {
        Err(Error::OracleScale { n, limit: ORACLE_LIMIT })
    } else {
        Ok(())
    }
}

/// Row-major dense matrix for verification work.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_row_major(nrows: usize, ncols: usize, data: Vec<f64>) -> Result<Self> {
        check_dim("DenseMatrix data", nrows * ncols, data.len())?;
        check_scale(nrows.max(ncols))?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix("dense matrix has non-finite entries".into()));
        }
        Ok(Self { nrows, ncols, data })
    }

    pub fn from_csr(a: &CsrMatrix) -> Result<Self> {
        Self::from_row_major(a.nrows(), a.ncols(), a.to_dense())
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m.set(i, i, v);
        }
        m
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

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.ncols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.ncols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.nrows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        check_dim("dense matmul", self.ncols, other.nrows)?;
        let mut out = Self::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.ncols..(i + 1) * other.ncols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("dense mul_vec", self.ncols, x.len())?;
        Ok((0..self.nrows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &DenseMatrix, b: f64) -> Result<DenseMatrix> {
        check_dim("dense combine rows", self.nrows, other.nrows)?;
        check_dim("dense combine cols", self.ncols, other.ncols)?;
        Ok(DenseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            data: self.data.iter().zip(&other.data).map(|(x, y)| a * x + b * y).collect(),
        })
    }

    pub fn scale(&self, s: f64) -> DenseMatrix {
        DenseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).sum()
    }

    pub fn symmetry_defect(&self) -> f64 {
        let mut d = 0.0f64;
        for i in 0..self.nrows {
            for j in i + 1..self.ncols {
                d = d.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        d
    }

    /// Copy `blk` into rows `r0..` and columns `c0..`.
    pub fn set_block(&mut self, r0: usize, c0: usize, blk: &DenseMatrix) {
        for i in 0..blk.nrows {
            for j in 0..blk.ncols {
                self.set(r0 + i, c0 + j, blk.get(i, j));
            }
        }
    }

    pub fn block(&self, r0: usize, c0: usize, nrows: usize, ncols: usize) -> DenseMatrix {
        let mut b = Self::zeros(nrows, ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                b.set(i, j, self.get(r0 + i, c0 + j));
            }
        }
        b
    }

    pub(crate) fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.nrows, self.ncols, &self.data)
    }
}

/// Dense Cholesky `A = L Lᵀ`; returns lower-triangular `L`.
pub fn cholesky(a: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.nrows();
    check_dim("cholesky", n, a.ncols())?;
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if !(d > 0.0) {
            return Err(Error::NotSpd { index: j, pivot: d });
        }
        let djj = d.sqrt();
        l.set(j, j, djj);
        for i in j + 1..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / djj);
        }
    }
    Ok(l)
}

/// Solve `L y = b` for lower-triangular `L`.
pub fn solve_lower(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.nrows();
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l.get(i, k) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    y
}

/// Solve `Lᵀ x = y` for lower-triangular `L`.
pub fn solve_lower_transpose(l: &DenseMatrix, y: &[f64]) -> Vec<f64> {
    let n = l.nrows();
    let mut x = y.to_vec();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s -= l.get(k, i) * x[k];
        }
        x[i] = s / l.get(i, i);
    }
    x
}

/// Solve `L Lᵀ x = b`.
pub fn cholesky_solve(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    solve_lower_transpose(l, &solve_lower(l, b))
}

/// LU with partial pivoting, `P A = L U` packed in one matrix.
#[derive(Debug, Clone)]
pub struct LuFactor {
    lu: DenseMatrix,
    perm: Vec<usize>,
    sign: f64,
}

impl LuFactor {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        let n = a.nrows();
        check_dim("lu", n, a.ncols())?;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu.get(i, k).abs()))
                .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
            if pmax == 0.0 {
                return Err(Error::Singular(k));
            }
            if p != k {
                for j in 0..n {
                    let t = lu.get(k, j);
                    lu.set(k, j, lu.get(p, j));
                    lu.set(p, j, t);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let d = lu.get(k, k);
            for i in k + 1..n {
                let f = lu.get(i, k) / d;
                lu.set(i, k, f);
                if f != 0.0 {
                    for j in k + 1..n {
                        let v = lu.get(i, j) - f * lu.get(k, j);
                        lu.set(i, j, v);
                    }
                }
            }
        }
        Ok(Self { lu, perm, sign })
    }

    pub fn dim(&self) -> usize {
        self.lu.nrows()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        check_dim("lu solve", n, b.len())?;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.lu.get(i, k) * x[k];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.lu.get(i, k) * x[k];
            }
            x[i] = s / self.lu.get(i, i);
        }
        Ok(x)
    }

    /// `A⁻¹ B` column by column.
    pub fn solve_matrix(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        check_dim("lu solve_matrix", self.dim(), b.nrows())?;
        let mut out = DenseMatrix::zeros(b.nrows(), b.ncols());
        for j in 0..b.ncols() {
            let x = self.solve(&b.column(j))?;
            for (i, v) in x.into_iter().enumerate() {
                out.set(i, j, v);
            }
        }
        Ok(out)
    }

    pub fn det(&self) -> f64 {
        (0..self.dim()).map(|i| self.lu.get(i, i)).product::<f64>() * self.sign
    }

    pub fn inverse(&self) -> Result<DenseMatrix> {
        self.solve_matrix(&DenseMatrix::identity(self.dim()))
    }
}

/// Numerical rank from singular values above `rel_tol·σ_max`.
pub fn rank(a: &DenseMatrix, rel_tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a.to_nalgebra().singular_values();
    let smax = sv.iter().fold(0.0f64, |m, v| m.max(*v));
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_determinant_and_solve() {
        let a = DenseMatrix::from_row_major(3, 3, vec![0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0]).unwrap();
        let lu = LuFactor::new(&a).unwrap();
        // cofactor expansion along the first row: 0 − 2·(1−0) + 1·(0−3)
        assert!((lu.det() + 5.0).abs() < 1e-14);
        let x = lu.solve(&[3.0, 2.0, 4.0]).unwrap();
        let back = a.mul_vec(&x).unwrap();
        for (b, e) in back.iter().zip([3.0, 2.0, 4.0]) {
            assert!((b - e).abs() < 1e-14);
        }
        let inv = lu.inverse().unwrap();
        let id = a.matmul(&inv).unwrap();
        assert!(id.combine(1.0, &DenseMatrix::identity(3), -1.0).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn singular_lu_and_non_spd_cholesky() {
        let a = DenseMatrix::from_row_major(2, 2, vec![1.0, 2.0, 2.0, 4.0]).unwrap();
        assert!(LuFactor::new(&a).is_err());
        assert!(matches!(cholesky(&a), Err(Error::NotSpd { index: 1, .. })));
        assert_eq!(rank(&a, 1e-12), 1);
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = DenseMatrix::from_row_major(3, 3, vec![4.0, 2.0, 0.4, 2.0, 5.0, 1.0, 0.4, 1.0, 3.0]).unwrap();
        let l = cholesky(&a).unwrap();
        let back = l.matmul(&l.transpose()).unwrap();
        assert!(back.combine(1.0, &a, -1.0).unwrap().max_abs() < 1e-14);
        let x = cholesky_solve(&l, &[1.0, 1.0, 1.0]);
        let r = a.mul_vec(&x).unwrap();
        assert!(r.iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn oracle_scale_enforced() {
        assert!(matches!(
            DenseMatrix::from_row_major(2001, 1, vec![0.0; 2001]),
            Err(Error::OracleScale { .. })
        ));
    }
}
