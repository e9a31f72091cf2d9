use crate::error::{check_dim, Error, Result};
use crate::sparse::CsrMatrix;

use super::Preconditioner;

/// Zero-fill incomplete Cholesky factor `A ≈ G Gᵀ`, `G` lower triangular
/// on the pattern of `lower(A)`.
#[derive(Debug, Clone)]
pub struct IcholFactor {
    g: CsrMatrix,
    gt: CsrMatrix,
}

pub fn ichol0(a: &CsrMatrix) -> Result<IcholFactor> {
    ichol0_shifted(a, 0.0)
}

/// IC(0) of `A + shift·diag(A)`.
pub fn ichol0_shifted(a: &CsrMatrix, shift: f64) -> Result<IcholFactor> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::InvalidMatrix(format!("ichol0 needs a square matrix, got {n}x{}", a.ncols())));
    }
    let scale = a.max_abs();
    if a.symmetry_defect() > 1e-12 * scale {
        return Err(Error::InvalidMatrix("ichol0 needs a symmetric matrix".into()));
    }
    let lower = a.lower();
    let rp = lower.row_ptr();
    let ci = lower.col_idx();
    let av = lower.values();

    let mut vals = vec![0.0; lower.nnz()];
    let mut diag = vec![0.0; n];
    let mut work = vec![0.0; n];
    for i in 0..n {
        let (start, end) = (rp[i], rp[i + 1]);
        let has_diag = end > start && ci[end - 1] == i;
        if !has_diag {
            return Err(Error::IcholPivot { row: i, value: 0.0 });
        }
        for p in start..end - 1 {
            let j = ci[p];
            let mut s = av[p];
            for q in rp[j]..rp[j + 1] - 1 {
                s -= vals[q] * work[ci[q]];
            }
            let lij = s / diag[j];
            vals[p] = lij;
            work[j] = lij;
        }
        let mut d = av[end - 1] * (1.0 + shift);
        for p in start..end - 1 {
            d -= vals[p] * vals[p];
        }
        if !(d > 0.0) {
            return Err(Error::IcholPivot { row: i, value: d });
        }
        diag[i] = d.sqrt();
        vals[end - 1] = diag[i];
        for p in start..end - 1 {
            work[ci[p]] = 0.0;
        }
    }
    let g = CsrMatrix::from_raw(n, n, rp.to_vec(), ci.to_vec(), vals)?;
    let gt = g.transpose();
    Ok(IcholFactor { g, gt })
}

impl IcholFactor {
    /// Exact factor supplied by the caller, e.g. a dense Cholesky factor.
    pub fn from_lower(g: CsrMatrix) -> Result<Self> {
        if g.nrows() != g.ncols() {
            return Err(Error::InvalidMatrix("factor must be square".into()));
        }
        for i in 0..g.nrows() {
            let (c, _) = g.row(i);
            if c.last() != Some(&i) {
                return Err(Error::InvalidMatrix(format!("row {i} of factor is not lower triangular with diagonal")));
            }
            if g.get(i, i) == 0.0 {
                return Err(Error::Singular(i));
            }
        }
        let gt = g.transpose();
        Ok(Self { g, gt })
    }

    pub fn identity(n: usize) -> Self {
        let g = CsrMatrix::identity(n);
        Self { gt: g.clone(), g }
    }

    pub fn factor(&self) -> &CsrMatrix {
        &self.g
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    /// Solve `G y = b` in place.
    pub fn solve_lower_in_place(&self, x: &mut [f64]) -> Result<()> {
        check_dim("ichol lower solve", self.dim(), x.len())?;
        for i in 0..self.dim() {
            let (c, v) = self.g.row(i);
            let last = c.len() - 1;
            let mut s = x[i];
            for k in 0..last {
                s -= v[k] * x[c[k]];
            }
            x[i] = s / v[last];
        }
        Ok(())
    }

    /// Solve `Gᵀ x = y` in place.
    pub fn solve_upper_in_place(&self, x: &mut [f64]) -> Result<()> {
        check_dim("ichol upper solve", self.dim(), x.len())?;
        for i in (0..self.dim()).rev() {
            let (c, v) = self.gt.row(i);
            let mut s = x[i];
            for k in 1..c.len() {
                s -= v[k] * x[c[k]];
            }
            x[i] = s / v[0];
        }
        Ok(())
    }

    pub fn solve_lower(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x)?;
        Ok(x)
    }

    pub fn solve_upper(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = b.to_vec();
        self.solve_upper_in_place(&mut x)?;
        Ok(x)
    }

    /// `(G Gᵀ)⁻¹ r`.
    pub fn solve(&self, r: &[f64]) -> Result<Vec<f64>> {
        let mut x = r.to_vec();
        self.solve_lower_in_place(&mut x)?;
        self.solve_upper_in_place(&mut x)?;
        Ok(x)
    }

    /// `max |(G Gᵀ)_ij − A_ij| / max |A|` over the pattern of `lower(A)`.
    pub fn pattern_residual(&self, a: &CsrMatrix) -> Result<f64> {
        check_dim("pattern residual", self.dim(), a.nrows())?;
        let mut worst = 0.0f64;
        let mut row_i = vec![0.0; self.dim()];
        for i in 0..a.nrows() {
            let (gc, gv) = self.g.row(i);
            for (&k, &v) in gc.iter().zip(gv) {
                row_i[k] = v;
            }
            let (ac, av) = a.row(i);
            for (&j, &aij) in ac.iter().zip(av) {
                if j > i {
                    continue;
                }
                let (jc, jv) = self.g.row(j);
                let prod: f64 = jc.iter().zip(jv).map(|(&k, &v)| v * row_i[k]).sum();
                worst = worst.max((prod - aij).abs());
            }
            for &k in gc {
                row_i[k] = 0.0;
            }
        }
        let scale = a.max_abs();
        Ok(if scale > 0.0 { worst / scale } else { worst })
    }

    /// `G Gᵀ` as a sparse matrix.
    pub fn product(&self) -> Result<CsrMatrix> {
        self.g.matmul(&self.gt)
    }
}

impl Preconditioner for IcholFactor {
    fn dim(&self) -> usize {
        self.g.nrows()
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        check_dim("ichol output", self.dim(), z.len())?;
        z.copy_from_slice(r);
        self.solve_lower_in_place(z)?;
        self.solve_upper_in_place(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_factor() {
        let f = ichol0(&CsrMatrix::from_diagonal(&[4.0, 9.0])).unwrap();
        assert_eq!(f.factor().to_dense(), vec![2.0, 0.0, 0.0, 3.0]);
    }

    #[test]
    fn two_by_two_hand_cholesky() {
        let a = CsrMatrix::from_dense(2, 2, &[4.0, -1.0, -1.0, 4.0]).unwrap();
        let f = ichol0(&a).unwrap();
        let g = f.factor().to_dense();
        assert!((g[0] - 2.0).abs() < 1e-15);
        assert!((g[2] + 0.5).abs() < 1e-15);
        assert!((g[3] - 3.75f64.sqrt()).abs() < 1e-15);
        assert_eq!(g[1], 0.0);
    }

    #[test]
    fn zero_pivot_is_reported() {
        let a = CsrMatrix::from_dense(2, 2, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(ichol0(&a), Err(Error::IcholPivot { row: 1, .. })));
        let a = CsrMatrix::from_dense(2, 2, &[1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(matches!(ichol0(&a), Err(Error::IcholPivot { row: 1, .. })));
    }

    #[test]
    fn shift_rescues_indefinite_pivot() {
        let a = CsrMatrix::from_dense(2, 2, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(ichol0(&a).is_err());
        assert!(ichol0_shifted(&a, 1e-3).is_ok());
    }

    #[test]
    fn solves_invert_product() {
        let a = CsrMatrix::from_dense(3, 3, &[4.0, -1.0, 0.0, -1.0, 4.0, -1.0, 0.0, -1.0, 4.0]).unwrap();
        let f = ichol0(&a).unwrap();
        // tridiagonal: IC(0) is exact Cholesky
        let x = f.solve(&a.spmv(&[1.0, 2.0, 3.0]).unwrap()).unwrap();
        for (xi, e) in x.iter().zip([1.0, 2.0, 3.0]) {
            assert!((xi - e).abs() < 1e-14);
        }
        assert!(f.pattern_residual(&a).unwrap() < 1e-15);
    }
}
