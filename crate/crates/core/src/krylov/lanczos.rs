use crate::error::{check_dim, Error, Result};
use crate::verify::{jacobi_eigen, DenseMatrix};

use super::vecops::{axpy, dot, norm};
use super::LinearOperator;

/// Symmetric tridiagonal matrix with diagonal `α₁..α_k` and off-diagonal
/// `η₂..η_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if off.len() + 1 != diag.len() && !(diag.is_empty() && off.is_empty()) {
            return Err(Error::InvalidArgument(format!(
                "tridiagonal needs {} off-diagonal entries, got {}",
                diag.len().saturating_sub(1),
                off.len()
            )));
        }
        Ok(Self { diag, off })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let k = self.dim();
        let mut d = DenseMatrix::zeros(k, k);
        for i in 0..k {
            d.set(i, i, self.diag[i]);
            if i + 1 < k {
                d.set(i, i + 1, self.off[i]);
                d.set(i + 1, i, self.off[i]);
            }
        }
        d
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        if self.dim() == 0 {
            return Ok(Vec::new());
        }
        Ok(jacobi_eigen(&self.to_dense())?.values)
    }
}

#[derive(Debug, Clone)]
pub struct LanczosResult {
    pub t: SymTridiagonal,
    /// Orthonormal Lanczos vectors `u₁..u_k`.
    pub basis: Vec<Vec<f64>>,
    /// The Krylov space became invariant before `k` steps.
    pub invariant: bool,
}

/// `k` steps of symmetric Lanczos with full reorthogonalization. Stops
/// early when `η` vanishes (invariant subspace).
pub fn lanczos<O: LinearOperator + ?Sized>(op: &O, v0: &[f64], k: usize) -> Result<LanczosResult> {
    let n = op.dim();
    check_dim("lanczos start vector", n, v0.len())?;
    let v0n = norm(v0);
    if v0n == 0.0 {
        return Err(Error::InvalidArgument("lanczos start vector is zero".into()));
    }
    let mut basis = vec![v0.iter().map(|v| v / v0n).collect::<Vec<_>>()];
    let mut diag = Vec::with_capacity(k);
    let mut off = Vec::with_capacity(k);
    let mut invariant = false;
    let mut w = vec![0.0; n];
    for j in 0..k.min(n) {
        op.apply(&basis[j], &mut w)?;
        let a = dot(&w, &basis[j]);
        diag.push(a);
        // two passes of Gram–Schmidt against the whole basis
        for _ in 0..2 {
            for u in &basis {
                let h = dot(&w, u);
                axpy(-h, u, &mut w);
            }
        }
        if j + 1 == k.min(n) {
            break;
        }
        let eta = norm(&w);
        let scale = a.abs().max(off.last().copied().unwrap_or(0.0));
        if eta <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
            invariant = true;
            break;
        }
        off.push(eta);
        basis.push(w.iter().map(|v| v / eta).collect());
    }
    if diag.len() < k {
        invariant = true;
    }
    Ok(LanczosResult {
        t: SymTridiagonal::new(diag, off)?,
        basis,
        invariant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::CsrMatrix;

    #[test]
    fn eigenvector_start() {
        let a = CsrMatrix::from_diagonal(&[1.0, 2.0, 3.0]);
        let r = lanczos(&a, &[1.0, 0.0, 0.0], 1).unwrap();
        assert_eq!(r.t.diag, vec![1.0]);
        let r = lanczos(&a, &[1.0, 0.0, 0.0], 3).unwrap();
        assert!(r.invariant);
        assert_eq!(r.t.dim(), 1);
    }

    #[test]
    fn two_by_two_spectrum() {
        let a = CsrMatrix::from_diagonal(&[1.0, 2.0]);
        let s = 0.5f64.sqrt();
        let r = lanczos(&a, &[s, s], 2).unwrap();
        let ev = r.t.eigenvalues().unwrap();
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_start_is_rejected() {
        assert!(lanczos(&CsrMatrix::identity(2), &[0.0, 0.0], 1).is_err());
    }
}
