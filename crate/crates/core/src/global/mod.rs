//! Global CG for multi-column systems `A X = H` with one SPD block `A`
//! shared by all columns, plus dense diagnostics for the Krylov-space
//! properties of the split-preconditioned variant.

mod gcg;
mod theory;

pub use gcg::{apply_pinv, gcg, pgcg, pgcg_recorded, DiagnosticsState, DIAGNOSTICS_LIMIT};
pub use theory::{
    error_norm_identity, global_lanczos, orthogonality_profile, p_inner_diamond, p_inner_trace,
    pgcg_orthogonality_check, residual_bound_check, ErrorNormIdentity, GlobalLanczos, ResidualBound,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krylov::{ichol0, KrylovConfig};
    use crate::sparse::{CsrMatrix, MultiVector};

    /// Five-point Laplacian plus a shift on an `m × m` grid.
    fn laplace(n: usize) -> CsrMatrix {
        let m = (n as f64).sqrt() as usize;
        assert_eq!(m * m, n);
        let mut d = vec![0.0; n * n];
        for i in 0..m {
            for j in 0..m {
                let r = i * m + j;
                d[r * n + r] = 4.5;
                if j + 1 < m {
                    d[r * n + r + 1] = -1.0;
                    d[(r + 1) * n + r] = -1.0;
                }
                if i + 1 < m {
                    d[r * n + r + m] = -1.0;
                    d[(r + m) * n + r] = -1.0;
                }
            }
        }
        CsrMatrix::from_dense(n, n, &d).unwrap()
    }

    fn rhs(n: usize) -> MultiVector {
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|j| (0..n).map(|i| ((i * 7 + j * 3) % 5) as f64 - 1.5).collect())
            .collect();
        MultiVector::from_columns(&cols).unwrap()
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let a = laplace(4);
        let (x, rep) = gcg(&a, &MultiVector::zeros(4, 3), &KrylovConfig::default()).unwrap();
        assert!(rep.converged && rep.iterations == 0);
        assert_eq!(x.frobenius_norm(), 0.0);
    }

    #[test]
    fn single_iteration_on_identity() {
        let a = CsrMatrix::identity(5);
        let (x, rep) = gcg(&a, &rhs(5), &KrylovConfig::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        let mut d = x;
        d.axpy(-1.0, &rhs(5));
        assert!(d.frobenius_norm() < 1e-14);
    }

    #[test]
    fn indefinite_breaks_down() {
        let a = CsrMatrix::from_diagonal(&[1.0, -1.0]);
        let h = MultiVector::from_columns(&[vec![1.0, 1.0]]).unwrap();
        assert!(gcg(&a, &h, &KrylovConfig::default()).is_err());
    }

    #[test]
    fn recorded_blocks_follow_recurrence() {
        let a = laplace(16);
        let g = ichol0(&a).unwrap();
        let cfg = KrylovConfig::default().with_tol(1e-10);
        let (_, _, st) = pgcg_recorded(&a, Some(&g), &rhs(16), &cfg).unwrap();
        for w in st.k_blocks.windows(2) {
            let mut next = gcg::apply_block(&a, &apply_pinv(Some(&g), &w[0]).unwrap()).unwrap();
            next.axpy(-1.0, &w[1]);
            assert!(next.frobenius_norm() <= 1e-12 * w[1].frobenius_norm().max(1.0));
        }
        assert!(pgcg_orthogonality_check(&st, Some(&g)).unwrap() < 1e-8);
    }

    #[test]
    fn inner_product_forms_agree() {
        let a = laplace(9);
        let g = ichol0(&a).unwrap();
        let x = rhs(9);
        let mut y = rhs(9);
        y.scale(-0.5);
        y.set(2, 1, 3.0);
        let t = p_inner_trace(&x, &y, Some(&g)).unwrap();
        let d = p_inner_diamond(&x, &y, Some(&g)).unwrap();
        assert!((t - d).abs() <= 1e-13 * t.abs().max(1.0));
    }

    #[test]
    fn error_identity_equal_at_zero_and_later() {
        let a = laplace(25);
        let g = ichol0(&a).unwrap();
        for k in 0..4 {
            let r = error_norm_identity(&a, Some(&g), &rhs(25), k).unwrap();
            assert!(r.relative_gap() < 1e-8, "k={k}: {r:?}");
        }
    }

    #[test]
    fn residual_bound_tight_at_zero() {
        let a = laplace(25);
        let r = residual_bound_check(&a, None, &rhs(25), 0).unwrap();
        let b = r.bound.unwrap();
        assert!((b - r.residual_sq).abs() < 1e-10 * b);
        for k in 1..4 {
            let r = residual_bound_check(&a, None, &rhs(25), k).unwrap();
            assert!(r.holds(1e-10), "{r:?}");
            let d = r.determinant_form.unwrap();
            assert!((d - r.residual_sq).abs() < 1e-6 * d, "{r:?}");
        }
    }
}
