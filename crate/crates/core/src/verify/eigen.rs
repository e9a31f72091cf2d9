use nalgebra::linalg::{Schur, SVD};

use crate::error::{check_dim, Error, Result};

use super::dense::{cholesky, solve_lower, solve_lower_transpose, DenseMatrix, LuFactor};

/// Eigen-decomposition of a symmetric matrix, ascending. Column `j` of
/// `vectors` belongs to `values[j]`.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm is at
/// round-off level relative to `‖M‖_F`.
pub fn jacobi_eigen(m: &DenseMatrix) -> Result<SymEigen> {
    let n = m.nrows();
    check_dim("jacobi_eigen", n, m.ncols())?;
    let scale = m.max_abs();
    if m.symmetry_defect() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidMatrix(format!(
            "jacobi_eigen needs a symmetric matrix (defect {:e})",
            m.symmetry_defect()
        )));
    }
    let mut a = m.clone();
    let mut v = DenseMatrix::identity(n);
    let fro = m.frobenius_norm();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += a.get(i, j) * a.get(i, j);
                }
            }
        }
        if off.sqrt() <= f64::EPSILON * fro || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let (arp, arq) = (a.get(r, p), a.get(r, q));
                    let np = c * arp - s * arq;
                    let nq = s * arp + c * arq;
                    a.set(r, p, np);
                    a.set(p, r, np);
                    a.set(r, q, nq);
                    a.set(q, r, nq);
                }
                a.set(p, p, a.get(p, p) - t * apq);
                a.set(q, q, a.get(q, q) + t * apq);
                a.set(p, q, 0.0);
                a.set(q, p, 0.0);
                for r in 0..n {
                    let (vp, vq) = (v.get(r, p), v.get(r, q));
                    v.set(r, p, c * vp - s * vq);
                    v.set(r, q, s * vp + c * vq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(i, i).total_cmp(&a.get(j, j)));
    let values = order.iter().map(|&i| a.get(i, i)).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        for r in 0..n {
            vectors.set(r, new, v.get(r, old));
        }
    }
    Ok(SymEigen { values, vectors })
}

/// Eigenvalues of the symmetric-definite pencil `L x = λ R x`.
pub fn gen_sym_eigen(left: &DenseMatrix, right: &DenseMatrix) -> Result<Vec<f64>> {
    Ok(gen_sym_eigen_pairs(left, right)?.values)
}

/// As [`gen_sym_eigen`], with `R`-orthonormal eigenvectors.
pub fn gen_sym_eigen_pairs(left: &DenseMatrix, right: &DenseMatrix) -> Result<SymEigen> {
    let n = left.nrows();
    check_dim("gen_sym_eigen left", n, left.ncols())?;
    check_dim("gen_sym_eigen right", n, right.nrows())?;
    let l = cholesky(right)?;
    // K = L⁻¹ left L⁻ᵀ
    let mut tmp = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let col = solve_lower(&l, &left.column(j));
        for (i, v) in col.into_iter().enumerate() {
            tmp.set(i, j, v);
        }
    }
    let mut k = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let row = solve_lower(&l, tmp.row(i));
        for (j, v) in row.into_iter().enumerate() {
            k.set(i, j, v);
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let s = 0.5 * (k.get(i, j) + k.get(j, i));
            k.set(i, j, s);
            k.set(j, i, s);
        }
    }
    let eig = jacobi_eigen(&k)?;
    let mut vectors = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let x = solve_lower_transpose(&l, &eig.vectors.column(j));
        for (i, v) in x.into_iter().enumerate() {
            vectors.set(i, j, v);
        }
    }
    Ok(SymEigen {
        values: eig.values,
        vectors,
    })
}

const MAX_QR_SWEEPS: usize = 100_000;

/// Real eigenpairs of a general pencil `L x = λ R x` with nonsingular `R`,
/// plus the number of eigenvalues discarded as complex.
#[derive(Debug, Clone)]
pub struct PencilEigen {
    pub values: Vec<f64>,
    /// One column per entry of `values`.
    pub vectors: DenseMatrix,
    pub complex_count: usize,
}

pub fn general_pencil_eigen(left: &DenseMatrix, right: &DenseMatrix) -> Result<PencilEigen> {
    let n = left.nrows();
    check_dim("pencil left", n, left.ncols())?;
    check_dim("pencil right", n, right.nrows())?;
    let lu = LuFactor::new(right)?;
    let k = lu.solve_matrix(left)?;
    let ev = Schur::try_new(k.to_nalgebra(), 1e-13, MAX_QR_SWEEPS)
        .ok_or_else(|| Error::InvalidMatrix("real Schur iteration did not converge".into()))?
        .complex_eigenvalues();
    let mut reals: Vec<f64> = Vec::new();
    let mut complex_count = 0;
    for z in ev.iter() {
        if z.im.abs() <= 1e-8 * (1.0 + z.re.abs()) {
            reals.push(z.re);
        } else {
            complex_count += 1;
        }
    }
    reals.sort_by(f64::total_cmp);

    let mut vectors = DenseMatrix::zeros(n, reals.len());
    let mut col = 0;
    let mut i = 0;
    while i < reals.len() {
        let mut j = i + 1;
        while j < reals.len() && (reals[j] - reals[i]).abs() <= 1e-9 * (1.0 + reals[i].abs()) {
            j += 1;
        }
        let group = j - i;
        let lam = reals[i..j].iter().sum::<f64>() / group as f64;
        // right singular vectors of the smallest singular values of L − λR
        let shifted = left.combine(1.0, right, -lam)?.to_nalgebra();
        let svd = SVD::try_new(shifted, false, true, f64::EPSILON, MAX_QR_SWEEPS)
            .ok_or_else(|| Error::InvalidMatrix("SVD iteration did not converge".into()))?;
        let vt = svd.v_t.ok_or_else(|| Error::InvalidMatrix("SVD did not return V".into()))?;
        let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
        idx.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
        for &s in idx.iter().take(group) {
            for r in 0..n {
                vectors.set(r, col, vt[(s, r)]);
            }
            col += 1;
        }
        for v in &mut reals[i..j] {
            *v = lam;
        }
        i = j;
    }
    Ok(PencilEigen {
        values: reals,
        vectors,
        complex_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_sorted() {
        let e = jacobi_eigen(&DenseMatrix::from_diagonal(&[3.0, 1.0])).unwrap();
        assert_eq!(e.values, vec![1.0, 3.0]);
    }

    #[test]
    fn swap_matrix() {
        let m = DenseMatrix::from_row_major(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let e = jacobi_eigen(&m).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-15 && (e.values[1] - 1.0).abs() < 1e-15);
        let s = 0.5f64.sqrt();
        let v1 = e.vectors.column(1);
        assert!((v1[0].abs() - s).abs() < 1e-15 && (v1[0] - v1[1]).abs() < 1e-15);
        let v0 = e.vectors.column(0);
        assert!((v0[0] + v0[1]).abs() < 1e-15);
    }

    #[test]
    fn asymmetric_rejected() {
        let m = DenseMatrix::from_row_major(2, 2, vec![0.0, 1.0, 0.5, 0.0]).unwrap();
        assert!(jacobi_eigen(&m).is_err());
    }

    #[test]
    fn pencil_trivial_cases() {
        let r = DenseMatrix::from_row_major(2, 2, vec![2.0, 0.5, 0.5, 1.0]).unwrap();
        let v = gen_sym_eigen(&r, &r).unwrap();
        assert!(v.iter().all(|x| (x - 1.0).abs() < 1e-14));
        let v = gen_sym_eigen(&DenseMatrix::zeros(2, 2), &r).unwrap();
        assert!(v.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn general_pencil_matches_symmetric() {
        let l = DenseMatrix::from_row_major(3, 3, vec![2.0, 1.0, 0.0, 1.0, -1.0, 0.3, 0.0, 0.3, 0.5]).unwrap();
        let r = DenseMatrix::from_row_major(3, 3, vec![3.0, 0.2, 0.0, 0.2, 2.0, 0.1, 0.0, 0.1, 1.0]).unwrap();
        let sym = gen_sym_eigen(&l, &r).unwrap();
        let gen = general_pencil_eigen(&l, &r).unwrap();
        assert_eq!(gen.complex_count, 0);
        for (a, b) in sym.iter().zip(&gen.values) {
            assert!((a - b).abs() < 1e-12);
        }
        for j in 0..3 {
            let x = gen.vectors.column(j);
            let lx = l.mul_vec(&x).unwrap();
            let rx = r.mul_vec(&x).unwrap();
            let res: f64 = lx.iter().zip(&rx).map(|(a, b)| (a - gen.values[j] * b).powi(2)).sum();
            assert!(res.sqrt() < 1e-12);
        }
    }
}
