use std::time::Instant;

use crate::error::{check_dim, Error, Result};

use super::vecops::{axpy, dot, norm};
use super::{KrylovConfig, LinearOperator, Preconditioner, SolveReport};

pub fn cg<O: LinearOperator + ?Sized>(a: &O, b: &[f64], cfg: &KrylovConfig) -> Result<(Vec<f64>, SolveReport)> {
    pcg(a, None, b, cfg)
}

/// Preconditioned conjugate gradients from `x₀ = 0`, stopping when
/// `‖b − A x‖₂ ≤ tol·‖b‖₂` (recursive residual) or after `max_iters`.
/// Non-convergence is reported through `converged = false`.
pub fn pcg<O: LinearOperator + ?Sized>(
    a: &O,
    m: Option<&dyn Preconditioner>,
    b: &[f64],
    cfg: &KrylovConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    cfg.validate()?;
    let n = a.dim();
    check_dim("pcg rhs", n, b.len())?;
    if let Some(m) = m {
        check_dim("pcg preconditioner", n, m.dim())?;
    }
    let start = Instant::now();
    let mut x = vec![0.0; n];
    let bnorm = norm(b);
    let mut report = SolveReport {
        residual_history: vec![if bnorm > 0.0 { 1.0 } else { 0.0 }],
        ..SolveReport::default()
    };
    if bnorm == 0.0 {
        report.converged = true;
        report.wall_time = start.elapsed().as_secs_f64();
        return Ok((x, report));
    }

    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    let precondition = |r: &[f64], z: &mut [f64]| -> Result<()> {
        match m {
            Some(m) => m.apply(r, z),
            None => {
                z.copy_from_slice(r);
                Ok(())
            }
        }
    };
    precondition(&r, &mut z)?;
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut rel = 1.0;
    while report.iterations < cfg.max_iters {
        a.apply(&p, &mut ap)?;
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Breakdown {
                method: "pcg",
                iteration: report.iterations,
                detail: format!("pᵀAp = {pap:e}; operator not positive definite"),
            });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        report.iterations += 1;
        rel = norm(&r) / bnorm;
        report.residual_history.push(rel);
        if rel <= cfg.tol {
            break;
        }
        precondition(&r, &mut z)?;
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    report.converged = rel <= cfg.tol;
    report.final_res = super::true_residual_norm(a, b, &x)?;
    report.final_rres = report.final_res / bnorm;
    report.wall_time = start.elapsed().as_secs_f64();
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::CsrMatrix;

    #[test]
    fn identity_in_one_step() {
        let a = CsrMatrix::identity(4);
        let b = [1.0, -2.0, 3.0, 0.5];
        let (x, rep) = cg(&a, &b, &KrylovConfig::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        assert_eq!(x, b);
    }

    #[test]
    fn two_by_two_terminates() {
        let a = CsrMatrix::from_dense(2, 2, &[4.0, 1.0, 1.0, 3.0]).unwrap();
        let cfg = KrylovConfig::default().with_tol(1e-14);
        let (x, rep) = cg(&a, &[1.0, 2.0], &cfg).unwrap();
        assert!(rep.iterations <= 2);
        // exact solution (1/11, 7/11)
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-14);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn indefinite_operator_breaks_down() {
        let a = CsrMatrix::from_diagonal(&[1.0, -1.0]);
        let r = cg(&a, &[0.0, 1.0], &KrylovConfig::default());
        assert!(matches!(r, Err(Error::Breakdown { method: "pcg", .. })));
    }

    #[test]
    fn zero_rhs() {
        let (x, rep) = cg(&CsrMatrix::identity(3), &[0.0; 3], &KrylovConfig::default()).unwrap();
        assert_eq!(x, vec![0.0; 3]);
        assert_eq!(rep.iterations, 0);
        assert!(rep.converged);
    }
}
