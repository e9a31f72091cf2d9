use std::time::Instant;

use crate::error::{check_dim, Error, Result};

use super::vecops::{axpy, dot, norm};
use super::{KrylovConfig, LinearOperator, PreconditionedSystem, Preconditioner, SolveReport};

/// Arnoldi/Givens state for one restart cycle.
struct Cycle {
    m: usize,
    /// `(m+1) x m` Hessenberg, column-major, rotated in place.
    h: Vec<f64>,
    cs: Vec<f64>,
    sn: Vec<f64>,
    g: Vec<f64>,
    basis: Vec<Vec<f64>>,
}

enum Step {
    Continue,
    /// Krylov space became invariant.
    Exhausted,
}

impl Cycle {
    fn new(m: usize, r: Vec<f64>, beta: f64) -> Self {
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let v0: Vec<f64> = r.into_iter().map(|v| v / beta).collect();
        Self {
            m,
            h: vec![0.0; (m + 1) * m],
            cs: vec![0.0; m],
            sn: vec![0.0; m],
            g,
            basis: vec![v0],
        }
    }

    fn h(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.h[j * (self.m + 1) + i]
    }

    /// Orthogonalize `w` against the basis (modified Gram–Schmidt) as
    /// column `j`, then update the Givens QR of the Hessenberg matrix.
    fn push(&mut self, j: usize, mut w: Vec<f64>) -> Step {
        let wnorm0 = norm(&w);
        for i in 0..=j {
            let hij = dot(&w, &self.basis[i]);
            *self.h(i, j) = hij;
            axpy(-hij, &self.basis[i], &mut w);
        }
        let hnext = norm(&w);
        *self.h(j + 1, j) = hnext;
        for i in 0..j {
            let (a, b) = (*self.h(i, j), *self.h(i + 1, j));
            *self.h(i, j) = self.cs[i] * a + self.sn[i] * b;
            *self.h(i + 1, j) = -self.sn[i] * a + self.cs[i] * b;
        }
        let (a, b) = (*self.h(j, j), *self.h(j + 1, j));
        let rho = a.hypot(b);
        let (c, s) = if rho == 0.0 { (1.0, 0.0) } else { (a / rho, b / rho) };
        self.cs[j] = c;
        self.sn[j] = s;
        *self.h(j, j) = rho;
        *self.h(j + 1, j) = 0.0;
        self.g[j + 1] = -s * self.g[j];
        self.g[j] *= c;
        if hnext <= f64::EPSILON * wnorm0 || hnext == 0.0 {
            return Step::Exhausted;
        }
        self.basis.push(w.into_iter().map(|v| v / hnext).collect());
        Step::Continue
    }

    fn residual(&self, k: usize) -> f64 {
        self.g[k].abs()
    }

    /// Coefficients `y` of the `k`-step least-squares solution.
    fn coefficients(&mut self, k: usize) -> Result<Vec<f64>> {
        let mut y = self.g[..k].to_vec();
        for i in (0..k).rev() {
            let mut s = y[i];
            for l in i + 1..k {
                s -= *self.h(i, l) * y[l];
            }
            let d = *self.h(i, i);
            if d == 0.0 {
                return Err(Error::Breakdown {
                    method: "gmres",
                    iteration: i,
                    detail: "singular Hessenberg matrix".into(),
                });
            }
            y[i] = s / d;
        }
        Ok(y)
    }
}

/// Left-preconditioned restarted GMRES from `x₀ = 0`. Stops when
/// `‖P⁻¹b − P⁻¹A x_k‖₂ / ‖P⁻¹b‖₂ < tol`; the report's `final_res` and
/// `final_rres` are the unpreconditioned residual of the returned iterate.
pub fn gmres_left<S: PreconditionedSystem + ?Sized>(
    sys: &S,
    b: &[f64],
    cfg: &KrylovConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    cfg.validate()?;
    let n = sys.dim();
    check_dim("gmres rhs", n, b.len())?;
    let start = Instant::now();
    let work0 = sys.inner_work();
    let mut x = vec![0.0; n];
    let mut report = SolveReport::default();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        report.converged = true;
        report.residual_history.push(0.0);
        report.wall_time = start.elapsed().as_secs_f64();
        return Ok((x, report));
    }
    let mut pb = vec![0.0; n];
    sys.apply_preconditioner(b, &mut pb)?;
    let pbnorm = norm(&pb);
    if !(pbnorm > 0.0 && pbnorm.is_finite()) {
        return Err(Error::Breakdown {
            method: "gmres_left",
            iteration: 0,
            detail: format!("preconditioned right-hand side has norm {pbnorm:e}"),
        });
    }
    report.residual_history.push(1.0);
    let mut first = true;
    let mut rel;
    loop {
        let r = if first {
            pb.clone()
        } else {
            let mut t = vec![0.0; n];
            sys.apply_preconditioned(&x, &mut t)?;
            pb.iter().zip(&t).map(|(p, t)| p - t).collect()
        };
        first = false;
        let beta = norm(&r);
        rel = beta / pbnorm;
        if rel < cfg.tol || report.iterations >= cfg.max_iters || report.restarts >= cfg.max_restarts {
            break;
        }
        report.restarts += 1;
        let mut cyc = Cycle::new(cfg.restart, r, beta);
        let mut k = 0;
        let mut exhausted = false;
        while k < cfg.restart && report.iterations < cfg.max_iters {
            let mut w = vec![0.0; n];
            sys.apply_preconditioned(&cyc.basis[k], &mut w)?;
            let step = cyc.push(k, w);
            k += 1;
            report.iterations += 1;
            let est = cyc.residual(k) / pbnorm;
            report.residual_history.push(est);
            if let Step::Exhausted = step {
                exhausted = true;
                if est >= cfg.tol {
                    return Err(Error::Breakdown {
                        method: "gmres_left",
                        iteration: report.iterations,
                        detail: format!("Krylov space exhausted at relative residual {est:e}"),
                    });
                }
                break;
            }
            if est < cfg.tol {
                break;
            }
        }
        let y = cyc.coefficients(k)?;
        for (i, yi) in y.iter().enumerate() {
            axpy(*yi, &cyc.basis[i], &mut x);
        }
        if exhausted {
            rel = cyc.residual(k) / pbnorm;
            break;
        }
    }
    report.converged = rel < cfg.tol;
    let mut ax = vec![0.0; n];
    sys.apply_operator(&x, &mut ax)?;
    report.final_res = b.iter().zip(&ax).map(|(b, a)| (b - a) * (b - a)).sum::<f64>().sqrt();
    report.final_rres = report.final_res / bnorm;
    report.inner = sys.inner_work().since(work0);
    report.wall_time = start.elapsed().as_secs_f64();
    Ok((x, report))
}

/// Flexible GMRES (right preconditioning with a stored `Z` basis) from
/// `x₀ = 0`. Convergence is decided on the true relative residual
/// `‖b − A x_k‖₂ / ‖b‖₂ < tol`, recomputed at the end of every cycle.
pub fn fgmres<O, P>(op: &O, precond: &P, b: &[f64], cfg: &KrylovConfig) -> Result<(Vec<f64>, SolveReport)>
where
    O: LinearOperator + ?Sized,
    P: Preconditioner + ?Sized,
{
    cfg.validate()?;
    let n = op.dim();
    check_dim("fgmres rhs", n, b.len())?;
    check_dim("fgmres preconditioner", n, precond.dim())?;
    let start = Instant::now();
    let work0 = precond.inner_work();
    let mut x = vec![0.0; n];
    let mut report = SolveReport::default();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        report.converged = true;
        report.residual_history.push(0.0);
        report.wall_time = start.elapsed().as_secs_f64();
        return Ok((x, report));
    }
    report.residual_history.push(1.0);
    let mut r = b.to_vec();
    let mut rel;
    loop {
        let beta = norm(&r);
        rel = beta / bnorm;
        if rel < cfg.tol || report.iterations >= cfg.max_iters || report.restarts >= cfg.max_restarts {
            break;
        }
        report.restarts += 1;
        let mut cyc = Cycle::new(cfg.restart, r, beta);
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(cfg.restart);
        let mut k = 0;
        while k < cfg.restart && report.iterations < cfg.max_iters {
            let mut z = vec![0.0; n];
            precond.apply(&cyc.basis[k], &mut z)?;
            let mut w = vec![0.0; n];
            op.apply(&z, &mut w)?;
            zs.push(z);
            let step = cyc.push(k, w);
            k += 1;
            report.iterations += 1;
            let est = cyc.residual(k) / bnorm;
            report.residual_history.push(est);
            if let Step::Exhausted = step {
                break;
            }
            if est < cfg.tol {
                break;
            }
        }
        let y = cyc.coefficients(k)?;
        for (yi, z) in y.iter().zip(&zs) {
            axpy(*yi, z, &mut x);
        }
        let mut ax = vec![0.0; n];
        op.apply(&x, &mut ax)?;
        r = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        if let Some(last) = report.residual_history.last_mut() {
            *last = norm(&r) / bnorm;
        }
    }
    report.converged = rel < cfg.tol;
    report.final_res = rel * bnorm;
    report.final_rres = rel;
    report.inner = precond.inner_work().since(work0);
    report.wall_time = start.elapsed().as_secs_f64();
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krylov::{IdentityPrecond, Left};
    use crate::sparse::CsrMatrix;

    #[test]
    fn identity_system() {
        let a = CsrMatrix::identity(5);
        let p = IdentityPrecond(5);
        let b = [1.0, 2.0, 3.0, 4.0, 5.0];
        let (x, rep) = gmres_left(&Left::new(&a, &p).unwrap(), &b, &KrylovConfig::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        for (xi, bi) in x.iter().zip(b) {
            assert!((xi - bi).abs() < 1e-15);
        }
    }

    #[test]
    fn fgmres_zero_rhs() {
        let a = CsrMatrix::identity(3);
        let (x, rep) = fgmres(&a, &IdentityPrecond(3), &[0.0; 3], &KrylovConfig::default()).unwrap();
        assert_eq!(x, vec![0.0; 3]);
        assert_eq!(rep.iterations, 0);
        assert!(rep.converged);
    }

    #[test]
    fn restarted_nonsymmetric() {
        // upwind convection-diffusion stencil, nonsymmetric
        let n = 30;
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            dense[i * n + i] = 3.0;
            if i > 0 {
                dense[i * n + i - 1] = -1.5;
            }
            if i + 1 < n {
                dense[i * n + i + 1] = -0.5;
            }
        }
        let a = CsrMatrix::from_dense(n, n, &dense).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let cfg = KrylovConfig::default().with_tol(1e-10).with_restart(5);
        let p = IdentityPrecond(n);
        let (_, rep) = gmres_left(&Left::new(&a, &p).unwrap(), &b, &cfg).unwrap();
        assert!(rep.converged, "{rep:?}");
        assert!(rep.restarts > 1);
        assert!(rep.final_rres < 1e-9);
        let (_, rep) = fgmres(&a, &p, &b, &cfg).unwrap();
        assert!(rep.converged && rep.final_rres < 1e-10);
    }
}
