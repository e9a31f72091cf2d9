use std::time::Instant;

use crate::error::{check_dim, Error, Result};
use crate::krylov::{IcholFactor, KrylovConfig, LinearOperator, SolveReport};
use crate::sparse::{frobenius_inner, MultiVector};

/// Largest `n` for which diagnostics are recorded.
pub const DIAGNOSTICS_LIMIT: usize = 500;

/// Blocks recorded during a [`pgcg_recorded`] run.
#[derive(Debug, Clone)]
pub struct DiagnosticsState {
    /// `K_i = (A P⁻¹)^i R₀`, `i = 0..=iterations`.
    pub k_blocks: Vec<MultiVector>,
    /// Recursively updated residuals `R_0..R_k`.
    pub residuals: Vec<MultiVector>,
    /// `X_0..X_k`.
    pub iterates: Vec<MultiVector>,
    /// Monomial coefficients `ψ` with `Y_k − Y_0 = Σ ψ_i (A P⁻¹)^{i−1} R₀`.
    pub psi: Vec<f64>,
}

impl DiagnosticsState {
    pub fn iterations(&self) -> usize {
        self.iterates.len() - 1
    }

    /// `ψ` and the P⁻¹-Gram matrix of the recorded Krylov blocks as CSV.
    pub fn to_csv(&self, g: Option<&IcholFactor>) -> Result<String> {
        use std::fmt::Write as _;
        let mut s = String::from("# psi\nindex,value\n");
        for (i, p) in self.psi.iter().enumerate() {
            let _ = writeln!(s, "{},{p:.16e}", i + 1);
        }
        s.push_str("# gram K^T <> P^-1 K\n");
        let pk: Vec<MultiVector> = self
            .k_blocks
            .iter()
            .map(|k| apply_pinv(g, k))
            .collect::<Result<_>>()?;
        for (i, ki) in self.k_blocks.iter().enumerate() {
            let row: Vec<String> = pk
                .iter()
                .map(|pj| frobenius_inner(ki, pj).map(|v| format!("{v:.16e}")))
                .collect::<Result<_>>()?;
            let _ = writeln!(s, "{i},{}", row.join(","));
        }
        Ok(s)
    }
}

/// `P⁻¹ X = G⁻ᵀ G⁻¹ X` column by column; identity when `g` is `None`.
pub fn apply_pinv(g: Option<&IcholFactor>, x: &MultiVector) -> Result<MultiVector> {
    let mut z = x.clone();
    if let Some(g) = g {
        check_dim("split preconditioner", g.dim(), x.nrows())?;
        for j in 0..x.ncols() {
            let col = z.col_mut(j);
            g.solve_lower_in_place(col)?;
            g.solve_upper_in_place(col)?;
        }
    }
    Ok(z)
}

pub(crate) fn apply_block<O: LinearOperator + ?Sized>(a: &O, x: &MultiVector) -> Result<MultiVector> {
    let mut y = MultiVector::zeros(x.nrows(), x.ncols());
    for j in 0..x.ncols() {
        a.apply(x.col(j), y.col_mut(j))?;
    }
    Ok(y)
}

/// Global CG on `A X = H` from `X₀ = 0`: the CG recurrence with every
/// inner product replaced by `⟨·,·⟩_F`, so all columns share scalar
/// coefficients. Stops when `‖R‖_F / ‖H‖_F ≤ tol`.
pub fn gcg<O: LinearOperator + ?Sized>(a: &O, h: &MultiVector, cfg: &KrylovConfig) -> Result<(MultiVector, SolveReport)> {
    let (x, rep, _) = engine(a, None, h, cfg, false)?;
    Ok((x, rep))
}

/// Global CG on the split-preconditioned system `G⁻¹AG⁻ᵀ Y = G⁻¹H`,
/// returned as `X = G⁻ᵀY`.
pub fn pgcg<O: LinearOperator + ?Sized>(
    a: &O,
    g: &IcholFactor,
    h: &MultiVector,
    cfg: &KrylovConfig,
) -> Result<(MultiVector, SolveReport)> {
    let (x, rep, _) = engine(a, Some(g), h, cfg, false)?;
    Ok((x, rep))
}

/// [`pgcg`] (or [`gcg`] when `g` is `None`) recording Krylov blocks,
/// residuals and iterates. Limited to `n ≤ 500`; not meant for production
/// solves.
pub fn pgcg_recorded<O: LinearOperator + ?Sized>(
    a: &O,
    g: Option<&IcholFactor>,
    h: &MultiVector,
    cfg: &KrylovConfig,
) -> Result<(MultiVector, SolveReport, DiagnosticsState)> {
    if h.nrows() > DIAGNOSTICS_LIMIT {
        return Err(Error::OracleScale {
            n: h.nrows(),
            limit: DIAGNOSTICS_LIMIT,
        });
    }
    let (x, rep, d) = engine(a, g, h, cfg, true)?;
    Ok((x, rep, d.expect("recording requested")))
}

fn engine<O: LinearOperator + ?Sized>(
    a: &O,
    g: Option<&IcholFactor>,
    h: &MultiVector,
    cfg: &KrylovConfig,
    record: bool,
) -> Result<(MultiVector, SolveReport, Option<DiagnosticsState>)> {
    cfg.validate()?;
    check_dim("gcg rhs", a.dim(), h.nrows())?;
    let start = Instant::now();
    let (n, s) = (h.nrows(), h.ncols());
    let mut x = MultiVector::zeros(n, s);
    let hnorm = h.frobenius_norm();
    let mut report = SolveReport {
        residual_history: vec![if hnorm > 0.0 { 1.0 } else { 0.0 }],
        ..SolveReport::default()
    };
    let mut diag = record.then(|| DiagnosticsState {
        k_blocks: vec![h.clone()],
        residuals: vec![h.clone()],
        iterates: vec![x.clone()],
        psi: Vec::new(),
    });
    if hnorm == 0.0 {
        report.converged = true;
        report.wall_time = start.elapsed().as_secs_f64();
        return Ok((x, report, diag));
    }

    // polynomial bookkeeping in the variable t = A P⁻¹
    let mut phi: Vec<f64> = Vec::new();
    let mut rho: Vec<f64> = vec![1.0];
    let mut pi: Vec<f64> = vec![1.0];

    let mut r = h.clone();
    let mut z = apply_pinv(g, &r)?;
    let mut p = z.clone();
    let mut rz = frobenius_inner(&r, &z)?;
    let mut rel = 1.0;
    while report.iterations < cfg.max_iters {
        let w = apply_block(a, &p)?;
        let pap = frobenius_inner(&p, &w)?;
        if !(pap > 0.0) {
            return Err(Error::Breakdown {
                method: "pgcg",
                iteration: report.iterations,
                detail: format!("⟨P, AP⟩_F = {pap:e}; operator not positive definite"),
            });
        }
        let alpha = rz / pap;
        x.axpy(alpha, &p);
        r.axpy(-alpha, &w);
        report.iterations += 1;
        rel = r.frobenius_norm() / hnorm;
        report.residual_history.push(rel);

        if let Some(d) = diag.as_mut() {
            phi.resize(pi.len().max(phi.len()), 0.0);
            for (f, q) in phi.iter_mut().zip(&pi) {
                *f += alpha * q;
            }
            let mut rho_new = rho.clone();
            rho_new.resize(pi.len() + 1, 0.0);
            for (i, q) in pi.iter().enumerate() {
                rho_new[i + 1] -= alpha * q;
            }
            rho = rho_new;
            let last = d.k_blocks.last().expect("R0 recorded");
            let next = apply_block(a, &apply_pinv(g, last)?)?;
            d.k_blocks.push(next);
            d.residuals.push(r.clone());
            d.iterates.push(x.clone());
        }
        if rel <= cfg.tol {
            break;
        }
        z = apply_pinv(g, &r)?;
        let rz_new = frobenius_inner(&r, &z)?;
        let beta = rz_new / rz;
        rz = rz_new;
        p.xpby(&z, beta);
        if diag.is_some() {
            let mut pi_new = rho.clone();
            for (i, q) in pi.iter().enumerate() {
                pi_new[i] += beta * q;
            }
            pi = pi_new;
        }
    }
    if let Some(d) = diag.as_mut() {
        d.psi = phi;
    }
    report.converged = rel <= cfg.tol;
    let mut res = h.clone();
    res.axpy(-1.0, &apply_block(a, &x)?);
    report.final_res = res.frobenius_norm();
    report.final_rres = report.final_res / hnorm;
    report.inner.a_column_matvecs = report.iterations * s;
    report.wall_time = start.elapsed().as_secs_f64();
    Ok((x, report, diag))
}
