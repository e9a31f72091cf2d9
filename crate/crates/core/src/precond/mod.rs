//! The regularized block preconditioner
//!
//! ```text
//! P_r = [ A ⊗ I₃  Bᵀ ]
//!       [ B       βQ ]
//! ```
//!
//! applied by block elimination through the pressure Schur complement
//! `S = βQ − B(A⁻¹ ⊗ I₃)Bᵀ`, either with three independent velocity solves
//! ([`Mode::Pr`]) or with one three-column global CG solve ([`Mode::Pgr`]).

mod beta;

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{check_dim, Error, Result};
use crate::fem::SaddleSystem;
use crate::global::pgcg;
use crate::krylov::{
    ichol0, ichol0_shifted, pcg, FnOperator, IcholFactor, InnerWork, KrylovConfig, PreconditionedSystem,
    Preconditioner,
};
use crate::sparse::{BlockVector, CsrMatrix, MultiVector};
use crate::verify::{cholesky, cholesky_solve, DenseMatrix, DenseSaddle, LuFactor};

pub use beta::{
    beta_heuristic, beta_heuristic_from_parts, beta_heuristic_seeded, certificate, certificate_seeded, certified_beta, inverse_power_min, power_max, BetaChoice,
    BetaEstimate, Certificate, SpectralEstimate, BETA_MIN, DEFAULT_SEED, POWER_ITERATIONS,
};

/// Diagonal shift used when plain IC(0) meets a nonpositive pivot.
pub const ICHOL_RETRY_SHIFT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Three scalar PCG solves per velocity stage.
    Pr,
    /// One PGCG solve on the `n_u × 3` block per velocity stage.
    Pgr,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Pr => "P_r",
            Mode::Pgr => "P_Gr",
        }
    }
}

/// Relative tolerances and iteration caps of the inner solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerTolerances {
    pub tol_a: f64,
    pub tol_s: f64,
    pub max_a_iters: usize,
    pub max_s_iters: usize,
}

impl InnerTolerances {
    /// Tight settings for a fixed preconditioner (restarted GMRES).
    pub fn rgmres() -> Self {
        Self {
            tol_a: 1e-12,
            tol_s: 1e-12,
            max_a_iters: 1000,
            max_s_iters: 1000,
        }
    }

    /// Loose settings for a flexible outer method.
    pub fn fgmres() -> Self {
        Self {
            tol_a: 1e-4,
            tol_s: 1e-2,
            max_a_iters: 200,
            max_s_iters: 200,
        }
    }

    pub fn uniform(tol: f64) -> Self {
        Self {
            tol_a: tol,
            tol_s: tol,
            ..Self::rgmres()
        }
    }
}

#[allow(clippy::large_enum_variant)]
enum Inner {
    Iterative { ic_a: IcholFactor, ic_s: IcholFactor },
    Dense { a_chol: DenseMatrix, s_lu: LuFactor },
}

#[derive(Default)]
struct Counters {
    a_solves: AtomicUsize,
    a_column_matvecs: AtomicUsize,
    schur_iterations: AtomicUsize,
}

/// IC(0) with one shifted retry.
pub fn ichol0_with_retry(a: &CsrMatrix) -> Result<IcholFactor> {
    ichol0(a).or_else(|e| match e {
        Error::IcholPivot { .. } => ichol0_shifted(a, ICHOL_RETRY_SHIFT),
        other => Err(other),
    })
}

/// `Ŝ = βQ + B diag(A)⁻¹ Bᵀ` restricted to the pattern of `Q`.
pub fn schur_surrogate(sys: &SaddleSystem, beta: f64) -> Result<CsrMatrix> {
    let dinv: Vec<f64> = sys.a.diagonal().iter().map(|d| 1.0 / d).collect();
    let mut s = sys.q.scale(beta);
    for bi in &sys.b {
        let bd = bi.scale_columns(&dinv)?;
        let prod = bd.matmul(&bi.transpose())?;
        s = s.linear_combination(1.0, &prod.restrict_to_pattern(&sys.q)?, 1.0)?;
    }
    Ok(s)
}

/// The regularized preconditioner bound to one saddle system and one β.
/// Immutable after construction; `apply` may run concurrently.
pub struct RegularizedPrecond<'a> {
    sys: &'a SaddleSystem,
    beta: f64,
    mode: Mode,
    tol: InnerTolerances,
    inner: Inner,
    s_hat: Option<CsrMatrix>,
    certificate: Option<Certificate>,
    counters: Counters,
}

impl<'a> RegularizedPrecond<'a> {
    /// Iterative inner solves: IC(0)-PCG (or PGCG) on `A`, and PCG on the
    /// matrix-free `S` preconditioned by IC(0) of [`schur_surrogate`].
    pub fn new(sys: &'a SaddleSystem, beta: f64, mode: Mode, tol: InnerTolerances) -> Result<Self> {
        check_beta(beta)?;
        let ic_a = ichol0_with_retry(&sys.a)?;
        let s_hat = schur_surrogate(sys, beta)?;
        let ic_s = ichol0_with_retry(&s_hat)?;
        Ok(Self {
            sys,
            beta,
            mode,
            tol,
            inner: Inner::Iterative { ic_a, ic_s },
            s_hat: Some(s_hat),
            certificate: None,
            counters: Counters::default(),
        })
    }

    /// Dense direct inner solves; desk-scale only.
    pub fn dense_exact(sys: &'a SaddleSystem, beta: f64, mode: Mode) -> Result<Self> {
        check_beta(beta)?;
        let d = DenseSaddle::new(sys)?;
        let a_chol = cholesky(&d.a)?;
        let s_lu = LuFactor::new(&d.schur(beta))?;
        Ok(Self {
            sys,
            beta,
            mode,
            tol: InnerTolerances::uniform(0.0),
            inner: Inner::Dense { a_chol, s_lu },
            s_hat: None,
            certificate: None,
            counters: Counters::default(),
        })
    }

    /// Estimates and stores the positive-definiteness certificate.
    pub fn with_certificate(mut self) -> Result<Self> {
        self.certificate = Some(certificate(self.sys, self.beta)?);
        Ok(self)
    }

    pub fn system(&self) -> &SaddleSystem {
        self.sys
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn tolerances(&self) -> InnerTolerances {
        self.tol
    }

    pub fn certificate(&self) -> Option<&Certificate> {
        self.certificate.as_ref()
    }

    /// Warnings gathered during setup.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if let Some(c) = &self.certificate {
            if !c.holds {
                w.push(format!(
                    "beta {:e} fails the positive-definiteness certificate: beta*lambda_min(Q) = {:e} <= lambda_max(M) = {:e}",
                    c.beta,
                    c.beta * c.lambda_min_q,
                    c.lambda_max_m
                ));
            }
            if c.stagnated {
                w.push("power iteration for the certificate had not settled".into());
            }
        }
        w
    }

    pub fn schur_surrogate(&self) -> Option<&CsrMatrix> {
        self.s_hat.as_ref()
    }

    fn a_cfg(&self) -> KrylovConfig {
        KrylovConfig::default()
            .with_tol(self.tol.tol_a)
            .with_max_iters(self.tol.max_a_iters)
    }

    /// `A⁻¹` applied to every column of `h`.
    pub fn solve_a(&self, h: &MultiVector) -> Result<MultiVector> {
        check_dim("velocity solve", self.sys.n_u(), h.nrows())?;
        let c = &self.counters;
        match &self.inner {
            Inner::Dense { a_chol, .. } => {
                let cols: Vec<Vec<f64>> = (0..h.ncols()).map(|j| cholesky_solve(a_chol, h.col(j))).collect();
                c.a_solves.fetch_add(
                    if self.mode == Mode::Pgr { 1 } else { h.ncols() },
                    Ordering::Relaxed,
                );
                if h.nrows() == 0 {
                    return Ok(MultiVector::zeros(0, h.ncols()));
                }
                MultiVector::from_columns(&cols)
            }
            Inner::Iterative { ic_a, .. } => match self.mode {
                Mode::Pr => {
                    let mut x = MultiVector::zeros(h.nrows(), h.ncols());
                    for j in 0..h.ncols() {
                        let (xj, rep) = pcg(&self.sys.a, Some(ic_a), h.col(j), &self.a_cfg())?;
                        c.a_solves.fetch_add(1, Ordering::Relaxed);
                        c.a_column_matvecs.fetch_add(rep.iterations, Ordering::Relaxed);
                        if !rep.converged {
                            return Err(not_converged("velocity PCG", &rep));
                        }
                        x.col_mut(j).copy_from_slice(&xj);
                    }
                    Ok(x)
                }
                Mode::Pgr => {
                    let (x, rep) = pgcg(&self.sys.a, ic_a, h, &self.a_cfg())?;
                    c.a_solves.fetch_add(1, Ordering::Relaxed);
                    c.a_column_matvecs.fetch_add(rep.iterations * h.ncols(), Ordering::Relaxed);
                    if !rep.converged {
                        return Err(not_converged("velocity PGCG", &rep));
                    }
                    Ok(x)
                }
            },
        }
    }

    /// `M p = Σ_i B_i A⁻¹ B_iᵀ p`.
    pub fn m_apply(&self, p: &[f64]) -> Result<Vec<f64>> {
        check_dim("pressure vector", self.sys.n_p(), p.len())?;
        let cols: Vec<Vec<f64>> = self
            .sys
            .b
            .iter()
            .map(|bi| bi.spmv_transpose(p))
            .collect::<Result<_>>()?;
        let mut out = vec![0.0; p.len()];
        if self.sys.n_u() == 0 {
            return Ok(out);
        }
        let y = self.solve_a(&MultiVector::from_columns(&cols)?)?;
        for (j, bi) in self.sys.b.iter().enumerate() {
            bi.spmv_acc(1.0, y.col(j), &mut out)?;
        }
        Ok(out)
    }

    /// `S p = βQ p − M p`.
    pub fn schur_apply(&self, p: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.m_apply(p)?;
        out.iter_mut().for_each(|v| *v = -*v);
        self.sys.q.spmv_acc(self.beta, p, &mut out)?;
        Ok(out)
    }

    /// `S⁻¹ r`.
    pub fn schur_solve(&self, r: &[f64]) -> Result<Vec<f64>> {
        check_dim("schur rhs", self.sys.n_p(), r.len())?;
        match &self.inner {
            Inner::Dense { s_lu, .. } => s_lu.solve(r),
            Inner::Iterative { ic_s, .. } => {
                let op = FnOperator::new(r.len(), |x: &[f64], y: &mut [f64]| {
                    y.copy_from_slice(&self.schur_apply(x)?);
                    Ok(())
                });
                let cfg = KrylovConfig::default()
                    .with_tol(self.tol.tol_s)
                    .with_max_iters(self.tol.max_s_iters);
                let (z, rep) = pcg(&op, Some(ic_s), r, &cfg)?;
                self.counters
                    .schur_iterations
                    .fetch_add(rep.iterations, Ordering::Relaxed);
                if !rep.converged {
                    return Err(not_converged("Schur PCG", &rep));
                }
                Ok(z)
            }
        }
    }

    /// `z = P_r⁻¹ 𝒜 v` by the two-stage elimination: `S z₂ = (C − M) v₂`,
    /// then `A X = H` with `H_j = A v_j + B_jᵀ (v₂ − z₂)`.
    pub fn apply_algorithm(&self, v: &BlockVector) -> Result<BlockVector> {
        self.check_block(v)?;
        let v2 = v.p();
        let mut rhs = self.m_apply(v2)?;
        rhs.iter_mut().for_each(|x| *x = -*x);
        self.sys.c.spmv_acc(1.0, v2, &mut rhs)?;
        let z2 = self.schur_solve(&rhs)?;
        let diff: Vec<f64> = v2.iter().zip(&z2).map(|(a, b)| a - b).collect();
        let mut h = MultiVector::zeros(self.sys.n_u(), 3);
        for j in 0..3 {
            let col = h.col_mut(j);
            self.sys.a.spmv_into(v.u(j), col)?;
            let bt = self.sys.b[j].spmv_transpose(&diff)?;
            col.iter_mut().zip(&bt).for_each(|(x, b)| *x += b);
        }
        self.assemble_output(&h, z2)
    }

    /// `z = P_r⁻¹ r`: `Y = A⁻¹ r₁`, `S z₂ = r₂ − Σ B_i Y_i`,
    /// `X_j = A⁻¹ (r_j − B_jᵀ z₂)`.
    pub fn apply_inverse(&self, r: &BlockVector) -> Result<BlockVector> {
        self.check_block(r)?;
        let n_u = self.sys.n_u();
        let mut rhs = r.p().to_vec();
        if n_u > 0 {
            let y = self.solve_a(&r.velocity_block())?;
            for (j, bi) in self.sys.b.iter().enumerate() {
                bi.spmv_acc(-1.0, y.col(j), &mut rhs)?;
            }
        }
        let z2 = self.schur_solve(&rhs)?;
        let mut h = MultiVector::zeros(n_u, 3);
        for j in 0..3 {
            let bt = self.sys.b[j].spmv_transpose(&z2)?;
            let col = h.col_mut(j);
            for ((x, a), b) in col.iter_mut().zip(r.u(j)).zip(&bt) {
                *x = a - b;
            }
        }
        self.assemble_output(&h, z2)
    }

    /// [`apply_algorithm`](Self::apply_algorithm) for a [`Mode::Pr`] instance.
    pub fn apply_pr(&self, v: &BlockVector) -> Result<BlockVector> {
        self.require(Mode::Pr)?;
        self.apply_algorithm(v)
    }

    /// [`apply_algorithm`](Self::apply_algorithm) for a [`Mode::Pgr`] instance.
    pub fn apply_pgr(&self, v: &BlockVector) -> Result<BlockVector> {
        self.require(Mode::Pgr)?;
        self.apply_algorithm(v)
    }

    fn require(&self, mode: Mode) -> Result<()> {
        if self.mode == mode {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "preconditioner built for {}, called as {}",
                self.mode.label(),
                mode.label()
            )))
        }
    }

    fn check_block(&self, v: &BlockVector) -> Result<()> {
        check_dim("block vector velocity", self.sys.n_u(), v.n_u())?;
        check_dim("block vector pressure", self.sys.n_p(), v.n_p())
    }

    fn assemble_output(&self, h: &MultiVector, z2: Vec<f64>) -> Result<BlockVector> {
        let n_u = self.sys.n_u();
        let mut out = BlockVector::zeros(n_u, self.sys.n_p());
        if n_u > 0 {
            out.set_velocity_block(&self.solve_a(h)?)?;
        }
        out.p_mut().copy_from_slice(&z2);
        Ok(out)
    }

    fn work(&self) -> InnerWork {
        let c = &self.counters;
        InnerWork {
            a_solves: c.a_solves.load(Ordering::Relaxed),
            a_column_matvecs: c.a_column_matvecs.load(Ordering::Relaxed),
            schur_iterations: c.schur_iterations.load(Ordering::Relaxed),
        }
    }

    fn wrap(&self, x: &[f64]) -> Result<BlockVector> {
        BlockVector::from_flat(self.sys.n_u(), self.sys.n_p(), x.to_vec())
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("beta must be > 0, got {beta}")))
    }
}

fn not_converged(method: &'static str, rep: &crate::krylov::SolveReport) -> Error {
    Error::NotConverged {
        method,
        iterations: rep.iterations,
        residual: rep.residual_history.last().copied().unwrap_or(f64::NAN),
    }
}

impl Preconditioner for RegularizedPrecond<'_> {
    fn dim(&self) -> usize {
        self.sys.dim()
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        check_dim("preconditioner output", self.sys.dim(), z.len())?;
        z.copy_from_slice(self.apply_inverse(&self.wrap(r)?)?.as_slice());
        Ok(())
    }

    fn inner_work(&self) -> InnerWork {
        self.work()
    }
}

impl PreconditionedSystem for RegularizedPrecond<'_> {
    fn dim(&self) -> usize {
        self.sys.dim()
    }

    fn apply_operator(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.sys.apply_flat(x, y)
    }

    fn apply_preconditioner(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        Preconditioner::apply(self, r, z)
    }

    fn apply_preconditioned(&self, v: &[f64], z: &mut [f64]) -> Result<()> {
        check_dim("preconditioned output", self.sys.dim(), z.len())?;
        z.copy_from_slice(self.apply_algorithm(&self.wrap(v)?)?.as_slice());
        Ok(())
    }

    fn inner_work(&self) -> InnerWork {
        self.work()
    }
}
