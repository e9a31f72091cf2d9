use std::fmt::Write as _;

use crate::error::{check_dim, Error, Result};
use crate::fem::SaddleSystem;

use super::dense::{check_scale, cholesky, cholesky_solve, DenseMatrix, LuFactor};
use super::eigen::{gen_sym_eigen_pairs, general_pencil_eigen, jacobi_eigen};

/// Dense copies of the system blocks plus the exact Schur ingredients.
#[derive(Debug, Clone)]
pub struct DenseSaddle {
    pub n_u: usize,
    pub n_p: usize,
    pub a: DenseMatrix,
    /// `[B1 B2 B3]`, `n_p x 3n_u`.
    pub b: DenseMatrix,
    pub c: DenseMatrix,
    pub q: DenseMatrix,
    /// `(A⁻¹⊗I₃)Bᵀ`, `3n_u x n_p`.
    pub ainv_bt: DenseMatrix,
    /// `M = B(A⁻¹⊗I₃)Bᵀ`.
    pub m: DenseMatrix,
}

impl DenseSaddle {
    pub fn new(sys: &SaddleSystem) -> Result<Self> {
        let (n_u, n_p) = (sys.n_u(), sys.n_p());
        check_scale(3 * n_u + n_p)?;
        let a = DenseMatrix::from_csr(&sys.a)?;
        let l = cholesky(&a)?;
        let mut b = DenseMatrix::zeros(n_p, 3 * n_u);
        let mut ainv_bt = DenseMatrix::zeros(3 * n_u, n_p);
        for comp in 0..3 {
            let bi = DenseMatrix::from_csr(&sys.b[comp])?;
            b.set_block(0, comp * n_u, &bi);
            for k in 0..n_p {
                let col = cholesky_solve(&l, bi.row(k));
                for (i, v) in col.into_iter().enumerate() {
                    ainv_bt.set(comp * n_u + i, k, v);
                }
            }
        }
        let mut m = b.matmul(&ainv_bt)?;
        symmetrize(&mut m);
        Ok(Self {
            n_u,
            n_p,
            a,
            b,
            c: DenseMatrix::from_csr(&sys.c)?,
            q: DenseMatrix::from_csr(&sys.q)?,
            ainv_bt,
            m,
        })
    }

    pub fn dim(&self) -> usize {
        3 * self.n_u + self.n_p
    }

    fn with_pressure_block(&self, pp: &DenseMatrix) -> DenseMatrix {
        let n = self.dim();
        let off = 3 * self.n_u;
        let mut out = DenseMatrix::zeros(n, n);
        for comp in 0..3 {
            out.set_block(comp * self.n_u, comp * self.n_u, &self.a);
        }
        out.set_block(off, 0, &self.b);
        out.set_block(0, off, &self.b.transpose());
        out.set_block(off, off, pp);
        out
    }

    /// The saddle matrix 𝒜.
    pub fn saddle(&self) -> DenseMatrix {
        self.with_pressure_block(&self.c)
    }

    /// `P_r`: 𝒜 with `C` replaced by `βQ`.
    pub fn regularized(&self, beta: f64) -> DenseMatrix {
        self.with_pressure_block(&self.q.scale(beta))
    }

    /// `S = βQ − M`.
    pub fn schur(&self, beta: f64) -> DenseMatrix {
        self.q.combine(beta, &self.m, -1.0).expect("same shape")
    }

    /// `λmax(M)` (0 when there are no velocity unknowns).
    pub fn m_extremes(&self) -> Result<(f64, f64)> {
        extremes(&self.m)
    }
}

fn symmetrize(m: &mut DenseMatrix) {
    for i in 0..m.nrows() {
        for j in i + 1..m.ncols() {
            let s = 0.5 * (m.get(i, j) + m.get(j, i));
            m.set(i, j, s);
            m.set(j, i, s);
        }
    }
}

fn extremes(m: &DenseMatrix) -> Result<(f64, f64)> {
    if m.nrows() == 0 {
        return Ok((0.0, 0.0));
    }
    let v = jacobi_eigen(m)?.values;
    Ok((v[0], v[v.len() - 1]))
}

fn quad(m: &DenseMatrix, p: &[f64]) -> f64 {
    let mp = m.mul_vec(p).expect("conforming");
    mp.iter().zip(p).map(|(a, b)| a * b).sum()
}

/// One pressure eigenpair of `P_r⁻¹𝒜` with its Rayleigh quotients
/// `a = pᵀMp`, `c = pᵀCp`, `q = pᵀQp` (unit `p`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenReport {
    pub lambda: f64,
    pub a: f64,
    pub c: f64,
    pub q: f64,
    /// `|λ − (a−c)/(a+βq)|`.
    pub formula_residual: f64,
    /// `|λ − (a−c)/(a−βq)|`, the quotient obtained from the block
    /// elimination of `𝒜x = λP_r x`.
    pub schur_form_residual: f64,
    /// `‖P_r⁻¹𝒜x − λx‖₂ / ‖x‖₂` for `x = (−(A⁻¹⊗I₃)Bᵀp; p)`.
    pub eigen_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignCheck {
    /// The hypothesis does not hold on this system.
    NotApplicable,
    Holds,
    Violated,
}

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub n_u: usize,
    pub n_p: usize,
    pub beta: f64,
    /// Velocity unit vectors mapped to themselves by `P_r⁻¹𝒜`.
    pub velocity_fixed_columns: usize,
    /// `max_i ‖P_r⁻¹𝒜 e_i − e_i‖_∞` over velocity unit vectors.
    pub velocity_column_defect: f64,
    pub nullity_c_minus_beta_q: usize,
    /// Structural multiplicity of eigenvalue 1.
    pub multiplicity_one: usize,
    pub pairs: Vec<EigenReport>,
    /// Eigenvalues of the pencil that came out complex (indefinite `S`).
    pub complex_pairs: usize,
    pub s_spd: bool,
    pub certificate_holds: bool,
    pub positive_sign: SignCheck,
    pub negative_sign: SignCheck,
}

impl SpectrumReport {
    fn max_of(&self, f: impl Fn(&EigenReport) -> f64) -> f64 {
        self.pairs.iter().map(f).fold(0.0, f64::max)
    }

    pub fn max_formula_residual(&self) -> f64 {
        self.max_of(|p| p.formula_residual)
    }

    pub fn max_schur_form_residual(&self) -> f64 {
        self.max_of(|p| p.schur_form_residual)
    }

    pub fn max_eigen_residual(&self) -> f64 {
        self.max_of(|p| p.eigen_residual)
    }

    pub fn min_a(&self) -> f64 {
        self.pairs.iter().map(|p| p.a).fold(f64::INFINITY, f64::min)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n_u = {}, n_p = {}, beta = {:.6e}", self.n_u, self.n_p, self.beta);
        let _ = writeln!(
            s,
            "multiplicity(1) = {} (velocity columns {} / {}, nullity(C - beta Q) = {})",
            self.multiplicity_one,
            self.velocity_fixed_columns,
            3 * self.n_u,
            self.nullity_c_minus_beta_q
        );
        let _ = writeln!(s, "S SPD: {}, certificate: {}", self.s_spd, self.certificate_holds);
        let _ = writeln!(s, "max |lambda - (a-c)/(a+beta q)| = {:.3e}", self.max_formula_residual());
        let _ = writeln!(s, "max |lambda - (a-c)/(a-beta q)| = {:.3e}", self.max_schur_form_residual());
        let _ = writeln!(s, "max eigenpair residual = {:.3e}", self.max_eigen_residual());
        let _ = writeln!(s, "sign checks: positive {:?}, negative {:?}", self.positive_sign, self.negative_sign);
        s
    }

    pub fn pairs_csv(&self) -> String {
        let mut s = String::from("lambda,a,c,q,formula_residual,schur_form_residual,eigen_residual\n");
        for p in &self.pairs {
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.6e},{:.6e},{:.6e}",
                p.lambda, p.a, p.c, p.q, p.formula_residual, p.schur_form_residual, p.eigen_residual
            );
        }
        s
    }
}

/// Pressure eigenpairs of `(C − M)p = λ(βQ − M)p`, i.e. the eigenvalues of
/// `P_r⁻¹𝒜` other than the velocity family.
fn pressure_pairs(d: &DenseSaddle, beta: f64) -> Result<(Vec<f64>, DenseMatrix, usize, bool)> {
    let left = d.c.combine(1.0, &d.m, -1.0)?;
    let s = d.schur(beta);
    match gen_sym_eigen_pairs(&left, &s) {
        Ok(e) => Ok((e.values, e.vectors, 0, true)),
        Err(Error::NotSpd { .. }) => {
            let e = general_pencil_eigen(&left, &s)?;
            Ok((e.values, e.vectors, e.complex_count, false))
        }
        Err(e) => Err(e),
    }
}

fn eigen_reports(
    d: &DenseSaddle,
    beta: f64,
    k: &DenseMatrix,
    lambdas: &[f64],
    vectors: &DenseMatrix,
) -> Result<Vec<EigenReport>> {
    let off = 3 * d.n_u;
    let mut out = Vec::with_capacity(lambdas.len());
    for (j, &lambda) in lambdas.iter().enumerate() {
        let mut p = vectors.column(j);
        let pn = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        p.iter_mut().for_each(|v| *v /= pn);
        let (a, c, q) = (quad(&d.m, &p), quad(&d.c, &p), quad(&d.q, &p));
        let u = d.ainv_bt.mul_vec(&p)?;
        let mut x = vec![0.0; d.dim()];
        for (xi, ui) in x.iter_mut().zip(&u) {
            *xi = -ui;
        }
        x[off..].copy_from_slice(&p);
        let kx = k.mul_vec(&x)?;
        let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let res = kx.iter().zip(&x).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt() / xn;
        out.push(EigenReport {
            lambda,
            a,
            c,
            q,
            formula_residual: (lambda - (a - c) / (a + beta * q)).abs(),
            schur_form_residual: (lambda - (a - c) / (a - beta * q)).abs(),
            eigen_residual: res,
        });
    }
    Ok(out)
}

pub fn verify_pressure_spectrum(sys: &SaddleSystem, beta: f64) -> Result<SpectrumReport> {
    if !(beta > 0.0) {
        return Err(Error::InvalidArgument(format!("beta must be > 0, got {beta}")));
    }
    let d = DenseSaddle::new(sys)?;
    verify_pressure_spectrum_dense(&d, beta)
}

pub fn verify_pressure_spectrum_dense(d: &DenseSaddle, beta: f64) -> Result<SpectrumReport> {
    let n = d.dim();
    let pr = d.regularized(beta);
    let lu = LuFactor::new(&pr)?;
    let k = lu.solve_matrix(&d.saddle())?;

    let mut fixed = 0;
    let mut defect = 0.0f64;
    for i in 0..3 * d.n_u {
        let mut dev = 0.0f64;
        for r in 0..n {
            let e = if r == i { 1.0 } else { 0.0 };
            dev = dev.max((k.get(r, i) - e).abs());
        }
        defect = defect.max(dev);
        if dev <= 1e-10 {
            fixed += 1;
        }
    }

    let cbq = d.c.combine(1.0, &d.q, -beta)?;
    let cbq_eig = jacobi_eigen(&cbq)?.values;
    let scale = cbq_eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let nullity = cbq_eig.iter().filter(|v| v.abs() <= 1e-10 * scale).count();

    let (lambdas, vectors, complex_pairs, s_spd) = pressure_pairs(d, beta)?;
    let pairs = eigen_reports(d, beta, &k, &lambdas, &vectors)?;

    let (m_min, m_max) = d.m_extremes()?;
    let (q_min, _) = extremes(&d.q)?;
    let (c_min, c_max) = extremes(&d.c)?;
    let sign = |hyp: bool, ok: bool| match (hyp, ok) {
        (false, _) => SignCheck::NotApplicable,
        (true, true) => SignCheck::Holds,
        (true, false) => SignCheck::Violated,
    };
    let positive_sign = sign(m_max < c_min, pairs.iter().all(|p| p.lambda > 0.0));
    let negative_sign = sign(m_min > c_max, pairs.iter().all(|p| p.lambda < 0.0));

    Ok(SpectrumReport {
        n_u: d.n_u,
        n_p: d.n_p,
        beta,
        velocity_fixed_columns: fixed,
        velocity_column_defect: defect,
        nullity_c_minus_beta_q: nullity,
        multiplicity_one: fixed + nullity,
        pairs,
        complex_pairs,
        s_spd,
        certificate_holds: beta * q_min > m_max,
        positive_sign,
        negative_sign,
    })
}

/// Small-β behaviour: for every pressure pair with `a` above
/// `rel_a·λmax(M)`, the deviation `|λ − (1 − c/a)|`. Returns the largest
/// deviation and the number of pairs examined.
pub fn beta_limit_check(sys: &SaddleSystem, beta: f64, rel_a: f64) -> Result<(f64, usize)> {
    let d = DenseSaddle::new(sys)?;
    let k = LuFactor::new(&d.regularized(beta))?.solve_matrix(&d.saddle())?;
    let (lambdas, vectors, _, _) = pressure_pairs(&d, beta)?;
    let pairs = eigen_reports(&d, beta, &k, &lambdas, &vectors)?;
    let (_, m_max) = d.m_extremes()?;
    let mut worst = 0.0f64;
    let mut count = 0;
    for p in pairs.iter().filter(|p| p.a > rel_a * m_max && m_max > 0.0) {
        worst = worst.max((p.lambda - (1.0 - p.c / p.a)).abs());
        count += 1;
    }
    Ok((worst, count))
}

#[derive(Debug, Clone)]
pub struct FactorizationReport {
    /// `‖L D U − P_r‖_F / ‖P_r‖_F`.
    pub product_rel_error: f64,
    pub certificate_holds: bool,
    /// Whether dense Cholesky of `S` succeeded.
    pub s_spd: bool,
    pub s_min_eigenvalue: f64,
}

impl FactorizationReport {
    /// `S` is SPD whenever the certificate holds.
    pub fn spd_implication_holds(&self) -> bool {
        !self.certificate_holds || self.s_spd
    }
}

/// Dense factors `L = [I 0; B𝐀⁻¹ I]`, `D = diag(A⊗I₃, S)`,
/// `U = [I 𝐀⁻¹Bᵀ; 0 I]` with `𝐀 = A⊗I₃`.
pub fn block_factors(d: &DenseSaddle, beta: f64) -> (DenseMatrix, DenseMatrix, DenseMatrix) {
    let n = d.dim();
    let off = 3 * d.n_u;
    let mut l = DenseMatrix::identity(n);
    l.set_block(off, 0, &d.ainv_bt.transpose());
    let mut dm = DenseMatrix::zeros(n, n);
    for comp in 0..3 {
        dm.set_block(comp * d.n_u, comp * d.n_u, &d.a);
    }
    dm.set_block(off, off, &d.schur(beta));
    let mut u = DenseMatrix::identity(n);
    u.set_block(0, off, &d.ainv_bt);
    (l, dm, u)
}

pub fn verify_block_factorization(sys: &SaddleSystem, beta: f64) -> Result<FactorizationReport> {
    let d = DenseSaddle::new(sys)?;
    let (l, dm, u) = block_factors(&d, beta);
    let prod = l.matmul(&dm)?.matmul(&u)?;
    let pr = d.regularized(beta);
    check_dim("block factorization product", pr.nrows(), prod.nrows())?;
    let err = prod.combine(1.0, &pr, -1.0)?.frobenius_norm() / pr.frobenius_norm();
    let s = d.schur(beta);
    let (q_min, _) = extremes(&d.q)?;
    let (_, m_max) = d.m_extremes()?;
    let (s_min, _) = extremes(&s)?;
    Ok(FactorizationReport {
        product_rel_error: err,
        certificate_holds: beta * q_min > m_max,
        s_spd: cholesky(&s).is_ok(),
        s_min_eigenvalue: s_min,
    })
}
