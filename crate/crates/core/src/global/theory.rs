use crate::error::{check_dim, Error, Result};
use crate::krylov::{IcholFactor, KrylovConfig, SymTridiagonal};
use crate::sparse::{diamond, frobenius_inner, CsrMatrix, MultiVector};
use crate::verify::{cholesky, cholesky_solve, jacobi_eigen, solve_lower, DenseMatrix, LuFactor};

use super::gcg::{apply_block, apply_pinv, pgcg_recorded, DiagnosticsState, DIAGNOSTICS_LIMIT};

/// `⟨X, Y⟩_{P⁻¹} = tr(Yᵀ P⁻¹ X)`, forming the full `s × s` product first.
pub fn p_inner_trace(x: &MultiVector, y: &MultiVector, g: Option<&IcholFactor>) -> Result<f64> {
    let z = apply_pinv(g, x)?;
    let s = x.ncols();
    check_dim("p_inner columns", s, y.ncols())?;
    let mut tr = 0.0;
    for i in 0..s {
        for j in 0..s {
            let v: f64 = y.col(i).iter().zip(z.col(j)).map(|(a, b)| a * b).sum();
            if i == j {
                tr += v;
            }
        }
    }
    Ok(tr)
}

/// `⟨X, Y⟩_{P⁻¹}` as the `1 × 1` diamond product `[Y] ⋄ [P⁻¹X]`.
pub fn p_inner_diamond(x: &MultiVector, y: &MultiVector, g: Option<&IcholFactor>) -> Result<f64> {
    let z = apply_pinv(g, x)?;
    Ok(diamond(std::slice::from_ref(y), std::slice::from_ref(&z))?[0])
}

/// `max_{i<k} |⟨R_k, K_i⟩_{P⁻¹}| / (‖R_k‖_{P⁻¹} ‖K_i‖_{P⁻¹})` for each
/// recorded `k ≥ 1`. Entry `k − 1` belongs to iteration `k`.
pub fn orthogonality_profile(state: &DiagnosticsState, g: Option<&IcholFactor>) -> Result<Vec<f64>> {
    let pk: Vec<MultiVector> = state
        .k_blocks
        .iter()
        .map(|k| apply_pinv(g, k))
        .collect::<Result<_>>()?;
    let knorm: Vec<f64> = state
        .k_blocks
        .iter()
        .zip(&pk)
        .map(|(k, p)| frobenius_inner(k, p).map(|v| v.max(0.0).sqrt()))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(state.iterations());
    for k in 1..state.residuals.len() {
        let r = &state.residuals[k];
        let rn = p_inner_trace(r, r, g)?.max(0.0).sqrt();
        let mut worst: f64 = 0.0;
        for i in 0..k {
            let denom = rn * knorm[i];
            if denom > 0.0 {
                worst = worst.max(frobenius_inner(r, &pk[i])?.abs() / denom);
            }
        }
        out.push(worst);
    }
    Ok(out)
}

/// Orthogonality violation of the last recorded residual against all
/// earlier Krylov blocks; `0` when no iteration was taken.
pub fn pgcg_orthogonality_check(state: &DiagnosticsState, g: Option<&IcholFactor>) -> Result<f64> {
    Ok(orthogonality_profile(state, g)?.last().copied().unwrap_or(0.0))
}

/// Global Lanczos process for `A P⁻¹` in the `P⁻¹` inner product.
#[derive(Debug, Clone)]
pub struct GlobalLanczos {
    /// `T_k = U_kᵀ ⋄ P⁻¹ A P⁻¹ U_k`.
    pub t: SymTridiagonal,
    /// `P⁻¹`-orthonormal blocks `U_1..U_k`.
    pub basis: Vec<MultiVector>,
    pub invariant: bool,
}

pub fn global_lanczos(
    a: &CsrMatrix,
    g: Option<&IcholFactor>,
    r0: &MultiVector,
    steps: usize,
) -> Result<GlobalLanczos> {
    check_dim("global_lanczos start", a.nrows(), r0.nrows())?;
    let n0 = p_inner_trace(r0, r0, g)?.max(0.0).sqrt();
    if n0 == 0.0 {
        return Err(Error::InvalidArgument("global Lanczos needs a nonzero start block".into()));
    }
    let mut u = r0.clone();
    u.scale(1.0 / n0);
    let mut basis = vec![u];
    let mut diag = Vec::new();
    let mut off = Vec::new();
    let mut invariant = false;
    let scale = a.max_abs();
    for j in 0..steps {
        let pu = apply_pinv(g, &basis[j])?;
        let mut w = apply_block(a, &pu)?;
        diag.push(frobenius_inner(&w, &pu)?);
        if j + 1 == steps {
            break;
        }
        for _pass in 0..2 {
            for b in &basis {
                let c = p_inner_trace(&w, b, g)?;
                w.axpy(-c, b);
            }
        }
        let eta = p_inner_trace(&w, &w, g)?.max(0.0).sqrt();
        if eta <= 1e-12 * scale * (1.0 + n0) {
            invariant = true;
            break;
        }
        w.scale(1.0 / eta);
        off.push(eta);
        basis.push(w);
    }
    basis.truncate(diag.len());
    Ok(GlobalLanczos {
        t: SymTridiagonal::new(diag, off)?,
        basis,
        invariant,
    })
}

/// `k` steps of PGCG from `X₀ = 0`; fewer if the residual vanishes.
fn pgcg_steps(a: &CsrMatrix, g: Option<&IcholFactor>, h: &MultiVector, k: usize) -> Result<MultiVector> {
    if k == 0 {
        return Ok(MultiVector::zeros(h.nrows(), h.ncols()));
    }
    let cfg = KrylovConfig::default().with_tol(f64::MIN_POSITIVE).with_max_iters(k);
    Ok(pgcg_recorded(a, g, h, &cfg)?.0)
}

fn dense_spd(a: &CsrMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    if a.nrows() > DIAGNOSTICS_LIMIT {
        return Err(Error::OracleScale {
            n: a.nrows(),
            limit: DIAGNOSTICS_LIMIT,
        });
    }
    let d = DenseMatrix::from_csr(a)?;
    let l = cholesky(&d)?;
    Ok((d, l))
}

fn a_norm_sq(a: &DenseMatrix, e: &MultiVector) -> Result<f64> {
    let mut s = 0.0;
    for j in 0..e.ncols() {
        let ae = a.mul_vec(e.col(j))?;
        s += ae.iter().zip(e.col(j)).map(|(x, y)| x * y).sum::<f64>();
    }
    Ok(s)
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// `min ‖q(M) z₀‖²` over polynomials with `q(0) = 1` and degree `≤ k`,
/// for a symmetric `M`. This is `1 / (e₁ᵀ G⁻¹ e₁)` for the Gram matrix `G`
/// of `z₀, M z₀, …, M^k z₀`, evaluated as the squared distance of `z₀`
/// from `span{M z₀, …, M^k z₀}` with a Lanczos basis of that span instead
/// of the ill-conditioned monomial Gram matrix.
fn min_polynomial_residual(
    apply: impl Fn(&[f64]) -> Result<Vec<f64>>,
    z0: &[f64],
    k: usize,
) -> Result<f64> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut last = z0.to_vec();
    for _ in 0..k {
        let mut w = apply(&last)?;
        let before = dot(&w, &w).sqrt();
        for _pass in 0..2 {
            for q in &basis {
                let c = dot(&w, q);
                w.iter_mut().zip(q).for_each(|(w, q)| *w -= c * q);
            }
        }
        let nrm = dot(&w, &w).sqrt();
        if nrm <= 1e-13 * before || nrm == 0.0 {
            break;
        }
        w.iter_mut().for_each(|x| *x /= nrm);
        last = w.clone();
        basis.push(w);
    }
    let mut r = z0.to_vec();
    for _pass in 0..2 {
        for q in &basis {
            let c = dot(&r, q);
            r.iter_mut().zip(q).for_each(|(r, q)| *r -= c * q);
        }
    }
    Ok(dot(&r, &r))
}

/// Both sides of the A-norm error formula for PGCG after `k` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorNormIdentity {
    pub k: usize,
    /// `‖X* − X_k‖²_A`, which equals `‖Y* − Y_k‖²_{P⁻¹AP⁻¹}`.
    pub error_sq: f64,
    /// `1 / (e₁ᵀ (K_{k+1}ᵀ ⋄ A⁻¹ K_{k+1})⁻¹ e₁)`.
    pub formula: f64,
}

impl ErrorNormIdentity {
    pub fn relative_gap(&self) -> f64 {
        let f = self.formula;
        (f - self.error_sq).abs() / self.error_sq.abs().max(f.abs()).max(f64::MIN_POSITIVE)
    }
}

/// Dense check of the PGCG error identity on `A X = H` with `X₀ = 0`.
pub fn error_norm_identity(
    a: &CsrMatrix,
    g: Option<&IcholFactor>,
    h: &MultiVector,
    k: usize,
) -> Result<ErrorNormIdentity> {
    let (ad, l) = dense_spd(a)?;
    check_dim("error identity rhs", a.nrows(), h.nrows())?;
    let mut xstar = MultiVector::zeros(h.nrows(), h.ncols());
    for j in 0..h.ncols() {
        xstar.col_mut(j).copy_from_slice(&cholesky_solve(&l, h.col(j)));
    }
    let mut e = xstar;
    e.axpy(-1.0, &pgcg_steps(a, g, h, k)?);
    let error_sq = a_norm_sq(&ad, &e)?;

    // Y ↦ L⁻¹Y maps the A⁻¹ inner product to the Euclidean one and
    // A P⁻¹ to the symmetric Lᵀ P⁻¹ L, applied column by column.
    let (n, s) = (h.nrows(), h.ncols());
    let z0: Vec<f64> = (0..s).flat_map(|j| solve_lower(&l, h.col(j))).collect();
    let formula = min_polynomial_residual(
        |z| {
            let cols: Vec<Vec<f64>> = z.chunks(n).map(|c| l.mul_vec(c)).collect::<Result<_>>()?;
            let pz = apply_pinv(g, &MultiVector::from_columns(&cols)?)?;
            let lt = l.transpose();
            (0..s).map(|j| lt.mul_vec(pz.col(j))).collect::<Result<Vec<_>>>().map(|v| v.concat())
        },
        &z0,
        k,
    )?;
    Ok(ErrorNormIdentity {
        k,
        error_sq,
        formula,
    })
}

/// Quantities of the PGCG residual bound after `k` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBound {
    pub k: usize,
    /// `‖R_k‖²_{P⁻¹}`.
    pub residual_sq: f64,
    /// `1 / (e₁ᵀ (V_{k+1}ᵀ D̃ V_{k+1})⁻¹ e₁)` from the spectral data of
    /// `L⁻¹ A P⁻¹ L`.
    pub spectral_error_sq: f64,
    /// `λ_max(T̂_{k+1})`.
    pub theta_tilde: f64,
    /// `λ_min(T_k)`; `1` for `k = 0`.
    pub theta: f64,
    /// `spectral_error_sq · θ̃^{k+1} / θ^k`.
    pub bound: Option<f64>,
    /// `spectral_error_sq · det(T̂_{k+1}) / det(T_k)`, an identity for the
    /// residual itself.
    pub determinant_form: Option<f64>,
    /// The Krylov space became invariant before `k + 1` blocks.
    pub terminated: bool,
}

impl ResidualBound {
    /// The inequality holds, or the residual vanished at finite
    /// termination.
    pub fn holds(&self, rel: f64) -> bool {
        match self.bound {
            Some(b) => self.residual_sq <= b * (1.0 + rel),
            None => self.terminated,
        }
    }
}

/// Dense check of the PGCG residual bound on `A X = H` with `X₀ = 0`.
pub fn residual_bound_check(
    a: &CsrMatrix,
    g: Option<&IcholFactor>,
    h: &MultiVector,
    k: usize,
) -> Result<ResidualBound> {
    let (_, l) = dense_spd(a)?;
    check_dim("residual bound rhs", a.nrows(), h.nrows())?;
    let n = a.nrows();

    let xk = pgcg_steps(a, g, h, k)?;
    let mut rk = h.clone();
    rk.axpy(-1.0, &apply_block(a, &xk)?);
    let residual_sq = p_inner_trace(&rk, &rk, g)?;

    // spectral data of LᵀP⁻¹L
    let mut pinv_l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let col = MultiVector::from_columns(&[l.column(j)])?;
        let z = apply_pinv(g, &col)?;
        for i in 0..n {
            pinv_l.set(i, j, z.get(i, 0));
        }
    }
    let mut sym = l.transpose().matmul(&pinv_l)?;
    for i in 0..n {
        for j in i + 1..n {
            let s = 0.5 * (sym.get(i, j) + sym.get(j, i));
            sym.set(i, j, s);
            sym.set(j, i, s);
        }
    }
    let eig = jacobi_eigen(&sym)?;
    let mut dtil = vec![0.0; n];
    for j in 0..h.ncols() {
        let y = solve_lower(&l, h.col(j));
        for (i, d) in dtil.iter_mut().enumerate() {
            let gamma: f64 = (0..n).map(|r| eig.vectors.get(r, i) * y[r]).sum();
            *d += gamma * gamma;
        }
    }
    let weights: Vec<f64> = dtil.iter().map(|d| d.max(0.0).sqrt()).collect();
    let spectral_error_sq = min_polynomial_residual(
        |z| Ok(z.iter().zip(&eig.values).map(|(z, lam)| z * lam).collect()),
        &weights,
        k,
    )?;

    let lz = global_lanczos(a, g, h, k + 1)?;
    let terminated = lz.invariant || lz.basis.len() < k + 1;
    if terminated {
        return Ok(ResidualBound {
            k,
            residual_sq,
            spectral_error_sq,
            theta_tilde: f64::NAN,
            theta: f64::NAN,
            bound: None,
            determinant_form: None,
            terminated,
        });
    }
    let tk = lz.t.to_dense().block(0, 0, k, k);
    let (theta, det_tk) = if k == 0 {
        (1.0, 1.0)
    } else {
        (jacobi_eigen(&tk)?.values[0], LuFactor::new(&tk)?.det())
    };
    let ainv_u: Vec<MultiVector> = lz
        .basis
        .iter()
        .map(|b| {
            let cols: Vec<Vec<f64>> = (0..b.ncols()).map(|j| cholesky_solve(&l, b.col(j))).collect();
            MultiVector::from_columns(&cols)
        })
        .collect::<Result<_>>()?;
    let w = DenseMatrix::from_row_major(k + 1, k + 1, diamond(&lz.basis, &ainv_u)?)?;
    let mut that = LuFactor::new(&w)?.inverse()?;
    for i in 0..=k {
        for j in i + 1..=k {
            let s = 0.5 * (that.get(i, j) + that.get(j, i));
            that.set(i, j, s);
            that.set(j, i, s);
        }
    }
    let theta_tilde = *jacobi_eigen(&that)?.values.last().expect("k + 1 ≥ 1");
    let det_that = LuFactor::new(&that)?.det();
    let bound = Some(spectral_error_sq * theta_tilde.powi(k as i32 + 1) / theta.powi(k as i32));
    let determinant_form = Some(spectral_error_sq * det_that / det_tk);
    Ok(ResidualBound {
        k,
        residual_sq,
        spectral_error_sq,
        theta_tilde,
        theta,
        bound,
        determinant_form,
        terminated,
    })
}
