use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Result};
use crate::fem::SaddleSystem;
use crate::krylov::{ichol0, ichol0_shifted, pcg, IcholFactor, KrylovConfig};
use crate::sparse::CsrMatrix;

/// Number of power iterations behind every spectral estimate here.
pub const POWER_ITERATIONS: usize = 50;
/// Lower clamp on the returned β.
pub const BETA_MIN: f64 = 1e-8;
/// Seed of the start vectors.
pub const DEFAULT_SEED: u64 = 0x5eed;

const STAGNATION: f64 = 1e-3;

/// Result of a power iteration run with a flag for an estimate that was
/// still moving when the iteration budget ran out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    pub value: f64,
    pub stagnated: bool,
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nrm > 0.0 {
        v.iter_mut().for_each(|x| *x /= nrm);
    }
    v
}

/// Largest eigenvalue of a symmetric positive semidefinite map by
/// Rayleigh quotients of the power sequence.
pub fn power_max(
    n: usize,
    apply: impl Fn(&[f64]) -> Result<Vec<f64>>,
    iterations: usize,
    seed: u64,
) -> Result<SpectralEstimate> {
    if n == 0 {
        return Ok(SpectralEstimate {
            value: 0.0,
            stagnated: false,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = random_unit(n, &mut rng);
    let (mut lam, mut prev) = (0.0, f64::NAN);
    for _ in 0..iterations {
        let w = apply(&v)?;
        prev = lam;
        lam = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let nrm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nrm == 0.0 {
            return Ok(SpectralEstimate {
                value: 0.0,
                stagnated: false,
            });
        }
        v = w.into_iter().map(|x| x / nrm).collect();
    }
    let stagnated = (lam - prev).abs() > STAGNATION * lam.abs();
    Ok(SpectralEstimate { value: lam, stagnated })
}

fn factor(a: &CsrMatrix) -> Result<IcholFactor> {
    ichol0(a).or_else(|_| ichol0_shifted(a, 1e-3))
}

/// Smallest eigenvalue of an SPD matrix by inverse power iteration with
/// IC(0)-preconditioned CG inner solves.
pub fn inverse_power_min(q: &CsrMatrix, iterations: usize, seed: u64) -> Result<SpectralEstimate> {
    let g = factor(q)?;
    let cfg = KrylovConfig::default().with_tol(1e-12).with_max_iters(10 * q.nrows().max(10));
    let mu = power_max(
        q.nrows(),
        |v| Ok(pcg(q, Some(&g), v, &cfg)?.0),
        iterations,
        seed,
    )?;
    Ok(SpectralEstimate {
        value: if mu.value > 0.0 { 1.0 / mu.value } else { f64::INFINITY },
        stagnated: mu.stagnated,
    })
}

/// Outcome of [`beta_heuristic`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaEstimate {
    pub beta: f64,
    /// `λ_max(B diag(A)⁻¹ Bᵀ)`.
    pub lambda_max: f64,
    pub lambda_min_q: f64,
    /// An estimate stagnated or the raw value fell below [`BETA_MIN`].
    pub warning: bool,
}

/// `safety · λ_max(B diag(A)⁻¹ Bᵀ) / λ_min(Q)`, clamped below by `1e-8`.
pub fn beta_heuristic(sys: &SaddleSystem, safety: f64) -> Result<BetaEstimate> {
    beta_heuristic_from_parts(&sys.a.diagonal(), &sys.b, &sys.q, safety, DEFAULT_SEED)
}

pub fn beta_heuristic_seeded(sys: &SaddleSystem, safety: f64, seed: u64) -> Result<BetaEstimate> {
    beta_heuristic_from_parts(&sys.a.diagonal(), &sys.b, &sys.q, safety, seed)
}

pub fn beta_heuristic_from_parts(
    a_diag: &[f64],
    b: &[CsrMatrix; 3],
    q: &CsrMatrix,
    safety: f64,
    seed: u64,
) -> Result<BetaEstimate> {
    let n_p = q.nrows();
    for bi in b {
        check_dim("beta heuristic B rows", n_p, bi.nrows())?;
        check_dim("beta heuristic B cols", a_diag.len(), bi.ncols())?;
    }
    let dinv: Vec<f64> = a_diag.iter().map(|d| 1.0 / d).collect();
    let top = power_max(
        n_p,
        |p| {
            let mut out = vec![0.0; n_p];
            for bi in b {
                let mut t = bi.spmv_transpose(p)?;
                t.iter_mut().zip(&dinv).for_each(|(x, d)| *x *= d);
                bi.spmv_acc(1.0, &t, &mut out)?;
            }
            Ok(out)
        },
        POWER_ITERATIONS,
        seed,
    )?;
    let qmin = inverse_power_min(q, POWER_ITERATIONS, seed.wrapping_add(1))?;
    let raw = safety * top.value / qmin.value;
    Ok(BetaEstimate {
        beta: raw.max(BETA_MIN),
        lambda_max: top.value,
        lambda_min_q: qmin.value,
        warning: top.stagnated || qmin.stagnated || !(raw >= BETA_MIN),
    })
}

/// Estimated `β λ_min(Q) > λ_max(B (A⁻¹ ⊗ I₃) Bᵀ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub beta: f64,
    pub lambda_max_m: f64,
    pub lambda_min_q: f64,
    pub holds: bool,
    pub stagnated: bool,
}

impl Certificate {
    /// `β λ_min(Q) / λ_max(M)`; above one when the certificate holds.
    pub fn margin(&self) -> f64 {
        self.beta * self.lambda_min_q / self.lambda_max_m
    }
}

/// Power-iteration estimate of the positive-definiteness certificate with
/// IC(0)-PCG solves on `A` at tolerance `1e-12`.
pub fn certificate(sys: &SaddleSystem, beta: f64) -> Result<Certificate> {
    certificate_seeded(sys, beta, DEFAULT_SEED)
}

pub fn certificate_seeded(sys: &SaddleSystem, beta: f64, seed: u64) -> Result<Certificate> {
    let lambda_max_m = m_lambda_max(sys, seed)?;
    let qmin = inverse_power_min(&sys.q, POWER_ITERATIONS, seed.wrapping_add(1))?;
    Ok(Certificate {
        beta,
        lambda_max_m: lambda_max_m.value,
        lambda_min_q: qmin.value,
        holds: beta * qmin.value > lambda_max_m.value,
        stagnated: lambda_max_m.stagnated || qmin.stagnated,
    })
}

fn m_lambda_max(sys: &SaddleSystem, seed: u64) -> Result<SpectralEstimate> {
    let n_p = sys.n_p();
    if sys.n_u() == 0 {
        return power_max(0, |_| Ok(Vec::new()), 0, DEFAULT_SEED);
    }
    let g = factor(&sys.a)?;
    let cfg = KrylovConfig::default().with_tol(1e-12).with_max_iters(10 * sys.n_u().max(10));
    power_max(
        n_p,
        |p| {
            let mut out = vec![0.0; n_p];
            for bi in &sys.b {
                let t = bi.spmv_transpose(p)?;
                let y = pcg(&sys.a, Some(&g), &t, &cfg)?.0;
                bi.spmv_acc(1.0, &y, &mut out)?;
            }
            Ok(out)
        },
        POWER_ITERATIONS,
        seed,
    )
}

/// β chosen by [`beta_heuristic`] and, if its certificate fails, raised to
/// `safety · λ_max(M) / λ_min(Q)` with the true `M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaChoice {
    pub beta: f64,
    pub heuristic: BetaEstimate,
    pub certificate: Certificate,
    pub raised: bool,
}

pub fn certified_beta(sys: &SaddleSystem, safety: f64, seed: u64) -> Result<BetaChoice> {
    let heuristic = beta_heuristic_seeded(sys, safety, seed)?;
    let cert = certificate_seeded(sys, heuristic.beta, seed)?;
    if cert.holds {
        return Ok(BetaChoice {
            beta: heuristic.beta,
            heuristic,
            certificate: cert,
            raised: false,
        });
    }
    let beta = (safety * cert.lambda_max_m / cert.lambda_min_q).max(BETA_MIN);
    let certificate = Certificate {
        beta,
        holds: beta * cert.lambda_min_q > cert.lambda_max_m,
        ..cert
    };
    Ok(BetaChoice {
        beta,
        heuristic,
        certificate,
        raised: true,
    })
}
