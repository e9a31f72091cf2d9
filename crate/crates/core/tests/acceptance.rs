//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! non-zero when any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stokes_saddle::bench::{run_experiment, ExperimentConfig, Outer, ResultRow};
use stokes_saddle::fem::{assemble, assemble_full, build_box_mesh, channel_system, StokesParams, CHANNEL_EXTENTS};
use stokes_saddle::global::{
    error_norm_identity, pgcg_orthogonality_check, pgcg_recorded, residual_bound_check,
};
use stokes_saddle::krylov::{gmres_left, ichol0, KrylovConfig};
use stokes_saddle::precond::{beta_heuristic, Mode, RegularizedPrecond, BETA_MIN};
use stokes_saddle::sparse::{CsrMatrix, MultiVector};
use stokes_saddle::verify::{verify_block_factorization, verify_pressure_spectrum};
use stokes_saddle::Result;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn params() -> [StokesParams; 2] {
    [StokesParams::new(1e2, 1e-3), StokesParams::new(1e4, 1e-1)]
}

fn random_block(n: usize, s: usize, rng: &mut ChaCha8Rng) -> MultiVector {
    let data = (0..n * s).map(|_| rng.random_range(-1.0..1.0)).collect();
    MultiVector::from_col_major(n, s, data).expect("shape")
}

/// Velocity blocks of the (2,2,2) mesh before Dirichlet elimination, over
/// the benchmark (α, ν) grid.
fn velocity_blocks_222() -> Result<Vec<CsrMatrix>> {
    let mesh = build_box_mesh(2, 2, 2, CHANNEL_EXTENTS)?;
    let mut out = Vec::new();
    for alpha in [1e2, 1e3, 1e4] {
        for nu in [1e-3, 1e-2, 1e-1] {
            out.push(assemble_full(&mesh, &StokesParams::new(alpha, nu))?.a);
        }
    }
    Ok(out)
}

/// Reference scale for β on systems where the heuristic clamps.
fn base_beta(sys: &stokes_saddle::fem::SaddleSystem) -> Result<f64> {
    let h = beta_heuristic(sys, 1.1)?;
    Ok(if h.beta > BETA_MIN {
        h.beta
    } else {
        sys.c.max_abs() / sys.q.max_abs()
    })
}

fn criterion1() -> Result<Outcome> {
    let mut worst = 0.0f64;
    let mut worst_elim = 0.0f64;
    let mut mult_ok = true;
    let mut cases = 0;
    for dims in [[1, 1, 1], [2, 2, 2]] {
        let sys = channel_system(dims, &StokesParams::new(1e2, 1e-2))?;
        let b0 = base_beta(&sys)?;
        for scale in [0.01, 0.1, 1.0, 10.0] {
            let r = verify_pressure_spectrum(&sys, scale * b0)?;
            mult_ok &= r.multiplicity_one == 3 * sys.n_u() && r.velocity_fixed_columns == 3 * sys.n_u();
            worst = worst.max(r.max_formula_residual());
            worst_elim = worst_elim.max(r.max_schur_form_residual());
            cases += 1;
        }
    }
    Ok(outcome(
        mult_ok && worst <= 1e-8,
        format!(
            "{cases} cases, multiplicity 3n_u {}, max |λ−(a−c)/(a+βq)| = {worst:.3e} (≤ 1e-8); \
             max |λ−(a−c)/(a−βq)| = {worst_elim:.3e}",
            if mult_ok { "exact" } else { "violated" }
        ),
    ))
}

fn criterion2() -> Result<Outcome> {
    let sys = channel_system([1, 1, 1], &StokesParams::new(1e2, 1e-2))?;
    let b0 = base_beta(&sys)?;
    let mut worst = 0.0f64;
    let mut spd_ok = true;
    for scale in [0.01, 0.1, 1.0, 10.0] {
        let r = verify_block_factorization(&sys, scale * b0)?;
        worst = worst.max(r.product_rel_error);
        spd_ok &= r.spd_implication_holds();
    }
    Ok(outcome(
        worst <= 1e-10 && spd_ok,
        format!("‖LDU − P_r‖/‖P_r‖ = {worst:.3e} (≤ 1e-10), certificate ⇒ S SPD: {spd_ok}"),
    ))
}

fn criterion3() -> Result<Outcome> {
    let sys = channel_system([1, 1, 1], &StokesParams::new(1e2, 1e-2))?;
    let beta = base_beta(&sys)?;
    let pr = RegularizedPrecond::dense_exact(&sys, beta, Mode::Pr)?;
    let n = sys.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut d = vec![0.0; n];
    sys.apply_flat(&x, &mut d)?;
    let cfg = KrylovConfig::default()
        .with_tol(1e-10)
        .with_restart(n + 1)
        .with_max_iters(sys.n_p() + 1);
    let (_, rep) = gmres_left(&pr, &d, &cfg)?;
    let last = rep.residual_history.last().copied().unwrap_or(f64::NAN);
    Ok(outcome(
        rep.converged && last <= 1e-10 && rep.iterations <= sys.n_p() + 1,
        format!(
            "{} iterations (≤ n_p+1 = {}), preconditioned relative residual {last:.3e} (≤ 1e-10)",
            rep.iterations,
            sys.n_p() + 1
        ),
    ))
}

fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let r: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = (0..n).map(|k| r[k * n + i] * r[k * n + j]).sum::<f64>();
        }
        a[i * n + i] += n as f64;
    }
    a
}

/// Scalar CG on `(I₃ ⊗ A) x = vec(H)` returning every iterate.
fn stacked_cg(a: &[f64], n: usize, h: &[f64], iters: usize) -> Vec<Vec<f64>> {
    let len = h.len();
    let apply = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (blk, o) in v.chunks(n).zip(out.chunks_mut(n)) {
            for i in 0..n {
                o[i] = (0..n).map(|j| a[i * n + j] * blk[j]).sum();
            }
        }
        out
    };
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let mut x = vec![0.0; len];
    let mut r = h.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut out = vec![x.clone()];
    for _ in 0..iters {
        let ap = apply(&p);
        let alpha = rr / dot(&p, &ap);
        x.iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
        r.iter_mut().zip(&ap).for_each(|(r, q)| *r -= alpha * q);
        let rr_new = dot(&r, &r);
        p = r.iter().zip(&p).map(|(r, p)| r + rr_new / rr * p).collect();
        rr = rr_new;
        out.push(x.clone());
    }
    out
}

fn criterion4() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(5..=60);
        let dense = random_spd(n, &mut rng);
        let a = CsrMatrix::from_dense(n, n, &dense)?;
        let h = random_block(n, 3, &mut rng);
        let cfg = KrylovConfig::default().with_tol(1e-10).with_max_iters(3 * n);
        let (_, _, state) = pgcg_recorded(&a, None, &h, &cfg)?;
        let oracle = stacked_cg(&dense, n, h.as_slice(), state.iterations());
        let scale = oracle.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for (xk, ok) in state.iterates.iter().zip(&oracle) {
            let dev = xk.as_slice().iter().zip(ok).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            worst = worst.max(dev / scale);
        }
    }
    Ok(outcome(
        worst <= 1e-10,
        format!("20 systems, max per-iteration deviation {worst:.3e} (≤ 1e-10)"),
    ))
}

fn criterion5() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut count = 0;
    for a in velocity_blocks_222()? {
        let g = ichol0(&a)?;
        let h = random_block(a.nrows(), 3, &mut rng);
        for k in 1..=5 {
            let r = error_norm_identity(&a, Some(&g), &h, k)?;
            count += 1;
            worst = worst.max(r.relative_gap());
        }
    }
    Ok(outcome(
        worst <= 1e-6,
        format!("{count} checks, max relative gap {worst:.3e} (≤ 1e-6)"),
    ))
}

fn criterion6() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut violations = 0;
    let mut count = 0;
    for a in velocity_blocks_222()? {
        let g = ichol0(&a)?;
        let h = random_block(a.nrows(), 3, &mut rng);
        for k in 1..=5 {
            let r = residual_bound_check(&a, Some(&g), &h, k)?;
            count += 1;
            if !r.holds(1e-8) {
                violations += 1;
            }
            if let Some(b) = r.bound {
                worst = worst.max(r.residual_sq / b);
            }
        }
    }
    Ok(outcome(
        violations == 0,
        format!("{count} checks, {violations} violations, max ‖R_k‖²/bound = {worst:.3e}"),
    ))
}

fn criterion7() -> Result<Outcome> {
    let config = ExperimentConfig::default();
    let rows = run_experiment(&config)?;
    let mut failures = Vec::new();
    let mut cells = 0;
    for outer in [Outer::Rgmres, Outer::Fgmres] {
        for &alpha in &config.alpha_list {
            for &nu in &config.nu_list {
                cells += 1;
                let find = |m: Mode| -> Option<&ResultRow> {
                    rows.iter().find(|r| r.outer == outer && r.alpha == alpha && r.nu == nu && r.precond == m)
                };
                let (Some(pr), Some(pgr)) = (find(Mode::Pr), find(Mode::Pgr)) else {
                    failures.push(format!("{} α={alpha:e} ν={nu:e}: missing row", outer.label()));
                    continue;
                };
                let converged = |r: &ResultRow| r.error.is_none() && r.converged && r.rres <= 1e-5;
                let ok = converged(pr)
                    && converged(pgr)
                    && pgr.iterations <= pr.iterations
                    && pgr.inner_a_solves <= pr.inner_a_solves;
                if !ok {
                    failures.push(format!(
                        "{} α={alpha:e} ν={nu:e}: IT {}/{} RRES {:.1e}/{:.1e} A-solves {}/{}",
                        outer.label(),
                        pr.iterations,
                        pgr.iterations,
                        pr.rres,
                        pgr.rres,
                        pr.inner_a_solves,
                        pgr.inner_a_solves,
                    ));
                }
            }
        }
    }
    let mut detail = format!("{}/{cells} cells satisfy convergence and ordering", cells - failures.len());
    for f in failures.iter().take(4) {
        detail.push_str(&format!("\n      {f} (P_r/P_Gr)"));
    }
    if failures.len() > 4 {
        detail.push_str(&format!("\n      … {} more", failures.len() - 4));
    }
    Ok(outcome(failures.is_empty(), detail))
}

fn criterion8() -> Result<Outcome> {
    let mut worst = 0.0f64;
    let mut count = 0;
    for nx in 1..=3 {
        for ny in 1..=3 {
            for nz in 1..=3 {
                let mesh = build_box_mesh(nx, ny, nz, CHANNEL_EXTENTS)?;
                for p in params() {
                    let full = assemble_full(&mesh, &p)?.a;
                    let reduced = assemble(&mesh, &p)?.a;
                    for a in [full, reduced].iter().filter(|a| a.nrows() > 0) {
                        worst = worst.max(ichol0(a)?.pattern_residual(a)?);
                        count += 1;
                    }
                }
            }
        }
    }
    Ok(outcome(
        worst <= 1e-12,
        format!("{count} blocks, max pattern-restricted residual {worst:.3e} (≤ 1e-12)"),
    ))
}

fn criterion9() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    let mut count = 0;
    let mut instances = velocity_blocks_222()?;
    for p in params() {
        instances.push(assemble_full(&build_box_mesh(3, 3, 3, CHANNEL_EXTENTS)?, &p)?.a);
        instances.push(channel_system([4, 4, 4], &p)?.a);
    }
    for a in instances {
        let g = ichol0(&a)?;
        let h = random_block(a.nrows(), 3, &mut rng);
        let cfg = KrylovConfig::default().with_tol(1e-300).with_max_iters(10);
        let (_, _, state) = pgcg_recorded(&a, Some(&g), &h, &cfg)?;
        worst = worst.max(pgcg_orthogonality_check(&state, Some(&g))?);
        count += 1;
    }
    Ok(outcome(
        worst <= 1e-8,
        format!("{count} instances, k ≤ 10, max normalized violation {worst:.3e} (≤ 1e-8)"),
    ))
}

type Criterion = fn() -> Result<Outcome>;

fn main() -> ExitCode {
    let suite: [(&str, Criterion, Duration); 9] = [
        ("pressure spectrum of the regularized preconditioner", criterion1, Duration::from_secs(60)),
        ("block factorization of P_r", criterion2, Duration::from_secs(10)),
        ("finite termination of preconditioned GMRES", criterion3, Duration::from_secs(10)),
        ("global CG against stacked CG", criterion4, Duration::from_secs(10)),
        ("PGCG error-norm identity", criterion5, Duration::from_secs(30)),
        ("PGCG residual bound", criterion6, Duration::from_secs(30)),
        ("P_Gr versus P_r on the (8,4,4) channel grid", criterion7, Duration::from_secs(15 * 60)),
        ("IC(0) pattern residual", criterion8, Duration::from_secs(10)),
        ("PGCG Galerkin orthogonality", criterion9, Duration::from_secs(10)),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in suite.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && elapsed <= *budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {}: {} {name}: {detail} [{:.2} s, budget {} s]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} passed, {failed} failed", suite.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
