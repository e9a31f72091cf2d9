use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use stokes_saddle::bench::{emit_table, run_experiment, BetaSetting, ExperimentConfig, Outer, TableFormat};
use stokes_saddle::fem::Condensation;
use stokes_saddle::krylov::KrylovConfig;
use stokes_saddle::precond::{Mode, DEFAULT_SEED};

/// Solve the generalized Stokes channel problem over an (alpha, nu) grid
/// with the regularized preconditioners and print IT/CPU/RES/RRES tables.
#[derive(Debug, Parser)]
#[command(name = "stokes-bench", version)]
struct Args {
    /// Reaction coefficients, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [1e2, 1e3, 1e4])]
    alpha: Vec<f64>,
    /// Viscosities, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [1e-3, 1e-2, 1e-1])]
    nu: Vec<f64>,
    /// Mesh cells per direction as NX,NY,NZ.
    #[arg(long, default_value = "8,4,4", value_parser = parse_mesh)]
    mesh: [usize; 3],
    /// Regularization parameter, or "auto".
    #[arg(long, default_value = "auto")]
    beta: BetaSetting,
    /// Relative residual tolerance of the outer method.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// GMRES restart length.
    #[arg(long, default_value_t = 20)]
    restart: usize,
    /// Cap on total outer iterations.
    #[arg(long, default_value_t = 200)]
    maxit: usize,
    /// Outer methods: rgmres, fgmres (comma separated).
    #[arg(long, value_delimiter = ',', default_values = ["rgmres", "fgmres"])]
    outer: Vec<Outer>,
    /// Preconditioners: pr, pgr (comma separated).
    #[arg(long, value_delimiter = ',', default_values = ["pr", "pgr"])]
    precond: Vec<Mode>,
    /// Use the unscaled bubble block C = Σ B_ib B_ibᵀ.
    #[arg(long = "paper-c")]
    unscaled_c: bool,
    /// Output format: csv or markdown.
    #[arg(long, default_value = "markdown")]
    format: TableFormat,
    /// Write the table here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Export each assembled system as Matrix Market files into this directory.
    #[arg(long)]
    export_mtx: Option<PathBuf>,
    /// Seed of the power-iteration start vectors.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

fn parse_mesh(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    <[usize; 3]>::try_from(parts).map_err(|p| format!("expected NX,NY,NZ, got {} values", p.len()))
}

fn main() -> ExitCode {
    let args = Args::parse();
    let config = ExperimentConfig {
        alpha_list: args.alpha,
        nu_list: args.nu,
        mesh: args.mesh,
        beta: args.beta,
        outers: args.outer,
        preconds: args.precond,
        cfg: KrylovConfig {
            tol: args.tol,
            max_iters: args.maxit,
            restart: args.restart,
            ..KrylovConfig::default()
        },
        condensation: if args.unscaled_c {
            Condensation::Unscaled
        } else {
            Condensation::Mini
        },
        seed: args.seed,
        export_dir: args.export_mtx,
        threads: None,
    };
    let rows = match run_experiment(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("stokes-bench: {e}");
            return ExitCode::from(2);
        }
    };
    let table = match emit_table(&rows, args.format) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("stokes-bench: {e}");
            return ExitCode::from(2);
        }
    };
    match &args.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &table) {
                eprintln!("stokes-bench: writing {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{table}"),
    }
    for r in rows.iter().filter(|r| r.error.is_some() || r.flagged) {
        eprintln!(
            "stokes-bench: alpha={:e} nu={:e} {} {}: {}",
            r.alpha,
            r.nu,
            r.precond.label(),
            r.outer.label(),
            r.error.as_deref().unwrap_or("true residual above the reporting bound")
        );
    }
    if rows.iter().all(|r| r.converged) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
