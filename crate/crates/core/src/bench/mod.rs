//! Benchmark harness: channel assembly over an `(α, ν)` grid, solves with
//! both preconditioner modes under restarted and flexible GMRES, and table
//! output.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::fem::{channel_system, export_system, Condensation, SaddleSystem, StokesParams};
use crate::krylov::{fgmres, gmres_left, KrylovConfig, Preconditioner, SolveReport};
use crate::precond::{certified_beta, InnerTolerances, Mode, RegularizedPrecond, DEFAULT_SEED};

/// Safety factor of the automatic β.
pub const BETA_SAFETY: f64 = 1.1;
/// A converged row is flagged when its true RRES exceeds `tol` by more
/// than this factor.
pub const KAPPA_REPORT: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outer {
    /// Left-preconditioned restarted GMRES.
    Rgmres,
    /// Right-preconditioned flexible GMRES.
    Fgmres,
}

impl Outer {
    pub fn label(self) -> &'static str {
        match self {
            Outer::Rgmres => "RGMRES",
            Outer::Fgmres => "FGMRES",
        }
    }
}

impl FromStr for Outer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rgmres" => Ok(Outer::Rgmres),
            "fgmres" => Ok(Outer::Fgmres),
            _ => Err(Error::InvalidArgument(format!("unknown outer method {s:?}"))),
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pr" => Ok(Mode::Pr),
            "pgr" => Ok(Mode::Pgr),
            _ => Err(Error::InvalidArgument(format!("unknown preconditioner {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaSetting {
    /// Heuristic β, raised if its certificate fails.
    Auto,
    Fixed(f64),
}

impl FromStr for BetaSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(BetaSetting::Auto);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("beta must be a number or 'auto', got {s:?}")))?;
        if v > 0.0 && v.is_finite() {
            Ok(BetaSetting::Fixed(v))
        } else {
            Err(Error::InvalidArgument(format!("beta must be > 0, got {v}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TableFormat::Csv),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            _ => Err(Error::InvalidArgument(format!("unknown table format {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub alpha_list: Vec<f64>,
    pub nu_list: Vec<f64>,
    pub mesh: [usize; 3],
    pub beta: BetaSetting,
    pub outers: Vec<Outer>,
    pub preconds: Vec<Mode>,
    pub cfg: KrylovConfig,
    pub condensation: Condensation,
    pub seed: u64,
    /// Write each assembled system here, one subdirectory per `(α, ν)`.
    pub export_dir: Option<PathBuf>,
    /// Worker threads; `None` reads `BENCH_THREADS`, falling back to the
    /// available parallelism.
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            alpha_list: vec![1e2, 1e3, 1e4],
            nu_list: vec![1e-3, 1e-2, 1e-1],
            mesh: [8, 4, 4],
            beta: BetaSetting::Auto,
            outers: vec![Outer::Rgmres, Outer::Fgmres],
            preconds: vec![Mode::Pr, Mode::Pgr],
            cfg: KrylovConfig::default(),
            condensation: Condensation::Mini,
            seed: DEFAULT_SEED,
            export_dir: None,
            threads: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        if self.alpha_list.is_empty() || self.nu_list.is_empty() || self.outers.is_empty() || self.preconds.is_empty()
        {
            return Err(Error::InvalidArgument("experiment grid is empty".into()));
        }
        if self.mesh.contains(&0) {
            return Err(Error::InvalidArgument(format!("mesh dims must be >= 1, got {:?}", self.mesh)));
        }
        for &a in &self.alpha_list {
            StokesParams::new(a, self.nu_list[0]).validate()?;
        }
        for &n in &self.nu_list {
            StokesParams::new(self.alpha_list[0], n).validate()?;
        }
        Ok(())
    }

    fn worker_count(&self, jobs: usize) -> usize {
        let requested = self.threads.or_else(|| {
            std::env::var("BENCH_THREADS")
                .ok()
                .and_then(|v| v.trim().parse().ok())
        });
        let default = std::thread::available_parallelism().map_or(1, |n| n.get());
        requested.unwrap_or(default).clamp(1, jobs.max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub alpha: f64,
    pub nu: f64,
    pub precond: Mode,
    pub outer: Outer,
    pub beta: f64,
    pub iterations: usize,
    /// Wall-clock seconds of the outer solve, setup excluded.
    pub cpu: f64,
    /// `‖d − 𝒜x‖₂` of the returned iterate.
    pub res: f64,
    pub rres: f64,
    pub inner_a_solves: usize,
    pub a_column_matvecs: usize,
    pub converged: bool,
    /// Converged, but `rres > KAPPA_REPORT·tol`.
    pub flagged: bool,
    pub error: Option<String>,
}

/// One row per `(outer, α, ν, precond)` in that nesting order. Failures
/// become unconverged rows carrying the error text.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let cells: Vec<(f64, f64)> = config
        .alpha_list
        .iter()
        .flat_map(|&a| config.nu_list.iter().map(move |&n| (a, n)))
        .collect();
    let results: Mutex<Vec<Option<Vec<ResultRow>>>> = Mutex::new(vec![None; cells.len()]);
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..config.worker_count(cells.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(alpha, nu)) = cells.get(i) else { break };
                let rows = run_cell(config, alpha, nu);
                results.lock().expect("result lock")[i] = Some(rows);
            });
        }
    });
    let per_cell: Vec<Vec<ResultRow>> = results
        .into_inner()
        .expect("result lock")
        .into_iter()
        .map(|r| r.expect("every cell ran"))
        .collect();
    let mut rows = Vec::new();
    for &outer in &config.outers {
        for cell in &per_cell {
            rows.extend(cell.iter().filter(|r| r.outer == outer).cloned());
        }
    }
    Ok(rows)
}

fn failed_row(alpha: f64, nu: f64, outer: Outer, precond: Mode, beta: f64, err: &Error) -> ResultRow {
    ResultRow {
        alpha,
        nu,
        precond,
        outer,
        beta,
        iterations: 0,
        cpu: 0.0,
        res: f64::NAN,
        rres: f64::NAN,
        inner_a_solves: 0,
        a_column_matvecs: 0,
        converged: false,
        flagged: false,
        error: Some(err.to_string()),
    }
}

fn run_cell(config: &ExperimentConfig, alpha: f64, nu: f64) -> Vec<ResultRow> {
    let params = StokesParams::new(alpha, nu).with_condensation(config.condensation);
    let setup = channel_system(config.mesh, &params).and_then(|sys| {
        if let Some(dir) = &config.export_dir {
            export_system(dir.join(format!("alpha{alpha:e}_nu{nu:e}")), &sys)?;
        }
        let beta = match config.beta {
            BetaSetting::Fixed(b) => b,
            BetaSetting::Auto => certified_beta(&sys, BETA_SAFETY, config.seed)?.beta,
        };
        Ok((sys, beta))
    });
    let mut rows = Vec::new();
    for &outer in &config.outers {
        for &precond in &config.preconds {
            rows.push(match &setup {
                Ok((sys, beta)) => solve_one(sys, alpha, nu, outer, precond, *beta, &config.cfg)
                    .unwrap_or_else(|e| failed_row(alpha, nu, outer, precond, *beta, &e)),
                Err(e) => failed_row(alpha, nu, outer, precond, f64::NAN, e),
            });
        }
    }
    rows
}

/// Solves `𝒜x = d` from `x₀ = 0` with one preconditioner mode and one
/// outer method, returning the solution and its report.
pub fn solve_system(
    sys: &SaddleSystem,
    outer: Outer,
    precond: Mode,
    beta: f64,
    cfg: &KrylovConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    let rhs = sys.rhs.as_slice();
    match outer {
        Outer::Rgmres => {
            let pc = RegularizedPrecond::new(sys, beta, precond, InnerTolerances::rgmres())?;
            gmres_left(&pc, rhs, cfg)
        }
        Outer::Fgmres => {
            let pc = RegularizedPrecond::new(sys, beta, precond, InnerTolerances::fgmres())?;
            let (x, mut rep) = fgmres(sys, &pc, rhs, cfg)?;
            rep.inner = pc.inner_work();
            Ok((x, rep))
        }
    }
}

fn solve_one(
    sys: &SaddleSystem,
    alpha: f64,
    nu: f64,
    outer: Outer,
    precond: Mode,
    beta: f64,
    cfg: &KrylovConfig,
) -> Result<ResultRow> {
    let start = Instant::now();
    let (x, rep) = solve_system(sys, outer, precond, beta, cfg)?;
    let cpu = start.elapsed().as_secs_f64();
    let (res, rres) = sys.residual_norms(&x)?;
    Ok(ResultRow {
        alpha,
        nu,
        precond,
        outer,
        beta,
        iterations: rep.iterations,
        cpu,
        res,
        rres,
        inner_a_solves: rep.inner.a_solves,
        a_column_matvecs: rep.inner.a_column_matvecs,
        converged: rep.converged,
        flagged: rep.converged && rres > KAPPA_REPORT * cfg.tol,
        error: None,
    })
}

const HEADER: [&str; 12] = [
    "alpha",
    "nu",
    "precond",
    "outer",
    "IT",
    "CPU",
    "RES",
    "RRES",
    "inner_A_solves",
    "A_column_matvecs",
    "beta",
    "converged",
];

fn cells(r: &ResultRow) -> [String; 12] {
    let status = match (&r.error, r.converged, r.flagged) {
        (Some(e), _, _) => format!("error: {e}"),
        (None, true, false) => "yes".into(),
        (None, true, true) => "flagged".into(),
        (None, false, _) => "no".into(),
    };
    [
        format!("{:e}", r.alpha),
        format!("{:e}", r.nu),
        r.precond.label().into(),
        r.outer.label().into(),
        r.iterations.to_string(),
        format!("{:.3}", r.cpu),
        format!("{:.2e}", r.res),
        format!("{:.2e}", r.rres),
        r.inner_a_solves.to_string(),
        r.a_column_matvecs.to_string(),
        format!("{:.2e}", r.beta),
        status,
    ]
}

/// Renders rows as CSV or a Markdown table in a fixed column order.
pub fn emit_table(rows: &[ResultRow], format: TableFormat) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no result rows to emit".into()));
    }
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            let _ = writeln!(out, "{}", HEADER.join(","));
            for r in rows {
                let c = cells(r).map(|s| if s.contains(',') { format!("\"{s}\"") } else { s });
                let _ = writeln!(out, "{}", c.join(","));
            }
        }
        TableFormat::Markdown => {
            let _ = writeln!(out, "| {} |", HEADER.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(HEADER.len()));
            for r in rows {
                let c = cells(r).map(|s| s.replace('|', "/"));
                let _ = writeln!(out, "| {} |", c.join(" | "));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(precond: Mode) -> ResultRow {
        ResultRow {
            alpha: 100.0,
            nu: 1e-3,
            precond,
            outer: Outer::Rgmres,
            beta: 2.0,
            iterations: 12,
            cpu: 0.01,
            res: 1.23456e-7,
            rres: 4.5e-9,
            inner_a_solves: 30,
            a_column_matvecs: 300,
            converged: true,
            flagged: false,
            error: None,
        }
    }

    #[test]
    fn csv_single_row() {
        let t = emit_table(&[row(Mode::Pr)], TableFormat::Csv).unwrap();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("alpha,nu,precond,outer,IT,CPU,RES,RRES"));
        assert!(lines[1].contains("1.23e-7") && lines[1].contains("4.50e-9"));
    }

    #[test]
    fn markdown_rows_adjacent() {
        let t = emit_table(&[row(Mode::Pr), row(Mode::Pgr)], TableFormat::Markdown).unwrap();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[2].contains("P_r") && lines[3].contains("P_Gr"));
    }

    #[test]
    fn empty_rejected() {
        assert!(emit_table(&[], TableFormat::Csv).is_err());
    }

    #[test]
    fn parsers() {
        assert_eq!("auto".parse::<BetaSetting>().unwrap(), BetaSetting::Auto);
        assert_eq!("0.5".parse::<BetaSetting>().unwrap(), BetaSetting::Fixed(0.5));
        assert!("-1".parse::<BetaSetting>().is_err());
        assert_eq!("PGR".parse::<Mode>().unwrap(), Mode::Pgr);
        assert_eq!("fgmres".parse::<Outer>().unwrap(), Outer::Fgmres);
        assert!("gmres".parse::<Outer>().is_err());
    }
}
