//! Scalar-RHS Krylov solvers: CG/PCG, IC(0), left-preconditioned restarted
//! GMRES, flexible GMRES and symmetric Lanczos.

mod cg;
mod gmres;
mod ichol;
mod lanczos;
pub(crate) mod vecops;

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{check_dim, Error, Result};
use crate::fem::SaddleSystem;
use crate::sparse::CsrMatrix;

pub use cg::{cg, pcg};
pub use gmres::{fgmres, gmres_left};
pub use ichol::{ichol0, ichol0_shifted, IcholFactor};
pub use lanczos::{lanczos, LanczosResult, SymTridiagonal};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovConfig {
    /// Relative residual threshold τ.
    pub tol: f64,
    /// Cap on total iterations (across restarts for GMRES).
    pub max_iters: usize,
    /// GMRES cycle length.
    pub restart: usize,
    pub max_restarts: usize,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iters: 200,
            restart: 20,
            max_restarts: 100,
        }
    }
}

impl KrylovConfig {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_restart(mut self, restart: usize) -> Self {
        self.restart = restart;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidArgument(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iters == 0 || self.restart == 0 {
            return Err(Error::InvalidArgument(format!(
                "max_iters and restart must be >= 1, got {} and {}",
                self.max_iters, self.restart
            )));
        }
        Ok(())
    }
}

/// Work done inside a preconditioner while an outer solver ran.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InnerWork {
    /// Solve invocations with `A`; a multi-column solve counts once.
    pub a_solves: usize,
    /// Column products `A·x` performed inside those solves.
    pub a_column_matvecs: usize,
    /// PCG iterations spent on the pressure Schur complement.
    pub schur_iterations: usize,
}

impl InnerWork {
    pub fn since(self, earlier: InnerWork) -> InnerWork {
        InnerWork {
            a_solves: self.a_solves - earlier.a_solves,
            a_column_matvecs: self.a_column_matvecs - earlier.a_column_matvecs,
            schur_iterations: self.schur_iterations - earlier.schur_iterations,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Restart cycles started (GMRES variants only).
    pub restarts: usize,
    pub converged: bool,
    /// Relative residual per iteration, starting with the initial value.
    /// Preconditioned norm for `gmres_left`, true norm otherwise.
    pub residual_history: Vec<f64>,
    /// `‖b − A x‖₂` of the returned iterate.
    pub final_res: f64,
    /// `final_res / ‖b‖₂`.
    pub final_rres: f64,
    /// Seconds.
    pub wall_time: f64,
    pub inner: InnerWork,
}

impl SolveReport {
    pub fn history_csv(&self) -> String {
        let mut s = String::from("iteration,relative_residual\n");
        for (i, r) in self.residual_history.iter().enumerate() {
            let _ = writeln!(s, "{i},{r:.6e}");
        }
        s
    }

    pub fn write_history_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.history_csv())?;
        Ok(())
    }
}

/// A square linear map `y = A x`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()>;
}

/// An approximate inverse `z ≈ P⁻¹ r`. May vary between calls when used
/// with [`fgmres`].
pub trait Preconditioner {
    fn dim(&self) -> usize;
    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()>;

    /// Cumulative work counters; zero for preconditioners without inner
    /// solves.
    fn inner_work(&self) -> InnerWork {
        InnerWork::default()
    }
}

/// An operator paired with a left preconditioner. `apply_preconditioned`
/// may be overridden when `P⁻¹A v` has a cheaper direct form.
pub trait PreconditionedSystem {
    fn dim(&self) -> usize;
    fn apply_operator(&self, x: &[f64], y: &mut [f64]) -> Result<()>;
    fn apply_preconditioner(&self, r: &[f64], z: &mut [f64]) -> Result<()>;

    fn apply_preconditioned(&self, v: &[f64], z: &mut [f64]) -> Result<()> {
        let mut t = vec![0.0; self.dim()];
        self.apply_operator(v, &mut t)?;
        self.apply_preconditioner(&t, z)
    }

    fn inner_work(&self) -> InnerWork {
        InnerWork::default()
    }
}

/// `P⁻¹A` assembled from separate operator and preconditioner objects.
pub struct Left<'a, O: ?Sized, P: ?Sized> {
    pub op: &'a O,
    pub precond: &'a P,
}

impl<'a, O: LinearOperator + ?Sized, P: Preconditioner + ?Sized> Left<'a, O, P> {
    pub fn new(op: &'a O, precond: &'a P) -> Result<Self> {
        check_dim("Left preconditioner", op.dim(), precond.dim())?;
        Ok(Self { op, precond })
    }
}

impl<O: LinearOperator + ?Sized, P: Preconditioner + ?Sized> PreconditionedSystem for Left<'_, O, P> {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn apply_operator(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.op.apply(x, y)
    }

    fn apply_preconditioner(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        self.precond.apply(r, z)
    }

    fn inner_work(&self) -> InnerWork {
        self.precond.inner_work()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IdentityPrecond(pub usize);

impl Preconditioner for IdentityPrecond {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        check_dim("identity preconditioner", self.0, r.len())?;
        z.copy_from_slice(r);
        Ok(())
    }
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if self.nrows() != self.ncols() {
            return Err(Error::InvalidMatrix(format!(
                "operator must be square, got {}x{}",
                self.nrows(),
                self.ncols()
            )));
        }
        self.spmv_into(x, y)
    }
}

impl LinearOperator for SaddleSystem {
    fn dim(&self) -> usize {
        SaddleSystem::dim(self)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.apply_flat(x, y)
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        (**self).apply(x, y)
    }
}

/// Wraps a closure as an operator.
pub struct FnOperator<F> {
    n: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64]) -> Result<()>> FnOperator<F> {
    pub fn new(n: usize, f: F) -> Self {
        Self { n, f }
    }
}

impl<F: Fn(&[f64], &mut [f64]) -> Result<()>> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_dim("FnOperator input", self.n, x.len())?;
        check_dim("FnOperator output", self.n, y.len())?;
        (self.f)(x, y)
    }
}

impl<F: Fn(&[f64], &mut [f64]) -> Result<()>> Preconditioner for FnOperator<F> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        LinearOperator::apply(self, r, z)
    }
}

/// `‖b − A x‖₂`.
pub fn true_residual_norm<O: LinearOperator + ?Sized>(op: &O, b: &[f64], x: &[f64]) -> Result<f64> {
    let mut ax = vec![0.0; op.dim()];
    op.apply(x, &mut ax)?;
    Ok(b.iter().zip(&ax).map(|(b, a)| (b - a) * (b - a)).sum::<f64>().sqrt())
}
