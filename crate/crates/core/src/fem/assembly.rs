//! P1-bubble/P1 assembly of the generalized Stokes saddle system
//!
//! ```text
//! [ A  0  0  B1ᵀ ] [u1]   [f1]
//! [ 0  A  0  B2ᵀ ] [u2] = [f2]
//! [ 0  0  A  B3ᵀ ] [u3]   [f3]
//! [ B1 B2 B3 C   ] [p ]   [g ]
//! ```
//!
//! with `a_ij = α∫φiφj + ν∫∇φi·∇φj`, `b_kj = -∫ψk ∂iφj` and the bubble
//! block `C = Σ_T s_T Σ_i B_ib B_ibᵀ`, `B_ib = (32/105)|T| ∂iφ`. All element
//! integrals are exact (closed-form barycentric monomials).

use crate::error::{check_dim, Error, Result};
use crate::sparse::{BlockVector, CsrMatrix, TripletBuilder};

use super::boundary::{inflow_bc, Inflow};
use super::mesh::TetMesh;

/// Scale applied to `Σ_i B_ib B_ibᵀ` per element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Condensation {
    /// `s_T = 1/(α m_b + ν k_b)`: static condensation of the bubble.
    #[default]
    Mini,
    /// `s_T = 1`.
    Unscaled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StokesParams {
    /// Reaction coefficient, 1/s.
    pub alpha: f64,
    /// Kinematic viscosity, m²/s.
    pub nu: f64,
    pub inflow: Inflow,
    pub condensation: Condensation,
    /// Constant body force `f`.
    pub body_force: [f64; 3],
}

impl StokesParams {
    pub fn new(alpha: f64, nu: f64) -> Self {
        Self {
            alpha,
            nu,
            inflow: Inflow::Channel { peak: 0.3 },
            condensation: Condensation::Mini,
            body_force: [0.0; 3],
        }
    }

    pub fn with_inflow(mut self, inflow: Inflow) -> Self {
        self.inflow = inflow;
        self
    }

    pub fn with_condensation(mut self, c: Condensation) -> Self {
        self.condensation = c;
        self
    }

    pub fn with_body_force(mut self, f: [f64; 3]) -> Self {
        self.body_force = f;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::InvalidArgument(format!("nu must be > 0, got {}", self.nu)));
        }
        Ok(())
    }
}

/// Blocks on every mesh vertex, before Dirichlet elimination. Velocity and
/// pressure both use vertex numbering.
#[derive(Debug, Clone)]
pub struct FullBlocks {
    pub a: CsrMatrix,
    pub b: [CsrMatrix; 3],
    pub c: CsrMatrix,
    pub q: CsrMatrix,
    /// `∫ f_i φ_j` per component.
    pub load: [Vec<f64>; 3],
}

/// The assembled saddle-point system with Dirichlet velocities eliminated.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub a: CsrMatrix,
    pub b: [CsrMatrix; 3],
    pub c: CsrMatrix,
    pub q: CsrMatrix,
    pub rhs: BlockVector,
    /// Mesh vertex carrying each velocity unknown.
    pub velocity_vertices: Vec<usize>,
    pub alpha: f64,
    pub nu: f64,
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `∫_T λ0^e0 λ1^e1 λ2^e2 λ3^e3 = e0! e1! e2! e3! 3! / (Σe + 3)! |T|`.
pub fn monomial_integral(exps: [u32; 4], volume: f64) -> f64 {
    let num: f64 = exps.iter().map(|&e| factorial(e)).product::<f64>() * 6.0;
    num / factorial(exps.iter().sum::<u32>() + 3) * volume
}

/// Gradients of the barycentric coordinates; zero volume is rejected.
fn barycentric_gradients(p: [[f64; 3]; 4], tet: usize) -> Result<(f64, [[f64; 3]; 4])> {
    let e = |i: usize| [p[i][0] - p[0][0], p[i][1] - p[0][1], p[i][2] - p[0][2]];
    let (a, b, c) = (e(1), e(2), e(3));
    let cross = |u: [f64; 3], v: [f64; 3]| {
        [
            u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0],
        ]
    };
    let bc = cross(b, c);
    let det = a[0] * bc[0] + a[1] * bc[1] + a[2] * bc[2];
    let vol = det / 6.0;
    if vol.abs() <= f64::EPSILON * 1e-3 || !vol.is_finite() {
        return Err(Error::DegenerateElement { tet, volume: vol });
    }
    // rows of the inverse Jacobian
    let g1 = bc.map(|x| x / det);
    let g2 = cross(c, a).map(|x| x / det);
    let g3 = cross(a, b).map(|x| x / det);
    let g0 = [
        -(g1[0] + g2[0] + g3[0]),
        -(g1[1] + g2[1] + g3[1]),
        -(g1[2] + g2[2] + g3[2]),
    ];
    Ok((vol.abs(), [g0, g1, g2, g3]))
}

fn dot(u: &[f64; 3], v: &[f64; 3]) -> f64 {
    u[0] * v[0] + u[1] * v[1] + u[2] * v[2]
}

/// `∫_T φ_b²` and `∫_T |∇φ_b|²` for `φ_b = 256 λ0λ1λ2λ3`.
pub fn bubble_moments(volume: f64, grads: &[[f64; 3]; 4]) -> (f64, f64) {
    let m_b = 256.0 * 256.0 * monomial_integral([2, 2, 2, 2], volume);
    let mut k_b = 0.0;
    for i in 0..4 {
        for l in 0..4 {
            // ∇φ_b = 256 Σ_i (Π_{j≠i} λ_j) ∇λ_i
            let mut exps = [2u32; 4];
            exps[i] -= 1;
            exps[l] -= 1;
            k_b += dot(&grads[i], &grads[l]) * monomial_integral(exps, volume);
        }
    }
    (m_b, 256.0 * 256.0 * k_b)
}

pub fn assemble_full(mesh: &TetMesh, params: &StokesParams) -> Result<FullBlocks> {
    params.validate()?;
    let nv = mesh.num_vertices();
    let nt = mesh.num_tets();
    let mut a = TripletBuilder::with_capacity(nv, nv, 16 * nt);
    let mut b = [0, 1, 2].map(|_| TripletBuilder::with_capacity(nv, nv, 16 * nt));
    let mut c = TripletBuilder::with_capacity(nv, nv, 16 * nt);
    let mut q = TripletBuilder::with_capacity(nv, nv, 16 * nt);
    let mut load = [vec![0.0; nv], vec![0.0; nv], vec![0.0; nv]];
    let bubble_mean = monomial_integral([1, 1, 1, 1], 1.0) * 256.0;

    for (t, tet) in mesh.tets.iter().enumerate() {
        let p = tet.map(|v| mesh.vertices[v]);
        let (vol, g) = barycentric_gradients(p, t)?;
        let s_t = match params.condensation {
            Condensation::Unscaled => 1.0,
            Condensation::Mini => {
                let (m_b, k_b) = bubble_moments(vol, &g);
                1.0 / (params.alpha * m_b + params.nu * k_b)
            }
        };
        for i in 0..4 {
            for j in 0..4 {
                let mass = monomial_integral(
                    {
                        let mut e = [0u32; 4];
                        e[i] += 1;
                        e[j] += 1;
                        e
                    },
                    vol,
                );
                let stiff = vol * dot(&g[i], &g[j]);
                a.push(tet[i], tet[j], params.alpha * mass + params.nu * stiff);
                q.push(tet[i], tet[j], mass);
                let mut cij = 0.0;
                for (comp, bc) in b.iter_mut().enumerate() {
                    // row: pressure node i, column: velocity node j
                    bc.push(tet[i], tet[j], -g[j][comp] * vol / 4.0);
                    let bi = bubble_mean * vol * g[i][comp];
                    let bj = bubble_mean * vol * g[j][comp];
                    cij += bi * bj;
                }
                c.push(tet[i], tet[j], s_t * cij);
            }
            for comp in 0..3 {
                load[comp][tet[i]] += params.body_force[comp] * vol / 4.0;
            }
        }
    }
    let [b1, b2, b3] = b;
    Ok(FullBlocks {
        a: a.build()?,
        b: [b1.build()?, b2.build()?, b3.build()?],
        c: c.build()?,
        q: q.build()?,
        load,
    })
}

/// Assemble and eliminate Dirichlet velocity vertices, lifting their values
/// into the right-hand side.
pub fn assemble(mesh: &TetMesh, params: &StokesParams) -> Result<SaddleSystem> {
    let full = assemble_full(mesh, params)?;
    let dirichlet = inflow_bc(mesh, params)?;
    let nv = mesh.num_vertices();

    let mut vmap = vec![None; nv];
    let mut velocity_vertices = Vec::new();
    for v in 0..nv {
        if dirichlet[v].is_none() {
            vmap[v] = Some(velocity_vertices.len());
            velocity_vertices.push(v);
        }
    }
    let n_u = velocity_vertices.len();
    let n_p = nv;
    let all: Vec<Option<usize>> = (0..nv).map(Some).collect();

    let a = full.a.submatrix(&vmap, n_u, &vmap, n_u)?;
    let b = [0, 1, 2].map(|i| full.b[i].submatrix(&all, n_p, &vmap, n_u));
    let [b1, b2, b3] = b;
    let b = [b1?, b2?, b3?];

    let mut rhs = BlockVector::zeros(n_u, n_p);
    for comp in 0..3 {
        let ud: Vec<f64> = dirichlet.iter().map(|d| d.map_or(0.0, |v| v[comp])).collect();
        let a_ud = full.a.spmv(&ud)?;
        let out = rhs.u_mut(comp);
        for (k, &v) in velocity_vertices.iter().enumerate() {
            out[k] = full.load[comp][v] - a_ud[v];
        }
        let b_ud = full.b[comp].spmv(&ud)?;
        for (g, bu) in rhs.p_mut().iter_mut().zip(&b_ud) {
            *g -= bu;
        }
    }
    Ok(SaddleSystem {
        a,
        b,
        c: full.c,
        q: full.q,
        rhs,
        velocity_vertices,
        alpha: params.alpha,
        nu: params.nu,
    })
}

impl SaddleSystem {
    pub fn n_u(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_p(&self) -> usize {
        self.q.nrows()
    }

    /// `N = 3 n_u + n_p`.
    pub fn dim(&self) -> usize {
        3 * self.n_u() + self.n_p()
    }

    /// `(A u1 + B1ᵀp; A u2 + B2ᵀp; A u3 + B3ᵀp; B1u1 + B2u2 + B3u3 + C p)`.
    pub fn apply(&self, x: &BlockVector) -> Result<BlockVector> {
        let mut y = BlockVector::zeros(self.n_u(), self.n_p());
        self.apply_flat(x.as_slice(), y.as_mut_slice())?;
        Ok(y)
    }

    pub fn apply_flat(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let (n_u, n_p) = (self.n_u(), self.n_p());
        check_dim("apply_saddle input", 3 * n_u + n_p, x.len())?;
        check_dim("apply_saddle output", 3 * n_u + n_p, y.len())?;
        let (xu, xp) = x.split_at(3 * n_u);
        let (yu, yp) = y.split_at_mut(3 * n_u);
        self.c.spmv_into(xp, yp)?;
        for comp in 0..3 {
            let u = &xu[comp * n_u..(comp + 1) * n_u];
            let out = &mut yu[comp * n_u..(comp + 1) * n_u];
            self.a.spmv_into(u, out)?;
            let bt = self.b[comp].spmv_transpose(xp)?;
            for (o, v) in out.iter_mut().zip(bt) {
                *o += v;
            }
            self.b[comp].spmv_acc(1.0, u, yp)?;
        }
        Ok(())
    }

    /// `Σ_i B_i u_i`.
    pub fn apply_b(&self, u: &[f64]) -> Result<Vec<f64>> {
        let n_u = self.n_u();
        check_dim("apply_b", 3 * n_u, u.len())?;
        let mut out = vec![0.0; self.n_p()];
        for comp in 0..3 {
            self.b[comp].spmv_acc(1.0, &u[comp * n_u..(comp + 1) * n_u], &mut out)?;
        }
        Ok(out)
    }

    /// `(B1ᵀp; B2ᵀp; B3ᵀp)`.
    pub fn apply_bt(&self, p: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(3 * self.n_u());
        for comp in 0..3 {
            out.extend(self.b[comp].spmv_transpose(p)?);
        }
        Ok(out)
    }

    /// `RES = ‖d − 𝒜x‖₂` and `RRES = RES/‖d‖₂`.
    pub fn residual_norms(&self, x: &[f64]) -> Result<(f64, f64)> {
        let mut ax = vec![0.0; self.dim()];
        self.apply_flat(x, &mut ax)?;
        let res = self
            .rhs
            .as_slice()
            .iter()
            .zip(&ax)
            .map(|(d, v)| (d - v) * (d - v))
            .sum::<f64>()
            .sqrt();
        let dn = self.rhs.norm();
        Ok((res, if dn > 0.0 { res / dn } else { res }))
    }

    /// Dense row-major 𝒜, for desk-scale oracles.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dim();
        let n_u = self.n_u();
        let mut d = vec![0.0; n * n];
        let off_p = 3 * n_u;
        for comp in 0..3 {
            let off = comp * n_u;
            for i in 0..n_u {
                let (c, v) = self.a.row(i);
                for (&j, &x) in c.iter().zip(v) {
                    d[(off + i) * n + off + j] = x;
                }
            }
            for k in 0..self.n_p() {
                let (c, v) = self.b[comp].row(k);
                for (&j, &x) in c.iter().zip(v) {
                    d[(off_p + k) * n + off + j] = x;
                    d[(off + j) * n + off_p + k] = x;
                }
            }
        }
        for k in 0..self.n_p() {
            let (c, v) = self.c.row(k);
            for (&j, &x) in c.iter().zip(v) {
                d[(off_p + k) * n + off_p + j] = x;
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::build_box_mesh;

    #[test]
    fn monomial_formula_matches_known_values() {
        // ∫λ_i = |T|/4, ∫λ_i λ_j = |T|/20, ∫λ_i² = |T|/10
        assert!((monomial_integral([1, 0, 0, 0], 1.0) - 0.25).abs() < 1e-15);
        assert!((monomial_integral([1, 1, 0, 0], 1.0) - 0.05).abs() < 1e-15);
        assert!((monomial_integral([2, 0, 0, 0], 1.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn bubble_first_moment_is_32_over_105() {
        let vol = 0.37;
        let got = 256.0 * monomial_integral([1, 1, 1, 1], vol);
        assert!((got - 32.0 / 105.0 * vol).abs() < 1e-15);
    }

    #[test]
    fn bubble_moments_on_reference_tet() {
        // reference tet (0,e1,e2,e3); values from symbolic integration:
        // ∫φ_b² = 4096/155925, ∫|∇φ_b|² = 4096/945
        let p = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let (vol, g) = barycentric_gradients(p, 0).unwrap();
        assert!((vol - 1.0 / 6.0).abs() < 1e-15);
        let (m_b, k_b) = bubble_moments(vol, &g);
        let expect_m = 4096.0 / 155925.0;
        assert!((m_b - expect_m).abs() < 1e-14);
        assert!((k_b - 4096.0 / 945.0).abs() < 1e-12, "k_b = {k_b}");
    }

    #[test]
    fn degenerate_tet_is_rejected() {
        let p = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(matches!(
            barycentric_gradients(p, 7),
            Err(Error::DegenerateElement { tet: 7, .. })
        ));
    }

    #[test]
    fn params_are_validated() {
        assert!(StokesParams::new(-1.0, 1.0).validate().is_err());
        assert!(StokesParams::new(1.0, 0.0).validate().is_err());
        let m = build_box_mesh(1, 1, 1, [1.0; 3]).unwrap();
        let p = StokesParams::new(1.0, 0.0).with_inflow(Inflow::NoSlip);
        assert!(assemble(&m, &p).is_err());
    }

    #[test]
    fn zero_alpha_gives_pure_stiffness() {
        let m = build_box_mesh(2, 2, 2, [1.0; 3]).unwrap();
        let p = StokesParams::new(0.0, 1.0).with_inflow(Inflow::NoSlip);
        let full = assemble_full(&m, &p).unwrap();
        let ones = vec![1.0; m.num_vertices()];
        let r = full.a.spmv(&ones).unwrap();
        let scale = full.a.max_abs();
        assert!(r.iter().all(|v| v.abs() <= 1e-12 * scale));
    }

    #[test]
    fn apply_matches_dense() {
        let m = build_box_mesh(3, 2, 2, [2.2, 0.41, 0.41]).unwrap();
        let sys = assemble(&m, &StokesParams::new(10.0, 0.1)).unwrap();
        let n = sys.dim();
        let x: Vec<f64> = (0..n).map(|i| ((i * 7919) % 23) as f64 / 23.0 - 0.4).collect();
        let mut y = vec![0.0; n];
        sys.apply_flat(&x, &mut y).unwrap();
        let d = sys.to_dense();
        for i in 0..n {
            let dense: f64 = (0..n).map(|j| d[i * n + j] * x[j]).sum();
            assert!((dense - y[i]).abs() < 1e-14 * (1.0 + dense.abs()));
        }
    }
}
