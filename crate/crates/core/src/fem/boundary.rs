use crate::error::{Error, Result};

use super::assembly::StokesParams;
use super::mesh::TetMesh;

/// Channel cross-section width and height, meters.
pub const CHANNEL_H: f64 = 0.41;
/// Channel length, meters.
pub const CHANNEL_L: f64 = 2.2;

/// Velocity Dirichlet data on the box boundary.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Inflow {
    /// `u = 0` on every boundary face.
    #[default]
    NoSlip,
    /// Parabolic `u1` on the `x = 0` and `x = L` faces of the
    /// `(0,2.2)x(0,0.41)x(0,0.41)` channel, no-slip elsewhere.
    Channel { peak: f64 },
}

/// Dirichlet value per vertex: `Some(u)` on the boundary, `None` inside.
pub type DirichletData = Vec<Option<[f64; 3]>>;

/// `u1(y, z) = peak·H²·4y(H−y)·4z(H−z)/H²`.
pub fn channel_profile(peak: f64, y: f64, z: f64) -> f64 {
    let h2 = CHANNEL_H * CHANNEL_H;
    peak * h2 * 4.0 * y * (CHANNEL_H - y) * 4.0 * z * (CHANNEL_H - z) / h2
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(1.0)
}

pub fn inflow_bc(mesh: &TetMesh, params: &StokesParams) -> Result<DirichletData> {
    let peak = match params.inflow {
        Inflow::NoSlip => None,
        Inflow::Channel { peak } => {
            let [lx, ly, lz] = mesh.extents;
            if !(close(lx, CHANNEL_L) && close(ly, CHANNEL_H) && close(lz, CHANNEL_H)) {
                return Err(Error::ChannelMismatch(format!(
                    "extents {:?}, expected [{CHANNEL_L}, {CHANNEL_H}, {CHANNEL_H}]",
                    mesh.extents
                )));
            }
            Some(peak)
        }
    };
    let [nx, ny, nz] = mesh.dims;
    let mut out = vec![None; mesh.num_vertices()];
    for (v, slot) in out.iter_mut().enumerate() {
        if !mesh.boundary[v] {
            continue;
        }
        let i = v % (nx + 1);
        let j = (v / (nx + 1)) % (ny + 1);
        let k = v / ((nx + 1) * (ny + 1));
        let end_face = i == 0 || i == nx;
        let wall = j == 0 || j == ny || k == 0 || k == nz;
        let [_, y, z] = mesh.vertices[v];
        let u1 = match peak {
            Some(pk) if end_face && !wall => channel_profile(pk, y, z),
            _ => 0.0,
        };
        *slot = Some([u1, 0.0, 0.0]);
    }
    Ok(out)
}
