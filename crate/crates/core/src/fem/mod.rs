//! Box-channel meshes and P1-bubble/P1 assembly of the generalized Stokes
//! saddle-point system.

mod assembly;
mod boundary;
mod export;
mod mesh;

pub use assembly::{
    assemble, assemble_full, bubble_moments, monomial_integral, Condensation, FullBlocks,
    SaddleSystem, StokesParams,
};
pub use boundary::{channel_profile, inflow_bc, DirichletData, Inflow, CHANNEL_H, CHANNEL_L};
pub use export::{export_system, import_system};
pub use mesh::{build_box_mesh, TetMesh};

/// Channel extents `(2.2, 0.41, 0.41)`.
pub const CHANNEL_EXTENTS: [f64; 3] = [CHANNEL_L, CHANNEL_H, CHANNEL_H];

/// Assemble the channel problem on an `nx x ny x nz` mesh.
pub fn channel_system(dims: [usize; 3], params: &StokesParams) -> crate::Result<SaddleSystem> {
    let mesh = build_box_mesh(dims[0], dims[1], dims[2], CHANNEL_EXTENTS)?;
    assemble(&mesh, params)
}
