use crate::error::{Error, Result};

/// Structured tetrahedral mesh of an axis-aligned box `[0,Lx]x[0,Ly]x[0,Lz]`.
///
/// Every hexahedral cell is split into the six Kuhn tetrahedra that share the
/// main diagonal, which makes neighbouring cells conforming.
#[derive(Debug, Clone)]
pub struct TetMesh {
    pub vertices: Vec<[f64; 3]>,
    pub tets: Vec<[usize; 4]>,
    pub boundary: Vec<bool>,
    pub extents: [f64; 3],
    pub dims: [usize; 3],
}

const AXIS_ORDERS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

pub fn build_box_mesh(nx: usize, ny: usize, nz: usize, extents: [f64; 3]) -> Result<TetMesh> {
    if nx == 0 || ny == 0 || nz == 0 {
        return Err(Error::InvalidArgument(format!(
            "mesh subdivisions must be >= 1, got ({nx}, {ny}, {nz})"
        )));
    }
    if extents.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidArgument(format!("box extents must be positive, got {extents:?}")));
    }
    let dims = [nx, ny, nz];
    let vid = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);

    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    let mut boundary = Vec::with_capacity(vertices.capacity());
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([
                    extents[0] * i as f64 / nx as f64,
                    extents[1] * j as f64 / ny as f64,
                    extents[2] * k as f64 / nz as f64,
                ]);
                boundary.push(i == 0 || i == nx || j == 0 || j == ny || k == 0 || k == nz);
            }
        }
    }

    let mut tets = Vec::with_capacity(6 * nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                for order in AXIS_ORDERS {
                    let mut corner = [i, j, k];
                    let mut tet = [vid(i, j, k), 0, 0, 0];
                    for (slot, &axis) in order.iter().enumerate() {
                        corner[axis] += 1;
                        tet[slot + 1] = vid(corner[0], corner[1], corner[2]);
                    }
                    if signed_volume(&vertices, &tet) < 0.0 {
                        tet.swap(2, 3);
                    }
                    tets.push(tet);
                }
            }
        }
    }
    Ok(TetMesh {
        vertices,
        tets,
        boundary,
        extents,
        dims,
    })
}

pub(crate) fn signed_volume(vertices: &[[f64; 3]], tet: &[usize; 4]) -> f64 {
    let p0 = vertices[tet[0]];
    let d = |v: usize| {
        let p = vertices[tet[v]];
        [p[0] - p0[0], p[1] - p0[1], p[2] - p0[2]]
    };
    let (a, b, c) = (d(1), d(2), d(3));
    let det = a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
        + a[2] * (b[0] * c[1] - b[1] * c[0]);
    det / 6.0
}

impl TetMesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn tet_volume(&self, t: usize) -> f64 {
        signed_volume(&self.vertices, &self.tets[t])
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.num_tets()).map(|t| self.tet_volume(t)).sum()
    }

    pub fn box_volume(&self) -> f64 {
        self.extents.iter().product()
    }

    pub fn num_interior(&self) -> usize {
        self.boundary.iter().filter(|b| !**b).count()
    }
}
