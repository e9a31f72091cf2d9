use crate::error::{check_dim, Result};

use super::MultiVector;

/// `(u1; u2; u3; p)` stored contiguously. The velocity part is laid out
/// exactly like a column-major `n_u x 3` [`MultiVector`], so the two views
/// convert without reshuffling.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    n_u: usize,
    n_p: usize,
    data: Vec<f64>,
}

impl BlockVector {
    pub fn zeros(n_u: usize, n_p: usize) -> Self {
        Self {
            n_u,
            n_p,
            data: vec![0.0; 3 * n_u + n_p],
        }
    }

    pub fn from_flat(n_u: usize, n_p: usize, data: Vec<f64>) -> Result<Self> {
        check_dim("BlockVector", 3 * n_u + n_p, data.len())?;
        Ok(Self { n_u, n_p, data })
    }

    pub fn from_parts(u: [&[f64]; 3], p: &[f64]) -> Result<Self> {
        let n_u = u[0].len();
        let mut data = Vec::with_capacity(3 * n_u + p.len());
        for c in u {
            check_dim("BlockVector velocity component", n_u, c.len())?;
            data.extend_from_slice(c);
        }
        data.extend_from_slice(p);
        Ok(Self {
            n_u,
            n_p: p.len(),
            data,
        })
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn n_p(&self) -> usize {
        self.n_p
    }

    /// Total length `N = 3 n_u + n_p`.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn u(&self, comp: usize) -> &[f64] {
        &self.data[comp * self.n_u..(comp + 1) * self.n_u]
    }

    pub fn u_mut(&mut self, comp: usize) -> &mut [f64] {
        &mut self.data[comp * self.n_u..(comp + 1) * self.n_u]
    }

    pub fn velocity(&self) -> &[f64] {
        &self.data[..3 * self.n_u]
    }

    pub fn velocity_mut(&mut self) -> &mut [f64] {
        let n = 3 * self.n_u;
        &mut self.data[..n]
    }

    pub fn p(&self) -> &[f64] {
        &self.data[3 * self.n_u..]
    }

    pub fn p_mut(&mut self) -> &mut [f64] {
        let n = 3 * self.n_u;
        &mut self.data[n..]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Velocity components as an `n_u x 3` block.
    pub fn velocity_block(&self) -> MultiVector {
        MultiVector::from_col_major(self.n_u, 3, self.velocity().to_vec())
            .expect("shape fixed by construction")
    }

    pub fn set_velocity_block(&mut self, x: &MultiVector) -> Result<()> {
        check_dim("velocity block rows", self.n_u, x.nrows())?;
        check_dim("velocity block cols", 3, x.ncols())?;
        self.velocity_mut().copy_from_slice(x.as_slice());
        Ok(())
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn views_partition_the_data() {
        let v = BlockVector::from_parts([&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]], &[7.0]).unwrap();
        assert_eq!(v.len(), 7);
        assert_eq!(v.u(1), &[3.0, 4.0]);
        assert_eq!(v.p(), &[7.0]);
        let blk = v.velocity_block();
        assert_eq!(blk.col(2), &[5.0, 6.0]);
        assert!(BlockVector::from_flat(2, 1, vec![0.0; 6]).is_err());
    }
}
