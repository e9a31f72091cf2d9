//! On-disk layout of an exported system:
//!
//! ```text
//! A.mtx B1.mtx B2.mtx B3.mtx C.mtx Q.mtx   Matrix Market blocks
//! system.txt                               n_u, n_p, alpha, nu
//! rhs.txt                                  (f1;f2;f3;g), one value per line
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparse::{mm_read, mm_write, BlockVector};

use super::assembly::SaddleSystem;

const BLOCKS: [&str; 6] = ["A", "B1", "B2", "B3", "C", "Q"];

pub fn export_system(dir: impl AsRef<Path>, sys: &SaddleSystem) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mats = [&sys.a, &sys.b[0], &sys.b[1], &sys.b[2], &sys.c, &sys.q];
    for (name, m) in BLOCKS.iter().zip(mats) {
        mm_write(dir.join(format!("{name}.mtx")), m)?;
    }
    let mut side = fs::File::create(dir.join("system.txt"))?;
    writeln!(side, "n_u {}", sys.n_u())?;
    writeln!(side, "n_p {}", sys.n_p())?;
    writeln!(side, "alpha {:.16e}", sys.alpha)?;
    writeln!(side, "nu {:.16e}", sys.nu)?;
    let mut rhs = std::io::BufWriter::new(fs::File::create(dir.join("rhs.txt"))?);
    for v in sys.rhs.as_slice() {
        writeln!(rhs, "{v:.16e}")?;
    }
    rhs.flush()?;
    Ok(())
}

/// Read a directory written by [`export_system`]. The vertex map is not
/// stored, so `velocity_vertices` comes back empty.
pub fn import_system(dir: impl AsRef<Path>) -> Result<SaddleSystem> {
    let dir = dir.as_ref();
    let bad = |msg: String| Error::InvalidArgument(format!("{}: {msg}", dir.display()));

    let side = fs::read_to_string(dir.join("system.txt"))?;
    let mut n_u = None;
    let mut n_p = None;
    let mut alpha = None;
    let mut nu = None;
    for line in side.lines().filter(|l| !l.trim().is_empty()) {
        let mut it = line.split_whitespace();
        let (Some(key), Some(val), None) = (it.next(), it.next(), it.next()) else {
            return Err(bad(format!("malformed sidecar line {line:?}")));
        };
        let num = || val.parse::<f64>().map_err(|e| bad(format!("{key}: {e}")));
        let idx = || val.parse::<usize>().map_err(|e| bad(format!("{key}: {e}")));
        match key {
            "n_u" => n_u = Some(idx()?),
            "n_p" => n_p = Some(idx()?),
            "alpha" => alpha = Some(num()?),
            "nu" => nu = Some(num()?),
            other => return Err(bad(format!("unknown sidecar key {other:?}"))),
        }
    }
    let (Some(n_u), Some(n_p), Some(alpha), Some(nu)) = (n_u, n_p, alpha, nu) else {
        return Err(bad("sidecar missing n_u, n_p, alpha or nu".into()));
    };

    let mut mats = Vec::with_capacity(6);
    for name in BLOCKS {
        mats.push(mm_read(dir.join(format!("{name}.mtx")))?);
    }
    let [a, b1, b2, b3, c, q]: [_; 6] = mats.try_into().expect("six blocks");
    let shapes = [
        ("A", &a, n_u, n_u),
        ("B1", &b1, n_p, n_u),
        ("B2", &b2, n_p, n_u),
        ("B3", &b3, n_p, n_u),
        ("C", &c, n_p, n_p),
        ("Q", &q, n_p, n_p),
    ];
    for (name, m, r, cols) in shapes {
        if m.nrows() != r || m.ncols() != cols {
            return Err(bad(format!(
                "{name} is {}x{}, sidecar implies {r}x{cols}",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    let rhs_text = fs::read_to_string(dir.join("rhs.txt"))?;
    let rhs: Vec<f64> = rhs_text
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| bad(format!("rhs: {e}"))))
        .collect::<Result<_>>()?;
    let rhs = BlockVector::from_flat(n_u, n_p, rhs)?;
    Ok(SaddleSystem {
        a,
        b: [b1, b2, b3],
        c,
        q,
        rhs,
        velocity_vertices: Vec::new(),
        alpha,
        nu,
    })
}
