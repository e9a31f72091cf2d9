//! Matrix Market coordinate I/O (real, general or symmetric).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{CsrMatrix, TripletBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

pub fn mm_read(path: impl AsRef<Path>) -> Result<CsrMatrix> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    mm_parse(reader, path)
}

/// Parse Matrix Market text from any reader. `origin` is only used in
/// error messages.
pub fn mm_parse(reader: impl BufRead, origin: &Path) -> Result<CsrMatrix> {
    let err = |line: usize, msg: String| Error::MatrixMarket {
        path: origin.to_path_buf(),
        line,
        msg,
    };
    let mut lines = reader.lines().enumerate();

    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let header = header?;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(err(1, format!("malformed header {header:?}")));
    }
    if tokens[2] != "coordinate" {
        return Err(err(1, format!("unsupported format {:?}", tokens[2])));
    }
    match tokens[3].as_str() {
        "real" | "double" | "integer" => {}
        other => return Err(err(1, format!("unsupported field {other:?}"))),
    }
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(err(1, format!("unsupported symmetry {other:?}"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut builder: Option<TripletBuilder> = None;
    let mut seen = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        match size {
            None => {
                if parts.len() != 3 {
                    return Err(err(lineno, format!("bad size line {t:?}")));
                }
                let parse = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|e| err(lineno, format!("bad size {s:?}: {e}")))
                };
                let (m, n, nnz) = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
                if symmetry == Symmetry::Symmetric && m != n {
                    return Err(err(lineno, "symmetric matrix must be square".into()));
                }
                size = Some((m, n, nnz));
                builder = Some(TripletBuilder::with_capacity(m, n, 2 * nnz));
            }
            Some((m, n, nnz)) => {
                if parts.len() != 3 {
                    return Err(err(lineno, format!("expected 'row col value', got {t:?}")));
                }
                if seen == nnz {
                    return Err(err(lineno, "more entries than declared".into()));
                }
                let i: usize = parts[0]
                    .parse()
                    .map_err(|e| err(lineno, format!("bad row index: {e}")))?;
                let j: usize = parts[1]
                    .parse()
                    .map_err(|e| err(lineno, format!("bad column index: {e}")))?;
                let v: f64 = parts[2]
                    .parse()
                    .map_err(|e| err(lineno, format!("bad value: {e}")))?;
                if i == 0 || j == 0 || i > m || j > n {
                    return Err(err(lineno, format!("index ({i}, {j}) out of bounds for {m}x{n}")));
                }
                let b = builder.as_mut().expect("size line parsed");
                b.push(i - 1, j - 1, v);
                if symmetry == Symmetry::Symmetric && i != j {
                    b.push(j - 1, i - 1, v);
                }
                seen += 1;
            }
        }
    }
    let (_, _, nnz) = size.ok_or_else(|| err(0, "missing size line".into()))?;
    if seen != nnz {
        return Err(err(0, format!("declared {nnz} entries, found {seen}")));
    }
    builder.expect("size line parsed").build()
}

/// Write `a` as a general coordinate file with 17 significant digits, which
/// round-trips every finite f64 exactly.
pub fn mm_write(path: impl AsRef<Path>, a: &CsrMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    mm_write_to(&mut w, a)?;
    w.flush()?;
    Ok(())
}

pub fn mm_write_to(w: &mut impl Write, a: &CsrMatrix) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            writeln!(w, "{} {} {:.16e}", i + 1, j + 1, v)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<CsrMatrix> {
        mm_parse(s.as_bytes(), Path::new("<mem>"))
    }

    #[test]
    fn reads_identity() {
        let a = parse("%%MatrixMarket matrix coordinate real general\n% c\n2 2 2\n1 1 1.0\n2 2 1.0\n")
            .unwrap();
        assert_eq!(a, CsrMatrix::identity(2));
    }

    #[test]
    fn symmetric_is_mirrored() {
        let a = parse("%%MatrixMarket matrix coordinate real symmetric\n3 3 4\n1 1 4\n2 1 -1\n2 2 4\n3 2 -1\n")
            .unwrap();
        let expect = [4.0, -1.0, 0.0, -1.0, 4.0, -1.0, 0.0, -1.0, 0.0];
        assert_eq!(a.to_dense(), expect);
    }

    #[test]
    fn rejects_complex_and_bad_indices() {
        assert!(parse("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n").is_err());
        assert!(parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n").is_err());
        assert!(parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n0 1 1.0\n").is_err());
        assert!(parse("%MatrixMarket matrix\n2 2 0\n").is_err());
        assert!(parse("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n").is_err());
    }
}
