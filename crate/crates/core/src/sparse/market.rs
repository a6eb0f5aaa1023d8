//! MatrixMarket coordinate format, used for debug dumps of assembled matrices.
//!
//! Only `matrix coordinate real general` is written. The reader also accepts
//! `symmetric` storage and `integer` fields.

use std::fmt::Write as _;
use std::path::Path;

use super::{CsrMatrix, Triplet};
use crate::error::{Error, Result};

/// Largest accepted row or column count; the row offsets are allocated up front.
pub const MAX_DIM: usize = 1 << 24;

/// Renders `m` as MatrixMarket text with 1-based indices.
pub fn to_string(m: &CsrMatrix) -> String {
    let mut s = String::with_capacity(32 * (m.nnz() + 2));
    s.push_str("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(s, "{} {} {}", m.n_rows(), m.n_cols(), m.nnz());
    for t in m.to_triplets() {
        let _ = writeln!(s, "{} {} {:.17e}", t.row + 1, t.col + 1, t.value);
    }
    s
}

pub fn write(m: &CsrMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_string(m)).map_err(|e| Error::io(path, e))
}

pub fn read(path: impl AsRef<Path>) -> Result<CsrMatrix> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text)
}

/// Parses MatrixMarket coordinate text.
pub fn parse(text: &str) -> Result<CsrMatrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

    let (line_no, banner) = lines.next().ok_or_else(|| Error::parse(1, "empty input"))?;
    let fields: Vec<String> = banner.split_whitespace().map(str::to_ascii_lowercase).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(Error::parse(line_no, "missing %%MatrixMarket matrix banner"));
    }
    if fields[2] != "coordinate" {
        return Err(Error::parse(line_no, "only coordinate storage is supported"));
    }
    if fields[3] != "real" && fields[3] != "integer" {
        return Err(Error::parse(line_no, format!("unsupported field type {}", fields[3])));
    }
    let symmetric = match fields[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(Error::parse(line_no, format!("unsupported symmetry {other}"))),
    };

    let mut body = lines.filter(|(_, l)| !l.is_empty() && !l.starts_with('%'));
    let (line_no, size) = body
        .next()
        .ok_or_else(|| Error::parse(line_no, "missing size line"))?;
    let dims = parse_usizes(size, 3, line_no)?;
    let (n_rows, n_cols, nnz) = (dims[0], dims[1], dims[2]);
    if n_rows > MAX_DIM || n_cols > MAX_DIM {
        return Err(Error::parse(line_no, format!("dimensions above {MAX_DIM} are not supported")));
    }
    if symmetric && n_rows != n_cols {
        return Err(Error::parse(line_no, "symmetric matrix must be square"));
    }

    // cap the preallocation so a lying header cannot exhaust memory
    let mut triplets = Vec::with_capacity(nnz.min(1 << 20));
    for _ in 0..nnz {
        let (line_no, entry) = body
            .next()
            .ok_or_else(|| Error::parse(line_no, format!("expected {nnz} entries")))?;
        let mut parts = entry.split_whitespace();
        let mut index = |what: &str| -> Result<usize> {
            let tok = parts
                .next()
                .ok_or_else(|| Error::parse(line_no, format!("missing {what} index")))?;
            let v: usize = tok
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad {what} index {tok:?}")))?;
            if v == 0 {
                return Err(Error::parse(line_no, "indices are 1-based"));
            }
            Ok(v - 1)
        };
        let r = index("row")?;
        let c = index("column")?;
        let tok = parts
            .next()
            .ok_or_else(|| Error::parse(line_no, "missing value"))?;
        let v: f64 = tok
            .parse()
            .map_err(|_| Error::parse(line_no, format!("bad value {tok:?}")))?;
        if !v.is_finite() {
            return Err(Error::parse(line_no, format!("non-finite value {tok:?}")));
        }
        if parts.next().is_some() {
            return Err(Error::parse(line_no, "trailing tokens"));
        }
        if r >= n_rows || c >= n_cols {
            return Err(Error::parse(line_no, "index outside declared size"));
        }
        triplets.push(Triplet::new(r, c, v));
        if symmetric && r != c {
            triplets.push(Triplet::new(c, r, v));
        }
    }
    if let Some((line_no, _)) = body.next() {
        return Err(Error::parse(line_no, "more entries than declared"));
    }
    let m = CsrMatrix::from_triplets(n_rows, n_cols, &triplets)?;
    if m.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::parse(line_no, "duplicate entries overflow"));
    }
    Ok(m)
}

fn parse_usizes(line: &str, count: usize, line_no: usize) -> Result<Vec<usize>> {
    let out: Vec<usize> = line
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::parse(line_no, "expected non-negative integers"))?;
    if out.len() != count {
        return Err(Error::parse(line_no, format!("expected {count} integers")));
    }
    Ok(out)
}
