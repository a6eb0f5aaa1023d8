//! Legacy ASCII VTK unstructured-grid files.
//!
//! [`write_fields`] exports nodal fields over the whole mesh (boundary
//! vertices carry zero). [`parse`] reads back the subset of the format this
//! crate writes: `POINTS`, `CELLS`, `CELL_TYPES`, and scalar `POINT_DATA`.

use std::fmt::Write as _;
use std::path::Path;

use super::FeFunction;
use crate::error::{Error, Result};

const VTK_TRIANGLE: u8 = 5;

/// Contents of a legacy VTK unstructured grid.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VtkGrid {
    pub title: String,
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<u8>,
    pub point_data: Vec<(String, Vec<f64>)>,
}

impl VtkGrid {
    pub fn field(&self, name: &str) -> Option<&[f64]> {
        self.point_data
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }
}

/// Renders the named fields (all on one space) as VTK text.
pub fn render_fields(title: &str, fields: &[(&str, &FeFunction)]) -> Result<String> {
    let Some((_, first)) = fields.first() else {
        return Err(Error::InvalidParameter("no fields to export".into()));
    };
    for (name, f) in fields {
        if !f.same_space(first) {
            return Err(Error::SpaceMismatch);
        }
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::InvalidParameter(format!("invalid field name {name:?}")));
        }
    }
    let space = first.space();
    let mesh = space.mesh();
    let np = mesh.n_vertices();
    let nt = mesh.triangles().len();

    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(s, "{}", title.lines().next().unwrap_or(""));
    s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {np} double");
    for [x, y] in mesh.vertices() {
        let _ = writeln!(s, "{x} {y} 0");
    }
    let _ = writeln!(s, "CELLS {nt} {}", 4 * nt);
    for [a, b, c] in mesh.triangles() {
        let _ = writeln!(s, "3 {a} {b} {c}");
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        let _ = writeln!(s, "{VTK_TRIANGLE}");
    }
    let _ = writeln!(s, "POINT_DATA {np}");
    for (name, f) in fields {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in space.extend_by_zero(f.coeffs()) {
            // `Display` for f64 is the shortest exact round-trip form
            let _ = writeln!(s, "{v}");
        }
    }
    Ok(s)
}

pub fn write_fields(path: impl AsRef<Path>, title: &str, fields: &[(&str, &FeFunction)]) -> Result<()> {
    let path = path.as_ref();
    let text = render_fields(title, fields)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read(path: impl AsRef<Path>) -> Result<VtkGrid> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text)
}

struct Tokens<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    pending: std::vec::IntoIter<&'a str>,
    line: usize,
}

impl<'a> Tokens<'a> {
    fn new(rest: std::iter::Enumerate<std::str::Lines<'a>>) -> Self {
        Self {
            lines: rest.peekable(),
            pending: Vec::new().into_iter(),
            line: 0,
        }
    }

    fn next(&mut self) -> Option<&'a str> {
        loop {
            if let Some(t) = self.pending.next() {
                return Some(t);
            }
            let (i, l) = self.lines.next()?;
            self.line = i + 1;
            self.pending = l.split_whitespace().collect::<Vec<_>>().into_iter();
        }
    }

    fn expect(&mut self, what: &str) -> Result<&'a str> {
        self.next()
            .ok_or_else(|| Error::parse(self.line, format!("unexpected end of input, expected {what}")))
    }

    fn keyword(&mut self, kw: &str) -> Result<()> {
        let t = self.expect(kw)?;
        if t.eq_ignore_ascii_case(kw) {
            Ok(())
        } else {
            Err(Error::parse(self.line, format!("expected {kw}, found {t:?}")))
        }
    }

    fn usize(&mut self, what: &str) -> Result<usize> {
        let t = self.expect(what)?;
        t.parse()
            .map_err(|_| Error::parse(self.line, format!("bad {what} {t:?}")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        let t = self.expect(what)?;
        t.parse()
            .map_err(|_| Error::parse(self.line, format!("bad {what} {t:?}")))
    }
}

/// Preallocation cap so a malicious count cannot trigger a huge allocation.
fn capped(n: usize) -> usize {
    n.min(1 << 16)
}

/// Parses legacy ASCII VTK unstructured-grid text.
pub fn parse(text: &str) -> Result<VtkGrid> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty input"))?;
    if !header.starts_with("# vtk DataFile Version") {
        return Err(Error::parse(1, "missing vtk header"));
    }
    let (_, title) = lines.next().ok_or_else(|| Error::parse(2, "missing title"))?;
    let mut tok = Tokens::new(lines);
    tok.keyword("ASCII")?;
    tok.keyword("DATASET")?;
    tok.keyword("UNSTRUCTURED_GRID")?;

    let mut grid = VtkGrid {
        title: title.to_string(),
        ..Default::default()
    };
    let mut n_point_data: Option<usize> = None;

    while let Some(section) = tok.next() {
        match section.to_ascii_uppercase().as_str() {
            "POINTS" => {
                let n = tok.usize("point count")?;
                let ty = tok.expect("point type")?;
                if !matches!(ty, "float" | "double") {
                    return Err(Error::parse(tok.line, format!("unsupported point type {ty}")));
                }
                let mut pts = Vec::with_capacity(capped(n));
                for _ in 0..n {
                    pts.push([tok.f64("x")?, tok.f64("y")?, tok.f64("z")?]);
                }
                grid.points = pts;
            }
            "CELLS" => {
                let n = tok.usize("cell count")?;
                let size = tok.usize("cell list size")?;
                let mut cells = Vec::with_capacity(capped(n));
                let mut consumed = 0usize;
                for _ in 0..n {
                    let k = tok.usize("cell arity")?;
                    consumed = consumed.saturating_add(k.saturating_add(1));
                    if consumed > size {
                        return Err(Error::parse(tok.line, "cell list exceeds declared size"));
                    }
                    let mut c = Vec::with_capacity(capped(k));
                    for _ in 0..k {
                        let v = tok.usize("vertex index")?;
                        if v >= grid.points.len() {
                            return Err(Error::parse(tok.line, format!("vertex {v} out of range")));
                        }
                        c.push(v);
                    }
                    cells.push(c);
                }
                if consumed != size {
                    return Err(Error::parse(tok.line, "cell list size mismatch"));
                }
                grid.cells = cells;
            }
            "CELL_TYPES" => {
                let n = tok.usize("cell type count")?;
                if n != grid.cells.len() {
                    return Err(Error::parse(tok.line, "cell type count differs from cell count"));
                }
                let mut types = Vec::with_capacity(capped(n));
                for _ in 0..n {
                    let t = tok.usize("cell type")?;
                    let t = u8::try_from(t)
                        .map_err(|_| Error::parse(tok.line, format!("bad cell type {t}")))?;
                    types.push(t);
                }
                grid.cell_types = types;
            }
            "POINT_DATA" => {
                let n = tok.usize("point data count")?;
                if n != grid.points.len() {
                    return Err(Error::parse(tok.line, "point data count differs from point count"));
                }
                n_point_data = Some(n);
            }
            "SCALARS" => {
                let n = n_point_data
                    .ok_or_else(|| Error::parse(tok.line, "SCALARS before POINT_DATA"))?;
                let name = tok.expect("field name")?.to_string();
                let ty = tok.expect("field type")?;
                if !matches!(ty, "float" | "double") {
                    return Err(Error::parse(tok.line, format!("unsupported field type {ty}")));
                }
                let ncomp = tok.usize("component count")?;
                if ncomp != 1 {
                    return Err(Error::parse(tok.line, "only single-component scalars are supported"));
                }
                tok.keyword("LOOKUP_TABLE")?;
                tok.expect("lookup table name")?;
                let mut vals = Vec::with_capacity(capped(n));
                for _ in 0..n {
                    vals.push(tok.f64("scalar value")?);
                }
                grid.point_data.push((name, vals));
            }
            other => {
                return Err(Error::parse(tok.line, format!("unsupported section {other}")));
            }
        }
    }
    Ok(grid)
}
