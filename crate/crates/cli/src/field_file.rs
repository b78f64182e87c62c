//! Plain-text field files. A header of `#` lines declares the kind
//! (node, cell or vector), the dimension and the grid resolution; the
//! body is one comma-separated row per entry, index first, in row-major
//! order. Vector rows carry `dim` value columns. Values are printed
//! with 17 significant digits so finite fields round-trip bitwise.
//! Unrecognized `#` lines are comments.

use std::fmt::Write as _;
use std::path::Path;

use qvi_core::{CellField, Grid, NodeField, VectorField};

#[derive(Debug)]
pub enum FieldFileError {
    Io(std::io::Error),
    Malformed(String),
}

impl std::fmt::Display for FieldFileError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FieldFileError::Io(e) => write!(f, "field file i/o: {e}"),
            FieldFileError::Malformed(m) => write!(f, "malformed field file: {m}"),
        }
    }
}

impl std::error::Error for FieldFileError {}

impl From<std::io::Error> for FieldFileError {
    fn from(e: std::io::Error) -> Self {
        FieldFileError::Io(e)
    }
}

type Result<T> = std::result::Result<T, FieldFileError>;

/// Any of the three field layouts, as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadedField {
    Node(NodeField),
    Cell(CellField),
    Vector(VectorField),
}

impl LoadedField {
    pub fn kind(&self) -> &'static str {
        match self {
            LoadedField::Node(_) => "node",
            LoadedField::Cell(_) => "cell",
            LoadedField::Vector(_) => "vector",
        }
    }

    pub fn into_node(self) -> Result<NodeField> {
        match self {
            LoadedField::Node(f) => Ok(f),
            other => Err(FieldFileError::Malformed(format!(
                "expected a node field, found kind {}",
                other.kind()
            ))),
        }
    }

    pub fn into_cell(self) -> Result<CellField> {
        match self {
            LoadedField::Cell(f) => Ok(f),
            other => Err(FieldFileError::Malformed(format!(
                "expected a cell field, found kind {}",
                other.kind()
            ))),
        }
    }

    pub fn into_vector(self) -> Result<VectorField> {
        match self {
            LoadedField::Vector(f) => Ok(f),
            other => Err(FieldFileError::Malformed(format!(
                "expected a vector field, found kind {}",
                other.kind()
            ))),
        }
    }
}

fn header(kind: &str, grid: Grid, extra: &[(String, String)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# kind {kind}");
    let _ = writeln!(s, "# dim {}", grid.dim());
    let _ = writeln!(s, "# n {}", grid.n());
    for (k, v) in extra {
        let _ = writeln!(s, "# {k} {v}");
    }
    s
}

/// Renders a node field; `extra` becomes additional header comments.
pub fn render_node(f: &NodeField, extra: &[(String, String)]) -> String {
    let mut s = header("node", f.grid(), extra);
    for (i, v) in f.values().iter().enumerate() {
        let _ = writeln!(s, "{i},{v:.16e}");
    }
    s
}

pub fn render_cell(f: &CellField, extra: &[(String, String)]) -> String {
    let mut s = header("cell", f.grid(), extra);
    for (i, v) in f.values().iter().enumerate() {
        let _ = writeln!(s, "{i},{v:.16e}");
    }
    s
}

pub fn render_vector(f: &VectorField, extra: &[(String, String)]) -> String {
    let mut s = header("vector", f.grid(), extra);
    for (i, v) in f.values().iter().enumerate() {
        if f.grid().dim() == 1 {
            let _ = writeln!(s, "{i},{:.16e}", v[0]);
        } else {
            let _ = writeln!(s, "{i},{:.16e},{:.16e}", v[0], v[1]);
        }
    }
    s
}

pub fn write_node(path: &Path, f: &NodeField, extra: &[(String, String)]) -> Result<()> {
    std::fs::write(path, render_node(f, extra))?;
    Ok(())
}

pub fn write_cell(path: &Path, f: &CellField, extra: &[(String, String)]) -> Result<()> {
    std::fs::write(path, render_cell(f, extra))?;
    Ok(())
}

pub fn write_vector(path: &Path, f: &VectorField, extra: &[(String, String)]) -> Result<()> {
    std::fs::write(path, render_vector(f, extra))?;
    Ok(())
}

fn parse_f64(tok: &str, line_no: usize) -> Result<f64> {
    tok.trim().parse::<f64>().map_err(|_| {
        FieldFileError::Malformed(format!("line {line_no}: cannot parse number {tok:?}"))
    })
}

/// Parses field text; see the module docs for the layout.
pub fn parse(text: &str) -> Result<LoadedField> {
    let mut kind: Option<String> = None;
    let mut dim: Option<usize> = None;
    let mut n: Option<usize> = None;
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let mut toks = rest.split_whitespace();
            match (toks.next(), toks.next()) {
                (Some("kind"), Some(v)) => kind = Some(v.to_string()),
                (Some("dim"), Some(v)) => {
                    dim = Some(v.parse().map_err(|_| {
                        FieldFileError::Malformed(format!("line {line_no}: bad dim {v:?}"))
                    })?)
                }
                (Some("n"), Some(v)) => {
                    n = Some(v.parse().map_err(|_| {
                        FieldFileError::Malformed(format!("line {line_no}: bad n {v:?}"))
                    })?)
                }
                _ => {} // free-form comment
            }
            continue;
        }
        let mut parts = line.split(',');
        let index: usize = parts
            .next()
            .ok_or_else(|| FieldFileError::Malformed(format!("line {line_no}: empty row")))?
            .trim()
            .parse()
            .map_err(|_| FieldFileError::Malformed(format!("line {line_no}: bad row index")))?;
        let vals = parts
            .map(|t| parse_f64(t, line_no))
            .collect::<Result<Vec<f64>>>()?;
        if vals.is_empty() {
            return Err(FieldFileError::Malformed(format!("line {line_no}: row has no values")));
        }
        rows.push((index, vals));
    }

    let kind = kind.ok_or_else(|| FieldFileError::Malformed("missing '# kind' header".into()))?;
    let dim = dim.ok_or_else(|| FieldFileError::Malformed("missing '# dim' header".into()))?;
    let n = n.ok_or_else(|| FieldFileError::Malformed("missing '# n' header".into()))?;
    let grid = Grid::new(dim, n)
        .map_err(|e| FieldFileError::Malformed(format!("bad grid in header: {e}")))?;

    let expected = match kind.as_str() {
        "node" => grid.interior_node_count(),
        "cell" | "vector" => grid.cell_count(),
        other => {
            return Err(FieldFileError::Malformed(format!(
                "unknown kind {other:?}, expected node, cell or vector"
            )))
        }
    };
    if rows.len() != expected {
        return Err(FieldFileError::Malformed(format!(
            "kind {kind} on this grid needs {expected} rows, found {}",
            rows.len()
        )));
    }
    let value_cols = if kind == "vector" { grid.dim() } else { 1 };
    let mut dense = vec![vec![f64::NAN; value_cols]; expected];
    let mut seen = vec![false; expected];
    for (index, vals) in rows {
        if index >= expected {
            return Err(FieldFileError::Malformed(format!("row index {index} out of range")));
        }
        if seen[index] {
            return Err(FieldFileError::Malformed(format!("duplicate row index {index}")));
        }
        if vals.len() != value_cols {
            return Err(FieldFileError::Malformed(format!(
                "row {index}: expected {value_cols} value column(s), found {}",
                vals.len()
            )));
        }
        dense[index] = vals;
        seen[index] = true;
    }

    let wrap = |e: qvi_core::Error| FieldFileError::Malformed(e.to_string());
    match kind.as_str() {
        "node" => Ok(LoadedField::Node(
            NodeField::new(grid, dense.into_iter().map(|r| r[0]).collect()).map_err(wrap)?,
        )),
        "cell" => Ok(LoadedField::Cell(
            CellField::new(grid, dense.into_iter().map(|r| r[0]).collect()).map_err(wrap)?,
        )),
        _ => {
            let values = dense
                .into_iter()
                .map(|r| if r.len() == 2 { [r[0], r[1]] } else { [r[0], 0.0] })
                .collect();
            Ok(LoadedField::Vector(VectorField::new(grid, values).map_err(wrap)?))
        }
    }
}

pub fn read(path: &Path) -> Result<LoadedField> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        FieldFileError::Malformed(format!("cannot read {}: {e}", path.display()))
    })?;
    parse(&text)
}
