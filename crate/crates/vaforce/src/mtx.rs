//! Matrix Market exchange files (`real`, `general` or `symmetric`, in
//! `coordinate` or `array` layout), read into dense matrices.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use vaforce_core::Mat;

use crate::error::IoError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

struct Header {
    layout: Layout,
    symmetry: Symmetry,
}

fn parse_banner(line: &str) -> Result<Header, String> {
    let words: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(format!("malformed Matrix Market header {line:?}"));
    }
    let layout = match words[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(format!("unsupported layout {other:?}")),
    };
    if !matches!(words[3].as_str(), "real" | "integer" | "double") {
        return Err(format!("unsupported field {:?}; only real matrices are accepted", words[3]));
    }
    let symmetry = match words[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(format!("unsupported symmetry {other:?}")),
    };
    Ok(Header { layout, symmetry })
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, what: &str) -> Result<T, String> {
    let tok = tok.ok_or_else(|| format!("missing {what}"))?;
    tok.parse().map_err(|_| format!("cannot parse {what} from {tok:?}"))
}

/// Parses Matrix Market text into a dense matrix. Symmetric storage is
/// expanded.
pub fn parse(text: &str) -> Result<Mat, String> {
    let mut lines = text.lines();
    let header = parse_banner(lines.next().ok_or("empty file")?)?;
    let mut body = lines.filter(|l| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let size_line = body.next().ok_or("missing size line")?;
    let mut size = size_line.split_whitespace();
    let nrows: usize = parse_num(size.next(), "row count")?;
    let ncols: usize = parse_num(size.next(), "column count")?;
    let symmetric = header.symmetry == Symmetry::Symmetric;
    if symmetric && nrows != ncols {
        return Err(format!("symmetric matrix must be square, got {nrows}x{ncols}"));
    }
    let mut m = Mat::zeros(nrows, ncols);
    match header.layout {
        Layout::Coordinate => {
            let nnz: usize = parse_num(size.next(), "entry count")?;
            let mut seen = 0;
            for line in body {
                let mut tok = line.split_whitespace();
                let i: usize = parse_num(tok.next(), "row index")?;
                let j: usize = parse_num(tok.next(), "column index")?;
                let v: f64 = parse_num(tok.next(), "value")?;
                if i == 0 || j == 0 || i > nrows || j > ncols {
                    return Err(format!("entry ({i}, {j}) outside {nrows}x{ncols}"));
                }
                m[(i - 1, j - 1)] += v;
                if symmetric && i != j {
                    m[(j - 1, i - 1)] += v;
                }
                seen += 1;
            }
            if seen != nnz {
                return Err(format!("expected {nnz} entries, found {seen}"));
            }
        }
        Layout::Array => {
            let mut values = Vec::new();
            for line in body {
                for tok in line.split_whitespace() {
                    values.push(parse_num::<f64>(Some(tok), "value")?);
                }
            }
            // Column-major; symmetric arrays store the lower triangle only.
            let expected = if symmetric { nrows * (nrows + 1) / 2 } else { nrows * ncols };
            if values.len() != expected {
                return Err(format!("expected {expected} values, found {}", values.len()));
            }
            let mut it = values.into_iter();
            for j in 0..ncols {
                let start = if symmetric { j } else { 0 };
                for i in start..nrows {
                    let v = it.next().unwrap_or_default();
                    m[(i, j)] = v;
                    if symmetric {
                        m[(j, i)] = v;
                    }
                }
            }
        }
    }
    Ok(m)
}

/// Renders `m` as a `coordinate real general` file listing the nonzeros.
/// Values use the shortest representation that parses back to the same
/// bits.
pub fn render(m: &Mat) -> String {
    let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
    let nnz = m.iter().filter(|v| **v != 0.0).count();
    let _ = writeln!(out, "{} {} {}", m.nrows(), m.ncols(), nnz);
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if v != 0.0 {
                let _ = writeln!(out, "{} {} {:e}", i + 1, j + 1, v);
            }
        }
    }
    out
}

pub fn read(path: &Path) -> Result<Mat, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    parse(&text).map_err(|reason| IoError::format(path, reason))
}

pub fn write(path: &Path, m: &Mat) -> Result<(), IoError> {
    fs::write(path, render(m)).map_err(|e| IoError::io(path, e))
}
