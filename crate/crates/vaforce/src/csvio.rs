//! Time-series and table CSV files. The first column of a series is `t`;
//! numbers are written in their shortest round-trip form so a read-back is
//! bit-exact.

use std::fs::File;
use std::path::Path;

use anyhow::{bail, Context, Result};
use vaforce_core::Mat;

/// Shortest decimal that parses back to `x`, switching to exponent form
/// for very large or very small magnitudes.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// A sampled multichannel signal: `data[(k, j)]` is channel `j` at `t[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub names: Vec<String>,
    pub t: Vec<f64>,
    pub data: Mat,
}

impl Series {
    pub fn new(names: Vec<String>, t: Vec<f64>, data: Mat) -> Self {
        assert_eq!(names.len(), data.ncols(), "one name per column");
        assert_eq!(t.len(), data.nrows(), "one time per row");
        Self { names, t, data }
    }

    /// Samples at `t_k = (first + k)·dt`.
    pub fn uniform(names: Vec<String>, dt: f64, first: usize, data: Mat) -> Self {
        let t = (0..data.nrows()).map(|k| (first + k) as f64 * dt).collect();
        Self::new(names, t, data)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.names.iter().position(|n| n == name)?;
        Some(self.data.column(j).iter().copied().collect())
    }
}

pub fn write_series(path: &Path, s: &Series) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut header = vec!["t".to_string()];
    header.extend(s.names.iter().cloned());
    w.write_record(&header)?;
    for (k, t) in s.t.iter().enumerate() {
        let mut rec = vec![fmt_f64(*t)];
        rec.extend(s.data.row(k).iter().map(|v| fmt_f64(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_series(path: &Path) -> Result<Series> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut r = csv::Reader::from_reader(file);
    let header = r.headers()?.clone();
    if header.get(0).map(str::trim) != Some("t") {
        bail!("{}: first column must be `t`", path.display());
    }
    let names: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    let mut t = Vec::new();
    let mut values = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != names.len() + 1 {
            bail!("{}: row {} has {} fields, expected {}", path.display(), n + 1, rec.len(), names.len() + 1);
        }
        let mut row = rec.iter().map(|s| {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("{}: row {}: bad number {s:?}", path.display(), n + 1))
        });
        t.push(row.next().expect("t column")?);
        for v in row {
            values.push(v?);
        }
    }
    let data = Mat::from_row_slice(t.len(), names.len(), &values);
    Ok(Series::new(names, t, data))
}

/// Writes a plain table with a header row.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_round_trips() {
        for x in [0.0, -0.0, 1.0, 0.1, 1e-5, -3.25e-12, 6.02e23, 12345.678, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits(), "{x}");
        }
        assert_eq!(fmt_f64(0.001), "0.001");
        assert_eq!(fmt_f64(1e-5), "1e-5");
    }

    #[test]
    fn series_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let s = Series::uniform(
            vec!["a".into(), "b".into()],
            1e-3,
            1,
            Mat::from_row_slice(3, 2, &[0.1, -2.0, 1e-9, 3.5, 7.0, 0.0]),
        );
        write_series(&p, &s).unwrap();
        let back = read_series(&p).unwrap();
        assert_eq!(back, s);
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("t,a,b\n0.001,0.1,-2\n"));
    }

    #[test]
    fn rejects_missing_time_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        std::fs::write(&p, "x,a\n1,2\n").unwrap();
        assert!(read_series(&p).is_err());
    }
}
