//! Plain-text covariance files.
//!
//! ```text
//! 3
//! 2.0 0.5 0.0
//! 0.5 1.0 0.0
//! 0.0 0.0 4.0
//! ```
//!
//! The first non-blank line holds the dimension L, followed by L rows of L
//! whitespace-separated reals. Lines starting with `#` are ignored.

use std::fs;
use std::path::Path;

use gaussrdp_core::eigen::SymMatrix;

use crate::error::{CliError, Result};

pub fn read(path: &Path) -> Result<SymMatrix> {
    let text = fs::read_to_string(path)?;
    parse(&text, path)
}

pub fn parse(text: &str, path: &Path) -> Result<SymMatrix> {
    let err = |line: usize, field: usize, message: String| CliError::Parse {
        path: path.to_path_buf(),
        line,
        field,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (first, header) = lines.next().ok_or_else(|| err(1, 1, "empty file".into()))?;
    let dim: usize = header
        .parse()
        .map_err(|_| err(first, 1, format!("expected the dimension, found '{header}'")))?;
    if dim == 0 {
        return Err(err(first, 1, "dimension must be at least 1".into()));
    }

    let mut entries = Vec::with_capacity(dim * dim);
    let mut last = first;
    for row in 0..dim {
        let (no, line) = lines
            .next()
            .ok_or_else(|| err(last + 1, 1, format!("expected {dim} rows, found {row}")))?;
        last = no;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != dim {
            return Err(err(
                no,
                fields.len().min(dim) + 1,
                format!("expected {dim} values, found {}", fields.len()),
            ));
        }
        for (j, f) in fields.iter().enumerate() {
            let v: f64 = f.parse().map_err(|_| err(no, j + 1, format!("invalid number '{f}'")))?;
            if !v.is_finite() {
                return Err(err(no, j + 1, format!("non-finite value '{f}'")));
            }
            entries.push(v);
        }
    }
    if let Some((no, _)) = lines.next() {
        return Err(err(no, 1, format!("unexpected data after {dim} rows")));
    }
    SymMatrix::new(dim, entries).map_err(CliError::from)
}

pub fn write(m: &SymMatrix) -> String {
    let n = m.dim();
    let mut out = format!("{n}\n");
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| format!("{:.16e}", m.get(i, j))).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}
