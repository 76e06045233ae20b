//! Plain-text matrix format: a dimension line followed by `n` rows of
//! space-separated floats printed with 17 significant digits.

use std::fmt::Write;

use super::matrix::Matrix;
use crate::error::{Error, Result};

pub fn format_matrix(m: &Matrix) -> String {
    let n = m.nrows();
    let mut out = format!("{n}\n");
    for i in 0..n {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.16e}", m[(i, j)])).collect();
        writeln!(out, "{}", row.join(" ")).expect("writing to a String cannot fail");
    }
    out
}

pub fn parse_matrix(text: &str) -> Result<Matrix> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    let n: usize = header
        .parse()
        .map_err(|_| Error::Parse(format!("bad dimension line {header:?}")))?;
    let mut data = Vec::with_capacity(n * n);
    for row in 0..n {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("missing row {row}")))?;
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| Error::Parse(format!("bad number {t:?}"))))
            .collect::<Result<_>>()?;
        if values.len() != n {
            return Err(Error::Parse(format!("row {row} has {} entries, expected {n}", values.len())));
        }
        data.extend(values);
    }
    if lines.next().is_some() {
        return Err(Error::Parse("trailing data after matrix".into()));
    }
    Ok(Matrix::from_row_slice(n, n, &data))
}
