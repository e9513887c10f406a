//! Matrix Market text interchange.
//!
//! Matrices are written in `coordinate real general` form with 1-based
//! `row col value` triplets; vectors in `array real general` form with one
//! value per line. Reals use Rust's round-trip scientific formatting.

use std::io::{BufRead, Write};

use crate::error::{QrlsError, Result};

use super::sparse::SparseMatrix;
use super::vector::DenseVector;

const MATRIX_HEADER: &str = "%%MatrixMarket matrix coordinate real general";
const VECTOR_HEADER: &str = "%%MatrixMarket matrix array real general";

pub fn write_matrix_market<W: Write>(a: &SparseMatrix, mut w: W) -> Result<()> {
    writeln!(w, "{MATRIX_HEADER}")?;
    writeln!(w, "{} {} {}", a.n_rows(), a.n_cols(), a.nnz())?;
    for (i, j, v) in a.triplets() {
        writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
    }
    Ok(())
}

pub fn write_vector_market<W: Write>(x: &[f64], mut w: W) -> Result<()> {
    writeln!(w, "{VECTOR_HEADER}")?;
    writeln!(w, "{} 1", x.len())?;
    for v in x {
        writeln!(w, "{v:e}")?;
    }
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> Lines<R> {
    /// Next line that is neither blank nor a `%` comment.
    fn next_data(&mut self) -> Result<Option<(usize, String)>> {
        for line in self.inner.by_ref() {
            self.line_no += 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('%') {
                continue;
            }
            return Ok(Some((self.line_no, trimmed.to_string())));
        }
        Ok(None)
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> QrlsError {
    QrlsError::Parse {
        line,
        message: message.into(),
    }
}

fn read_header<R: BufRead>(r: R) -> Result<(Vec<String>, Lines<R>)> {
    let mut inner = r.lines();
    let header = match inner.next() {
        Some(line) => line?,
        None => return Err(parse_err(1, "empty input")),
    };
    let fields: Vec<String> = header
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(parse_err(1, format!("unrecognised header '{header}'")));
    }
    if fields[3] != "real" && fields[3] != "integer" {
        return Err(parse_err(
            1,
            format!("unsupported field type '{}'", fields[3]),
        ));
    }
    Ok((fields, Lines { inner, line_no: 1 }))
}

fn parse_fields<const K: usize>(line_no: usize, line: &str) -> Result<[&str; K]> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    parts.try_into().map_err(|p: Vec<&str>| {
        parse_err(line_no, format!("expected {K} fields, found {}", p.len()))
    })
}

fn parse_usize(line_no: usize, s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| parse_err(line_no, format!("invalid integer '{s}'")))
}

fn parse_f64(line_no: usize, s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| parse_err(line_no, format!("invalid real '{s}'")))
}

/// Reads a `coordinate` matrix. `symmetric` storage is expanded.
pub fn read_matrix_market<R: BufRead>(r: R) -> Result<SparseMatrix> {
    let (fields, mut lines) = read_header(r)?;
    if fields[2] != "coordinate" {
        return Err(parse_err(1, "matrix input must use coordinate format"));
    }
    let symmetric = match fields[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(parse_err(1, format!("unsupported symmetry '{other}'"))),
    };
    let (ln, size) = lines
        .next_data()?
        .ok_or_else(|| parse_err(2, "missing size line"))?;
    let [rows, cols, nnz] = parse_fields::<3>(ln, &size)?;
    let (rows, cols, nnz) = (
        parse_usize(ln, rows)?,
        parse_usize(ln, cols)?,
        parse_usize(ln, nnz)?,
    );
    let mut triplets = Vec::with_capacity(if symmetric { 2 * nnz } else { nnz });
    for _ in 0..nnz {
        let (ln, line) = lines
            .next_data()?
            .ok_or_else(|| parse_err(lines.line_no, format!("expected {nnz} entries")))?;
        let [i, j, v] = parse_fields::<3>(ln, &line)?;
        let (i, j, v) = (parse_usize(ln, i)?, parse_usize(ln, j)?, parse_f64(ln, v)?);
        if i == 0 || j == 0 || i > rows || j > cols {
            return Err(parse_err(
                ln,
                format!("index ({i}, {j}) outside {rows}x{cols}"),
            ));
        }
        triplets.push((i - 1, j - 1, v));
        if symmetric && i != j {
            triplets.push((j - 1, i - 1, v));
        }
    }
    if let Some((ln, _)) = lines.next_data()? {
        return Err(parse_err(ln, "trailing data after the declared entries"));
    }
    SparseMatrix::from_triplets(rows, cols, triplets)
}

/// Reads an `array` file holding a single column.
pub fn read_vector_market<R: BufRead>(r: R) -> Result<DenseVector> {
    let (fields, mut lines) = read_header(r)?;
    if fields[2] != "array" {
        return Err(parse_err(1, "vector input must use array format"));
    }
    let (ln, size) = lines
        .next_data()?
        .ok_or_else(|| parse_err(2, "missing size line"))?;
    let [rows, cols] = parse_fields::<2>(ln, &size)?;
    let (rows, cols) = (parse_usize(ln, rows)?, parse_usize(ln, cols)?);
    if cols != 1 {
        return Err(parse_err(
            ln,
            format!("vector must have one column, found {cols}"),
        ));
    }
    let mut values = Vec::with_capacity(rows);
    for _ in 0..rows {
        let (ln, line) = lines
            .next_data()?
            .ok_or_else(|| parse_err(lines.line_no, format!("expected {rows} values")))?;
        let [v] = parse_fields::<1>(ln, &line)?;
        values.push(parse_f64(ln, v)?);
    }
    Ok(DenseVector::new(values))
}
