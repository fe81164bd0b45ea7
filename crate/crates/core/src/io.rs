//! File formats: the kernel/measure CSV exchange format, matrix CSV dumps,
//! and atomic JSON report writes (write-to-temp, rename — no partial files).
//!
//! Kernel file layout, one value per line:
//! a header line `n`, then `n` weight lines, then `n(n+1)/2` upper-triangle
//! kernel entries in row-major order `(0,0), (0,1), …, (1,1), …`, each a
//! decimal or the literal `inf`. Blank lines and `#` comments are ignored.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::matrix::Matrix;
use crate::space::{KernelMatrix, MeasureSpace, SpaceError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

fn parse_value(token: &str, line: usize) -> Result<f64, IoError> {
    let t = token.trim();
    if t.eq_ignore_ascii_case("inf") {
        return Ok(f64::INFINITY);
    }
    t.parse::<f64>().map_err(|e| IoError::Parse {
        line,
        message: format!("expected a number or `inf`, got {t:?}: {e}"),
    })
}

pub fn parse_kernel_csv(text: &str) -> Result<(KernelMatrix, MeasureSpace), IoError> {
    let mut values: Vec<(usize, &str)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if !line.is_empty() {
            values.push((idx + 1, line));
        }
    }
    let mut it = values.into_iter();
    let (first_line, first) = it.next().ok_or(IoError::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    let n: usize = first.parse().map_err(|e| IoError::Parse {
        line: first_line,
        message: format!("expected point count, got {first:?}: {e}"),
    })?;
    if n == 0 {
        return Err(IoError::Parse {
            line: first_line,
            message: "point count must be positive".into(),
        });
    }

    let mut weights = Vec::with_capacity(n);
    for _ in 0..n {
        let (line, tok) = it.next().ok_or(IoError::Parse {
            line: first_line,
            message: format!("expected {n} weight lines"),
        })?;
        weights.push(parse_value(tok, line)?);
    }

    let expected = n * (n + 1) / 2;
    let mut upper = Vec::with_capacity(expected);
    let mut last_line = first_line;
    for _ in 0..expected {
        let (line, tok) = it.next().ok_or(IoError::Parse {
            line: last_line,
            message: format!("expected {expected} upper-triangle kernel entries"),
        })?;
        last_line = line;
        upper.push(parse_value(tok, line)?);
    }
    if let Some((line, tok)) = it.next() {
        return Err(IoError::Parse {
            line,
            message: format!("unexpected trailing value {tok:?}"),
        });
    }

    let kernel = KernelMatrix::from_upper_triangle(n, &upper)?;
    let space = MeasureSpace::new(weights)?;
    Ok((kernel, space))
}

pub fn read_kernel_csv(path: &Path) -> Result<(KernelMatrix, MeasureSpace), IoError> {
    parse_kernel_csv(&fs::read_to_string(path)?)
}

fn fmt(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v}")
    }
}

pub fn kernel_to_csv(k: &KernelMatrix, omega: &MeasureSpace) -> String {
    let n = k.n();
    let mut out = String::new();
    out.push_str(&format!("{n}\n"));
    for &w in omega.weights() {
        out.push_str(&fmt(w));
        out.push('\n');
    }
    for i in 0..n {
        for j in i..n {
            out.push_str(&fmt(k.entry(i, j)));
            out.push('\n');
        }
    }
    out
}

pub fn write_kernel_csv(path: &Path, k: &KernelMatrix, omega: &MeasureSpace) -> Result<(), IoError> {
    write_text_atomic(path, &kernel_to_csv(k, omega))
}

/// Comma-separated rows.
pub fn matrix_to_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..m.n() {
        let row: Vec<String> = m.row(i).iter().map(|&v| fmt(v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Comma-separated rows for a flat `rows × cols` grid (margin dumps).
pub fn grid_to_csv(rows: usize, cols: usize, data: &[f64]) -> String {
    assert_eq!(rows * cols, data.len());
    let mut out = String::new();
    for i in 0..rows {
        let row: Vec<String> = data[i * cols..(i + 1) * cols]
            .iter()
            .map(|&v| fmt(v))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<(), IoError> {
    write_text_atomic(path, &matrix_to_csv(m))
}

/// Write-to-temp then rename, so failures never leave partial files.
pub fn write_text_atomic(path: &Path, text: &str) -> Result<(), IoError> {
    let tmp = path.with_file_name(format!(
        "{}.tmp",
        path.file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".into())
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Pretty JSON, atomically written. Reports carry no timestamps, so equal
/// inputs produce byte-identical files.
pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text_atomic(path, &text)
}
