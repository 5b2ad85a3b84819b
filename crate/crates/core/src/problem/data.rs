//! Dataset ingestion: numeric CSV with optional labels, the `ADSK1` binary
//! matrix cache, and random Fourier features.
//!
//! `ADSK1` layout: the 5 magic bytes `ADSK1`, then rows and cols as
//! little-endian `u64`, then `rows * cols` little-endian `f64` in row-major
//! order.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::error::{dim_err, Error, Result};
use crate::linalg::DenseMatrix;
use crate::rng;

pub const MATRIX_MAGIC: &[u8; 5] = b"ADSK1";

/// How the last CSV column is interpreted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelMode {
    /// Integer class labels, expanded to one-hot columns in ascending label order.
    LastColumnClass,
    /// A single real-valued target.
    LastColumnReal,
    /// Every column is a feature; targets are empty (n×0).
    None,
}

/// Reads a rectangular numeric CSV. A first row containing any non-numeric
/// field is treated as a header.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_mode: LabelMode,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())
        .map_err(csv_io)?;

    let mut values: Vec<f64> = Vec::new();
    let mut width: Option<usize> = None;
    let mut n_rows = 0;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(csv_io)?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Vec<std::result::Result<f64, &str>> = record
            .iter()
            .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or(f))
            .collect();
        if line == 0 && parsed.iter().any(|p| p.is_err()) {
            width = Some(record.len());
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::MalformedCsv {
                row: line + 1,
                expected,
                found: record.len(),
            });
        }
        for (col, p) in parsed.into_iter().enumerate() {
            match p {
                Ok(v) => values.push(v),
                Err(f) => {
                    return Err(Error::NonNumericField {
                        row: line + 1,
                        col: col + 1,
                        value: f.to_string(),
                    })
                }
            }
        }
        n_rows += 1;
    }
    let width = width.unwrap_or(0);
    let table = DenseMatrix::from_row_major(n_rows, width, values)?;

    if label_mode == LabelMode::None {
        return Ok((table, DenseMatrix::zeros(n_rows, 0)));
    }
    if width < 2 {
        return Err(Error::InvalidParameter(
            "labelled CSV needs at least one feature column and one label column".into(),
        ));
    }
    let p = width - 1;
    let features = DenseMatrix::from_fn(n_rows, p, |i, j| table[(i, j)]);
    let labels = table.column(p);
    let targets = match label_mode {
        LabelMode::LastColumnReal => DenseMatrix::column_vector(&labels),
        LabelMode::LastColumnClass => one_hot(&labels)?,
        LabelMode::None => unreachable!(),
    };
    Ok((features, targets))
}

fn one_hot(labels: &[f64]) -> Result<DenseMatrix> {
    let mut codes = Vec::with_capacity(labels.len());
    for (i, &l) in labels.iter().enumerate() {
        if l.fract() != 0.0 || l.abs() > 2f64.powi(53) {
            return Err(Error::NonNumericField {
                row: i + 1,
                col: 0,
                value: format!("{l} (class labels must be integers)"),
            });
        }
        codes.push(l as i64);
    }
    let classes: Vec<i64> = codes
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut y = DenseMatrix::zeros(labels.len(), classes.len());
    for (i, c) in codes.iter().enumerate() {
        let k = classes.binary_search(c).expect("label collected above");
        y[(i, k)] = 1.0;
    }
    Ok(y)
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("{other:?}"),
        )),
    }
}

/// Writes `features` (and an optional trailing column of labels) as CSV
/// without a header. Values use the shortest round-tripping decimal form.
pub fn write_csv(
    path: impl AsRef<Path>,
    features: &DenseMatrix,
    labels: Option<&[f64]>,
) -> Result<()> {
    if let Some(l) = labels {
        if l.len() != features.rows() {
            return Err(dim_err("write_csv", features.rows(), l.len()));
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    for i in 0..features.rows() {
        let mut fields: Vec<String> = features.row(i).iter().map(|v| v.to_string()).collect();
        if let Some(l) = labels {
            fields.push(l[i].to_string());
        }
        writeln!(w, "{}", fields.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_matrix(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MATRIX_MAGIC)?;
    w.write_all(&(m.rows() as u64).to_le_bytes())?;
    w.write_all(&(m.cols() as u64).to_le_bytes())?;
    for v in m.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let bad = |reason: String| Error::BadMatrixFile {
        path: path.to_path_buf(),
        reason,
    };
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.len() < 21 || &bytes[..5] != MATRIX_MAGIC {
        return Err(bad("missing ADSK1 header".into()));
    }
    let rows = u64::from_le_bytes(bytes[5..13].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[13..21].try_into().unwrap()) as usize;
    let body = &bytes[21..];
    let expected = rows.checked_mul(cols).and_then(|k| k.checked_mul(8));
    if expected != Some(body.len()) {
        return Err(bad(format!(
            "{rows}×{cols} header but {} payload bytes",
            body.len()
        )));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DenseMatrix::from_row_major(rows, cols, data).map_err(|e| bad(e.to_string()))
}

/// Random Fourier features for the Gaussian kernel `exp(−γ‖x − x′‖²)`:
/// `z(x) = √(2/D) cos(Wᵀx + u)` with `W ~ N(0, 2γ)` and `u ~ U[0, 2π)`.
pub fn random_features(
    x: &DenseMatrix,
    gamma: f64,
    d_out: usize,
    seed: u64,
) -> Result<DenseMatrix> {
    if !(gamma > 0.0) || d_out == 0 {
        return Err(Error::InvalidParameter(format!(
            "random features need gamma > 0 and D ≥ 1, got gamma = {gamma}, D = {d_out}"
        )));
    }
    let p = x.cols();
    let mut r = rng::stream(seed, 0);
    let normal = Normal::new(0.0, (2.0 * gamma).sqrt()).expect("positive scale");
    let w = DenseMatrix::from_fn(p, d_out, |_, _| normal.sample(&mut r));
    let phases: Vec<f64> = (0..d_out).map(|_| r.random_range(0.0..2.0 * PI)).collect();
    let mut z = x.matmul(&w)?;
    let scale = (2.0 / d_out as f64).sqrt();
    for i in 0..z.rows() {
        for (v, u) in z.row_mut(i).iter_mut().zip(&phases) {
            *v = scale * (*v + u).cos();
        }
    }
    Ok(z)
}
