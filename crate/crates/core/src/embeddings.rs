//! Random embeddings `S ∈ ℝ^{m×n}` applied to the data matrix, and the
//! critical sketch sizes above which `‖C_S − I‖₂ ≤ √ρ` holds with high
//! probability once `m ≥ m_δ/ρ`.
//!
//! All three families satisfy `E[SᵀS] = I`:
//!
//! - Gaussian: i.i.d. `N(0, 1/m)` entries;
//! - SRHT: `S = √(n'/m) · R H E` on the zero-padded row space of size
//!   `n' = 2^⌈log₂ n⌉`, with random signs `E`, the orthonormal Walsh-Hadamard
//!   matrix `H` and `m` rows sampled without replacement by `R`;
//! - SJLT: every column holds exactly `s` entries `±1/√s` in distinct rows.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{fwht_in_place, DenseMatrix};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SketchFamily {
    Gaussian,
    Srht,
    Sjlt,
}

impl SketchFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            SketchFamily::Gaussian => "gaussian",
            SketchFamily::Srht => "srht",
            SketchFamily::Sjlt => "sjlt",
        }
    }

    /// Largest admissible sketch size for `n` data rows.
    pub fn max_sketch_size(self, n: usize) -> usize {
        match self {
            SketchFamily::Srht => n.next_power_of_two(),
            SketchFamily::Gaussian | SketchFamily::Sjlt => n,
        }
    }
}

impl fmt::Display for SketchFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SketchFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(SketchFamily::Gaussian),
            "srht" => Ok(SketchFamily::Srht),
            "sjlt" => Ok(SketchFamily::Sjlt),
            other => Err(Error::InvalidParameter(format!(
                "unknown sketch family {other:?}"
            ))),
        }
    }
}

/// A seeded embedding description; realizing it is a pure function of
/// `(spec, A)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchSpec {
    pub family: SketchFamily,
    pub m: usize,
    /// Nonzeros per column; only read by the SJLT.
    pub s: usize,
    pub seed: u64,
}

impl SketchSpec {
    pub fn new(family: SketchFamily, m: usize, seed: u64) -> Self {
        SketchSpec {
            family,
            m,
            s: 1,
            seed,
        }
    }

    pub fn with_sparsity(mut self, s: usize) -> Self {
        self.s = s;
        self
    }

    pub fn with_m(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// `S·A` together with the embedding that produced it.
#[derive(Clone, Debug)]
pub struct SketchedData {
    pub sa: DenseMatrix,
    pub spec: SketchSpec,
    pub n_original: usize,
}

/// Applies the embedding described by `spec` to `a`.
pub fn sketch(spec: &SketchSpec, a: &DenseMatrix) -> Result<SketchedData> {
    match spec.family {
        SketchFamily::Gaussian => sketch_gaussian(a, spec.m, spec.seed),
        SketchFamily::Srht => sketch_srht(a, spec.m, spec.seed),
        SketchFamily::Sjlt => sketch_sjlt(a, spec.m, spec.s, spec.seed),
    }
}

/// The explicit m×n matrix `S` (as `S·I_n`). Test and diagnostics helper.
pub fn sketch_matrix(spec: &SketchSpec, n: usize) -> Result<DenseMatrix> {
    Ok(sketch(spec, &DenseMatrix::identity(n))?.sa)
}

fn check_m(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidParameter("sketch size must be ≥ 1".into()));
    }
    Ok(())
}

const GAUSSIAN_BLOCK_ROWS: usize = 128;

/// Row `i` of `S` comes from substream `i`, so the output does not depend on
/// the block size used to bound memory.
pub fn sketch_gaussian(a: &DenseMatrix, m: usize, seed: u64) -> Result<SketchedData> {
    check_m(m)?;
    let (n, d) = a.shape();
    let scale = 1.0 / (m as f64).sqrt();
    let mut sa = DenseMatrix::zeros(m, d);
    for start in (0..m).step_by(GAUSSIAN_BLOCK_ROWS) {
        let rows = GAUSSIAN_BLOCK_ROWS.min(m - start);
        let mut block = DenseMatrix::zeros(rows, n);
        for r in 0..rows {
            let mut g = rng::stream(seed, (start + r) as u64);
            for v in block.row_mut(r) {
                let z: f64 = StandardNormal.sample(&mut g);
                *v = scale * z;
            }
        }
        let part = block.matmul(a)?;
        sa.as_mut_slice()[start * d..(start + rows) * d].copy_from_slice(part.as_slice());
    }
    Ok(SketchedData {
        sa,
        spec: SketchSpec::new(SketchFamily::Gaussian, m, seed),
        n_original: n,
    })
}

/// Subsampled randomized Hadamard transform; rows of `A` are zero-padded to
/// the next power of two inside this function only.
pub fn sketch_srht(a: &DenseMatrix, m: usize, seed: u64) -> Result<SketchedData> {
    check_m(m)?;
    let (n, d) = a.shape();
    let n_padded = n.next_power_of_two();
    if m > n_padded {
        return Err(Error::SketchTooLarge { m, max: n_padded });
    }
    let mut g = rng::stream(seed, 0);
    let signs: Vec<f64> = (0..n)
        .map(|_| if g.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let selected = rng::sample_without_replacement(&mut g, n_padded, m);
    let scale = (n_padded as f64 / m as f64).sqrt();

    let mut sa = DenseMatrix::zeros(m, d);
    let mut buf = vec![0.0; n_padded];
    for j in 0..d {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = if i < n { signs[i] * a[(i, j)] } else { 0.0 };
        }
        fwht_in_place(&mut buf, true)?;
        for (r, &idx) in selected.iter().enumerate() {
            sa[(r, j)] = scale * buf[idx];
        }
    }
    Ok(SketchedData {
        sa,
        spec: SketchSpec::new(SketchFamily::Srht, m, seed),
        n_original: n,
    })
}

/// Sparse Johnson-Lindenstrauss transform. Column `j` of `S` draws its rows
/// and signs from substream `j`.
pub fn sketch_sjlt(a: &DenseMatrix, m: usize, s: usize, seed: u64) -> Result<SketchedData> {
    check_m(m)?;
    if s == 0 || s > m {
        return Err(Error::InvalidSparsity { s, m });
    }
    let (n, d) = a.shape();
    let value = 1.0 / (s as f64).sqrt();
    let mut sa = DenseMatrix::zeros(m, d);
    for j in 0..n {
        let mut g = rng::stream(seed, j as u64);
        for row in rand::seq::index::sample(&mut g, m, s) {
            let sign = if g.random::<bool>() { value } else { -value };
            let (src, dst) = (a.row(j), row);
            for (o, v) in sa.row_mut(dst).iter_mut().zip(src) {
                *o += sign * v;
            }
        }
    }
    Ok(SketchedData {
        sa,
        spec: SketchSpec::new(SketchFamily::Sjlt, m, seed).with_sparsity(s),
        n_original: n,
    })
}

fn check_critical_inputs(d_e: f64, delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidProbability(delta));
    }
    if !(d_e >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "effective dimension must be ≥ 1, got {d_e}"
        )));
    }
    Ok(())
}

/// SRHT critical size `16·log(16 d_e/δ)·(√d_e + √(8 log(2n/δ)))²`.
pub fn critical_m_srht(d_e: f64, n: usize, delta: f64) -> Result<f64> {
    check_critical_inputs(d_e, delta)?;
    let additive = (8.0 * (2.0 * n as f64 / delta).ln()).sqrt();
    Ok(16.0 * (16.0 * d_e / delta).ln() * (d_e.sqrt() + additive).powi(2))
}

/// Gaussian critical size `(√d_e + √(8 log(16/δ)))²`, using `d_e` as the
/// bound on the squared Gaussian width.
pub fn critical_m_gaussian(d_e: f64, delta: f64) -> Result<f64> {
    check_critical_inputs(d_e, delta)?;
    Ok((d_e.sqrt() + (8.0 * (16.0 / delta).ln()).sqrt()).powi(2))
}
