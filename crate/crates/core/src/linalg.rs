//! Dense kernels: row-major matrices, Cholesky with triangular solves,
//! the fast Walsh-Hadamard transform, and a symmetric eigensolver used only
//! by diagnostics.

use std::ops::{Index, IndexMut};

use crate::error::{dim_err, Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Wraps row-major data, rejecting a wrong length or non-finite entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(dim_err(
                "from_row_major",
                format!("{} entries", rows * cols),
                data.len(),
            ));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: k / cols.max(1),
                col: k % cols.max(1),
            });
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    /// Builds from a list of equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(dim_err(
                    "from_rows",
                    cols,
                    format!("{} in row {i}", r.len()),
                ));
            }
            data.extend_from_slice(r);
        }
        Self::from_row_major(rows.len(), cols, data)
    }

    /// Single-column matrix.
    pub fn column_vector(v: &[f64]) -> Self {
        DenseMatrix {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.data[i * self.cols + j])
            .collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        assert_eq!(values.len(), self.rows, "set_column: length mismatch");
        for (i, &v) in values.iter().enumerate() {
            self.data[i * self.cols + j] = v;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// `self * rhs`.
    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != rhs.rows {
            return Err(dim_err("matmul", self.cols, rhs.rows));
        }
        let mut out = DenseMatrix::zeros(self.rows, rhs.cols);
        gemm(
            self.rows,
            self.cols,
            rhs.cols,
            (&self.data, self.cols as isize, 1),
            (&rhs.data, rhs.cols as isize, 1),
            &mut out,
        );
        Ok(out)
    }

    /// `selfᵀ * rhs` without materializing the transpose.
    pub fn t_matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != rhs.rows {
            return Err(dim_err("t_matmul", self.rows, rhs.rows));
        }
        let mut out = DenseMatrix::zeros(self.cols, rhs.cols);
        gemm(
            self.cols,
            self.rows,
            rhs.cols,
            (&self.data, 1, self.cols as isize),
            (&rhs.data, rhs.cols as isize, 1),
            &mut out,
        );
        Ok(out)
    }

    /// `self * rhsᵀ` without materializing the transpose.
    pub fn matmul_t(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != rhs.cols {
            return Err(dim_err("matmul_t", self.cols, rhs.cols));
        }
        let mut out = DenseMatrix::zeros(self.rows, rhs.rows);
        gemm(
            self.rows,
            self.cols,
            rhs.rows,
            (&self.data, self.cols as isize, 1),
            (&rhs.data, 1, rhs.cols as isize),
            &mut out,
        );
        Ok(out)
    }

    /// `selfᵀ * self`, symmetrized.
    pub fn gram(&self) -> DenseMatrix {
        let mut g = self.t_matmul(self).expect("gram: shapes always agree");
        g.symmetrize();
        g
    }

    pub fn symmetrize(&mut self) {
        assert_eq!(self.rows, self.cols, "symmetrize: matrix is not square");
        let n = self.rows;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
                self.data[i * n + j] = v;
                self.data[j * n + i] = v;
            }
        }
    }

    pub fn scaled(&self, alpha: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| alpha * v).collect(),
        }
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &DenseMatrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(dim_err(
                "axpy",
                format!("{:?}", self.shape()),
                format!("{:?}", other.shape()),
            ));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        let mut out = self.clone();
        out.axpy(1.0, other)?;
        Ok(out)
    }

    /// Frobenius inner product `trace(selfᵀ other)`.
    pub fn dot(&self, other: &DenseMatrix) -> Result<f64> {
        if self.shape() != other.shape() {
            return Err(dim_err(
                "dot",
                format!("{:?}", self.shape()),
                format!("{:?}", other.shape()),
            ));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    /// Column-wise inner products `⟨self[:, j], other[:, j]⟩`.
    pub fn column_dots(&self, other: &DenseMatrix) -> Result<Vec<f64>> {
        if self.shape() != other.shape() {
            return Err(dim_err(
                "column_dots",
                format!("{:?}", self.shape()),
                format!("{:?}", other.shape()),
            ));
        }
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for ((o, a), b) in out.iter_mut().zip(self.row(i)).zip(other.row(i)) {
                *o += a * b;
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Scales row `i` by `factors[i]`.
    pub fn scale_rows(&mut self, factors: &[f64]) {
        assert_eq!(factors.len(), self.rows, "scale_rows: length mismatch");
        for (i, &f) in factors.iter().enumerate() {
            for v in self.row_mut(i) {
                *v *= f;
            }
        }
    }

    /// Scales column `j` by `factors[j]`.
    pub fn scale_cols(&mut self, factors: &[f64]) {
        assert_eq!(factors.len(), self.cols, "scale_cols: length mismatch");
        let cols = self.cols;
        for row in self.data.chunks_mut(cols.max(1)) {
            for (v, f) in row.iter_mut().zip(factors) {
                *v *= f;
            }
        }
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

fn gemm(
    m: usize,
    k: usize,
    n: usize,
    (a, rsa, csa): (&[f64], isize, isize),
    (b, rsb, csb): (&[f64], isize, isize),
    out: &mut DenseMatrix,
) {
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    let rsc = out.cols as isize;
    // SAFETY: strides describe the full extent of `a`, `b` and `out`, whose
    // lengths were checked against (m, k, n) by the callers.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            0.0,
            out.data.as_mut_ptr(),
            rsc,
            1,
        );
    }
}

/// Positive diagonal matrix, used for the regularization weights Λ.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalMatrix {
    entries: Vec<f64>,
}

impl DiagonalMatrix {
    /// Requires every entry to be finite and positive.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if let Some(v) = entries.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "diagonal entries must be positive, got {v}"
            )));
        }
        Ok(DiagonalMatrix { entries })
    }

    pub fn identity(n: usize) -> Self {
        DiagonalMatrix {
            entries: vec![1.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn min(&self) -> f64 {
        self.entries.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }
}

/// Lower-triangular `L` with `L Lᵀ = M`.
#[derive(Clone, Debug)]
pub struct CholeskyFactor {
    lower: DenseMatrix,
}

/// Relative asymmetry admitted before factorization.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Cholesky factorization of a symmetric positive-definite matrix.
///
/// The input is symmetrized as `(M + Mᵀ)/2`; asymmetry above
/// [`SYMMETRY_TOL`] relative to the largest entry is rejected.
pub fn cholesky(m: &DenseMatrix) -> Result<CholeskyFactor> {
    let n = m.rows();
    if m.cols() != n {
        return Err(dim_err(
            "cholesky",
            "square matrix",
            format!("{:?}", m.shape()),
        ));
    }
    let scale = m.max_abs();
    let mut asym: f64 = 0.0;
    for i in 0..n {
        for j in 0..i {
            asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::InvalidParameter(format!(
            "matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }

    let mut l = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mij = 0.5 * (m[(i, j)] + m[(j, i)]);
            let (li, lj) = (l.row(i), l.row(j));
            let s: f64 = li[..j].iter().zip(&lj[..j]).map(|(a, b)| a * b).sum();
            if i == j {
                let pivot = mij - s;
                if !(pivot > 0.0) || !pivot.is_finite() {
                    return Err(Error::NotPositiveDefinite { index: i, pivot });
                }
                l[(i, i)] = pivot.sqrt();
            } else {
                l[(i, j)] = (mij - s) / l[(j, j)];
            }
        }
    }
    Ok(CholeskyFactor { lower: l })
}

impl CholeskyFactor {
    /// Wraps an existing lower-triangular factor with positive diagonal.
    pub fn from_lower(lower: DenseMatrix) -> Result<Self> {
        let n = lower.rows();
        if lower.cols() != n {
            return Err(dim_err(
                "from_lower",
                "square matrix",
                format!("{:?}", lower.shape()),
            ));
        }
        for i in 0..n {
            if !(lower[(i, i)] > 0.0) {
                return Err(Error::NotPositiveDefinite {
                    index: i,
                    pivot: lower[(i, i)],
                });
            }
        }
        Ok(CholeskyFactor { lower })
    }

    pub fn size(&self) -> usize {
        self.lower.rows()
    }

    pub fn lower(&self) -> &DenseMatrix {
        &self.lower
    }

    /// Solves `L y = z`, or `Lᵀ y = z` when `transposed`.
    pub fn tri_solve(&self, z: &[f64], transposed: bool) -> Result<Vec<f64>> {
        let n = self.size();
        if z.len() != n {
            return Err(dim_err("tri_solve", n, z.len()));
        }
        let mut y = z.to_vec();
        if transposed {
            self.backward_in_place(&mut y);
        } else {
            self.forward_in_place(&mut y);
        }
        Ok(y)
    }

    fn forward_in_place(&self, y: &mut [f64]) {
        for i in 0..y.len() {
            let row = self.lower.row(i);
            let s: f64 = row[..i].iter().zip(&y[..i]).map(|(a, b)| a * b).sum();
            y[i] = (y[i] - s) / row[i];
        }
    }

    fn backward_in_place(&self, y: &mut [f64]) {
        for i in (0..y.len()).rev() {
            let row = self.lower.row(i);
            y[i] /= row[i];
            let yi = y[i];
            for (yk, lik) in y[..i].iter_mut().zip(&row[..i]) {
                *yk -= lik * yi;
            }
        }
    }

    /// Solves `M v = z` through both triangular factors.
    pub fn solve_vec(&self, z: &[f64]) -> Result<Vec<f64>> {
        let mut y = self.tri_solve(z, false)?;
        self.backward_in_place(&mut y);
        Ok(y)
    }

    /// Column-wise `M V = Z`.
    pub fn solve(&self, z: &DenseMatrix) -> Result<DenseMatrix> {
        if z.rows() != self.size() {
            return Err(dim_err("cholesky solve", self.size(), z.rows()));
        }
        let mut out = DenseMatrix::zeros(z.rows(), z.cols());
        for j in 0..z.cols() {
            let v = self.solve_vec(&z.column(j))?;
            out.set_column(j, &v);
        }
        Ok(out)
    }
}

/// Walsh-Hadamard transform of a power-of-two-length vector, in place.
///
/// The unnormalized transform uses ±1 entries; with `normalized` the result
/// is scaled by `1/√n`, which makes the transform orthonormal and an
/// involution.
pub fn fwht_in_place(x: &mut [f64], normalized: bool) -> Result<()> {
    let n = x.len();
    if !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    let mut h = 1;
    while h < n {
        for block in x.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*a, *b);
                *a = u + v;
                *b = u - v;
            }
        }
        h *= 2;
    }
    if normalized {
        let s = 1.0 / (n as f64).sqrt();
        x.iter_mut().for_each(|v| *v *= s);
    }
    Ok(())
}

pub fn fwht(x: &[f64], normalized: bool) -> Result<Vec<f64>> {
    let mut y = x.to_vec();
    fwht_in_place(&mut y, normalized)?;
    Ok(y)
}

/// Eigendecomposition `M = V diag(values) Vᵀ` with eigenvalues non-increasing
/// and eigenvectors stored as the columns of `vectors`.
#[derive(Clone, Debug)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

const EIG_MAX_SWEEPS: usize = 10_000;

/// Symmetric eigendecomposition. Diagnostics only; no solver calls it.
pub fn sym_eig(m: &DenseMatrix) -> Result<SymEig> {
    let n = m.rows();
    if m.cols() != n {
        return Err(dim_err(
            "sym_eig",
            "square matrix",
            format!("{:?}", m.shape()),
        ));
    }
    if n == 0 {
        return Ok(SymEig {
            values: vec![],
            vectors: DenseMatrix::zeros(0, 0),
        });
    }
    let mut sym = m.clone();
    sym.symmetrize();
    let na = nalgebra::DMatrix::from_row_slice(n, n, sym.as_slice());
    let eig = nalgebra::SymmetricEigen::try_new(na, f64::EPSILON, EIG_MAX_SWEEPS)
        .ok_or(Error::ConvergenceFailure(EIG_MAX_SWEEPS))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(SymEig { values, vectors })
}

impl SymEig {
    /// `V diag(f(values)) Vᵀ`.
    pub fn spectral_map(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        let mut scaled = self.vectors.clone();
        let fv: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        scaled.scale_cols(&fv);
        scaled
            .matmul_t(&self.vectors)
            .expect("spectral_map: shapes always agree")
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
