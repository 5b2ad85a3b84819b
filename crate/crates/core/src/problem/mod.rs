//! The regularized least-squares problem
//!
//! ```text
//! minimize  f(x) = ½⟨x, Hx⟩ − ⟨B, x⟩,    H = AᵀA + ν²Λ
//! ```
//!
//! with `A` an n×d data matrix, `B` a d×c right-hand side (one column per
//! target), `ν > 0` and `Λ ⪰ I` diagonal. Iterates are d×c matrices and every
//! error quantity is summed over the c columns.

mod data;
mod synthetic;

pub use data::{
    load_csv, random_features, read_matrix, write_csv, write_matrix, LabelMode, MATRIX_MAGIC,
};
pub use synthetic::{gen_synthetic, SyntheticProblem};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{cholesky, sym_eig, DenseMatrix, DiagonalMatrix};

#[derive(Clone, Debug)]
pub struct RegularizedProblem {
    a: DenseMatrix,
    b: DenseMatrix,
    nu: f64,
    lambda: DiagonalMatrix,
}

impl RegularizedProblem {
    pub fn new(a: DenseMatrix, b: DenseMatrix, nu: f64, lambda: DiagonalMatrix) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "nu must be positive, got {nu}"
            )));
        }
        let (n, d) = a.shape();
        if n == 0 || d == 0 {
            return Err(Error::InvalidParameter(
                "data matrix must be non-empty".into(),
            ));
        }
        if b.rows() != d || b.cols() == 0 {
            return Err(dim_err(
                "problem rhs",
                format!("{d}×c with c ≥ 1"),
                format!("{:?}", b.shape()),
            ));
        }
        if lambda.len() != d {
            return Err(dim_err("problem lambda", d, lambda.len()));
        }
        if lambda.min() < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "lambda entries must be ≥ 1, got {}",
                lambda.min()
            )));
        }
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidParameter(
                "problem data must be finite".into(),
            ));
        }
        Ok(RegularizedProblem { a, b, nu, lambda })
    }

    /// Ridge regression `½‖Ax − y_j‖² + (λ/2)‖x‖²` per target column:
    /// `B = AᵀY`, `ν² = λ`, `Λ = I`.
    pub fn from_ridge(a: DenseMatrix, y: &DenseMatrix, lambda_reg: f64) -> Result<Self> {
        if !(lambda_reg > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ridge parameter must be positive, got {lambda_reg}"
            )));
        }
        if y.rows() != a.rows() {
            return Err(dim_err("from_ridge", a.rows(), y.rows()));
        }
        let b = a.t_matmul(y)?;
        let d = a.cols();
        Self::new(a, b, lambda_reg.sqrt(), DiagonalMatrix::identity(d))
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn b(&self) -> &DenseMatrix {
        &self.b
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn lambda(&self) -> &DiagonalMatrix {
        &self.lambda
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn d(&self) -> usize {
        self.a.cols()
    }

    pub fn c(&self) -> usize {
        self.b.cols()
    }

    fn check_iterate(&self, op: &'static str, x: &DenseMatrix) -> Result<()> {
        if x.shape() != (self.d(), self.c()) {
            return Err(dim_err(
                op,
                format!("({}, {})", self.d(), self.c()),
                format!("{:?}", x.shape()),
            ));
        }
        Ok(())
    }

    /// `Hx = Aᵀ(Ax) + ν²Λx`; never forms `H`.
    pub fn apply_hessian(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.rows() != self.d() {
            return Err(dim_err("apply_hessian", self.d(), x.rows()));
        }
        let ax = self.a.matmul(x)?;
        let mut hx = self.a.t_matmul(&ax)?;
        let nu2 = self.nu * self.nu;
        for (i, &l) in self.lambda.entries().iter().enumerate() {
            for (h, v) in hx.row_mut(i).iter_mut().zip(x.row(i)) {
                *h += nu2 * l * v;
            }
        }
        Ok(hx)
    }

    /// `∇f(x) = Hx − B`.
    pub fn gradient(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_iterate("gradient", x)?;
        self.apply_hessian(x)?.sub(&self.b)
    }

    pub fn objective(&self, x: &DenseMatrix) -> Result<f64> {
        self.check_iterate("objective", x)?;
        Ok(0.5 * x.dot(&self.apply_hessian(x)?)? - x.dot(&self.b)?)
    }

    /// Explicit `H`. O(nd²); desk-scale checks and the direct solver only.
    pub fn hessian(&self) -> DenseMatrix {
        let mut h = self.a.gram();
        let nu2 = self.nu * self.nu;
        for (i, &l) in self.lambda.entries().iter().enumerate() {
            h[(i, i)] += nu2 * l;
        }
        h
    }

    /// Eigenvalues of `Λ^{-1/2} AᵀA Λ^{-1/2}`, non-increasing and clamped at 0.
    pub fn gram_spectrum(&self) -> Result<Vec<f64>> {
        let mut g = self.a.gram();
        let s: Vec<f64> = self
            .lambda
            .entries()
            .iter()
            .map(|l| 1.0 / l.sqrt())
            .collect();
        g.scale_rows(&s);
        g.scale_cols(&s);
        Ok(sym_eig(&g)?
            .values
            .into_iter()
            .map(|v| v.max(0.0))
            .collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMethod {
    Direct,
}

/// The minimizer `x*`, one column per right-hand side.
#[derive(Clone, Debug)]
pub struct ExactSolution {
    pub x_star: DenseMatrix,
    pub method: SolveMethod,
}

/// Cholesky factorization of the explicitly formed `H`.
pub fn direct_solve(p: &RegularizedProblem) -> Result<ExactSolution> {
    let factor = cholesky(&p.hessian())?;
    Ok(ExactSolution {
        x_star: factor.solve(p.b())?,
        method: SolveMethod::Direct,
    })
}

/// `δ_x = ½‖x − x*‖²_H`, summed over columns.
pub fn exact_error(p: &RegularizedProblem, x: &DenseMatrix, sol: &ExactSolution) -> Result<f64> {
    p.check_iterate("exact_error", x)?;
    let diff = x.sub(&sol.x_star)?;
    Ok((0.5 * diff.dot(&p.apply_hessian(&diff)?)?).max(0.0))
}

/// `d_e = Σ dᵢ / maxᵢ dᵢ` with `dᵢ = sᵢ/(sᵢ + ν²)` over the spectrum
/// `sᵢ` of `Λ^{-1/2}AᵀAΛ^{-1/2}`. Returns 0 when the spectrum is all zero
/// (`A = 0`), where the ratio is 0/0.
pub fn effective_dimension_from_spectrum(spectrum: &[f64], nu: f64) -> f64 {
    let nu2 = nu * nu;
    let ratios = spectrum.iter().map(|&s| s.max(0.0) / (s.max(0.0) + nu2));
    let (sum, max) = ratios.fold((0.0, 0.0f64), |(s, m), r| (s + r, m.max(r)));
    if max == 0.0 {
        0.0
    } else {
        sum / max
    }
}

/// Effective dimension of `p`; desk-scale (one symmetric eigendecomposition).
pub fn effective_dimension(p: &RegularizedProblem) -> Result<f64> {
    Ok(effective_dimension_from_spectrum(
        &p.gram_spectrum()?,
        p.nu(),
    ))
}

/// Bisection (in log ν) for the ν whose effective dimension equals `target`.
///
/// `d_e` decreases monotonically in ν, from the rank (ν → 0) down to
/// `Σ sᵢ / s_max` (ν → ∞); `target` must lie strictly between the two.
pub fn nu_for_effective_dimension(spectrum: &[f64], target: f64) -> Result<f64> {
    let rank = spectrum.iter().filter(|&&s| s > 0.0).count() as f64;
    let smax = spectrum.iter().copied().fold(0.0, f64::max);
    let floor = if smax > 0.0 {
        spectrum.iter().map(|s| s.max(0.0)).sum::<f64>() / smax
    } else {
        0.0
    };
    if !(target > floor && target < rank) {
        return Err(Error::InvalidParameter(format!(
            "target effective dimension {target} outside ({floor}, {rank})"
        )));
    }
    let (mut lo, mut hi) = ((smax.sqrt() * 1e-12).ln(), (smax.sqrt() * 1e12).ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if effective_dimension_from_spectrum(spectrum, mid.exp()) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}
