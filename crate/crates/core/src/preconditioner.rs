//! The sketched Hessian `H_S = (SA)ᵀ(SA) + ν²Λ` and its cached factorization.
//!
//! Two paths, chosen by the sketch size:
//!
//! - `m ≥ d`: Cholesky of the d×d matrix `H_S`; a solve costs O(d²).
//! - `m < d`: Cholesky of the m×m matrix `W_S = SAΛ⁻¹(SA)ᵀ + ν²I_m` and the
//!   Woodbury identity
//!   `H_S⁻¹z = (Λ⁻¹/ν²)(z − (SA)ᵀW_S⁻¹ SAΛ⁻¹z)`; a solve costs O(md).

use crate::embeddings::SketchedData;
use crate::error::{dim_err, Error, Result};
use crate::linalg::{cholesky, sym_eig, CholeskyFactor, DenseMatrix, DiagonalMatrix, SymEig};
use crate::problem::RegularizedProblem;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FactorPath {
    /// Dense d×d Cholesky of `H_S` (`m ≥ d`).
    CholeskyD,
    /// m×m Cholesky of `W_S` plus Woodbury (`m < d`).
    WoodburyM,
}

#[derive(Clone, Debug)]
pub struct Preconditioner {
    path: FactorPath,
    sa: DenseMatrix,
    factor: CholeskyFactor,
    nu: f64,
    lambda: DiagonalMatrix,
}

impl Preconditioner {
    pub fn build(sketched: &SketchedData, nu: f64, lambda: &DiagonalMatrix) -> Result<Self> {
        Self::from_sketch(sketched.sa.clone(), nu, lambda)
    }

    /// Builds from an arbitrary m×d matrix standing in for `S·A`.
    pub fn from_sketch(sa: DenseMatrix, nu: f64, lambda: &DiagonalMatrix) -> Result<Self> {
        let (m, d) = sa.shape();
        if lambda.len() != d {
            return Err(dim_err("preconditioner build", d, lambda.len()));
        }
        if !(nu > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "nu must be positive, got {nu}"
            )));
        }
        let nu2 = nu * nu;
        // ties at m = d go to the dense path
        let (path, factor) = if m >= d {
            let mut hs = sa.gram();
            for (i, &l) in lambda.entries().iter().enumerate() {
                hs[(i, i)] += nu2 * l;
            }
            (FactorPath::CholeskyD, cholesky(&hs)?)
        } else {
            let mut scaled = sa.clone();
            let inv: Vec<f64> = lambda.entries().iter().map(|l| 1.0 / l).collect();
            scaled.scale_cols(&inv);
            let mut w = scaled.matmul_t(&sa)?;
            w.symmetrize();
            for i in 0..m {
                w[(i, i)] += nu2;
            }
            (FactorPath::WoodburyM, cholesky(&w)?)
        };
        Ok(Preconditioner {
            path,
            sa,
            factor,
            nu,
            lambda: lambda.clone(),
        })
    }

    /// `H_S = H`, obtained by taking `S = I_n`.
    pub fn exact(p: &RegularizedProblem) -> Result<Self> {
        Self::from_sketch(p.a().clone(), p.nu(), p.lambda())
    }

    pub fn path(&self) -> FactorPath {
        self.path
    }

    pub fn m(&self) -> usize {
        self.sa.rows()
    }

    pub fn d(&self) -> usize {
        self.sa.cols()
    }

    pub fn sa(&self) -> &DenseMatrix {
        &self.sa
    }

    /// Column-wise `H_S V = Z`.
    pub fn solve(&self, z: &DenseMatrix) -> Result<DenseMatrix> {
        if z.rows() != self.d() {
            return Err(dim_err("preconditioner solve", self.d(), z.rows()));
        }
        match self.path {
            FactorPath::CholeskyD => self.factor.solve(z),
            FactorPath::WoodburyM => {
                let nu2 = self.nu * self.nu;
                let inv: Vec<f64> = self.lambda.entries().iter().map(|l| 1.0 / l).collect();
                let mut y = z.clone();
                y.scale_rows(&inv);
                let t = self.sa.matmul(&y)?;
                let w_inv_t = self.factor.solve(&t)?;
                let mut u = self.sa.t_matmul(&w_inv_t)?;
                u.scale_rows(&inv);
                let mut v = y.sub(&u)?;
                v.as_mut_slice().iter_mut().for_each(|x| *x /= nu2);
                Ok(v)
            }
        }
    }

    /// `δ̃ = ½ tr(gᵀ H_S⁻¹ g)`, summed over columns.
    pub fn approx_newton_decrement(&self, grad: &DenseMatrix) -> Result<f64> {
        let v = self.solve(grad)?;
        let q = 0.5 * grad.dot(&v)?;
        let scale = grad.frobenius_norm().powi(2);
        if q < -1e-12 * scale {
            return Err(Error::NegativeValue(q));
        }
        Ok(q.max(0.0))
    }

    /// Explicit `H_S`; desk-scale diagnostics.
    pub fn sketched_hessian(&self) -> DenseMatrix {
        let mut hs = self.sa.gram();
        let nu2 = self.nu * self.nu;
        for (i, &l) in self.lambda.entries().iter().enumerate() {
            hs[(i, i)] += nu2 * l;
        }
        hs
    }

    /// Eigendecomposition of `C_S = H^{-1/2} H_S H^{-1/2}`. O(d³); tests and
    /// diagnostics only.
    pub fn cs_decomposition(&self, p: &RegularizedProblem) -> Result<CsDecomposition> {
        if p.d() != self.d() {
            return Err(dim_err("cs_decomposition", p.d(), self.d()));
        }
        let h_eig = sym_eig(&p.hessian())?;
        let h_inv_sqrt = h_eig.spectral_map(|v| 1.0 / v.sqrt());
        let mut c = h_inv_sqrt
            .matmul(&self.sketched_hessian())?
            .matmul(&h_inv_sqrt)?;
        c.symmetrize();
        Ok(CsDecomposition {
            cs: sym_eig(&c)?,
            h_sqrt: h_eig.spectral_map(f64::sqrt),
        })
    }

    /// Extreme eigenvalues of `C_S − I`.
    pub fn cs_deviation(&self, p: &RegularizedProblem) -> Result<CsDeviation> {
        let dec = self.cs_decomposition(p)?;
        let values = &dec.cs.values;
        Ok(CsDeviation {
            lambda_max: values[0] - 1.0,
            lambda_min: values[values.len() - 1] - 1.0,
        })
    }
}

/// Spectrum of `C_S` together with `H^{1/2}`.
#[derive(Clone, Debug)]
pub struct CsDecomposition {
    pub cs: SymEig,
    pub h_sqrt: DenseMatrix,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CsDeviation {
    pub lambda_max: f64,
    pub lambda_min: f64,
}

impl CsDeviation {
    /// `‖C_S − I‖₂`.
    pub fn norm(&self) -> f64 {
        self.lambda_max.abs().max(self.lambda_min.abs())
    }
}
