use rand_distr::{Distribution, StandardNormal};

use super::RegularizedProblem;
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, DiagonalMatrix};
use crate::rng;

/// Generated instance together with its known minimizer.
#[derive(Clone, Debug)]
pub struct SyntheticProblem {
    pub problem: RegularizedProblem,
    /// Ground truth; `B = H x_true`, so this is `x*` exactly.
    pub x_true: DenseMatrix,
    /// `decay^1, …, decay^d`.
    pub singular_values: Vec<f64>,
}

fn orthonormal_columns(rows: usize, cols: usize, seed: u64, stream: u64) -> DenseMatrix {
    let mut r = rng::stream(seed, stream);
    // row-major fill order, then Householder QR
    let g = DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut r));
    let na = nalgebra::DMatrix::from_row_slice(rows, cols, g.as_slice());
    let q = na.qr().q();
    DenseMatrix::from_fn(rows, cols, |i, j| q[(i, j)])
}

/// `A = U diag(decay^j) Vᵀ` with Haar-like orthonormal `U` (n×d) and
/// `V` (d×d), `Λ = I`, one right-hand side `B = H x_true` with Gaussian
/// `x_true`. Bitwise deterministic per seed.
pub fn gen_synthetic(
    n: usize,
    d: usize,
    decay: f64,
    nu: f64,
    seed: u64,
) -> Result<SyntheticProblem> {
    if !(decay > 0.0 && decay < 1.0) {
        return Err(Error::InvalidDecay(decay));
    }
    if d == 0 || n < d {
        return Err(Error::InvalidParameter(format!(
            "need n ≥ d ≥ 1, got n = {n}, d = {d}"
        )));
    }
    let singular_values: Vec<f64> = (1..=d).map(|j| decay.powi(j as i32)).collect();
    let mut u = orthonormal_columns(n, d, seed, 0);
    let v = orthonormal_columns(d, d, seed, 1);
    u.scale_cols(&singular_values);
    let a = u.matmul_t(&v)?;

    let mut r = rng::stream(seed, 2);
    let x_true = DenseMatrix::from_fn(d, 1, |_, _| StandardNormal.sample(&mut r));
    let placeholder =
        RegularizedProblem::new(a, DenseMatrix::zeros(d, 1), nu, DiagonalMatrix::identity(d))?;
    let b = placeholder.apply_hessian(&x_true)?;
    let RegularizedProblem { a, nu, lambda, .. } = placeholder;
    Ok(SyntheticProblem {
        problem: RegularizedProblem::new(a, b, nu, lambda)?,
        x_true,
        singular_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{
        direct_solve, effective_dimension_from_spectrum, exact_error, nu_for_effective_dimension,
    };

    #[test]
    fn singular_values_match_decay() {
        let s = gen_synthetic(40, 12, 0.8, 0.1, 3).unwrap();
        // SVD oracle
        let a = s.problem.a();
        let na = nalgebra::DMatrix::from_row_slice(a.rows(), a.cols(), a.as_slice());
        let mut sv: Vec<f64> = na.singular_values().iter().copied().collect();
        sv.sort_by(|x, y| y.total_cmp(x));
        for (j, v) in sv.iter().enumerate() {
            assert!((v - 0.8f64.powi(j as i32 + 1)).abs() < 1e-8);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = gen_synthetic(30, 6, 0.9, 0.5, 17).unwrap();
        let b = gen_synthetic(30, 6, 0.9, 0.5, 17).unwrap();
        assert_eq!(a.problem.a().as_slice(), b.problem.a().as_slice());
        assert_eq!(a.problem.b().as_slice(), b.problem.b().as_slice());
        let c = gen_synthetic(30, 6, 0.9, 0.5, 18).unwrap();
        assert_ne!(a.problem.a().as_slice(), c.problem.a().as_slice());
    }

    #[test]
    fn rejects_bad_decay() {
        assert!(matches!(
            gen_synthetic(4, 2, 1.5, 1.0, 0),
            Err(Error::InvalidDecay(_))
        ));
        assert!(matches!(
            gen_synthetic(4, 2, 0.0, 1.0, 0),
            Err(Error::InvalidDecay(_))
        ));
        assert!(gen_synthetic(2, 4, 0.5, 1.0, 0).is_err());
    }

    #[test]
    fn ground_truth_is_the_minimizer() {
        let s = gen_synthetic(64, 16, 0.95, 0.2, 5).unwrap();
        let sol = direct_solve(&s.problem).unwrap();
        assert!(exact_error(&s.problem, &s.x_true, &sol).unwrap() <= 1e-16);
    }

    #[test]
    fn nu_bisection_on_desk_instance() {
        let (n, d) = (4096, 512);
        // decay 0.98 so that d_e = 50 is attainable at d = 512
        let spectrum: Vec<f64> = (1..=d).map(|j| 0.98f64.powi(2 * j as i32)).collect();
        let nu = nu_for_effective_dimension(&spectrum, 50.0).unwrap();
        let s = gen_synthetic(n, d, 0.98, nu, 9).unwrap();
        let de = crate::problem::effective_dimension(&s.problem).unwrap();
        assert!((45.0..=55.0).contains(&de), "{de}");
        assert!((de - effective_dimension_from_spectrum(&spectrum, nu)).abs() < 1e-6);
    }
}
