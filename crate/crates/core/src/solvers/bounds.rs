use super::methods::{check_rho, polyak_beta};
use crate::error::{dim_err, Error, Result};
use crate::linalg::norm2;
use crate::linalg::DenseMatrix;
use crate::preconditioner::Preconditioner;
use crate::problem::{ExactSolution, RegularizedProblem};

/// `ln(α(t,ρ)·β_ρ^{ω(t)})` with `ν(t) = log₂t + 1`, `ω(t) = t − 2ν(t)`,
/// `α(t,ρ) = 3^{ν(ν+1)}(1 + 4β_ρ + β_ρ²)^{2ν}`.
pub fn heavy_ball_log_bound(t: usize, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    if t == 0 {
        return Err(Error::InvalidParameter(
            "heavy-ball bound needs t ≥ 1".into(),
        ));
    }
    let beta = polyak_beta(rho);
    let nu = (t as f64).log2() + 1.0;
    let omega = t as f64 - 2.0 * nu;
    let log_alpha = nu * (nu + 1.0) * 3f64.ln() + 2.0 * nu * (1.0 + 4.0 * beta + beta * beta).ln();
    Ok(log_alpha + omega * beta.ln())
}

/// `(α(t,ρ)·β_ρ^{ω(t)})^{1/t}`; tends to `β_ρ` as `t → ∞`.
pub fn heavy_ball_bound(t: usize, rho: f64) -> Result<f64> {
    Ok((heavy_ball_log_bound(t, rho)? / t as f64).exp())
}

/// `δ̃ ≤ ε/(m_δ + 1)`.
pub fn termination_check(delta_tilde: f64, eps: f64, m_delta: f64) -> bool {
    delta_tilde <= eps / (m_delta + 1.0)
}

/// Smallest error reachable by any method whose iterates lie in
/// `x₀ + span{H_S⁻¹∇f(x₀), …}` after `t` steps:
/// `½ min_{Q(0)=1, deg Q ≤ t} Σᵢ Q(λᵢ⁻¹)² ξᵢ²` with `λᵢ` the eigenvalues of
/// `C_S` and `ξ` the coordinates of `H^{1/2}(x₀ − x*)` in its eigenbasis.
///
/// Writing `Q(z) = 1 + z·q(z)`, the minimum is the squared distance from
/// `ξ` to `span{Mξ, …, M^tξ}` with `M = diag(λ⁻¹)`; that span gets an
/// orthonormal basis by Arnoldi with full reorthogonalization. Columns of
/// `x₀` are independent problems and their minima are summed. O(d³).
pub fn krylov_lower_bound(
    p: &RegularizedProblem,
    pre: &Preconditioner,
    x0: &DenseMatrix,
    exact: &ExactSolution,
    t: usize,
) -> Result<f64> {
    if x0.shape() != exact.x_star.shape() {
        return Err(dim_err(
            "krylov_lower_bound",
            format!("{:?}", exact.x_star.shape()),
            format!("{:?}", x0.shape()),
        ));
    }
    let dec = pre.cs_decomposition(p)?;
    let inv: Vec<f64> = dec.cs.values.iter().map(|v| 1.0 / v).collect();
    let rotated = dec
        .cs
        .vectors
        .t_matmul(&dec.h_sqrt.matmul(&x0.sub(&exact.x_star)?)?)?;
    let d = p.d();
    let mut total = 0.0;
    for j in 0..rotated.cols() {
        let xi = rotated.column(j);
        if t >= d {
            continue;
        }
        total += 0.5 * krylov_residual(&xi, &inv, t);
    }
    Ok(total)
}

/// `‖ξ − Π ξ‖²` with `Π` the projector onto `span{Mξ, …, M^tξ}`.
fn krylov_residual(xi: &[f64], m_diag: &[f64], t: usize) -> f64 {
    let apply = |v: &[f64]| -> Vec<f64> { v.iter().zip(m_diag).map(|(a, b)| a * b).collect() };
    let scale = norm2(xi);
    if scale == 0.0 {
        return 0.0;
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(t);
    let mut next = apply(xi);
    for _ in 0..t {
        let raw = norm2(&next);
        for _ in 0..2 {
            for q in &basis {
                let c: f64 = q.iter().zip(&next).map(|(a, b)| a * b).sum();
                next.iter_mut().zip(q).for_each(|(v, qv)| *v -= c * qv);
            }
        }
        let n = norm2(&next);
        // invariant subspace reached: further powers add nothing
        if n <= 1e-13 * raw || n == 0.0 {
            break;
        }
        next.iter_mut().for_each(|v| *v /= n);
        let following = apply(&next);
        basis.push(next);
        next = following;
    }
    let mut res = xi.to_vec();
    for _ in 0..2 {
        for q in &basis {
            let c: f64 = q.iter().zip(&res).map(|(a, b)| a * b).sum();
            res.iter_mut().zip(q).for_each(|(v, qv)| *v -= c * qv);
        }
    }
    let r = norm2(&res);
    r * r
}
