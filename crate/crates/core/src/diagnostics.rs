//! Monte Carlo checks of subspace-embedding behaviour: the event
//! `‖C_S − I‖₂ ≤ max{√ρ, ρ}`, the Gaussian two-sided deviation bound, the
//! randomized-Hadamard row-norm bound and the Gaussian width of the
//! ellipsoid `{D̄x : ‖x‖ ≤ 1}`.
//!
//! All reports are deterministic per `(inputs, seed)`; trial `i` uses the
//! seed `derive_seed(seed, i)`.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::embeddings::{sketch, SketchFamily, SketchSpec};
use crate::error::{dim_err, Error, Result};
use crate::linalg::{fwht_in_place, sym_eig, DenseMatrix};
use crate::problem::{effective_dimension_from_spectrum, RegularizedProblem};
use crate::rng::{self, derive_seed};

/// Quantile levels reported for the per-trial statistic.
pub const QUANTILE_LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub family: SketchFamily,
    pub m: usize,
    pub rho: Option<f64>,
    pub delta: Option<f64>,
    pub trials: usize,
    /// Fraction of trials meeting the bound.
    pub success: f64,
    /// `(level, value)` pairs of the per-trial statistic.
    pub quantiles: Vec<(f64, f64)>,
    /// Median of statistic/bound, when a bound is compared.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_ratio_median: Option<f64>,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], level: f64) -> f64 {
    let pos = level * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn quantiles(values: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    QUANTILE_LEVELS
        .iter()
        .map(|&q| (q, quantile(&sorted, q)))
        .collect()
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile(&sorted, 0.5)
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be ≥ 1".into()));
    }
    Ok(())
}

fn check_probability(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidProbability(delta));
    }
    Ok(())
}

/// `U = A·H^{-1/2}`, so that `C_S − I = (SU)ᵀ(SU) − UᵀU` for any embedding
/// `S`. One d×d eigendecomposition, shared across trials.
struct Whitened {
    u: DenseMatrix,
    gram: DenseMatrix,
}

impl Whitened {
    fn new(p: &RegularizedProblem) -> Result<Self> {
        let h_inv_sqrt = sym_eig(&p.hessian())?.spectral_map(|v| 1.0 / v.sqrt());
        let u = p.a().matmul(&h_inv_sqrt)?;
        let gram = u.gram();
        Ok(Whitened { u, gram })
    }

    /// Eigenvalues of `C_S − I`, non-increasing.
    fn deviation(&self, spec: &SketchSpec) -> Result<Vec<f64>> {
        let su = sketch(spec, &self.u)?.sa;
        let c = su.gram().sub(&self.gram)?;
        Ok(sym_eig(&c)?.values)
    }
}

/// Fraction of `trials` embeddings for which `‖C_S − I‖₂ ≤ max{√ρ, ρ}`;
/// quantiles are of `‖C_S − I‖₂`.
pub fn estimate_event_probability(
    p: &RegularizedProblem,
    family: SketchFamily,
    m: usize,
    rho: f64,
    trials: usize,
    seed: u64,
) -> Result<ConcentrationReport> {
    check_trials(trials)?;
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "rho must be positive, got {rho}"
        )));
    }
    let threshold = rho.sqrt().max(rho);
    let w = Whitened::new(p)?;
    let mut norms = Vec::with_capacity(trials);
    for i in 0..trials {
        let ev = w.deviation(&SketchSpec::new(family, m, derive_seed(seed, i as u64)))?;
        norms.push(ev[0].abs().max(ev[ev.len() - 1].abs()));
    }
    let success = norms.iter().filter(|&&v| v <= threshold).count() as f64 / trials as f64;
    Ok(ConcentrationReport {
        family,
        m,
        rho: Some(rho),
        delta: None,
        trials,
        success,
        quantiles: quantiles(&norms),
        bound_ratio_median: None,
    })
}

/// `‖D‖₂² = s_max/(s_max + ν²)` with `s_max` the top eigenvalue of
/// `Λ^{-1/2}AᵀAΛ^{-1/2}`, together with that spectrum.
fn d_norm_sq(p: &RegularizedProblem) -> Result<(f64, Vec<f64>)> {
    let spectrum = p.gram_spectrum()?;
    let s = spectrum[0];
    let nu2 = p.nu() * p.nu();
    Ok((s / (s + nu2), spectrum))
}

/// Gaussian embeddings: per trial, checks
/// `λ_max(C_S − I) ≤ ‖D‖₂²(2√ρ + ρ)` and
/// `λ_min(C_S − I) ≥ −‖D‖₂²·max{2√ρ − ρ, ρ}`. Quantiles are of `λ_max`;
/// the bound ratio is `λ_max / (‖D‖₂²(2√ρ + ρ))`.
pub fn gaussian_deviation_check(
    p: &RegularizedProblem,
    m: usize,
    trials: usize,
    delta: f64,
    rho: f64,
    seed: u64,
) -> Result<ConcentrationReport> {
    check_trials(trials)?;
    check_probability(delta)?;
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "rho must be positive, got {rho}"
        )));
    }
    let (dsq, _) = d_norm_sq(p)?;
    let sr = rho.sqrt();
    let upper = dsq * (2.0 * sr + rho);
    let lower = -dsq * (2.0 * sr - rho).max(rho);
    let w = Whitened::new(p)?;
    let mut tops = Vec::with_capacity(trials);
    let mut ratios = Vec::with_capacity(trials);
    let mut hits = 0usize;
    for i in 0..trials {
        let ev = w.deviation(&SketchSpec::new(
            SketchFamily::Gaussian,
            m,
            derive_seed(seed, i as u64),
        ))?;
        let (top, bottom) = (ev[0], ev[ev.len() - 1]);
        if top <= upper && bottom >= lower {
            hits += 1;
        }
        tops.push(top);
        if upper > 0.0 {
            ratios.push(top / upper);
        }
    }
    Ok(ConcentrationReport {
        family: SketchFamily::Gaussian,
        m,
        rho: Some(rho),
        delta: Some(delta),
        trials,
        success: hits as f64 / trials as f64,
        quantiles: quantiles(&tops),
        bound_ratio_median: (!ratios.is_empty()).then(|| median(&ratios)),
    })
}

/// `√(d_e/n) + √(8 ln(n/δ)/n)`.
pub fn rownorm_bound(d_e: f64, n: usize, delta: f64) -> f64 {
    let nf = n as f64;
    (d_e / nf).sqrt() + (8.0 * (nf / delta).ln() / nf).sqrt()
}

/// Randomized Hadamard row norms: per trial draws signs `ε` and measures
/// `max_j ‖e_jᵀ H diag(ε) U D̄‖` against [`rownorm_bound`], with `H` the
/// normalized Walsh–Hadamard transform of size `n` padded to a power of two.
/// `U D̄` is taken as `A·H^{-1/2}/‖D‖₂`, which has the same row norms.
/// Quantiles are of the max row norm. `m` in the report is the padded size.
pub fn srht_rownorm_check(
    p: &RegularizedProblem,
    trials: usize,
    delta: f64,
    seed: u64,
) -> Result<ConcentrationReport> {
    check_trials(trials)?;
    check_probability(delta)?;
    let (dsq, spectrum) = d_norm_sq(p)?;
    if dsq == 0.0 {
        return Err(Error::InvalidParameter("row-norm check needs A ≠ 0".into()));
    }
    let d_e = effective_dimension_from_spectrum(&spectrum, p.nu());
    let n = p.n();
    let np = n.next_power_of_two();
    let bound = rownorm_bound(d_e, np, delta);

    let w = Whitened::new(p)?;
    let scale = 1.0 / dsq.sqrt();
    let d = p.d();
    // column-major copy so each column is one contiguous transform
    let mut columns = vec![0.0; d * np];
    for i in 0..n {
        for (j, v) in w.u.row(i).iter().enumerate() {
            columns[j * np + i] = v * scale;
        }
    }

    let mut maxima = Vec::with_capacity(trials);
    let mut buf = vec![0.0; np];
    let mut row_sq = vec![0.0; np];
    for t in 0..trials {
        let mut r = rng::stream(derive_seed(seed, t as u64), 0);
        let signs: Vec<f64> = (0..np)
            .map(|_| if r.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        row_sq.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..d {
            let col = &columns[j * np..(j + 1) * np];
            for ((b, c), s) in buf.iter_mut().zip(col).zip(&signs) {
                *b = c * s;
            }
            fwht_in_place(&mut buf, true)?;
            for (acc, b) in row_sq.iter_mut().zip(&buf) {
                *acc += b * b;
            }
        }
        maxima.push(row_sq.iter().fold(0.0f64, |a, &b| a.max(b)).sqrt());
    }
    let hits = maxima.iter().filter(|&&v| v <= bound).count();
    let ratios: Vec<f64> = maxima.iter().map(|v| v / bound).collect();
    Ok(ConcentrationReport {
        family: SketchFamily::Srht,
        m: np,
        rho: None,
        delta: Some(delta),
        trials,
        success: hits as f64 / trials as f64,
        quantiles: quantiles(&maxima),
        bound_ratio_median: Some(median(&ratios)),
    })
}

/// Monte Carlo estimate of `E‖D̄ᵀh‖₂`, `h ~ N(0, I_d)`; for the ellipsoid
/// `{D̄x : ‖x‖ ≤ 1}` this is its Gaussian width.
pub fn gaussian_width_mc(radii: &DenseMatrix, samples: usize, seed: u64) -> Result<f64> {
    let d = radii.rows();
    if radii.cols() != d {
        return Err(dim_err(
            "gaussian_width_mc",
            format!("({d}, {d})"),
            format!("{:?}", radii.shape()),
        ));
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be ≥ 1".into()));
    }
    let mut r = rng::stream(seed, 0);
    let h = DenseMatrix::from_fn(d, samples, |_, _| StandardNormal.sample(&mut r));
    let projected = radii.t_matmul(&h)?;
    let norms = projected.column_dots(&projected)?;
    Ok(norms.iter().map(|v| v.sqrt()).sum::<f64>() / samples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::critical_m_gaussian;
    use crate::linalg::DiagonalMatrix;
    use crate::problem::{effective_dimension, gen_synthetic, nu_for_effective_dimension};

    fn zero_problem(n: usize, d: usize) -> RegularizedProblem {
        RegularizedProblem::new(
            DenseMatrix::zeros(n, d),
            DenseMatrix::zeros(d, 1),
            1.0,
            DiagonalMatrix::identity(d),
        )
        .unwrap()
    }

    #[test]
    fn quantile_interpolation() {
        let v = [4.0, 1.0, 3.0, 2.0, 5.0];
        let q = quantiles(&v);
        assert_eq!(q[2], (0.5, 3.0));
        assert!((q[0].1 - 1.2).abs() < 1e-12);
        assert_eq!(median(&[1.0, 2.0]), 1.5);
    }

    #[test]
    fn zero_data_always_succeeds() {
        let p = zero_problem(16, 4);
        for family in [
            SketchFamily::Gaussian,
            SketchFamily::Srht,
            SketchFamily::Sjlt,
        ] {
            let r = estimate_event_probability(&p, family, 3, 0.1, 20, 1).unwrap();
            assert_eq!(r.success, 1.0);
            assert!(r.quantiles.iter().all(|&(_, v)| v.abs() < 1e-12));
        }
    }

    #[test]
    fn full_srht_is_exact() {
        let s = gen_synthetic(64, 8, 0.9, 0.1, 1).unwrap();
        let r =
            estimate_event_probability(&s.problem, SketchFamily::Srht, 64, 0.01, 10, 3).unwrap();
        assert_eq!(r.success, 1.0);
        assert!(r.quantiles[4].1 < 1e-10);
    }

    #[test]
    fn whitened_deviation_matches_preconditioner() {
        let s = gen_synthetic(80, 6, 0.9, 0.2, 2).unwrap();
        let p = &s.problem;
        let spec = SketchSpec::new(SketchFamily::Sjlt, 20, 5).with_sparsity(2);
        let ev = Whitened::new(p).unwrap().deviation(&spec).unwrap();
        let pre = crate::preconditioner::Preconditioner::build(
            &sketch(&spec, p.a()).unwrap(),
            p.nu(),
            p.lambda(),
        )
        .unwrap();
        let dev = pre.cs_deviation(p).unwrap();
        assert!((ev[0] - dev.lambda_max).abs() < 1e-10);
        assert!((ev[5] - dev.lambda_min).abs() < 1e-10);
    }

    #[test]
    fn reports_are_deterministic() {
        let s = gen_synthetic(64, 8, 0.9, 0.1, 4).unwrap();
        let a = estimate_event_probability(&s.problem, SketchFamily::Gaussian, 20, 0.25, 30, 9)
            .unwrap();
        let b = estimate_event_probability(&s.problem, SketchFamily::Gaussian, 20, 0.25, 30, 9)
            .unwrap();
        assert_eq!(a, b);
        let json = serde_json::to_value(&a).unwrap();
        assert_eq!(json["family"], "gaussian");
        assert!(json.get("bound_ratio_median").is_none());
    }

    #[test]
    fn deviation_shrinks_with_m() {
        let s = gen_synthetic(256, 16, 0.9, 0.1, 6).unwrap();
        let medians: Vec<f64> = [16, 32, 64, 128]
            .iter()
            .map(|&m| {
                estimate_event_probability(&s.problem, SketchFamily::Gaussian, m, 0.25, 40, 7)
                    .unwrap()
                    .quantiles[2]
                    .1
            })
            .collect();
        let inversions = medians.windows(2).filter(|w| w[1] > w[0]).count();
        assert!(inversions <= 1, "{medians:?}");
    }

    #[test]
    fn tiny_data_term_gives_vanishing_deviation() {
        let s = gen_synthetic(512, 6, 0.9, 1.0, 3).unwrap();
        let p = RegularizedProblem::new(
            s.problem.a().scaled(1e-6),
            s.problem.b().clone(),
            1e3,
            DiagonalMatrix::identity(6),
        )
        .unwrap();
        let de = effective_dimension(&p).unwrap();
        let rho = 0.25;
        let m = (critical_m_gaussian(de.max(1.0), 0.1).unwrap() / rho).ceil() as usize;
        let r = gaussian_deviation_check(&p, m, 20, 0.1, rho, 1).unwrap();
        assert_eq!(r.success, 1.0);
        assert!(r.quantiles[4].1.abs() < 1e-12);
    }

    #[test]
    fn gaussian_deviation_at_critical_size() {
        let (n, d) = (1024, 100);
        let spectrum: Vec<f64> = (1..=d).map(|j| 0.97f64.powi(2 * j as i32)).collect();
        let nu = nu_for_effective_dimension(&spectrum, 20.0).unwrap();
        let s = gen_synthetic(n, d, 0.97, nu, 2).unwrap();
        let de = effective_dimension(&s.problem).unwrap();
        let rho = 0.25;
        let m = (critical_m_gaussian(de, 0.1).unwrap() / rho).ceil() as usize;
        // 60 trials keep the unit test quick; the acceptance suite runs 200
        let r = gaussian_deviation_check(&s.problem, m, 60, 0.1, rho, 3).unwrap();
        assert!(r.success >= 0.9, "{r:?}");
        assert!(r.bound_ratio_median.unwrap() > 0.0);
    }

    #[test]
    fn rownorm_orthonormal_case() {
        // A with orthonormal columns and tiny ν: all rows of the transform have norm ≈ √(d/n)
        let n = 64;
        let d = 64;
        let a = DenseMatrix::identity(n);
        let p = RegularizedProblem::new(
            a,
            DenseMatrix::zeros(d, 1),
            1e-8,
            DiagonalMatrix::identity(d),
        )
        .unwrap();
        let r = srht_rownorm_check(&p, 5, 0.1, 1).unwrap();
        assert_eq!(r.success, 1.0);
        assert!((r.quantiles[2].1 - (d as f64 / n as f64).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn rownorm_bound_structure() {
        for &(de, n) in &[(1.0, 16), (10.0, 1024), (500.0, 4096)] {
            assert!(rownorm_bound(de, n, 0.1) >= (de / n as f64).sqrt());
        }
    }

    #[test]
    fn gaussian_width_oracles() {
        let w = gaussian_width_mc(&DenseMatrix::identity(100), 2000, 1).unwrap();
        assert!((w - 10.0).abs() < 0.2, "{w}");
        let mut single = DenseMatrix::zeros(5, 5);
        single[(0, 0)] = 1.0;
        let w = gaussian_width_mc(&single, 20000, 2).unwrap();
        assert!(
            (w - (2.0 / std::f64::consts::PI).sqrt()).abs() < 0.05 * 0.8,
            "{w}"
        );
        assert!(gaussian_width_mc(&DenseMatrix::zeros(3, 4), 10, 0).is_err());
    }

    #[test]
    fn gaussian_width_below_effective_dimension() {
        let s = gen_synthetic(64, 20, 0.85, 0.1, 5).unwrap();
        let spectrum = s.problem.gram_spectrum().unwrap();
        let nu2 = s.problem.nu().powi(2);
        let dvals: Vec<f64> = spectrum.iter().map(|x| (x / (x + nu2)).sqrt()).collect();
        let top = dvals[0];
        let radii = DenseMatrix::from_diagonal(&dvals.iter().map(|v| v / top).collect::<Vec<_>>());
        let de = effective_dimension_from_spectrum(&spectrum, s.problem.nu());
        let w = gaussian_width_mc(&radii, 500, 4).unwrap();
        assert!(w * w <= de);
    }
}
