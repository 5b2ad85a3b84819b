use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use super::bounds::heavy_ball_log_bound;
use super::methods::{check_rho, polyak_beta, MethodParams, MethodState, Rule, RunOptions};
use super::trace::{Recorder, SolverTrace, TraceEvent};
use crate::embeddings::{sketch, SketchFamily, SketchSpec};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::preconditioner::Preconditioner;
use crate::problem::{ExactSolution, RegularizedProblem};
use crate::rng::derive_seed;

/// Default relative stopping tolerance on `δ̃` for the adaptive loop. Below
/// roughly this level the decrement is dominated by rounding and the ratio
/// test would trigger resketches that cannot help.
pub const DEFAULT_ADAPTIVE_TOL: f64 = 1e-20;

pub const DEFAULT_RHO: f64 = 0.125;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdaptiveMethod {
    Ihs,
    Pcg,
    /// Heavy-ball IHS; requires [`AdaptiveConfig::with_experimental`].
    Polyak,
}

impl AdaptiveMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            AdaptiveMethod::Ihs => "ihs",
            AdaptiveMethod::Pcg => "pcg",
            AdaptiveMethod::Polyak => "polyak",
        }
    }

    /// `(φ(ρ), α)`: IHS `(ρ, 1)`, PCG `((1−√(1−ρ))/(1+√(1−ρ)), 4)`. For the
    /// heavy-ball method `φ = β_ρ` and `α` is unused (the threshold comes from
    /// the finite-time bound).
    pub fn rate(self, rho: f64) -> (f64, f64) {
        match self {
            AdaptiveMethod::Ihs => (rho, 1.0),
            AdaptiveMethod::Pcg => (polyak_beta(rho), 4.0),
            AdaptiveMethod::Polyak => (polyak_beta(rho), 1.0),
        }
    }
}

impl fmt::Display for AdaptiveMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AdaptiveMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ihs" => Ok(AdaptiveMethod::Ihs),
            "pcg" => Ok(AdaptiveMethod::Pcg),
            "polyak" => Ok(AdaptiveMethod::Polyak),
            other => Err(Error::InvalidParameter(format!(
                "unknown adaptive method {other:?}"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptiveConfig {
    method: AdaptiveMethod,
    rho: f64,
    phi_rho: f64,
    alpha: f64,
    c_alpha_rho: f64,
    m_init: usize,
    iterations: usize,
    family: SketchFamily,
    sparsity: usize,
    seed: u64,
    tol: f64,
    experimental: bool,
}

impl AdaptiveConfig {
    pub fn new(
        method: AdaptiveMethod,
        rho: f64,
        m_init: usize,
        iterations: usize,
        family: SketchFamily,
        seed: u64,
    ) -> Result<Self> {
        check_rho(rho)?;
        if m_init == 0 {
            return Err(Error::InvalidParameter("m_init must be ≥ 1".into()));
        }
        let (phi_rho, alpha) = method.rate(rho);
        let sr = rho.sqrt();
        Ok(AdaptiveConfig {
            method,
            rho,
            phi_rho,
            alpha,
            c_alpha_rho: (1.0 + sr) / (1.0 - sr) * alpha,
            m_init,
            iterations,
            family,
            sparsity: 1,
            seed,
            tol: DEFAULT_ADAPTIVE_TOL,
            experimental: false,
        })
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    /// SJLT nonzeros per column; sketches with fewer rows use `min(s, m)`.
    pub fn with_sparsity(mut self, s: usize) -> Self {
        self.sparsity = s;
        self
    }

    pub fn with_experimental(mut self, enabled: bool) -> Self {
        self.experimental = enabled;
        self
    }

    pub fn method(&self) -> AdaptiveMethod {
        self.method
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn phi_rho(&self) -> f64 {
        self.phi_rho
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn c_alpha_rho(&self) -> f64 {
        self.c_alpha_rho
    }

    pub fn m_init(&self) -> usize {
        self.m_init
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn family(&self) -> SketchFamily {
        self.family
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// The convergence guarantee of the adaptive loop needs `ρ < 1/4`.
    pub fn rho_warning(&self) -> bool {
        self.rho >= 0.25
    }

    /// Acceptance threshold on `δ̃⁺/δ̃_I` after `s ≥ 1` steps since the
    /// last resketch.
    pub fn threshold(&self, s: usize) -> f64 {
        match self.method {
            AdaptiveMethod::Ihs | AdaptiveMethod::Pcg => {
                self.c_alpha_rho * self.phi_rho.powi(s as i32)
            }
            AdaptiveMethod::Polyak => {
                let sr = self.rho.sqrt();
                let ratio = (1.0 + sr) / (1.0 - sr);
                if s == 1 {
                    // first heavy-ball step from x_{-1} = x_0 is a plain IHS step
                    let mu = MethodParams::polyak(self.rho).map_or(1.0, |p| p.mu);
                    let q = (1.0 - mu / (1.0 - sr))
                        .abs()
                        .max((1.0 - mu / (1.0 + sr)).abs());
                    ratio * q * q
                } else {
                    let log = heavy_ball_log_bound(s - 1, self.rho).unwrap_or(f64::INFINITY);
                    ratio * 2.0 * log.exp()
                }
            }
        }
    }
}

/// The adaptive sketch-size loop. Each candidate is tested with
/// `δ̃⁺/δ̃_I ≤ threshold(t + 1 − I)`; on failure the sketch size doubles
/// (clamped to the family maximum), a fresh embedding is drawn, the method
/// restarts at `x_t` and the same index is retried. Once the sketch size sits
/// at its maximum, candidates are accepted unconditionally.
pub fn adaptive_run(
    p: &RegularizedProblem,
    x0: &DenseMatrix,
    cfg: &AdaptiveConfig,
    exact: Option<&ExactSolution>,
) -> Result<(DenseMatrix, SolverTrace)> {
    if cfg.method == AdaptiveMethod::Polyak && !cfg.experimental {
        return Err(Error::InvalidParameter(
            "adaptive heavy-ball IHS is experimental; enable it explicitly".into(),
        ));
    }
    let rule = match cfg.method {
        AdaptiveMethod::Ihs => Rule::Momentum(MethodParams::ihs(cfg.rho)?),
        AdaptiveMethod::Polyak => Rule::Momentum(MethodParams::polyak(cfg.rho)?),
        AdaptiveMethod::Pcg => Rule::Pcg,
    };
    let opts = RunOptions {
        iterations: cfg.iterations,
        tol: cfg.tol,
        exact,
    };
    let cap = cfg.family.max_sketch_size(p.n());
    let build = |m: usize, k: usize| -> Result<Preconditioner> {
        let spec = SketchSpec::new(cfg.family, m, derive_seed(cfg.seed, k as u64))
            .with_sparsity(cfg.sparsity.min(m));
        Preconditioner::build(&sketch(&spec, p.a())?, p.nu(), p.lambda())
    };

    let start = Instant::now();
    let mut rec = Recorder::new(p, opts.exact, start);
    let mut m = cfg.m_init.min(cap);
    let mut k = 0usize;
    let mut pre = build(m, k)?;
    let mut x = x0.clone();
    let mut state = MethodState::start(rule, p, &pre, &x)?;
    let initial = state.delta_tilde()?;
    let mut anchor = initial;
    let mut anchor_index = 0usize;
    let mut current = initial;
    rec.push(0, m, k, initial, &x, TraceEvent::Plain)?;

    let mut t = 0usize;
    while t < opts.iterations {
        if opts.converged(current, initial) || anchor == 0.0 {
            break;
        }
        let (candidate, next_state) = state.step(p, &pre, &x, t)?;
        let value = next_state.delta_tilde()?;
        let s = t + 1 - anchor_index;
        if value / anchor > cfg.threshold(s) && m < cap {
            anchor_index = t;
            m = (2 * m).min(cap);
            k += 1;
            pre = build(m, k)?;
            state = MethodState::start(rule, p, &pre, &x)?;
            anchor = state.delta_tilde()?;
            current = anchor;
            rec.push(t, m, k, anchor, &x, TraceEvent::Resketch)?;
        } else {
            x = candidate;
            state = next_state;
            current = value;
            t += 1;
            rec.push(t, m, k, current, &x, TraceEvent::Accepted)?;
        }
    }
    Ok((x, rec.finish()))
}
