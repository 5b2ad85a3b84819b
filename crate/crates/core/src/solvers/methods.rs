use std::time::Instant;

use super::trace::{Recorder, SolverTrace, TraceEvent};
use crate::embeddings::{sketch, SketchSpec};
use crate::error::{dim_err, Error, Result};
use crate::linalg::DenseMatrix;
use crate::preconditioner::Preconditioner;
use crate::problem::{ExactSolution, RegularizedProblem};

/// Step size and momentum of a first-order preconditioned update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MethodParams {
    pub mu: f64,
    pub beta: f64,
}

impl MethodParams {
    pub fn new(mu: f64, beta: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) || !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need mu > 0 and beta ≥ 0, got mu = {mu}, beta = {beta}"
            )));
        }
        Ok(MethodParams { mu, beta })
    }

    /// IHS with `μ = 1 − ρ`.
    pub fn ihs(rho: f64) -> Result<Self> {
        check_rho(rho)?;
        Self::new(1.0 - rho, 0.0)
    }

    /// Heavy-ball parameters `μ_ρ = 2(1−ρ)/(1+√(1−ρ))`,
    /// `β_ρ = (1−√(1−ρ))/(1+√(1−ρ))`.
    pub fn polyak(rho: f64) -> Result<Self> {
        check_rho(rho)?;
        let s = (1.0 - rho).sqrt();
        Self::new(2.0 * (1.0 - rho) / (1.0 + s), polyak_beta(rho))
    }
}

/// `β_ρ = (1−√(1−ρ))/(1+√(1−ρ))`, written as `ρ/(1+√(1−ρ))²` to avoid
/// cancellation for small `ρ`.
pub fn polyak_beta(rho: f64) -> f64 {
    let s = 1.0 + (1.0 - rho).sqrt();
    rho / (s * s)
}

pub(crate) fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "rho must lie in (0, 1), got {rho}"
        )));
    }
    Ok(())
}

/// Stopping rule shared by the iterative solvers.
#[derive(Clone, Copy, Debug)]
pub struct RunOptions<'a> {
    /// Iteration budget `T`.
    pub iterations: usize,
    /// Stop once `δ̃_t ≤ tol·δ̃_0`; 0 disables.
    pub tol: f64,
    /// When present, `δ_t` is recorded in the trace.
    pub exact: Option<&'a ExactSolution>,
}

impl<'a> RunOptions<'a> {
    pub fn new(iterations: usize) -> Self {
        RunOptions {
            iterations,
            tol: 0.0,
            exact: None,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_exact(mut self, exact: &'a ExactSolution) -> Self {
        self.exact = Some(exact);
        self
    }

    pub(crate) fn converged(&self, delta_tilde: f64, initial: f64) -> bool {
        delta_tilde == 0.0 || delta_tilde <= self.tol * initial
    }
}

/// `x − μ·H_S⁻¹∇f(x)`.
pub fn ihs_step(
    p: &RegularizedProblem,
    pre: &Preconditioner,
    x: &DenseMatrix,
    mu: f64,
) -> Result<DenseMatrix> {
    if pre.d() != p.d() {
        return Err(dim_err("ihs_step", p.d(), pre.d()));
    }
    let v = pre.solve(&p.gradient(x)?)?;
    let mut out = x.clone();
    out.axpy(-mu, &v)?;
    Ok(out)
}

fn half_quadratic(g: &DenseMatrix, v: &DenseMatrix) -> Result<f64> {
    let q = 0.5 * g.dot(v)?;
    if q < -1e-12 * g.frobenius_norm().powi(2) {
        return Err(Error::NegativeValue(q));
    }
    Ok(q.max(0.0))
}

/// Which update rule an iteration state follows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Rule {
    Momentum(MethodParams),
    Pcg,
}

/// Method state at the current iterate for a fixed preconditioner.
#[derive(Clone, Debug)]
pub(crate) enum MethodState {
    /// Gradient `g`, preconditioned gradient `v = H_S⁻¹g`, previous iterate.
    Momentum {
        params: MethodParams,
        g: DenseMatrix,
        v: DenseMatrix,
        x_prev: DenseMatrix,
    },
    /// Residual `r = −∇f`, direction `p`, per-column `rᵀr̃` with `r̃ = H_S⁻¹r`.
    Pcg {
        r: DenseMatrix,
        dir: DenseMatrix,
        rr: Vec<f64>,
    },
}

impl MethodState {
    /// Fresh state at `x` (`x_{−1} = x` for the momentum rule).
    pub(crate) fn start(
        rule: Rule,
        p: &RegularizedProblem,
        pre: &Preconditioner,
        x: &DenseMatrix,
    ) -> Result<Self> {
        let g = p.gradient(x)?;
        let v = pre.solve(&g)?;
        Ok(match rule {
            Rule::Momentum(params) => MethodState::Momentum {
                params,
                g,
                v,
                x_prev: x.clone(),
            },
            Rule::Pcg => {
                let rr = nonnegative_dots(&g, &v)?;
                MethodState::Pcg {
                    r: g.scaled(-1.0),
                    dir: v.scaled(-1.0),
                    rr,
                }
            }
        })
    }

    /// `δ̃` at the iterate this state belongs to.
    pub(crate) fn delta_tilde(&self) -> Result<f64> {
        match self {
            MethodState::Momentum { g, v, .. } => half_quadratic(g, v),
            MethodState::Pcg { rr, .. } => Ok(0.5 * rr.iter().sum::<f64>()),
        }
    }

    /// Candidate iterate and its state; `t` is the index of `x`.
    pub(crate) fn step(
        &self,
        p: &RegularizedProblem,
        pre: &Preconditioner,
        x: &DenseMatrix,
        t: usize,
    ) -> Result<(DenseMatrix, MethodState)> {
        match self {
            MethodState::Momentum {
                params, v, x_prev, ..
            } => {
                let mut next = x.clone();
                next.axpy(-params.mu, v)?;
                if params.beta != 0.0 {
                    next.axpy(params.beta, &x.sub(x_prev)?)?;
                }
                let g = p.gradient(&next)?;
                let v = pre.solve(&g)?;
                let state = MethodState::Momentum {
                    params: *params,
                    g,
                    v,
                    x_prev: x.clone(),
                };
                Ok((next, state))
            }
            MethodState::Pcg { r, dir, rr, .. } => {
                let hp = p.apply_hessian(dir)?;
                let curvature = dir.column_dots(&hp)?;
                let mut alpha = vec![0.0; rr.len()];
                for (j, (&c, &q)) in curvature.iter().zip(rr).enumerate() {
                    if q == 0.0 {
                        continue;
                    }
                    if !(c > 0.0 && c.is_finite()) {
                        return Err(Error::BreakdownDetected {
                            iteration: t,
                            curvature: c,
                        });
                    }
                    alpha[j] = q / c;
                }
                let mut step = dir.clone();
                step.scale_cols(&alpha);
                let next = x.add(&step)?;
                let mut hstep = hp;
                hstep.scale_cols(&alpha);
                let r_next = r.sub(&hstep)?;
                let rt_next = pre.solve(&r_next)?;
                let rr_next = nonnegative_dots(&r_next, &rt_next)?;
                let ratio: Vec<f64> = rr_next
                    .iter()
                    .zip(rr)
                    .map(|(&new, &old)| if old == 0.0 { 0.0 } else { new / old })
                    .collect();
                let mut dir_next = dir.clone();
                dir_next.scale_cols(&ratio);
                let dir_next = rt_next.add(&dir_next)?;
                let state = MethodState::Pcg {
                    r: r_next,
                    dir: dir_next,
                    rr: rr_next,
                };
                Ok((next, state))
            }
        }
    }
}

fn nonnegative_dots(a: &DenseMatrix, b: &DenseMatrix) -> Result<Vec<f64>> {
    let dots = a.column_dots(b)?;
    let norms = a.column_dots(a)?;
    dots.iter()
        .zip(&norms)
        .map(|(&q, &n)| {
            if q < -1e-12 * n {
                Err(Error::NegativeValue(q))
            } else {
                Ok(q.max(0.0))
            }
        })
        .collect()
}

/// Runs `rule` with a fixed preconditioner; `start` is when the clock began
/// (so sketching and factorization count toward wall time).
pub(crate) fn run_fixed(
    rule: Rule,
    p: &RegularizedProblem,
    pre: &Preconditioner,
    x0: &DenseMatrix,
    opts: &RunOptions<'_>,
    start: Instant,
) -> Result<(DenseMatrix, SolverTrace)> {
    let m = pre.m();
    let mut rec = Recorder::new(p, opts.exact, start);
    let mut x = x0.clone();
    let mut state = MethodState::start(rule, p, pre, &x)?;
    let initial = state.delta_tilde()?;
    rec.push(0, m, 0, initial, &x, TraceEvent::Plain)?;
    let mut current = initial;
    for t in 0..opts.iterations {
        if opts.converged(current, initial) {
            break;
        }
        let (next, next_state) = state.step(p, pre, &x, t)?;
        x = next;
        state = next_state;
        current = state.delta_tilde()?;
        rec.push(t + 1, m, 0, current, &x, TraceEvent::Plain)?;
    }
    Ok((x, rec.finish()))
}

fn sketch_and_run(
    rule: Rule,
    p: &RegularizedProblem,
    x0: &DenseMatrix,
    spec: &SketchSpec,
    opts: &RunOptions<'_>,
) -> Result<(DenseMatrix, SolverTrace)> {
    let start = Instant::now();
    let pre = Preconditioner::build(&sketch(spec, p.a())?, p.nu(), p.lambda())?;
    run_fixed(rule, p, &pre, x0, opts, start)
}

/// IHS with a fixed sketch and `μ = 1 − ρ`.
pub fn ihs_run(
    p: &RegularizedProblem,
    x0: &DenseMatrix,
    spec: &SketchSpec,
    rho: f64,
    opts: &RunOptions<'_>,
) -> Result<(DenseMatrix, SolverTrace)> {
    sketch_and_run(Rule::Momentum(MethodParams::ihs(rho)?), p, x0, spec, opts)
}

/// Preconditioned CG with a fixed sketch.
pub fn pcg_run(
    p: &RegularizedProblem,
    x0: &DenseMatrix,
    spec: &SketchSpec,
    opts: &RunOptions<'_>,
) -> Result<(DenseMatrix, SolverTrace)> {
    sketch_and_run(Rule::Pcg, p, x0, spec, opts)
}

/// Heavy-ball IHS with a fixed sketch and the `(μ_ρ, β_ρ)` pair.
pub fn polyak_ihs_run(
    p: &RegularizedProblem,
    x0: &DenseMatrix,
    spec: &SketchSpec,
    rho: f64,
    opts: &RunOptions<'_>,
) -> Result<(DenseMatrix, SolverTrace)> {
    sketch_and_run(
        Rule::Momentum(MethodParams::polyak(rho)?),
        p,
        x0,
        spec,
        opts,
    )
}

/// IHS-type iteration (momentum allowed) with a caller-supplied preconditioner.
pub fn momentum_run_with(
    p: &RegularizedProblem,
    pre: &Preconditioner,
    x0: &DenseMatrix,
    params: MethodParams,
    opts: &RunOptions<'_>,
) -> Result<(DenseMatrix, SolverTrace)> {
    run_fixed(Rule::Momentum(params), p, pre, x0, opts, Instant::now())
}

/// PCG with a caller-supplied preconditioner.
pub fn pcg_run_with(
    p: &RegularizedProblem,
    pre: &Preconditioner,
    x0: &DenseMatrix,
    opts: &RunOptions<'_>,
) -> Result<(DenseMatrix, SolverTrace)> {
    run_fixed(Rule::Pcg, p, pre, x0, opts, Instant::now())
}

/// Unpreconditioned conjugate gradient on `Hx = B`, column by column. The
/// trace's `delta_tilde` is `½‖r‖²` (the decrement with `H_S = I`).
pub fn cg(
    p: &RegularizedProblem,
    x0: &DenseMatrix,
    opts: &RunOptions<'_>,
) -> Result<(DenseMatrix, SolverTrace)> {
    let start = Instant::now();
    let mut rec = Recorder::new(p, opts.exact, start);
    let mut x = x0.clone();
    let mut r = p.gradient(&x)?.scaled(-1.0);
    let mut dir = r.clone();
    let mut rr = r.column_dots(&r)?;
    let initial = 0.5 * rr.iter().sum::<f64>();
    rec.push(0, 0, 0, initial, &x, TraceEvent::Plain)?;
    let mut current = initial;
    for t in 0..opts.iterations {
        if opts.converged(current, initial) {
            break;
        }
        let hp = p.apply_hessian(&dir)?;
        let curvature = dir.column_dots(&hp)?;
        let mut alpha = vec![0.0; rr.len()];
        for (j, (&c, &q)) in curvature.iter().zip(&rr).enumerate() {
            if q == 0.0 {
                continue;
            }
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::BreakdownDetected {
                    iteration: t,
                    curvature: c,
                });
            }
            alpha[j] = q / c;
        }
        let mut step = dir.clone();
        step.scale_cols(&alpha);
        x = x.add(&step)?;
        let mut hstep = hp;
        hstep.scale_cols(&alpha);
        r = r.sub(&hstep)?;
        let rr_next = r.column_dots(&r)?;
        let ratio: Vec<f64> = rr_next
            .iter()
            .zip(&rr)
            .map(|(&new, &old)| if old == 0.0 { 0.0 } else { new / old })
            .collect();
        dir.scale_cols(&ratio);
        dir = r.add(&dir)?;
        rr = rr_next;
        current = 0.5 * rr.iter().sum::<f64>();
        rec.push(t + 1, 0, 0, current, &x, TraceEvent::Plain)?;
    }
    Ok((x, rec.finish()))
}
