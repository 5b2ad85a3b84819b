use std::time::Instant;

use adasketch::embeddings::sketch;
use adasketch::problem::{direct_solve, ExactSolution};
use adasketch::solvers::{
    adaptive_run, cg, momentum_run_with, pcg_run_with, MethodParams, RunOptions,
    DEFAULT_ADAPTIVE_TOL, DEFAULT_RHO,
};
use adasketch::{
    AdaptiveConfig, AdaptiveMethod, DenseMatrix, Preconditioner, RegularizedProblem, SketchFamily,
    SketchSpec, SolverTrace, TraceEvent, TraceRecord,
};
use clap::ValueEnum;
use serde::Serialize;

use crate::cli::{RunFlags, SizeSpec, SolverKind};
use crate::error::{CliError, CliResult};

pub const DEFAULT_ITERATIONS: usize = 50;

/// Fully resolved solver settings; serialized into manifests.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub label: String,
    pub solver: SolverKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sketch: Option<SketchFamily>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_init: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    pub seed: u64,
    pub tol: f64,
}

impl RunConfig {
    /// Checks flag combinations and fills defaults for a problem with `d` columns.
    pub fn resolve(
        solver: SolverKind,
        flags: &RunFlags,
        default_seed: u64,
        d: usize,
        label: String,
    ) -> CliResult<Self> {
        let name = solver
            .to_possible_value()
            .map_or_else(String::new, |v| v.get_name().to_string());
        if flags.m.is_some() && (solver.is_adaptive() || !solver.uses_sketch()) {
            let hint = if solver.is_adaptive() {
                "; adaptive solvers take --m-init"
            } else {
                ""
            };
            return Err(CliError::FlagConflict(format!(
                "--m does not apply to {name}{hint}"
            )));
        }
        if flags.m_init.is_some() && !solver.is_adaptive() {
            let hint = if solver.uses_sketch() {
                "; fixed-sketch solvers take --m"
            } else {
                ""
            };
            return Err(CliError::FlagConflict(format!(
                "--m-init does not apply to {name}{hint}"
            )));
        }
        if !solver.uses_sketch() && (flags.sketch.is_some() || flags.s.is_some()) {
            return Err(CliError::FlagConflict(format!(
                "{name} does not use a sketch"
            )));
        }
        if flags.rho.is_some() && !solver.uses_rho() {
            return Err(CliError::FlagConflict(format!(
                "--rho does not apply to {name}"
            )));
        }
        if solver == SolverKind::Direct && (flags.iterations.is_some() || flags.tol.is_some()) {
            return Err(CliError::FlagConflict(
                "direct takes no --T or --tol".into(),
            ));
        }
        let sketch = solver
            .uses_sketch()
            .then(|| flags.sketch.unwrap_or(SketchFamily::Gaussian));
        let s = match sketch {
            Some(SketchFamily::Sjlt) => Some(flags.s.unwrap_or(1)),
            _ if flags.s.is_some() => {
                return Err(CliError::FlagConflict(
                    "--s applies to the sjlt sketch only".into(),
                ));
            }
            _ => None,
        };
        let rho = solver.uses_rho().then(|| flags.rho.unwrap_or(DEFAULT_RHO));
        if let Some(r) = rho {
            if !(r > 0.0 && r < 1.0) {
                return Err(CliError::Flag(format!("--rho must lie in (0, 1), got {r}")));
            }
        }
        let m = (solver.uses_sketch() && !solver.is_adaptive())
            .then(|| flags.m.unwrap_or(SizeSpec::TimesD(2.0)).resolve(d));
        let m_init = solver
            .is_adaptive()
            .then(|| flags.m_init.unwrap_or(SizeSpec::Rows(1)).resolve(d));
        let default_tol = if solver.is_adaptive() {
            DEFAULT_ADAPTIVE_TOL
        } else {
            0.0
        };
        let tol = flags.tol.unwrap_or(default_tol);
        if !(tol >= 0.0) {
            return Err(CliError::Flag(format!("--tol must be ≥ 0, got {tol}")));
        }
        Ok(RunConfig {
            label,
            solver,
            sketch,
            m,
            m_init,
            rho,
            iterations: if solver == SolverKind::Direct {
                0
            } else {
                flags.iterations.unwrap_or(DEFAULT_ITERATIONS)
            },
            s,
            seed: flags.seed.unwrap_or(default_seed),
            tol,
        })
    }
}

pub struct RunOutput {
    pub trace: SolverTrace,
    /// Sketch plus factorization time for fixed-sketch solvers (the adaptive
    /// solvers count it inside the trace's wall time).
    pub setup_seconds: Option<f64>,
}

/// Computes `x*` when `d ≤ cap`.
pub fn exact_if_small(p: &RegularizedProblem, cap: usize) -> CliResult<Option<ExactSolution>> {
    if p.d() <= cap {
        Ok(Some(direct_solve(p)?))
    } else {
        Ok(None)
    }
}

pub fn execute(
    cfg: &RunConfig,
    p: &RegularizedProblem,
    exact: Option<&ExactSolution>,
) -> CliResult<RunOutput> {
    let x0 = DenseMatrix::zeros(p.d(), p.c());
    let mut opts = RunOptions::new(cfg.iterations).with_tol(cfg.tol);
    opts.exact = exact;
    match cfg.solver {
        SolverKind::Direct => direct_trace(p),
        SolverKind::Cg => Ok(RunOutput {
            trace: cg(p, &x0, &opts)?.1,
            setup_seconds: None,
        }),
        SolverKind::Ihs | SolverKind::Pcg | SolverKind::PolyakIhs => {
            let spec = SketchSpec::new(
                cfg.sketch.unwrap_or(SketchFamily::Gaussian),
                cfg.m.unwrap_or(1),
                cfg.seed,
            )
            .with_sparsity(cfg.s.unwrap_or(1));
            let start = Instant::now();
            let pre = Preconditioner::build(&sketch(&spec, p.a())?, p.nu(), p.lambda())?;
            let setup = start.elapsed().as_secs_f64();
            let rho = cfg.rho.unwrap_or(DEFAULT_RHO);
            let trace = match cfg.solver {
                SolverKind::Ihs => {
                    momentum_run_with(p, &pre, &x0, MethodParams::ihs(rho)?, &opts)?.1
                }
                SolverKind::PolyakIhs => {
                    momentum_run_with(p, &pre, &x0, MethodParams::polyak(rho)?, &opts)?.1
                }
                _ => pcg_run_with(p, &pre, &x0, &opts)?.1,
            };
            Ok(RunOutput {
                trace,
                setup_seconds: Some(setup),
            })
        }
        SolverKind::AdaIhs | SolverKind::AdaPcg => {
            let method = if cfg.solver == SolverKind::AdaIhs {
                AdaptiveMethod::Ihs
            } else {
                AdaptiveMethod::Pcg
            };
            let ac = AdaptiveConfig::new(
                method,
                cfg.rho.unwrap_or(DEFAULT_RHO),
                cfg.m_init.unwrap_or(1),
                cfg.iterations,
                cfg.sketch.unwrap_or(SketchFamily::Gaussian),
                cfg.seed,
            )?
            .with_sparsity(cfg.s.unwrap_or(1))
            .with_tol(cfg.tol);
            if ac.rho_warning() {
                eprintln!(
                    "warning: rho = {} ≥ 1/4; the adaptive guarantee needs rho < 1/4",
                    ac.rho()
                );
            }
            Ok(RunOutput {
                trace: adaptive_run(p, &x0, &ac, exact)?.1,
                setup_seconds: None,
            })
        }
    }
}

/// A single row at `t = 1` holding the direct solution (exact error 0).
fn direct_trace(p: &RegularizedProblem) -> CliResult<RunOutput> {
    let start = Instant::now();
    let sol = direct_solve(p)?;
    let wall = start.elapsed().as_secs_f64();
    let g = p.gradient(&sol.x_star)?;
    let delta_tilde = Preconditioner::exact(p)?.approx_newton_decrement(&g)?;
    let mut trace = SolverTrace::default();
    trace.records.push(TraceRecord {
        t: 1,
        m_t: 0,
        k_t: 0,
        delta_tilde,
        delta_exact: Some(0.0),
        wall_seconds: wall,
        event: TraceEvent::Plain,
    });
    Ok(RunOutput {
        trace,
        setup_seconds: None,
    })
}
