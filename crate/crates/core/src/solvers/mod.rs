//! Iterative solvers: CG, IHS, PCG, heavy-ball IHS and the adaptive
//! sketch-size loop, each returning its final iterate and a [`SolverTrace`].

mod adaptive;
mod bounds;
mod methods;
mod trace;

pub use adaptive::{
    adaptive_run, AdaptiveConfig, AdaptiveMethod, DEFAULT_ADAPTIVE_TOL, DEFAULT_RHO,
};
pub use bounds::{heavy_ball_bound, heavy_ball_log_bound, krylov_lower_bound, termination_check};
pub use methods::{
    cg, ihs_run, ihs_step, momentum_run_with, pcg_run, pcg_run_with, polyak_beta, polyak_ihs_run,
    MethodParams, RunOptions,
};
pub use trace::{SolverTrace, TraceEvent, TraceRecord};
