use std::fmt;
use std::time::{Duration, Instant};

use crate::error::Result;
use crate::linalg::DenseMatrix;
use crate::problem::{exact_error, ExactSolution, RegularizedProblem};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceEvent {
    /// Iterate of a fixed-sketch method (or the starting point).
    Plain,
    /// Candidate passed the adaptive test.
    Accepted,
    /// Candidate failed; the sketch size was doubled and the method restarted.
    Resketch,
}

impl TraceEvent {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceEvent::Plain => "plain",
            TraceEvent::Accepted => "accepted",
            TraceEvent::Resketch => "resketch",
        }
    }
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub t: usize,
    pub m_t: usize,
    pub k_t: usize,
    pub delta_tilde: f64,
    pub delta_exact: Option<f64>,
    pub wall_seconds: f64,
    pub event: TraceEvent,
}

#[derive(Clone, Debug, Default)]
pub struct SolverTrace {
    pub records: Vec<TraceRecord>,
}

impl SolverTrace {
    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// Records that carry an iterate (everything except resketch rows).
    pub fn iterates(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records
            .iter()
            .filter(|r| r.event != TraceEvent::Resketch)
    }

    pub fn resketch_count(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.event == TraceEvent::Resketch)
            .count()
    }

    pub fn final_m(&self) -> usize {
        self.records.last().map_or(0, |r| r.m_t)
    }

    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.t)
    }

    /// Exact errors `δ_t` of the iterates, when recorded.
    pub fn exact_errors(&self) -> Option<Vec<f64>> {
        self.iterates().map(|r| r.delta_exact).collect()
    }

    pub fn delta_tildes(&self) -> Vec<f64> {
        self.iterates().map(|r| r.delta_tilde).collect()
    }
}

/// Builds a trace while keeping exact-error evaluation off the clock.
pub(crate) struct Recorder<'a> {
    problem: &'a RegularizedProblem,
    exact: Option<&'a ExactSolution>,
    start: Instant,
    excluded: Duration,
    trace: SolverTrace,
}

impl<'a> Recorder<'a> {
    pub(crate) fn new(
        problem: &'a RegularizedProblem,
        exact: Option<&'a ExactSolution>,
        start: Instant,
    ) -> Self {
        Recorder {
            problem,
            exact,
            start,
            excluded: Duration::ZERO,
            trace: SolverTrace::default(),
        }
    }

    pub(crate) fn push(
        &mut self,
        t: usize,
        m_t: usize,
        k_t: usize,
        delta_tilde: f64,
        x: &DenseMatrix,
        event: TraceEvent,
    ) -> Result<()> {
        let wall = self.start.elapsed().saturating_sub(self.excluded);
        let paused = Instant::now();
        let delta_exact = match self.exact {
            Some(sol) => Some(exact_error(self.problem, x, sol)?),
            None => None,
        };
        self.excluded += paused.elapsed();
        self.trace.records.push(TraceRecord {
            t,
            m_t,
            k_t,
            delta_tilde,
            delta_exact,
            wall_seconds: wall.as_secs_f64(),
            event,
        });
        Ok(())
    }

    pub(crate) fn finish(self) -> SolverTrace {
        self.trace
    }
}
