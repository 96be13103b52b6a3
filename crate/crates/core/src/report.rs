//! Per-run diagnostics shared by the solvers.

use std::time::Instant;

/// Why an iteration loop stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    Stagnated,
    MaxIterations,
}

/// Residual history, phase timings and outcome of one solver run.
#[derive(Clone, Debug)]
pub struct SolveReport {
    /// Relative Frobenius residual after each iteration.
    pub residual_history: Vec<f64>,
    /// Accumulated wall-clock seconds per named phase, in first-seen order.
    pub phases: Vec<(String, f64)>,
    pub final_ranks: Vec<usize>,
    pub converged: bool,
    pub stop_reason: StopReason,
}

impl SolveReport {
    pub fn new(final_ranks: Vec<usize>) -> Self {
        Self {
            residual_history: Vec::new(),
            phases: Vec::new(),
            final_ranks,
            converged: false,
            stop_reason: StopReason::MaxIterations,
        }
    }

    pub fn iterations(&self) -> usize {
        self.residual_history.len()
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.residual_history.last().copied()
    }

    pub fn add_time(&mut self, phase: &str, seconds: f64) {
        match self.phases.iter_mut().find(|(p, _)| p == phase) {
            Some((_, t)) => *t += seconds,
            None => self.phases.push((phase.to_string(), seconds)),
        }
    }

    /// Runs `f`, charging its wall-clock time to `phase`.
    pub fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        self.add_time(phase, t0.elapsed().as_secs_f64());
        out
    }

    pub fn phase_seconds(&self, phase: &str) -> f64 {
        self.phases.iter().find(|(p, _)| p == phase).map_or(0.0, |(_, t)| *t)
    }

    /// Total time over all phases except residual monitoring.
    pub fn solve_seconds(&self) -> f64 {
        self.phases.iter().filter(|(p, _)| p != PHASE_RESIDUAL).map(|(_, t)| t).sum()
    }
}

pub const PHASE_RESIDUAL: &str = "residual";
pub const PHASE_FACTOR: &str = "factor_solve";
pub const PHASE_CORE: &str = "core_solve";
pub const PHASE_QR: &str = "qr";
pub const PHASE_SETUP: &str = "setup";

/// Stagnation rule: relative change below `tol` over the last `window` steps.
pub(crate) fn stagnated(history: &[f64], window: usize, tol: f64) -> bool {
    if history.len() <= window {
        return false;
    }
    let last = history[history.len() - 1];
    let prev = history[history.len() - 1 - window];
    prev > 0.0 && ((prev - last).abs() / prev) < tol
}
