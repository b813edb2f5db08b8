//! Per-iteration convergence records shared by the iterative solvers.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// When an iterative run stops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// `|Σ generation − Σ load| < stop_tol`.
    #[default]
    GenLoadError,
    /// Euclidean norm of the coupling mismatch `< stop_tol`.
    MismatchNorm,
    /// Run exactly `max_iter` iterations.
    FixedIterations,
}

impl StopRule {
    pub fn name(self) -> &'static str {
        match self {
            StopRule::GenLoadError => "gen_load_error",
            StopRule::MismatchNorm => "mismatch_norm",
            StopRule::FixedIterations => "fixed_iterations",
        }
    }
}

impl fmt::Display for StopRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StopRule {
    type Err = String;

    /// Accepts `gen_load_error` or `gen-load-error` spellings.
    fn from_str(s: &str) -> Result<Self, String> {
        let key = s.replace('-', "_");
        [StopRule::GenLoadError, StopRule::MismatchNorm, StopRule::FixedIterations]
            .into_iter()
            .find(|r| r.name() == key)
            .ok_or_else(|| format!("unknown stop rule `{s}` (gen_load_error, mismatch_norm, fixed_iterations)"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub mismatch_norm: f64,
    pub gen_load_error: f64,
    /// LR: dual function value. ALR: augmented Lagrangian value.
    pub objective: f64,
    /// Multipliers used in this iteration (before the update).
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    /// Seconds since the run started.
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceTrace {
    /// Boundary bus id of each λ entry.
    pub lambda_labels: Vec<usize>,
    /// 1-based case line number of each μ entry.
    pub mu_labels: Vec<usize>,
    pub records: Vec<TraceRecord>,
}

impl ConvergenceTrace {
    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }
}

pub(crate) fn gen_load_error(p_g: &[f64], total_load: f64) -> f64 {
    (p_g.iter().sum::<f64>() - total_load).abs()
}
