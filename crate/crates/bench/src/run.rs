use crate::report::{shared_values_per_iteration, Method, RunReport};
use sced_core::alr::{run_alr, AlrError, AlrParams};
use sced_core::case::{
    load_case, make_partition_with, single_area, BoundaryRule, CaseError, NetworkCase, Partition, PartitionError,
};
use sced_core::centralized::{solve_centralized, DispatchSolution, ScedError};
use sced_core::lr::{run_lr, LrError, LrParams};
use sced_core::trace::{ConvergenceTrace, StopRule};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error("partition: {0}")]
    Partition(#[from] PartitionError),
    #[error("area file: {0}")]
    Areas(String),
    #[error("centralized: {0}")]
    Sced(#[from] ScedError),
    #[error("lr: {0}")]
    Lr(#[from] LrError),
    #[error("alr: {0}")]
    Alr(#[from] AlrError),
    #[error("sweep spec: {0}")]
    Spec(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("trace csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunParams {
    pub lr: LrParams,
    pub alr: AlrParams,
}

/// Optional parameter values layered over [`RunParams`]; shared by the CLI
/// flags and the `fixed` block of a sweep spec.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    pub step_a: Option<f64>,
    pub step_b: Option<f64>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    /// A single value is repeated for every boundary bus.
    pub lambda0: Option<Vec<f64>>,
    pub mu0: Option<Vec<f64>>,
    /// Applies to both iterative methods.
    pub stop_tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub stop_rule: Option<StopRule>,
}

impl ParamOverrides {
    pub fn apply(&self, p: &mut RunParams) {
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut p.lr.step_a, self.step_a);
        set(&mut p.lr.step_b, self.step_b);
        set(&mut p.alr.alpha, self.alpha);
        set(&mut p.alr.gamma, self.gamma);
        set(&mut p.lr.stop_tol, self.stop_tol);
        set(&mut p.alr.stop_tol, self.stop_tol);
        if let Some(l) = &self.lambda0 {
            p.lr.lambda0 = Some(l.clone());
            p.alr.lambda0 = Some(l.clone());
        }
        if let Some(m) = &self.mu0 {
            p.lr.mu0 = Some(m.clone());
        }
        if let Some(n) = self.max_iter {
            p.lr.max_iter = n;
            p.alr.max_iter = n;
        }
        if let Some(r) = self.stop_rule {
            p.lr.stop_rule = r;
            p.alr.stop_rule = r;
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub dispatch: DispatchSolution,
    /// `None` for the centralized method.
    pub trace: Option<ConvergenceTrace>,
}

/// Read a case and, when one is available, its area assignment.
///
/// `areas` is a JSON object mapping bus id to area id; without it the
/// case's own `areas` block is used. Boundary buses with load or
/// generation are rejected only when `strict` is set.
pub fn load_inputs(
    case_path: impl AsRef<Path>,
    areas: Option<&Path>,
    strict: bool,
) -> Result<(NetworkCase, Option<Partition>), BenchError> {
    let case = load_case(case_path)?;
    let map: Option<BTreeMap<usize, usize>> = match areas {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            Some(serde_json::from_str(&text).map_err(|e| BenchError::Areas(e.to_string()))?)
        }
        None => case.areas.clone(),
    };
    let rule = if strict { BoundaryRule::ZeroInjection } else { BoundaryRule::AllowInjections };
    let part = map.map(|m| make_partition_with(&case, &m, rule)).transpose()?;
    Ok((case, part))
}

fn broadcast(v: &mut Option<Vec<f64>>, n: usize) {
    if let Some(x) = v {
        if x.len() == 1 && n > 1 {
            *x = vec![x[0]; n];
        }
    }
}

/// One solve. LR without a partition treats the whole case as one area;
/// ALR requires a two-area partition.
pub fn run_single(
    case: &NetworkCase,
    part: Option<&Partition>,
    method: Method,
    params: &RunParams,
) -> Result<RunOutput, BenchError> {
    let load = case.total_load();
    let owned;
    let part = match part {
        Some(p) => p,
        None => {
            owned = make_partition_with(case, &single_area(case), BoundaryRule::AllowInjections)?;
            &owned
        }
    };
    let nb = part.boundary_buses.len();
    let start = Instant::now();
    let (dispatch, trace, iterations, converged, oscillating_at) = match method {
        Method::Centralized => (solve_centralized(case)?, None, 1, true, None),
        Method::Lr => {
            let mut p = params.lr.clone();
            broadcast(&mut p.lambda0, nb);
            broadcast(&mut p.mu0, part.tie_lines.len());
            let r = run_lr(case, part, &p)?;
            (r.solution, Some(r.trace), r.iterations, r.converged, None)
        }
        Method::Alr => {
            let mut p = params.alr.clone();
            broadcast(&mut p.lambda0, nb);
            let r = run_alr(case, part, &p)?;
            (r.solution, Some(r.trace), r.iterations, r.converged, r.oscillating_at)
        }
    };
    let wall_time_s = start.elapsed().as_secs_f64();
    let final_error = (dispatch.p_g.iter().sum::<f64>() - load).abs();
    let report = RunReport {
        method,
        iterations,
        wall_time_s,
        final_error,
        final_error_pct: if load > 0.0 { 100.0 * final_error / load } else { 0.0 },
        objective_cost: dispatch.objective_cost,
        converged,
        shared_values_per_iteration: shared_values_per_iteration(method, case, part),
        oscillating_at,
    };
    Ok(RunOutput { report, dispatch, trace })
}
