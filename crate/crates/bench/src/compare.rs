use crate::report::{Method, RunReport};
use crate::run::{run_single, BenchError, RunParams};
use sced_core::case::{NetworkCase, Partition};
use sced_core::trace::StopRule;

#[derive(Debug, Clone)]
pub struct Comparison {
    pub criterion: f64,
    /// `Some(N)` when both methods ran exactly `N` iterations.
    pub fixed_iters: Option<usize>,
    pub lr: RunReport,
    pub alr: RunReport,
}

/// Run LR and ALR on the same case.
///
/// Without `fixed_iters` both stop at `|Σ gen − Σ load| < criterion` (their
/// own `max_iter` still applies). With `fixed_iters = Some(n)` both run
/// exactly `n` iterations and report the error of the last iterate.
pub fn compare_methods(
    case: &NetworkCase,
    part: &Partition,
    params: &RunParams,
    criterion: f64,
    fixed_iters: Option<usize>,
) -> Result<Comparison, BenchError> {
    let mut p = params.clone();
    p.lr.stop_tol = criterion;
    p.alr.stop_tol = criterion;
    match fixed_iters {
        Some(n) => {
            p.lr.stop_rule = StopRule::FixedIterations;
            p.alr.stop_rule = StopRule::FixedIterations;
            p.lr.max_iter = n;
            p.alr.max_iter = n;
        }
        None => {
            p.lr.stop_rule = StopRule::GenLoadError;
            p.alr.stop_rule = StopRule::GenLoadError;
        }
    }
    let lr = run_single(case, Some(part), Method::Lr, &p)?.report;
    let alr = run_single(case, Some(part), Method::Alr, &p)?.report;
    Ok(Comparison { criterion, fixed_iters, lr, alr })
}
