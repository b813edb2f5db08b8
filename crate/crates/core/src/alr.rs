//! Augmented Lagrangian relaxation with alternating direction, two areas.
//!
//! Iteration `k`:
//! 1. minimize over area 1 with area 2 frozen at its last values,
//! 2. minimize over area 2 with the fresh area 1 values frozen,
//! 3. `λ += α·g(X₁, X₂)` where `g` stacks the boundary-bus balance residuals.
//!
//! Each area objective is `f_k + λᵀg + ½γ‖g‖²` with `g` affine in the area's
//! own variables once the foreign ones are fixed, so the penalty expands
//! into the QP's `Q` and `c`. The tie-line limit never enters the augmented
//! Lagrangian: each area instead keeps `|Σ P_g − Σ load| ≤ f_max(tie)`.

use crate::affine::Affine;
use crate::case::{NetworkCase, Partition};
use crate::centralized::{line_flows, DispatchSolution};
use crate::qp::{self, QpBuilder, QpError, QpProblem, QpStatus};
use crate::trace::{gen_load_error, ConvergenceTrace, StopRule, TraceRecord};
use std::time::Instant;
use thiserror::Error;

/// Window length of the oscillation annotation.
pub const OSCILLATION_WINDOW: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct AlrParams {
    pub alpha: f64,
    pub gamma: f64,
    /// One entry per boundary bus, ascending bus id. `None` means zeros.
    pub lambda0: Option<Vec<f64>>,
    pub stop_tol: f64,
    pub max_iter: usize,
    pub stop_rule: StopRule,
}

impl Default for AlrParams {
    fn default() -> Self {
        AlrParams {
            alpha: 0.1,
            gamma: 0.25,
            lambda0: None,
            stop_tol: 0.01,
            max_iter: 2000,
            stop_rule: StopRule::GenLoadError,
        }
    }
}

impl AlrParams {
    pub fn validate(&self) -> Result<(), AlrError> {
        if !(self.alpha > 0.0) {
            return Err(AlrError::Params("alpha must be > 0".into()));
        }
        if !(self.gamma > 0.0) {
            return Err(AlrError::Params("gamma must be > 0".into()));
        }
        if !(self.stop_tol > 0.0) {
            return Err(AlrError::Params("stop_tol must be > 0".into()));
        }
        if self.max_iter == 0 {
            return Err(AlrError::Params("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum AlrError {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("unsupported topology: {0}")]
    UnsupportedTopology(String),
    #[error("lambda0 has length {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error("area {area} subproblem ended with status {status:?}")]
    Subproblem { area: usize, status: QpStatus },
}

/// `f + λᵀg + ½γ‖g‖²`
pub fn augmented_lagrangian_value(f: f64, g: &[f64], lambda: &[f64], gamma: f64) -> f64 {
    let lin: f64 = lambda.iter().zip(g).map(|(l, v)| l * v).sum();
    let sq: f64 = g.iter().map(|v| v * v).sum();
    f + lin + 0.5 * gamma * sq
}

/// `|Σ_{area} P_g − area load| ≤ f_max` for one area.
#[derive(Debug, Clone, PartialEq)]
pub struct TieBound {
    pub area: usize,
    pub generators: Vec<usize>,
    pub area_load: f64,
    pub f_max: f64,
}

impl TieBound {
    /// Distance to the bound; negative when violated.
    pub fn slack(&self, p_g: &[f64]) -> f64 {
        let net: f64 = self.generators.iter().map(|&g| p_g[g]).sum::<f64>() - self.area_load;
        self.f_max - net.abs()
    }
}

fn check_topology(part: &Partition) -> Result<(), AlrError> {
    if part.areas.len() != 2 {
        return Err(AlrError::UnsupportedTopology(format!("expected 2 areas, found {}", part.areas.len())));
    }
    if part.tie_lines.len() != 1 {
        return Err(AlrError::UnsupportedTopology(format!(
            "expected exactly one tie-line, found {}",
            part.tie_lines.len()
        )));
    }
    Ok(())
}

pub fn make_tie_bound_constraints(case: &NetworkCase, part: &Partition) -> Result<Vec<TieBound>, AlrError> {
    check_topology(part)?;
    let f_max = case.lines[part.tie_lines[0]].f_max_pu;
    let loads = case.loads();
    Ok(part
        .areas
        .iter()
        .map(|&a| TieBound {
            area: a,
            generators: part.area_generators(case, a),
            area_load: part.area_buses(a).iter().map(|b| loads[b - 1]).sum(),
            f_max,
        })
        .collect())
}

/// Full primal state shared between the two steps.
#[derive(Debug, Clone, PartialEq)]
pub struct AlrState {
    pub p_g: Vec<f64>,
    /// Indexed by bus id − 1.
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct AreaQp {
    pub qp: QpProblem,
    pub constant: f64,
    /// (generator index, variable)
    pub gens: Vec<(usize, usize)>,
    /// (bus id, variable)
    pub angles: Vec<(usize, usize)>,
    /// (bus id, equality row) of the area's non-boundary balances
    pub balance_rows: Vec<(usize, usize)>,
}

/// Result of one area step.
#[derive(Debug, Clone)]
pub struct AreaStep {
    pub state: AlrState,
    /// Augmented objective of the area QP, constants included.
    pub objective: f64,
    /// (bus, price) from the area's own balance rows.
    pub prices: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct AlrRun {
    /// The converged iterate, or the one with the smallest error.
    pub solution: DispatchSolution,
    pub trace: ConvergenceTrace,
    pub converged: bool,
    pub iterations: usize,
    pub lambda: Vec<f64>,
    /// First iteration at which the oscillation annotation fired.
    pub oscillating_at: Option<usize>,
}

impl AlrRun {
    pub fn oscillating(&self) -> bool {
        self.oscillating_at.is_some()
    }
}

#[derive(Debug, Clone)]
pub struct AlrDecomposition<'a> {
    pub case: &'a NetworkCase,
    pub part: &'a Partition,
    pub bounds: Vec<TieBound>,
    /// Boundary buses, ascending; one λ each.
    pub coupled: Vec<usize>,
}

impl<'a> AlrDecomposition<'a> {
    pub fn new(case: &'a NetworkCase, part: &'a Partition) -> Result<Self, AlrError> {
        let bounds = make_tie_bound_constraints(case, part)?;
        Ok(AlrDecomposition { case, part, bounds, coupled: part.boundary_buses.clone() })
    }

    /// Balance residual `load − generation + Σ flows out` at every boundary bus.
    pub fn coupling_residual(&self, s: &AlrState) -> Vec<f64> {
        let flows = line_flows(self.case, &s.theta);
        let loads = self.case.loads();
        self.coupled
            .iter()
            .map(|&bus| {
                let mut r = loads[bus - 1];
                for g in self.case.generators_at(bus) {
                    r -= s.p_g[g];
                }
                for (l, f) in self.case.lines.iter().zip(&flows) {
                    if l.from == bus {
                        r += f;
                    } else if l.to == bus {
                        r -= f;
                    }
                }
                r
            })
            .collect()
    }

    pub fn augmented_value(&self, s: &AlrState, lambda: &[f64], gamma: f64) -> f64 {
        augmented_lagrangian_value(self.case.cost(&s.p_g), &self.coupling_residual(s), lambda, gamma)
    }

    /// Starting point: flat angles, each generator at its capacity share of
    /// its area's load.
    pub fn initial_state(&self) -> AlrState {
        let mut p_g = vec![0.0; self.case.generators.len()];
        for tb in &self.bounds {
            let cap: f64 = tb.generators.iter().map(|&g| self.case.generators[g].p_max_pu).sum();
            for &g in &tb.generators {
                let gen = &self.case.generators[g];
                let share = if cap > 0.0 { tb.area_load * gen.p_max_pu / cap } else { 0.0 };
                p_g[g] = share.clamp(gen.p_min_pu, gen.p_max_pu);
            }
        }
        AlrState { p_g, theta: vec![0.0; self.case.n_buses()] }
    }

    /// QP of one area with everything foreign frozen at `s`.
    pub fn area_qp(&self, which: usize, s: &AlrState, lambda: &[f64], gamma: f64) -> AreaQp {
        let case = self.case;
        let part = self.part;
        let area = part.areas[which];
        let tb = &self.bounds[which];
        let buses = part.area_buses(area);

        let mut n = 0;
        let mut next = || {
            n += 1;
            n - 1
        };
        let gens: Vec<(usize, usize)> = tb.generators.iter().map(|&g| (g, next())).collect();
        let angles: Vec<(usize, usize)> =
            buses.iter().filter(|&&b| b != case.slack_bus).map(|&b| (b, next())).collect();

        let theta = |bus: usize| -> Affine {
            match angles.iter().find(|(b, _)| *b == bus) {
                Some(&(_, v)) => Affine::var(v, 1.0),
                None => Affine::constant(s.theta[bus - 1]),
            }
        };
        let pg = |g: usize| -> Affine {
            match gens.iter().find(|(k, _)| *k == g) {
                Some(&(_, v)) => Affine::var(v, 1.0),
                None => Affine::constant(s.p_g[g]),
            }
        };
        let loads = case.loads();
        // load − generation + Σ flows out
        let residual = |bus: usize| -> Affine {
            let mut r = Affine::constant(loads[bus - 1]);
            for g in case.generators_at(bus) {
                r.add(&pg(g), -1.0);
            }
            for l in &case.lines {
                let sign = if l.from == bus {
                    1.0
                } else if l.to == bus {
                    -1.0
                } else {
                    continue;
                };
                let mut f = theta(l.from).scaled(l.susceptance_pu);
                f.add(&theta(l.to), -l.susceptance_pu);
                r.add(&f, sign);
            }
            r
        };

        let mut qb = QpBuilder::new(n);
        let mut constant = 0.0;
        for &(g, v) in &gens {
            let gen = &case.generators[g];
            qb.q[(v, v)] = 2.0 * gen.cost_c;
            qb.c[v] = gen.cost_b;
            constant += gen.cost_a;
        }
        for (i, &bus) in self.coupled.iter().enumerate() {
            let r = residual(bus);
            let dense = r.dense(n);
            qb.q += dense.clone() * dense.transpose() * gamma;
            qb.c += &dense * (lambda[i] + gamma * r.constant);
            constant += lambda[i] * r.constant + 0.5 * gamma * r.constant * r.constant;
        }
        // exact symmetry for the kernel's check
        qb.q = (&qb.q + qb.q.transpose()) * 0.5;

        let mut balance_rows = Vec::new();
        for &bus in buses.iter().filter(|b| !part.is_boundary(**b)) {
            let r = residual(bus);
            balance_rows.push((bus, qb.n_eq()));
            qb.eq(r.terms.iter().map(|&(v, c)| (v, -c)).collect(), r.constant);
        }
        for &(g, v) in &gens {
            qb.le(vec![(v, 1.0)], case.generators[g].p_max_pu);
        }
        for &(g, v) in &gens {
            qb.le(vec![(v, -1.0)], -case.generators[g].p_min_pu);
        }
        for li in part.internal_lines(case, area) {
            let l = &case.lines[li];
            let mut f = theta(l.from).scaled(l.susceptance_pu);
            f.add(&theta(l.to), -l.susceptance_pu);
            qb.le(f.terms.clone(), l.f_max_pu - f.constant);
            qb.le(f.terms.iter().map(|&(v, c)| (v, -c)).collect(), l.f_max_pu + f.constant);
        }
        let sum: Vec<(usize, f64)> = gens.iter().map(|&(_, v)| (v, 1.0)).collect();
        qb.le(sum.clone(), tb.f_max + tb.area_load);
        qb.le(sum.iter().map(|&(v, c)| (v, -c)).collect(), tb.f_max - tb.area_load);

        AreaQp { qp: qb.build(), constant, gens, angles, balance_rows }
    }

    /// Steps 1 and 2: minimize area `which` (0 or 1) with the other frozen.
    pub fn alr_step(&self, which: usize, s: &AlrState, lambda: &[f64], gamma: f64) -> Result<AreaStep, AlrError> {
        let AreaQp { qp, constant, gens, angles, balance_rows: rows } = self.area_qp(which, s, lambda, gamma);
        let sol = qp::solve(&qp)?;
        if sol.status != QpStatus::Optimal {
            return Err(AlrError::Subproblem { area: self.part.areas[which], status: sol.status });
        }
        let mut state = s.clone();
        for &(g, v) in &gens {
            state.p_g[g] = sol.x[v];
        }
        for &(b, v) in &angles {
            state.theta[b - 1] = sol.x[v];
        }
        Ok(AreaStep {
            state,
            objective: sol.objective + constant,
            prices: rows.iter().map(|&(b, r)| (b, -sol.eq_duals[r])).collect(),
        })
    }

    pub fn run(&self, p: &AlrParams) -> Result<AlrRun, AlrError> {
        p.validate()?;
        let start = Instant::now();
        let total_load = self.case.total_load();
        let mut lambda = p.lambda0.clone().unwrap_or_else(|| vec![0.0; self.coupled.len()]);
        if lambda.len() != self.coupled.len() {
            return Err(AlrError::Dimension { expected: self.coupled.len(), got: lambda.len() });
        }
        let mut state = self.initial_state();
        let mut trace = ConvergenceTrace {
            lambda_labels: self.coupled.clone(),
            mu_labels: Vec::new(),
            records: Vec::new(),
        };
        let mut norms: Vec<f64> = Vec::new();
        let mut oscillating_at = None;
        let mut best: Option<(f64, DispatchSolution)> = None;
        let mut last = None;

        for k in 1..=p.max_iter {
            let s1 = self.alr_step(0, &state, &lambda, p.gamma)?;
            let s2 = self.alr_step(1, &s1.state, &lambda, p.gamma)?;
            state = s2.state;
            let g = self.coupling_residual(&state);
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            let err = gen_load_error(&state.p_g, total_load);
            trace.records.push(TraceRecord {
                iter: k,
                mismatch_norm: norm,
                gen_load_error: err,
                objective: self.augmented_value(&state, &lambda, p.gamma),
                lambda: lambda.clone(),
                mu: Vec::new(),
                wall_time_s: start.elapsed().as_secs_f64(),
            });
            norms.push(norm);
            if oscillating_at.is_none() && stalled(&norms, OSCILLATION_WINDOW) {
                oscillating_at = Some(k);
            }

            let dispatch = self.dispatch(&state, &lambda, [&s1.prices, &s2.prices]);
            let met = match p.stop_rule {
                StopRule::GenLoadError => err < p.stop_tol,
                StopRule::MismatchNorm => norm < p.stop_tol,
                StopRule::FixedIterations => false,
            };
            if met {
                return Ok(AlrRun { solution: dispatch, trace, converged: true, iterations: k, lambda, oscillating_at });
            }
            if best.as_ref().is_none_or(|(e, _)| err < *e) {
                best = Some((err, dispatch.clone()));
            }
            last = Some((err, dispatch));
            if k < p.max_iter {
                lambda = update_lambda(&lambda, &g, p.alpha);
            }
        }
        let (last_err, last_dispatch) = last.expect("at least one iteration");
        let (converged, solution) = if p.stop_rule == StopRule::FixedIterations {
            (last_err < p.stop_tol, last_dispatch)
        } else {
            (false, best.expect("at least one iteration").1)
        };
        Ok(AlrRun { solution, trace, converged, iterations: p.max_iter, lambda, oscillating_at })
    }

    fn dispatch(&self, s: &AlrState, lambda: &[f64], prices: [&Vec<(usize, f64)>; 2]) -> DispatchSolution {
        let mut bus_prices = vec![0.0; self.case.n_buses()];
        for &(b, p) in prices.into_iter().flatten() {
            bus_prices[b - 1] = p;
        }
        for (i, &b) in self.coupled.iter().enumerate() {
            bus_prices[b - 1] = lambda[i];
        }
        DispatchSolution {
            p_g: s.p_g.clone(),
            theta: s.theta.clone(),
            flows: line_flows(self.case, &s.theta),
            objective_cost: self.case.cost(&s.p_g),
            bus_prices,
        }
    }
}

/// Step 3: `λ + α·g`.
pub fn update_lambda(lambda: &[f64], g: &[f64], alpha: f64) -> Vec<f64> {
    lambda.iter().zip(g).map(|(l, gi)| l + alpha * gi).collect()
}

/// True when the last `window` values never dropped below the value that
/// preceded them (relative slack 1e-6 absorbs rounding).
pub fn stalled(norms: &[f64], window: usize) -> bool {
    if window == 0 || norms.len() <= window {
        return false;
    }
    let k = norms.len() - 1;
    let start = norms[k - window];
    let low = norms[k - window + 1..=k].iter().copied().fold(f64::INFINITY, f64::min);
    low >= start * (1.0 - 1e-6)
}

pub fn run_alr(case: &NetworkCase, part: &Partition, p: &AlrParams) -> Result<AlrRun, AlrError> {
    AlrDecomposition::new(case, part)?.run(p)
}
