//! Lagrangian relaxation across areas.
//!
//! Coupling constraints are the balance equations of boundary buses and the
//! flow limit of every tie-line. Each tie-line flow `F` becomes a variable
//! owned by the area of its `from` bus and bounded there by `|F| ≤ f_max`;
//! the identity `F = b(θ_from − θ_to)` is dropped from the subproblems, so
//! every area problem only sees its own variables and the relaxed problem
//! is an exact lower bound of the full dispatch for any multipliers.
//!
//! Angles of an area other than the one holding the slack bus are measured
//! from the boundary bus where its entry tie-line lands, pinned to the
//! stitched angle of that bus from the previous iteration. After each
//! iteration the area angle sets are shifted so that the entry tie-line
//! carries exactly `F = b(θ_from − θ_to)`.

use crate::affine::Affine;
use crate::case::{NetworkCase, Partition};
use crate::centralized::DispatchSolution;
use crate::qp::{self, QpBuilder, QpError, QpProblem, QpSolution, QpStatus};
use crate::trace::{gen_load_error, ConvergenceTrace, StopRule, TraceRecord};
use std::collections::{BTreeMap, VecDeque};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct LrParams {
    pub step_a: f64,
    pub step_b: f64,
    /// One entry per boundary bus, ascending bus id. `None` means zeros.
    pub lambda0: Option<Vec<f64>>,
    /// One entry per tie-line. `None` means zeros.
    pub mu0: Option<Vec<f64>>,
    pub stop_tol: f64,
    pub max_iter: usize,
    pub stop_rule: StopRule,
}

impl Default for LrParams {
    fn default() -> Self {
        LrParams {
            step_a: 3.0,
            step_b: 0.2,
            lambda0: None,
            mu0: None,
            stop_tol: 0.01,
            max_iter: 1000,
            stop_rule: StopRule::GenLoadError,
        }
    }
}

impl LrParams {
    pub fn validate(&self) -> Result<(), LrError> {
        if !(self.step_a > 0.0) {
            return Err(LrError::Params("step_a must be > 0".into()));
        }
        if !(self.step_b >= 0.0) {
            return Err(LrError::Params("step_b must be >= 0".into()));
        }
        if !(self.stop_tol > 0.0) {
            return Err(LrError::Params("stop_tol must be > 0".into()));
        }
        if self.max_iter == 0 {
            return Err(LrError::Params("max_iter must be >= 1".into()));
        }
        Ok(())
    }

    /// `k(v) = 1 / (a + b·v)`
    pub fn step(&self, v: usize) -> f64 {
        1.0 / (self.step_a + self.step_b * v as f64)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LrError {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("multiplier vector has length {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("mismatch vector is zero; the coupling constraints already hold")]
    ZeroMismatch,
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error("area {area} subproblem ended with status {status:?}")]
    Subproblem { area: usize, status: QpStatus },
}

/// Constraints an area keeps for itself.
#[derive(Debug, Clone, PartialEq)]
pub struct AreaConstraints {
    pub area: usize,
    /// Buses whose balance row stays in the area (non-boundary buses).
    pub balance_buses: Vec<usize>,
    /// Lines internal to the area (limits kept locally).
    pub lines: Vec<usize>,
    pub generators: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSet {
    /// Boundary buses whose balance is relaxed, ascending.
    pub equalities: Vec<usize>,
    /// Tie-lines whose limit is relaxed, by case line index.
    pub inequalities: Vec<usize>,
    pub areas: Vec<AreaConstraints>,
}

pub fn classify_constraints(case: &NetworkCase, part: &Partition) -> CouplingSet {
    let areas = part
        .areas
        .iter()
        .map(|&a| AreaConstraints {
            area: a,
            balance_buses: part.area_buses(a).into_iter().filter(|b| !part.is_boundary(*b)).collect(),
            lines: part.internal_lines(case, a),
            generators: part.area_generators(case, a),
        })
        .collect();
    CouplingSet {
        equalities: part.boundary_buses.clone(),
        inequalities: part.tie_lines.clone(),
        areas,
    }
}

/// Subgradient `s = [g; h]`: `load − gen + Σ flows out` at every boundary
/// bus, then `max(0, |F| − f_max)` for every tie-line.
pub fn coupling_mismatch(case: &NetworkCase, coupling: &CouplingSet, p_g: &[f64], flows: &[f64]) -> Vec<f64> {
    let loads = case.loads();
    let mut s = Vec::with_capacity(coupling.equalities.len() + coupling.inequalities.len());
    for &bus in &coupling.equalities {
        let mut r = loads[bus - 1];
        for g in case.generators_at(bus) {
            r -= p_g[g];
        }
        for (l, f) in case.lines.iter().zip(flows) {
            if l.from == bus {
                r += f;
            } else if l.to == bus {
                r -= f;
            }
        }
        s.push(r);
    }
    for &t in &coupling.inequalities {
        s.push((flows[t].abs() - case.lines[t].f_max_pu).max(0.0));
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierState {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    /// Iteration counter `v`, starting at 1.
    pub iteration: usize,
}

/// One normalized subgradient step, `[λ; μ] += k(v)·s/‖s‖`, then `μ ≥ 0`.
pub fn update_multipliers(ms: &MultiplierState, s: &[f64], p: &LrParams) -> Result<MultiplierState, LrError> {
    let n_eq = ms.lambda.len();
    if s.len() != n_eq + ms.mu.len() {
        return Err(LrError::Dimension { expected: n_eq + ms.mu.len(), got: s.len() });
    }
    let norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return Err(LrError::ZeroMismatch);
    }
    let k = p.step(ms.iteration);
    let lambda = ms.lambda.iter().zip(s).map(|(l, si)| l + k * si / norm).collect();
    let mu = ms.mu.iter().zip(&s[n_eq..]).map(|(m, si)| (m + k * si / norm).max(0.0)).collect();
    Ok(MultiplierState { lambda, mu, iteration: ms.iteration + 1 })
}

/// Where each variable of an area subproblem lives.
#[derive(Debug, Clone, PartialEq)]
pub struct AreaLayout {
    pub area: usize,
    /// (generator index, variable)
    pub gens: Vec<(usize, usize)>,
    /// (bus id, variable); the reference bus is absent.
    pub angles: Vec<(usize, usize)>,
    pub reference_bus: usize,
    pub reference_angle: f64,
    /// (tie line index, flow variable) for ties owned by this area.
    pub ties: Vec<(usize, usize)>,
    /// Row of each non-boundary bus balance in the equality block.
    pub balance_rows: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct AreaSubproblem {
    pub qp: QpProblem,
    /// Constant part of the area Lagrangian.
    pub constant: f64,
    pub layout: AreaLayout,
}

impl AreaSubproblem {
    fn angle(&self, x: &nalgebra::DVector<f64>, bus: usize) -> f64 {
        self.layout
            .angles
            .iter()
            .find(|(b, _)| *b == bus)
            .map_or(self.layout.reference_angle, |&(_, v)| x[v])
    }
}

/// Outcome of one full iteration (all areas solved, nothing updated yet).
#[derive(Debug, Clone)]
pub struct LrIterate {
    pub dispatch: DispatchSolution,
    /// Boundary-balance residuals then tie-limit violations.
    pub mismatch: Vec<f64>,
    pub dual_value: f64,
    /// Per-area Lagrangian values, in partition area order.
    pub area_objectives: Vec<f64>,
    /// Stitched angle of every boundary bus.
    pub boundary_angles: BTreeMap<usize, f64>,
    /// Tie flows by case line index.
    pub tie_flows: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone)]
pub struct LrRun {
    /// The converged iterate, or the one with the smallest error.
    pub solution: DispatchSolution,
    pub trace: ConvergenceTrace,
    pub converged: bool,
    pub iterations: usize,
    pub multipliers: MultiplierState,
}

/// Precomputed structure of an LR decomposition.
#[derive(Debug, Clone)]
pub struct LrDecomposition<'a> {
    pub case: &'a NetworkCase,
    pub part: &'a Partition,
    pub coupling: CouplingSet,
    /// Area order used for stitching: root first, then breadth-first.
    order: Vec<usize>,
    /// Reference bus of each area and, for non-root areas, the entry tie.
    reference: BTreeMap<usize, (usize, Option<usize>)>,
}

impl<'a> LrDecomposition<'a> {
    pub fn new(case: &'a NetworkCase, part: &'a Partition) -> Self {
        let coupling = classify_constraints(case, part);
        let root = part.area_of[&case.slack_bus];
        let mut reference = BTreeMap::from([(root, (case.slack_bus, None))]);
        let mut order = vec![root];
        let mut queue = VecDeque::from([root]);
        while let Some(a) = queue.pop_front() {
            for &t in &part.tie_lines {
                let l = &case.lines[t];
                let (fa, ta) = (part.area_of[&l.from], part.area_of[&l.to]);
                let entry = if fa == a && !reference.contains_key(&ta) {
                    Some((ta, l.to))
                } else if ta == a && !reference.contains_key(&fa) {
                    Some((fa, l.from))
                } else {
                    None
                };
                if let Some((next, bus)) = entry {
                    reference.insert(next, (bus, Some(t)));
                    order.push(next);
                    queue.push_back(next);
                }
            }
        }
        LrDecomposition { case, part, coupling, order, reference }
    }

    pub fn n_lambda(&self) -> usize {
        self.coupling.equalities.len()
    }

    pub fn n_mu(&self) -> usize {
        self.coupling.inequalities.len()
    }

    fn lambda_index(&self, bus: usize) -> usize {
        self.coupling.equalities.binary_search(&bus).expect("boundary bus")
    }

    /// Area that carries the flow variable of tie `t`.
    pub fn owner(&self, t: usize) -> usize {
        self.part.area_of[&self.case.lines[t].from]
    }

    pub fn initial_state(&self, p: &LrParams) -> Result<MultiplierState, LrError> {
        let lambda = p.lambda0.clone().unwrap_or_else(|| vec![0.0; self.n_lambda()]);
        let mu = p.mu0.clone().unwrap_or_else(|| vec![0.0; self.n_mu()]);
        if lambda.len() != self.n_lambda() {
            return Err(LrError::Dimension { expected: self.n_lambda(), got: lambda.len() });
        }
        if mu.len() != self.n_mu() {
            return Err(LrError::Dimension { expected: self.n_mu(), got: mu.len() });
        }
        Ok(MultiplierState { lambda, mu: mu.into_iter().map(|m| m.max(0.0)).collect(), iteration: 1 })
    }

    pub fn build_area_subproblem(
        &self,
        area: usize,
        ms: &MultiplierState,
        boundary_angles: &BTreeMap<usize, f64>,
    ) -> AreaSubproblem {
        let case = self.case;
        let part = self.part;
        let ac = self.coupling.areas.iter().find(|c| c.area == area).expect("known area");
        let (ref_bus, entry) = self.reference[&area];
        let ref_angle = if entry.is_some() { boundary_angles.get(&ref_bus).copied().unwrap_or(0.0) } else { 0.0 };

        let mut n = 0;
        let gens: Vec<(usize, usize)> = ac.generators.iter().map(|&g| (g, post_inc(&mut n))).collect();
        let angles: Vec<(usize, usize)> = part
            .area_buses(area)
            .into_iter()
            .filter(|&b| b != ref_bus)
            .map(|b| (b, post_inc(&mut n)))
            .collect();
        let owned: Vec<usize> = self.coupling.inequalities.iter().copied().filter(|&t| self.owner(t) == area).collect();
        let ties: Vec<(usize, usize)> = owned.iter().map(|&t| (t, post_inc(&mut n))).collect();
        let priced: Vec<(usize, usize)> = ties
            .iter()
            .filter(|(t, _)| ms.mu[self.tie_index(*t)] > 0.0)
            .map(|&(t, _)| (t, post_inc(&mut n)))
            .collect();

        let theta = |bus: usize| -> Affine {
            match angles.iter().find(|(b, _)| *b == bus) {
                Some(&(_, v)) => Affine::var(v, 1.0),
                None => Affine::constant(ref_angle),
            }
        };
        let flow = |line: usize| -> Affine {
            let l = &case.lines[line];
            let mut f = theta(l.from).scaled(l.susceptance_pu);
            f.add(&theta(l.to), -l.susceptance_pu);
            f
        };
        // load − generation + Σ internal flows out, at `bus`
        let residual = |bus: usize| -> Affine {
            let mut r = Affine::constant(case.loads()[bus - 1]);
            for &(g, v) in &gens {
                if case.generators[g].bus == bus {
                    r.add(&Affine::var(v, 1.0), -1.0);
                }
            }
            for &li in &ac.lines {
                let l = &case.lines[li];
                if l.from == bus {
                    r.add(&flow(li), 1.0);
                } else if l.to == bus {
                    r.add(&flow(li), -1.0);
                }
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
        for &bus in part.area_buses(area).iter().filter(|b| part.is_boundary(**b)) {
            let lam = ms.lambda[self.lambda_index(bus)];
            let r = residual(bus);
            for &(v, c) in &r.terms {
                qb.c[v] += lam * c;
            }
            constant += lam * r.constant;
        }
        for &(t, v) in &ties {
            let l = &case.lines[t];
            qb.c[v] += ms.lambda[self.lambda_index(l.from)] - ms.lambda[self.lambda_index(l.to)];
            constant -= ms.mu[self.tie_index(t)] * l.f_max_pu;
        }
        for &(t, v) in &priced {
            qb.c[v] += ms.mu[self.tie_index(t)];
        }

        let mut balance_rows = Vec::new();
        for &bus in &ac.balance_buses {
            let r = residual(bus);
            balance_rows.push((bus, qb.n_eq()));
            // −(load − gen + out) = 0  ⇔  gen − out = load
            let terms = r.terms.iter().map(|&(v, c)| (v, -c)).collect();
            qb.eq(terms, r.constant);
        }
        for &(g, v) in &gens {
            qb.le(vec![(v, 1.0)], case.generators[g].p_max_pu);
        }
        for &(g, v) in &gens {
            qb.le(vec![(v, -1.0)], -case.generators[g].p_min_pu);
        }
        for &li in &ac.lines {
            let f = flow(li);
            let fmax = case.lines[li].f_max_pu;
            qb.le(f.terms.clone(), fmax - f.constant);
            qb.le(f.terms.iter().map(|&(v, c)| (v, -c)).collect(), fmax + f.constant);
        }
        for &(t, v) in &ties {
            let fmax = case.lines[t].f_max_pu;
            qb.le(vec![(v, 1.0)], fmax);
            qb.le(vec![(v, -1.0)], fmax);
        }
        for (&(_, fv), &(_, tv)) in ties.iter().filter(|(t, _)| ms.mu[self.tie_index(*t)] > 0.0).zip(&priced) {
            qb.le(vec![(fv, 1.0), (tv, -1.0)], 0.0);
            qb.le(vec![(fv, -1.0), (tv, -1.0)], 0.0);
        }

        AreaSubproblem {
            qp: qb.build(),
            constant,
            layout: AreaLayout {
                area,
                gens,
                angles,
                reference_bus: ref_bus,
                reference_angle: ref_angle,
                ties,
                balance_rows,
            },
        }
    }

    fn tie_index(&self, t: usize) -> usize {
        self.coupling.inequalities.iter().position(|&x| x == t).expect("tie line")
    }

    fn solve_area(&self, sub: &AreaSubproblem) -> Result<QpSolution, LrError> {
        let sol = qp::solve(&sub.qp)?;
        if sol.status != QpStatus::Optimal {
            return Err(LrError::Subproblem { area: sub.layout.area, status: sol.status });
        }
        Ok(sol)
    }

    /// Solve every area and assemble the stitched iterate.
    pub fn iterate(&self, ms: &MultiplierState, boundary_angles: &BTreeMap<usize, f64>) -> Result<LrIterate, LrError> {
        let case = self.case;
        let part = self.part;
        let mut solved = BTreeMap::new();
        for &a in &part.areas {
            let sub = self.build_area_subproblem(a, ms, boundary_angles);
            let sol = self.solve_area(&sub)?;
            solved.insert(a, (sub, sol));
        }

        let mut p_g = vec![0.0; case.generators.len()];
        let mut tie_flows = BTreeMap::new();
        let mut local_theta = vec![0.0; case.n_buses()];
        let mut prices = vec![0.0; case.n_buses()];
        let mut area_objectives = Vec::new();
        for &a in &part.areas {
            let (sub, sol) = &solved[&a];
            for &(g, v) in &sub.layout.gens {
                p_g[g] = sol.x[v];
            }
            for &(t, v) in &sub.layout.ties {
                tie_flows.insert(t, sol.x[v]);
            }
            for b in part.area_buses(a) {
                local_theta[b - 1] = sub.angle(&sol.x, b);
            }
            for &(bus, row) in &sub.layout.balance_rows {
                prices[bus - 1] = -sol.eq_duals[row];
            }
            area_objectives.push(sol.objective + sub.constant);
        }

        let mut theta = local_theta.clone();
        for &a in &self.order {
            let (bus, entry) = self.reference[&a];
            let Some(t) = entry else { continue };
            let l = &case.lines[t];
            let f = tie_flows[&t];
            let want = if l.to == bus {
                theta[l.from - 1] - f / l.susceptance_pu
            } else {
                theta[l.to - 1] + f / l.susceptance_pu
            };
            let shift = want - local_theta[bus - 1];
            for b in part.area_buses(a) {
                theta[b - 1] = local_theta[b - 1] + shift;
            }
        }

        let mut flows = crate::centralized::line_flows(case, &theta);
        for (&t, &f) in &tie_flows {
            flows[t] = f;
        }
        let mismatch = coupling_mismatch(case, &self.coupling, &p_g, &flows);
        for &bus in &self.coupling.equalities {
            prices[bus - 1] = ms.lambda[self.lambda_index(bus)];
        }

        let dispatch = DispatchSolution {
            objective_cost: case.cost(&p_g),
            p_g,
            theta: theta.clone(),
            flows,
            bus_prices: prices,
        };
        Ok(LrIterate {
            dispatch,
            mismatch,
            dual_value: area_objectives.iter().sum(),
            area_objectives,
            boundary_angles: self.coupling.equalities.iter().map(|&b| (b, theta[b - 1])).collect(),
            tie_flows,
        })
    }

    pub fn run(&self, p: &LrParams) -> Result<LrRun, LrError> {
        p.validate()?;
        let start = Instant::now();
        let total_load = self.case.total_load();
        let mut ms = self.initial_state(p)?;
        let mut boundary_angles: BTreeMap<usize, f64> = self.coupling.equalities.iter().map(|&b| (b, 0.0)).collect();
        let mut trace = ConvergenceTrace {
            lambda_labels: self.coupling.equalities.clone(),
            mu_labels: self.coupling.inequalities.iter().map(|t| t + 1).collect(),
            records: Vec::new(),
        };
        let mut best: Option<(f64, DispatchSolution)> = None;
        let mut last = None;

        for v in 1..=p.max_iter {
            let it = self.iterate(&ms, &boundary_angles)?;
            let norm = it.mismatch.iter().map(|x| x * x).sum::<f64>().sqrt();
            let err = gen_load_error(&it.dispatch.p_g, total_load);
            trace.records.push(TraceRecord {
                iter: v,
                mismatch_norm: norm,
                gen_load_error: err,
                objective: it.dual_value,
                lambda: ms.lambda.clone(),
                mu: ms.mu.clone(),
                wall_time_s: start.elapsed().as_secs_f64(),
            });
            let zero = norm < 1e-12;
            let met = match p.stop_rule {
                StopRule::GenLoadError => err < p.stop_tol || zero,
                StopRule::MismatchNorm => norm < p.stop_tol || zero,
                StopRule::FixedIterations => false,
            };
            if met {
                return Ok(LrRun { solution: it.dispatch, trace, converged: true, iterations: v, multipliers: ms });
            }
            if best.as_ref().is_none_or(|(e, _)| err < *e) {
                best = Some((err, it.dispatch.clone()));
            }
            boundary_angles = it.boundary_angles;
            if v < p.max_iter {
                if zero {
                    ms.iteration += 1;
                } else {
                    ms = update_multipliers(&ms, &it.mismatch, p)?;
                }
            }
            last = Some((err, it.dispatch));
        }
        let (last_err, last_dispatch) = last.expect("at least one iteration");
        let (converged, solution) = if p.stop_rule == StopRule::FixedIterations {
            (last_err < p.stop_tol, last_dispatch)
        } else {
            (false, best.expect("at least one iteration").1)
        };
        Ok(LrRun { solution, trace, converged, iterations: p.max_iter, multipliers: ms })
    }
}

fn post_inc(n: &mut usize) -> usize {
    *n += 1;
    *n - 1
}

pub fn run_lr(case: &NetworkCase, part: &Partition, p: &LrParams) -> Result<LrRun, LrError> {
    LrDecomposition::new(case, part).run(p)
}
