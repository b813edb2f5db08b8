//! Centralized dispatch: the whole network as one QP.
//!
//! Decision vector: every generator output, then the angle of every bus
//! except the slack. One balance row per bus, then generator bounds (all
//! upper rows, then all lower rows), then two one-sided rows per line.

use crate::case::NetworkCase;
use crate::qp::{self, QpBuilder, QpError, QpProblem, QpStatus};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchSolution {
    /// Per generator, in case order.
    pub p_g: Vec<f64>,
    /// Per bus, indexed by bus id − 1.
    pub theta: Vec<f64>,
    /// Per line, in case order, from → to.
    pub flows: Vec<f64>,
    pub objective_cost: f64,
    /// Locational marginal price per bus.
    pub bus_prices: Vec<f64>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ScedError {
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error("dispatch QP ended with status {0:?}")]
    NotOptimal(QpStatus),
}

#[derive(Debug, Clone)]
pub struct ScedQp {
    pub qp: QpProblem,
    /// Σ cost_a, kept out of the QP objective.
    pub constant: f64,
    pub n_gen: usize,
    /// Variable index of each bus angle; `None` for the slack.
    pub theta_var: Vec<Option<usize>>,
}

pub fn assemble_sced_qp(case: &NetworkCase) -> ScedQp {
    let n_gen = case.generators.len();
    let n_bus = case.n_buses();
    let mut theta_var = vec![None; n_bus];
    let mut next = n_gen;
    for (i, slot) in theta_var.iter_mut().enumerate() {
        if i + 1 != case.slack_bus {
            *slot = Some(next);
            next += 1;
        }
    }
    let mut qb = QpBuilder::new(next);
    for (k, g) in case.generators.iter().enumerate() {
        qb.q[(k, k)] = 2.0 * g.cost_c;
        qb.c[k] = g.cost_b;
    }
    let angle = |bus: usize, coef: f64, terms: &mut Vec<(usize, f64)>| {
        if let Some(v) = theta_var[bus - 1] {
            terms.push((v, coef));
        }
    };
    let loads = case.loads();
    for bus in 1..=n_bus {
        let mut terms: Vec<(usize, f64)> = case.generators_at(bus).map(|k| (k, 1.0)).collect();
        for l in &case.lines {
            // subtract the flow leaving `bus`
            if l.from == bus {
                angle(l.from, -l.susceptance_pu, &mut terms);
                angle(l.to, l.susceptance_pu, &mut terms);
            } else if l.to == bus {
                angle(l.to, -l.susceptance_pu, &mut terms);
                angle(l.from, l.susceptance_pu, &mut terms);
            }
        }
        qb.eq(terms, loads[bus - 1]);
    }
    for (k, g) in case.generators.iter().enumerate() {
        qb.le(vec![(k, 1.0)], g.p_max_pu);
    }
    for (k, g) in case.generators.iter().enumerate() {
        qb.le(vec![(k, -1.0)], -g.p_min_pu);
    }
    for l in &case.lines {
        let mut fwd = Vec::new();
        angle(l.from, l.susceptance_pu, &mut fwd);
        angle(l.to, -l.susceptance_pu, &mut fwd);
        let back = fwd.iter().map(|&(v, c)| (v, -c)).collect();
        qb.le(fwd, l.f_max_pu);
        qb.le(back, l.f_max_pu);
    }
    ScedQp {
        qp: qb.build(),
        constant: case.generators.iter().map(|g| g.cost_a).sum(),
        n_gen,
        theta_var,
    }
}

pub fn solve_centralized(case: &NetworkCase) -> Result<DispatchSolution, ScedError> {
    let sced = assemble_sced_qp(case);
    let sol = qp::solve(&sced.qp)?;
    if sol.status != QpStatus::Optimal {
        return Err(ScedError::NotOptimal(sol.status));
    }
    let p_g: Vec<f64> = sol.x.as_slice()[..sced.n_gen].to_vec();
    let theta: Vec<f64> = sced.theta_var.iter().map(|v| v.map_or(0.0, |i| sol.x[i])).collect();
    let flows = line_flows(case, &theta);
    Ok(DispatchSolution {
        objective_cost: case.cost(&p_g),
        p_g,
        theta,
        flows,
        bus_prices: sol.eq_duals.iter().map(|y| -y).collect(),
    })
}

/// `b·(θ_from − θ_to)` for every line.
pub fn line_flows(case: &NetworkCase, theta: &[f64]) -> Vec<f64> {
    case.lines
        .iter()
        .map(|l| l.susceptance_pu * (theta[l.from - 1] - theta[l.to - 1]))
        .collect()
}

/// Worst nodal balance residual `|P_G − load − Σ flows out|` over buses.
pub fn balance_residual(case: &NetworkCase, p_g: &[f64], flows: &[f64]) -> f64 {
    let mut r = case.loads().iter().map(|l| -l).collect::<Vec<_>>();
    for (g, p) in case.generators.iter().zip(p_g) {
        r[g.bus - 1] += p;
    }
    for (l, f) in case.lines.iter().zip(flows) {
        r[l.from - 1] -= f;
        r[l.to - 1] += f;
    }
    r.iter().fold(0.0, |m, v| m.max(v.abs()))
}
