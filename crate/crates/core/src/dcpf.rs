//! Lossless DC power flow: `F_ij = B_ij (θ_i − θ_j)`.

use crate::case::NetworkCase;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// A bus pair with all parallel lines merged into one susceptance.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub susceptance_pu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnglesSolution {
    /// Radians, indexed by bus id − 1.
    pub theta: Vec<f64>,
    pub branches: Vec<Branch>,
    /// Flow on each merged branch, from → to.
    pub flows: Vec<f64>,
}

#[derive(Debug, Error, PartialEq)]
pub enum DcpfError {
    #[error("expected {expected} injections, got {got}")]
    Length { expected: usize, got: usize },
    #[error("injections sum to {0:e}, not zero")]
    Unbalanced(f64),
    #[error("reduced susceptance matrix is singular (network not connected)")]
    Singular,
}

/// Merge parallel lines; orientation follows the first line seen for a pair.
pub fn merged_branches(case: &NetworkCase) -> Vec<Branch> {
    let mut out: Vec<Branch> = Vec::new();
    for l in &case.lines {
        match out
            .iter_mut()
            .find(|b| (b.from, b.to) == (l.from, l.to) || (b.from, b.to) == (l.to, l.from))
        {
            Some(b) => b.susceptance_pu += l.susceptance_pu,
            None => out.push(Branch { from: l.from, to: l.to, susceptance_pu: l.susceptance_pu }),
        }
    }
    out
}

/// Full (unreduced) nodal susceptance matrix.
pub fn build_b_matrix(case: &NetworkCase) -> DMatrix<f64> {
    let n = case.n_buses();
    let mut b = DMatrix::zeros(n, n);
    for l in &case.lines {
        let (i, j, s) = (l.from - 1, l.to - 1, l.susceptance_pu);
        b[(i, i)] += s;
        b[(j, j)] += s;
        b[(i, j)] -= s;
        b[(j, i)] -= s;
    }
    b
}

/// Solve for angles given net injections (generation minus load) per bus.
pub fn solve_dcpf(case: &NetworkCase, injections: &[f64]) -> Result<AnglesSolution, DcpfError> {
    let n = case.n_buses();
    if injections.len() != n {
        return Err(DcpfError::Length { expected: n, got: injections.len() });
    }
    let total: f64 = injections.iter().sum();
    if total.abs() > 1e-9 {
        return Err(DcpfError::Unbalanced(total));
    }
    let all: Vec<usize> = (1..=n).collect();
    if !crate::case::connected(&all, case.lines.iter().map(|l| (l.from, l.to))) {
        return Err(DcpfError::Singular);
    }
    let slack = case.slack_bus - 1;
    let keep: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
    let b = build_b_matrix(case);
    let reduced = DMatrix::from_fn(keep.len(), keep.len(), |r, c| b[(keep[r], keep[c])]);
    let rhs = DVector::from_iterator(keep.len(), keep.iter().map(|&i| injections[i]));
    let mut theta = vec![0.0; n];
    if !keep.is_empty() {
        let chol = reduced.cholesky().ok_or(DcpfError::Singular)?;
        let sol = chol.solve(&rhs);
        for (k, &i) in keep.iter().enumerate() {
            theta[i] = sol[k];
        }
    }
    let branches = merged_branches(case);
    let flows = branches
        .iter()
        .map(|br| br.susceptance_pu * (theta[br.from - 1] - theta[br.to - 1]))
        .collect();
    Ok(AnglesSolution { theta, branches, flows })
}

impl AnglesSolution {
    /// Flow from `i` to `j`, if the two buses are connected.
    pub fn flow(&self, i: usize, j: usize) -> Option<f64> {
        self.branches.iter().zip(&self.flows).find_map(|(b, f)| {
            if (b.from, b.to) == (i, j) {
                Some(*f)
            } else if (b.from, b.to) == (j, i) {
                Some(-*f)
            } else {
                None
            }
        })
    }

    /// Sum of flows leaving `bus`.
    pub fn net_outflow(&self, bus: usize) -> f64 {
        self.branches
            .iter()
            .zip(&self.flows)
            .map(|(b, f)| {
                if b.from == bus {
                    *f
                } else if b.to == bus {
                    -*f
                } else {
                    0.0
                }
            })
            .sum()
    }
}
