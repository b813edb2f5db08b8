//! Dense convex QP kernel.
//!
//! Solves `min ½xᵀQx + cᵀx` subject to `Ax = b` and `Gx ≤ h` with a primal
//! active-set method. Every step is taken in the null space of the working
//! constraints, so a singular `Q` (zero-curvature directions) is accepted as
//! long as the problem stays bounded. A phase-1 LP finds the starting point
//! when the least-norm solution of `Ax = b` violates `Gx ≤ h`.
//!
//! Sign convention of the multipliers: at an optimum
//! `Qx + c + Aᵀy + Gᵀμ = 0` with `μ ≥ 0`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

/// Default optimality tolerance.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Relative eigenvalue cutoff used for rank decisions.
const RANK_EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub q: DMatrix<f64>,
    pub c: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    /// The objective is unbounded below on the feasible set.
    DualInfeasible,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub eq_duals: DVector<f64>,
    pub ineq_duals: DVector<f64>,
    pub objective: f64,
    pub status: QpStatus,
    pub iterations: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("Q is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("Q is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("problem data contains a non-finite value")]
    NonFinite,
}

/// Worst-case KKT violations of a candidate solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal_eq: f64,
    /// Largest positive part of `Gx - h`.
    pub primal_ineq: f64,
    /// Largest negative part of the inequality duals.
    pub dual_sign: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal_eq)
            .max(self.primal_ineq)
            .max(self.dual_sign)
            .max(self.complementarity)
    }
}

impl QpProblem {
    /// Problem with no constraints.
    pub fn unconstrained(q: DMatrix<f64>, c: DVector<f64>) -> Self {
        let n = c.len();
        QpProblem {
            q,
            c,
            a: DMatrix::zeros(0, n),
            b: DVector::zeros(0),
            g: DMatrix::zeros(0, n),
            h: DVector::zeros(0),
        }
    }

    pub fn with_eq(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a = a;
        self.b = b;
        self
    }

    pub fn with_ineq(mut self, g: DMatrix<f64>, h: DVector<f64>) -> Self {
        self.g = g;
        self.h = h;
        self
    }

    pub fn n_vars(&self) -> usize {
        self.c.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.c.dot(x)
    }

    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.c.len();
        let dim = |what: &str| Err(QpError::Dimension(what.to_string()));
        if self.q.nrows() != n || self.q.ncols() != n {
            return dim("Q must be n x n");
        }
        if self.a.ncols() != n || self.a.nrows() != self.b.len() {
            return dim("A must be m_eq x n with b of length m_eq");
        }
        if self.g.ncols() != n || self.g.nrows() != self.h.len() {
            return dim("G must be m_in x n with h of length m_in");
        }
        let finite = self.q.iter().all(|v| v.is_finite())
            && self.c.iter().all(|v| v.is_finite())
            && self.a.iter().all(|v| v.is_finite())
            && self.b.iter().all(|v| v.is_finite())
            && self.g.iter().all(|v| v.is_finite())
            && self.h.iter().all(|v| v.is_finite());
        if !finite {
            return Err(QpError::NonFinite);
        }
        let asym = (&self.q - self.q.transpose()).amax();
        if asym > 1e-12 {
            return Err(QpError::NotSymmetric(asym));
        }
        if n > 0 {
            let eig = SymmetricEigen::new(self.q.clone()).eigenvalues;
            let scale = eig.amax().max(1.0);
            let min = eig.min();
            if min < -RANK_EPS * scale {
                return Err(QpError::NotPsd(min));
            }
        }
        Ok(())
    }

    pub fn kkt_residuals(&self, sol: &QpSolution) -> KktResiduals {
        let x = &sol.x;
        let grad = &self.q * x
            + &self.c
            + self.a.transpose() * &sol.eq_duals
            + self.g.transpose() * &sol.ineq_duals;
        let ax = &self.a * x - &self.b;
        let gx = &self.g * x - &self.h;
        let mut comp: f64 = 0.0;
        for i in 0..gx.len() {
            comp = comp.max((sol.ineq_duals[i] * gx[i]).abs());
        }
        KktResiduals {
            stationarity: amax(&grad),
            primal_eq: amax(&ax),
            primal_ineq: gx.iter().fold(0.0_f64, |m, v| m.max(*v)),
            dual_sign: sol.ineq_duals.iter().fold(0.0_f64, |m, v| m.max(-*v)),
            complementarity: comp,
        }
    }
}

/// Row-by-row assembly of a [`QpProblem`] from sparse terms.
#[derive(Debug, Clone)]
pub struct QpBuilder {
    pub q: DMatrix<f64>,
    pub c: DVector<f64>,
    eq: Vec<(Vec<(usize, f64)>, f64)>,
    ineq: Vec<(Vec<(usize, f64)>, f64)>,
}

impl QpBuilder {
    pub fn new(n: usize) -> Self {
        QpBuilder { q: DMatrix::zeros(n, n), c: DVector::zeros(n), eq: Vec::new(), ineq: Vec::new() }
    }

    /// `Σ coef·x[var] = rhs`
    pub fn eq(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        self.eq.push((terms, rhs));
    }

    /// `Σ coef·x[var] ≤ rhs`
    pub fn le(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        self.ineq.push((terms, rhs));
    }

    pub fn n_eq(&self) -> usize {
        self.eq.len()
    }

    pub fn n_ineq(&self) -> usize {
        self.ineq.len()
    }

    pub fn build(self) -> QpProblem {
        let n = self.c.len();
        let dense = |rows: &[(Vec<(usize, f64)>, f64)]| {
            let mut m = DMatrix::zeros(rows.len(), n);
            let mut r = DVector::zeros(rows.len());
            for (i, (terms, rhs)) in rows.iter().enumerate() {
                for &(j, v) in terms {
                    m[(i, j)] += v;
                }
                r[i] = *rhs;
            }
            (m, r)
        };
        let (a, b) = dense(&self.eq);
        let (g, h) = dense(&self.ineq);
        QpProblem { q: self.q, c: self.c, a, b, g, h }
    }
}

fn amax(v: &DVector<f64>) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.amax()
    }
}

/// Default iteration cap, `10·(n + m)`.
pub fn default_max_iter(p: &QpProblem) -> usize {
    10 * (p.n_vars() + p.a.nrows() + p.g.nrows()).max(1)
}

/// Solve with the default tolerance and iteration cap.
pub fn solve(p: &QpProblem) -> Result<QpSolution, QpError> {
    solve_qp(p, DEFAULT_TOL, default_max_iter(p))
}

pub fn solve_qp(p: &QpProblem, tol: f64, max_iter: usize) -> Result<QpSolution, QpError> {
    p.validate()?;
    let n = p.n_vars();
    let m_eq = p.a.nrows();
    let m_in = p.g.nrows();
    let fail = |x: DVector<f64>, status, iterations| QpSolution {
        objective: p.objective(&x),
        x,
        eq_duals: DVector::zeros(m_eq),
        ineq_duals: DVector::zeros(m_in),
        status,
        iterations,
    };

    let x0 = if m_eq == 0 {
        DVector::zeros(n)
    } else {
        let svd = p.a.clone().svd(true, true);
        let cutoff = RANK_EPS * svd.singular_values.max().max(1.0);
        svd.solve(&p.b, cutoff).expect("svd computed with u and v")
    };
    let feas_tol = tol.max(1e-9 * (1.0 + amax(&p.b)));
    if m_eq > 0 && amax(&(&p.a * &x0 - &p.b)) > feas_tol {
        return Ok(fail(x0, QpStatus::Infeasible, 0));
    }

    let mut used = 0;
    let viol = (&p.g * &x0 - &p.h).iter().fold(0.0_f64, |m, v| m.max(*v));
    let start = if viol <= 1e-12 * (1.0 + amax(&p.h)) {
        x0
    } else {
        match phase_one(p, &x0, viol, max_iter) {
            Some((x, t, it)) => {
                used = it;
                if t > feas_tol {
                    return Ok(fail(x, QpStatus::Infeasible, used));
                }
                x
            }
            None => return Ok(fail(x0, QpStatus::IterationLimit, max_iter)),
        }
    };

    let out = active_set(p, start, max_iter.saturating_sub(used));
    Ok(QpSolution {
        iterations: out.iterations + used,
        ..out
    })
}

/// Minimize the largest violation `t` of `Gx ≤ h` subject to `Ax = b`.
fn phase_one(
    p: &QpProblem,
    x0: &DVector<f64>,
    t0: f64,
    max_iter: usize,
) -> Option<(DVector<f64>, f64, usize)> {
    let n = p.n_vars();
    let m_eq = p.a.nrows();
    let m_in = p.g.nrows();
    let mut c = DVector::zeros(n + 1);
    c[n] = 1.0;
    let mut a = DMatrix::zeros(m_eq, n + 1);
    a.view_mut((0, 0), (m_eq, n)).copy_from(&p.a);
    let mut g = DMatrix::zeros(m_in + 1, n + 1);
    g.view_mut((0, 0), (m_in, n)).copy_from(&p.g);
    for i in 0..m_in {
        g[(i, n)] = -1.0;
    }
    g[(m_in, n)] = -1.0;
    let mut h = DVector::zeros(m_in + 1);
    h.rows_mut(0, m_in).copy_from(&p.h);
    let aux = QpProblem {
        q: DMatrix::zeros(n + 1, n + 1),
        c,
        a,
        b: p.b.clone(),
        g,
        h,
    };
    let mut start = DVector::zeros(n + 1);
    start.rows_mut(0, n).copy_from(x0);
    start[n] = t0;
    let out = active_set(&aux, start, max_iter);
    match out.status {
        QpStatus::Optimal => Some((out.x.rows(0, n).into_owned(), out.x[n].max(0.0), out.iterations)),
        _ => None,
    }
}

/// Orthonormal basis of the null space of the rows of `m` (n x k result).
fn null_space(m: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    if m.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    let gram = m.transpose() * m;
    let eig = SymmetricEigen::new(gram);
    let cut = RANK_EPS * eig.eigenvalues.amax().max(1.0);
    let cols: Vec<usize> = (0..n).filter(|&j| eig.eigenvalues[j] <= cut).collect();
    let mut z = DMatrix::zeros(n, cols.len());
    for (k, &j) in cols.iter().enumerate() {
        z.set_column(k, &eig.eigenvectors.column(j));
    }
    z
}

fn working_matrix(p: &QpProblem, work: &[usize]) -> DMatrix<f64> {
    let n = p.n_vars();
    let m_eq = p.a.nrows();
    let mut m = DMatrix::zeros(m_eq + work.len(), n);
    m.view_mut((0, 0), (m_eq, n)).copy_from(&p.a);
    for (k, &i) in work.iter().enumerate() {
        m.set_row(m_eq + k, &p.g.row(i));
    }
    m
}

/// Primal active-set loop from a feasible start.
fn active_set(p: &QpProblem, mut x: DVector<f64>, max_iter: usize) -> QpSolution {
    let n = p.n_vars();
    let m_eq = p.a.nrows();
    let m_in = p.g.nrows();
    let mut work: Vec<usize> = Vec::new();
    let mut iterations = 0;

    loop {
        if iterations >= max_iter {
            return QpSolution {
                objective: p.objective(&x),
                x,
                eq_duals: DVector::zeros(m_eq),
                ineq_duals: DVector::zeros(m_in),
                status: QpStatus::IterationLimit,
                iterations,
            };
        }
        iterations += 1;

        let wm = working_matrix(p, &work);
        let z = null_space(&wm, n);
        let grad = &p.q * &x + &p.c;
        let gscale = 1.0 + amax(&grad);

        if z.ncols() > 0 {
            let gz = z.transpose() * &grad;
            if gz.amax() > 1e-12 * gscale {
                let hess = z.transpose() * &p.q * &z;
                let eig = SymmetricEigen::new(hess);
                let cut = RANK_EPS * eig.eigenvalues.amax().max(1.0);
                let w = eig.eigenvectors.transpose() * &gz;
                let flat: Vec<usize> = (0..w.len()).filter(|&j| eig.eigenvalues[j] <= cut).collect();
                let flat_norm = flat.iter().map(|&j| w[j] * w[j]).sum::<f64>().sqrt();

                let (pz, bounded) = if flat_norm > 1e-12 * gscale {
                    // Zero-curvature descent: the objective falls linearly along it.
                    let mut pz = DVector::zeros(w.len());
                    for &j in &flat {
                        pz -= eig.eigenvectors.column(j) * w[j];
                    }
                    (pz, false)
                } else {
                    let mut pz = DVector::zeros(w.len());
                    for j in 0..w.len() {
                        if eig.eigenvalues[j] > cut {
                            pz -= eig.eigenvectors.column(j) * (w[j] / eig.eigenvalues[j]);
                        }
                    }
                    (pz, true)
                };
                let d = &z * pz;
                let dnorm = d.norm();

                let mut step = if bounded { 1.0 } else { f64::INFINITY };
                let mut block = None;
                for i in 0..m_in {
                    if work.contains(&i) {
                        continue;
                    }
                    let row = p.g.row(i);
                    let gd = row.dot(&d.transpose());
                    if gd <= 1e-12 * row.norm() * dnorm {
                        continue;
                    }
                    let slack = (p.h[i] - row.dot(&x.transpose())).max(0.0);
                    let alpha = slack / gd;
                    if alpha < step {
                        step = alpha;
                        block = Some(i);
                    }
                }
                if step.is_infinite() {
                    return QpSolution {
                        objective: f64::NEG_INFINITY,
                        x,
                        eq_duals: DVector::zeros(m_eq),
                        ineq_duals: DVector::zeros(m_in),
                        status: QpStatus::DualInfeasible,
                        iterations,
                    };
                }
                x += &d * step;
                if let Some(i) = block {
                    work.push(i);
                    continue;
                }
                if !bounded {
                    continue;
                }
            }
        }

        // Multipliers of the working set: least squares on stationarity.
        let grad = &p.q * &x + &p.c;
        let gscale = 1.0 + amax(&grad);
        let (y, mu_w) = if wm.nrows() == 0 {
            (DVector::zeros(0), DVector::zeros(0))
        } else {
            let svd = wm.transpose().svd(true, true);
            let cutoff = RANK_EPS * svd.singular_values.max().max(1.0);
            let sol = svd.solve(&(-&grad), cutoff).expect("svd computed with u and v");
            (sol.rows(0, m_eq).into_owned(), sol.rows(m_eq, work.len()).into_owned())
        };

        let mut drop: Option<(usize, f64)> = None;
        for (k, &i) in work.iter().enumerate() {
            let v = mu_w[k];
            if v < -1e-10 * gscale {
                let better = match drop {
                    None => true,
                    Some((kk, best)) => v < best || (v == best && i < work[kk]),
                };
                if better {
                    drop = Some((k, v));
                }
            }
        }
        if let Some((k, _)) = drop {
            work.remove(k);
            continue;
        }

        let mut ineq_duals = DVector::zeros(m_in);
        for (k, &i) in work.iter().enumerate() {
            ineq_duals[i] = mu_w[k].max(0.0);
        }
        let eq_duals = if m_eq == 0 { DVector::zeros(0) } else { y };
        return QpSolution {
            objective: p.objective(&x),
            x,
            eq_duals,
            ineq_duals,
            status: QpStatus::Optimal,
            iterations,
        };
    }
}
