//! Random instance generators and brute-force grid oracles.
//!
//! Shared with the acceptance target of the bench crate through a `#[path]`
//! include, so nothing here may depend on dev-only crates other than `rand`.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use sced_core::case::{Bus, Generator, Line, NetworkCase};
use sced_core::qp::QpProblem;

pub const GRID_STEP: f64 = 1e-3;

fn lattice(v: f64) -> f64 {
    (v / GRID_STEP).round() * GRID_STEP
}

/// A convex QP over the unit box whose equality rows each carry one pivot
/// variable with coefficient 1 (before scaling), so the free variables
/// parametrize the feasible set.
#[derive(Debug, Clone)]
pub struct BoxQp {
    pub problem: QpProblem,
    /// Free (gridded) variables.
    pub free: Vec<usize>,
    /// (pivot variable, rhs, [(free var, coef)]) so `x_p = rhs − Σ coef·x_f`.
    pub rows: Vec<(usize, f64, Vec<(usize, f64)>)>,
}

pub fn random_box_qp<R: Rng>(rng: &mut R) -> BoxQp {
    let n = rng.gen_range(1..=5usize);
    let m_lo = n.saturating_sub(3);
    let m_hi = 2.min(n - 1).max(m_lo);
    let m = rng.gen_range(m_lo..=m_hi);

    let mut vars: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        vars.swap(i, j);
    }
    let pivots: Vec<usize> = vars[..m].to_vec();
    let mut free: Vec<usize> = vars[m..].to_vec();
    free.sort_unstable();

    let x0: Vec<f64> = (0..n).map(|_| lattice(rng.gen_range(0.3..0.7))).collect();
    let choices = [-1.0, -0.5, 0.5, 1.0];
    let mut rows = Vec::new();
    let mut a = DMatrix::zeros(m, n);
    let mut b = DVector::zeros(m);
    for (r, &p) in pivots.iter().enumerate() {
        let mut coefs: Vec<(usize, f64)> = Vec::new();
        for &f in &free {
            if rng.gen_bool(0.7) {
                coefs.push((f, choices[rng.gen_range(0..4)]));
            }
        }
        let rhs = x0[p] + coefs.iter().map(|&(f, c)| c * x0[f]).sum::<f64>();
        let scale = rng.gen_range(0.5..2.0);
        a[(r, p)] = scale;
        for &(f, c) in &coefs {
            a[(r, f)] = scale * c;
        }
        b[r] = scale * rhs;
        rows.push((p, rhs, coefs));
    }

    let mm = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let mut q = mm.transpose() * &mm + DMatrix::identity(n, n) * 0.5;
    q = (&q + q.transpose()) * 0.5;
    let c = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));

    let mut g = DMatrix::zeros(2 * n, n);
    let mut h = DVector::zeros(2 * n);
    for i in 0..n {
        g[(i, i)] = 1.0;
        h[i] = 1.0;
        g[(n + i, i)] = -1.0;
    }
    let problem = QpProblem::unconstrained(q, c).with_eq(a, b).with_ineq(g, h);
    BoxQp { problem, free, rows }
}

impl BoxQp {
    /// Complete a point from its free coordinates; `None` if outside the box.
    pub fn complete(&self, free_vals: &[f64]) -> Option<DVector<f64>> {
        let n = self.problem.n_vars();
        let mut x = DVector::zeros(n);
        for (&f, &v) in self.free.iter().zip(free_vals) {
            x[f] = v;
        }
        for (p, rhs, coefs) in &self.rows {
            let v = rhs - coefs.iter().map(|&(f, c)| c * x[f]).sum::<f64>();
            if !(-1e-12..=1.0 + 1e-12).contains(&v) {
                return None;
            }
            x[*p] = v;
        }
        Some(x)
    }
}

/// Visit every point of a rectangular lattice in up to three dimensions.
fn for_lattice(lo: &[f64], hi: &[f64], step: f64, mut f: impl FnMut(&[f64])) {
    let counts: Vec<usize> = lo.iter().zip(hi).map(|(l, h)| ((h - l) / step + 1e-9).floor() as usize + 1).collect();
    let total: usize = counts.iter().product();
    let mut pt = vec![0.0; lo.len()];
    for mut idx in 0..total {
        for d in 0..lo.len() {
            pt[d] = lo[d] + (idx % counts[d]) as f64 * step;
            idx /= counts[d];
        }
        f(&pt);
    }
}

/// Grid minimum of a [`BoxQp`]: a full sweep at step 0.01, then a step
/// [`GRID_STEP`] sweep over ±0.05 around the coarse winner.
pub fn grid_qp(bq: &BoxQp) -> Option<(DVector<f64>, f64)> {
    let d = bq.free.len();
    let mut best: Option<(Vec<f64>, DVector<f64>, f64)> = None;
    scan_qp(bq, &vec![0.0; d], &vec![1.0; d], 0.01, &mut best);
    let centre = best.as_ref()?.0.clone();
    let lo: Vec<f64> = centre.iter().map(|c| lattice((c - 0.05).max(0.0))).collect();
    let hi: Vec<f64> = centre.iter().map(|c| (c + 0.05).min(1.0)).collect();
    scan_qp(bq, &lo, &hi, GRID_STEP, &mut best);
    best.map(|(_, x, f)| (x, f))
}

type GridBest = Option<(Vec<f64>, DVector<f64>, f64)>;

fn scan_qp(bq: &BoxQp, lo: &[f64], hi: &[f64], step: f64, best: &mut GridBest) {
    for_lattice(lo, hi, step, |pt| {
        if let Some(x) = bq.complete(pt) {
            let f = bq.problem.objective(&x);
            if best.as_ref().is_none_or(|b| f < b.2) {
                *best = Some((pt.to_vec(), x, f));
            }
        }
    });
}

/// Connected network with `n` buses: a random spanning tree plus a few
/// extra lines, some of them parallel to existing ones.
pub fn random_connected_case<R: Rng>(rng: &mut R, n: usize) -> NetworkCase {
    let mut lines = Vec::new();
    let line = |from, to, rng: &mut R| Line { from, to, susceptance_pu: rng.gen_range(1.0..20.0), f_max_pu: 10.0 };
    for bus in 2..=n {
        let parent = rng.gen_range(1..bus);
        let l = if rng.gen_bool(0.5) { line(parent, bus, rng) } else { line(bus, parent, rng) };
        lines.push(l);
    }
    for _ in 0..rng.gen_range(0..=n) {
        let i = rng.gen_range(1..=n);
        let j = rng.gen_range(1..=n);
        if i != j {
            let l = line(i, j, rng);
            lines.push(l);
        }
    }
    NetworkCase {
        buses: (1..=n).map(|id| Bus { id, load_pu: 0.0 }).collect(),
        generators: Vec::new(),
        lines,
        slack_bus: rng.gen_range(1..=n),
        areas: None,
    }
}

/// Zero-sum injection vector.
pub fn random_injections<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mean = v.iter().sum::<f64>() / n as f64;
    v.into_iter().map(|x| x - mean).collect()
}

/// Triangle network, one generator per bus, equal susceptances so that
/// line-limit faces pass through lattice points. Bounds and loads sit on
/// the grid lattice.
pub fn random_three_bus<R: Rng>(rng: &mut R) -> NetworkCase {
    let b = [5.0, 10.0, 20.0][rng.gen_range(0..3)];
    let fmax = lattice(rng.gen_range(0.15..0.6));
    let lines = vec![(1, 2), (2, 3), (1, 3)]
        .into_iter()
        .map(|(from, to)| Line { from, to, susceptance_pu: b, f_max_pu: fmax })
        .collect();
    let generators = (1..=3)
        .map(|bus| Generator {
            bus,
            p_min_pu: 0.0,
            p_max_pu: lattice(rng.gen_range(0.3..1.0)),
            cost_a: rng.gen_range(0.0..1.0),
            cost_b: rng.gen_range(1.0..10.0),
            cost_c: rng.gen_range(0.2..5.0),
        })
        .collect();
    let buses = (1..=3).map(|id| Bus { id, load_pu: lattice(rng.gen_range(0.0..0.5)) }).collect();
    NetworkCase { buses, generators, lines, slack_bus: 1, areas: None }
}

/// Grid search over generator outputs of a [`random_three_bus`] case.
/// Flows come from a hand-derived distribution for the equal-susceptance
/// triangle: an injection at one bus withdrawn at another splits 2/3 on
/// the direct line and 1/3 around the third bus.
pub fn grid_dispatch(case: &NetworkCase) -> Option<(Vec<f64>, f64)> {
    let load: Vec<f64> = case.buses.iter().map(|b| b.load_pu).collect();
    let total: f64 = load.iter().sum();
    let g = &case.generators;
    let fmax = case.lines[0].f_max_pu;
    let mut best: Option<(Vec<f64>, f64)> = None;
    let n1 = (g[0].p_max_pu / GRID_STEP).round() as usize;
    let n2 = (g[1].p_max_pu / GRID_STEP).round() as usize;
    for i in 0..=n1 {
        let p1 = i as f64 * GRID_STEP;
        for j in 0..=n2 {
            let p2 = j as f64 * GRID_STEP;
            let p3 = total - p1 - p2;
            if p3 < -1e-12 || p3 > g[2].p_max_pu + 1e-12 {
                continue;
            }
            let inj = [p1 - load[0], p2 - load[1], p3 - load[2]];
            // with equal susceptances: F_ij = (inj_i − inj_j) / 3
            let f12 = (inj[0] - inj[1]) / 3.0;
            let f23 = (inj[1] - inj[2]) / 3.0;
            let f13 = (inj[0] - inj[2]) / 3.0;
            if [f12, f23, f13].iter().any(|f| f.abs() > fmax + 1e-12) {
                continue;
            }
            let p = [p1, p2, p3];
            let cost: f64 = g.iter().zip(&p).map(|(gen, &x)| gen.cost_a + gen.cost_b * x + gen.cost_c * x * x).sum();
            if best.as_ref().is_none_or(|b| cost < b.1) {
                best = Some((p.to_vec(), cost));
            }
        }
    }
    best
}
