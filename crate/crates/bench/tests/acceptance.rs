//! Acceptance suite: one PASS/FAIL line per criterion, then a single
//! assertion over all of them. Criteria run one after another inside one
//! test so the timing comparison is not disturbed by sibling tests.
//!
//! Run with `cargo test -p sced-bench --test acceptance -- --nocapture`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use common::{grid_dispatch, grid_qp, random_box_qp, random_connected_case, random_injections, random_three_bus};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sced_bench::{compare_methods, run_single, Method, RunParams};
use sced_core::alr::{run_alr, AlrParams};
use sced_core::case::{canonical_case, make_partition_with, single_area, BoundaryRule, NetworkCase};
use sced_core::centralized::{solve_centralized, DispatchSolution};
use sced_core::dcpf::solve_dcpf;
use sced_core::lr::{run_lr, LrParams};
use sced_core::qp::{solve, QpStatus};

// Pinned tolerances.
const QP_PRIMAL_TOL: f64 = 2e-3;
const QP_KKT_TOL: f64 = 1e-8;
const DCPF_TOL: f64 = 1e-8;
const DISPATCH_GRID_TOL: f64 = 2e-3;
const EQUAL_MC_TOL: f64 = 1e-6;
const STOP_TOL: f64 = 0.01;
const LR_MAX_ITER: usize = 1000;
const LR_COST_GAP: f64 = 0.02;
const DUAL_BOUND_SLACK: f64 = 1e-6;
const ALR_DISPATCH_TOL: f64 = 0.01;
const ALR_MAX_ITER: usize = 2000;
const FIXED_ITERS: usize = 50;
const SINGLE_AREA_TOL: f64 = 1e-6;

const BASE_LAMBDA0: [f64; 2] = [3.066, 3.066];
const LMP_LAMBDA0: [f64; 2] = [5.74, 5.11];

struct Outcome {
    id: u8,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn lr_params() -> LrParams {
    LrParams { step_a: 3.0, step_b: 0.2, lambda0: Some(BASE_LAMBDA0.to_vec()), stop_tol: STOP_TOL, max_iter: LR_MAX_ITER, ..Default::default() }
}

fn alr_params(gamma: f64, lambda0: [f64; 2]) -> AlrParams {
    AlrParams { alpha: 0.1, gamma, lambda0: Some(lambda0.to_vec()), stop_tol: STOP_TOL, max_iter: ALR_MAX_ITER, ..Default::default() }
}

/// `max_i |p_i − p*_i| / max_i |p*_i|`
fn rel_max_dev(p: &[f64], reference: &[f64]) -> f64 {
    let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    p.iter().zip(reference).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale
}

fn c1_qp_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut ok, mut worst_x, mut worst_kkt) = (0, 0.0f64, 0.0f64);
    for _ in 0..50 {
        let bq = random_box_qp(&mut rng);
        let sol = solve(&bq.problem).unwrap();
        let (xg, _) = grid_qp(&bq).unwrap();
        let dx = (&sol.x - &xg).amax();
        let kkt = bq.problem.kkt_residuals(&sol).max();
        worst_x = worst_x.max(dx);
        worst_kkt = worst_kkt.max(kkt);
        if sol.status == QpStatus::Optimal && dx <= QP_PRIMAL_TOL && kkt <= QP_KKT_TOL {
            ok += 1;
        }
    }
    Outcome {
        id: 1,
        name: "QP kernel vs grid oracle",
        pass: ok == 50,
        detail: format!("{ok}/50 ok; worst |x − x_grid|∞ = {worst_x:.1e} (≤ {QP_PRIMAL_TOL:e}), worst KKT = {worst_kkt:.1e} (≤ {QP_KKT_TOL:e})"),
    }
}

fn dcpf_worst(case: &NetworkCase, rng: &mut ChaCha8Rng) -> (f64, f64, bool) {
    let n = case.n_buses();
    let p1 = random_injections(rng, n);
    let p2 = random_injections(rng, n);
    let sum: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| a + b).collect();
    let (s1, s2, s12) = (solve_dcpf(case, &p1).unwrap(), solve_dcpf(case, &p2).unwrap(), solve_dcpf(case, &sum).unwrap());
    let balance = (1..=n).map(|b| (sum[b - 1] - s12.net_outflow(b)).abs()).fold(0.0, f64::max);
    let linear = (0..s12.flows.len()).map(|k| (s12.flows[k] - s1.flows[k] - s2.flows[k]).abs()).fold(0.0, f64::max);
    let anti = s1.branches.iter().all(|b| s1.flow(b.from, b.to).unwrap() == -s1.flow(b.to, b.from).unwrap());
    (balance, linear, anti)
}

fn c2_dcpf() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (canonical, _) = canonical_case();
    let mut cases = vec![canonical];
    for k in 0..20 {
        cases.push(random_connected_case(&mut rng, 2 + k % 7));
    }
    let (mut bal, mut lin, mut anti) = (0.0f64, 0.0f64, true);
    for c in &cases {
        let (b, l, a) = dcpf_worst(c, &mut rng);
        bal = bal.max(b);
        lin = lin.max(l);
        anti &= a;
    }
    Outcome {
        id: 2,
        name: "DCPF invariants",
        pass: bal <= DCPF_TOL && lin <= DCPF_TOL && anti,
        detail: format!("{} cases; worst balance {bal:.1e}, superposition {lin:.1e} (≤ {DCPF_TOL:e}); antisymmetry exact: {anti}", cases.len()),
    }
}

fn c3_centralized() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut checked, mut ok, mut worst, mut free_cases, mut mc_ok) = (0, 0, 0.0f64, 0, true);
    while checked < 10 {
        let case = random_three_bus(&mut rng);
        let Some((pg, _)) = grid_dispatch(&case) else { continue };
        checked += 1;
        let d = solve_centralized(&case).unwrap();
        let dev = d.p_g.iter().zip(&pg).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(dev);
        if dev <= DISPATCH_GRID_TOL {
            ok += 1;
        }
        let interior = case.generators.iter().zip(&d.p_g).all(|(g, p)| *p > g.p_min_pu + 1e-6 && *p < g.p_max_pu - 1e-6);
        let lines_free = case.lines.iter().zip(&d.flows).all(|(l, f)| f.abs() < l.f_max_pu - 1e-6);
        if interior && lines_free {
            free_cases += 1;
            let mc: Vec<f64> = case.generators.iter().zip(&d.p_g).map(|(g, p)| g.marginal_cost(*p)).collect();
            mc_ok &= mc.iter().all(|m| (m - mc[0]).abs() <= EQUAL_MC_TOL);
        }
    }
    Outcome {
        id: 3,
        name: "centralized dispatch vs grid search",
        pass: ok == 10 && mc_ok,
        detail: format!(
            "{ok}/10 within {DISPATCH_GRID_TOL:e} (worst {worst:.1e}); equal marginal cost on {free_cases} unconstrained case(s): {mc_ok}"
        ),
    }
}

fn c4_c5_lr(central: &DispatchSolution) -> (Outcome, Outcome) {
    let (case, part) = canonical_case();
    let run = run_lr(&case, &part, &lr_params()).unwrap();
    let err = run.trace.last().unwrap().gen_load_error;
    let gap = (run.solution.objective_cost - central.objective_cost).abs() / central.objective_cost;
    let c4 = Outcome {
        id: 4,
        name: "LR convergence and accuracy",
        pass: run.converged && run.iterations <= LR_MAX_ITER && err < STOP_TOL && gap <= LR_COST_GAP,
        detail: format!(
            "converged={} in {} iterations, |Σgen − Σload| = {err:.5}, cost gap {:.3}% (≤ {}%)",
            run.converged,
            run.iterations,
            100.0 * gap,
            100.0 * LR_COST_GAP
        ),
    };
    let mut worst = f64::NEG_INFINITY;
    let mut count = 0;
    for l0 in [BASE_LAMBDA0.to_vec(), vec![0.0, 0.0], LMP_LAMBDA0.to_vec()] {
        let r = run_lr(&case, &part, &LrParams { lambda0: Some(l0), ..lr_params() }).unwrap();
        for rec in &r.trace.records {
            worst = worst.max(rec.objective - central.objective_cost);
            count += 1;
        }
    }
    let c5 = Outcome {
        id: 5,
        name: "LR dual bound",
        pass: worst <= DUAL_BOUND_SLACK,
        detail: format!("{count} iterates over 3 starts; max(φ − cost*) = {worst:.3e} (≤ {DUAL_BOUND_SLACK:e})"),
    };
    (c4, c5)
}

fn c6_alr(central: &DispatchSolution) -> Outcome {
    let (case, part) = canonical_case();
    // 0.25 lattice over [3, 6] plus the literature starts
    let mut grid: Vec<f64> = (0..=12).map(|k| 3.0 + 0.25 * k as f64).collect();
    grid.extend([BASE_LAMBDA0[0], LMP_LAMBDA0[1], LMP_LAMBDA0[0]]);
    grid.sort_by(f64::total_cmp);
    let mut starts: Vec<[f64; 2]> = Vec::new();
    for &a in &grid {
        for &b in &grid {
            starts.push([a, b]);
        }
    }
    let (mut conv, mut worst, mut worst_at) = (0, 0.0f64, [0.0; 2]);
    for l0 in &starts {
        let r = run_alr(&case, &part, &alr_params(0.25, *l0)).unwrap();
        let dev = rel_max_dev(&r.solution.p_g, &central.p_g);
        if r.converged {
            conv += 1;
        }
        if !r.converged || dev > worst {
            worst = worst.max(if r.converged { dev } else { f64::INFINITY });
            worst_at = *l0;
        }
    }
    Outcome {
        id: 6,
        name: "ALR convergence and dispatch accuracy",
        pass: conv == starts.len() && worst <= ALR_DISPATCH_TOL,
        detail: format!(
            "{conv}/{} starts in [3,6]² converged; worst max-norm deviation {:.3}% at λ0={worst_at:?} (≤ {}%)",
            starts.len(),
            100.0 * worst,
            100.0 * ALR_DISPATCH_TOL
        ),
    }
}

fn c7_ordering() -> Outcome {
    let (case, part) = canonical_case();
    let params = RunParams { lr: lr_params(), alr: alr_params(0.25, BASE_LAMBDA0) };
    let c = compare_methods(&case, &part, &params, STOP_TOL, None).unwrap();
    let iters = c.alr.iterations < c.lr.iterations;
    let error = c.alr.final_error < c.lr.final_error;
    Outcome {
        id: 7,
        name: "ALR beats LR on iterations and final error",
        pass: c.lr.converged && c.alr.converged && iters && error,
        detail: format!(
            "iterations ALR {} vs LR {} ({}); final error ALR {:.5} vs LR {:.5} ({})",
            c.alr.iterations,
            c.lr.iterations,
            if iters { "ok" } else { "NOT less" },
            c.alr.final_error,
            c.lr.final_error,
            if error { "ok" } else { "NOT less" }
        ),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn c8_time_per_iteration() -> Outcome {
    let (case, part) = canonical_case();
    let params = RunParams { lr: lr_params(), alr: alr_params(0.25, BASE_LAMBDA0) };
    let (mut lr, mut alr) = (Vec::new(), Vec::new());
    for _ in 0..5 {
        let c = compare_methods(&case, &part, &params, STOP_TOL, Some(FIXED_ITERS)).unwrap();
        assert_eq!((c.lr.iterations, c.alr.iterations), (FIXED_ITERS, FIXED_ITERS));
        lr.push(c.lr.time_per_iteration());
        alr.push(c.alr.time_per_iteration());
    }
    let (lr, alr) = (median(lr), median(alr));
    Outcome {
        id: 8,
        name: "LR cheaper per iteration (fixed N=50)",
        pass: lr < alr,
        detail: format!("median of 5: LR {:.1} µs/iter vs ALR {:.1} µs/iter", lr * 1e6, alr * 1e6),
    }
}

fn c9_gamma() -> Outcome {
    let (case, part) = canonical_case();
    let low = run_alr(&case, &part, &alr_params(0.05, LMP_LAMBDA0)).unwrap();
    let good = run_alr(&case, &part, &alr_params(0.25, LMP_LAMBDA0)).unwrap();
    Outcome {
        id: 9,
        name: "γ sensitivity",
        pass: low.oscillating() && !low.converged && good.converged,
        detail: format!(
            "γ=0.05: converged={} after {} iterations, oscillation flagged at {:?}, final error {:.3}; γ=0.25: converged={} in {}",
            low.converged,
            low.iterations,
            low.oscillating_at,
            low.trace.last().unwrap().gen_load_error,
            good.converged,
            good.iterations
        ),
    }
}

fn c10_privacy() -> Outcome {
    let (case, part) = canonical_case();
    let lr = run_single(&case, Some(&part), Method::Lr, &RunParams::default()).unwrap().report;
    let alr = run_single(&case, Some(&part), Method::Alr, &RunParams::default()).unwrap().report;
    Outcome {
        id: 10,
        name: "shared values per iteration",
        pass: lr.shared_values_per_iteration < alr.shared_values_per_iteration,
        detail: format!(
            "LR {} (2 angles + 2 λ + 1 μ) vs ALR {} (2 angles + 2 λ + 5 boundary-incident line flows)",
            lr.shared_values_per_iteration, alr.shared_values_per_iteration
        ),
    }
}

fn c11_single_area(central: &DispatchSolution) -> Outcome {
    let (case, _) = canonical_case();
    let part = make_partition_with(&case, &single_area(&case), BoundaryRule::ZeroInjection).unwrap();
    let r = run_lr(&case, &part, &lr_params_single()).unwrap();
    let dev = r.solution.p_g.iter().zip(&central.p_g).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let cost = (r.solution.objective_cost - central.objective_cost).abs();
    Outcome {
        id: 11,
        name: "single-area LR equals centralized",
        pass: r.converged && r.iterations == 1 && dev <= SINGLE_AREA_TOL && cost <= SINGLE_AREA_TOL,
        detail: format!("iterations {}, max |ΔP| {dev:.1e}, |Δcost| {cost:.1e} (≤ {SINGLE_AREA_TOL:e})", r.iterations),
    }
}

fn lr_params_single() -> LrParams {
    LrParams { lambda0: None, ..lr_params() }
}

#[test]
fn acceptance() {
    let (case, _) = canonical_case();
    let central = solve_centralized(&case).unwrap();
    let (c4, c5) = c4_c5_lr(&central);
    let outcomes = vec![
        c1_qp_oracle(),
        c2_dcpf(),
        c3_centralized(),
        c4,
        c5,
        c6_alr(&central),
        c7_ordering(),
        c8_time_per_iteration(),
        c9_gamma(),
        c10_privacy(),
        c11_single_area(&central),
    ];
    for o in &outcomes {
        println!("{} criterion {:>2}: {} | {}", if o.pass { "PASS" } else { "FAIL" }, o.id, o.name, o.detail);
    }
    let failed: Vec<u8> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
