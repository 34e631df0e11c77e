//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sprphs::discretize::{discretize_timoshenko, verify_structure_with, LumpedPhs, TimoshenkoParams};
use sprphs::formats::scenario::{fixtures, ScenarioConfig};
use sprphs::numerics::{eigenvalues, frobenius, is_hurwitz, min_symmetric_eigenvalue, rel_asymmetry, Spectrum};
use sprphs::riccati::{check_admissible, solve_observer_are, AreProblem};
use sprphs::simulate::{simulate, spillover_rows, DesignKind, PlantFamily, Reference, SimulationOptions, SimulationResult};
use sprphs::synthesis::{
    build_controller, close_loop, design_controller, naive_lqg, separation_spectrum, verify_matching, verify_spr, Design,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(cond: bool, failures: &mut Vec<String>, what: impl Into<String>) {
    if !cond {
        failures.push(what.into());
    }
}

fn outcome(failures: Vec<String>, summary: String) -> Outcome {
    if failures.is_empty() {
        Outcome { pass: true, detail: summary }
    } else {
        Outcome {
            pass: false,
            detail: format!("{summary}; failed: {}", failures.join(", ")),
        }
    }
}

fn within(elapsed: Duration, limit: Duration, failures: &mut Vec<String>) {
    check(elapsed <= limit, failures, format!("runtime {elapsed:.2?} > {limit:?}"));
}

fn design_from(cfg: &ScenarioConfig) -> (LumpedPhs, Design) {
    let sys = cfg.design_plant().expect("design plant");
    let (q, r) = cfg.weights(&sys).expect("weights");
    let design = design_controller(&sys, &q, &r, &cfg.design.rc_alpha_grid).expect("design");
    (sys, design)
}

fn sorted_re(s: &Spectrum) -> Vec<Complex64> {
    let mut v = s.eigenvalues.clone();
    v.sort_by(|a, b| a.re.total_cmp(&b.re));
    v
}

fn golden_ratio() -> Outcome {
    let start = Instant::now();
    let mut f = Vec::new();
    let one = DMatrix::from_element(1, 1, 1.0);
    let zero = DMatrix::zeros(1, 1);
    let plant = LumpedPhs::new(zero.clone(), zero, one.clone(), one.clone(), 1.0).unwrap();
    let ctrl = build_controller(&plant, &one, &one).unwrap();
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let q_err = (ctrl.q_c[(0, 0)] - phi).abs();
    let l_err = (ctrl.l[(0, 0)] - 2.0 / (1.0 + 5f64.sqrt())).abs().max((ctrl.b_c[(0, 0)] - ctrl.l[(0, 0)]).abs());
    check(q_err <= 1e-12, &mut f, format!("Q_c error {q_err:e}"));
    check(l_err <= 1e-12, &mut f, format!("B_c/L error {l_err:e}"));
    check(ctrl.j_c[(0, 0)] == 0.0, &mut f, "J_c nonzero");
    let matching = verify_matching(&ctrl, &plant).unwrap();
    check(matching.worst() <= 1e-12, &mut f, format!("matching {:e}", matching.worst()));
    let cl = close_loop(&plant, &ctrl).unwrap();
    let spec = sorted_re(&eigenvalues(&cl.a_cl).unwrap());
    let expected = [-1.0, -(5f64.sqrt() - 1.0) / 2.0];
    let spec_err = spec
        .iter()
        .zip(expected)
        .map(|(z, e)| (z - Complex64::new(e, 0.0)).norm())
        .fold(0.0, f64::max);
    check(spec.len() == 2 && spec_err <= 1e-10, &mut f, format!("spectrum error {spec_err:e}"));
    within(start.elapsed(), Duration::from_secs(1), &mut f);
    outcome(
        f,
        format!("Q_c error {q_err:.1e}, matching {:.1e}, spectrum error {spec_err:.1e}", matching.worst()),
    )
}

/// Admissible by construction: `A_K` Hurwitz, `R_c ≻ 0`, `C_K ⪯ 0`, so
/// `P = Q_c⁻¹` solves a standard CARE with a stabilizing solution.
fn random_problem(rng: &mut ChaCha8Rng, n: usize) -> AreProblem {
    let mut gen = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0));
    let m = gen(n, n);
    let shift = eigenvalues(&m).unwrap().eigenvalues.iter().map(|z| z.re).fold(f64::MIN, f64::max);
    let a_k = m - DMatrix::identity(n, n) * (shift + 0.5);
    let g = gen(n, n);
    let r_c = &g * g.transpose() + DMatrix::identity(n, n) * 0.1;
    let rank = (n / 2).max(1);
    let h = gen(n, rank);
    let c_k = -(&h * h.transpose());
    AreProblem::new(a_k, r_c, c_k).unwrap()
}

fn are_property() -> Outcome {
    let start = Instant::now();
    let mut f = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (mut worst_res, mut worst_scalar) = (0.0f64, 0.0f64);
    for i in 0..200 {
        let n = if i % 4 == 0 { 1 } else { rng.gen_range(2..=40) };
        let p = random_problem(&mut rng, n);
        if !check_admissible(&p).is_ok_and(|a| a.admissible) {
            f.push(format!("problem {i} (n={n}) not admissible"));
            continue;
        }
        let sol = match solve_observer_are(&p) {
            Ok(s) => s,
            Err(e) => {
                f.push(format!("problem {i} (n={n}): {e}"));
                continue;
            }
        };
        worst_res = worst_res.max(sol.residual);
        check(sol.residual <= 1e-8, &mut f, format!("problem {i} residual {:e}", sol.residual));
        check(rel_asymmetry(&sol.q_c) == 0.0, &mut f, format!("problem {i} Q_c asymmetric"));
        check(min_symmetric_eigenvalue(&sol.q_c) > 0.0, &mut f, format!("problem {i} Q_c not PD"));
        if n == 1 {
            // positive root of 2r·q² + 2a·q + c = 0 with c ≤ 0
            let (a, r, c) = (p.a_k()[(0, 0)], p.r_c()[(0, 0)], p.c_k()[(0, 0)]);
            let root = (-a + (a * a - 2.0 * r * c).sqrt()) / (2.0 * r);
            let err = (sol.q_c[(0, 0)] - root).abs() / root;
            worst_scalar = worst_scalar.max(err);
            check(err <= 1e-12, &mut f, format!("problem {i} scalar root error {err:e}"));
        }
    }
    within(start.elapsed(), Duration::from_secs(30), &mut f);
    outcome(
        f,
        format!("200 problems, worst residual {worst_res:.1e}, worst scalar root error {worst_scalar:.1e}"),
    )
}

fn structure() -> Outcome {
    let start = Instant::now();
    let mut f = Vec::new();
    let sys = discretize_timoshenko(&TimoshenkoParams::reference(), 20, true).unwrap();
    let rep = verify_structure_with(&sys, 1e-10);
    check(sys.n_c == 80, &mut f, format!("{} states", sys.n_c));
    check(rep.j_skew_defect <= 1e-10, &mut f, format!("J skew defect {:e}", rep.j_skew_defect));
    check(rep.q_asymmetry <= 1e-10 && rep.q_min_eigenvalue > 0.0, &mut f, "Q not positive definite");
    check(rep.c_defect <= 1e-10, &mut f, format!("C defect {:e}", rep.c_defect));
    check(rep.qa_symmetric_part <= 1e-10, &mut f, format!("QA + AᵀQ {:e}", rep.qa_symmetric_part));
    check(rep.pass, &mut f, "structure report failed");
    within(start.elapsed(), Duration::from_secs(1), &mut f);
    outcome(
        f,
        format!(
            "J skew {:.1e}, C defect {:.1e}, QA+AᵀQ {:.1e}, λmin(Q) {:.2e}",
            rep.j_skew_defect, rep.c_defect, rep.qa_symmetric_part, rep.q_min_eigenvalue
        ),
    )
}

fn beam_synthesis() -> Outcome {
    let start = Instant::now();
    let mut f = Vec::new();
    let (sys, design) = design_from(&fixtures::beam());
    let ctrl = &design.controller;
    let d = &ctrl.diagnostics;
    check(sys.n_c == 80, &mut f, format!("{} states", sys.n_c));
    check(design.rc.alpha == 10.0, &mut f, format!("R_c = {}·I", design.rc.alpha));
    check(d.hamiltonian_spectral_gap > 0.0, &mut f, "no spectral gap");
    check(d.q_c_min_eigenvalue > 0.0, &mut f, "Q_c not PD");
    check(d.a_bk_max_re < 0.0, &mut f, format!("A−BK max Re {:e}", d.a_bk_max_re));
    check(d.a_lc_max_re < 0.0, &mut f, format!("A−LC max Re {:e}", d.a_lc_max_re));
    let matching = verify_matching(ctrl, &sys).unwrap();
    check(matching.pass, &mut f, format!("matching {:e}", matching.worst()));
    let cert = verify_spr(ctrl).unwrap();
    check(cert.pass, &mut f, format!("SPR certificate (residual {:e})", cert.lyapunov_residual));
    within(start.elapsed(), Duration::from_secs(60), &mut f);
    outcome(
        f,
        format!(
            "gap {:.3e}, λmin(Q_c) {:.2e}, A−BK {:.3e}, A−LC {:.3e}, ε {:.2e}",
            d.hamiltonian_spectral_gap, d.q_c_min_eigenvalue, d.a_bk_max_re, d.a_lc_max_re, cert.epsilon
        ),
    )
}

fn family(cfg: &ScenarioConfig) -> PlantFamily {
    cfg.model.family().expect("builder-based scenario")
}

fn spillover() -> Outcome {
    let start = Instant::now();
    let mut f = Vec::new();
    let mut rows = Vec::new();
    let mut naive = Vec::new();
    for (cfg, orders) in [(fixtures::wave(), vec![59, 67, 120, 200]), (fixtures::beam(), vec![20, 30])] {
        let fam = family(&cfg);
        let n = cfg.design_elements();
        let (sys, design) = design_from(&cfg);
        let rep = spillover_rows(&fam, &design.controller.as_dynamic(), n, DesignKind::Spr, &orders).unwrap();
        for row in &rep.rows {
            check(row.stable, &mut f, format!("order {} max Re {:?} {:?}", row.order, row.max_re, row.error));
            rows.push(format!("{}:{:.1e}", row.states, row.max_re.unwrap_or(f64::NAN)));
        }
        if cfg.analysis.baseline == Some(DesignKind::NaiveLqg) {
            let (q, r) = cfg.weights(&sys).unwrap();
            let ctrl = naive_lqg(&sys, &q, &r).unwrap();
            let lqg = spillover_rows(&fam, &ctrl, n, DesignKind::NaiveLqg, &orders).unwrap();
            naive.extend(lqg.rows.iter().map(|r| format!("{}:{:.1e}", r.states, r.max_re.unwrap_or(f64::NAN))));
        }
    }
    within(start.elapsed(), Duration::from_secs(300), &mut f);
    outcome(
        f,
        format!("SPR max Re by states [{}]; naive LQG (not asserted) [{}]", rows.join(" "), naive.join(" ")),
    )
}

fn windows(err: &[f64], count: usize) -> Vec<f64> {
    let len = err.len() / count;
    (0..count)
        .map(|w| err[w * len..(w + 1) * len].iter().copied().fold(0.0, f64::max))
        .collect()
}

fn lyapunov_decay() -> Outcome {
    let start = Instant::now();
    let mut f = Vec::new();
    let cfg = fixtures::beam();
    let (sys, design) = design_from(&cfg);
    let cl = close_loop(&sys, &design.controller).unwrap();
    let (x0, xhat0) = cfg.initial_state(&sys, design.controller.order()).unwrap();
    let opts = cfg.simulation_options().unwrap();
    check(opts.dt == 2e-6 && opts.t_end == 0.2, &mut f, "horizon");
    let res = simulate(&cl, &x0, &xhat0, &Reference::Zero, &opts).unwrap();
    let audit = res.audit.unwrap();
    let v0 = res.total_v[0];
    let ratio = res.total_v.last().unwrap() / v0;
    check(audit.max_defect <= 1e-10 * v0, &mut f, format!("audit defect {:e}", audit.relative_defect));
    check(audit.max_increase <= 1e-10 * v0, &mut f, format!("V increased by {:e}", audit.max_increase));
    check(ratio <= 1e-3, &mut f, format!("V(T)/V(0) = {ratio:e}"));
    let win = windows(&res.energy_estimation_error(), 10);
    let monotone = win[1..].windows(2).all(|p| p[1] <= p[0]);
    check(monotone, &mut f, format!("observer error windows {win:?}"));
    check(win[9] <= 1e-2 * win[0], &mut f, "observer error did not shrink");
    within(start.elapsed(), Duration::from_secs(300), &mut f);
    outcome(
        f,
        format!(
            "audit {:.1e}·V(0), V(T)/V(0) {ratio:.2e}, observer error {:.1e} → {:.1e}",
            audit.relative_defect, win[0], win[9]
        ),
    )
}

fn separation() -> Outcome {
    let start = Instant::now();
    let mut f = Vec::new();
    let mut parts = Vec::new();
    for (name, cfg) in [("wave", fixtures::wave()), ("beam", fixtures::beam())] {
        let (sys, design) = design_from(&cfg);
        let rep = separation_spectrum(&design.controller, &sys).unwrap();
        check(rep.distance <= 1e-6, &mut f, format!("{name} distance {:e}", rep.distance));
        parts.push(format!("{name} {:.1e}", rep.distance));
    }
    within(start.elapsed(), Duration::from_secs(30), &mut f);
    outcome(f, format!("relative distance {}", parts.join(", ")))
}

fn final_state(res: &SimulationResult) -> DVector<f64> {
    let mut x = res.final_plant_state().as_slice().to_vec();
    x.extend_from_slice(res.final_observer_state().as_slice());
    DVector::from_vec(x)
}

fn integrator_order() -> Outcome {
    let start = Instant::now();
    let mut f = Vec::new();
    let cfg = fixtures::scalar();
    let (sys, design) = design_from(&cfg);
    let cl = close_loop(&sys, &design.controller).unwrap();
    let (x0, xhat0) = cfg.initial_state(&sys, 1).unwrap();
    let run = |dt: f64| {
        let opts = SimulationOptions::new(dt, 1.0).with_stride(usize::MAX);
        final_state(&simulate(&cl, &x0, &xhat0, &Reference::Zero, &opts).unwrap())
    };
    let reference = run(0.1 / 64.0);
    let e1 = frobenius(&DMatrix::from_column_slice(2, 1, (run(0.1) - &reference).as_slice()));
    let e2 = frobenius(&DMatrix::from_column_slice(2, 1, (run(0.05) - &reference).as_slice()));
    let order = (e1 / e2).log2();
    check(order >= 1.9, &mut f, format!("order {order:.3}"));
    check(is_hurwitz(&cl.a_cl, 0.0).unwrap().0, &mut f, "closed loop not Hurwitz");
    within(start.elapsed(), Duration::from_secs(10), &mut f);
    outcome(f, format!("observed order {order:.3} (errors {e1:.2e}, {e2:.2e})"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 scalar golden-ratio controller", golden_ratio),
        ("2 observer ARE on random admissible problems", are_property),
        ("3 beam structure preservation", structure),
        ("4 reference beam synthesis", beam_synthesis),
        ("5 spillover safety", spillover),
        ("6 Lyapunov decay of the beam loop", lyapunov_decay),
        ("7 separation of closed-loop spectra", separation),
        ("8 midpoint integrator order", integrator_order),
    ];
    let mut all = true;
    for (name, run) in criteria {
        let t = Instant::now();
        let o = run();
        all &= o.pass;
        println!(
            "{} criterion {name}: {} [{:.2?}]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed()
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
