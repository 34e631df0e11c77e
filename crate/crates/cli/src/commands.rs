use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sprphs::discretize::{verify_structure_with, LumpedPhs};
use sprphs::formats::scenario::{fixtures, ModelSpec};
use sprphs::formats::{
    parse_controller, parse_scenario, to_canonical_json, write_deformation_csv, write_eigenvalues_csv,
    write_matrix_csv, write_spillover_csv, write_trajectory_csv, ControllerFile, ScenarioConfig,
};
use sprphs::numerics::{self, eigenvalues};
use sprphs::phs_model::{check_boundary_matrices, BcPhsSpec};
use sprphs::riccati::{lqr_gain, AreProblem};
use sprphs::simulate::{beam_deformation, simulate as run_simulation, spillover_rows, DesignKind};
use sprphs::synthesis::{
    build_controller, choose_rc, close_loop, naive_lqg, separation_spectrum, verify_matching, verify_spr,
};
use sprphs::Error;

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_INFEASIBLE: u8 = 3;
pub const EXIT_AUDIT: u8 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
    pub hint: Option<String>,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_VALIDATION,
            message: message.into(),
            hint: None,
        }
    }

    fn audit(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_AUDIT,
            message: message.into(),
            hint: None,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, hint) = match &e {
            Error::NotAdmissible { .. } | Error::NoAdmissibleAlpha { .. } => (
                EXIT_INFEASIBLE,
                Some("reduce α: add smaller values to design.rc_alpha_grid"),
            ),
            Error::NoPdSolution { .. } | Error::IllConditioned { .. } => (
                EXIT_INFEASIBLE,
                Some("adjust LQR weights (design.q_lqr, design.r_lqr) or reduce α"),
            ),
            Error::NotStabilizable(_) => (EXIT_INFEASIBLE, Some("adjust LQR weights or the supplied gain")),
            Error::SkewnessDefect { .. }
            | Error::CertificateFailure { .. }
            | Error::Residual { .. }
            | Error::ImaginaryAxisEigenvalue { .. }
            | Error::NotPositiveDefinite
            | Error::NoConvergence(_)
            | Error::Asymmetric { .. } => (EXIT_INFEASIBLE, None),
            Error::SingularMidpoint => (EXIT_VALIDATION, Some("reduce simulation.dt")),
            _ => (EXIT_VALIDATION, None),
        };
        Failure {
            code,
            message: e.to_string(),
            hint: hint.map(str::to_string),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn load_config(path: &Path) -> Result<ScenarioConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let cfg = parse_scenario(&text)?;
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

fn out_dir(cfg: &ScenarioConfig, out: Option<&Path>) -> Result<PathBuf, Failure> {
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.directory.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).map_err(|e| Failure::usage(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_json<T: serde::Serialize + ?Sized>(path: &Path, value: &T) -> Outcome {
    fs::write(path, to_canonical_json(value)?)?;
    Ok(())
}

fn write_csv(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Outcome {
    let mut w = BufWriter::new(fs::File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn seed_fixtures(dir: &Path) -> Outcome {
    fs::create_dir_all(dir)?;
    for (name, cfg) in fixtures::all() {
        let path = dir.join(name);
        write_json(&path, &cfg)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub fn model(config: &Path, out: Option<&Path>) -> Outcome {
    let cfg = load_config(config)?;
    let dir = out_dir(&cfg, out)?;
    let sys = cfg.design_plant()?;
    let report = verify_structure_with(&sys, cfg.tolerances.structure);
    write_json(&dir.join("system.json"), &sys)?;
    write_json(&dir.join("structure.json"), &report)?;
    for (name, m) in [("J", &sys.j), ("R", &sys.r), ("Q", &sys.q), ("B", &sys.b)] {
        write_csv(&dir.join(format!("{name}.csv")), |w| write_matrix_csv(w, m))?;
    }
    let boundary = match &cfg.model {
        ModelSpec::Wave(p) => Some(BcPhsSpec::wave(p)?),
        ModelSpec::Timoshenko { params, .. } => Some(BcPhsSpec::timoshenko(params)?),
        ModelSpec::Inline(_) => None,
    };
    if let Some(spec) = boundary {
        write_json(&dir.join("well_posedness.json"), &check_boundary_matrices(&spec))?;
    }
    println!("states: {}  inputs: {}", sys.n_c, sys.inputs());
    println!(
        "structure (tolerance {:.1e}): J skew {:.3e}, C defect {:.3e}, QA+AᵀQ {:.3e}, Q min eig {:.3e}",
        report.tolerance, report.j_skew_defect, report.c_defect, report.passivity_residual, report.q_min_eigenvalue
    );
    if !report.pass {
        return Err(Failure::audit("structure check failed"));
    }
    println!("structure: pass");
    Ok(())
}

/// Design at the scenario's design order.
pub fn synthesize(cfg: &ScenarioConfig) -> Result<(LumpedPhs, ControllerFile), Failure> {
    let sys = cfg.design_plant()?;
    let (k, lqr_residual) = match &cfg.design.gain {
        Some(k) => (k.clone(), None),
        None => {
            let (q, r) = cfg.weights(&sys)?;
            let lqr = lqr_gain(&sys, &q, &r)?;
            (lqr.k, Some(lqr.residual))
        }
    };
    let problem = AreProblem::from_design(&sys, &k, nalgebra_identity(sys.n_c))?;
    let rc = choose_rc(problem.a_k(), problem.c_k(), &cfg.design.rc_alpha_grid)?;
    let ctrl = build_controller(&sys, &k, &rc.r_c(sys.n_c))?;
    let matching = verify_matching(&ctrl, &sys)?;
    let certificate = verify_spr(&ctrl)?;
    let mut file = ControllerFile::new(cfg.design_elements(), ctrl);
    file.rc_choice = Some(rc);
    file.lqr_residual = lqr_residual;
    file.matching = Some(matching);
    file.certificate = Some(certificate);
    Ok((sys, file))
}

fn nalgebra_identity(n: usize) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::identity(n, n)
}

fn load_or_synthesize(cfg: &ScenarioConfig, controller: Option<&Path>) -> Result<(LumpedPhs, ControllerFile), Failure> {
    match controller {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
            let file = parse_controller(&text)?;
            let sys = cfg.design_plant()?;
            if file.controller.order() != sys.n_c || file.controller.ports() != sys.inputs() {
                return Err(Error::OrderMismatch {
                    plant: sys.n_c,
                    controller: file.controller.order(),
                }
                .into());
            }
            Ok((sys, file))
        }
        None => synthesize(cfg),
    }
}

pub fn synth(config: &Path, out: Option<&Path>) -> Outcome {
    let cfg = load_config(config)?;
    let dir = out_dir(&cfg, out)?;
    let (_, file) = synthesize(&cfg)?;
    write_json(&dir.join("controller.json"), &file)?;
    let report = certificate_report(&cfg, &file);
    write_json(&dir.join("certificate.json"), &report)?;
    print_report(&report);
    if report["pass"] != Value::Bool(true) {
        return Err(Failure::audit("certificate checks failed"));
    }
    Ok(())
}

fn certificate_report(cfg: &ScenarioConfig, file: &ControllerFile) -> Value {
    let t = &cfg.tolerances;
    let d = &file.controller.diagnostics;
    let matching = file.matching.as_ref();
    let cert = file.certificate.as_ref();
    let matching_worst = matching.map_or(f64::INFINITY, |m| m.worst());
    let cert_worst = cert.map_or(f64::INFINITY, |c| c.lyapunov_residual.max(c.output_residual));
    let pass = matching_worst <= t.matching
        && cert_worst <= t.certificate
        && cert.is_some_and(|c| c.epsilon > 0.0)
        && d.a_bk_max_re < 0.0
        && d.a_lc_max_re < 0.0
        && d.hamiltonian_spectral_gap > 0.0
        && d.q_c_min_eigenvalue > 0.0;
    json!({
        "alpha": file.rc_choice.as_ref().map(|r| r.alpha),
        "rejected_alpha": file.rc_choice.as_ref().map(|r| r.rejected.clone()),
        "hamiltonian_spectral_gap": d.hamiltonian_spectral_gap,
        "are_residual": d.are_residual,
        "q_c_min_eigenvalue": d.q_c_min_eigenvalue,
        "a_bk_max_re": d.a_bk_max_re,
        "a_lc_max_re": d.a_lc_max_re,
        "matching": matching.map(|m| json!({
            "dynamics": m.dynamics, "output": m.output, "injection": m.injection,
        })),
        "matching_tolerance": t.matching,
        "epsilon": cert.map(|c| c.epsilon),
        "lemma_residual": cert.map(|c| c.lyapunov_residual),
        "output_residual": cert.map(|c| c.output_residual),
        "certificate_tolerance": t.certificate,
        "controllable_dimension": d.controllable_dimension,
        "warnings": d.warnings,
        "pass": pass,
    })
}

fn print_report(v: &Value) {
    if let Value::Object(map) = v {
        for (k, val) in map {
            println!("{k}: {val}");
        }
    }
}

pub fn verify(config: &Path, out: Option<&Path>, controller: Option<&Path>) -> Outcome {
    let cfg = load_config(config)?;
    let dir = out_dir(&cfg, out)?;
    let (sys, mut file) = load_or_synthesize(&cfg, controller)?;
    let ctrl = &file.controller;
    let matching = verify_matching(ctrl, &sys)?;
    let certificate = verify_spr(ctrl)?;
    let bk = numerics::is_hurwitz(&(sys.a() - &sys.b * &ctrl.k), 0.0)?.1;
    let lc = numerics::is_hurwitz(&(sys.a() - &ctrl.l * sys.c()), 0.0)?.1;
    let sep = separation_spectrum(ctrl, &sys)?;
    file.matching = Some(matching);
    file.certificate = Some(certificate);
    file.controller.diagnostics.a_bk_max_re = bk;
    file.controller.diagnostics.a_lc_max_re = lc;
    let mut report = certificate_report(&cfg, &file);
    let sep_pass = sep.distance <= cfg.tolerances.separation;
    if let Value::Object(map) = &mut report {
        map.insert("separation_distance".into(), json!(sep.distance));
        map.insert("separation_tolerance".into(), json!(cfg.tolerances.separation));
        let pass = map["pass"] == Value::Bool(true) && sep_pass;
        map.insert("pass".into(), Value::Bool(pass));
    }
    write_json(&dir.join("verify.json"), &report)?;
    print_report(&report);
    if report["pass"] != Value::Bool(true) {
        return Err(Failure::audit("verification failed"));
    }
    Ok(())
}

pub fn analyze(config: &Path, out: Option<&Path>, controller: Option<&Path>) -> Outcome {
    let cfg = load_config(config)?;
    let dir = out_dir(&cfg, out)?;
    let (sys, file) = load_or_synthesize(&cfg, controller)?;
    let ctrl = &file.controller;
    let a = sys.a();
    let spec_a = eigenvalues(&a)?;
    let spec_bk = eigenvalues(&(&a - &sys.b * &ctrl.k))?;
    let spec_lc = eigenvalues(&(&a - &ctrl.l * sys.c()))?;
    let spec_cl = eigenvalues(&close_loop(&sys, ctrl)?.a_cl)?;
    write_csv(&dir.join("eigenvalues.csv"), |w| {
        write_eigenvalues_csv(w, &[("A", &spec_a), ("A-BK", &spec_bk), ("A-LC", &spec_lc), ("A_cl", &spec_cl)])
    })?;
    println!("design order: max Re λ(A_cl) = {:.6e}", spec_cl.max_real_part);

    let orders = &cfg.analysis.eval_orders;
    let Some(family) = cfg.model.family().filter(|_| !orders.is_empty()) else {
        return Ok(());
    };
    let design_order = cfg.design_elements();
    let spr = spillover_rows(&family, &ctrl.as_dynamic(), design_order, DesignKind::Spr, orders)?;
    write_csv(&dir.join("spillover.csv"), |w| write_spillover_csv(w, &spr))?;
    for r in &spr.rows {
        println!(
            "spr order {:>4}: max Re {:>24} stable {}",
            r.order,
            r.max_re.map_or("error".into(), |v| format!("{v:.6e}")),
            r.stable
        );
    }
    if cfg.analysis.baseline == Some(DesignKind::NaiveLqg) {
        let (q, r) = cfg.weights(&sys)?;
        let naive = naive_lqg(&sys, &q, &r)?;
        let rep = spillover_rows(&family, &naive, design_order, DesignKind::NaiveLqg, orders)?;
        write_csv(&dir.join("spillover_naive_lqg.csv"), |w| write_spillover_csv(w, &rep))?;
        for r in &rep.rows {
            println!(
                "naive_lqg order {:>4}: max Re {:>24} stable {} (reported only)",
                r.order,
                r.max_re.map_or("error".into(), |v| format!("{v:.6e}")),
                r.stable
            );
        }
    }
    if !spr.all_stable() {
        return Err(Failure::audit("SPR closed loop unstable at some evaluation order"));
    }
    Ok(())
}

pub fn simulate(config: &Path, out: Option<&Path>, controller: Option<&Path>) -> Outcome {
    let cfg = load_config(config)?;
    let dir = out_dir(&cfg, out)?;
    let opts = cfg.simulation_options()?;
    let (sys, file) = load_or_synthesize(&cfg, controller)?;
    let ctrl = &file.controller;
    let cl = close_loop(&sys, ctrl)?;
    let (x0, xh0) = cfg.initial_state(&sys, ctrl.order())?;
    let reference = &cfg.simulation.as_ref().expect("checked by simulation_options").reference;
    let res = run_simulation(&cl, &x0, &xh0, reference, &opts)?;
    write_csv(&dir.join("trajectory.csv"), |w| write_trajectory_csv(w, &res))?;
    if matches!(cfg.model, ModelSpec::Timoshenko { .. }) {
        let d = beam_deformation(&res, &sys)?;
        write_csv(&dir.join("deformation.csv"), |w| write_deformation_csv(w, &d))?;
    }
    let audit = res.audit.expect("SPR closed loops carry an energy metric");
    let v0 = audit.initial_energy;
    let v_end = *res.total_v.last().expect("at least one sample");
    let pass = audit.relative_defect <= cfg.tolerances.audit;
    let report = json!({
        "steps": (opts.t_end / opts.dt).round() as u64,
        "dt": opts.dt,
        "initial_energy": v0,
        "final_energy": v_end,
        "final_ratio": if v0 > 0.0 { v_end / v0 } else { 0.0 },
        "audit_max_defect": audit.max_defect,
        "audit_relative_defect": audit.relative_defect,
        "audit_max_increase": audit.max_increase,
        "audit_tolerance": cfg.tolerances.audit,
        "pass": pass,
    });
    write_json(&dir.join("audit.json"), &report)?;
    print_report(&report);
    if !pass {
        return Err(Failure::audit("energy audit failed"));
    }
    Ok(())
}
