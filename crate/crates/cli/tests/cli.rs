use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sprphs::formats::{parse_controller, parse_system, to_canonical_json};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sprphs"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn seeded() -> (TempDir, PathBuf) {
    let tmp = TempDir::new().unwrap();
    let fx = tmp.path().join("fixtures");
    let out = run(&["--seed-fixtures", fx.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (tmp, fx)
}

fn cmd(sub: &str, config: &Path, out: &Path, controller: Option<&Path>) -> Output {
    let mut args = vec![sub, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    if let Some(c) = controller {
        args.extend(["--controller", c.to_str().unwrap()]);
    }
    run(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Rows of a CSV file as numbers, header dropped.
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn edit_json(path: &Path, f: impl FnOnce(&mut serde_json::Value)) -> PathBuf {
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    f(&mut v);
    let dst = path.with_extension("edited.json");
    fs::write(&dst, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    dst
}

#[test]
fn beam_model_has_eighty_states_and_passes_structure() {
    let (tmp, fx) = seeded();
    let out = tmp.path().join("beam");
    let o = cmd("model", &fx.join("beam.json"), &out, None);
    assert!(o.status.success(), "{}", stderr(&o));
    let sys = parse_system(&fs::read_to_string(out.join("system.json")).unwrap()).unwrap();
    assert_eq!(sys.n_c, 80);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("structure.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    assert!(out.join("J.csv").exists() && out.join("well_posedness.json").exists());
}

#[test]
fn wave_model_has_118_states() {
    let (tmp, fx) = seeded();
    let out = tmp.path().join("wave");
    assert!(cmd("model", &fx.join("wave.json"), &out, None).status.success());
    let sys = parse_system(&fs::read_to_string(out.join("system.json")).unwrap()).unwrap();
    assert_eq!(sys.n_c, 118);
}

#[test]
fn negative_density_is_a_validation_error() {
    let (tmp, fx) = seeded();
    let cfg = edit_json(&fx.join("beam.json"), |v| v["model"]["rho"] = (-0.0643).into());
    let o = cmd("model", &cfg, &tmp.path().join("x"), None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("model.rho"), "{}", stderr(&o));
}

#[test]
fn malformed_config_is_a_validation_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("bad.json");
    fs::write(&cfg, "{ not json").unwrap();
    let o = cmd("synth", &cfg, &tmp.path().join("x"), None);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));
}

#[test]
fn scalar_fixture_gives_golden_ratio() {
    let (tmp, fx) = seeded();
    let out = tmp.path().join("scalar");
    let o = cmd("synth", &fx.join("scalar.json"), &out, None);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("controller.json")).unwrap();
    let file = parse_controller(&text).unwrap();
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    assert!((file.controller.q_c[(0, 0)] - phi).abs() < 1e-9);
    // the file re-serializes to the same bytes
    assert_eq!(to_canonical_json(&file).unwrap(), text);
}

#[test]
fn inadmissible_grid_exits_with_infeasibility() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("lossy.json");
    // A − BK = [[−δ, 1], [−1, −δ]] with K = 0: H_M has eigenvalues ±δ ± i
    fs::write(
        &cfg,
        r#"{
          "model": {"builder": "inline", "J": [[0, 1], [-1, 0]], "R": [[1e-13, 0], [0, 1e-13]],
                    "Q": [[1, 0], [0, 1]], "B": [[1], [0]]},
          "design": {"q_lqr": 1, "r_lqr": 1, "rc_alpha_grid": [1, 0.01], "K": [[0, 0]]}
        }"#,
    )
    .unwrap();
    let o = cmd("synth", &cfg, &tmp.path().join("x"), None);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("no admissible alpha"), "{}", stderr(&o));
}

#[test]
fn verify_detects_tampered_observer_gain() {
    let (tmp, fx) = seeded();
    let out = tmp.path().join("s");
    assert!(cmd("synth", &fx.join("scalar.json"), &out, None).status.success());
    let ctrl = out.join("controller.json");
    assert!(cmd("verify", &fx.join("scalar.json"), &out, Some(&ctrl)).status.success());
    let bad = edit_json(&ctrl, |v| {
        let l = v["controller"]["L"][0][0].as_f64().unwrap();
        v["controller"]["L"][0][0] = (l + 1e-3).into();
    });
    let o = cmd("verify", &fx.join("scalar.json"), &out, Some(&bad));
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn scalar_trajectory_matches_closed_form() {
    let (tmp, fx) = seeded();
    let out = tmp.path().join("s");
    let o = cmd("simulate", &fx.join("scalar.json"), &out, None);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&out.join("trajectory.csv"));
    assert_eq!(&header[..3], &["t", "x0", "xhat0"]);
    // A_cl = [[0, −1], [1/φ, −φ]] has eigenvalues −1 and −1/φ.
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let (l1, l2) = (-1.0, -1.0 / phi);
    for row in &rows {
        let t = row[0];
        // x(0) = 1, x̂(0) = 0: x = (λ1·e^{λ2 t} − λ2·e^{λ1 t})/(λ1 − λ2) with x'(0) = 0
        let x = (l1 * (l2 * t).exp() - l2 * (l1 * t).exp()) / (l1 - l2);
        let xh = (1.0 / phi) * ((l1 * t).exp() - (l2 * t).exp()) / (l1 - l2);
        assert!((row[1] - x).abs() < 1e-8, "t={t}: {} vs {x}", row[1]);
        assert!((row[2] - xh).abs() < 1e-8, "t={t}: {} vs {xh}", row[2]);
    }
    let audit: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("audit.json")).unwrap()).unwrap();
    assert_eq!(audit["pass"], true);
}

#[test]
fn zero_initial_condition_gives_zero_traces() {
    let (tmp, fx) = seeded();
    let cfg = edit_json(&fx.join("scalar.json"), |v| {
        v["simulation"]["initial"] = serde_json::json!({"kind": "zero"});
        v["simulation"]["t_end"] = 0.1.into();
    });
    let out = tmp.path().join("z");
    let o = cmd("simulate", &cfg, &out, None);
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, rows) = read_csv(&out.join("trajectory.csv"));
    assert!(rows.iter().flat_map(|r| &r[1..]).all(|&v| v == 0.0));
}

#[test]
fn beam_analysis_and_short_simulation() {
    let (tmp, fx) = seeded();
    let out = tmp.path().join("beam");
    assert!(cmd("synth", &fx.join("beam.json"), &out, None).status.success());
    let ctrl = out.join("controller.json");
    let o = cmd("analyze", &fx.join("beam.json"), &out, Some(&ctrl));
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, eig) = {
        let text = fs::read_to_string(out.join("eigenvalues.csv")).unwrap();
        (text.lines().next().unwrap().to_string(), text.lines().count() - 1)
    };
    assert_eq!(eig, 80 * 3 + 160);
    let spill = fs::read_to_string(out.join("spillover.csv")).unwrap();
    let row_120 = spill.lines().find(|l| l.starts_with("30,120,")).expect("row for 30 elements");
    assert!(row_120.contains(",true,"), "{row_120}");

    let short = edit_json(&fx.join("beam.json"), |v| v["simulation"]["t_end"] = 2e-3.into());
    let o = cmd("simulate", &short, &out, Some(&ctrl));
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&out.join("deformation.csv"));
    assert_eq!(header, ["t", "zeta", "w"]);
    let tip0 = rows.iter().find(|r| r[0] == 0.0 && (r[1] - 0.3).abs() < 1e-12).unwrap()[2];
    assert!((tip0 - 1e-3).abs() < 1e-15);
}

#[test]
fn wave_analysis_reports_naive_rows() {
    let (tmp, fx) = seeded();
    let cfg = edit_json(&fx.join("wave.json"), |v| v["analysis"]["eval_orders"] = serde_json::json!([67]));
    let out = tmp.path().join("wave");
    let o = cmd("analyze", &cfg, &out, None);
    assert!(o.status.success(), "{}", stderr(&o));
    let spr = fs::read_to_string(out.join("spillover.csv")).unwrap();
    assert!(spr.lines().nth(1).unwrap().starts_with("67,134,") && spr.contains(",true,"));
    let naive = fs::read_to_string(out.join("spillover_naive_lqg.csv")).unwrap();
    assert_eq!(naive.lines().count(), 2);
}

#[test]
fn controller_order_mismatch_is_rejected() {
    let (tmp, fx) = seeded();
    let out = tmp.path().join("s");
    assert!(cmd("synth", &fx.join("scalar.json"), &out, None).status.success());
    let o = cmd("analyze", &fx.join("beam.json"), &out, Some(&out.join("controller.json")));
    assert_eq!(o.status.code(), Some(2));
}
