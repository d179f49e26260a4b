//! End-to-end checks of the command-line interface: exit codes, file
//! formats, and bit-identical reruns.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_emt-lab")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("emt-lab-test-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary must run")
}

fn small_config(gates: &str) -> String {
    format!(
        r#"{{
  "domain": {{"kind": "disk", "center": [0.0, 0.0], "radius": 1.0}},
  "curve": {{"kind": "segment", "p0": [-0.3, 0.0], "p1": [0.3, 0.0]}},
  "background": {{"lambda": 1.0, "mu": 1.0}},
  "inclusion": {{"lambda": 2.0, "mu": 3.0}},
  "traction": {{"kind": "constant_strain", "strain": {{"a11": 1.0, "a12": 0.0, "a22": 0.0}}}},
  "eval_points": [[0.0, 1.0]],
  "eps": [0.04, 0.02],
  "mesh": {{"h": 0.12, "order": 2, "focus_factor": 4.0}},
  "quadrature": {{"order": 4, "panels": 8}},
  "fit_points": 2,
  "gates": {gates}
}}"#
    )
}

#[test]
fn shipped_configs_resolve() {
    for name in ["baseline.json", "rate-study.json"] {
        let path = format!("{}/../../configs/{name}", env!("CARGO_MANIFEST_DIR"));
        let text = std::fs::read_to_string(&path).unwrap();
        let cfg = emt_lab::config::StudyConfig::from_json(&text).unwrap();
        cfg.resolve(1, None).unwrap();
    }
}

#[test]
fn check_tensor_reports_and_exit_codes() {
    let dir = scratch("check-tensor");
    let iso = dir.join("iso.json");
    write(&iso, r#"{"lambda": 1.0, "mu": 1.0}"#);
    let out = run(&["check-tensor", iso.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("convexity margin:  2.0000"));
    assert!(text.contains("isotropic: yes"));

    let ident = dir.join("ident.json");
    write(&ident, r#"{"mandel": [[1,0,0],[0,1,0],[0,0,1]]}"#);
    let out = run(&["check-tensor", ident.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("convexity margin:  1.0000"));

    // asymmetric mandel: symmetry violation, exit 3
    let asym = dir.join("asym.json");
    write(&asym, r#"{"mandel": [[1,0.2,0],[0,1,0],[0,0,1]]}"#);
    let out = run(&["check-tensor", asym.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));

    // non-convex tensor, exit 3
    let bad = dir.join("nonconvex.json");
    write(&bad, r#"{"lambda": 1.0, "mu": -1.0}"#);
    let out = run(&["check-tensor", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));

    // malformed JSON, exit 2
    let junk = dir.join("junk.json");
    write(&junk, "{not json");
    let out = run(&["check-tensor", junk.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn emt_prints_coefficients_and_oracle() {
    let dir = scratch("emt");
    let c0 = dir.join("c0.json");
    let c1 = dir.join("c1.json");
    write(&c0, r#"{"lambda": 1.0, "mu": 1.0}"#);
    write(&c1, r#"{"lambda": 2.0, "mu": 3.0}"#);
    let out = run(&["emt", c0.to_str().unwrap(), c1.to_str().unwrap(), "--normal", "0,1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("a = -0.375"), "{text}");
    assert!(text.contains("b = -0.666666666667"), "{text}");
    assert!(text.contains("c = -1.916666666667"), "{text}");
    assert!(text.contains("d = -0.166666666667"), "{text}");
    assert!(text.contains("T (expansion convention)"));
    assert!(text.contains("transmission oracle residual"));
    // the residual figure printed must be tiny
    let resid_line = text.lines().find(|l| l.contains("oracle residual")).unwrap();
    let value: f64 = resid_line.rsplit(' ').next().unwrap().trim().parse().unwrap();
    assert!(value < 1e-10, "oracle residual {value}");

    // identical phases: zero tensors
    let out = run(&["emt", c0.to_str().unwrap(), c0.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("+0.000000000000e0"));

    // non-unit normal: exit 2
    let out = run(&["emt", c0.to_str().unwrap(), c1.to_str().unwrap(), "--normal", "0,2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn convergence_baseline_like_run_and_determinism() {
    let dir = scratch("convergence");
    let cfg = dir.join("study.json");
    write(&cfg, &small_config(r#"{"residual_slope": false, "l2_slope": false}"#));
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    let run_a = run(&["convergence", "--config", cfg.to_str().unwrap(), "--out", out_a.to_str().unwrap()]);
    assert!(run_a.status.success(), "{}", String::from_utf8_lossy(&run_a.stderr));
    let run_b = run(&["convergence", "--config", cfg.to_str().unwrap(), "--out", out_b.to_str().unwrap()]);
    assert!(run_b.status.success());
    // bit-identical artifacts across runs
    for name in ["sweep_y0.csv", "summary.json"] {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between reruns");
    }
    let csv = std::fs::read_to_string(out_a.join("sweep_y0.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "eps,area,lhs_x,lhs_y,rhs_exp_x,rhs_exp_y,rhs_neg_x,rhs_neg_y,resid_exp,resid_neg,l2_diff,h1_diff"
    );
    assert_eq!(csv.lines().count(), 3, "header plus one row per eps");
    let summary = std::fs::read_to_string(out_a.join("summary.json")).unwrap();
    assert!(summary.contains("\"pass\": true"));
    // rhs_neg is the exact negation of rhs_exp
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let rhs_exp_x: f64 = row[4].parse().unwrap();
    let rhs_neg_x: f64 = row[6].parse().unwrap();
    assert_eq!(rhs_exp_x, -rhs_neg_x);
}

#[test]
fn convergence_results_independent_of_jobs() {
    let dir = scratch("jobs");
    let cfg = dir.join("study.json");
    write(&cfg, &small_config(r#"{"residual_slope": false, "l2_slope": false}"#));
    let out_1 = dir.join("j1");
    let out_2 = dir.join("j2");
    let a = run(&["convergence", "--config", cfg.to_str().unwrap(), "--out", out_1.to_str().unwrap(), "--jobs", "1"]);
    assert!(a.status.success());
    let b = run(&["convergence", "--config", cfg.to_str().unwrap(), "--out", out_2.to_str().unwrap(), "--jobs", "2"]);
    assert!(b.status.success());
    let csv_1 = std::fs::read(out_1.join("sweep_y0.csv")).unwrap();
    let csv_2 = std::fs::read(out_2.join("sweep_y0.csv")).unwrap();
    assert_eq!(csv_1, csv_2, "worker count must not change any number");
}

#[test]
fn convergence_zero_contrast_is_degenerate_success() {
    let dir = scratch("zero-contrast");
    let cfg = dir.join("study.json");
    let text = small_config("{}").replace(r#""lambda": 2.0, "mu": 3.0"#, r#""lambda": 1.0, "mu": 1.0"#);
    write(&cfg, &text);
    let out_dir = dir.join("out");
    let out = run(&["convergence", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("degenerate"));
    let summary = std::fs::read_to_string(out_dir.join("summary.json")).unwrap();
    assert!(summary.contains("\"degenerate_zero_contrast\": true"));
}

#[test]
fn convergence_rejects_eps_beyond_reach() {
    let dir = scratch("bad-eps");
    let cfg = dir.join("study.json");
    // circular spine of radius 0.2 has reach 0.2; eps 0.25 exceeds it
    let text = small_config("{}")
        .replace(
            r#""curve": {"kind": "segment", "p0": [-0.3, 0.0], "p1": [0.3, 0.0]}"#,
            r#""curve": {"kind": "arc", "center": [0.0, 0.0], "radius": 0.2, "angle0": 0.0, "angle1": 6.283185307179586}"#,
        )
        .replace(r#""eps": [0.04, 0.02]"#, r#""eps": [0.25, 0.02]"#);
    write(&cfg, &text);
    let out = run(&["convergence", "--config", cfg.to_str().unwrap(), "--out", dir.join("out").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn solve_neumann_and_mesh_export_artifacts() {
    let dir = scratch("artifacts");
    let cfg = dir.join("study.json");
    write(&cfg, &small_config("{}"));
    let out_dir = dir.join("out");

    let out = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["field_background.csv", "field_perturbed.csv"] {
        let text = std::fs::read_to_string(out_dir.join(name)).unwrap();
        assert!(text.starts_with("node,x,y,ux,uy\n"));
        assert!(text.lines().count() > 100);
    }

    let out = run(&[
        "neumann",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--point-index",
        "0",
        "--dir",
        "1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("boundary mean"));
    assert!(out_dir.join("neumann_y0_d1.csv").exists());

    let out = run(&[
        "mesh-export",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--eps",
        "0.03",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(out_dir.join("mesh.txt")).unwrap();
    let mesh = emt_lab::mesh::Mesh::import_text(&text).unwrap();
    assert!(mesh.region_area(emt_lab::mesh::Region::Inclusion) > 0.0);
    // export of the import reproduces the file
    assert_eq!(mesh.export_text(), text);
}

#[test]
fn convergence_gate_failure_exits_one() {
    let dir = scratch("gate-fail");
    let cfg = dir.join("study.json");
    // an impossible residual-slope threshold must trip the gate
    let text = small_config(r#"{"l2_slope": false}"#).replace(
        r#""fit_points": 2"#,
        r#""fit_points": 2, "thresholds": {"residual_slope": 50.0}"#,
    );
    write(&cfg, &text);
    let out = run(&["convergence", "--config", cfg.to_str().unwrap(), "--out", dir.join("out").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}
