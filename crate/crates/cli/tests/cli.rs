use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn pgap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pgap"))
        .args(args)
        .current_dir(dir)
        .env("PGAP_THREADS", "1")
        .output()
        .expect("run pgap")
}

fn run_config(config: &str, command: &str, extra: &[&str]) -> (TempDir, Output) {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("run.json"), config).unwrap();
    let mut args = vec![command, "--config", "run.json", "--out", "out"];
    args.extend_from_slice(extra);
    let out = pgap(dir.path(), &args);
    (dir, out)
}

fn report(dir: &TempDir, name: &str) -> Value {
    let text = fs::read_to_string(dir.path().join("out").join(name)).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn ball_free_group_radius_three() {
    let (dir, out) = run_config(r#"{"group": {"family": "free", "params": {"k": 2}}, "radius": 3}"#, "ball", &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = report(&dir, "ball.json");
    assert_eq!(r["ball"]["size"], 53);
    assert_eq!(r["ball"]["perDepth"], serde_json::json!([1, 4, 12, 36]));
    assert_eq!(r["ball"]["symmetry"]["passed"], true);
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn ball_cyclic_five_radius_two() {
    let (dir, out) = run_config(r#"{"group": {"family": "cyclic", "params": {"n": 5}}, "radius": 2}"#, "ball", &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(report(&dir, "ball.json")["ball"]["size"], 5);
}

#[test]
fn asymmetric_weights_exit_two_naming_the_pair() {
    let config = r#"{"group": {"family": "cyclic", "params": {"n": 4}, "generators": [1, 3], "weights": [0.7, 0.3]}}"#;
    let (_dir, out) = run_config(config, "ball", &[]);
    assert_eq!(code(&out), 2);
    let msg = stderr(&out);
    assert!(msg.contains("m(s)") && msg.contains("m(s^3)"), "{msg}");
}

#[test]
fn unknown_keys_are_rejected() {
    let (_dir, out) = run_config(r#"{"group": {"family": "cyclic", "params": {"n": 4}}, "raduis": 3}"#, "ball", &[]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("raduis"));
}

#[test]
fn group_may_be_given_by_path() {
    let dir = TempDir::new().unwrap();
    fs::create_dir(dir.path().join("groups")).unwrap();
    fs::write(dir.path().join("groups/c7.json"), r#"{"family": "cyclic", "params": {"n": 7}}"#).unwrap();
    fs::write(dir.path().join("run.json"), r#"{"group": "groups/c7.json"}"#).unwrap();
    let out = pgap(dir.path(), &["ball", "--config", "run.json", "--out", "out"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = report(&dir, "ball.json");
    assert_eq!(r["ball"]["size"], 7);
    // The resolved config embeds the group inline.
    assert_eq!(r["config"]["group"]["family"], "cyclic");
}

#[test]
fn gap_cyclic_twelve_matches_characters() {
    let (dir, out) = run_config(r#"{"group": {"family": "cyclic", "params": {"n": 12}}, "p": 2}"#, "gap", &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = report(&dir, "gap.json");
    let c = num(&r["report"]["cDisp"]["value"]);
    assert!((c - 2.0 * (std::f64::consts::PI / 12.0).sin()).abs() < 1e-6, "{c}");
    assert_eq!(r["passed"], true);
    // Defaults are materialized into the embedded config.
    assert_eq!(r["config"]["domain"], "mean_zero");
    assert_eq!(r["config"]["gap"]["starts"], 32);
    assert_eq!(r["config"]["gap"]["maxIters"], 10000);
    let csv = fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    assert!(csv.starts_with("R,C_disp,C_r,C_grad,C_lap"));
}

#[test]
fn gap_full_domain_on_finite_group_exits_three() {
    let (_dir, out) = run_config(r#"{"group": {"family": "cyclic", "params": {"n": 6}}, "domain": "full"}"#, "gap", &[]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn gap_is_byte_identical_across_runs() {
    let config = r#"{"group": {"family": "dihedral", "params": {"n": 5}}, "p": 3, "gap": {"starts": 6, "battery": 2}}"#;
    let (a, out_a) = run_config(config, "gap", &["--seed", "11"]);
    let (b, out_b) = run_config(config, "gap", &["--seed", "11"]);
    assert_eq!(code(&out_a), 0, "{}", stderr(&out_a));
    assert_eq!(code(&out_b), 0);
    let ja = fs::read(a.path().join("out/gap.json")).unwrap();
    let jb = fs::read(b.path().join("out/gap.json")).unwrap();
    assert_eq!(ja, jb);
    let (c, _) = run_config(config, "gap", &["--seed", "12"]);
    assert_ne!(ja, fs::read(c.path().join("out/gap.json")).unwrap());
}

#[test]
fn gap_sweep_on_the_integers() {
    let config = r#"{"group": {"family": "integer_lattice", "params": {"d": 1}}, "radii": [8, 4, 16], "gap": {"starts": 8, "battery": 1}}"#;
    let (dir, out) = run_config(config, "gap", &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = report(&dir, "gap.json");
    let reports = r["reports"].as_array().unwrap();
    let radii: Vec<u64> = reports.iter().map(|x| x["radius"].as_u64().unwrap()).collect();
    assert_eq!(radii, [4, 8, 16]);
    let lap: Vec<f64> = reports.iter().map(|x| num(&x["cLap"]["value"])).collect();
    assert!(lap.windows(2).all(|w| w[1] < w[0]), "{lap:?}");
    let csv = fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn flag_overrides_reach_the_report() {
    let config = r#"{"group": {"family": "free", "params": {"k": 2}}, "radius": 2, "gap": {"battery": 1}}"#;
    let (dir, out) = run_config(config, "gap", &["--radius", "3", "--r", "inf", "--starts", "4", "--p", "2"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = report(&dir, "gap.json");
    assert_eq!(r["config"]["radius"], 3);
    assert_eq!(r["config"]["r"], "inf");
    assert_eq!(r["config"]["gap"]["starts"], 4);
    assert_eq!(r["report"]["r"], "inf");
    assert_eq!(r["report"]["ballSize"], 53);
}

#[test]
fn descend_random_coboundary_on_cyclic_eight() {
    let config = r#"{"group": {"family": "cyclic", "params": {"n": 8}}, "descend": {"cocycle": {"kind": "random_potential"}}}"#;
    let (dir, out) = run_config(config, "descend", &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let d = &report(&dir, "descend.json")["descent"];
    assert!(num(&d["terminalEnergy"]) <= 1e-6);
    assert!(num(&d["fixedPointError"]) <= 1e-4);
    assert!(num(&d["sampledGradient"]) <= 1e-3);
    let trace = fs::read_to_string(dir.path().join("out/trace.csv")).unwrap();
    assert!(trace.starts_with("iter,F,grad,step"));
}

#[test]
fn descend_from_potential_file() {
    let dir = TempDir::new().unwrap();
    let f0 = [0.5, -0.25, 1.0, 0.0, -0.75, 0.3];
    let mut csv = String::from("index,value\n");
    for (i, x) in f0.iter().enumerate() {
        csv.push_str(&format!("{i},{x}\n"));
    }
    fs::write(dir.path().join("f0.csv"), csv).unwrap();
    fs::write(
        dir.path().join("run.json"),
        r#"{"group": {"family": "symmetric", "params": {"n": 3}}, "p": 3,
            "descend": {"cocycle": {"kind": "potential", "path": "f0.csv"}}}"#,
    )
    .unwrap();
    let out = pgap(dir.path(), &["descend", "--config", "run.json", "--out", "out"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let d = &report(&dir, "descend.json")["descent"];
    assert!(num(&d["terminalEnergy"]) <= 1e-6);
    assert!(num(&d["fixedPointError"]) <= 1e-4);
}

#[test]
fn descend_zero_cocycle_stops_immediately() {
    let (dir, out) = run_config(r#"{"group": {"family": "cyclic", "params": {"n": 8}}}"#, "descend", &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let d = &report(&dir, "descend.json")["descent"];
    assert_eq!(d["iterations"], 0);
    assert_eq!(num(&d["terminalEnergy"]), 0.0);
    assert_eq!(d["reason"], "converged");
}

#[test]
fn descend_stall_exits_four() {
    let config = r#"{"group": {"family": "cyclic", "params": {"n": 8}},
        "descend": {"cocycle": {"kind": "random_potential"}, "options": {"armijo": 4.0}}}"#;
    let (dir, out) = run_config(config, "descend", &[]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    assert_eq!(report(&dir, "descend.json")["descent"]["reason"], "stalled");
}

fn table_dir() -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("c3.csv"), "0,1,2\n1,2,0\n2,0,1\n").unwrap();
    dir
}

fn write_vec(path: PathBuf, values: &[f64]) {
    let mut csv = String::from("index,value\n");
    for (i, x) in values.iter().enumerate() {
        csv.push_str(&format!("{i},{x}\n"));
    }
    fs::write(path, csv).unwrap();
}

#[test]
fn invalid_cocycle_on_table_group_exits_two() {
    let dir = table_dir();
    write_vec(dir.path().join("c1.csv"), &[1.0, 0.0, 0.0]);
    write_vec(dir.path().join("c2.csv"), &[0.0, 0.0, 1.0]);
    fs::write(
        dir.path().join("run.json"),
        r#"{"group": {"family": "table", "params": {"path": "c3.csv"}, "generators": [1, 2]},
            "domain": "full",
            "descend": {"cocycle": {"kind": "generators", "values": {"g1": "c1.csv", "g2": "c2.csv"}}}}"#,
    )
    .unwrap();
    let out = pgap(dir.path(), &["descend", "--config", "run.json", "--out", "out"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("invalid cocycle"), "{}", stderr(&out));
}

#[test]
fn valid_generator_cocycle_on_table_group_descends() {
    let dir = table_dir();
    // c = df for f = δ_{g1}, with df(γ) = λ(γ)f − f and λ(γ)δ_x = δ_{γx}.
    fs::write(
        dir.path().join("ball.json"),
        r#"{"group": {"family": "table", "params": {"path": "c3.csv"}, "generators": [1, 2]}}"#,
    )
    .unwrap();
    let out = pgap(dir.path(), &["ball", "--config", "ball.json", "--out", "out"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let b = report(&dir, "ball.json");
    let labels: Vec<String> = b["ball"]["elements"].as_array().unwrap().iter().map(|x| x.as_str().unwrap().to_string()).collect();
    let gens: Vec<String> = b["ball"]["generators"].as_array().unwrap().iter().map(|x| x.as_str().unwrap().to_string()).collect();
    assert_eq!(labels.len(), 3);
    let idx = |label: &str| labels.iter().position(|l| l == label).unwrap();
    let e = idx(&labels[0]);
    let g1 = idx(&gens[0]);
    let g2 = idx(&gens[1]);
    // λ(g1)f = δ_{g1·g1} = δ_{g2}; λ(g2)f = δ_{g2·g1} = δ_e.
    let mut c1 = [0.0; 3];
    c1[g2] += 1.0;
    c1[g1] -= 1.0;
    let mut c2 = [0.0; 3];
    c2[e] += 1.0;
    c2[g1] -= 1.0;
    write_vec(dir.path().join("c1.csv"), &c1);
    write_vec(dir.path().join("c2.csv"), &c2);
    fs::write(
        dir.path().join("run.json"),
        format!(
            r#"{{"group": {{"family": "table", "params": {{"path": "c3.csv"}}, "generators": [1, 2]}},
                "descend": {{"cocycle": {{"kind": "generators", "values": {{"{}": "c1.csv", "{}": "c2.csv"}}}}}}}}"#,
            gens[0], gens[1]
        ),
    )
    .unwrap();
    let out = pgap(dir.path(), &["descend", "--config", "run.json", "--out", "out"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let d = &report(&dir, "descend.json")["descent"];
    assert!(num(&d["potentialResidual"]) < 1e-9);
    assert!(num(&d["terminalEnergy"]) <= 1e-6);
    assert!(num(&d["fixedPointError"]) <= 1e-4);
}

#[test]
fn verify_default_suites_on_cyclic_six() {
    let config = r#"{"group": {"family": "cyclic", "params": {"n": 6}}, "verify": {"options": {"ps": [1.5, 2, 3]}}}"#;
    let (dir, out) = run_config(config, "verify", &[]);
    assert_eq!(code(&out), 0, "{}{}", stderr(&out), String::from_utf8_lossy(&out.stdout));
    let v = &report(&dir, "verify.json")["verify"];
    assert_eq!(v["passed"], true);
    assert_eq!(v["suites"].as_array().unwrap().len(), 7);
}

#[test]
fn verify_reports_a_corrupted_translation() {
    let config = r#"{"group": {"family": "cyclic", "params": {"n": 6}},
        "verify": {"suites": ["ball", "energy"], "corrupt": {"generator": 0, "index": 2, "target": 1}}}"#;
    let (dir, out) = run_config(config, "verify", &[]);
    assert_eq!(code(&out), 1);
    let v = &report(&dir, "verify.json")["verify"];
    let ball = &v["checks"][0];
    assert_eq!(ball["passed"], false);
    assert!(ball["counterexample"][0].as_str().unwrap().contains("translate"));
}

#[test]
fn verify_empty_selection_is_a_pass() {
    let config = r#"{"group": {"family": "cyclic", "params": {"n": 6}}, "verify": {"suites": []}}"#;
    let (dir, out) = run_config(config, "verify", &[]);
    assert_eq!(code(&out), 0);
    assert_eq!(report(&dir, "verify.json")["verify"]["checks"], serde_json::json!([]));
}

#[test]
fn moduli_curves_and_csv() {
    let config = r#"{"p": 2, "moduli": {"dim": 4, "epsGrid": [0.5, 1, 2], "tauGrid": [0.25, 0.5, 1, 2, 4],
        "trials": 500, "options": {"starts": 16, "iters": 150}}}"#;
    let (dir, out) = run_config(config, "moduli", &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let m = &report(&dir, "moduli.json")["moduli"];
    let delta = num(&m["convexity"]["estimates"][1]);
    assert!((delta - (1.0 - 3f64.sqrt() / 2.0)).abs() < 1e-3);
    assert_eq!(m["duality"]["violations"], 0);
    assert_eq!(m["duality"]["skipped"], 1);
    let csv = fs::read_to_string(dir.path().join("out/smoothness.csv")).unwrap();
    assert!(csv.starts_with("argument,estimate,starts,spread"));
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn moduli_rejects_bad_epsilon() {
    let (_dir, out) = run_config(r#"{"moduli": {"epsGrid": [2.5], "trials": 1}}"#, "moduli", &[]);
    assert_eq!(code(&out), 2);
}

#[test]
fn bad_thread_count_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_pgap"))
        .args(["moduli", "--out", "out"])
        .current_dir(dir.path())
        .env("PGAP_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}
