use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use anosov_lab::{load_config, LabConfig};
use serde_json::Value;

const FAST: [&str; 4] = [
    "--set",
    "resolution.grid=64",
    "--set",
    "resolution.field_iterations=12",
];

fn lab(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_anosov-lab"));
    cmd.args(args);
    cmd.env_remove("ANOSOV_LAB_OUT");
    if let Some(dir) = env_out {
        cmd.env("ANOSOV_LAB_OUT", dir);
    }
    cmd.output().expect("binary runs")
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(lab(&["--help"], None).status.code(), Some(0));
    assert_eq!(lab(&["--version"], None).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(lab(&[], None).status.code(), Some(1));
    assert_eq!(lab(&["nonsense"], None).status.code(), Some(1));
    assert_eq!(lab(&["eigen", "--bogus"], None).status.code(), Some(1));
}

#[test]
fn missing_config_file_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.json");
    let o = lab(&["eigen", "--config", missing.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope.json"), "{}", stderr(&o));
}

#[test]
fn config_errors_report_the_key_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    fs::write(&cfg, r#"{"group": {"generators": [[2, 1, 1, 1], [1, 1, 1, 1]]}}"#).unwrap();
    let out = tmp.path().join("out");
    let o = lab(&["eigen", "-c", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("group.generators[1]"), "{}", stderr(&o));
    assert!(!out.join("report.json").exists());

    for (set, key) in [
        ("resolution.grid=96", "resolution.grid"),
        ("resolution.eps=-1", "resolution.eps"),
        ("resolution.graph.samples=4", "resolution.graph.samples"),
        ("resolution.heteroclinic_radius=4", "resolution.heteroclinic_radius"),
        ("resolution.linearize.spacing=0", "resolution.linearize.spacing"),
        ("thresholds.prop1=0", "thresholds.prop1"),
        ("experiment.format=\"xml\"", "experiment.format"),
        ("resolution.typo=1", "resolution"),
    ] {
        let o = lab(&["eigen", "--set", set, "--out", out.to_str().unwrap()], None);
        assert_eq!(o.status.code(), Some(1), "{set}");
        assert!(stderr(&o).contains(key), "{set}: {}", stderr(&o));
    }
}

#[test]
fn eigen_reports_the_pair_certificate() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lab(&["eigen", "--out", tmp.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    let r = report(tmp.path());
    let sine = r["summary"]["min_pairwise_sine"].as_f64().unwrap();
    assert!((sine - 1.0 / 5f64.sqrt()).abs() < 1e-12);
    assert_eq!(r["summary"]["hypothesis_ok"], Value::Bool(true));
    assert_eq!(r["exit_code"], 0);
    assert_eq!(r["status"], "complete");
}

#[test]
fn output_directory_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let env_dir = tmp.path().join("env");
    let flag_dir = tmp.path().join("flag");
    let cfg_dir = tmp.path().join("cfg");
    let set = format!("experiment.output_dir={}", cfg_dir.display());

    assert_eq!(lab(&["eigen", "--set", &set], None).status.code(), Some(0));
    assert!(cfg_dir.join("report.json").exists());

    assert_eq!(lab(&["eigen", "--set", &set], Some(&env_dir)).status.code(), Some(0));
    assert!(env_dir.join("report.json").exists());

    let o = lab(&["eigen", "--set", &set, "--out", flag_dir.to_str().unwrap()], Some(&env_dir));
    assert_eq!(o.status.code(), Some(0));
    assert!(flag_dir.join("report.json").exists());
    // the echoed config keeps the configured directory
    assert_eq!(
        report(&flag_dir)["config"]["experiment"]["output_dir"],
        Value::String(cfg_dir.display().to_string())
    );
}

#[test]
fn csv_bundle_manifest_files_exist_and_have_headers() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["lemma3", "--format", "csv-bundle", "--out", tmp.path().to_str().unwrap()];
    args.extend(FAST);
    let o = lab(&args, None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(tmp.path());
    let manifest: Vec<&str> = r["manifest"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    let tables = r["tables"].as_array().unwrap();
    assert!(!tables.is_empty());
    for t in tables {
        let name = format!("{}.csv", t["name"].as_str().unwrap());
        assert!(manifest.contains(&name.as_str()), "{name} not in manifest");
        let text = fs::read_to_string(tmp.path().join(&name)).unwrap();
        let header = text.lines().next().unwrap();
        let columns: Vec<&str> = t["columns"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect();
        assert_eq!(header, columns.join(","));
        assert_eq!(text.lines().count(), 1 + t["rows"].as_array().unwrap().len());
    }
    for file in manifest {
        assert!(fs::metadata(tmp.path().join(file)).unwrap().len() > 0, "{file}");
    }
    assert!(fs::read_to_string(tmp.path().join("report.json")).unwrap().ends_with("}\n"));
}

#[test]
fn echoed_config_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lab(
        &[
            "eigen",
            "--set",
            "resolution.grid=128",
            "--set",
            r#"action.modes=[{"k":[0,1],"shape":"sin","amplitude":[1,0]}]"#,
            "--set",
            "action.deriv_bound=0.02",
            "--set",
            r#"experiment.synthetic={"kind":"scale","factor":2}"#,
            "--set",
            "experiment.seed=7",
            "--out",
            tmp.path().to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0));
    let echoed = report(tmp.path())["config"].clone();
    let reparsed: LabConfig = load_config(Some(&echoed.to_string()), &[]).unwrap();
    assert_eq!(reparsed.resolution.grid, 128);
    assert_eq!(reparsed.experiment.seed, 7);
    assert_eq!(reparsed.to_value(), echoed);
    // every defaulted section is echoed
    for section in ["group", "action", "resolution", "thresholds", "experiment"] {
        assert!(echoed.get(section).is_some(), "{section}");
    }
    assert!(echoed["resolution"]["linearize"]["h_y"].is_number());
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let mut args = vec!["conjugacy", "--format", "csv-bundle", "--out", dir.to_str().unwrap()];
        args.extend(FAST);
        args.extend(["--set", r#"action.modes=[{"k":[1,1],"shape":"cos","amplitude":[0.004,0.003]}]"#]);
        assert_eq!(lab(&args, None).status.code(), Some(0));
    }
    for entry in fs::read_dir(&a).unwrap() {
        let name = entry.unwrap().file_name();
        if name == "timings.json" {
            continue;
        }
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?}");
    }
}

#[test]
fn obstructed_periodic_data_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("contrast.json");
    fs::write(
        &cfg,
        r#"{"action": {"kind": "single-generator", "deriv_bound": 0.03, "modes": [
            {"k": [0, 1], "shape": "sin", "amplitude": [0.5, 0.0]},
            {"k": [1, 0], "shape": "sin", "amplitude": [0.0, 0.5]},
            {"k": [1, 1], "shape": "cos", "amplitude": [0.5, 0.0]}]}}"#,
    )
    .unwrap();
    let out = tmp.path().join("out");
    let o = lab(&["periodic-data", "-c", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let r = report(&out);
    assert_eq!(r["status"], "obstructed");
    assert!(r["summary"]["max_mismatch"].as_f64().unwrap() > 1e-4);
}

#[test]
fn failed_judgement_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["transversality", "--set", "thresholds.transversality=1.5", "--out", tmp.path().to_str().unwrap()];
    args.extend(FAST);
    let o = lab(&args, None);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(report(tmp.path())["status"], "inconclusive");
}

#[test]
fn pair_subcommands_on_a_single_generator_are_skipped_not_crashed() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["lemma3", "--set", "action.kind=\"single-generator\"", "--out", tmp.path().to_str().unwrap()];
    args.extend(FAST);
    let o = lab(&args, None);
    assert_eq!(o.status.code(), Some(3));
    let r = report(tmp.path());
    let skipped = r["diagnostics"]
        .as_array()
        .unwrap()
        .iter()
        .any(|d| d["name"] == "lemma3_deviation" && d["status"] == "skipped");
    assert!(skipped);
}

#[test]
fn synthetic_prop1_matches_the_derivative_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lab(
        &[
            "prop1",
            "--set",
            r#"experiment.synthetic={"kind":"sine","amplitude":0.25}"#,
            "--set",
            "experiment.y0=0.1",
            "--out",
            tmp.path().to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0));
    let r = report(tmp.path());
    let h = |x: f64| x + 0.25 * x.sin();
    // invert h by bisection
    let (mut lo, mut hi) = (-1.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) < 0.1 {
            lo = mid
        } else {
            hi = mid
        }
    }
    let oracle = 1.0 + 0.25 * (0.5 * (lo + hi)).cos();
    assert!((r["summary"]["alpha"].as_f64().unwrap() - oracle).abs() < 1e-6);
    assert!(tmp.path().join("g.csv").exists());
}
