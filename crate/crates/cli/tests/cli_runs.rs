mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::{cube_points, signs};
use predmult::bnb::{solve, Budget, MipModel, SolveOptions};
use predmult::formulation::FormulationParams;
use predmult::lp::{LinearProgram, Relation};
use predmult::path::fit_baseline;
use predmult_cli::ingest::ingest_csv;
use predmult_cli::{run, RunConfig, Verb};
use predmult_oracles::arrangement::CubeOracle;
use predmult_oracles::mps::{parse, RowKind};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn predmult(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_predmult"))
        .args(args)
        .arg("--output-dir")
        .arg(out)
        .output()
        .unwrap()
}

fn compas_config(out: &Path) -> RunConfig {
    RunConfig {
        dataset: Some(fixture("compas_style_200.csv")),
        label_column: "two_year_recid".into(),
        group_column: Some("race".into()),
        output_dir: out.to_path_buf(),
        ..RunConfig::default()
    }
}

#[test]
fn xor_audit_writes_every_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = predmult(&["audit", "--generator", "xor", "--epsilons", "0"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    assert_eq!(csv.lines().nth(1), Some("0,0.5,0.5,true,1.0,1.0,true"));
    for file in ["profile.json", "baseline.json", "pool.json", "burden.csv", "run_manifest.json"] {
        assert!(dir.path().join(file).exists(), "{file}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run_manifest.json")).unwrap()).unwrap();
    assert!(manifest["failed_stage"].is_null());
    assert_eq!(manifest["config"]["generator"], "xor");
    let baseline: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("baseline.json")).unwrap()).unwrap();
    assert_eq!(baseline["train_risk"]["mistakes"], 25);
    assert!(baseline["test_risk"].is_null());
}

#[test]
fn compas_fixture_matches_golden_and_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let config = compas_config(dir.path());
    let summary = run(&config, Verb::Audit).unwrap();
    let golden = fs::read_to_string(fixture("compas_style_200.profile.csv")).unwrap();
    assert_eq!(fs::read_to_string(dir.path().join("profile.csv")).unwrap(), golden);

    let train = ingest_csv(&fixture("compas_style_200.csv"), &config).unwrap().train;
    let fit = fit_baseline(&train, &FormulationParams::default(), Budget::unlimited()).unwrap();
    let oracle = CubeOracle::new(train.dim());
    let points = cube_points(&train);
    let preds = signs(&fit.classifier, &train);
    assert_eq!(fit.mistakes, oracle.min_mistakes(&points));
    let profile = summary.profile.unwrap();
    for e in &profile.entries {
        let allowed = fit.mistakes + e.allowance;
        let (d, a) = (e.discrepancy.unwrap(), e.ambiguity.unwrap());
        assert!(d.certified && a.certified);
        assert_eq!(d.lower_count, oracle.max_disagreement(&points, &preds, allowed));
        assert_eq!(a.lower_count, oracle.ambiguous_weight(&points, &preds, allowed));
    }
    let one_percent = profile
        .entries
        .iter()
        .find(|e| e.allowance == (train.total_weight() as f64 * 0.01).floor() as u64)
        .unwrap();
    assert!(one_percent.ambiguity.unwrap().lower_count > 0);
    let burden = fs::read_to_string(dir.path().join("burden.csv")).unwrap();
    assert_eq!(burden.lines().count(), 1 + 2 * profile.entries.len());
}

#[test]
fn input_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = fixture("compas_style_200.csv");
    let out = predmult(&["audit", "--dataset", data.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("label"));
    let out = predmult(&["baseline", "--generator", "xor", "--split-fraction", "1.5"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stage_failure_exits_with_3_and_marks_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = predmult(&["audit", "--generator", "xor", "--big-m", "0.5"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["failed_stage"], "baseline");
    assert_eq!(manifest["stages"][0]["stage"], "load");
    assert_eq!(manifest["stages"][0]["ok"], true);
    assert!(!dir.path().join("profile.csv").exists());
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(&conf, "generator = xor\nepsilons = 0, 0.01, 0.02\nnode_log = true\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = predmult(
        &["discrepancy", "--config", conf.to_str().unwrap(), "--epsilons", "0"],
        &out_dir,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("profile.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert_eq!(csv.lines().nth(1), Some("0,0.5,0.5,true,,,"));
    let log = fs::read_to_string(out_dir.join("node_log.txt")).unwrap();
    assert!(log.lines().all(|l| l.split(' ').count() == 5), "{log}");
}

#[test]
fn split_membership_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ten.csv");
    let mut text = String::from("a,b,label\n");
    for i in 0..10 {
        text.push_str(&format!("{},{},{}\n", i % 2, (i / 2) % 2, i % 3 % 2));
    }
    fs::write(&path, text).unwrap();
    let config = RunConfig {
        dataset: Some(path.clone()),
        split_seed: 17,
        ..RunConfig::default()
    };
    let a = ingest_csv(&path, &config).unwrap();
    let b = ingest_csv(&path, &config).unwrap();
    assert_eq!(a.train, b.train);
    assert_eq!(a.test, b.test);
    assert_eq!((a.report.train_rows, a.report.test_rows), (8, 2));
}

#[test]
fn generate_writes_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("xor.csv");
    let out = Command::new(env!("CARGO_BIN_EXE_predmult"))
        .args(["generate", "xor", "--scale", "2", "--output"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next(), Some("x1,x2,label"));
    assert_eq!(text.lines().count(), 201);
    assert_eq!(text.lines().filter(|l| l.ends_with(",1")).count(), 100);
}

#[test]
fn exported_xor_baseline_solves_to_25() {
    let dir = tempfile::tempdir().unwrap();
    let out = predmult(&["export-mps", "--generator", "xor"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let files: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(files.len(), 1);
    let name = files[0].file_name().unwrap().to_string_lossy().into_owned();
    assert!(name.starts_with("xor_baseline_") && name.ends_with(".mps") && name.len() == 25, "{name}");
    let dense = parse(&fs::read_to_string(&files[0]).unwrap()).unwrap();
    let mut lp = LinearProgram::new(dense.objective.clone(), dense.bounds.clone());
    for (a, kind, b) in dense.rows {
        let rel = match kind {
            RowKind::Le => Relation::LessEq,
            RowKind::Ge => Relation::GreaterEq,
            RowKind::Eq => Relation::Equal,
        };
        lp.add_row(a, rel, b);
    }
    let binaries = (0..dense.integer.len()).filter(|&j| dense.integer[j]).collect();
    let model = MipModel::new(lp, binaries).unwrap();
    let r = solve(&model, Budget::unlimited(), &SolveOptions::default()).unwrap();
    assert!(r.is_certified());
    assert_eq!(r.upper_bound, 25.0);
}

#[test]
fn tyranny_burden_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = predmult(&["audit", "--generator", "tyranny", "--epsilons", "multiples:1"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let burden = fs::read_to_string(dir.path().join("burden.csv")).unwrap();
    let rows: Vec<&str> = burden.lines().collect();
    assert_eq!(rows[0], "group,epsilon,amb_lower,amb_upper,amb_certified");
    assert_eq!(rows[1], "A,0,0.0,0.0,true");
    assert_eq!(rows[2], "B,0,0.0,0.0,true");
    assert!(rows[3].starts_with("A,0.00083") && rows[3].ends_with(",0.75,0.75,true"));
    assert!(rows[4].starts_with("B,0.00083") && rows[4].ends_with(",0.75,0.75,true"));
}

#[test]
fn adhoc_verb_reports_uncertified_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let out = predmult(&["adhoc", "--generator", "xor", "--epsilons", "0,0.01"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("adhoc.json")).unwrap()).unwrap();
    assert_eq!(report["models"].as_array().unwrap().len(), 1100);
    let csv = fs::read_to_string(dir.path().join("adhoc_profile.csv")).unwrap();
    for row in csv.lines().skip(1) {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!((cells[3], cells[6]), ("false", "false"), "{row}");
    }
    assert!(!dir.path().join("baseline.json").exists());
}
