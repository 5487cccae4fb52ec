use std::path::Path;
use std::process::{Command, Output};

fn distmed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_distmed")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_study_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d");
    let o = distmed(&["simulate", "--sim", "4", "--runs", "5", "--boot", "100", "--seed", "7", "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let study: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("study.json")).unwrap()).unwrap();
    assert_eq!(study["schema_version"], 1);
    assert_eq!(study["study"]["runs"], 5);
    let curves = std::fs::read_to_string(out.join("curves.csv")).unwrap();
    assert_eq!(curves.lines().count(), 101);
    assert!(curves.starts_with("t,alpha,beta,indirect,rejection_rate\n"));

    // same seed, same bytes
    let again = dir.path().join("e");
    let o = distmed(&["simulate", "--sim", "4", "--runs", "5", "--boot", "100", "--seed", "7", "--out", path(&again)]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(out.join("study.json")).unwrap(), std::fs::read(again.join("study.json")).unwrap());
}

#[test]
fn usage_errors_exit_one() {
    let o = distmed(&["fit"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--input"));
    let o = distmed(&["simulate", "--sim", "4", "--runs", "5", "--boot", "100", "--out", "x"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--seed"));
    assert_eq!(distmed(&["fit", "--input", "x", "--out", "y", "--bogus"]).status.code(), Some(1));
    assert_eq!(distmed(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(distmed(&["fit", "--input", "/nonexistent/data.json", "--out", "y"]).status.code(), Some(1));
    let o = distmed(&["simulate", "--sim", "9", "--runs", "5", "--boot", "100", "--seed", "1", "--out", "x"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(distmed(&["--help"]).status.code(), Some(0));
}

#[test]
fn fit_test_sensitivity_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.json");
    let o = distmed(&[
        "simulate", "--sim", "4", "--runs", "1", "--boot", "100", "--seed", "3", "--n", "120",
        "--out", path(&dir.path().join("sim")), "--save-dataset", path(&data),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let fit = dir.path().join("fit");
    let o = distmed(&["fit", "--input", path(&data), "--out", path(&fit)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let curves = std::fs::read_to_string(fit.join("curves.csv")).unwrap();
    assert!(curves.starts_with("t,alpha,beta,indirect,p_pointwise,ci_lo,ci_hi\n"));
    assert!(curves.lines().nth(1).unwrap().ends_with(",,,"));

    let test = dir.path().join("test");
    let o = distmed(&["test", "--input", path(&data), "--boot", "100", "--seed", "5", "--out", path(&test)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(test.join("report.json")).unwrap()).unwrap();
    let p = report["report"]["inference"]["p_global"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
    assert_eq!(distmed(&["test", "--input", path(&data), "--out", path(&test)]).status.code(), Some(1));

    let sens = dir.path().join("sens");
    let o = distmed(&["sensitivity", "--input", path(&data), "--rho-grid", "-0.3:0.3:0.1", "--out", path(&sens)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(sens.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["sensitivity"]["results"].as_array().unwrap().len(), 7);
    let csv = std::fs::read_to_string(sens.join("sensitivity.csv")).unwrap();
    assert_eq!(csv.lines().count(), 8);
    assert!(csv.lines().nth(1).unwrap().starts_with("-0.3,"));

    let o = distmed(&["report", "--input", path(&sens.join("report.json"))]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("indirect effect") && text.contains("sensitivity"));
}

#[test]
fn ingest_then_fit_with_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut activity = String::from("subject_id,day,epoch_index,count,valid\n");
    let mut subjects = String::from("subject_id,z,x1,sleepmin,kss\n");
    for s in 0..30u64 {
        let z = s % 2;
        for e in 0..80u64 {
            let c = (e * (3 + s % 5) + 7 * z * e / 10) % 200;
            activity.push_str(&format!("s{s},1,{e},{c},1\n"));
        }
        subjects.push_str(&format!("s{s},{z},{},{},{}\n", (s % 7) as f64 / 7.0, 400 + s, s % 3));
    }
    let (a, sj, cfg) = (dir.path().join("a.csv"), dir.path().join("s.csv"), dir.path().join("c.toml"));
    std::fs::write(&a, activity).unwrap();
    std::fs::write(&sj, subjects).unwrap();
    std::fs::write(&cfg, "grid_size = 50\noutcome = \"sleepmin\"\n[pipeline.basis]\nkind = \"polynomial\"\nsize = 3\n").unwrap();
    let data = dir.path().join("data.json");
    let o = distmed(&["--config", path(&cfg), "ingest", "--activity", path(&a), "--subjects", path(&sj), "--out", path(&data)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let first = std::fs::read(&data).unwrap();
    let o = distmed(&["--config", path(&cfg), "ingest", "--activity", path(&a), "--subjects", path(&sj), "--out", path(&data)]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(&data).unwrap(), first);
    let out = dir.path().join("fit");
    let o = distmed(&["--config", path(&cfg), "fit", "--input", path(&data), "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["outcome"], "sleepmin");
    assert_eq!(report["config"]["pipeline"]["basis"]["size"], 3);
    assert_eq!(std::fs::read_to_string(out.join("curves.csv")).unwrap().lines().count(), 51);

    // ambiguous outcome without a config
    let o = distmed(&["ingest", "--activity", path(&a), "--subjects", path(&sj), "--out", path(&data)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--outcome"));
}
