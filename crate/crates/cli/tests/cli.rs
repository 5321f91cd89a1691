use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nilm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nilm"))
        .args(args)
        .env_remove("NILM_DATA_DIR")
        .output()
        .expect("spawn nilm")
}

fn nilm_env(args: &[&str], key: &str, value: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nilm"))
        .args(args)
        .env(key, value)
        .output()
        .expect("spawn nilm")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn assert_ok(o: &Output) {
    assert!(o.status.success(), "status {:?}\nstderr: {}", o.status, String::from_utf8_lossy(&o.stderr));
}

fn without_timings(report_csv: &str) -> String {
    report_csv
        .lines()
        .filter(|l| !l.contains("Train time (s)") && !l.contains("Disaggregate time (s)"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().display().to_string(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn run_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let o = nilm(&["--quiet", "run", "--output", path(&out)]);
    assert_ok(&o);
    for f in ["report.csv", "report.json", "model_co.json", "model_fhmm.json", "manifest.json"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    assert!(out.join("predictions_co/dataset.json").is_file());
    assert!(out.join("predictions_fhmm/dataset.json").is_file());
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(csv.starts_with("appliance,metric,algorithm,value\n"));
    for name in ["fridge", "toaster", "air_conditioner"] {
        assert!(csv.contains(&format!("{name},NEP,co,")));
        assert!(csv.contains(&format!("{name},NEP,fhmm,")));
    }
}

#[test]
fn run_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_ok(&nilm(&["--quiet", "run", "--output", path(&a)]));
    assert_ok(&nilm(&["--quiet", "run", "--output", path(&b)]));
    let (ta, tb) = (tree(&a), tree(&b));
    assert_eq!(ta.keys().collect::<Vec<_>>(), tb.keys().collect::<Vec<_>>());
    for (name, bytes) in &ta {
        match name.as_str() {
            "manifest.json" | "report.json" => {}
            "report.csv" => assert_eq!(
                without_timings(&String::from_utf8_lossy(bytes)),
                without_timings(&String::from_utf8_lossy(&tb[name]))
            ),
            _ => assert_eq!(bytes, &tb[name], "{name} differs"),
        }
    }
    let manifest: serde_json::Value = serde_json::from_slice(&ta["manifest.json"]).unwrap();
    let other: serde_json::Value = serde_json::from_slice(&tb["manifest.json"]).unwrap();
    assert_eq!(manifest["config_sha256"], other["config_sha256"]);
    assert_eq!(manifest["seed"], 42);
}

#[test]
fn staged_commands_match_one_shot_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_ok(&nilm(&["--quiet", "run", "--output", path(&d.join("run"))]));
    assert_ok(&nilm(&["--quiet", "preprocess", "--output", path(&d.join("pre"))]));
    assert_ok(&nilm(&["--quiet", "train", "--input", path(&d.join("pre/train")), "--output", path(&d.join("models"))]));
    assert_ok(&nilm(&[
        "--quiet",
        "disaggregate",
        "--input",
        path(&d.join("pre/test")),
        "--models",
        path(&d.join("models")),
        "--output",
        path(&d.join("pred")),
    ]));
    assert_ok(&nilm(&[
        "--quiet",
        "evaluate",
        "--input",
        path(&d.join("pre/test")),
        "--predictions",
        path(&d.join("pred")),
        "--models",
        path(&d.join("models")),
        "--output",
        path(&d.join("eval")),
    ]));
    let one_shot = fs::read_to_string(d.join("run/report.csv")).unwrap();
    let staged = fs::read_to_string(d.join("eval/report.csv")).unwrap();
    assert_eq!(without_timings(&staged), without_timings(&one_shot));
    for algo in ["co", "fhmm"] {
        let f = format!("model_{algo}.json");
        assert_eq!(fs::read(d.join("run").join(&f)).unwrap(), fs::read(d.join("models").join(&f)).unwrap());
    }
}

#[test]
fn missing_dataset_path_exits_2_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"dataset": {"format": "nilmtk_df"}}"#).unwrap();
    let o = nilm(&["run", "--config", path(&cfg), "--output", path(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dataset.path"));
}

#[test]
fn bad_configs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path()).to_string();
    let o = nilm(&["run", "--config", "/nonexistent/cfg.json", "--output", &out]);
    assert_eq!(o.status.code(), Some(2));
    let o = nilm(&["run", "--set", "split_fraction=1.5", "--output", &out]);
    assert_eq!(o.status.code(), Some(2));
    let o = nilm(&["run", "--set", "no_such_key=1", "--output", &out]);
    assert_eq!(o.status.code(), Some(2));
    let o = nilm(&["run"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failing_stage_exits_1_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"dataset": {"format": "nilmtk_df", "path": "/nonexistent/dataset"}}"#).unwrap();
    let o = nilm(&["run", "--config", path(&cfg), "--output", path(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("import"));

    let o = nilm(&["run", "--set", "preprocessing=[{\"op\":\"filter_top_k\",\"k\":0}]", "--output", path(&dir.path().join("p"))]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("preprocess"));
}

#[test]
fn seed_and_set_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = nilm(&["--quiet", "run", "--seed", "7", "--set", "algorithms=[\"co\"]", "--set", "metrics=[\"NEP\"]", "--output", path(&out)]);
    assert_ok(&o);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["algorithms"], serde_json::json!(["co"]));
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.contains(",NEP,co,")), "{csv}");
    assert!(!out.join("model_fhmm.json").exists());
}

#[test]
fn dataset_paths_resolve_against_data_dir() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert_ok(&nilm(&["--quiet", "synth", "--output", path(&data.join("house"))]));
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"dataset": {"format": "nilmtk_df", "path": "house"}, "algorithms": ["co"]}"#).unwrap();
    let o = nilm_env(&["--quiet", "run", "--config", path(&cfg), "--output", path(&dir.path().join("o"))], "NILM_DATA_DIR", &data);
    assert_ok(&o);
    assert!(dir.path().join("o/report.csv").is_file());
}

#[test]
fn synth_diagnose_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let spec = d.join("spec.json");
    fs::write(
        &spec,
        r#"{
  "seed": 3, "sample_period": 60, "duration": 864000, "noise_std": 10,
  "appliances": [
    {"name": "boiler", "states": [{"mean": 0, "std": 1}, {"mean": 3000, "std": 20}],
     "pi": [1, 0], "transition": [[0.99, 0.01], [0.05, 0.95]]}
  ],
  "faults": {"gaps": [{"start": 1303100000, "end": 1303200000}]},
  "external": {"name": "degree_days", "appliance": "boiler", "r_squared": 0.73}
}"#,
    )
    .unwrap();
    let house = d.join("house");
    assert_ok(&nilm(&["--quiet", "synth", "--spec", path(&spec), "--output", path(&house)]));

    let diag = d.join("diag");
    assert_ok(&nilm(&["--quiet", "diagnose", "--input", path(&house), "--output", path(&diag)]));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(diag.join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(json["channels"][0]["gaps"].as_array().unwrap().len(), 1);
    assert!(fs::read_to_string(diag.join("summary.csv")).unwrap().contains("Percentage up-time"));

    let stats = d.join("stats");
    assert_ok(&nilm(&["--quiet", "stats", "--input", path(&house), "--output", path(&stats)]));
    for f in ["summary.csv", "energy.csv", "top_k.csv", "hour_of_day.csv", "histogram_boiler.csv", "on_off_boiler.csv"] {
        assert!(stats.join(f).is_file(), "missing {f}");
    }
    let reg = fs::read_to_string(stats.join("regression_boiler_degree_days.csv")).unwrap();
    let r2: f64 = reg
        .lines()
        .filter_map(|l| l.strip_prefix("r_squared,"))
        .next()
        .or_else(|| {
            let mut lines = reg.lines();
            let header: Vec<&str> = lines.next()?.split(',').collect();
            let idx = header.iter().position(|h| *h == "r_squared")?;
            lines.next()?.split(',').nth(idx)
        })
        .unwrap()
        .parse()
        .unwrap();
    assert!((r2 - 0.73).abs() <= 0.05, "{r2}");

    let o = nilm(&["diagnose", "--input", path(&house)]);
    assert_ok(&o);
    assert!(String::from_utf8_lossy(&o.stdout).contains("Number of appliances"));
}

#[test]
fn redd_import_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("redd/house_1");
    fs::create_dir_all(&src).unwrap();
    fs::write(src.join("labels.dat"), "1 mains\n2 mains\n3 refrigerator\n").unwrap();
    for ch in 1..=3 {
        let rows: String = (0..20).map(|i| format!("{} {}\n", 1_303_132_929 + 3 * i, 100 * ch)).collect();
        fs::write(src.join(format!("channel_{ch}.dat")), rows).unwrap();
    }
    let out = dir.path().join("df");
    let o = nilm(&["import", "--input", path(&dir.path().join("redd")), "--format", "redd", "--output", path(&out)]);
    assert_ok(&o);
    assert!(String::from_utf8_lossy(&o.stdout).contains("skipped"));
    let again = dir.path().join("df2");
    assert_ok(&nilm(&["--quiet", "import", "--input", path(&out), "--format", "nilmtk-df", "--output", path(&again)]));
    assert_eq!(tree(&out), tree(&again));
}
