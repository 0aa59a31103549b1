use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use macrostab::experiment::config_from_manifest;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_macrostab"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("cfg.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str], cfg: &Path, out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .env_remove("MACROSTAB_THREADS")
        .output()
        .unwrap()
}

fn manifest(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let mut rows = vec![r.headers().unwrap().iter().map(String::from).collect()];
    for rec in r.records() {
        rows.push(rec.unwrap().iter().map(String::from).collect());
    }
    rows
}

fn column(rows: &[Vec<String>], name: &str) -> Vec<String> {
    let i = rows[0].iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows[1..].iter().map(|r| r[i].clone()).collect()
}

#[test]
fn scaling_run_writes_manifest_and_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("scaling");
    let o = run(&["scaling"], &configs().join("scaling.toml"), &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["experiment"], "scaling");
    assert_eq!(m["artifact"], "macrostab");
    for t in m["tables"].as_array().unwrap() {
        let rows = read_csv(&out.join(t["file"].as_str().unwrap()));
        assert_eq!(rows.len() - 1, t["rows"].as_u64().unwrap() as usize);
        let cols: Vec<&str> = t["columns"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect();
        assert_eq!(rows[0], cols);
    }
    let rows = read_csv(&out.join("scaling.csv"));
    let exp: f64 = column(&rows, "exponent")[0].parse().unwrap();
    assert!((exp - 2.0).abs() < 0.01, "{exp}");
    assert_eq!(column(&rows, "class")[0], "AFS");
    // the embedded config reproduces the run
    let cfg = config_from_manifest(&m).unwrap();
    assert_eq!(cfg.master_seed, 1);
    assert_eq!(cfg.volumes, vec![4, 6, 8, 10]);
}

#[test]
fn neel_gamma_vanishes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"
volumes = [4, 6, 8, 10]
[model]
family = "NEEL_PLUS"
[noise]
lambda = 0.1
coupling = "sz"
spatial = { kind = "STAGGERED" }
"#,
    );
    let out = tmp.path().join("out");
    let o = run(&["gamma"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_csv(&out.join("gamma.csv"));
    for g in column(&rows, "gamma_formula") {
        assert_eq!(g.parse::<f64>().unwrap(), 0.0);
    }
    assert!(!out.join("purity.csv").exists());
}

#[test]
fn cat_cascade_reports_median() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run(&["cascade"], &configs().join("cascade.toml"), &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_csv(&out.join("cascade.csv"));
    let counts: Vec<usize> = column(&rows, "count").iter().map(|c| c.parse().unwrap()).collect();
    assert_eq!(counts.len(), 100);
    assert!(counts.iter().all(|&c| c >= 1));
    assert!(manifest(&out)["summary"]["median_count"].as_f64().is_some());
}

#[test]
fn invalid_config_exits_with_2_and_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "volumes = [4]\n[model]\nfamily = \"CAT\"\n");
    let o = run(&["scaling"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("volumes"));

    let cfg = write_config(tmp.path(), "[model]\nfamily = \"CAT\"\nbogus = 1\n");
    let o = run(&["scaling"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));

    // odd volume with a staggered kernel
    let cfg = write_config(
        tmp.path(),
        "volumes = [4, 5, 6]\n[model]\nfamily = \"PRODUCT_X\"\n[noise]\nspatial = { kind = \"STAGGERED\" }\n",
    );
    let o = run(&["gamma"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("noise.spatial"));
}

#[test]
fn taylor_non_convergence_exits_with_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"
volumes = [4, 6, 8]
[model]
family = "CAT"
n_sites = 4
[noise]
lambda = 1.0
coupling = "sx"
[trajectories]
count = 4
dt = 1.0
n_steps = 4
fit_window = [2.0, 4.0]
"#,
    );
    let o = run(&["gamma"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dt"));
}

#[test]
fn unwritable_output_exits_with_1() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let o = run(&["lm"], &configs().join("lm.toml"), &blocker.join("out"));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn thread_count_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"
master_seed = 5
volumes = [4, 6, 8]
[model]
family = "CAT"
n_sites = 6
[noise]
lambda = 0.05
spatial = { kind = "STAGGERED" }
[trajectories]
count = 64
dt = 0.01
n_steps = 40
record_every = 4
[cascade]
runs = 20
"#,
    );
    for kind in ["gamma", "cascade"] {
        let mut outputs = Vec::new();
        for threads in ["1", "8"] {
            let out = tmp.path().join(format!("{kind}-{threads}"));
            let o = run(&[kind, "--threads", threads], &cfg, &out);
            assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
            outputs.push(out);
        }
        for t in manifest(&outputs[0])["tables"].as_array().unwrap() {
            let f = t["file"].as_str().unwrap();
            assert_eq!(
                std::fs::read(outputs[0].join(f)).unwrap(),
                std::fs::read(outputs[1].join(f)).unwrap(),
                "{kind}/{f}"
            );
        }
    }
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run(&["lm", "--seed", "77"], &configs().join("lm.toml"), &out);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(manifest(&out)["master_seed"], 77);
    assert!(String::from_utf8_lossy(&o.stdout).contains("lm.csv"));
}
