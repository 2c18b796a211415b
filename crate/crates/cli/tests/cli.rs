use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SCENARIO: &str = "\
seed = 7
dates = 20130102, 20130103

[stock]
id = AAA

[stock]
id = BBB
sigma_daily = 0.015

[stock]
id = CCC

[burst]
stock = *
date = 20130102
tau = 11:30
magnitude = 0.02
duration_s = 572
intensity = 3.2
tau_jitter_s = 600

[burst]
stock = *
date = 20130103
tau = 14:00
magnitude = 0.02
duration_s = 572
intensity = 3.2
tau_jitter_s = 600
";

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_driftburst"));
    c.env("RUST_LOG", "warn");
    c
}

fn ok(mut c: Command) -> Output {
    let out = c.output().expect("binary runs");
    assert!(
        out.status.success(),
        "{:?} failed: {}",
        c,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn args(c: &mut Command, a: &[&dyn AsRef<std::ffi::OsStr>]) {
    for x in a {
        c.arg(x);
    }
}

/// Run the whole pipeline into `root`.
fn pipeline(root: &Path) {
    fs::write(root.join("scenario.txt"), SCENARIO).unwrap();
    fs::write(root.join("config.txt"), "db.critical_value = -4.523\n").unwrap();
    let data = root.join("data");
    let events = root.join("events.csv");
    let metrics = root.join("metrics");
    let tables = root.join("tables");
    fs::create_dir_all(&tables).unwrap();

    let mut c = bin();
    args(&mut c, &[&"simulate", &"--scenario", &root.join("scenario.txt"), &"--out", &data]);
    ok(c);
    let mut c = bin();
    args(&mut c, &[&"detect", &"--input", &data, &"--config", &root.join("config.txt"), &"--out", &events]);
    ok(c);
    let mut c = bin();
    args(
        &mut c,
        &[&"measure", &"--events", &events, &"--input", &data, &"--config", &root.join("config.txt"), &"--out-dir", &metrics],
    );
    ok(c);
    for model in ["var", "var-aggr", "var-pass", "pnl", "cross", "ecm"] {
        let mut c = bin();
        let out = tables.join(format!("{model}.csv"));
        args(
            &mut c,
            &[&"regress", &"--metrics", &metrics, &"--events", &events, &"--model", &model, &"--pool", &"unsystematic", &"--out", &out],
        );
        ok(c);
    }
    let mut c = bin();
    args(&mut c, &[&"report", &"--metrics", &metrics, &"--regress-dir", &tables, &"--out-dir", &root.join("report")]);
    ok(c);
}

fn files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn pipeline_reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path());
    pipeline(b.path());
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (k, v) in &fa {
        assert!(v == &fb[k], "{} differs between runs", k.display());
    }

    // every stage produced something
    let events = String::from_utf8(fa[Path::new("events.csv")].clone()).unwrap();
    assert!(events.starts_with("stock,date,t_pre_event,t_start,t_trough,t_end,tau_s,trough_stat,classification\n"));
    assert!(events.lines().count() > 3, "{events}");
    assert!(fa.contains_key(Path::new("data/truth.csv")));
    assert!(fa.contains_key(Path::new("data/AAA_20130102.csv")));
    for f in ["imbalance.csv", "impact.csv", "pressure.csv", "pnl.csv", "descriptives.csv"] {
        assert!(fa.contains_key(&Path::new("metrics").join(f)), "{f}");
    }
    let manifest = String::from_utf8(fa[Path::new("report/manifest.json")].clone()).unwrap();
    for f in ["descriptives_table.csv", "overlap_table.csv", "curves_unsystematic.csv", "table_var.csv", "table_ecm.csv"] {
        assert!(manifest.contains(f), "{f} missing from manifest");
        assert!(fa.contains_key(&Path::new("report").join(f)));
    }
    let var = String::from_utf8(fa[Path::new("tables/var.csv")].clone()).unwrap();
    assert!(var.starts_with("equation,term,coef,se,t,p,stars,adj_r_squared,nobs\n"));
    assert!(var.contains("IB_HFT_MM,early,"));
}

#[test]
fn empty_pool_is_an_error() {
    let d = tempfile::tempdir().unwrap();
    pipeline(d.path());
    let mut c = bin();
    args(
        &mut c,
        &[
            &"regress",
            &"--metrics",
            &d.path().join("metrics"),
            &"--events",
            &d.path().join("events.csv"),
            &"--model",
            &"var",
            &"--pool",
            &"systematic",
            &"--out",
            &d.path().join("x.csv"),
        ],
    );
    let out = c.output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no systematic events"));
}

#[test]
fn bad_scenario_reports_the_problem() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("s.txt");
    fs::write(&p, "seed = 1\ndates = 20130102\n\n[stock]\nid = A\n\n[burst]\nstock = A\ndate = 20130102\ntau = 11:00\nmagnitude = 0.01\nduration_s = 500\nalpha = 1.2\n").unwrap();
    let mut c = bin();
    args(&mut c, &[&"simulate", &"--scenario", &p, &"--out", &d.path().join("o")]);
    let out = c.output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_input_directory_fails() {
    let d = tempfile::tempdir().unwrap();
    let mut c = bin();
    args(&mut c, &[&"detect", &"--input", &d.path().join("nope"), &"--out", &d.path().join("e.csv")]);
    assert!(!c.output().unwrap().status.success());
}
