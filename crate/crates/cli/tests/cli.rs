use std::path::Path;
use std::process::{Command, Output};

use liplab_cli::config::RunConfig;
use serde_json::Value;

fn liplab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_liplab")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_build(dir: &Path) -> Output {
    liplab(&["construct", "--base", "affine(c=1)", "--nmax", "2", "--samples", "500", "--lip-points", "100", "-o", p(dir)])
}

#[test]
fn cantor_dimension_through_files() {
    let t = tempfile::tempdir().unwrap();
    let set = t.path().join("c.set");
    assert_eq!(liplab(&["gen-set", "cantor", "--depth", "10", "-o", p(&set)]).status.code(), Some(0));
    let out = liplab(&["dims", p(&set), "--scales", "triadic:1..10"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out)["lbdim_proxy"].as_f64().unwrap();
    assert!((v - 2f64.ln() / 3f64.ln()).abs() < 1e-9, "{v}");
}

#[test]
fn exit_codes() {
    let t = tempfile::tempdir().unwrap();
    let set = t.path().join("c.set");
    liplab(&["gen-set", "cantor", "--depth", "10", "-o", p(&set)]);
    // a failing certificate is exit 1 and names itself on stderr
    let out = liplab(&["micro", p(&set), "--eps", "0.01"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("certificate failed"));
    // bad input is exit 2
    assert_eq!(liplab(&["construct", "--nmax", "0", "-o", p(&t.path().join("x"))]).status.code(), Some(2));
    assert_eq!(liplab(&["construct", "--phi", "bogus", "-o", p(&t.path().join("x"))]).status.code(), Some(2));
    assert_eq!(liplab(&["dims", p(&t.path().join("missing.set"))]).status.code(), Some(2));
}

#[test]
fn construct_report_partition() {
    let t = tempfile::tempdir().unwrap();
    let dir = t.path().join("b");
    let out = small_build(&dir);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["base.fn", "final.fn", "stages.json", "build.json", "E.set", "F.set", "certificates.json"] {
        assert!(dir.join(f).exists(), "{f} missing");
    }
    let r1 = t.path().join("r1.json");
    let r2 = t.path().join("r2.json");
    for r in [&r1, &r2] {
        let out = liplab(&["report", p(&dir), "--samples", "500", "--lip-points", "100", "-o", p(r)]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(std::fs::read(&r1).unwrap(), std::fs::read(&r2).unwrap());
    assert!(t.path().join("r1.json.meta.json").exists());

    let out = liplab(&["partition", p(&dir), "--delta-ladder", "0.1,0.01", "--depth", "10", "--image-depth", "14", "--samples", "2000"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn saved_config_replays() {
    let t = tempfile::tempdir().unwrap();
    let cfg = t.path().join("cfg.json");
    let f = t.path().join("w.fn");
    let a = liplab(&["--seed", "7", "--save-config", p(&cfg), "gen-fn", "weierstrass(a=0.5,b=3)", "--depth", "10", "-o", p(&f)]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let first = std::fs::read(&f).unwrap();
    std::fs::remove_file(&f).unwrap();
    let loaded = RunConfig::load(&cfg).unwrap();
    assert_eq!(loaded.seed, 7);
    assert_eq!(serde_json::from_str::<RunConfig>(&loaded.to_json()).unwrap(), loaded);
    assert_eq!(liplab(&["run", p(&cfg)]).status.code(), Some(0));
    assert_eq!(std::fs::read(&f).unwrap(), first);
}

#[test]
fn analyze_writes_artifacts() {
    let t = tempfile::tempdir().unwrap();
    let out_dir = t.path().join("a");
    let out = liplab(&["analyze", "affine(c=1)", "--depth", "12", "--points", "8", "--mode", "lip", "-o", p(&out_dir)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(out_dir.join("proxies.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 8);
    let h = 2f64.powi(-12);
    // only balls of radius 1/4 that stay inside [0,1]
    let inner: Vec<_> = rows.iter().filter(|r| (0.25..=0.75).contains(&r[1].parse::<f64>().unwrap())).collect();
    assert!(!inner.is_empty());
    for r in inner {
        let v: f64 = r[4].parse().unwrap();
        // 2|c| up to 2ω̄(h)/r_min with r_min = 2^-10
        assert!((v - 2.0).abs() <= 2.0 * h / 2f64.powi(-10), "{v}");
    }
    for f in ["oscillation.csv", "lip_field.json", "lip_above.set", "analyze.json"] {
        assert!(out_dir.join(f).exists(), "{f} missing");
    }
}

#[test]
fn set_files_round_trip_through_dims() {
    let t = tempfile::tempdir().unwrap();
    let set = t.path().join("sq.set");
    liplab(&["gen-set", "full", "--dim", "2", "--depth", "6", "-o", p(&set)]);
    let out = liplab(&["dims", p(&set), "--scales", "dyadic:1..6", "--zeta", "power(s=2)"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert!((v["lbdim_proxy"].as_f64().unwrap() - 2.0).abs() < 1e-12);
}
