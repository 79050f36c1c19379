use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn config(p: f64, r: f64) -> Value {
    json!({
        "d1": 2.0, "d2": 2.0, "a": 1.0, "b": 1.0,
        "mu1": 1.0, "mu2": 1.0, "h0": 1.0,
        "kernel1": { "family": "triangle", "width": 1.0 },
        "kernel2": { "family": "triangle", "width": 1.0 },
        "reactions": { "family": "monod", "p": p, "q": 1.0, "r": r, "s": 1.0 }
    })
}

fn write_config(dir: &Path, name: &str, v: &Value) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, v.to_string()).unwrap();
    path
}

fn epifront(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epifront"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

#[test]
fn threshold_r0_config_vanishes_by_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(dir.path(), "r0_one.json", &config(1.0, 1.0));
    let o = epifront(&dir.path().join("out"), &["classify", c.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let v = stdout_json(&o);
    assert_eq!(v["verdict"], "Vanishing");
    assert_eq!(v["certificate"], "R0Subcritical");
    assert!((v["diagnostics"]["r0"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn eigen_sweep_is_strictly_increasing() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(dir.path(), "p0.json", &config(2.0, 2.0));
    let out = dir.path().join("out");
    let o = epifront(&out, &["eigen", c.to_str().unwrap(), "--sweep", "0.2:10:12"]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(out.join("eigen.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("l,lambda_p,iterations,residual"));
    let lam: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(lam.len(), 12);
    assert!(lam.windows(2).all(|w| w[1] > w[0]), "{lam:?}");
}

#[test]
fn malformed_config_exits_2_with_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{ \"d1\": 2.0, ").unwrap();
    let o = epifront(&dir.path().join("out"), &["check", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stdout_json(&o)["error"], "ParseError");
}

#[test]
fn invalid_kernel_exits_2_naming_clause() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = config(2.0, 2.0);
    v["kernel2"]["width"] = json!(-0.5);
    let c = write_config(dir.path(), "neg.json", &v);
    let o = epifront(&dir.path().join("out"), &["check", c.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let e = stdout_json(&o);
    assert_eq!(e["error"], "ValidationError");
    assert!(e["message"].as_str().unwrap().contains("(J) kernel2"));
}

#[test]
fn module_error_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(dir.path(), "p0.json", &config(2.0, 2.0));
    let o = epifront(&dir.path().join("out"), &["eigen", c.to_str().unwrap(), "--l", "500"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stdout_json(&o)["error"], "DomainExceedsGrid");
}

#[test]
fn check_reports_reference_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(dir.path(), "p0.json", &config(2.0, 2.0));
    let out = dir.path().join("out");
    let o = epifront(&out, &["check", c.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert!((v["diagnostics"]["r0"].as_f64().unwrap() - 4.0).abs() < 1e-12);
    assert!(v["reaction_report"]["passed"].as_bool().unwrap());
    let m: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "check");
    assert_eq!(m["outputs"], json!(["check.json"]));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = config(2.0, 2.0);
    v["h0"] = json!(0.3);
    let c = write_config(dir.path(), "p0.json", &v);
    let cs = c.to_str().unwrap();
    let runs: [&[&str]; 4] = [
        &["simulate", cs, "--tmax", "3"],
        &["eigen", cs, "--sweep", "0.5:4:5"],
        &["critlen", cs],
        &["steady", cs, "--l", "3"],
    ];
    for args in runs {
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        assert_eq!(epifront(&a, args).status.code(), Some(0), "{args:?}");
        assert_eq!(epifront(&b, args).status.code(), Some(0), "{args:?}");
        let m: Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
        let outputs = m["outputs"].as_array().unwrap();
        assert!(!outputs.is_empty());
        for name in outputs {
            let name = name.as_str().unwrap();
            let (x, y) = (fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
            assert_eq!(x, y, "{name} differs between runs");
            assert!(!x.contains(&b'\r'));
        }
        fs::remove_dir_all(&a).unwrap();
        fs::remove_dir_all(&b).unwrap();
    }
}

#[test]
fn compare_orders_doubled_expansion_rate() {
    let dir = tempfile::tempdir().unwrap();
    let mut v1 = config(2.0, 2.0);
    v1["h0"] = json!(0.3);
    let mut v2 = v1.clone();
    v2["mu1"] = json!(2.0);
    let c1 = write_config(dir.path(), "c1.json", &v1);
    let c2 = write_config(dir.path(), "c2.json", &v2);
    let o = epifront(&dir.path().join("out"), &["compare", c1.to_str().unwrap(), c2.to_str().unwrap(), "--tmax", "5"]);
    assert_eq!(o.status.code(), Some(0));
    let r = stdout_json(&o);
    assert_eq!(r["ordered"], true);
    assert!(r["compared_steps"].as_u64().unwrap() > 0);
}

#[test]
fn critmu_brackets_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = config(2.0, 2.0);
    v["h0"] = json!(0.3);
    let c = write_config(dir.path(), "p0.json", &v);
    let out = dir.path().join("out");
    let o = epifront(&out, &["critmu", c.to_str().unwrap(), "--tol", "1e-2", "--tmax", "2000"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let r = stdout_json(&o);
    let (lo, hi) = (r["mu_lower"].as_f64().unwrap(), r["mu_upper"].as_f64().unwrap());
    assert!(lo < hi && hi - lo <= 1e-2 * hi);
    assert_eq!(r["verdict_lower"], "Vanishing");
    assert_eq!(r["verdict_upper"], "Spreading");
    assert!(fs::read_to_string(out.join("critmu_probes.csv")).unwrap().starts_with("index,mu1,mu2,dt,verdict"));
}
