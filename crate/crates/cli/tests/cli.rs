use std::path::Path;
use std::process::{Command, Output};

const SMALL: [&str; 4] = ["--grid-l", "8", "--grid-dx", "0.03125"];
// the bump needs the default window to resolve r near k = 0
const COARSE: [&str; 4] = ["--grid-l", "20", "--grid-dx", "0.0625"];

fn miura(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_miura")).args(args).output().expect("binary runs")
}

fn rows(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let meta = lines.next().unwrap().to_string();
    lines.next();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (meta, rows)
}

#[test]
fn presets_are_listed() {
    let out = miura(&["presets"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["delta", "bump", "oscillatory", "log_singular", "free"] {
        assert!(text.contains(name));
    }
}

#[test]
fn delta_direct_writes_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = miura(&["direct", "--preset", "delta", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (meta, table) = rows(&dir.path().join("scattering.csv"));
    assert!(meta.starts_with("# theta=") && meta.ends_with("class=generic"));
    for row in &table {
        let k = row[0];
        let r2 = row[5] * row[5] + row[6] * row[6];
        assert!((r2 - 1.0 / (4.0 * k * k + 1.0)).abs() < 1e-4, "k = {k}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("direct_report.json")).unwrap()).unwrap();
    assert_eq!(report["membership"]["class_tag"], "generic");
}

#[test]
fn free_direct_is_exceptional_with_zero_reflection() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["direct", "--preset", "free", "--out", dir.path().to_str().unwrap()];
    args.extend(SMALL);
    assert!(miura(&args).status.success());
    let (meta, table) = rows(&dir.path().join("scattering.csv"));
    assert!(meta.ends_with("class=exceptional"));
    assert!(table.iter().all(|r| r[5].abs() < 1e-12 && r[6].abs() < 1e-12));
}

#[test]
fn direct_then_invert_recovers_delta() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let mut args = vec!["direct", "--preset", "delta", "--params", r#"{"alpha": 2.0}"#, "--out", d];
    args.extend(SMALL);
    assert!(miura(&args).status.success());
    let input = dir.path().join("reflection.csv");
    let mut args = vec!["invert", "--input", input.to_str().unwrap(), "--out", d];
    args.extend(SMALL);
    let out = miura(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let pot: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("potential.json")).unwrap()).unwrap();
    assert!((pot["samples"]["v0"].as_f64().unwrap() - 2.0).abs() < 1e-3);
    assert!(dir.path().join("diagnostics.json").exists());
}

#[test]
fn exceptional_reflection_is_rejected_by_invert() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    // r(k) = -0.3/(1+k^2) on a half-integer grid with dk = pi/16
    let dk = std::f64::consts::PI / 16.0;
    let mut text = String::from("# class=generic\nk,re_r,im_r,r_tilde\n");
    for j in 0..256 {
        let k = (j as f64 - 127.5) * dk;
        let r = -0.3 / (1.0 + k * k);
        text.push_str(&format!("{k},{r},0,{}\n", (1.0 - r * r) / (k * k)));
    }
    std::fs::write(&path, text).unwrap();
    let out = miura(&["invert", "--input", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("r(0) = -1") && err.contains("margin"), "{err}");
}

#[test]
fn free_roundtrip_stops_at_the_inverse_map() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["roundtrip", "--preset", "free", "--out", dir.path().to_str().unwrap()];
    args.extend(SMALL);
    assert_eq!(miura(&args).status.code(), Some(2));
}

#[test]
fn bad_grid_and_bad_input_exit_with_two() {
    assert_eq!(miura(&["direct", "--preset", "delta", "--grid-l", "1", "--grid-dx", "0.3"]).status.code(), Some(2));
    assert_eq!(miura(&["direct", "--preset", "delta", "--tol", "-1"]).status.code(), Some(2));
    assert_eq!(miura(&["direct", "--preset", "nope"]).status.code(), Some(2));
    assert_eq!(miura(&["direct", "--preset", "delta", "--grid-dx", "0.015625", "--kmax", "25"]).status.code(), Some(2));
}

#[test]
fn outputs_do_not_depend_on_the_thread_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, jobs) in [(&a, "1"), (&b, "3")] {
        let mut args = vec!["roundtrip", "--preset", "bump", "--jobs", jobs, "--out", dir.path().to_str().unwrap()];
        args.extend(COARSE);
        assert!(miura(&args).status.success());
    }
    for f in ["potential.json", "roundtrip.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn involve_twice_returns_the_input() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let mut args = vec!["direct", "--preset", "bump", "--out", d];
    args.extend(COARSE);
    assert!(miura(&args).status.success());
    let r = dir.path().join("reflection.csv");
    assert!(miura(&["involve", "--input", r.to_str().unwrap(), "--out", d]).status.success());
    let (_, first) = rows(&r);
    let inv = dir.path().join("involved.csv");
    let sub = dir.path().join("again");
    assert!(miura(&["involve", "--input", inv.to_str().unwrap(), "--out", sub.to_str().unwrap()]).status.success());
    let (_, back) = rows(&sub.join("involved.csv"));
    for (x, y) in first.iter().zip(&back) {
        assert!((x[1] - y[1]).abs() < 1e-6 && (x[2] - y[2]).abs() < 1e-6);
    }
}

#[test]
fn converge_on_the_free_potential_has_no_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = miura(&[
        "converge", "--preset", "free", "--grid-l", "4", "--grid-dx", "0.0625", "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("order n/a"));
}
