use std::collections::HashMap;
use std::path::PathBuf;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_virial-forge"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn kv(out: &Output) -> HashMap<String, String> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn num(map: &HashMap<String, String>, key: &str) -> f64 {
    map.get(key)
        .unwrap_or_else(|| panic!("missing {key}"))
        .parse()
        .expect("number")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("virial-forge-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn certify_core_halo_passes() {
    let out = run(&[
        "certify",
        "--family",
        "core-halo",
        "--r1",
        "0.2",
        "--r2",
        "1",
        "--r3",
        "2",
        "--p",
        "1",
        "--a",
        "-0.8",
        "--format",
        "kv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let m = kv(&out);
    assert_eq!(m["verdict"], "pass");
    assert!((num(&m, "virial") + 0.5007).abs() < 1e-4);
    let text = String::from_utf8_lossy(&out.stdout);
    let keys: Vec<&str> = text
        .lines()
        .take(8)
        .map(|l| l.split_once('=').unwrap().0)
        .collect();
    assert_eq!(
        keys,
        [
            "family",
            "alpha",
            "energy_residual",
            "virial",
            "virial_margin",
            "l32_norm",
            "norm_margin",
            "verdict"
        ]
    );
}

#[test]
fn certify_uniform_fails_on_virial() {
    let out = run(&[
        "certify", "--family", "uniform", "--p", "1", "--a", "-0.99", "--format", "kv",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let m = kv(&out);
    assert_eq!(m["verdict"], "fail");
    assert!(num(&m, "virial_margin") < 0.0);
}

#[test]
fn certify_monotonic_passes() {
    let out = run(&[
        "certify",
        "--family",
        "monotonic",
        "--r1",
        "0.01",
        "--r2",
        "0.0909090909",
        "--r3",
        "0.1",
        "--n",
        "3",
        "--a",
        "-0.95",
        "--format",
        "kv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!((num(&kv(&out), "momentum") - 19.69).abs() < 0.05);
}

#[test]
fn output_echoes_resolved_config() {
    let m = kv(&run(&["certify", "--family", "core-halo", "--format", "kv"]));
    assert_eq!(m["config.family"], "core-halo");
    for key in [
        "config.r1",
        "config.r2",
        "config.r3",
        "config.p",
        "config.a",
        "config.tol-energy",
    ] {
        assert!(m.contains_key(key), "{key}");
    }
}

#[test]
fn config_file_and_flags_layer() {
    let dir = scratch("layer");
    let path = dir.join("run.toml");
    std::fs::write(&path, "family = \"core-halo\"\na = -0.8\n").unwrap();
    let p = path.to_str().unwrap();
    let from_file = kv(&run(&["certify", "--config", p, "--format", "kv"]));
    let overridden = kv(&run(&[
        "certify", "--config", p, "--a", "-0.85", "--format", "kv",
    ]));
    assert_eq!(num(&from_file, "config.a"), -0.8);
    assert_eq!(num(&overridden, "config.a"), -0.85);
    assert!(num(&overridden, "virial") < num(&from_file, "virial"));
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn invalid_configs_exit_three() {
    for args in [
        &["certify", "--family", "uniform", "--a", "-1"][..],
        &["certify", "--family", "uniform", "--r1", "0.3"][..],
        &["certify", "--family", "core-halo", "--r1", "2", "--r2", "1"][..],
        &["scan", "--family", "uniform", "--points", "0"][..],
        &[
            "mollify",
            "--family",
            "core-halo",
            "--delta",
            "1e-3",
            "--delta-rel",
            "1e-3",
        ][..],
        &["certify"][..],
        &["certify", "--family", "nonsense"][..],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(3), "{args:?}");
        assert!(!out.stderr.is_empty(), "{args:?}");
    }
}

#[test]
fn ramp_overlap_exits_two_naming_breakpoints() {
    let out = run(&[
        "mollify",
        "--family",
        "core-halo",
        "--r2",
        "1.9999",
        "--delta",
        "1e-3",
        "--format",
        "kv",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("1.9999") && err.contains(" 2"), "{err}");
}

#[test]
fn mollify_core_halo_passes_with_shrinking_drift() {
    let coarse = kv(&run(&[
        "mollify",
        "--family",
        "core-halo",
        "--a",
        "-0.85",
        "--delta-rel",
        "1e-2",
        "--format",
        "kv",
    ]));
    let fine_run = run(&[
        "mollify",
        "--family",
        "core-halo",
        "--a",
        "-0.85",
        "--delta-rel",
        "1e-4",
        "--format",
        "kv",
    ]);
    assert_eq!(fine_run.status.code(), Some(0));
    let fine = kv(&fine_run);
    assert_eq!(fine["verdict"], "pass");
    let drifts: Vec<&String> = coarse
        .keys()
        .filter(|k| k.starts_with("drift.") && k.ends_with(".abs"))
        .collect();
    assert!(!drifts.is_empty());
    for k in drifts {
        assert!(num(&fine, k) <= num(&coarse, k) + 1e-12, "{k}");
    }
}

#[test]
fn uniform_scan_reports_floor() {
    let out = run(&["scan", "--family", "uniform"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("family,P,a,alpha,R,KE,PE,E,V,l32_norm\n"));
    assert_eq!(
        text.lines().filter(|l| l.starts_with("uniform,")).count(),
        200 * 40
    );
    assert!(
        text.trim_end().ends_with("# min_virial > -0.45: OK"),
        "{}",
        text.lines().last().unwrap()
    );
}

#[test]
fn thread_count_does_not_change_output() {
    let args = ["scan", "--family", "uniform", "--points", "30", "--a-points", "7"];
    let one = Command::new(env!("CARGO_BIN_EXE_virial-forge"))
        .args(args)
        .env("VIRIAL_FORGE_THREADS", "1")
        .output()
        .unwrap();
    let many = Command::new(env!("CARGO_BIN_EXE_virial-forge"))
        .args(args)
        .env("VIRIAL_FORGE_THREADS", "4")
        .output()
        .unwrap();
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, many.stdout);
}

#[test]
fn out_flag_writes_file() {
    let dir = scratch("out");
    let path = dir.join("cert.txt");
    let out = run(&[
        "certify",
        "--family",
        "core-halo",
        "--format",
        "kv",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let written = std::fs::read_to_string(&path).unwrap();
    assert!(written.contains("verdict=pass"));
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn asymptotics_reports_slopes_and_witness() {
    let out = run(&["asymptotics", "--format", "kv"]);
    assert_eq!(out.status.code(), Some(0));
    let m = kv(&out);
    assert!((num(&m, "alpha_slope") + 11.5).abs() <= 0.1);
    assert!((num(&m, "virial_slope") - 3.0).abs() <= 0.05);
    assert!(num(&m, "witness_virial") < -10.0);
}
