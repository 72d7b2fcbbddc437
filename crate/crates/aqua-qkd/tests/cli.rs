use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn aqua(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aqua-qkd")).args(args).output().expect("spawn aqua-qkd")
}

fn run_to_file(scenario: &str, config: &Path, out: &Path, extra: &[&str]) -> Vec<u8> {
    let mut args = vec![scenario, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = aqua(&args);
    assert!(o.status.success(), "{scenario}: {}", String::from_utf8_lossy(&o.stderr));
    fs::read(out).unwrap()
}

fn write_config(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    for (scenario, file) in [
        ("sweep", "sweep.json"),
        ("mc-channel", "mc-channel.json"),
        ("bb84-run", "air-baseline.json"),
        ("bb84-run", "bb84-tank-mc.json"),
        ("mueller-estimate", "mueller-estimate.json"),
        ("jerlov-extrapolate", "jerlov.json"),
    ] {
        let cfg = configs().join(file);
        let a = run_to_file(scenario, &cfg, &tmp.path().join("a"), &[]);
        let b = run_to_file(scenario, &cfg, &tmp.path().join("b"), &[]);
        assert!(!a.is_empty());
        assert_eq!(a, b, "{file}");
        assert!(!a.contains(&b'\r'));
        assert!(std::str::from_utf8(&a).is_ok());
    }
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = configs().join("mc-channel.json");
    let a = run_to_file("mc-channel", &cfg, &tmp.path().join("a"), &["--seed", "1"]);
    let b = run_to_file("mc-channel", &cfg, &tmp.path().join("b"), &["--seed", "2"]);
    let c = run_to_file("mc-channel", &cfg, &tmp.path().join("c"), &["--seed", "1"]);
    assert_ne!(a, b);
    assert_eq!(a, c);
}

#[test]
fn noiseless_bb84_reports_zero_qber() {
    let o = aqua(&["bb84-run", "--config", configs().join("bb84-noiseless.json").to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["qber"], 0.0);
    for key in ["qber", "sifted_rate", "secure_rate", "detected_pulses", "sifted_bits", "wrong_bits", "leaked_bits"] {
        assert!(v.get(key).is_some(), "{key}");
    }
}

#[test]
fn sweep_csv_shape() {
    let o = aqua(&["sweep", "--config", configs().join("sweep.json").to_str().unwrap()]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "attenuation_per_m,absorption_per_m,transmission,qber,sifted_rate_bps,secure_rate_bps,leaked_bits"
    );
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.windows(2).all(|w| w[0][0] < w[1][0]));
    assert!(rows.windows(2).all(|w| w[0][5] >= w[1][5]));
}

#[test]
fn format_flag_switches_encoding() {
    let cfg = configs().join("jerlov.json");
    let json = aqua(&["jerlov-extrapolate", "--config", cfg.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert!((v["equivalent_length"].as_f64().unwrap() - 53.72).abs() < 1e-9);
    let csv = aqua(&["jerlov-extrapolate", "--config", cfg.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(
        String::from_utf8(csv.stdout).unwrap(),
        "target_attenuation,reference_attenuation,reference_length,equivalent_length\n0.03,0.68,2.37,53.72\n"
    );
}

#[test]
fn mc_channel_json_has_transport_fields() {
    let o = aqua(&["mc-channel", "--config", configs().join("mc-channel.json").to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let obj = v.as_object().unwrap();
    let keys: Vec<&str> = obj.keys().map(String::as_str).collect();
    assert_eq!(keys.len(), 6);
    let n = |k: &str| v[k].as_u64().unwrap();
    assert_eq!(n("received"), n("received_unscattered") + n("received_scattered"));
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let code = |o: Output| o.status.code().unwrap();

    let any = configs().join("jerlov.json");
    assert_eq!(code(aqua(&["teleport", "--config", any.to_str().unwrap()])), 1);
    assert_eq!(code(aqua(&["sweep"])), 1);

    let broken = write_config(&tmp, "broken.json", "{ not json");
    assert_eq!(code(aqua(&["sweep", "--config", broken.to_str().unwrap()])), 2);
    let bad_grid = write_config(&tmp, "grid.json", r#"{"scenario": "sweep", "sweep": [0.4, 0.2]}"#);
    let o = aqua(&["sweep", "--config", bad_grid.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(String::from_utf8(o.stderr).unwrap().lines().count(), 1);
    let bad_param = write_config(&tmp, "p.json", r#"{"parameters": {"channel": {"length": -1.0}}}"#);
    assert_eq!(code(aqua(&["mc-channel", "--config", bad_param.to_str().unwrap()])), 2);

    let starved = write_config(&tmp, "short.json", r#"{"parameters": {"session": {"n_pulses": 100}}}"#);
    assert_eq!(code(aqua(&["bb84-run", "--config", starved.to_str().unwrap()])), 3);
    let bad_target = write_config(&tmp, "j.json", r#"{"parameters": {"jerlov": {"target_attenuation": 0.0}}}"#);
    assert_eq!(code(aqua(&["jerlov-extrapolate", "--config", bad_target.to_str().unwrap()])), 3);

    assert_eq!(code(aqua(&["sweep", "--config", "/nonexistent/cfg.json"])), 4);
    let missing = write_config(&tmp, "m.json", r#"{"parameters": {"measurements_path": "nope.csv"}}"#);
    assert_eq!(code(aqua(&["mueller-estimate", "--config", missing.to_str().unwrap()])), 4);
    let out = tmp.path().join("no/such/dir/out.json");
    assert_eq!(code(aqua(&["jerlov-extrapolate", "--config", any.to_str().unwrap(), "--out", out.to_str().unwrap()])), 4);
}

#[test]
fn config_output_path_is_used() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("result.csv");
    let cfg = write_config(
        &tmp,
        "c.json",
        &format!(r#"{{"scenario": "jerlov-extrapolate", "output_path": {:?}, "output_format": "csv"}}"#, out.to_str().unwrap()),
    );
    let o = aqua(&["jerlov-extrapolate", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert!(fs::read_to_string(out).unwrap().starts_with("target_attenuation,"));
}
