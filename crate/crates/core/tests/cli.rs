use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_periporo");

fn periporo(args: &[&str], root: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .env("PERIPORO_OUTPUT_ROOT", root)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path
}

const SHORT_STEP: &str = "[scenario]\nname = \"consolidation_step\"\n[solver]\nduration = \"1 ms\"\n";

#[test]
fn list_scenarios_prints_four_names() {
    let tmp = tempfile::tempdir().unwrap();
    let out = periporo(&["list-scenarios"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 4);
    for name in periporo::scenarios::SCENARIO_NAMES {
        assert!(text.contains(name));
    }
}

#[test]
fn run_writes_tables_snapshots_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SHORT_STEP);
    let out = periporo(&["--deterministic", "run", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("consolidation_step");
    let probes = std::fs::read_to_string(dir.join("probes.csv")).unwrap();
    // header + t = 0 + ten steps
    assert_eq!(probes.lines().count(), 12);
    assert!(probes.starts_with("time,A.u_x,A.p,A.eps_s,A.eps_pv,B.u_x"));

    let snap = std::fs::read_to_string(dir.join("snapshot_0000000.csv")).unwrap();
    let rows: Vec<&str> = snap.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 256);
    for r in rows {
        let eps_s: f64 = r.split(',').nth(8).unwrap().parse().unwrap();
        assert_eq!(eps_s, 0.0);
    }

    let manifest: toml::Table = std::fs::read_to_string(dir.join("manifest.toml")).unwrap().parse().unwrap();
    assert_eq!(manifest["status"].as_str(), Some("completed"));
    let resolved = std::fs::read(dir.join("config.resolved.toml")).unwrap();
    assert_eq!(manifest["config_sha256"].as_str().unwrap(), periporo::cli_io::sha256_hex(&resolved));
    let listed = manifest["files"].as_array().unwrap().len();
    assert_eq!(listed, 5);

    // The resolved configuration reproduces the run byte for byte.
    let again = periporo(
        &["--deterministic", "run", dir.join("config.resolved.toml").to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(dir.join("probes.csv")).unwrap(), probes);
}

#[test]
fn zero_load_run_gives_zero_probes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{SHORT_STEP}[loading]\namplitude = 0.0\n"));
    let out = periporo(&["run", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let probes = std::fs::read_to_string(tmp.path().join("consolidation_step/probes.csv")).unwrap();
    for line in probes.lines().skip(1) {
        assert!(line.split(',').skip(1).all(|v| v == "0" || v == "-0"), "{line}");
    }
}

#[test]
fn config_errors_exit_with_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        "[scenario]\nname = \"consolidation_step\"\n[solver]\ndt = -1.0\n",
        "[scenario]\nname = \"consolidation_step\"\n[solver]\ndt = \"2 m\"\n",
        "[scenario]\nname = \"no_such_scenario\"\n",
        "[scenario]\nname = \"consolidation_step\"\nunknown = 1\n",
        "[scenario]\nname = \"strain_localization\"\nscale = \"full\"\n",
    ];
    for body in cases {
        let cfg = write_config(tmp.path(), body);
        let out = periporo(&["run", cfg.to_str().unwrap()], tmp.path());
        assert_eq!(out.status.code(), Some(2), "{body}\n{}", String::from_utf8_lossy(&out.stderr));
    }
    let neg = write_config(tmp.path(), cases[0]);
    let out = periporo(&["run", neg.to_str().unwrap()], tmp.path());
    assert!(String::from_utf8_lossy(&out.stderr).contains("solver.dt"));
}

#[test]
fn missing_config_file_exits_with_code_4() {
    let tmp = tempfile::tempdir().unwrap();
    let out = periporo(&["run", tmp.path().join("absent.toml").to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn solver_failure_exits_with_code_3_and_keeps_partial_output() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!("{SHORT_STEP}[solver.newton]\nrel_tol = 1e-30\nabs_tol = 1e-30\nmax_iter = 1\n");
    let cfg = write_config(tmp.path(), &body);
    let out = periporo(&["run", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = std::fs::read_to_string(tmp.path().join("consolidation_step/manifest.toml")).unwrap();
    assert!(manifest.contains("status = \"failed"));
}

#[test]
fn sweep_creates_one_directory_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SHORT_STEP);
    let out = periporo(
        &["sweep", "--config", cfg.to_str().unwrap(), "--param", "G", "--values", "0,0.1,1,2"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for v in ["0", "0.1", "1", "2"] {
        let dir = tmp.path().join("consolidation_step").join(format!("G={v}"));
        let resolved = periporo::cli_io::parse_config(dir.join("config.resolved.toml")).unwrap();
        assert_eq!(resolved.solver.gain, Some(v.parse().unwrap()));
    }
}

#[test]
fn verify_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = periporo(&["verify"], tmp.path());
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.contains("0 failed"));
}
