use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use photonlink_cli::{RunManifest, EXIT_ANALYSIS, EXIT_STATISTICS, EXIT_USAGE, EXIT_VALIDITY};
use photonlink_core::analysis::FringeFit;
use photonlink_core::config::{preset, Preset};

fn photonlink(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_photonlink"))
        .args(args)
        .current_dir(cwd)
        .env_remove("PHOTONLINK_CONFIG")
        .env_remove("PHOTONLINK_PRESET")
        .env_remove("PHOTONLINK_SEED")
        .env_remove("PHOTONLINK_DURATION")
        .env_remove("PHOTONLINK_OUT")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn budget_on_transfer_preset() {
    let tmp = tempfile::tempdir().unwrap();
    let o = photonlink(&["budget", "--preset", "fig3-transfer", "--out", "b"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("transfer probability    0.0486"));
    let m: RunManifest = serde_json::from_str(&fs::read_to_string(tmp.path().join("b/manifest.json")).unwrap()).unwrap();
    assert_eq!(m.command, "budget");
    for f in &m.outputs {
        assert!(tmp.path().join("b").join(f).exists(), "{f}");
    }
}

#[test]
fn short_pump_coherence_fails_validity() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = preset(Preset::Fig2Baseline);
    cfg.chain.source.pump_coherence_length_m = 1.0;
    fs::write(tmp.path().join("c.json"), cfg.to_json_pretty()).unwrap();
    let o = photonlink(&["budget", "--config", "c.json", "--out", "b"], tmp.path());
    assert_eq!(code(&o), EXIT_VALIDITY as i32);
    assert!(String::from_utf8_lossy(&o.stderr).contains("pair_coherence"));
}

#[test]
fn config_errors_are_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.json"), "{\n  \"name\": 3\n}").unwrap();
    let o = photonlink(&["budget", "--config", "bad.json"], tmp.path());
    assert_eq!(code(&o), EXIT_USAGE as i32);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    let o = photonlink(&["budget", "--preset", "fig9"], tmp.path());
    assert_eq!(code(&o), EXIT_USAGE as i32);
    let o = photonlink(&["budget"], tmp.path());
    assert_eq!(code(&o), EXIT_USAGE as i32);
    let o = photonlink(&["report"], tmp.path());
    assert_eq!(code(&o), EXIT_USAGE as i32);
}

#[test]
fn env_overrides_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_photonlink"))
        .arg("budget")
        .current_dir(tmp.path())
        .env_remove("PHOTONLINK_CONFIG")
        .env("PHOTONLINK_PRESET", "fig2-baseline")
        .env("PHOTONLINK_SEED", "77")
        .env("PHOTONLINK_OUT", "env-out")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let m: RunManifest = serde_json::from_str(&fs::read_to_string(tmp.path().join("env-out/manifest.json")).unwrap()).unwrap();
    assert_eq!(m.seed, 77);
}

#[test]
fn pure_dark_histogram_has_no_peaks() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = preset(Preset::Fig2Baseline);
    cfg.chain.source.pair_rate_per_s = 0.0;
    cfg.chain.bob_detector.dark_prob_per_ns = 1e-3;
    fs::write(tmp.path().join("dark.json"), cfg.to_json_pretty()).unwrap();
    let o = photonlink(&["histogram", "--config", "dark.json", "--duration", "2", "--out", "h"], tmp.path());
    assert_eq!(code(&o), EXIT_ANALYSIS as i32, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("h/histogram.csv").exists());
}

#[test]
fn histogram_finds_side_peaks() {
    let tmp = tempfile::tempdir().unwrap();
    let o = photonlink(&["histogram", "--preset", "fig2-baseline", "--duration", "200", "--out", "h"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(tmp.path().join("h/histogram.csv")).unwrap();
    assert!(text.starts_with("bin_center_ns,counts\n"));
    assert_eq!(text.lines().count(), 121);
}

#[test]
fn sweep_rerun_from_manifest_is_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["sweep", "--preset", "fig2-baseline", "--duration", "30", "--points", "9", "--seed", "5"];
    let o = photonlink(&[&args[..], &["--out", "a"]].concat(), tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    // the echoed config alone reproduces the run
    let o = photonlink(&["sweep", "--config", "a/config.json", "--out", "b"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m: RunManifest = serde_json::from_str(&fs::read_to_string(tmp.path().join("a/manifest.json")).unwrap()).unwrap();
    for f in m.outputs.iter().filter(|f| *f != "manifest.json") {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = fs::read(tmp.path().join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
    let fringe = fs::read_to_string(tmp.path().join("a/fringe.csv")).unwrap();
    assert!(fringe.starts_with("phase_rad,coincidences,duration_s\n"));
    assert_eq!(fringe.lines().count(), 10);
    let kv = fs::read_to_string(tmp.path().join("a/fit.txt")).unwrap();
    assert!(kv.lines().any(|l| l.starts_with("v_net=")));
}

#[test]
fn flat_fringe_for_zero_visibility() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = preset(Preset::Fig2Baseline);
    cfg.simulation.visibility = 0.0;
    fs::write(tmp.path().join("v0.json"), cfg.to_json_pretty()).unwrap();
    let o = photonlink(&["sweep", "--config", "v0.json", "--duration", "60", "--points", "7", "--out", "s"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let fit: FringeFit = serde_json::from_str(&fs::read_to_string(tmp.path().join("s/fit.json")).unwrap()).unwrap();
    assert!(fit.v_raw < 4.0 * fit.v_raw_err.max(0.01), "{fit:?}");
}

#[test]
fn doctored_fit_fails_fidelity_row() {
    let tmp = tempfile::tempdir().unwrap();
    let o = photonlink(&["sweep", "--preset", "fig2-baseline", "--duration", "20", "--points", "7", "--out", "s"], tmp.path());
    assert_eq!(code(&o), 0);
    let path = tmp.path().join("s/fit.json");
    let mut fit: FringeFit = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    fit.v_net = 0.5;
    fs::write(&path, serde_json::to_string(&fit).unwrap()).unwrap();
    let o = photonlink(&["report", "s", "--out", "r"], tmp.path());
    assert_eq!(code(&o), EXIT_STATISTICS as i32);
    let fidelity = stdout(&o).lines().find(|l| l.contains("fidelity")).unwrap().to_string();
    assert!(fidelity.ends_with("FAIL"), "{fidelity}");
    let o = photonlink(&["report", "missing-dir"], tmp.path());
    assert_eq!(code(&o), EXIT_USAGE as i32);
}
