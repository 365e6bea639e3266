//! End-to-end checks of the command-line front end: exit codes, artifact
//! layout, overrides, reproducibility.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_npathsim"))
}

fn tmpdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("npathsim_cli").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn help_and_unknown_study() {
    let out = bin().arg("--help").output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("pwm-design"));

    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_file_exits_2_without_artifacts() {
    let dir = tmpdir("missing_config");
    let out_path = dir.join("out.csv");
    let out = bin()
        .args(["validate", "--config", "/nonexistent/nope.cfg"])
        .arg("--out")
        .arg(&out_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_path.exists(), "no partial artifacts on failure");
}

#[test]
fn validate_prints_full_default_table() {
    let out = bin().arg("validate").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("clock.f_lo = 5.000000000e8"));
    assert!(text.contains("npath.c_bb"));
    assert!(text.contains("derived"));
    assert!(text.contains("loop.gm_up"));
    assert!(text.contains("config_hash="));
}

#[test]
fn validate_echoes_overrides_and_rejects_duplicates() {
    let dir = tmpdir("overrides");
    let cfg = dir.join("a.cfg");
    std::fs::write(&cfg, "npath.c_in = 2pF\n").unwrap();
    let out = bin()
        .arg("validate")
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("npath.c_in = 2.000000000e-12"));

    std::fs::write(&cfg, "npath.c_in = 2pF\nnpath.c_in = 3pF\n").unwrap();
    let out = bin()
        .arg("validate")
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("npath.c_in"));
}

#[test]
fn pwm_design_emits_spectrum_and_pulse_file() {
    let dir = tmpdir("pwm");
    let out_path = dir.join("pwm.csv");
    let out = bin()
        .args(["pwm-design", "--no-timestamp", "--set", "pwm.grid=64"])
        .arg("--out")
        .arg(&out_path)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(&out_path).unwrap();
    assert!(csv.starts_with("# study=pwm-design"));
    assert!(csv.contains("k,mag_db,phase_deg"));
    let pulses = std::fs::read_to_string(dir.join("pwm.pulses.txt")).unwrap();
    assert!(pulses.starts_with("pwm f_lo_hz="));
    // the pulse file round-trips through the documented text format
    let w = npathsim::clocks::PwmWaveform::from_text(&pulses).unwrap();
    assert_eq!(w.grid, 64);
    let summary = String::from_utf8_lossy(&out.stdout);
    assert!(summary.contains("pwm-design suppression_db="));
}

#[test]
fn sweep_respects_loop_override_and_is_reproducible() {
    let dir = tmpdir("sweep");
    let run = |name: &str, loop_on: bool| -> String {
        let path = dir.join(name);
        let out = bin()
            .args([
                "sweep",
                "--no-timestamp",
                "--jobs",
                "2",
                "--set",
                "sweep.start=480e6",
                "--set",
                "sweep.stop=520e6",
                "--set",
                "sweep.points=5",
                "--set",
                if loop_on {
                    "loop.enabled=on"
                } else {
                    "loop.enabled=off"
                },
            ])
            .arg("--out")
            .arg(&path)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        std::fs::read_to_string(&path).unwrap()
    };
    let base = run("a.csv", false);
    assert!(base.contains("# loop_enabled=false"));
    assert!(base.contains("f_in_hz,loop,probe,k,mag_db,phase_deg,method"));
    assert!(base.contains(",off,vrf,"));
    assert!(base.contains(",lifted"));
    let again = run("b.csv", false);
    assert_eq!(base, again, "identical configs must give identical bytes");
    let on = run("c.csv", true);
    assert!(on.contains("# loop_enabled=true"));
    assert_ne!(base, on);
    // distinguishable by header metadata: different config hash
    let hash = |s: &str| -> String {
        s.lines()
            .find(|l| l.starts_with("# config_hash="))
            .unwrap()
            .to_string()
    };
    assert_ne!(hash(&base), hash(&on));
}

#[test]
fn netlist_text_interface_loads_and_simulates() {
    // the documented element-per-line format drives the same engine
    let text = "
        clock 8 500e6 0.125 0
        V vin in 0
        R rs in rf 50
        SW s1 rf b1 5 phase 0
        C c1 b1 0 80p
        PROBE vrf rf
        PROBE vb1 b1
    ";
    let (netlist, clocks) = npathsim::circuit::parse_netlist(text).unwrap();
    let sys = npathsim::circuit::extract_segments(&netlist, &clocks.expect("clock line present"))
        .unwrap();
    let resp = npathsim::engine::periodic_steady_state(
        &sys,
        &npathsim::engine::Tone {
            source: 0,
            amp: num_complex::Complex64::new(1.0, 0.0),
            freq: 501e6,
        },
        3,
    )
    .unwrap();
    let vb = resp.component_by_name("vb1", -1).unwrap();
    assert!(vb.norm() > 0.1, "single-path downconversion: {}", vb.norm());
}

/// Keep the full-default rf-response run out of the regular suite (it is a
/// multi-minute sweep); a trimmed grid exercises the same path.
#[test]
fn rf_response_trimmed_grid() {
    let dir = tmpdir("rf");
    let path = dir.join("rf.csv");
    let out = bin()
        .args([
            "rf-response",
            "--no-timestamp",
            "--set",
            "sweep.start=1.49e9",
            "--set",
            "sweep.stop=1.51e9",
            "--set",
            "sweep.points=3",
        ])
        .arg("--out")
        .arg(&path)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains(",off,vrf,"));
    assert!(text.contains(",on,vrf,"));
    let summary = String::from_utf8_lossy(&out.stdout);
    assert!(summary.contains("peak3_off=") && summary.contains("peak3_on="));
}

#[test]
fn config_error_paths_kept_clean() {
    let dir = tmpdir("cfg_err");
    // bad value
    let out = bin()
        .args(["validate", "--set", "npath.r_on=lots"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    // unknown key
    let out = bin()
        .args(["validate", "--set", "npath.bogus=1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
    assert!(std::fs::read_dir(&dir).unwrap().next().is_none());
}
