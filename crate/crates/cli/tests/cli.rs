use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn patchfill(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_patchfill"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// 16x16 binary PGM with a smooth pattern.
fn write_image(path: &Path) {
    let mut bytes = b"P5\n16 16\n255\n".to_vec();
    bytes.extend((0..256).map(|i| ((i / 16) * 9 + (i % 16) * 5) as u8));
    fs::write(path, bytes).unwrap();
}

/// Patches small enough for a 16x16 image; one group holding every patch.
const SMALL_CONFIG: &str = r#"{
  "patch": { "patch_n": 4 },
  "grouping": { "k_groups": 1, "group_size": 169, "search_radius": 12 },
  "admm": { "max_iters": 50 }
}"#;

#[test]
fn missing_input_exits_3_and_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = patchfill(&[
        "inpaint",
        "--input",
        "/no/such/image.pgm",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("/no/such/image.pgm"), "{}", stderr(&o));
}

#[test]
fn psnr_of_identical_images() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("a.pgm");
    write_image(&img);
    let o = patchfill(&["psnr", img.to_str().unwrap(), img.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "identical");
}

#[test]
fn fully_observed_inpaint_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("in.pgm");
    write_image(&img);
    let mask = dir.path().join("mask.txt");
    let text: String = (0..16).flat_map(|r| (0..16).map(move |c| format!("{r} {c}\n"))).collect();
    fs::write(&mask, text).unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, SMALL_CONFIG).unwrap();
    let out = dir.path().join("out");
    let o = patchfill(&[
        "inpaint",
        "--config",
        cfg.to_str().unwrap(),
        "--input",
        img.to_str().unwrap(),
        "--mask",
        mask.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["psnr_recovered"], "identical");
    assert_eq!(report["observed_pixels"], 256);
    for f in ["effective_config.json", "reference.pgm", "groups.json", "recovered.pgm", "solve_trace.csv"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    assert_eq!(fs::read(out.join("recovered.pgm")).unwrap(), fs::read(&img).unwrap());
}

#[test]
fn unknown_config_keys_are_all_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{ "fracton": 0.3, "admm": { "rho": 1.0, "max_iter": 9 } }"#).unwrap();
    let o = patchfill(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("fracton") && err.contains("admm.max_iter"), "{err}");
}

#[test]
fn invalid_values_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{ "fraction": 1.5, "admm": { "rho": -1.0 } }"#).unwrap();
    let o = patchfill(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("fraction") && err.contains("rho"), "{err}");
}

#[test]
fn phase_transition_with_heavy_sampling_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{ "phase": { "synthetic": { "n_side": 8, "components": 1 }, "patch_n": 3,
             "sweep": { "m_grid": [640], "trials": 3 } } }"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = patchfill(&[
        "phase-transition",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("phase.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("640,3,3,"), "{csv}");
}

#[test]
fn verify_prints_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = patchfill(&["verify", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    for name in ["lifted-operator sparsity", "certificate telescoping identity", "certificate range condition"] {
        let line = text.lines().find(|l| l.contains(name)).unwrap_or_else(|| panic!("{text}"));
        assert!(line.starts_with("PASS"), "{line}");
    }
    assert!(text.contains("(probabilistic)"));
    assert!(out.join("verify.json").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("in.pgm");
    write_image(&img);
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, SMALL_CONFIG).unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = patchfill(&[
            "inpaint",
            "--config",
            cfg.to_str().unwrap(),
            "--input",
            img.to_str().unwrap(),
            "--fraction",
            "0.5",
            "--seed",
            "17",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["mask.txt", "reference.pgm", "groups.json", "recovered.pgm", "solve_trace.csv", "report.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}
