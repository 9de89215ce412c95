use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn frfid() -> Command {
    Command::new(env!("CARGO_BIN_EXE_frfid"))
}

fn quick() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/quick.toml")
}

fn code(cmd: &mut Command) -> i32 {
    cmd.output().unwrap().status.code().unwrap()
}

#[test]
fn validate_reports_every_violation_with_exit_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[lpm]\nhalf_width = 6\n[excitation]\nrms = -1.0\n").unwrap();
    let out = frfid().args(["validate", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("13") && err.contains("15") && err.contains("rms"), "{err}");

    assert_eq!(code(frfid().args(["validate", "--config"]).arg(quick())), 0);
    assert_eq!(code(frfid().arg("validate")), 0);
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    v.sort();
    v
}

#[test]
fn identify_compare_and_external_data() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let status = frfid()
        .args(["identify", "--methods", "lpm,etfe", "--config"])
        .arg(quick())
        .arg("--out")
        .arg(&a)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(
        files(&a),
        [
            "error_etfe.csv",
            "error_lpm.csv",
            "frf_etfe.csv",
            "frf_lpm.csv",
            "input_fast.csv",
            "manifest.json",
            "output_slow.csv",
            "resolved_config.toml",
            "timing.json"
        ]
    );

    let cmp = dir.path().join("cmp");
    let out = frfid().arg("compare").arg(&a).arg("--out").arg(&cmp).output().unwrap();
    assert!(out.status.success());
    let table = fs::read_to_string(cmp.join("comparison.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(table.starts_with("method,band0_bins,"));

    // the simulated records fed back in as measurements
    let b = dir.path().join("b");
    let status = frfid()
        .args(["identify", "--methods", "lpm", "--config"])
        .arg(quick())
        .arg("--input-csv")
        .arg(a.join("input_fast.csv"))
        .arg("--output-csv")
        .arg(a.join("output_slow.csv"))
        .arg("--out")
        .arg(&b)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(!b.join("error_lpm.csv").exists());
    let sim = fs::read_to_string(a.join("frf_lpm.csv")).unwrap();
    let ext = fs::read_to_string(b.join("frf_lpm.csv")).unwrap();
    // the CSV round trip of the records is exact
    assert_eq!(sim, ext);

    // a record of the wrong length is a runtime error
    let c = dir.path().join("c");
    let mut cfg = fs::read_to_string(quick()).unwrap();
    cfg = cfg.replace("t_m = 10.0", "t_m = 20.0");
    let longer = dir.path().join("longer.toml");
    fs::write(&longer, cfg).unwrap();
    let rc = code(
        frfid()
            .args(["identify", "--config"])
            .arg(&longer)
            .arg("--input-csv")
            .arg(a.join("input_fast.csv"))
            .arg("--output-csv")
            .arg(a.join("output_slow.csv"))
            .arg("--out")
            .arg(&c),
    );
    assert_eq!(rc, 2);
}

#[test]
fn excite_and_simulate_write_records() {
    let dir = tempfile::tempdir().unwrap();
    let e = dir.path().join("e");
    assert_eq!(code(frfid().args(["excite", "--config"]).arg(quick()).arg("--out").arg(&e)), 0);
    assert!(e.join("input_fast.csv").exists() && e.join("input_fast_sparse.csv").exists());
    let s = dir.path().join("s");
    assert_eq!(
        code(frfid().args(["--threads", "2", "simulate", "--seed", "9", "--config"]).arg(quick()).arg("--out").arg(&s)),
        0
    );
    assert!(s.join("output_slow.csv").exists());
    let resolved = fs::read_to_string(s.join("resolved_config.toml")).unwrap();
    assert!(resolved.contains("seed = 9"));
}

#[test]
fn montecarlo_rejects_noise_free_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("mc.toml");
    fs::write(&cfg, "runs = 10\n[grid]\nt_m = 10.0\n[lpm]\nhalf_width = 20\n").unwrap();
    assert_eq!(code(frfid().args(["montecarlo", "--config"]).arg(&cfg).arg("--out").arg(dir.path())), 1);
}
