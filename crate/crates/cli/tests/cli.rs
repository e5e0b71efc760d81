use std::fs;
use std::process::{Command, Output};

const SMALL: [&str; 16] = [
    "--L", "16", "--P", "2", "--Q", "2", "--D", "8", "--K", "1", "--n_blocks", "30", "--timing", "false",
    "--max_blocks_factor", "1",
];

fn scim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scim"))
        .args(args)
        .env_remove("SCIM_SEED")
        .output()
        .expect("running scim")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn run_prints_summary_csv() {
    let mut args = vec!["run"];
    args.extend(SMALL);
    args.extend(["--detectors", "cavi,omp,omp_mmse", "--snr_db", "10,20"]);
    let out = scim(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "detector,axis,axis_value,snr_db,ier,ier_ci95,mean_detect_seconds,blocks_run");
    assert_eq!(lines.len(), 1 + 3 * 2);
    assert!(lines[1].starts_with("cavi,snr,10.0000,10.0000,"));
    assert!(lines.iter().skip(1).all(|l| l.ends_with(",30")));
}

#[test]
fn reruns_are_byte_identical_and_output_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let mut a = vec!["run"];
    a.extend(SMALL);
    let first = stdout(&scim(&a));
    let mut b = a.clone();
    b.extend(["--workers", "2", "--output", path.to_str().unwrap()]);
    let out = scim(&b);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert_eq!(fs::read_to_string(&path).unwrap(), first);
}

#[test]
fn config_file_then_env_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sim.cfg");
    fs::write(&path, "# small system\nL = 16\nP = 2\nQ = 2\nD = 8\nK = 1\nn_blocks = 20\ntiming = false\nseed = 5\n").unwrap();
    let cfg = path.to_str().unwrap();
    let run = |extra: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_scim"));
        cmd.args(["run", "--config", cfg, "--max_blocks_factor", "1"]).args(extra);
        match env {
            Some(s) => cmd.env("SCIM_SEED", s),
            None => cmd.env_remove("SCIM_SEED"),
        };
        stdout(&cmd.output().unwrap())
    };
    let file_seed = run(&[], None);
    assert_eq!(run(&["--seed", "5"], None), file_seed);
    assert_eq!(run(&["--seed", "5"], Some("77")), file_seed);
    assert_eq!(run(&[], Some("77")), run(&["--seed", "77"], None));
    assert_eq!(file_seed.lines().count(), 3);
}

#[test]
fn sweep_over_k() {
    let out = scim(&[
        "sweep", "--axis", "K", "--axis_values", "1,2", "--L", "32", "--P", "2", "--Q", "2", "--D", "8",
        "--n_blocks", "20", "--detectors", "cavi", "--timing", "false",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("cavi,K,1.00000,"));
    assert!(rows[1].starts_with("cavi,K,2.00000,"));
}

#[test]
fn coherence_table() {
    let out = scim(&["coherence", "--xi", "0.5,1.0"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "xi,coherence");
    assert_eq!(lines.len(), 3);
    assert!(lines[2].starts_with("1.00000,0.0"));
}

#[test]
fn waveform_table() {
    let out = scim(&["waveform", "--oversample", "2", "--K", "1", "--L", "16", "--Q", "2", "--D", "8", "--P", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.starts_with("t,device,amplitude_real,amplitude_imag\n"));
    assert_eq!(text.lines().count(), 1 + 16 * 2);
}

#[test]
fn oracle_check_small() {
    let out = scim(&["oracle-check", "--trials", "50", "--seed", "3"]);
    assert!(out.status.success(), "{}", stdout(&out));
    assert_eq!(stdout(&out).lines().filter(|l| l.starts_with("PASS")).count(), 4);
}

#[test]
fn errors_are_one_line_and_nonzero() {
    for args in [
        vec!["run", "--Q", "zero"],
        vec!["run", "--P", "100"],
        vec!["run", "--detectors", "mmse", "--K", "2"],
        vec!["sweep", "--axis", "bogus"],
        vec!["run", "--config", "/nonexistent/file.cfg"],
    ] {
        let out = scim(&args);
        assert!(!out.status.success(), "{args:?}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert!(err.starts_with("error: "), "{args:?}: {err}");
        assert_eq!(err.trim_end().lines().count(), 1, "{args:?}: {err}");
    }
}
