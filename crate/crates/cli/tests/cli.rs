//! End-to-end checks of the command-line interface: exit codes, output
//! files, and the round trips between subcommands.

use std::process::Command;

fn bayalign() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bayalign"))
}

#[test]
fn usage_error_exits_2() {
    // align without inputs
    let out = bayalign().args(["align"]).output().unwrap();
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let out = bayalign().args(["no-such-command"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_chain_flag_is_usage_error() {
    let out = bayalign()
        .args(["align", "--x", "a.pdb", "--y", "b.pdb"])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn missing_file_exits_1() {
    let out = bayalign()
        .args([
            "align",
            "--x",
            "/nonexistent.pdb",
            "--y",
            "/nonexistent.pdb",
            "--chain-x",
            "A",
            "--chain-y",
            "A",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn fixture_align_writes_three_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = bayalign()
        .args([
            "align",
            "--oracle-fixture",
            "small4",
            "--seed",
            "7",
            "--sweeps",
            "4000",
            "--burn-in",
            "1000",
            "--thin",
            "10",
            "--v",
            "30",
        ])
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for file in [
        "samples.csv",
        "matchprobs.csv",
        "matchprobs_dense.csv",
        "summary.json",
    ] {
        assert!(out_dir.join(file).exists(), "missing {file}");
    }

    // Determinism: same seed, same bytes.
    let out_dir2 = dir.path().join("run2");
    let again = bayalign()
        .args([
            "align",
            "--oracle-fixture",
            "small4",
            "--seed",
            "7",
            "--sweeps",
            "4000",
            "--burn-in",
            "1000",
            "--thin",
            "10",
            "--v",
            "30",
        ])
        .arg("--out-dir")
        .arg(&out_dir2)
        .output()
        .unwrap();
    assert!(again.status.success());
    for file in ["samples.csv", "matchprobs.csv", "summary.json"] {
        assert_eq!(
            std::fs::read(out_dir.join(file)).unwrap(),
            std::fs::read(out_dir2.join(file)).unwrap(),
            "{file} differs between identical runs"
        );
    }

    // summarize on the emitted samples reproduces summary.json exactly.
    let recomputed = dir.path().join("summary2.json");
    let status = bayalign()
        .arg("summarize")
        .arg("--samples")
        .arg(out_dir.join("samples.csv"))
        .arg("--out")
        .arg(&recomputed)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(
        std::fs::read(out_dir.join("summary.json")).unwrap(),
        std::fs::read(&recomputed).unwrap()
    );

    // point-estimate runs on the dense table.
    let out = bayalign()
        .arg("point-estimate")
        .arg("--matchprobs")
        .arg(out_dir.join("matchprobs_dense.csv"))
        .args(["--k", "0.5"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("matches"));
}

#[test]
fn zcheck_cross_validates() {
    let out = bayalign()
        .args(["zcheck", "--m", "4", "--n", "5", "--g", "2", "--h", "0.3"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("relative error"), "{text}");
}

#[test]
fn pam_dump_has_twenty_rows() {
    let out = bayalign().args(["pam", "--l", "120"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().count(), 20);
    assert_eq!(text.lines().next().unwrap().split_whitespace().count(), 20);
}

#[test]
fn align_accepts_init_matching_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.cfg");
    std::fs::write(
        &cfg_path,
        "v = 30\nsweeps = 2000\nburn_in = 400\nthin = 10\nseed = 3\n",
    )
    .unwrap();
    let init_path = dir.path().join("init.txt");
    std::fs::write(&init_path, "1 1\n3 3\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = bayalign()
        .args(["align", "--oracle-fixture", "small4"])
        .arg("--config")
        .arg(&cfg_path)
        .arg("--init-matching")
        .arg(&init_path)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out_dir.join("samples.csv").exists());
}

#[test]
fn bad_init_matching_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let init_path = dir.path().join("init.txt");
    std::fs::write(&init_path, "2 2\n1 1\n").unwrap();
    let out = bayalign()
        .args(["align", "--oracle-fixture", "small4"])
        .arg("--init-matching")
        .arg(&init_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn pdb_pipeline_runs_on_written_fixture() {
    // Two tiny synthetic PDB files: y is x rigidly moved, so the chain
    // has an easy dominant alignment.
    let dir = tempfile::tempdir().unwrap();
    let atom = |serial: u32, res: &str, chain: char, seq: u32, p: [f64; 3]| {
        format!(
            "ATOM  {serial:>5}  CA  {res:<3} {chain}{seq:>4}    {:>8.3}{:>8.3}{:>8.3}  1.00  0.00           C",
            p[0], p[1], p[2]
        )
    };
    let res_names = ["GLY", "ALA", "TRP", "LYS", "SER", "VAL", "LEU", "THR"];
    let mut x_lines = Vec::new();
    let mut y_lines = Vec::new();
    let mut coords = Vec::new();
    let mut state = 0x1234_5678u64;
    let mut next = move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
        (state >> 11) as f64 / (1u64 << 53) as f64 * 20.0
    };
    for (i, res) in res_names.iter().enumerate() {
        let p = [next(), next(), next()];
        coords.push(p);
        x_lines.push(atom(i as u32 + 1, res, 'A', i as u32 + 1, p));
        // y: shifted copy (identity rotation, translation (5, -3, 2)).
        let q = [p[0] + 5.0, p[1] - 3.0, p[2] + 2.0];
        y_lines.push(atom(i as u32 + 1, res, 'A', i as u32 + 1, q));
    }
    let x_path = dir.path().join("x.pdb");
    let y_path = dir.path().join("y.pdb");
    std::fs::write(&x_path, x_lines.join("\n") + "\n").unwrap();
    std::fs::write(&y_path, y_lines.join("\n") + "\n").unwrap();

    let out_dir = dir.path().join("out");
    let out = bayalign()
        .arg("align")
        .arg("--x")
        .arg(&x_path)
        .arg("--y")
        .arg(&y_path)
        .args([
            "--chain-x",
            "A",
            "--chain-y",
            "A",
            "--seed",
            "5",
            "--sweeps",
            "20000",
            "--burn-in",
            "5000",
            "--thin",
            "20",
            "--tempering",
        ])
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("median L"), "{stdout}");
    // A rigid copy should align fully or nearly so.
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    let median_l = summary["l"]["median"].as_f64().unwrap();
    assert!(median_l >= 7.0, "median L = {median_l}");
}
