use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pspace(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pspace"))
        .current_dir(dir)
        .env("PSPACE_THREADS", "1")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Two item clusters rated high by opposite user groups.
fn write_ratings(dir: &Path) {
    let mut s = String::new();
    for i in 0..20 {
        for u in 0..30 {
            let agree = (i < 10) == (u < 15);
            let score = if agree { 5 - (i + u) % 2 } else { 1 + (i + u) % 2 };
            writeln!(s, "m{i:02}\tu{u:02}\t{score}").unwrap();
        }
    }
    fs::write(dir.join("ratings.tsv"), s).unwrap();
}

fn build_space(dir: &Path) {
    let o = pspace(dir, &["build-space", "--ratings", "ratings.tsv", "--dim", "4", "--epochs", "10", "--out", "space.txt"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unknown_flag_fails_with_usage() {
    let dir = tempfile::tempdir().unwrap();
    let o = pspace(dir.path(), &["eval", "--bogus"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn missing_input_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let o = pspace(dir.path(), &["build-space", "--ratings", "absent.tsv", "--out", "space.txt"]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("absent.tsv") && err.contains("Usage"), "{err}");
    assert!(!dir.path().join("space.txt").exists());
}

#[test]
fn eval_identical_files_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.tsv"), "x\t1\ny\t0\nz\t1\n").unwrap();
    for (metric, expected) in [
        ("gmean", "gmean\t1.0\n"),
        ("pr", "precision\t1.0\nrecall\t1.0\n"),
        ("accuracy", "accuracy\t1.0\n"),
    ] {
        let o = pspace(dir.path(), &["eval", "--pred", "a.tsv", "--truth", "a.tsv", "--metric", metric]);
        assert!(o.status.success());
        assert_eq!(stdout(&o), expected);
    }
}

#[test]
fn negative_scale_bounds_parse() {
    let dir = tempfile::tempdir().unwrap();
    write_ratings(dir.path());
    let o = pspace(
        dir.path(),
        &["build-space", "--ratings", "ratings.tsv", "--scale", "-6,6", "--dim", "2", "--epochs", "1", "--out", "s.txt"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = pspace(dir.path(), &["build-space", "--ratings", "ratings.tsv", "--scale", "5,1", "--out", "t.txt"]);
    assert!(!o.status.success());
}

#[test]
fn neighbors_lists_k_items_nearest_first() {
    let dir = tempfile::tempdir().unwrap();
    write_ratings(dir.path());
    build_space(dir.path());
    let o = pspace(dir.path(), &["neighbors", "--space", "space.txt", "--item", "m03", "--k", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let rows: Vec<(&str, f64)> = out
        .lines()
        .map(|l| {
            let (id, d) = l.split_once('\t').unwrap();
            (id, d.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|(id, _)| *id != "m03"));
    assert!(rows.windows(2).all(|w| w[0].1 <= w[1].1));

    let o = pspace(dir.path(), &["neighbors", "--space", "space.txt", "--item", "nope"]);
    assert!(!o.status.success());
}

#[test]
fn reruns_are_byte_identical() {
    let runs: Vec<(String, Vec<u8>, Vec<u8>)> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            write_ratings(dir.path());
            build_space(dir.path());
            let truth: String = (0..20).map(|i| format!("m{i:02}\t{}\n", u8::from(i < 10))).collect();
            fs::write(dir.path().join("truth.tsv"), truth).unwrap();
            let o = pspace(
                dir.path(),
                &["expand", "--space", "space.txt", "--truth", "truth.tsv", "--n", "3", "--folds", "3", "--out", "pred.tsv"],
            );
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
            (
                stdout(&o),
                fs::read(dir.path().join("space.txt")).unwrap(),
                fs::read(dir.path().join("pred.tsv")).unwrap(),
            )
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
}
