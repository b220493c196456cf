use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hypersparse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypersparse"))
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

/// Writes a small synthetic bundle and returns its config path.
fn small_bundle(dir: &Path) -> String {
    let work = format!("work_dir={}", dir.display());
    let o = hypersparse(&[
        "--set",
        &work,
        "--set",
        "synth_depth=2",
        "--set",
        "synth_branching=2",
        "--set",
        "synth_sentences_per_concept=60",
        "synth",
    ]);
    assert!(o.status.success(), "synth failed: {}", stderr(&o));
    dir.join("pipeline.conf").display().to_string()
}

const SMALL: [&str; 4] = ["--set", "sparse_dim=20", "--set", "svd_dim=30"];

fn run_with(conf: &str, extra: &[&str]) -> Output {
    let mut args = vec!["--config", conf];
    args.extend_from_slice(&SMALL);
    args.extend_from_slice(extra);
    hypersparse(&args)
}

#[test]
fn synth_then_run_reports_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let conf = small_bundle(dir.path());
    let o = run_with(&conf, &["run"]);
    assert!(o.status.success(), "run failed: {}", stderr(&o));
    let out = stdout(&o);
    let acc: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("accuracy="))
        .expect("accuracy line")
        .parse()
        .unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert!(out.contains("scorer=balapinc"));
    for stage in ["extract-contexts", "build-embeddings", "train", "evaluate"] {
        assert!(dir.path().join(format!("manifest.{stage}.txt")).exists(), "{stage}");
    }
    assert!(!dir.path().join(".hypersparse.lock").exists());
}

#[test]
fn rerunning_a_stage_reproduces_its_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let conf = small_bundle(dir.path());
    assert!(run_with(&conf, &["run"]).status.success());
    let manifest = dir.path().join("manifest.train.txt");
    let before = fs::read_to_string(&manifest).unwrap();
    let sparse = fs::read(dir.path().join("sparse.e.txt")).unwrap();
    let o = run_with(&conf, &["train"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(&manifest).unwrap(), before);
    assert_eq!(fs::read(dir.path().join("sparse.e.txt")).unwrap(), sparse);
    assert!(before.contains("config_hash="));
    assert!(before.lines().filter(|l| l.starts_with("output=")).count() >= 2);
}

#[test]
fn significance_between_scorers() {
    let dir = tempfile::tempdir().unwrap();
    let conf = small_bundle(dir.path());
    assert!(run_with(&conf, &["run"]).status.success());
    let o = run_with(&conf, &["--set", "scorer=slqs", "evaluate"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("scorer=slqs"));
    let a = dir.path().join("predictions.bisparse.balapinc.tsv");
    let b = dir.path().join("predictions.bisparse.slqs.tsv");
    let o = hypersparse(&["significance", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    for key in ["n_compared=", "statistic=", "p_value=", "exact_p_value="] {
        assert!(out.contains(key), "{key} missing from {out}");
    }
}

#[test]
fn missing_input_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let work = format!("work_dir={}", dir.path().display());
    let missing = format!("corpus_e={}", dir.path().join("absent.conllu").display());
    let other = format!("corpus_f={}", dir.path().join("absent_f.conllu").display());
    let o = hypersparse(&["--set", &work, "--set", &missing, "--set", &other, "extract-contexts"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing input"));

    let o = hypersparse(&["--config", dir.path().join("nope.conf").to_str().unwrap(), "run"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn window_context_without_size_is_a_config_error() {
    let o = hypersparse(&["--set", "context=window", "extract-contexts"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("window"), "{}", stderr(&o));
}

#[test]
fn malformed_override_is_rejected() {
    let o = hypersparse(&["--set", "seed", "train"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("key=value"));
}

#[test]
fn locked_work_dir_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let conf = small_bundle(dir.path());
    fs::write(dir.path().join(".hypersparse.lock"), "1\n").unwrap();
    let o = run_with(&conf, &["extract-contexts"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("locked"), "{}", stderr(&o));
}
