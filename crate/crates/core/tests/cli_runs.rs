use std::path::Path;

use gatelab::cli::{dataset_path, run_with, EXIT_CONFIG, EXIT_GRADCHECK, EXIT_IO, EXIT_OK};
use gatelab::store::{read_dataset, read_metrics, Samples};
use gatelab::tasks::TaskKind;

fn run(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut argv = vec!["gatelab"];
    argv.extend_from_slice(args);
    let code = run_with(argv, &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let (code, _) = run(&["gen", "--task", "adding", "--len", "12", "--seed", "7", "--train-size", "40", "--test-size", "20", "--data", s(d)]);
        assert_eq!(code, EXIT_OK);
    }
    for split in ["train", "test"] {
        let x = std::fs::read(dataset_path(&a, TaskKind::Adding, 12, split)).unwrap();
        let y = std::fs::read(dataset_path(&b, TaskKind::Adding, 12, split)).unwrap();
        assert_eq!(x, y);
    }
    let train = std::fs::read(dataset_path(&a, TaskKind::Adding, 12, "train")).unwrap();
    let test = std::fs::read(dataset_path(&a, TaskKind::Adding, 12, "test")).unwrap();
    assert_ne!(train, test);
}

#[test]
fn counting_labels_stay_in_range() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = run(&["gen", "--task", "counting", "--train-size", "500", "--test-size", "10", "--data", s(dir.path())]);
    assert_eq!(code, EXIT_OK);
    let ds = read_dataset(&dataset_path(dir.path(), TaskKind::Counting, 20, "train"), TaskKind::Counting).unwrap();
    let Samples::Counting(v) = ds.samples else { panic!("wrong task") };
    assert_eq!(v.len(), 500);
    assert!(v.iter().all(|c| (1..=20).contains(&c.count)));
}

#[test]
fn zero_epochs_writes_only_the_initial_row() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = dir.path().join("run");
    run(&["gen", "--task", "adding", "--len", "6", "--train-size", "32", "--test-size", "16", "--data", s(&data)]);
    let (code, stdout) = run(&["train", "--task", "adding", "--len", "6", "--epochs", "0", "--data", s(&data), "--out", s(&out)]);
    assert_eq!(code, EXIT_OK, "{stdout}");
    let m = read_metrics(&out.join("metrics.txt")).unwrap();
    assert_eq!(m.len(), 1);
    assert_eq!((m[0].epoch, m[0].split.as_str()), (0, "test"));
    assert!(out.join("final.ckpt").exists());
    assert!(stdout.contains("convergence_epoch=inf"));

    let (code, line) = run(&["eval", "--task", "adding", "--len", "6", "--data", s(&data), "--ckpt", s(&out.join("final.ckpt"))]);
    assert_eq!(code, EXIT_OK);
    assert!(line.contains("loss="), "{line}");
}

#[test]
fn reruns_produce_identical_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    run(&["gen", "--task", "adding", "--len", "6", "--train-size", "64", "--test-size", "32", "--data", s(&data)]);
    let mut files = Vec::new();
    for name in ["r1", "r2"] {
        let out = dir.path().join(name);
        let (code, _) = run(&["train", "--task", "adding", "--len", "6", "--epochs", "3", "--refine", "add", "--gates", "output", "--data", s(&data), "--out", s(&out)]);
        assert_eq!(code, EXIT_OK);
        files.push(std::fs::read(out.join("metrics.txt")).unwrap());
    }
    assert_eq!(files[0], files[1]);
    assert_eq!(read_metrics(&dir.path().join("r1").join("metrics.txt")).unwrap().len(), 7);
}

#[test]
fn gradcheck_exit_codes() {
    let (code, out) = run(&["gradcheck", "--arch", "gru", "--refine", "mul", "--gates", "reset", "--hidden", "3", "--len", "6"]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert!(out.contains("failures=0"));
    // Central differences cannot reach this tolerance.
    let (code, out) = run(&["gradcheck", "--arch", "lstm", "--hidden", "3", "--len", "6", "--tol", "1e-12"]);
    assert_eq!(code, EXIT_GRADCHECK, "{out}");
    assert!(out.contains("failures=1"));
    let (code, _) = run(&["gradcheck", "--hidden", "64"]);
    assert_eq!(code, EXIT_CONFIG);
}

#[test]
fn illegal_refinement_is_a_config_error() {
    let (code, _) = run(&["gradcheck", "--arch", "gru", "--refine", "add", "--gates", "update", "--hidden", "3"]);
    assert_eq!(code, EXIT_CONFIG);
    let (code, _) = run(&["gradcheck", "--arch", "lstm", "--refine", "add", "--gates", "forget", "--hidden", "3"]);
    assert_eq!(code, EXIT_CONFIG);
}

#[test]
fn missing_inputs_are_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = run(&["train", "--task", "adding", "--data", s(&dir.path().join("nothing")), "--out", s(dir.path())]);
    assert_eq!(code, EXIT_IO);
    let (code, _) = run(&["eval", "--task", "adding", "--ckpt", s(&dir.path().join("none.ckpt"))]);
    assert_eq!(code, EXIT_IO);
}
