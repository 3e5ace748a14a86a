use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn qml(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qml")).args(args).env_remove("QML_SEED").output().unwrap()
}

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name).display().to_string()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(qml(&[]).status.code(), Some(2));
    assert_eq!(qml(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(qml(&["decompose", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(qml(&["sweep", "--cell", "qutrit9"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1() {
    let o = qml(&["train", "--dataset", "/nonexistent.csv", "--cell", "qutrit1-nce"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
    let o = qml(&["train", "--dataset", &data("iris.csv")]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn decompose_prints_angles() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("u.txt");
    std::fs::write(&m, "0,0 1,0 0,0\n0,0 0,0 1,0\n1,0 0,0 0,0\n").unwrap();
    for form in ["hardware", "theoretical"] {
        let o = qml(&["decompose", "--matrix", path(&m), "--form", form]);
        assert!(o.status.success());
        let out = stdout(&o);
        assert_eq!(out.lines().filter(|l| l.starts_with("theta")).count(), 8);
        assert!(out.contains("global_phase"));
        let err: f64 = out.lines().last().unwrap().rsplit(' ').next().unwrap().parse().unwrap();
        assert!(err < 1e-9);
    }
    let o = qml(&["decompose", "--matrix", path(&m), "--json"]);
    assert!(stdout(&o).contains("\"theta\""));

    std::fs::write(&m, "1,0 1,0 0,0\n0,0 1,0 0,0\n0,0 0,0 1,0\n").unwrap();
    assert_eq!(qml(&["decompose", "--matrix", path(&m)]).status.code(), Some(1));
}

#[test]
fn train_writes_records_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = qml(&[
        "train",
        "--dataset",
        &data("iris.csv"),
        "--cell",
        "qutrit1-nce",
        "--seeds",
        "2",
        "--out",
        path(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trials = std::fs::read_to_string(dir.path().join("trials.jsonl")).unwrap();
    assert_eq!(trials.lines().count(), 2);
    let summary = std::fs::read_to_string(dir.path().join("summary.tsv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
    let manifest = std::fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("repetitions = 2"));
}

#[test]
fn manifest_and_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let m = dir.path().join("run.txt");
    std::fs::write(
        &m,
        format!(
            "cell = qubit1-nce\nencoding = fixed:2,3\nrepetitions = 1\nseed = 5\ndataset = {}\noutput_dir = {}\n",
            data("iris.csv"),
            path(&out)
        ),
    )
    .unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_qml"))
        .args(["train", "--manifest", path(&m)])
        .env("QML_SEED", "11")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let written = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(written.contains("seed = 11"));
    assert!(written.contains("encoding = fixed:2,3"));
}

#[test]
fn sweep_then_plot() {
    let dir = tempfile::tempdir().unwrap();
    let o = qml(&[
        "sweep",
        "--dataset",
        &data("penguins.csv"),
        "--cell",
        "qubit1-nce",
        "--seeds",
        "1",
        "--out",
        path(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(dir.path().join("sweep.tsv")).unwrap();
    assert_eq!(table.lines().count(), 13);
    assert!(dir.path().join("boxplot.svg").exists());
    let json: PathBuf = dir.path().join("sweep_penguins_qubit1-nce.json");
    let svg = dir.path().join("again.svg");
    let o = qml(&["plot", "--sweeps", path(&json), "--output", path(&svg)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(&svg).unwrap(), std::fs::read(dir.path().join("boxplot.svg")).unwrap());
    assert_eq!(qml(&["plot", "--output", path(&svg)]).status.code(), Some(1));
}

#[test]
fn hw_protocol_records() {
    let dir = tempfile::tempdir().unwrap();
    let o = qml(&[
        "hw-protocol",
        "--dataset",
        &data("iris.csv"),
        "--seeds",
        "1",
        "--encoding-iterations",
        "2",
        "--rotosolve-iterations",
        "2",
        "--out",
        path(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let records = std::fs::read_to_string(dir.path().join("hw_iterations.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 3);
    assert!(dir.path().join("trajectory.svg").exists());
    let svg = dir.path().join("t.svg");
    let summary = dir.path().join("hw_summary.json");
    assert!(qml(&["plot", "--hardware", path(&summary), "--output", path(&svg)]).status.success());
}

#[test]
fn encode_train_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = qml(&["encode-train", "--dataset", &data("iris.csv"), "--iterations", "3", "--out", path(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("trained loss"));
    let traj = std::fs::read_to_string(dir.path().join("encoding_trajectory.jsonl")).unwrap();
    assert_eq!(traj.lines().count(), 6);
}
