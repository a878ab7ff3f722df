use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use seqdac::table::Table;
use tempfile::TempDir;

fn seqdac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqdac"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const RUN: &str = "env = sigmoid\nvariant = seq-mask\nH = 2\nC = 3\nT = 3\nhidden = 8\nwarmup = 10\nbatch_size = 4\neval_episodes = 2\n";

#[test]
fn train_eval_compare_round_trip() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "run.txt", RUN);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));

    let out = seqdac(&["train", &cfg, "--out", path(&a), "--set", "total_steps=40", "--set", "learner = ace"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let snapshot = fs::read_to_string(a.join("config.txt")).unwrap();
    assert!(snapshot.contains("learner = ace") && snapshot.contains("total_steps = 40"));

    let out = seqdac(&["train", &cfg, "--out", path(&b), "--set", "total_steps=40", "--set", "learner=ace"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read(a.join("seed-0/train.csv")).unwrap(), fs::read(b.join("seed-0/train.csv")).unwrap());

    // eval without --config falls back on the run snapshot; stdout is the CSV
    let out = seqdac(&["eval", path(&a.join("seed-0/checkpoint")), "--episodes", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let table = Table::parse(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(table.rows.len(), 3 + 2);

    let csv = dir.path().join("cmp.csv");
    let out = seqdac(&["compare", path(&a), path(&b), "--out", path(&csv)]);
    assert_eq!(out.status.code(), Some(0));
    let cmp = Table::read(&csv).unwrap();
    let rank = cmp.column("rank").unwrap();
    assert!(cmp.rows.iter().all(|r| r[rank] == "1"));
    assert!(String::from_utf8(out.stdout).unwrap().contains("rank"));
}

#[test]
fn config_errors_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("out");
    let cases = [
        "learner = qmix\n",
        "env = sigmoid\nvariant = seq-robust-3\nH = 4\n",
        "gamma = 1.5\n",
        "seeds = 1,1\n",
        "agent_order = 0,0\n",
        "hidden\n",
        "nonsense_key = 3\n",
        "include missing.txt\n",
    ];
    for text in cases {
        let cfg = write_config(dir.path(), "bad.txt", text);
        let out = seqdac(&["train", &cfg, "--out", path(&out_dir)]);
        assert_eq!(out.status.code(), Some(1), "config {text:?}");
        assert!(!out.stderr.is_empty());
    }
    let good = write_config(dir.path(), "good.txt", RUN);
    assert_eq!(seqdac(&["train", &good, "--out", path(&out_dir), "--set", "bogus=1"]).status.code(), Some(1));
    assert_eq!(seqdac(&["train", &good, "--out", path(&out_dir), "--set", "noequals"]).status.code(), Some(1));
    assert_eq!(seqdac(&["train"]).status.code(), Some(1));
    assert_eq!(seqdac(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(seqdac(&["compare", path(dir.path())]).status.code(), Some(1));
    assert_eq!(seqdac(&["fronts", "--out", path(&out_dir), "-m", "4"]).status.code(), Some(1));
    assert_eq!(seqdac(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "run.txt", RUN);
    // the output location is an existing regular file
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = seqdac(&["train", &cfg, "--out", path(&blocker.join("run"))]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    // a checkpoint whose network file was truncated
    let run = dir.path().join("run");
    assert!(seqdac(&["train", &cfg, "--out", path(&run)]).status.success());
    let net = run.join("seed-0/checkpoint/value.net");
    let bytes = fs::read(&net).unwrap();
    fs::write(&net, &bytes[..bytes.len() / 2]).unwrap();
    let out = seqdac(&["eval", path(&run.join("seed-0/checkpoint"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_covers_the_suite_and_custom_envs() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("bench.csv");
    let out = seqdac(&["bench", "--episodes", "2", "--out", path(&csv)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = Table::read(&csv).unwrap();
    assert_eq!(table.schema, "seqdac-bench/1");
    let names: Vec<&str> = table.rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(names, ["sigmoid-5d", "seq-5d", "seq-mask-5d", "seq-mask-10d", "seq-robust-1-5d", "moead-dtlz2"]);
    let steps = table.column("steps").unwrap();
    assert_eq!(table.rows[0][steps], "22");
    assert_eq!(table.rows[5][steps], "100");
    assert!(!table.rows[5][table.column("mean_metric").unwrap()].is_empty());

    let cfg = write_config(dir.path(), "c.txt", "env = constant\nreward = 1.5\nT = 4\nactions = 2\n");
    let out = seqdac(&["bench", "--config", &cfg, "--episodes", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("constant") && text.contains("6.000000"), "{text}");
}

#[test]
fn fronts_command_writes_every_problem() {
    let dir = TempDir::new().unwrap();
    let out = seqdac(&["fronts", "--out", path(dir.path()), "-m", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let dtlz2 = Table::read(&dir.path().join("dtlz2_m2.csv")).unwrap();
    assert_eq!(dtlz2.header, ["f1", "f2"]);
    for row in &dtlz2.rows {
        let f: Vec<f64> = row.iter().map(|v| v.parse().unwrap()).collect();
        assert!((f[0] * f[0] + f[1] * f[1] - 1.0).abs() < 1e-12);
    }
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 8);
}
