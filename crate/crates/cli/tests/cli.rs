use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const CONFIG: &str = "seed = 3
[simulation]
users = 120
topics = 8
[model]
num_filters = 4
bottleneck = 3
[training]
lr = 1e-3
epochs = 3
[sweep]
num_filters = [5, 10]
batch_size = [32]
lr = [1e-3]
";

struct Run {
    dir: TempDir,
    config: PathBuf,
}

impl Run {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let config = dir.path().join("run.toml");
        fs::write(&config, CONFIG).unwrap();
        Run { dir, config }
    }

    fn out(&self) -> PathBuf {
        self.dir.path().join("work")
    }

    fn exec(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_topicchoice"))
            .args(args)
            .arg("--config")
            .arg(&self.config)
            .arg("--out")
            .arg(self.out())
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.exec(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    }

    fn read(&self, name: &str) -> String {
        fs::read_to_string(self.out().join(name)).unwrap()
    }
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_corpus(path: &Path) {
    let mut text = String::new();
    for k in 0..40 {
        let words = if k % 2 == 0 { "goal match striker keeper" } else { "vote ballot senate bill" };
        text.push_str(&format!("t{k}\t{words}\n"));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn cluster_is_deterministic() {
    let run = Run::new();
    let corpus = run.dir.path().join("corpus.tsv");
    write_corpus(&corpus);
    let input = corpus.to_str().unwrap();
    let first = run.ok(&["cluster", "--input", input]);
    let a = run.read("assignment.tsv");
    let second = run.ok(&["cluster", "--input", input]);
    assert_eq!(first, second);
    assert_eq!(a, run.read("assignment.tsv"));
    assert!(first.starts_with("J="));
    assert_eq!(a.lines().filter(|l| !l.is_empty()).count(), 41);
}

#[test]
fn missing_corpus_names_the_path() {
    let run = Run::new();
    let out = run.exec(&["cluster", "--input", "/nonexistent/corpus.tsv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("/nonexistent/corpus.tsv"));
}

#[test]
fn bad_usage_exits_2() {
    let run = Run::new();
    assert_eq!(run.exec(&["optimize", "--model", "forest"]).status.code(), Some(2));
}

#[test]
fn stages_out_of_order_fail_with_artifact_name() {
    let run = Run::new();
    let out = run.exec(&["train"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("train.engt"), "{}", stderr(&out));

    run.ok(&["simulate"]);
    run.ok(&["prepare"]);
    let out = run.exec(&["evaluate"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("model.caem"), "{}", stderr(&out));
}

#[test]
fn changed_upstream_artifact_is_stale() {
    let run = Run::new();
    run.ok(&["simulate"]);
    run.ok(&["prepare"]);
    let log = run.out().join("interactions.tsv");
    let mut text = fs::read_to_string(&log).unwrap();
    text.push('\n');
    fs::write(&log, text).unwrap();
    let out = run.exec(&["train"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("stale"), "{}", stderr(&out));

    let out = run.exec(&["prepare"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("interactions.tsv"));

    run.ok(&["simulate"]);
    run.ok(&["prepare"]);
    fs::write(run.out().join("train.engt"), b"ENGT1").unwrap();
    assert_eq!(run.exec(&["train"]).status.code(), Some(3));
}

#[test]
fn edited_model_is_rejected() {
    let run = Run::new();
    run.ok(&["simulate"]);
    run.ok(&["prepare"]);
    run.ok(&["train"]);
    let model = run.out().join("model.caem");
    let mut bytes = fs::read(&model).unwrap();
    bytes[0] = b'Z';
    fs::write(&model, bytes).unwrap();
    assert_eq!(run.exec(&["evaluate"]).status.code(), Some(3));
}

#[test]
fn sweep_selects_one_point() {
    let run = Run::new();
    run.ok(&["simulate"]);
    run.ok(&["prepare"]);
    run.ok(&["sweep"]);
    let table = run.read("sweep.tsv");
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    let selected = rows.iter().filter(|r| r.ends_with("\t1")).count();
    assert_eq!(selected, 1);
    assert!(rows[0].starts_with("5\t") && rows[1].starts_with("10\t"));
}

#[test]
fn optimize_writes_full_slates() {
    let run = Run::new();
    run.ok(&["simulate"]);
    run.ok(&["prepare"]);
    run.ok(&["train"]);
    run.ok(&["optimize", "--model", "net", "--n", "5"]);
    let text = run.read("slates_choice_net.tsv");
    let users = run.read("users.tsv").lines().count() - 1;
    let mut rows = 0;
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.starts_with("user_id")) {
        let cols: Vec<&str> = line.split('\t').collect();
        assert_eq!(cols[1], "greedy");
        assert_eq!(cols[2].split(',').count(), 5, "{line}");
        let uplift: f64 = cols[3].parse().unwrap();
        assert!((0.0..=5.0).contains(&uplift));
        rows += 1;
    }
    assert_eq!(rows, users);
    assert!(text.lines().last().unwrap().starts_with("#mean_uplift\t"));

    run.ok(&["optimize", "--model", "logit", "--method", "top-n", "--n", "2"]);
    assert!(run.read("slates_binary_logit.tsv").contains("\ttop_n\t"));
}

#[test]
fn worker_count_does_not_change_outputs() {
    let runs = [Run::new(), Run::new()];
    for (run, workers) in runs.iter().zip(["1", "4"]) {
        for stage in [&["simulate"][..], &["prepare"], &["train"], &["evaluate"]] {
            let mut args = stage.to_vec();
            args.extend(["--workers", workers]);
            run.ok(&args);
        }
    }
    for name in ["model.caem", "logit.blgt", "report.csv", "uplift.tsv", "test.engt"] {
        assert_eq!(
            fs::read(runs[0].out().join(name)).unwrap(),
            fs::read(runs[1].out().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn seed_flag_changes_simulation() {
    let run = Run::new();
    run.ok(&["simulate"]);
    let a = run.read("interactions.tsv");
    run.ok(&["simulate", "--seed", "4"]);
    assert_ne!(a, run.read("interactions.tsv"));
}
