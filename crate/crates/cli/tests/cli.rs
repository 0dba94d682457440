use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hydra_core::curation::{read_manifest, write_ppm, Frame};
use hydra_core::eval::{synthetic_records, write_metrics, ReportTable};
use hydra_core::train::{pretrained_stand_in, Checkpoint, RunConfig, TrainState};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hydratune")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_source(root: &Path, name: &str, frames: &[Frame]) {
    let dir = root.join(name);
    fs::create_dir_all(&dir).unwrap();
    for (i, f) in frames.iter().enumerate() {
        write_ppm(&dir.join(format!("frame_{i:06}.ppm")), f).unwrap();
    }
    fs::write(dir.join("meta"), "fps=10\n").unwrap();
}

fn corpus(root: &Path) -> PathBuf {
    let input = root.join("sources");
    let flicker: Vec<Frame> = (0..50)
        .map(|i| Frame::solid(6, 6, if i % 2 == 0 { [10; 3] } else { [240; 3] }))
        .collect();
    write_source(&input, "busy", &flicker);
    write_source(&input, "calm", &vec![Frame::solid(6, 6, [90, 100, 110]); 40]);
    input
}

#[test]
fn curate_keeps_only_the_moving_clip() {
    let tmp = tempfile::tempdir().unwrap();
    let input = corpus(tmp.path());
    let manifest = tmp.path().join("m.jsonl");
    let out = run(&["curate", p(&input), "--out", p(&manifest)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("selected 1 of 2 clips"), "{}", stdout(&out));
    let recs = read_manifest(&manifest).unwrap();
    let kept: Vec<_> = recs.iter().filter(|r| r.selected).map(|r| r.clip_id.as_str()).collect();
    assert_eq!(kept, ["busy/0000"]);

    let out = run(&["curate", p(&input), "--out", p(&manifest), "--theta", "0"]);
    assert_eq!(code(&out), 0);
    assert!(read_manifest(&manifest).unwrap().iter().all(|r| r.selected));
}

#[test]
fn curate_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["curate", p(tmp.path()), "--out", p(&tmp.path().join("m"))]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("no sources found"));

    let input = corpus(tmp.path());
    let out = run(&["curate", p(&input), "--out", p(&tmp.path().join("m")), "--motion-scorer", "raft"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("unknown scorer 'raft'"));
}

fn tree_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|path| (path.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&path).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn train_writes_log_and_reproducible_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let out = run(&["train", "--out", p(&a), "--seed", "3"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(code(&run(&["train", "--out", p(&b), "--seed", "3"])), 0);

    let log = fs::read_to_string(a.join("train_log.jsonl")).unwrap();
    // 256 samples in batches of 16 for 2 epochs.
    assert_eq!(log.lines().count(), 32);
    let text = stdout(&out);
    let final_line = text.lines().find(|l| l.starts_with("final loss ")).unwrap();
    let loss: f64 = final_line["final loss ".len()..].parse().unwrap();
    assert!(loss.is_finite());
    assert_eq!(final_line.split('.').nth(1).unwrap().len(), 6);

    assert_eq!(tree_bytes(&a.join("checkpoint")), tree_bytes(&b.join("checkpoint")));
    assert_eq!(fs::read(a.join("train_log.jsonl")).unwrap(), fs::read(b.join("train_log.jsonl")).unwrap());
}

#[test]
fn zero_epochs_saves_initial_adapters() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["train", "--out", p(tmp.path()), "--epochs", "0"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let saved = Checkpoint::load(&tmp.path().join("checkpoint")).unwrap();
    let mut cfg = RunConfig::default();
    cfg.train.epochs = 0;
    let base = pretrained_stand_in(cfg.model.clone(), cfg.train.seed).unwrap();
    let init = TrainState::new(&base, &cfg.train).unwrap().checkpoint(&cfg);
    assert_eq!(saved.adapters, init.adapters);
    assert_eq!(fs::read_to_string(tmp.path().join("train_log.jsonl")).unwrap(), "");
}

#[test]
fn bad_config_key_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "epochs = 1\nlearnig_rate = 0.1\n").unwrap();
    let out = run(&["train", "--config", p(&cfg), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("learnig_rate"), "{}", stderr(&out));
    assert_eq!(code(&run(&["train", "--out", "x", "--bogus"])), 1);
}

#[test]
fn gradcheck_exit_codes() {
    let ok = run(&["gradcheck"]);
    assert_eq!(code(&ok), 0, "{}", stdout(&ok));
    assert!(stdout(&ok).contains("network.gate"));
    let faulty = run(&["gradcheck", "--inject-fault"]);
    assert_eq!(code(&faulty), 2);
    assert!(stderr(&faulty).contains("worst parameter A"), "{}", stderr(&faulty));
    assert_eq!(code(&run(&["gradcheck", "--sizes", "4,4,2,3,0"])), 1);
}

#[test]
fn ablate_rows_and_repeatability() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let out = run(&["ablate", "--n", "2,4,8,12", "--out", p(&a)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(code(&run(&["ablate", "--n", "2,4,8,12", "--out", p(&b)])), 0);
    let csv = fs::read(a.join("ablation.csv")).unwrap();
    assert_eq!(csv, fs::read(b.join("ablation.csv")).unwrap());
    let table = ReportTable::from_csv(std::str::from_utf8(&csv).unwrap()).unwrap();
    let labels: Vec<_> = table.rows().iter().map(|r| r.label.as_str()).collect();
    assert_eq!(labels, ["N=2", "N=4", "N=8", "N=12"]);
    assert_eq!(fs::read_to_string(a.join("ablation.txt")).unwrap(), stdout(&out));

    let single = tmp.path().join("s");
    assert_eq!(code(&run(&["ablate", "--n", "1", "--out", p(&single)])), 0);
    let text = fs::read_to_string(single.join("ablation.csv")).unwrap();
    assert_eq!(ReportTable::from_csv(&text).unwrap().rows().len(), 1);
}

const METHOD_ROWS: [(&str, [f64; 4]); 5] = [
    ("HunyuanVideo(Base)", [2.823, 2.522, 2.858, 2.713]),
    ("LTXVideo", [2.591, 1.988, 2.866, 2.597]),
    ("Wan2.1", [2.847, 2.673, 2.714, 2.891]),
    ("HunyuanVideo(LoRA)", [2.834, 2.772, 2.707, 2.751]),
    ("PTTA(ours)", [2.895, 2.659, 2.933, 3.078]),
];

#[test]
fn report_matches_golden_and_roundtrips() {
    let tmp = tempfile::tempdir().unwrap();
    let metrics = tmp.path().join("metrics.jsonl");
    write_metrics(&metrics, &synthetic_records(&METHOD_ROWS, 20, 10)).unwrap();
    let out = run(&["report", p(&metrics)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let golden = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden/method_table.txt")).unwrap();
    assert_eq!(stdout(&out), golden);

    let out = run(&["report", p(&metrics), "--format", "csv"]);
    assert_eq!(code(&out), 0);
    let table = ReportTable::from_csv(&stdout(&out)).unwrap();
    let again = run(&["report", p(&metrics), "--format", "csv"]);
    assert_eq!(stdout(&again), stdout(&out));
    assert_eq!(table.best_labels(1), ["HunyuanVideo(LoRA)"]);
}

#[test]
fn report_input_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    assert_eq!(code(&run(&["report", p(&empty)])), 1);

    let bad = tmp.path().join("bad.jsonl");
    let good = r#"{"method":"m","prompt_id":0,"sample_id":0,"vsvq":1,"vstc":1,"vsdd":1,"vstva":1}"#;
    fs::write(&bad, format!("{good}\n{good}\nnot json\n")).unwrap();
    let out = run(&["report", p(&bad)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
    assert_eq!(code(&run(&["report", p(&bad), "--format", "xml"])), 1);
}
