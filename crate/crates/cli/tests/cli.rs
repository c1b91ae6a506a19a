use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn occlufall(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_occlufall"))
        .current_dir(dir)
        .args(args)
        .args(["--runs-dir", "runs"])
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = occlufall(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn manifest_lines(p: &Path) -> usize {
    fs::read_to_string(p).unwrap().lines().count()
}

#[test]
fn synth_extract_train_eval() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--out", "corpus", "--videos", "20", "--seed", "3"]);
    assert_eq!(manifest_lines(&d.join("corpus/manifest.tsv")), 20);
    ok(
        d,
        &["extract", "--corpus", "corpus/manifest.tsv", "--pos-step", "16", "--scales", "16", "--out", "data"],
    );
    for f in ["bank.txt", "splits.tsv", "provenance.tsv", "train.ofm", "test_occluded.meta.tsv"] {
        assert!(d.join("data").join(f).exists(), "{f}");
    }
    let train = ok(d, &["train", "--data", "data", "--features", "8", "--lambda", "0.6", "--out", "model"]);
    assert!(train.contains("rounds,"));
    let eval = ok(d, &["eval", "--data", "data", "--model", "model", "--baseline", "model"]);
    assert!(eval.contains("accuracy") && eval.contains("+0.00 points"));

    // every run directory carries its configuration
    let runs: Vec<_> = fs::read_dir(d.join("runs")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(runs.len(), 4);
    for r in &runs {
        let cfg = fs::read_to_string(r.join("config.txt")).unwrap();
        assert!(cfg.contains("lambda = "));
        assert!(r.join("report.txt").exists());
    }
    let eval_dir = runs.iter().find(|r| r.to_string_lossy().ends_with("-eval")).unwrap();
    let csv = fs::read_to_string(eval_dir.join("metrics.csv")).unwrap();
    assert!(csv.starts_with("slice,samples,tp,fp,tn,fn,accuracy,recall,precision"));
}

#[test]
fn augment_appends_ten_variants_per_video() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--out", "corpus", "--videos", "3"]);
    let out = ok(d, &["augment", "--corpus", "corpus/manifest.tsv", "--mode", "dynamic", "--seed", "4"]);
    assert!(out.contains("added,30"));
    let text = fs::read_to_string(d.join("corpus/manifest.tsv")).unwrap();
    assert_eq!(text.lines().count(), 33);
    assert_eq!(text.lines().filter(|l| l.contains("\tdynamic_occluded\t")).count(), 30);
}

#[test]
fn config_file_overrides_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("exp.cfg"), "# smaller corpus\nsynth_videos = 4\n").unwrap();
    ok(d, &["synth", "--out", "corpus", "--videos", "9", "--config", "exp.cfg"]);
    assert_eq!(manifest_lines(&d.join("corpus/manifest.tsv")), 4);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    // validation errors
    let bad_lambda = occlufall(d, &["train", "--data", "nowhere", "--lambda", "2"]);
    assert_eq!(bad_lambda.status.code(), Some(2));
    fs::write(d.join("typo.cfg"), "lamda = 0.5\n").unwrap();
    let typo = occlufall(d, &["synth", "--out", "c", "--config", "typo.cfg"]);
    assert_eq!(typo.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&typo.stderr).contains("unknown key"));
    let unparsable = occlufall(d, &["synth", "--out", "c", "--videos", "many"]);
    assert_eq!(unparsable.status.code(), Some(2));
    // runtime failure: the data directory does not exist
    let missing = occlufall(d, &["train", "--data", "nowhere"]);
    assert_eq!(missing.status.code(), Some(1));
}
