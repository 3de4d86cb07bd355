use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cloze::corpus::{parse_cloze_csv, ClozeInstance};
use cloze::features::FeatureConfig;
use cloze::harness::AblationReport;

const NOUNS: [&str; 12] = [
    "dog", "cat", "car", "house", "garden", "friend", "phone", "book", "ball", "cake", "door", "boat",
];

fn cloze(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cloze")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = cloze(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// ROC stories and a GloVe table covering their vocabulary.
fn fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let mut roc = String::from("storyid,storytitle,sentence1,sentence2,sentence3,sentence4,sentence5\n");
    for i in 0..24 {
        let n = |k: usize| NOUNS[(i * 7 + k * 5) % NOUNS.len()];
        roc.push_str(&format!(
            "s{i:02},Title {i},Tom had a {}.,The {} was red.,He saw the {}.,Then the {} left.,\"Finally, the {} came back.\"\n",
            n(0),
            n(1),
            n(2),
            n(3),
            n(4)
        ));
    }
    let roc_path = dir.join("roc.csv");
    fs::write(&roc_path, roc).unwrap();

    let mut words: Vec<String> = NOUNS.iter().map(|w| w.to_string()).collect();
    words.extend(
        ["tom", "had", "a", "the", "was", "red", "he", "saw", "then", "left", "finally", "came", "back", ".", ","]
            .map(String::from),
    );
    let mut glove = String::new();
    for (i, w) in words.iter().enumerate() {
        let v: Vec<String> = (0..6).map(|j| format!("{:.3}", ((i * 31 + j * 17) % 23) as f64 / 11.5 - 1.0)).collect();
        glove.push_str(&format!("{w} {}\n", v.join(" ")));
    }
    let glove_path = dir.join("vectors.txt");
    fs::write(&glove_path, glove).unwrap();
    (roc_path, glove_path)
}

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (roc, glove) = fixture(d);
    let data = d.join("data.csv");
    for strategy in ["random", "shared", "coherent"] {
        let out = d.join(format!("{strategy}.csv"));
        ok(&["gen-data", "--roc", s(&roc), "--strategy", strategy, "--k", "3", "--pool", "6", "--seed", "4", "--out", s(&out)]);
        let instances = parse_cloze_csv(&out).unwrap();
        assert_eq!(instances.len(), 24 * 3, "{strategy}");
    }
    fs::copy(d.join("random.csv"), &data).unwrap();

    let features = d.join("features.csv");
    ok(&["extract", "--data", s(&data), "--embeddings", s(&glove), "--format", "glove-txt", "--config", "all", "--out", s(&features)]);
    let header = fs::read_to_string(&features).unwrap();
    assert!(header.starts_with("story.centroid.0,"));

    let model = d.join("linear.txt");
    let stdout = ok(&[
        "train-linear", "--features", s(&features), "--cv-folds", "3", "--c-grid", "0.1,1,10", "--seed", "1",
        "--augment-swap", "--model-out", s(&model),
    ]);
    assert!(stdout.contains("config all"), "{stdout}");

    let stdout = ok(&["eval", "--model", s(&model), "--data", s(&data), "--embeddings", s(&glove)]);
    let acc: f64 = stdout.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!((0.0..=1.0).contains(&acc), "{stdout}");

    let lstm = d.join("lstm.txt");
    let report = d.join("grid.csv");
    let stdout = ok(&[
        "train-lstm", "--dev", s(&data), "--embeddings", s(&glove), "--variant", "att", "--hidden", "4,6", "--batch", "16",
        "--epochs", "2", "--restarts", "2", "--seed", "3", "--model-out", s(&lstm), "--report", s(&report),
    ]);
    assert!(stdout.starts_with("best hidden"), "{stdout}");
    let grid = fs::read_to_string(&report).unwrap();
    assert_eq!(grid.lines().count(), 1 + 2 * 2);
    assert!(grid.starts_with("hidden,batch,restart,best_epoch,dev_accuracy"));
    ok(&["eval", "--model", s(&lstm), "--data", s(&data), "--embeddings", s(&glove)]);

    let kept = d.join("kept.csv");
    let stdout = ok(&[
        "filter", "--data", s(&data), "--models", &format!("{},{}", s(&model), s(&lstm)), "--embeddings", s(&glove),
        "--out", s(&kept),
    ]);
    assert!(stdout.starts_with("kept "), "{stdout}");
    let all = parse_cloze_csv(&data).unwrap();
    let filtered: Vec<ClozeInstance> = parse_cloze_csv(&kept).unwrap_or_default();
    assert!(filtered.len() <= all.len());
    assert!(filtered.iter().all(|x| all.contains(x)));

    let test = d.join("shared.csv");
    let ablation = d.join("ablation.csv");
    ok(&[
        "ablate", "--dev", s(&data), "--test", s(&test), "--embeddings", &format!("toy=glove-txt:{}", s(&glove)),
        "--configs", "all,sims-only", "--cv-folds", "3", "--c-grid", "1", "--out", s(&ablation),
    ]);
    let report = AblationReport::read_csv(fs::File::open(&ablation).unwrap()).unwrap();
    assert_eq!(report.rows.len(), 1);
    let row = &report.rows[0];
    assert_eq!(row.embedding, "toy");
    let all_acc = row.get(FeatureConfig::All).unwrap();
    assert!((0.0..=1.0).contains(&all_acc));
    assert!(row.get(FeatureConfig::SimsOnly).is_some());
    assert!(row.get(FeatureConfig::EndingsOnly).is_none());
}

#[test]
fn errors_exit_nonzero_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let out = cloze(&["gen-data", "--roc", s(&missing), "--strategy", "random", "--out", s(&dir.path().join("o.csv"))]);
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.trim_end().lines().count(), 1, "{stderr}");
    assert!(stderr.starts_with("error: "), "{stderr}");

    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "a 1 2\nb 3\n").unwrap();
    let out = cloze(&["eval", "--model", s(&bad), "--data", s(&missing), "--embeddings", s(&bad), "--format", "glove-txt"]);
    assert!(!out.status.success());
    assert_eq!(String::from_utf8(out.stderr).unwrap().trim_end().lines().count(), 1);
}
