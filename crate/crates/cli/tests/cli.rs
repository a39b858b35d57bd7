use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qsgauc_core::{
    auc, parse_libsvm_str, solve_kernel_closed_form, CoefficientHistory, SplitManifest,
};

fn qsgauc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsgauc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = qsgauc(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Runs a failing command and returns the error code from its one-line report.
fn fails(args: &[&str]) -> (String, String) {
    let out = qsgauc(args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    let stderr = String::from_utf8(out.stderr).unwrap();
    let line = stderr.lines().last().unwrap_or_default().to_string();
    let code = line
        .strip_prefix("error[")
        .and_then(|rest| rest.split(']').next())
        .unwrap_or_default()
        .to_string();
    (code, line)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Synth {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Synth {
    fn new(extra: &[&str]) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let mut args = vec!["synth", "--out-dir", s(&root)];
        args.extend_from_slice(extra);
        ok(&args);
        Synth { _dir: dir, root }
    }

    fn data(&self) -> PathBuf {
        self.root.join("data.svm")
    }

    fn split(&self) -> PathBuf {
        self.root.join("split.txt")
    }

    fn train(&self, out: &Path, extra: &[&str]) -> String {
        let (data, split) = (self.data(), self.split());
        let mut args = vec![
            "train",
            "--data",
            s(&data),
            "--split",
            s(&split),
            "--out-dir",
            s(out),
        ];
        args.extend_from_slice(extra);
        ok(&args)
    }
}

fn summary_value(summary: &str, key: &str) -> f64 {
    summary
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.trim().parse().ok()))
        .unwrap_or_else(|| panic!("`{key}` missing from {summary}"))
}

#[test]
fn zero_iterations_give_an_empty_model_that_predicts_zero() {
    let syn = Synth::new(&["--n-test", "20"]);
    let out = syn.root.join("run");
    syn.train(&out, &["--iterations", "0"]);
    let model =
        CoefficientHistory::load(fs::read(out.join("model.txt")).unwrap().as_slice()).unwrap();
    assert!(model.is_empty());

    let scores = syn.root.join("scores.tsv");
    ok(&[
        "predict",
        "--model",
        s(&out.join("model.txt")),
        "--input",
        s(&syn.data()),
        "--out",
        s(&scores),
    ]);
    let text = fs::read_to_string(&scores).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("score"));
    assert!(lines.all(|l| l.parse::<f64>().unwrap() == 0.0));
}

#[test]
fn predictions_match_the_library_and_follow_row_order() {
    let syn = Synth::new(&["--n-test", "30", "--n-unlabeled", "40"]);
    let out = syn.root.join("run");
    syn.train(&out, &["--iterations", "50", "--features", "8"]);
    let model_path = out.join("model.txt");
    let model = CoefficientHistory::load(fs::read(&model_path).unwrap().as_slice()).unwrap();

    let text = fs::read_to_string(syn.data()).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    let reversed: Vec<&str> = rows.iter().rev().copied().collect();
    let rev_path = syn.root.join("reversed.svm");
    fs::write(&rev_path, reversed.join("\n") + "\n").unwrap();

    let read_scores = |input: &Path, name: &str| -> Vec<f64> {
        let path = syn.root.join(name);
        ok(&[
            "predict",
            "--model",
            s(&model_path),
            "--input",
            s(input),
            "--out",
            s(&path),
        ]);
        fs::read_to_string(&path)
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.parse().unwrap())
            .collect()
    };
    let forward = read_scores(&syn.data(), "forward.tsv");
    let backward = read_scores(&rev_path, "backward.tsv");

    let parsed = parse_libsvm_str(&text).unwrap();
    let expected = model.predict_batch(&parsed.dense_rows()).unwrap();
    assert_eq!(forward.len(), rows.len());
    for (a, b) in forward.iter().zip(&expected) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    let mut flipped = backward.clone();
    flipped.reverse();
    assert_eq!(forward, flipped);
}

#[test]
fn empty_input_gives_a_header_only_scores_file() {
    let syn = Synth::new(&["--n-test", "10"]);
    let out = syn.root.join("run");
    syn.train(&out, &["--iterations", "5"]);
    let empty = syn.root.join("empty.svm");
    fs::write(&empty, "").unwrap();
    let scores = syn.root.join("scores.tsv");
    ok(&[
        "predict",
        "--model",
        s(&out.join("model.txt")),
        "--input",
        s(&empty),
        "--out",
        s(&scores),
    ]);
    assert_eq!(fs::read_to_string(&scores).unwrap(), "score\n");
}

#[test]
fn wide_input_names_both_dimensions() {
    let syn = Synth::new(&["--n-test", "10"]);
    let out = syn.root.join("run");
    syn.train(&out, &["--iterations", "5"]);
    let wide = syn.root.join("wide.svm");
    fs::write(&wide, "+1 1:0.5 7:1\n").unwrap();
    let scores = syn.root.join("scores.tsv");
    let (code, line) = fails(&[
        "predict",
        "--model",
        s(&out.join("model.txt")),
        "--input",
        s(&wide),
        "--out",
        s(&scores),
    ]);
    assert_eq!(code, "E_DIM");
    assert!(line.contains('7') && line.contains('2'), "{line}");
    assert!(!scores.exists());
}

#[test]
fn invalid_configuration_writes_nothing() {
    let syn = Synth::new(&["--n-test", "10"]);
    let out = syn.root.join("never");
    let (data, split) = (syn.data(), syn.split());
    let base = [
        "train",
        "--data",
        s(&data),
        "--split",
        s(&split),
        "--out-dir",
        s(&out),
    ];

    let mut bad_gamma = base.to_vec();
    bad_gamma.extend(["--gamma", "1.5"]);
    assert_eq!(fails(&bad_gamma).0, "E_PARAM");

    let mut bad_schedule = base.to_vec();
    bad_schedule.extend(["--theta", "0.5"]);
    assert_eq!(fails(&bad_schedule).0, "E_SCHEDULE");

    let config = syn.root.join("typo.toml");
    fs::write(&config, "lamda = 2\n").unwrap();
    let mut typo = base.to_vec();
    typo.extend(["--config", s(&config)]);
    let (code, line) = fails(&typo);
    assert_eq!(code, "E_CONFIG");
    assert!(line.contains("lamda"));

    assert_eq!(fails(&["train", "--out-dir", s(&out)]).0, "E_CONFIG");
    assert!(!out.exists());
}

#[test]
fn resolved_config_reproduces_the_run() {
    let syn = Synth::new(&["--n-test", "20", "--seed", "5"]);
    let first = syn.root.join("first");
    syn.train(
        &first,
        &[
            "--iterations",
            "40",
            "--features",
            "8",
            "--gamma",
            "0.3",
            "--seed",
            "9",
        ],
    );
    let second = syn.root.join("second");
    ok(&[
        "train",
        "--config",
        s(&first.join("config.toml")),
        "--out-dir",
        s(&second),
    ]);
    assert_eq!(
        fs::read(first.join("model.txt")).unwrap(),
        fs::read(second.join("model.txt")).unwrap()
    );
    let cfg = fs::read_to_string(second.join("config.toml")).unwrap();
    assert!(
        cfg.contains("gamma = 0.3") && cfg.contains("seed = 9"),
        "{cfg}"
    );
}

#[test]
fn trained_auc_tracks_the_closed_form_on_the_same_split() {
    let syn = Synth::new(&["--seed", "2"]);
    let out = syn.root.join("run");
    let summary = syn.train(&out, &["--iterations", "3000", "--features", "128"]);
    let got = summary_value(&summary, "test_auc");

    let table = parse_libsvm_str(&fs::read_to_string(syn.data()).unwrap()).unwrap();
    let manifest = SplitManifest::read(fs::read(syn.split()).unwrap().as_slice()).unwrap();
    let (ds, test) = manifest.apply(&table, "synth").unwrap();
    let exact = solve_kernel_closed_form(&ds, 0.5, 1.0, 1.0).unwrap();
    let reference = auc(&exact.predict_batch(&test.points).unwrap(), &test.labels).unwrap();
    assert!(
        got >= reference - 0.02,
        "trained {got} vs closed form {reference}"
    );
}

#[test]
fn split_partitions_rows_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let input = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/breast_cancer.svm");
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(&[
            "split",
            "--input",
            s(&input),
            "--out-dir",
            s(&out),
            "--seed",
            "4",
        ]);
        out
    };
    let (a, b) = (run("a"), run("b"));
    for file in ["data.svm", "split.txt", "minmax.txt"] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
    let m = SplitManifest::read(fs::read(a.join("split.txt")).unwrap().as_slice()).unwrap();
    assert_eq!(m.labeled.len(), 200);
    let mut all: Vec<usize> = m
        .labeled
        .iter()
        .chain(&m.unlabeled)
        .chain(&m.test)
        .copied()
        .collect();
    all.sort_unstable();
    assert_eq!(all, (0..569).collect::<Vec<_>>());

    let normalized = parse_libsvm_str(&fs::read_to_string(a.join("data.svm")).unwrap()).unwrap();
    assert!(normalized
        .rows
        .iter()
        .flat_map(|r| &r.features)
        .all(|(_, v)| (0.0..=1.0).contains(v)));
}

#[test]
fn one_cell_grid_gives_one_row_and_repeats_exactly() {
    let syn = Synth::new(&["--n-test", "10", "--n-unlabeled", "60"]);
    let (data, split) = (syn.data(), syn.split());
    let table = |name: &str| {
        let out = syn.root.join(name);
        ok(&[
            "cv",
            "--data",
            s(&data),
            "--split",
            s(&split),
            "--out-dir",
            s(&out),
            "--lambda-values",
            "1",
            "--sigma-values",
            "0.5",
            "--gamma-values",
            "0.4",
            "--folds",
            "3",
            "--iterations",
            "30",
            "--features",
            "8",
        ]);
        fs::read_to_string(out.join("cv.tsv")).unwrap()
    };
    // The last column is wall time.
    let strip = |t: String| -> Vec<String> {
        t.lines()
            .map(|l| {
                l.rsplit_once('\t')
                    .map(|(head, _)| head.to_string())
                    .unwrap()
            })
            .collect()
    };
    let (a, b) = (strip(table("a")), strip(table("b")));
    assert_eq!(a.len(), 2);
    assert_eq!(a, b);
    let best = fs::read_to_string(syn.root.join("a/best.toml")).unwrap();
    assert!(best.contains("sigma = 0.5"), "{best}");
}

#[test]
fn bench_records_refusals_in_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench");
    ok(&[
        "bench",
        "--out-dir",
        s(&out),
        "--trials",
        "1",
        "--unlabeled-sizes",
        "50,300",
        "--solver-cap",
        "300",
        "--iterations",
        "20",
        "--features",
        "8",
        "--n-test",
        "50",
    ]);
    let text = fs::read_to_string(out.join("bench.tsv")).unwrap();
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip(1)
        .map(|l| l.split('\t').collect())
        .collect();
    assert_eq!(rows.len(), 4);
    let status =
        |n: &str, method: &str| rows.iter().find(|r| r[0] == n && r[3] == method).unwrap()[6];
    assert_eq!(status("50", "exact"), "ok");
    assert_eq!(status("300", "exact"), "refused");
    assert_eq!(status("300", "qsg"), "ok");
}

#[test]
fn diag_refuses_unsafe_schedules_and_reports_integer_prefix() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("diag");
    let (code, line) = fails(&[
        "diag",
        "--out-dir",
        s(&out),
        "--theta",
        "0.5",
        "--lambda",
        "1",
    ]);
    assert_eq!(code, "E_SCHEDULE");
    assert!(line.contains("0.5"), "{line}");
    assert!(!out.exists());

    let stdout = ok(&[
        "diag",
        "--out-dir",
        s(&out),
        "--theta",
        "3",
        "--lambda",
        "1",
        "--horizon",
        "1000",
    ]);
    assert!(stdout.contains("PASS"), "{stdout}");
    let table = fs::read_to_string(out.join("schedule.tsv")).unwrap();
    let row: Vec<&str> = table.lines().nth(1).unwrap().split('\t').collect();
    assert_eq!(&row[9..], ["2", "true", "true"]);
}

#[test]
fn diag_convergence_study_writes_its_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("diag");
    ok(&[
        "diag",
        "--out-dir",
        s(&out),
        "--convergence",
        "--iterations",
        "200",
        "--features",
        "16",
        "--repeats",
        "2",
        "--n-unlabeled",
        "50",
        "--n-probes",
        "5",
        "--fit-start",
        "20",
    ]);
    let table = fs::read_to_string(out.join("convergence.tsv")).unwrap();
    assert!(table.lines().count() > 3, "{table}");
}
