use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mvcca::cca::{save_model, ANSWER_VIEW, QUESTION_VIEW};
use mvcca::dataio::{read_feature_matrix, write_candidates, write_feature_matrix, CandidateRecord};
use mvcca::ranking::{RankResult, RetrievalResult};
use mvcca::{CcaConfig, CcaModel, Matrix, ViewSpec};

fn mvcca(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvcca"))
        .args(args)
        .env_remove("MVCCA_THREADS")
        .env_remove("RUST_LOG")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = mvcca(args);
    assert!(
        out.status.success(),
        "mvcca {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn identity_model(dir: &Path, dim: usize) -> PathBuf {
    let m = CcaModel::from_parts(
        vec![
            ViewSpec::new(ANSWER_VIEW, dim),
            ViewSpec::new(QUESTION_VIEW, dim),
        ],
        vec![Matrix::identity(dim), Matrix::identity(dim)],
        vec![1.0; dim],
        vec![vec![0.0; dim]; 2],
        vec![vec![0.0; dim]; 2],
        CcaConfig::new(dim, 1.0),
        2,
    )
    .unwrap();
    let path = dir.join("identity.mvcm");
    save_model(&m, &path).unwrap();
    path
}

fn synth_dir(dir: &Path, extra: &[&str]) -> PathBuf {
    let out = dir.join("data");
    let mut args = vec!["synth", "--out", s(&out)];
    args.extend_from_slice(extra);
    ok(&args);
    out
}

#[test]
fn demo_synth_output_fits() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_dir(dir.path(), &[]);
    let q = read_feature_matrix(data.join("train_questions.vdf")).unwrap();
    assert_eq!(q.shape(), (5000, 16));
    let model = dir.path().join("m.mvcm");
    let summary = ok(&[
        "fit",
        "--answers",
        s(&data.join("train_answers.vdf")),
        "--questions",
        s(&data.join("train_questions.vdf")),
        "--model",
        s(&model),
        "--p",
        "4",
    ]);
    assert!(summary.contains("views answer:16 question:16"), "{summary}");
    assert!(summary.contains("parameters 128"));
    assert_eq!(summary.lines().count(), 1);
    assert!(model.is_file());
}

#[test]
fn oversized_p_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let x = Matrix::from_vec(10, 300, (0..3000).map(|i| (i % 17) as f64).collect()).unwrap();
    let (a, q) = (dir.path().join("a.vdf"), dir.path().join("q.vdf"));
    write_feature_matrix(&a, &x).unwrap();
    write_feature_matrix(&q, &x).unwrap();
    let model = dir.path().join("m.mvcm");
    let out = mvcca(&[
        "fit",
        "--answers",
        s(&a),
        "--questions",
        s(&q),
        "--model",
        s(&model),
        "--p",
        "400",
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains("invalid configuration"));
    assert!(!model.exists());
}

#[test]
fn missing_input_is_reported_before_work() {
    let dir = tempfile::tempdir().unwrap();
    let out = mvcca(&[
        "fit",
        "--answers",
        "/nonexistent/a.vdf",
        "--questions",
        "/nonexistent/q.vdf",
        "--model",
        s(&dir.path().join("m")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--answers"));
}

#[test]
fn refit_gives_identical_model_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_dir(dir.path(), &["--samples", "800", "--test-samples", "200"]);
    let fit = |name: &str| {
        let model = dir.path().join(name);
        ok(&[
            "fit",
            "--answers",
            s(&data.join("train_answers.vdf")),
            "--questions",
            s(&data.join("train_questions.vdf")),
            "--model",
            s(&model),
            "--p",
            "8",
            "--epsilon",
            "0.01",
        ]);
        fs::read(model).unwrap()
    };
    assert_eq!(fit("a.mvcm"), fit("b.mvcm"));
}

#[test]
fn duplicate_ground_truth_ranks_first() {
    let dir = tempfile::tempdir().unwrap();
    let model = identity_model(dir.path(), 3);
    // question t sees its duplicate plus three strictly worse answers
    let mut qs = Vec::new();
    let mut ans = Vec::new();
    let mut recs = Vec::new();
    for t in 0..20usize {
        let v = [1.0 + t as f64, (t % 3) as f64, -(t as f64) / 4.0];
        qs.push(v.to_vec());
        let base = ans.len();
        ans.push(v.to_vec());
        ans.push(vec![-v[0], v[1], v[2]]);
        ans.push(vec![v[1], -v[0], 1.0]);
        ans.push(vec![0.0, 0.0, -1.0]);
        let gt = t % 4;
        let mut rows = vec![base + 1, base + 2, base + 3];
        rows.insert(gt, base);
        recs.push(CandidateRecord {
            question_id: t as u64,
            question_row: t,
            candidate_rows: rows,
            gt_index: gt,
            relevance: None,
        });
    }
    let (qp, ap, cp) = (
        dir.path().join("q.vdf"),
        dir.path().join("a.vdf"),
        dir.path().join("c.jsonl"),
    );
    write_feature_matrix(&qp, &Matrix::from_rows(&qs)).unwrap();
    write_feature_matrix(&ap, &Matrix::from_rows(&ans)).unwrap();
    write_candidates(&cp, &recs).unwrap();
    let report = dir.path().join("r.json");
    ok(&[
        "evaluate",
        "--model",
        s(&model),
        "--questions",
        s(&qp),
        "--answers",
        s(&ap),
        "--candidates",
        s(&cp),
        "--out",
        s(&report),
    ]);
    let v: serde_json::Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    assert_eq!(v["mr"], 1.0);
    assert_eq!(v["mrr"], 1.0);
    assert_eq!(v["recall_at"]["1"], 1.0);
    assert_eq!(v["question_count"], 20);

    let out = mvcca(&[
        "evaluate",
        "--model",
        s(&model),
        "--questions",
        s(&qp),
        "--answers",
        s(&ap),
        "--candidates",
        s(&cp),
        "--ndcg",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("relevance"));
}

#[test]
fn rank_matches_hand_scored_order() {
    let dir = tempfile::tempdir().unwrap();
    let model = identity_model(dir.path(), 2);
    let (qp, ap, cp) = (
        dir.path().join("q.vdf"),
        dir.path().join("a.vdf"),
        dir.path().join("c.jsonl"),
    );
    write_feature_matrix(&qp, &Matrix::from_rows(&[[1.0, 0.0]])).unwrap();
    write_feature_matrix(
        &ap,
        &Matrix::from_rows(&[[0.0, 1.0], [1.0, 1.0], [-1.0, 0.0], [2.0, 0.5]]),
    )
    .unwrap();
    write_candidates(
        &cp,
        &[CandidateRecord {
            question_id: 42,
            question_row: 0,
            candidate_rows: vec![0, 1, 2, 3],
            gt_index: 1,
            relevance: None,
        }],
    )
    .unwrap();
    let stdout = ok(&[
        "rank",
        "--model",
        s(&model),
        "--questions",
        s(&qp),
        "--answers",
        s(&ap),
        "--candidates",
        s(&cp),
    ]);
    let r: RankResult = serde_json::from_str(stdout.trim()).unwrap();
    // cosines with (1, 0): 0, 1/√2, −1, 2/√4.25
    assert_eq!(r.question_id, 42);
    assert_eq!(r.ranked, vec![3, 1, 0, 2]);
    assert_eq!(r.gt_rank, 2);
    let want = [2.0 / 4.25f64.sqrt(), 0.5f64.sqrt(), 0.0, -1.0];
    for (g, w) in r.scores.iter().zip(want) {
        assert!((g - w).abs() <= 1e-12);
    }
}

#[test]
fn nn_retrieve_clamps_oversized_k() {
    let dir = tempfile::tempdir().unwrap();
    let model = identity_model(dir.path(), 2);
    let (qp, bq, ba) = (
        dir.path().join("q.vdf"),
        dir.path().join("bq.vdf"),
        dir.path().join("ba.vdf"),
    );
    write_feature_matrix(&qp, &Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]])).unwrap();
    write_feature_matrix(
        &bq,
        &Matrix::from_rows(&[[1.0, 0.1], [0.1, 1.0], [-1.0, 0.0]]),
    )
    .unwrap();
    write_feature_matrix(
        &ba,
        &Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]]),
    )
    .unwrap();
    let out = mvcca(&[
        "nn-retrieve",
        "--model",
        s(&model),
        "--questions",
        s(&qp),
        "--bank-questions",
        s(&bq),
        "--bank-answers",
        s(&ba),
        "--k",
        "50",
        "--top",
        "10",
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds the bank size 3"));
    let results: Vec<RetrievalResult> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(results.len(), 2);
    assert_eq!(results[0].answers.len(), 3);
    assert_eq!(results[0].answers[0].row, 0);
    assert_eq!(results[1].answers[0].row, 1);
}

#[test]
fn nn_baseline_raw_and_embedded() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_dir(
        dir.path(),
        &[
            "--samples",
            "1000",
            "--test-samples",
            "200",
            "--candidate-count",
            "20",
        ],
    );
    let model = dir.path().join("m.mvcm");
    ok(&[
        "fit",
        "--answers",
        s(&data.join("train_answers.vdf")),
        "--questions",
        s(&data.join("train_questions.vdf")),
        "--model",
        s(&model),
        "--p",
        "4",
    ]);
    let path = |name: &str| data.join(name).to_str().unwrap().to_owned();
    let files = [
        ("--questions", path("test_questions.vdf")),
        ("--answers", path("test_answers.vdf")),
        ("--candidates", path("candidates.jsonl")),
        ("--bank-questions", path("train_questions.vdf")),
        ("--bank-answers", path("train_answers.vdf")),
        ("--k", "20".to_owned()),
    ];
    let common: Vec<&str> = files.iter().flat_map(|(f, v)| [*f, v.as_str()]).collect();
    let ranks = dir.path().join("ranks.jsonl");
    let mut raw = vec!["nn-baseline"];
    raw.extend_from_slice(&common);
    raw.extend_from_slice(&["--out", s(&ranks)]);
    let table = ok(&raw);
    assert!(table.starts_with("      MR"));
    assert_eq!(fs::read_to_string(&ranks).unwrap().lines().count(), 200);

    let mut emb = vec!["nn-baseline", "--model", s(&model)];
    emb.extend_from_slice(&common);
    let lines = ok(&emb);
    let first: RankResult = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
    assert_eq!(first.ranked.len(), 20);
}

#[test]
fn three_view_synth_fits_a_qi() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_dir(
        dir.path(),
        &[
            "--samples",
            "500",
            "--test-samples",
            "0",
            "--image-dim",
            "12",
            "--candidate-count",
            "10",
        ],
    );
    assert!(data.join("train_images.vdf").is_file());
    assert!(!data.join("test_questions.vdf").exists());
    let summary = ok(&[
        "fit",
        "--answers",
        s(&data.join("train_answers.vdf")),
        "--questions",
        s(&data.join("train_questions.vdf")),
        "--images",
        s(&data.join("train_images.vdf")),
        "--model",
        s(&dir.path().join("m.mvcm")),
        "--p",
        "6",
    ]);
    assert!(summary.contains("image:12"));
    assert!(summary.contains("parameters 264"));
}

#[test]
fn featurize_respects_pooling() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.txt");
    let text = dir.path().join("s.txt");
    fs::write(&table, "baby 1 0\nold 0 2\n").unwrap();
    fs::write(&text, "How old is the baby?\n\nnothing known\n").unwrap();
    let mean = dir.path().join("mean.vdf");
    let fixed = dir.path().join("fixed.vdf");
    ok(&[
        "featurize",
        "--table",
        s(&table),
        "--text",
        s(&text),
        "--out",
        s(&mean),
    ]);
    ok(&[
        "featurize",
        "--table",
        s(&table),
        "--text",
        s(&text),
        "--out",
        s(&fixed),
        "--pooling",
        "fixed-16",
    ]);
    let m = read_feature_matrix(&mean).unwrap();
    let f = read_feature_matrix(&fixed).unwrap();
    assert_eq!(m.shape(), (3, 2));
    assert_eq!(m.row(0), &[0.5, 1.0]);
    assert_eq!(f.row(0), &[1.0 / 16.0, 2.0 / 16.0]);
    assert_eq!(m.row(1), &[0.0, 0.0]);
    assert_eq!(m.row(2), &[0.0, 0.0]);
}

#[test]
fn zero_threads_is_rejected() {
    let out = mvcca(&["--threads", "0", "synth", "--out", "/tmp/unused-mvcca"]);
    assert!(!out.status.success());
}
