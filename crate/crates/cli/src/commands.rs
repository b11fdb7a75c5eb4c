use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use mvcca::cca::{load_model, save_model, ANSWER_VIEW, IMAGE_VIEW, QUESTION_VIEW};
use mvcca::dataio::{
    load_embedding_table, read_candidates, read_feature_matrix, sentence_embedding, synth_generate,
    tokenize, write_candidates, write_feature_matrix, CandidateRecord, SynthConfig, MAX_TOKENS,
};
use mvcca::metrics::{ndcg, otsu_statistics, EvalReport, QuestionCorrelations};
use mvcca::ranking::{cosine, rank_scores, EmbeddedBank, NnBaseline, NnSource, RankResult};
use mvcca::{CcaConfig, CcaModel, Matrix, Ridge, ViewSpec};
use rayon::prelude::*;
use serde::Serialize;

use crate::{
    require_file, require_parent, EvaluateArgs, FeaturizeArgs, FitArgs, NnBaselineArgs,
    NnRetrieveArgs, RankArgs, SynthArgs,
};

/// What `fit` reports on stdout.
#[derive(Debug, Clone)]
pub struct FitSummary {
    pub views: Vec<ViewSpec>,
    pub p: usize,
    pub q: f64,
    pub ridge: Ridge,
    pub eigenvalue_head: Vec<f64>,
    pub parameter_count: usize,
    pub seconds: f64,
}

const EIGENVALUE_HEAD: usize = 5;

impl fmt::Display for FitSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let views: Vec<String> = self
            .views
            .iter()
            .map(|v| format!("{}:{}", v.name, v.dim))
            .collect();
        let ridge = match self.ridge {
            Ridge::Absolute(v) => format!("{v}"),
            Ridge::TraceScaled(s) => format!("{s:e}*tr(C_ii)/n_i"),
        };
        let head: Vec<String> = self
            .eigenvalue_head
            .iter()
            .map(|l| format!("{l:.6}"))
            .collect();
        write!(
            f,
            "views {} | p {} | q {} | epsilon {} | eigenvalues {} | parameters {} | fit {:.3}s",
            views.join(" "),
            self.p,
            self.q,
            ridge,
            head.join(" "),
            self.parameter_count,
            self.seconds
        )
    }
}

fn read_features(flag: &str, path: &Path) -> Result<Matrix> {
    read_feature_matrix(path).with_context(|| format!("{flag} `{}`", path.display()))
}

pub fn cmd_fit(args: &FitArgs) -> Result<FitSummary> {
    require_file("--answers", &args.answers)?;
    require_file("--questions", &args.questions)?;
    if let Some(p) = &args.images {
        require_file("--images", p)?;
    }
    require_parent("--model", &args.model)?;

    let mut named = vec![
        (ANSWER_VIEW, read_features("--answers", &args.answers)?),
        (
            QUESTION_VIEW,
            read_features("--questions", &args.questions)?,
        ),
    ];
    if let Some(p) = &args.images {
        named.push((IMAGE_VIEW, read_features("--images", p)?));
    }
    let n = named[0].1.rows();
    for (name, m) in &named[1..] {
        if m.rows() != n {
            bail!(
                "{name} features have {} rows but answer features have {n}",
                m.rows()
            );
        }
    }
    let specs: Vec<ViewSpec> = named
        .iter()
        .map(|(name, m)| ViewSpec::new(*name, m.cols()))
        .collect();
    let ridge = args.epsilon.map_or(Ridge::default(), Ridge::Absolute);
    let config = CcaConfig::new(args.p, args.q).with_ridge(ridge);
    config.validate(&specs)?;

    // feature files hold one sample per row; the fit wants one per column
    let views: Vec<Matrix> = named.iter().map(|(_, m)| m.transpose()).collect();
    info!("fitting {} views on {n} samples", views.len());
    let start = Instant::now();
    let model = CcaModel::fit(&views, &specs, config)?;
    let seconds = start.elapsed().as_secs_f64();
    save_model(&model, &args.model)
        .with_context(|| format!("writing `{}`", args.model.display()))?;

    Ok(FitSummary {
        views: specs,
        p: model.p(),
        q: args.q,
        ridge,
        eigenvalue_head: model
            .eigenvalues()
            .iter()
            .take(EIGENVALUE_HEAD)
            .copied()
            .collect(),
        parameter_count: model.parameter_count(),
        seconds,
    })
}

fn check_records(records: &[CandidateRecord], questions: usize, answers: usize) -> Result<()> {
    if records.is_empty() {
        bail!("candidate file holds no records");
    }
    for r in records {
        if r.question_row >= questions {
            bail!(
                "question {}: question_row {} out of range for {questions} question rows",
                r.question_id,
                r.question_row
            );
        }
        if let Some(&bad) = r.candidate_rows.iter().find(|&&c| c >= answers) {
            bail!(
                "question {}: candidate row {bad} out of range for {answers} answer rows",
                r.question_id
            );
        }
    }
    Ok(())
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()?)
}

/// Centred answer embeddings for every row of the answer file.
fn embed_rows(model: &CcaModel, view: &str, m: &Matrix) -> Result<Vec<Vec<f64>>> {
    let idx = model.view_index(view)?;
    (0..m.rows())
        .into_par_iter()
        .map(|r| Ok(model.centered_embedding_index(idx, m.row(r))?))
        .collect()
}

struct Scored {
    result: RankResult,
    /// Scores in candidate-file order.
    scores: Vec<f64>,
    order: usize,
}

fn score_records(
    model: &CcaModel,
    questions: &Matrix,
    answers: &Matrix,
    records: &[CandidateRecord],
) -> Result<Vec<Scored>> {
    let answer_emb = embed_rows(model, ANSWER_VIEW, answers)?;
    let qi = model.view_index(QUESTION_VIEW)?;
    records
        .par_iter()
        .enumerate()
        .map(|(order, rec)| {
            let q = model.centered_embedding_index(qi, questions.row(rec.question_row))?;
            let scores: Vec<f64> = rec
                .candidate_rows
                .iter()
                .map(|&c| cosine(&q, &answer_emb[c]))
                .collect();
            let result = rank_scores(rec.question_id, &scores, rec.gt_index)?;
            Ok(Scored {
                result,
                scores,
                order,
            })
        })
        .collect()
}

fn load_ranking_inputs(
    model: &Path,
    questions: &Path,
    answers: &Path,
    candidates: &Path,
) -> Result<(CcaModel, Matrix, Matrix, Vec<CandidateRecord>)> {
    require_file("--model", model)?;
    require_file("--questions", questions)?;
    require_file("--answers", answers)?;
    require_file("--candidates", candidates)?;
    let model = load_model(model).with_context(|| format!("--model `{}`", model.display()))?;
    let q = read_features("--questions", questions)?;
    let a = read_features("--answers", answers)?;
    let records = read_candidates(candidates)
        .with_context(|| format!("--candidates `{}`", candidates.display()))?;
    check_records(&records, q.rows(), a.rows())?;
    Ok((model, q, a, records))
}

/// Sorts by question id (file order among duplicates) so that sums do not
/// depend on the order of the candidate file.
fn sort_by_question(scored: &mut [Scored]) {
    scored.sort_by_key(|s| (s.result.question_id, s.order));
    if scored
        .windows(2)
        .any(|w| w[0].result.question_id == w[1].result.question_id)
    {
        warn!("candidate file repeats question ids; duplicates are aggregated in file order");
    }
}

pub fn cmd_evaluate(
    args: &EvaluateArgs,
    threads: usize,
    stdout: &mut dyn Write,
) -> Result<EvalReport> {
    if let Some(out) = &args.out {
        require_parent("--out", out)?;
    }
    let (model, questions, answers, records) = load_ranking_inputs(
        &args.model,
        &args.questions,
        &args.answers,
        &args.candidates,
    )?;
    if args.ndcg {
        if let Some(r) = records.iter().find(|r| r.relevance.is_none()) {
            bail!(
                "--ndcg needs graded relevance, but question {} in `{}` has no relevance field",
                r.question_id,
                args.candidates.display()
            );
        }
    }

    let mut scored =
        pool(threads)?.install(|| score_records(&model, &questions, &answers, &records))?;
    sort_by_question(&mut scored);
    let ranks: Vec<usize> = scored.iter().map(|s| s.result.gt_rank).collect();
    let mut report = EvalReport::from_ranks(&ranks)?;
    info!("ranked {} questions", ranks.len());

    if args.ndcg {
        let rels: Vec<Vec<f64>> = scored
            .iter()
            .map(|s| {
                let rel = records[s.order].relevance.as_ref().unwrap();
                s.result.ranked.iter().map(|&i| rel[i]).collect()
            })
            .collect();
        let summary = ndcg(&rels)?;
        if summary.skipped > 0 {
            warn!(
                "NDCG skipped {} questions without relevant candidates",
                summary.skipped
            );
        }
        report.ndcg = Some(summary.mean);
    }
    if args.otsu {
        let qs: Vec<QuestionCorrelations> = scored
            .iter()
            .map(|s| QuestionCorrelations {
                gt: s.scores[records[s.order].gt_index],
                candidates: s.scores.clone(),
            })
            .collect();
        let stats = otsu_statistics(&qs, args.otsu_bins)?;
        if stats.questions_used < qs.len() {
            warn!(
                "Otsu skipped {} questions whose correlations are all equal",
                qs.len() - stats.questions_used
            );
        }
        report.otsu = Some(stats);
    }

    if let Some(out) = &args.out {
        let mut f = BufWriter::new(
            File::create(out).with_context(|| format!("creating `{}`", out.display()))?,
        );
        serde_json::to_writer_pretty(&mut f, &report)?;
        writeln!(f)?;
        f.flush()?;
    }
    write!(stdout, "{}", report.table())?;
    if let Some(o) = &report.otsu {
        writeln!(
            stdout,
            "otsu: low-split variance {:.6}, high-split variance {:.6}, GT above threshold {:.4} ({} questions)",
            o.avg_variance_low_split, o.avg_variance_high_split, o.gt_above_threshold_fraction, o.questions_used
        )?;
    }
    Ok(report)
}

fn write_jsonl<T: Serialize>(
    items: &[T],
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<()> {
    let mut sink: Box<dyn Write + '_> = match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating `{}`", p.display()))?,
        )),
        None => Box::new(&mut *stdout),
    };
    for item in items {
        serde_json::to_writer(&mut sink, item)?;
        writeln!(sink)?;
    }
    sink.flush()?;
    Ok(())
}

pub fn cmd_rank(args: &RankArgs, threads: usize, stdout: &mut dyn Write) -> Result<()> {
    if let Some(out) = &args.out {
        require_parent("--out", out)?;
    }
    let (model, questions, answers, records) = load_ranking_inputs(
        &args.model,
        &args.questions,
        &args.answers,
        &args.candidates,
    )?;
    let scored =
        pool(threads)?.install(|| score_records(&model, &questions, &answers, &records))?;
    let results: Vec<RankResult> = scored.into_iter().map(|s| s.result).collect();
    write_jsonl(&results, args.out.as_deref(), stdout)
}

fn clamp_k(k: usize, bank: usize) -> Result<usize> {
    if k == 0 {
        bail!("--k must be at least 1");
    }
    if k > bank {
        warn!("--k {k} exceeds the bank size {bank}; using k = {bank}");
        return Ok(bank);
    }
    Ok(k)
}

pub fn cmd_nn_retrieve(
    args: &NnRetrieveArgs,
    threads: usize,
    stdout: &mut dyn Write,
) -> Result<()> {
    require_file("--model", &args.model)?;
    require_file("--questions", &args.questions)?;
    require_file("--bank-questions", &args.bank_questions)?;
    require_file("--bank-answers", &args.bank_answers)?;
    if let Some(out) = &args.out {
        require_parent("--out", out)?;
    }
    if args.top == 0 {
        bail!("--top must be at least 1");
    }
    let model =
        load_model(&args.model).with_context(|| format!("--model `{}`", args.model.display()))?;
    let queries = read_features("--questions", &args.questions)?;
    let bank_q = read_features("--bank-questions", &args.bank_questions)?;
    let bank_a = read_features("--bank-answers", &args.bank_answers)?;
    let k = clamp_k(args.k, bank_q.rows())?;

    let results = pool(threads)?.install(|| -> Result<Vec<_>> {
        let bank = EmbeddedBank::new(&model, &bank_q, &bank_a)?;
        (0..queries.rows())
            .into_par_iter()
            .map(|r| Ok(bank.retrieve(&model, r as u64, queries.row(r), k, args.top)?))
            .collect()
    })?;
    write_jsonl(&results, args.out.as_deref(), stdout)
}

pub fn cmd_nn_baseline(
    args: &NnBaselineArgs,
    threads: usize,
    stdout: &mut dyn Write,
) -> Result<()> {
    if let Some(m) = &args.model {
        require_file("--model", m)?;
    }
    require_file("--questions", &args.questions)?;
    require_file("--answers", &args.answers)?;
    require_file("--candidates", &args.candidates)?;
    require_file("--bank-questions", &args.bank_questions)?;
    require_file("--bank-answers", &args.bank_answers)?;
    for p in [&args.images, &args.bank_images].into_iter().flatten() {
        require_file("--images/--bank-images", p)?;
    }
    if let Some(out) = &args.out {
        require_parent("--out", out)?;
    }

    let model = match &args.model {
        Some(p) => Some(load_model(p).with_context(|| format!("--model `{}`", p.display()))?),
        None => None,
    };
    let questions = read_features("--questions", &args.questions)?;
    let answers = read_features("--answers", &args.answers)?;
    let records = read_candidates(&args.candidates)
        .with_context(|| format!("--candidates `{}`", args.candidates.display()))?;
    check_records(&records, questions.rows(), answers.rows())?;
    let images = args
        .images
        .as_deref()
        .map(|p| read_features("--images", p))
        .transpose()?;
    if let Some(im) = &images {
        if im.rows() != questions.rows() {
            bail!(
                "--images has {} rows but --questions has {}",
                im.rows(),
                questions.rows()
            );
        }
    }
    let bank_q = read_features("--bank-questions", &args.bank_questions)?;
    let bank_a = read_features("--bank-answers", &args.bank_answers)?;
    let bank_i = args
        .bank_images
        .as_deref()
        .map(|p| read_features("--bank-images", p))
        .transpose()?;
    let k = clamp_k(args.k, bank_q.rows())?;

    let source = model.as_ref().map_or(NnSource::Raw, NnSource::Cca);
    let results = pool(threads)?.install(|| -> Result<Vec<RankResult>> {
        let nn = NnBaseline::new(source, &bank_q, &bank_a, bank_i.as_ref())?;
        records
            .par_iter()
            .map(|rec| {
                let cands: Vec<&[f64]> =
                    rec.candidate_rows.iter().map(|&c| answers.row(c)).collect();
                let image = images.as_ref().map(|m| m.row(rec.question_row));
                Ok(nn.rank(
                    rec.question_id,
                    questions.row(rec.question_row),
                    image,
                    &cands,
                    rec.gt_index,
                    k,
                )?)
            })
            .collect()
    })?;

    write_jsonl(&results, args.out.as_deref(), stdout)?;
    if args.out.is_some() {
        let mut keyed: Vec<(u64, usize)> =
            results.iter().map(|r| (r.question_id, r.gt_rank)).collect();
        keyed.sort_unstable();
        let ranks: Vec<usize> = keyed.into_iter().map(|(_, r)| r).collect();
        write!(stdout, "{}", EvalReport::from_ranks(&ranks)?.table())?;
    }
    Ok(())
}

pub fn cmd_synth(args: &SynthArgs, stdout: &mut dyn Write) -> Result<()> {
    let config = SynthConfig {
        latent_dim: args.correlations.len(),
        question_dim: args.question_dim,
        answer_dim: args.answer_dim,
        image_dim: args.image_dim,
        correlations: args.correlations.clone(),
        samples: args.samples,
        test_samples: args.test_samples,
        noise_scale: args.noise_scale,
        candidate_count: args.candidate_count,
        relevance: args.relevance,
        seed: args.seed,
    };
    config.validate()?;
    let data = synth_generate(&config)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating `{}`", args.out.display()))?;

    let mut written = Vec::new();
    let mut emit = |name: &str, m: &Matrix| -> Result<()> {
        let path = args.out.join(name);
        write_feature_matrix(&path, m).with_context(|| format!("writing `{}`", path.display()))?;
        written.push(path);
        Ok(())
    };
    for (prefix, split) in [("train", Some(&data.train)), ("test", data.test.as_ref())] {
        let Some(split) = split else { continue };
        emit(&format!("{prefix}_questions.vdf"), &split.questions)?;
        emit(&format!("{prefix}_answers.vdf"), &split.answers)?;
        if let Some(im) = &split.images {
            emit(&format!("{prefix}_images.vdf"), im)?;
        }
    }
    let cand_path = args.out.join("candidates.jsonl");
    write_candidates(&cand_path, &data.candidates)?;
    written.push(cand_path);
    for p in written {
        writeln!(stdout, "{}", p.display())?;
    }
    Ok(())
}

pub fn cmd_featurize(args: &FeaturizeArgs, stdout: &mut dyn Write) -> Result<()> {
    require_file("--table", &args.table)?;
    require_file("--text", &args.text)?;
    require_parent("--out", &args.out)?;
    let table = load_embedding_table(&args.table)
        .with_context(|| format!("--table `{}`", args.table.display()))?;
    if table.duplicates() > 0 {
        warn!(
            "embedding table repeats {} tokens; the last vector wins",
            table.duplicates()
        );
    }
    let reader = BufReader::new(File::open(&args.text)?);
    let mut rows = Vec::new();
    for line in reader.lines() {
        let tokens = tokenize(&line?);
        rows.push(sentence_embedding(
            &tokens,
            &table,
            MAX_TOKENS,
            args.pooling.into(),
        )?);
    }
    if rows.is_empty() {
        bail!("--text `{}` has no lines", args.text.display());
    }
    let m = Matrix::from_rows(&rows);
    write_feature_matrix(&args.out, &m)?;
    writeln!(stdout, "{} {} {}", args.out.display(), m.rows(), m.cols())?;
    Ok(())
}
