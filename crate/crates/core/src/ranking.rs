//! Cosine scoring of centred embeddings, candidate ranking, and
//! nearest-neighbour retrieval over a training bank.

use serde::{Deserialize, Serialize};

use crate::cca::{CcaModel, ANSWER_VIEW, IMAGE_VIEW, QUESTION_VIEW};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Matrix};

/// Cosine similarity; `0` when either side has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

/// Correlation between two inputs: the cosine of their centred embeddings.
pub fn score(
    model: &CcaModel,
    view_a: &str,
    x_a: &[f64],
    view_b: &str,
    x_b: &[f64],
) -> Result<f64> {
    let ea = model.centered_embedding(view_a, x_a)?;
    let eb = model.centered_embedding(view_b, x_b)?;
    Ok(cosine(&ea, &eb))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankResult {
    pub question_id: u64,
    /// Candidate positions, best first.
    pub ranked: Vec<usize>,
    /// Scores aligned with `ranked`.
    pub scores: Vec<f64>,
    /// 1-based rank of the ground-truth candidate.
    pub gt_rank: usize,
}

/// Orders candidates by descending score, lower position first on ties.
pub fn rank_scores(question_id: u64, scores: &[f64], gt_index: usize) -> Result<RankResult> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("no candidates"));
    }
    if gt_index >= scores.len() {
        return Err(Error::dims(format!(
            "gt_index {gt_index} out of range for {} candidates",
            scores.len()
        )));
    }
    let mut ranked: Vec<usize> = (0..scores.len()).collect();
    ranked.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    let gt_rank = ranked.iter().position(|&i| i == gt_index).unwrap() + 1;
    let scores = ranked.iter().map(|&i| scores[i]).collect();
    Ok(RankResult {
        question_id,
        ranked,
        scores,
        gt_rank,
    })
}

/// Ranks candidate answers against a question. Only the question view is
/// used on the query side, also for models fitted with an image view.
pub fn rank_candidates(
    model: &CcaModel,
    question_id: u64,
    question: &[f64],
    candidates: &[&[f64]],
    gt_index: usize,
) -> Result<RankResult> {
    let q = model.centered_embedding(QUESTION_VIEW, question)?;
    let a_idx = model.view_index(ANSWER_VIEW)?;
    let scores = candidates
        .iter()
        .map(|c| Ok(cosine(&q, &model.centered_embedding_index(a_idx, c)?)))
        .collect::<Result<Vec<f64>>>()?;
    rank_scores(question_id, &scores, gt_index)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedAnswer {
    /// Row in the training answer bank.
    pub row: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub question_id: u64,
    /// Best first.
    pub answers: Vec<RetrievedAnswer>,
}

/// Indices of the `k` largest scores, best first, lower index on ties.
fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    idx.truncate(k);
    idx
}

fn clamp_k(k: usize, bank: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::config("k must be at least 1"));
    }
    if k > bank {
        log::warn!("k = {k} exceeds the bank size {bank}; using k = {bank}");
        return Ok(bank);
    }
    Ok(k)
}

fn check_bank(questions: &Matrix, answers: &Matrix) -> Result<()> {
    if questions.rows() == 0 {
        return Err(Error::EmptyBank);
    }
    if questions.rows() != answers.rows() {
        return Err(Error::dims(format!(
            "bank has {} questions but {} answers",
            questions.rows(),
            answers.rows()
        )));
    }
    Ok(())
}

/// Training questions and answers, pre-embedded with a CCA model.
#[derive(Debug, Clone)]
pub struct EmbeddedBank {
    questions: Vec<Vec<f64>>,
    answers: Vec<Vec<f64>>,
}

impl EmbeddedBank {
    /// `questions` and `answers` hold one sample per row, aligned row for row.
    pub fn new(model: &CcaModel, questions: &Matrix, answers: &Matrix) -> Result<Self> {
        check_bank(questions, answers)?;
        let qi = model.view_index(QUESTION_VIEW)?;
        let ai = model.view_index(ANSWER_VIEW)?;
        let questions = questions
            .row_iter()
            .map(|r| model.centered_embedding_index(qi, r))
            .collect::<Result<_>>()?;
        let answers = answers
            .row_iter()
            .map(|r| model.centered_embedding_index(ai, r))
            .collect::<Result<_>>()?;
        Ok(Self { questions, answers })
    }

    pub fn len(&self) -> usize {
        self.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }

    /// Rows of the `k` training questions most correlated with the query.
    pub fn neighbours(&self, model: &CcaModel, question: &[f64], k: usize) -> Result<Vec<usize>> {
        let k = clamp_k(k, self.len())?;
        let q = model.centered_embedding(QUESTION_VIEW, question)?;
        let scores: Vec<f64> = self.questions.iter().map(|b| cosine(&q, b)).collect();
        Ok(top_k(&scores, k))
    }

    /// Builds a candidate set from the answers of the `k` nearest training
    /// questions and returns the `top` answers best correlated with the query.
    pub fn retrieve(
        &self,
        model: &CcaModel,
        question_id: u64,
        question: &[f64],
        k: usize,
        top: usize,
    ) -> Result<RetrievalResult> {
        let rows = self.neighbours(model, question, k)?;
        let q = model.centered_embedding(QUESTION_VIEW, question)?;
        let scores: Vec<f64> = rows.iter().map(|&r| cosine(&q, &self.answers[r])).collect();
        let answers = top_k(&scores, top)
            .into_iter()
            .map(|i| RetrievedAnswer {
                row: rows[i],
                score: scores[i],
            })
            .collect();
        Ok(RetrievalResult {
            question_id,
            answers,
        })
    }
}

/// One-shot form of [`EmbeddedBank::retrieve`].
pub fn nn_retrieve(
    model: &CcaModel,
    question_id: u64,
    question: &[f64],
    train_questions: &Matrix,
    train_answers: &Matrix,
    k: usize,
    top: usize,
) -> Result<RetrievalResult> {
    EmbeddedBank::new(model, train_questions, train_answers)?.retrieve(
        model,
        question_id,
        question,
        k,
        top,
    )
}

/// Where the nearest-neighbour baseline gets its vectors from.
#[derive(Debug, Clone, Copy)]
pub enum NnSource<'a> {
    /// Raw features centred on the bank means.
    Raw,
    /// Centred CCA embeddings.
    Cca(&'a CcaModel),
}

/// Nearest-neighbour baseline: average the answers of the `k` training
/// questions closest to the query and rank candidates by cosine to that
/// average. With image features the question side becomes the
/// concatenation of the unit-normalized question and image vectors.
#[derive(Debug, Clone)]
pub struct NnBaseline<'a> {
    source: NnSource<'a>,
    question_mean: Vec<f64>,
    answer_mean: Vec<f64>,
    image_mean: Option<Vec<f64>>,
    questions: Vec<Vec<f64>>,
    answers: Vec<Vec<f64>>,
}

fn column_means(m: &Matrix) -> Vec<f64> {
    let mut mean = vec![0.0; m.cols()];
    for r in m.row_iter() {
        for (a, v) in mean.iter_mut().zip(r) {
            *a += v;
        }
    }
    let n = m.rows() as f64;
    mean.iter_mut().for_each(|a| *a /= n);
    mean
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = norm(&v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

impl<'a> NnBaseline<'a> {
    pub fn new(
        source: NnSource<'a>,
        questions: &Matrix,
        answers: &Matrix,
        images: Option<&Matrix>,
    ) -> Result<Self> {
        check_bank(questions, answers)?;
        if let Some(im) = images {
            if im.rows() != questions.rows() {
                return Err(Error::dims(format!(
                    "bank has {} questions but {} images",
                    questions.rows(),
                    im.rows()
                )));
            }
            if let NnSource::Cca(model) = source {
                model.view_index(IMAGE_VIEW)?;
            }
        }
        let mut nn = Self {
            source,
            question_mean: column_means(questions),
            answer_mean: column_means(answers),
            image_mean: images.map(column_means),
            questions: Vec::new(),
            answers: Vec::new(),
        };
        nn.questions = (0..questions.rows())
            .map(|t| nn.question_repr(questions.row(t), images.map(|m| m.row(t))))
            .collect::<Result<_>>()?;
        nn.answers = answers
            .row_iter()
            .map(|r| nn.answer_repr(r))
            .collect::<Result<_>>()?;
        Ok(nn)
    }

    pub fn uses_images(&self) -> bool {
        self.image_mean.is_some()
    }

    fn view_repr(&self, view: &str, x: &[f64], mean: &[f64]) -> Result<Vec<f64>> {
        match self.source {
            NnSource::Cca(model) => model.centered_embedding(view, x),
            NnSource::Raw => {
                if x.len() != mean.len() {
                    return Err(Error::dims(format!(
                        "{view} vector has {} features, bank has {}",
                        x.len(),
                        mean.len()
                    )));
                }
                Ok(x.iter().zip(mean).map(|(a, m)| a - m).collect())
            }
        }
    }

    pub fn question_repr(&self, question: &[f64], image: Option<&[f64]>) -> Result<Vec<f64>> {
        let q = self.view_repr(QUESTION_VIEW, question, &self.question_mean)?;
        match (&self.image_mean, image) {
            (None, _) => Ok(q),
            (Some(mean), Some(im)) => {
                let mut out = unit(q);
                out.extend(unit(self.view_repr(IMAGE_VIEW, im, mean)?));
                Ok(out)
            }
            (Some(_), None) => Err(Error::config(
                "baseline was built with images; query image missing",
            )),
        }
    }

    pub fn answer_repr(&self, answer: &[f64]) -> Result<Vec<f64>> {
        self.view_repr(ANSWER_VIEW, answer, &self.answer_mean)
    }

    /// Mean answer representation over the `k` nearest training questions.
    pub fn reference(&self, question: &[f64], image: Option<&[f64]>, k: usize) -> Result<Vec<f64>> {
        let k = clamp_k(k, self.questions.len())?;
        let q = self.question_repr(question, image)?;
        let scores: Vec<f64> = self.questions.iter().map(|b| cosine(&q, b)).collect();
        let rows = top_k(&scores, k);
        let mut reference = vec![0.0; self.answers[0].len()];
        for &r in &rows {
            for (acc, v) in reference.iter_mut().zip(&self.answers[r]) {
                *acc += v;
            }
        }
        reference.iter_mut().for_each(|v| *v /= rows.len() as f64);
        Ok(reference)
    }

    pub fn rank(
        &self,
        question_id: u64,
        question: &[f64],
        image: Option<&[f64]>,
        candidates: &[&[f64]],
        gt_index: usize,
        k: usize,
    ) -> Result<RankResult> {
        let reference = self.reference(question, image, k)?;
        let scores = candidates
            .iter()
            .map(|c| Ok(cosine(&reference, &self.answer_repr(c)?)))
            .collect::<Result<Vec<f64>>>()?;
        rank_scores(question_id, &scores, gt_index)
    }
}

/// One-shot form of [`NnBaseline::rank`].
#[allow(clippy::too_many_arguments)]
pub fn nn_baseline_rank(
    source: NnSource<'_>,
    question_id: u64,
    question: &[f64],
    image: Option<&[f64]>,
    candidates: &[&[f64]],
    gt_index: usize,
    train_questions: &Matrix,
    train_answers: &Matrix,
    train_images: Option<&Matrix>,
    k: usize,
) -> Result<RankResult> {
    NnBaseline::new(source, train_questions, train_answers, train_images)?.rank(
        question_id,
        question,
        image,
        candidates,
        gt_index,
        k,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cca::{CcaConfig, ViewSpec};

    fn identity_model() -> CcaModel {
        CcaModel::from_parts(
            vec![
                ViewSpec::new(ANSWER_VIEW, 2),
                ViewSpec::new(QUESTION_VIEW, 2),
            ],
            vec![Matrix::identity(2), Matrix::identity(2)],
            vec![1.0, 1.0],
            vec![vec![0.0; 2]; 2],
            vec![vec![0.0; 2]; 2],
            CcaConfig::new(2, 1.0),
            2,
        )
        .unwrap()
    }

    #[test]
    fn equal_and_opposite_embeddings() {
        let m = identity_model();
        let same = score(&m, QUESTION_VIEW, &[1.0, 2.0], ANSWER_VIEW, &[1.0, 2.0]).unwrap();
        let opposite = score(&m, QUESTION_VIEW, &[1.0, 2.0], ANSWER_VIEW, &[-1.0, -2.0]).unwrap();
        assert!((same - 1.0).abs() < 1e-15);
        assert!((opposite + 1.0).abs() < 1e-15);
        assert_eq!(
            score(&m, QUESTION_VIEW, &[0.0, 0.0], ANSWER_VIEW, &[1.0, 2.0]).unwrap(),
            0.0
        );
    }

    #[test]
    fn exact_match_ranks_first() {
        let m = identity_model();
        let cands: [&[f64]; 3] = [&[0.0, 1.0], &[0.0, -2.0], &[3.0, 0.0]];
        let r = rank_candidates(&m, 9, &[1.0, 0.0], &cands, 2).unwrap();
        assert_eq!(r.gt_rank, 1);
        assert_eq!(r.ranked[0], 2);
        assert_eq!(r.question_id, 9);
    }

    #[test]
    fn identical_candidates_rank_by_index() {
        let scores = [0.3; 7];
        for gt in 0..7 {
            assert_eq!(rank_scores(0, &scores, gt).unwrap().gt_rank, gt + 1);
        }
    }

    #[test]
    fn rank_scores_orders_descending() {
        let r = rank_scores(1, &[0.1, 0.9, -0.5, 0.9], 2).unwrap();
        assert_eq!(r.ranked, vec![1, 3, 0, 2]);
        assert_eq!(r.scores, vec![0.9, 0.9, 0.1, -0.5]);
        assert_eq!(r.gt_rank, 4);
        assert!(rank_scores(1, &[], 0).is_err());
        assert!(rank_scores(1, &[0.0], 1).is_err());
    }

    #[test]
    fn k_of_one_uses_single_neighbour() {
        let m = identity_model();
        let bq = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [-1.0, 0.2]]);
        let ba = Matrix::from_rows(&[[5.0, 1.0], [0.0, 3.0], [1.0, 1.0]]);
        let bank = EmbeddedBank::new(&m, &bq, &ba).unwrap();
        let r = bank.retrieve(&m, 0, &[0.1, 0.9], 1, 10).unwrap();
        assert_eq!(r.answers.len(), 1);
        assert_eq!(r.answers[0].row, 1);
        assert!((r.answers[0].score - 0.9 / 0.82f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn oversized_k_is_clamped() {
        let m = identity_model();
        let bq = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]);
        let ba = bq.clone();
        let r = nn_retrieve(&m, 0, &[1.0, 1.0], &bq, &ba, 50, 50).unwrap();
        assert_eq!(r.answers.len(), 2);
        assert!(nn_retrieve(&m, 0, &[1.0, 1.0], &bq, &ba, 0, 1).is_err());
        let short = Matrix::from_rows(&[[1.0, 0.0]]);
        assert!(nn_retrieve(&m, 0, &[1.0, 1.0], &bq, &short, 1, 1).is_err());
    }

    #[test]
    fn baseline_orthogonal_candidates_fall_back_to_index_order() {
        let bq = Matrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, -1.0, 0.0]]);
        let ba = Matrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]);
        // bank answer mean is zero, so the k = 1 reference is (1, 0, 0)
        let nn = NnBaseline::new(NnSource::Raw, &bq, &ba, None).unwrap();
        let cands: [&[f64]; 3] = [&[0.0, 1.0, 0.0], &[0.0, 0.0, 2.0], &[0.0, -3.0, 1.0]];
        let r = nn.rank(0, &[2.0, 0.0, 0.0], None, &cands, 1, 1).unwrap();
        assert_eq!(r.scores, vec![0.0, 0.0, 0.0]);
        assert_eq!(r.ranked, vec![0, 1, 2]);
        assert_eq!(r.gt_rank, 2);
    }

    #[test]
    fn baseline_with_images_requires_query_image() {
        let bq = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]);
        let ba = bq.clone();
        let bi = Matrix::from_rows(&[[1.0], [2.0]]);
        let nn = NnBaseline::new(NnSource::Raw, &bq, &ba, Some(&bi)).unwrap();
        assert!(nn.uses_images());
        let cands: [&[f64]; 1] = [&[1.0, 0.0]];
        assert!(nn.rank(0, &[1.0, 0.0], None, &cands, 0, 1).is_err());
        assert!(nn.rank(0, &[1.0, 0.0], Some(&[3.0]), &cands, 0, 1).is_ok());
        // the two-view model has no image view
        let m = identity_model();
        assert!(matches!(
            NnBaseline::new(NnSource::Cca(&m), &bq, &ba, Some(&bi)),
            Err(Error::UnknownView(_))
        ));
    }
}
