//! Rank metrics (MR, MRR, R@k, NDCG) and the evaluation report.

mod otsu;

pub use otsu::{
    otsu_statistics, otsu_threshold, otsu_threshold_with_bins, OtsuStats, QuestionCorrelations,
    DEFAULT_BINS,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ranking::RankResult;

/// Cutoffs reported for recall.
pub const RECALL_CUTOFFS: [usize; 3] = [1, 5, 10];

fn check_ranks(ranks: &[usize]) -> Result<()> {
    if ranks.is_empty() {
        return Err(Error::EmptyInput("no ranks"));
    }
    if ranks.contains(&0) {
        return Err(Error::config("ranks are 1-based"));
    }
    Ok(())
}

pub fn mean_rank(ranks: &[usize]) -> Result<f64> {
    check_ranks(ranks)?;
    Ok(ranks.iter().map(|&r| r as f64).sum::<f64>() / ranks.len() as f64)
}

pub fn mrr(ranks: &[usize]) -> Result<f64> {
    check_ranks(ranks)?;
    Ok(ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / ranks.len() as f64)
}

/// Fraction of ranks at or above `k`.
pub fn recall_at(ranks: &[usize], k: usize) -> Result<f64> {
    check_ranks(ranks)?;
    if k == 0 {
        return Err(Error::config("recall cutoff must be at least 1"));
    }
    Ok(ranks.iter().filter(|&&r| r <= k).count() as f64 / ranks.len() as f64)
}

/// NDCG of one question's relevances listed in predicted order.
///
/// The cutoff is the number of positively relevant candidates. Returns
/// `None` when nothing is relevant.
pub fn ndcg_single(ranked_relevances: &[f64]) -> Option<f64> {
    let k = ranked_relevances.iter().filter(|&&r| r > 0.0).count();
    if k == 0 {
        return None;
    }
    let dcg = discounted_gain(&ranked_relevances[..k]);
    let mut ideal = ranked_relevances.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg = discounted_gain(&ideal[..k]);
    Some(dcg / idcg)
}

fn discounted_gain(rels: &[f64]) -> f64 {
    rels.iter()
        .enumerate()
        .map(|(i, &r)| r / ((i + 2) as f64).log2())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NdcgSummary {
    pub mean: f64,
    pub questions_used: usize,
    pub skipped: usize,
}

/// Mean NDCG over questions with at least one relevant candidate.
pub fn ndcg(ranked_relevances: &[Vec<f64>]) -> Result<NdcgSummary> {
    let mut sum = 0.0;
    let mut used = 0;
    for rels in ranked_relevances {
        if let Some(v) = ndcg_single(rels) {
            sum += v;
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::EmptyInput("no question has a relevant candidate"));
    }
    Ok(NdcgSummary {
        mean: sum / used as f64,
        questions_used: used,
        skipped: ranked_relevances.len() - used,
    })
}

/// Aggregate retrieval metrics over a question set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mr: f64,
    pub mrr: f64,
    pub recall_at: BTreeMap<usize, f64>,
    pub ndcg: Option<f64>,
    pub question_count: usize,
    pub otsu: Option<OtsuStats>,
}

impl EvalReport {
    /// MR, MRR and R@{1,5,10} from ground-truth ranks. Callers fix the
    /// question order beforehand so sums are reproducible.
    pub fn from_ranks(ranks: &[usize]) -> Result<Self> {
        let recall_at = RECALL_CUTOFFS
            .iter()
            .map(|&k| Ok((k, recall_at(ranks, k)?)))
            .collect::<Result<_>>()?;
        Ok(Self {
            mr: mean_rank(ranks)?,
            mrr: mrr(ranks)?,
            recall_at,
            ndcg: None,
            question_count: ranks.len(),
            otsu: None,
        })
    }

    /// Like [`EvalReport::from_ranks`], summing in ascending `question_id`
    /// order so that the input order does not matter.
    pub fn from_rank_results(results: &[RankResult]) -> Result<Self> {
        let mut keyed: Vec<(u64, usize)> =
            results.iter().map(|r| (r.question_id, r.gt_rank)).collect();
        keyed.sort_unstable();
        let ranks: Vec<usize> = keyed.into_iter().map(|(_, r)| r).collect();
        Self::from_ranks(&ranks)
    }

    /// Fixed-width table: MR, R@1, R@5, R@10, MRR, NDCG.
    pub fn table(&self) -> String {
        let r = |k: usize| self.recall_at.get(&k).copied().unwrap_or(f64::NAN) * 100.0;
        let ndcg = self
            .ndcg
            .map_or_else(|| format!("{:>8}", "-"), |v| format!("{:>8.4}", v));
        format!(
            "{:>8} {:>8} {:>8} {:>8} {:>8} {:>8}\n{:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>8.4} {}\n",
            "MR",
            "R@1",
            "R@5",
            "R@10",
            "MRR",
            "NDCG",
            self.mr,
            r(1),
            r(5),
            r(10),
            self.mrr,
            ndcg
        )
    }
}
