//! Otsu thresholding of per-question candidate correlations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 256;

/// Otsu threshold over a 256-bin histogram. See [`otsu_threshold_with_bins`].
pub fn otsu_threshold(values: &[f64]) -> Result<f64> {
    otsu_threshold_with_bins(values, DEFAULT_BINS)
}

/// Histogram threshold maximizing the between-class variance
/// `ω₀·ω₁·(μ₀ − μ₁)²`.
///
/// Values are binned into `bins` equal-width bins over `[min, max]` and the
/// candidate thresholds are the interior bin edges. Class moments are taken
/// from the values themselves, not from bin centres. When several edges tie
/// (empty bins between two clusters), the middle one is returned. The result
/// always lies strictly between the minimum and the maximum.
pub fn otsu_threshold_with_bins(values: &[f64], bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::config("Otsu needs at least 2 bins"));
    }
    if values.len() < 2 {
        return Err(Error::DegenerateInput("Otsu needs at least two values"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("non-finite value"));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::DegenerateInput("all values are equal"));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    let mut sums = vec![0.0; bins];
    for &v in values {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
        sums[b] += v;
    }

    let n = values.len() as f64;
    let total: f64 = sums.iter().sum();
    let mut n0 = 0usize;
    let mut s0 = 0.0;
    let mut best = f64::NEG_INFINITY;
    let mut argmax: Vec<usize> = Vec::new();
    for k in 1..bins {
        n0 += counts[k - 1];
        s0 += sums[k - 1];
        let n1 = values.len() - n0;
        let between = if n0 == 0 || n1 == 0 {
            0.0
        } else {
            let (w0, w1) = (n0 as f64 / n, n1 as f64 / n);
            let d = s0 / n0 as f64 - (total - s0) / n1 as f64;
            w0 * w1 * d * d
        };
        if between > best {
            best = between;
            argmax.clear();
            argmax.push(k);
        } else if between == best {
            argmax.push(k);
        }
    }
    let k = argmax[(argmax.len() - 1) / 2];
    Ok(lo + k as f64 * width)
}

/// Candidate correlations of one question together with the ground truth's.
#[derive(Debug, Clone, PartialEq)]
pub struct QuestionCorrelations {
    pub candidates: Vec<f64>,
    pub gt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OtsuStats {
    /// Mean over questions of the variance of correlations at or below the threshold.
    pub avg_variance_low_split: f64,
    /// Mean over questions of the variance of correlations above the threshold.
    pub avg_variance_high_split: f64,
    /// Fraction of questions whose ground truth lies strictly above the threshold.
    pub gt_above_threshold_fraction: f64,
    pub questions_used: usize,
}

/// Population variance, shifted by the first value so that a constant
/// input gives exactly zero.
fn population_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let d: Vec<f64> = v.iter().map(|x| x - v[0]).collect();
    let mean = d.iter().sum::<f64>() / n;
    d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

/// Splits each question's correlations at its Otsu threshold and averages
/// the split variances and the ground-truth-above-threshold indicator.
/// Questions whose correlations are all equal are skipped.
pub fn otsu_statistics(questions: &[QuestionCorrelations], bins: usize) -> Result<OtsuStats> {
    let mut low_var = 0.0;
    let mut high_var = 0.0;
    let mut above = 0usize;
    let mut used = 0usize;
    for q in questions {
        let t = match otsu_threshold_with_bins(&q.candidates, bins) {
            Ok(t) => t,
            Err(Error::DegenerateInput(_)) => continue,
            Err(e) => return Err(e),
        };
        let (low, high): (Vec<f64>, Vec<f64>) = q.candidates.iter().partition(|&&v| v <= t);
        low_var += population_variance(&low);
        high_var += population_variance(&high);
        if q.gt > t {
            above += 1;
        }
        used += 1;
    }
    if used == 0 {
        return Err(Error::EmptyInput("no question has a usable Otsu split"));
    }
    let u = used as f64;
    Ok(OtsuStats {
        avg_variance_low_split: low_var / u,
        avg_variance_high_split: high_var / u,
        gt_above_threshold_fraction: above as f64 / u,
        questions_used: used,
    })
}
