//! Synthetic question/answer(/image) features with planted canonical
//! correlations.
//!
//! Every sample draws a latent `z ~ N(0, I_L)`. The question view carries `z`
//! directly; the answer (and image) view carries `ρ_k·z_k + √(1−ρ_k²)·e_k` on
//! its first `L` coordinates. Remaining coordinates are independent unit
//! noise, and each view is rotated by its own random orthogonal matrix and
//! scaled by `noise_scale`. The population canonical correlations between
//! question and answer are therefore exactly `ρ_1..ρ_L`, followed by zeros.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::candidates::{CandidateRecord, DEFAULT_CANDIDATES};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub latent_dim: usize,
    pub question_dim: usize,
    pub answer_dim: usize,
    pub image_dim: Option<usize>,
    /// One target correlation per latent component, each in `[0, 1)`.
    pub correlations: Vec<f64>,
    /// Training samples.
    pub samples: usize,
    /// Held-out samples; candidate sets are drawn from this split when
    /// non-zero, otherwise from the training split.
    pub test_samples: usize,
    /// Per-coordinate standard deviation of the emitted features.
    pub noise_scale: f64,
    pub candidate_count: usize,
    /// Attach graded relevance (latent cosine, clamped to `[0, 1]`).
    pub relevance: bool,
    pub seed: u64,
}

impl SynthConfig {
    /// Small two-view configuration used in the docs and demo runs.
    pub fn demo() -> Self {
        Self {
            latent_dim: 4,
            question_dim: 16,
            answer_dim: 16,
            image_dim: None,
            correlations: vec![0.9, 0.6, 0.3, 0.1],
            samples: 5000,
            test_samples: 1000,
            noise_scale: 1.0,
            candidate_count: DEFAULT_CANDIDATES,
            relevance: false,
            seed: 7,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut dims = vec![self.question_dim, self.answer_dim];
        dims.extend(self.image_dim);
        let min_dim = *dims.iter().min().unwrap();
        if self.latent_dim == 0 || self.latent_dim > min_dim {
            return Err(Error::config(format!(
                "latent_dim {} must be in 1..={min_dim}",
                self.latent_dim
            )));
        }
        if self.correlations.len() != self.latent_dim {
            return Err(Error::config(format!(
                "{} correlations for latent_dim {}",
                self.correlations.len(),
                self.latent_dim
            )));
        }
        if let Some(r) = self.correlations.iter().find(|r| !(0.0..1.0).contains(*r)) {
            return Err(Error::config(format!("correlation {r} outside [0, 1)")));
        }
        if self.samples < 2 {
            return Err(Error::config("need at least 2 training samples"));
        }
        if !(self.noise_scale.is_finite() && self.noise_scale > 0.0) {
            return Err(Error::config("noise_scale must be positive"));
        }
        let pool = if self.test_samples > 0 {
            self.test_samples
        } else {
            self.samples
        };
        if self.candidate_count == 0 || self.candidate_count > pool {
            return Err(Error::config(format!(
                "candidate_count {} must be in 1..={pool}",
                self.candidate_count
            )));
        }
        Ok(())
    }
}

/// One split of generated features, one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSplit {
    pub questions: Matrix,
    pub answers: Matrix,
    pub images: Option<Matrix>,
    /// The latent draw behind each sample (`N x latent_dim`).
    pub latents: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub train: SynthSplit,
    pub test: Option<SynthSplit>,
    /// Candidate sets indexing the test split if present, else the train split.
    pub candidates: Vec<CandidateRecord>,
}

impl SynthDataset {
    pub fn eval_split(&self) -> &SynthSplit {
        self.test.as_ref().unwrap_or(&self.train)
    }
}

struct Lifts {
    question: Matrix,
    answer: Matrix,
    image: Option<Matrix>,
}

pub fn synth_generate(config: &SynthConfig) -> Result<SynthDataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let lifts = Lifts {
        question: random_orthogonal(config.question_dim, &mut rng),
        answer: random_orthogonal(config.answer_dim, &mut rng),
        image: config.image_dim.map(|d| random_orthogonal(d, &mut rng)),
    };
    let train = draw_split(config, &lifts, config.samples, &mut rng);
    let test = (config.test_samples > 0)
        .then(|| draw_split(config, &lifts, config.test_samples, &mut rng));
    let pool = test.as_ref().unwrap_or(&train);
    let candidates = build_candidates(config, pool, &mut rng);
    Ok(SynthDataset {
        train,
        test,
        candidates,
    })
}

fn draw_split(config: &SynthConfig, lifts: &Lifts, n: usize, rng: &mut ChaCha8Rng) -> SynthSplit {
    let l = config.latent_dim;
    let mut latents = Matrix::zeros(n, l);
    let mut questions = Matrix::zeros(n, config.question_dim);
    let mut answers = Matrix::zeros(n, config.answer_dim);
    let mut images = config.image_dim.map(|d| Matrix::zeros(n, d));

    for t in 0..n {
        let z: Vec<f64> = (0..l).map(|_| rng.sample(StandardNormal)).collect();
        latents.row_mut(t).copy_from_slice(&z);

        let mut sq = z.clone();
        sq.extend((l..config.question_dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let sa = correlated_signal(&z, &config.correlations, config.answer_dim, rng);
        lift_into(
            &lifts.question,
            &sq,
            config.noise_scale,
            questions.row_mut(t),
        );
        lift_into(&lifts.answer, &sa, config.noise_scale, answers.row_mut(t));
        if let (Some(lift), Some(images)) = (&lifts.image, images.as_mut()) {
            let si = correlated_signal(&z, &config.correlations, lift.rows(), rng);
            lift_into(lift, &si, config.noise_scale, images.row_mut(t));
        }
    }
    SynthSplit {
        questions,
        answers,
        images,
        latents,
    }
}

fn correlated_signal(z: &[f64], rho: &[f64], dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut s: Vec<f64> = z
        .iter()
        .zip(rho)
        .map(|(&zk, &r)| {
            let e: f64 = rng.sample(StandardNormal);
            r * zk + (1.0 - r * r).sqrt() * e
        })
        .collect();
    s.extend((z.len()..dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
    s
}

fn lift_into(lift: &Matrix, signal: &[f64], scale: f64, out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(lift.row_iter()) {
        *o = scale * dot(row, signal);
    }
}

/// Orthonormalizes a Gaussian matrix row by row (modified Gram-Schmidt).
fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    for v in m.as_mut_slice() {
        *v = rng.sample(StandardNormal);
    }
    for i in 0..n {
        for j in 0..i {
            let proj = dot(m.row(i), m.row(j));
            let prev = m.row(j).to_vec();
            for (x, p) in m.row_mut(i).iter_mut().zip(&prev) {
                *x -= proj * p;
            }
        }
        let len = norm(m.row(i));
        m.row_mut(i).iter_mut().for_each(|x| *x /= len);
    }
    m
}

fn build_candidates(
    config: &SynthConfig,
    pool: &SynthSplit,
    rng: &mut ChaCha8Rng,
) -> Vec<CandidateRecord> {
    let m = pool.questions.rows();
    let c = config.candidate_count;
    (0..m)
        .map(|t| {
            let mut rows: Vec<usize> = index::sample(rng, m - 1, c - 1)
                .into_iter()
                .map(|v| if v >= t { v + 1 } else { v })
                .collect();
            let gt_index = rng.random_range(0..c);
            rows.insert(gt_index, t);
            let relevance = config.relevance.then(|| {
                let zt = pool.latents.row(t);
                rows.iter()
                    .map(|&s| {
                        if s == t {
                            1.0
                        } else {
                            let zs = pool.latents.row(s);
                            let denom = norm(zt) * norm(zs);
                            if denom > 0.0 {
                                (dot(zt, zs) / denom).clamp(0.0, 1.0)
                            } else {
                                0.0
                            }
                        }
                    })
                    .collect()
            });
            CandidateRecord {
                question_id: t as u64,
                question_row: t,
                candidate_rows: rows,
                gt_index,
                relevance,
            }
        })
        .collect()
}
