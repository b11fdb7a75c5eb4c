#![allow(dead_code)]

use mvcca::dataio::{synth_generate, SynthConfig, SynthDataset};
use mvcca::Matrix;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// `G·Gᵀ/n + shift·I`, comfortably positive definite.
pub fn random_spd(n: usize, shift: f64, rng: &mut ChaCha8Rng) -> Matrix {
    let g = gaussian(n, n, rng);
    let mut m = g.matmul(&g.transpose()).unwrap().scaled(1.0 / n as f64);
    for i in 0..n {
        m.as_mut_slice()[i * n + i] += shift;
    }
    m
}

pub fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

/// Eigenvalues of `B⁻¹A` from an explicit inverse, descending.
pub fn inverse_oracle_eigenvalues(a: &Matrix, b: &Matrix) -> Vec<f64> {
    let binv = to_na(b).try_inverse().expect("B invertible");
    let mut ev: Vec<f64> = (binv * to_na(a))
        .complex_eigenvalues()
        .iter()
        .map(|c| {
            assert!(c.im.abs() < 1e-8, "B⁻¹A has a complex eigenvalue {c}");
            c.re
        })
        .collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

/// Classical two-view canonical correlations: square roots of the
/// eigenvalues of `C11⁻¹·C12·C22⁻¹·C21`, descending.
pub fn classical_cca(x1: &Matrix, x2: &Matrix, ridge: f64) -> Vec<f64> {
    let center = |x: &Matrix| {
        let m = to_na(x);
        let means = m.column_mean();
        let mut c = m.clone();
        for mut col in c.column_iter_mut() {
            col -= &means;
        }
        c
    };
    let (a, b) = (center(x1), center(x2));
    let n = (x1.cols() - 1) as f64;
    let c11 = &a * a.transpose() / n + DMatrix::identity(x1.rows(), x1.rows()) * ridge;
    let c22 = &b * b.transpose() / n + DMatrix::identity(x2.rows(), x2.rows()) * ridge;
    let c12 = &a * b.transpose() / n;
    let m = c11.try_inverse().unwrap() * &c12 * c22.try_inverse().unwrap() * c12.transpose();
    let mut rho: Vec<f64> = m
        .complex_eigenvalues()
        .iter()
        .map(|c| c.re.max(0.0).sqrt())
        .collect();
    rho.sort_by(|x, y| y.total_cmp(x));
    rho
}

pub fn synth(
    correlations: &[f64],
    dim: usize,
    samples: usize,
    test: usize,
    seed: u64,
) -> SynthDataset {
    synth_generate(&SynthConfig {
        latent_dim: correlations.len(),
        question_dim: dim,
        answer_dim: dim,
        image_dim: None,
        correlations: correlations.to_vec(),
        samples,
        test_samples: test,
        noise_scale: 1.0,
        candidate_count: 100.min(test.max(samples)),
        relevance: false,
        seed,
    })
    .unwrap()
}

pub fn proptest_config(cases: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config {
        cases,
        failure_persistence: None,
        ..Default::default()
    }
}
