//! Multi-view CCA: correlation assembly, fitting, and eigenvalue-weighted
//! embedding.
//!
//! Views are passed feature-major: each view is an `n_i x N` matrix whose
//! columns are the `N` paired observations.

mod io;

pub use io::{
    load_model, model_from_bytes, model_to_bytes, save_model, MODEL_MAGIC, MODEL_VERSION,
};

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::linalg::{generalized_symmetric_eigen, EigenDecomposition, Matrix};

/// Most views a model may hold.
pub const MAX_VIEWS: usize = 8;

/// Eigenvalues below this are treated as zero when forming `λ^q`.
pub const EIGENVALUE_FLOOR: f64 = 1e-10;

pub const ANSWER_VIEW: &str = "answer";
pub const QUESTION_VIEW: &str = "question";
pub const IMAGE_VIEW: &str = "image";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewSpec {
    pub name: String,
    pub dim: usize,
}

impl ViewSpec {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        Self {
            name: name.into(),
            dim,
        }
    }
}

/// Ridge added to the diagonal correlation blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ridge {
    /// The same absolute value for every view.
    Absolute(f64),
    /// `factor · trace(C_ii) / n_i`, computed per view.
    TraceScaled(f64),
}

impl Default for Ridge {
    fn default() -> Self {
        Ridge::TraceScaled(1e-6)
    }
}

impl Ridge {
    pub fn none() -> Self {
        Ridge::Absolute(0.0)
    }

    fn value(self) -> f64 {
        match self {
            Ridge::Absolute(v) | Ridge::TraceScaled(v) => v,
        }
    }

    /// Ridge for one view given its unregularized covariance block.
    pub fn resolve(self, c_ii: &Matrix) -> f64 {
        match self {
            Ridge::Absolute(v) => v,
            Ridge::TraceScaled(f) => f * c_ii.trace() / c_ii.rows() as f64,
        }
    }

    /// Single-float encoding used by the model file: absolute values are
    /// stored as-is, trace-scaled factors with the sign bit set.
    pub fn to_bits(self) -> f64 {
        match self {
            Ridge::Absolute(v) => v,
            Ridge::TraceScaled(f) => -f,
        }
    }

    pub fn from_bits(x: f64) -> Self {
        if x.is_sign_negative() {
            Ridge::TraceScaled(-x)
        } else {
            Ridge::Absolute(x)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcaConfig {
    /// Embedding dimension.
    pub p: usize,
    /// Eigenvalue weighting exponent; `0` gives the unweighted embedding.
    pub q: f64,
    pub ridge: Ridge,
}

impl CcaConfig {
    pub fn new(p: usize, q: f64) -> Self {
        Self {
            p,
            q,
            ridge: Ridge::default(),
        }
    }

    pub fn with_ridge(mut self, ridge: Ridge) -> Self {
        self.ridge = ridge;
        self
    }

    pub fn validate(&self, specs: &[ViewSpec]) -> Result<()> {
        if !(2..=MAX_VIEWS).contains(&specs.len()) {
            return Err(Error::config(format!(
                "need between 2 and {MAX_VIEWS} views, got {}",
                specs.len()
            )));
        }
        validate_specs(specs)?;
        let min_dim = specs.iter().map(|s| s.dim).min().unwrap_or(0);
        if self.p == 0 || self.p > min_dim {
            return Err(Error::config(format!(
                "p = {} must satisfy 1 <= p <= min view dim ({min_dim})",
                self.p
            )));
        }
        if !self.q.is_finite() {
            return Err(Error::config("q must be finite"));
        }
        let r = self.ridge.value();
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::config(format!(
                "ridge must be finite and >= 0, got {r}"
            )));
        }
        Ok(())
    }
}

fn validate_specs(specs: &[ViewSpec]) -> Result<()> {
    let mut seen = HashSet::new();
    for s in specs {
        if s.name.is_empty() {
            return Err(Error::config("view names must be non-empty"));
        }
        if s.name.len() > u16::MAX as usize {
            return Err(Error::config("view name too long"));
        }
        if !seen.insert(s.name.as_str()) {
            return Err(Error::config(format!("duplicate view name `{}`", s.name)));
        }
        if s.dim == 0 {
            return Err(Error::config(format!(
                "view `{}` has zero dimension",
                s.name
            )));
        }
    }
    Ok(())
}

/// Subtracts each view's per-feature mean over the samples.
///
/// Returns the centred views and the mean vectors (one per view, length `n_i`).
pub fn center_views(views: &[Matrix]) -> Result<(Vec<Matrix>, Vec<Vec<f64>>)> {
    let n = sample_count(views)?;
    let mut centered = Vec::with_capacity(views.len());
    let mut means = Vec::with_capacity(views.len());
    for view in views {
        let mut c = view.clone();
        let mut mu = Vec::with_capacity(view.rows());
        for i in 0..view.rows() {
            let row = c.row_mut(i);
            let m = row.iter().sum::<f64>() / n as f64;
            row.iter_mut().for_each(|v| *v -= m);
            mu.push(m);
        }
        centered.push(c);
        means.push(mu);
    }
    Ok((centered, means))
}

fn sample_count(views: &[Matrix]) -> Result<usize> {
    let first = views.first().ok_or(Error::EmptyInput("no views"))?;
    let n = first.cols();
    for v in &views[1..] {
        if v.cols() != n {
            return Err(Error::SampleCountMismatch {
                expected: n,
                found: v.cols(),
            });
        }
    }
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    Ok(n)
}

/// The block systems of the multi-view eigenproblem `A·v = λ·B·v`.
#[derive(Debug, Clone)]
pub struct CorrelationMatrices {
    /// Full block matrix of `C_ij`, regularized on the diagonal blocks.
    pub a: Matrix,
    /// Block-diagonal part of `a`.
    pub b: Matrix,
    /// Row offset of each view's block; the final entry is the total size.
    pub offsets: Vec<usize>,
}

impl CorrelationMatrices {
    pub fn block(&self, i: usize, j: usize) -> Matrix {
        let (r0, r1) = (self.offsets[i], self.offsets[i + 1]);
        let (c0, c1) = (self.offsets[j], self.offsets[j + 1]);
        self.a.block(r0, c0, r1 - r0, c1 - c0)
    }
}

/// Unregularized `C_ij = X_i·X_jᵀ / (N − 1)` for already-centred views.
pub fn cross_correlation(xi: &Matrix, xj: &Matrix) -> Result<Matrix> {
    if xi.cols() != xj.cols() {
        return Err(Error::SampleCountMismatch {
            expected: xi.cols(),
            found: xj.cols(),
        });
    }
    let n = xi.cols();
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    let denom = (n - 1) as f64;
    let mut c = Matrix::zeros(xi.rows(), xj.rows());
    for a in 0..xi.rows() {
        let ra = xi.row(a);
        for b in 0..xj.rows() {
            c[(a, b)] = crate::linalg::dot(ra, xj.row(b)) / denom;
        }
    }
    Ok(c)
}

/// Assembles `A` and `B` from centred views, adding `ridges[i]·I` to the
/// diagonal block of view `i` in both matrices.
pub fn correlation_matrices(centered: &[Matrix], ridges: &[f64]) -> Result<CorrelationMatrices> {
    sample_count(centered)?;
    if ridges.len() != centered.len() {
        return Err(Error::dims(format!(
            "{} ridges for {} views",
            ridges.len(),
            centered.len()
        )));
    }
    let mut offsets = vec![0];
    for v in centered {
        offsets.push(offsets.last().unwrap() + v.rows());
    }
    let total = *offsets.last().unwrap();
    let mut a = Matrix::zeros(total, total);
    let mut b = Matrix::zeros(total, total);
    for i in 0..centered.len() {
        for j in i..centered.len() {
            let mut c = if i == j {
                self_correlation(&centered[i])
            } else {
                cross_correlation(&centered[i], &centered[j])?
            };
            if i == j {
                for k in 0..c.rows() {
                    c[(k, k)] += ridges[i];
                }
                b.set_block(offsets[i], offsets[i], &c);
            } else {
                a.set_block(offsets[j], offsets[i], &c.transpose());
            }
            a.set_block(offsets[i], offsets[j], &c);
        }
    }
    Ok(CorrelationMatrices { a, b, offsets })
}

/// `X·Xᵀ/(N − 1)` computed over the upper triangle and mirrored.
fn self_correlation(x: &Matrix) -> Matrix {
    let denom = (x.cols() - 1) as f64;
    let n = x.rows();
    let mut c = Matrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let v = crate::linalg::dot(x.row(a), x.row(b)) / denom;
            c[(a, b)] = v;
            c[(b, a)] = v;
        }
    }
    c
}

fn resolve_ridges(centered: &[Matrix], ridge: Ridge) -> Vec<f64> {
    centered
        .iter()
        .map(|x| match ridge {
            Ridge::Absolute(v) => v,
            Ridge::TraceScaled(_) => ridge.resolve(&self_correlation(x)),
        })
        .collect()
}

/// Full generalized spectrum of the multi-view problem (all `Σ n_i`
/// eigenvalues, descending). Mostly useful for diagnostics and tests.
pub fn full_spectrum(views: &[Matrix], ridge: Ridge) -> Result<Vec<f64>> {
    let (centered, _) = center_views(views)?;
    let ridges = resolve_ridges(&centered, ridge);
    let mats = correlation_matrices(&centered, &ridges)?;
    Ok(generalized_symmetric_eigen(&mats.a, &mats.b)?.eigenvalues)
}

/// `λ^q` with small and negative eigenvalues clamped to zero.
pub fn eigenvalue_weight(lambda: f64, q: f64) -> f64 {
    let l = if lambda < EIGENVALUE_FLOOR {
        0.0
    } else {
        lambda
    };
    if q == 0.0 {
        1.0
    } else if l == 0.0 {
        0.0
    } else {
        l.powf(q)
    }
}

/// A fitted multi-view CCA model. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct CcaModel {
    views: Vec<ViewSpec>,
    projections: Vec<Matrix>,
    eigenvalues: Vec<f64>,
    input_means: Vec<Vec<f64>>,
    embedding_means: Vec<Vec<f64>>,
    config: CcaConfig,
    sample_count: u64,
    weights: Vec<f64>,
}

impl CcaModel {
    /// Fits projections for feature-major views (`views[i]` is `n_i x N`).
    pub fn fit(views: &[Matrix], specs: &[ViewSpec], config: CcaConfig) -> Result<Self> {
        config.validate(specs)?;
        if views.len() != specs.len() {
            return Err(Error::config(format!(
                "{} view matrices for {} view specs",
                views.len(),
                specs.len()
            )));
        }
        for (v, s) in views.iter().zip(specs) {
            if v.rows() != s.dim {
                return Err(Error::dims(format!(
                    "view `{}` declared with {} features but has {}",
                    s.name,
                    s.dim,
                    v.rows()
                )));
            }
        }

        let (centered, input_means) = center_views(views)?;
        let ridges = resolve_ridges(&centered, config.ridge);
        let mats = correlation_matrices(&centered, &ridges)?;
        let EigenDecomposition {
            eigenvalues,
            eigenvectors,
        } = generalized_symmetric_eigen(&mats.a, &mats.b)?;

        let p = config.p;
        let mut projections = Vec::with_capacity(specs.len());
        for i in 0..specs.len() {
            let r0 = mats.offsets[i];
            let ni = specs[i].dim;
            let mut w = eigenvectors.block(r0, 0, ni, p);
            // rescale each column so that wᵀ·C_ii·w = 1 within the view
            let c_ii = mats.b.block(r0, r0, ni, ni);
            for k in 0..p {
                let col = w.column(k);
                let cw = c_ii.matvec(&col)?;
                let q = crate::linalg::dot(&col, &cw);
                if q > f64::MIN_POSITIVE {
                    let s = q.sqrt();
                    for r in 0..ni {
                        w[(r, k)] /= s;
                    }
                }
            }
            projections.push(w);
        }

        let weights: Vec<f64> = eigenvalues[..p]
            .iter()
            .map(|&l| eigenvalue_weight(l, config.q))
            .collect();
        // mean of the training embeddings, by linearity the projection of the
        // residual mean of the centred data
        let embedding_means = centered
            .iter()
            .zip(&projections)
            .map(|(x, w)| {
                let n = x.cols() as f64;
                let resid: Vec<f64> = x.row_iter().map(|r| r.iter().sum::<f64>() / n).collect();
                let proj = w.transpose_matvec(&resid)?;
                Ok(proj.iter().zip(&weights).map(|(v, d)| v * d).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;

        Ok(Self {
            views: specs.to_vec(),
            projections,
            eigenvalues: eigenvalues[..p].to_vec(),
            input_means,
            embedding_means,
            config,
            sample_count: views[0].cols() as u64,
            weights,
        })
    }

    /// Builds a model from explicit parts, validating shapes.
    pub fn from_parts(
        views: Vec<ViewSpec>,
        projections: Vec<Matrix>,
        eigenvalues: Vec<f64>,
        input_means: Vec<Vec<f64>>,
        embedding_means: Vec<Vec<f64>>,
        config: CcaConfig,
        sample_count: u64,
    ) -> Result<Self> {
        if views.is_empty() || views.len() > MAX_VIEWS {
            return Err(Error::config(format!(
                "model must hold 1..={MAX_VIEWS} views"
            )));
        }
        validate_specs(&views)?;
        let p = config.p;
        let m = views.len();
        if projections.len() != m || input_means.len() != m || embedding_means.len() != m {
            return Err(Error::dims("per-view part counts differ from view count"));
        }
        if eigenvalues.len() != p {
            return Err(Error::dims(format!(
                "{} eigenvalues for p = {p}",
                eigenvalues.len()
            )));
        }
        if eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::config("eigenvalues must be sorted descending"));
        }
        for (i, s) in views.iter().enumerate() {
            if p == 0 || p > s.dim {
                return Err(Error::config(format!(
                    "p = {p} exceeds dim of view `{}`",
                    s.name
                )));
            }
            if projections[i].shape() != (s.dim, p)
                || input_means[i].len() != s.dim
                || embedding_means[i].len() != p
            {
                return Err(Error::dims(format!(
                    "parts of view `{}` have wrong shape",
                    s.name
                )));
            }
        }
        let weights = eigenvalues
            .iter()
            .map(|&l| eigenvalue_weight(l, config.q))
            .collect();
        Ok(Self {
            views,
            projections,
            eigenvalues,
            input_means,
            embedding_means,
            config,
            sample_count,
            weights,
        })
    }

    pub fn views(&self) -> &[ViewSpec] {
        &self.views
    }

    pub fn config(&self) -> CcaConfig {
        self.config
    }

    pub fn p(&self) -> usize {
        self.config.p
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `λ_k^q` for each retained component.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sample_count(&self) -> u64 {
        self.sample_count
    }

    pub fn view_index(&self, name: &str) -> Result<usize> {
        self.views
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::UnknownView(name.to_owned()))
    }

    pub fn has_view(&self, name: &str) -> bool {
        self.views.iter().any(|v| v.name == name)
    }

    pub fn projection(&self, view: usize) -> &Matrix {
        &self.projections[view]
    }

    pub fn input_mean(&self, view: usize) -> &[f64] {
        &self.input_means[view]
    }

    pub fn embedding_mean(&self, view: usize) -> &[f64] {
        &self.embedding_means[view]
    }

    /// Number of learned parameters, `p · Σ n_i`.
    pub fn parameter_count(&self) -> usize {
        self.views.iter().map(|v| v.dim).sum::<usize>() * self.config.p
    }

    /// `(W_i·D)ᵀ·(x − μ_i)` with `D = diag(λ^q)`.
    pub fn embed(&self, view: &str, x: &[f64]) -> Result<Vec<f64>> {
        self.embed_index(self.view_index(view)?, x)
    }

    pub fn embed_index(&self, view: usize, x: &[f64]) -> Result<Vec<f64>> {
        let spec = &self.views[view];
        if x.len() != spec.dim {
            return Err(Error::dims(format!(
                "view `{}` expects {} features, got {}",
                spec.name,
                spec.dim,
                x.len()
            )));
        }
        let shifted: Vec<f64> = x
            .iter()
            .zip(&self.input_means[view])
            .map(|(a, m)| a - m)
            .collect();
        let mut e = self.projections[view].transpose_matvec(&shifted)?;
        for (v, w) in e.iter_mut().zip(&self.weights) {
            *v *= w;
        }
        Ok(e)
    }

    /// Embedding minus the stored training mean of that view's embeddings.
    pub fn centered_embedding(&self, view: &str, x: &[f64]) -> Result<Vec<f64>> {
        self.centered_embedding_index(self.view_index(view)?, x)
    }

    pub fn centered_embedding_index(&self, view: usize, x: &[f64]) -> Result<Vec<f64>> {
        let mut e = self.embed_index(view, x)?;
        for (v, m) in e.iter_mut().zip(&self.embedding_means[view]) {
            *v -= m;
        }
        Ok(e)
    }
}
