//! Symmetric and generalized symmetric eigensolvers.
//!
//! The standard problem is solved with cyclic Jacobi rotations. The
//! generalized problem `A·v = λ·B·v` is reduced to standard form through the
//! Cholesky factor of `B` and back-transformed afterwards.

use super::cholesky::{backward_substitute_transposed, cholesky, forward_substitute};
use super::{Matrix, SYMMETRY_TOLERANCE};
use crate::error::{Error, Result};

/// Maximum number of full Jacobi sweeps.
pub const MAX_SWEEPS: usize = 100;

/// Converged once the off-diagonal Frobenius norm drops below this fraction of ‖M‖_F.
pub const OFF_DIAGONAL_TOLERANCE: f64 = 1e-12;

/// Eigenpairs sorted by descending eigenvalue; column `k` of `eigenvectors`
/// belongs to `eigenvalues[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl EigenDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.eigenvectors.column(k)
    }
}

/// Eigendecomposition of a symmetric matrix.
///
/// Eigenvectors are orthonormal, sorted by descending eigenvalue, and signed
/// so that their largest-magnitude entry is positive (lowest index wins ties).
pub fn symmetric_eigen(m: &Matrix) -> Result<EigenDecomposition> {
    let m = m.symmetrized(SYMMETRY_TOLERANCE)?;
    let (values, vectors_t) = jacobi(m)?;
    Ok(assemble(values, vectors_t))
}

/// Solves `A·v = λ·B·v` for symmetric `A` and symmetric positive-definite `B`.
///
/// Returned eigenvectors are B-orthonormal (`VᵀBV = I`).
pub fn generalized_symmetric_eigen(a: &Matrix, b: &Matrix) -> Result<EigenDecomposition> {
    if !a.is_square() || !b.is_square() || a.rows() != b.rows() {
        return Err(Error::dims(format!(
            "generalized eigenproblem needs square matrices of equal size, got {}x{} and {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let a = a.symmetrized(SYMMETRY_TOLERANCE)?;
    let l = cholesky(b)?;
    let whitened = whiten(&a, &l);
    let (values, mut vectors_t) = jacobi(whitened)?;
    // v = L⁻ᵀ·u, one eigenvector per row of `vectors_t`
    for k in 0..vectors_t.rows() {
        backward_substitute_transposed(&l, vectors_t.row_mut(k));
    }
    Ok(assemble(values, vectors_t))
}

/// `L⁻¹·A·L⁻ᵀ` for symmetric `A`, exactly symmetrized.
pub(crate) fn whiten(a: &Matrix, l: &Matrix) -> Matrix {
    let n = a.rows();
    // Y = L⁻¹A, then (L⁻¹AL⁻ᵀ) = L⁻¹Yᵀ since A is symmetric. Work on transposes
    // so every triangular solve runs over a contiguous row.
    let mut yt = a.clone(); // columns of A == rows of A
    for i in 0..n {
        forward_substitute(l, yt.row_mut(i));
    }
    // yt now holds (L⁻¹A)ᵀ row-wise: row i = L⁻¹·A[:, i]
    let mut c = yt.transpose(); // rows of C' = rows of L⁻¹A = columns of Yᵀ
    for i in 0..n {
        forward_substitute(l, c.row_mut(i));
    }
    // c row i = L⁻¹·(row i of L⁻¹A)ᵀ, i.e. c = (L⁻¹AL⁻ᵀ)ᵀ
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = avg;
            c[(j, i)] = avg;
        }
    }
    c
}

/// Cyclic Jacobi on a symmetric matrix. Returns the unsorted diagonal and the
/// eigenvectors stored as rows.
///
/// Each sweep visits every pair `(p, q)` once, in round-robin order: a round
/// holds `n/2` disjoint pairs whose rotations commute, so the row updates and
/// the column updates of a whole round can each be applied in one pass over
/// contiguous rows.
fn jacobi(mut a: Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = a.rows();
    let mut vt = Matrix::identity(n);
    let scale = a.frobenius_norm();
    if n == 1 || scale == 0.0 {
        return Ok((a.diagonal(), vt));
    }
    let target = OFF_DIAGONAL_TOLERANCE * scale;
    // an odd order gets a phantom player that sits out its pairing
    let players_len = n + n % 2;
    let mut players: Vec<usize> = (0..players_len).collect();
    let mut round: Vec<Rotation> = Vec::with_capacity(players_len / 2);

    for _sweep in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) <= target {
            return Ok((a.diagonal(), vt));
        }
        for _ in 0..players_len - 1 {
            round.clear();
            for i in 0..players_len / 2 {
                let (x, y) = (players[i], players[players_len - 1 - i]);
                if x >= n || y >= n {
                    continue;
                }
                let (p, q) = (x.min(y), x.max(y));
                if let Some(r) = Rotation::annihilating(&mut a, p, q) {
                    round.push(r);
                }
            }
            for r in &round {
                rotate_rows(&mut a, r.p, r.q, r.c, r.s);
                rotate_rows(&mut vt, r.p, r.q, r.c, r.s);
            }
            for k in 0..n {
                let row = a.row_mut(k);
                for r in &round {
                    let (x, y) = (row[r.p], row[r.q]);
                    row[r.p] = r.c * x - r.s * y;
                    row[r.q] = r.s * x + r.c * y;
                }
            }
            for r in &round {
                a[(r.p, r.p)] = r.app - r.t * r.apq;
                a[(r.q, r.q)] = r.aqq + r.t * r.apq;
                a[(r.p, r.q)] = 0.0;
                a[(r.q, r.p)] = 0.0;
            }
            players[1..].rotate_right(1);
        }
    }
    if off_diagonal_norm(&a) > target {
        return Err(Error::NoConvergence { sweeps: MAX_SWEEPS });
    }
    Ok((a.diagonal(), vt))
}

/// Plane rotation zeroing `a[p][q]`, with the pre-rotation entries it needs.
struct Rotation {
    p: usize,
    q: usize,
    c: f64,
    s: f64,
    t: f64,
    app: f64,
    aqq: f64,
    apq: f64,
}

impl Rotation {
    fn annihilating(a: &mut Matrix, p: usize, q: usize) -> Option<Self> {
        let apq = a[(p, q)];
        if apq == 0.0 {
            return None;
        }
        let app = a[(p, p)];
        let aqq = a[(q, q)];
        let theta = (aqq - app) / (2.0 * apq);
        let t = if theta.is_finite() {
            theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
        } else {
            0.5 / theta
        };
        if t == 0.0 {
            // the rotation is the identity in floating point; drop the entry
            a[(p, q)] = 0.0;
            a[(q, p)] = 0.0;
            return None;
        }
        let c = 1.0 / (t * t + 1.0).sqrt();
        Some(Self {
            p,
            q,
            c,
            s: t * c,
            t,
            app,
            aqq,
            apq,
        })
    }
}

fn rotate_rows(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let cols = m.cols();
    let data = m.as_mut_slice();
    let (head, tail) = data.split_at_mut(q * cols);
    let rp = &mut head[p * cols..(p + 1) * cols];
    let rq = &mut tail[..cols];
    for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            sum += a[(i, j)] * a[(i, j)];
        }
    }
    (2.0 * sum).sqrt()
}

/// Sorts descending, fixes signs, and lays eigenvectors out as columns.
fn assemble(values: Vec<f64>, vectors_t: Matrix) -> EigenDecomposition {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));

    let mut eigenvectors = Matrix::zeros(vectors_t.cols(), n);
    let mut eigenvalues = Vec::with_capacity(n);
    for (k, &src) in order.iter().enumerate() {
        eigenvalues.push(values[src]);
        let v = vectors_t.row(src);
        let sign = sign_of_dominant(v);
        for (i, &x) in v.iter().enumerate() {
            eigenvectors[(i, k)] = sign * x;
        }
    }
    EigenDecomposition {
        eigenvalues,
        eigenvectors,
    }
}

fn sign_of_dominant(v: &[f64]) -> f64 {
    let mut best = 0.0_f64;
    let mut sign = 1.0;
    for &x in v {
        if x.abs() > best {
            best = x.abs();
            sign = if x < 0.0 { -1.0 } else { 1.0 };
        }
    }
    sign
}
