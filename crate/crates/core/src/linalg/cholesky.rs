use super::{Matrix, SYMMETRY_TOLERANCE};
use crate::error::{Error, Result};

/// Pivots at or below this value are treated as a failed factorization.
const MIN_PIVOT: f64 = 1e-300;

/// Cholesky factor `L` (lower triangular, positive diagonal) with `L·Lᵀ = M`.
pub fn cholesky(m: &Matrix) -> Result<Matrix> {
    let m = m.symmetrized(SYMMETRY_TOLERANCE)?;
    let n = m.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let lj = &l.row(j)[..j];
        let pivot = m[(j, j)] - lj.iter().map(|v| v * v).sum::<f64>();
        if !(pivot > MIN_PIVOT) {
            return Err(Error::NotPositiveDefinite { index: j, pivot });
        }
        let d = pivot.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let s: f64 = l.row(i)[..j]
                .iter()
                .zip(&l.row(j)[..j])
                .map(|(a, b)| a * b)
                .sum();
            l[(i, j)] = (m[(i, j)] - s) / d;
        }
    }
    Ok(l)
}

/// Solves `L·x = b` in place for lower-triangular `L`.
pub(crate) fn forward_substitute(l: &Matrix, b: &mut [f64]) {
    let n = l.rows();
    for i in 0..n {
        let row = l.row(i);
        let s: f64 = row[..i].iter().zip(&b[..i]).map(|(a, x)| a * x).sum();
        b[i] = (b[i] - s) / row[i];
    }
}

/// Solves `Lᵀ·x = b` in place for lower-triangular `L`.
pub(crate) fn backward_substitute_transposed(l: &Matrix, b: &mut [f64]) {
    let n = l.rows();
    for i in (0..n).rev() {
        b[i] /= l[(i, i)];
        let xi = b[i];
        // column i of Lᵀ above the diagonal is row i of L left of the diagonal
        for (bk, &lik) in b[..i].iter_mut().zip(&l.row(i)[..i]) {
            *bk -= lik * xi;
        }
    }
}
