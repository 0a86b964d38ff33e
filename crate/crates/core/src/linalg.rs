//! Small dense helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Accumulates `w * x x^T` into the row-major `p x p` buffer `acc`.
#[inline]
pub(crate) fn add_outer(acc: &mut [f64], x: &[f64], w: f64) {
    let p = x.len();
    for i in 0..p {
        let wi = w * x[i];
        let row = &mut acc[i * p..(i + 1) * p];
        for j in 0..p {
            row[j] += wi * x[j];
        }
    }
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Inverse of a symmetric matrix. Fails with the eigenvector of the
/// smallest-magnitude eigenvalue when the matrix is numerically singular.
pub fn sym_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let eig = m.clone().symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let (imin, vmin) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, v)| (i, *v))
        .unwrap_or((0, 0.0));
    if n == 0 || !scale.is_finite() || vmin.abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
        let dir: Vec<String> = eig.eigenvectors.column(imin).iter().map(|x| format!("{x:.4}")).collect();
        return Err(Error::Inference(format!(
            "{what} is singular (eigenvalue {vmin:.3e}) along direction [{}]",
            dir.join(", ")
        )));
    }
    let inv_vals = eig.eigenvalues.map(|v| 1.0 / v);
    let mut inv = &eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose();
    symmetrize(&mut inv);
    Ok(inv)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.iter().fold(f64::INFINITY, |a, &v| a.min(v))
}

pub fn from_row_major(p: usize, data: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(p, p, data)
}

pub fn dvec(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

/// Solves `m x = b` for symmetric positive-definite `m` via Cholesky.
pub fn spd_solve(m: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    m.clone().cholesky().map(|c| c.solve(b))
}
