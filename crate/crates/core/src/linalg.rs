//! Small dense helpers shared by the oracle and the graph module.

use nalgebra::{DMatrix, SymmetricEigen};

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted ascending.
/// Columns of the returned matrix are the matching eigenvectors.
pub(crate) fn sym_eigen_sorted(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Extreme eigenvalues `(min, max)` of a symmetric positive semidefinite matrix.
pub(crate) fn psd_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(m.clone());
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in eig.eigenvalues.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo.max(0.0), hi.max(0.0))
}

/// Pseudo-inverse of a symmetric PSD matrix; eigenvalues at or below
/// `rel_cutoff * lambda_max` are treated as zero.
pub(crate) fn pinv_psd(m: &DMatrix<f64>, rel_cutoff: f64) -> DMatrix<f64> {
    let (values, vectors) = sym_eigen_sorted(m);
    let n = m.nrows();
    let top = values.last().copied().unwrap_or(0.0);
    let mut out = DMatrix::zeros(n, n);
    if top <= 0.0 {
        return out;
    }
    for (j, &lam) in values.iter().enumerate() {
        if lam > rel_cutoff * top {
            let v = vectors.column(j);
            out += (v * v.transpose()) / lam;
        }
    }
    out
}

pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

