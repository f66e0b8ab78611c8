//! Small dense complex helpers on top of nalgebra.

use nalgebra::{Cholesky, Dyn, SymmetricEigen};
use num_complex::Complex64;

use crate::{CMatrix, CVector};

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `a^H b`.
pub fn inner(a: &CVector, b: &CVector) -> Complex64 {
    a.dotc(b)
}

/// `a^T b` (no conjugation).
pub fn bilinear(a: &CVector, b: &CVector) -> Complex64 {
    a.dot(b)
}

/// Orthonormal basis of `span{vectors}` by modified Gram-Schmidt with
/// re-orthogonalisation. Directions whose residual falls below `rel_tol`
/// times their original norm are dropped.
pub fn orthonormal_basis(vectors: &[CVector], rel_tol: f64) -> Vec<CVector> {
    let mut basis: Vec<CVector> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let norm0 = v.norm();
        if norm0 == 0.0 {
            continue;
        }
        let mut r = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let proj = inner(q, &r);
                r.axpy(-proj, q, c(1.0));
            }
        }
        let n = r.norm();
        if n > rel_tol * norm0 {
            basis.push(r.unscale(n));
        }
    }
    basis
}

/// Removes the components of `x` along an orthonormal `basis`.
pub fn project_out(x: &CVector, basis: &[CVector]) -> CVector {
    let mut r = x.clone();
    for _ in 0..2 {
        for q in basis {
            let proj = inner(q, &r);
            r.axpy(-proj, q, c(1.0));
        }
    }
    r
}

/// Orthonormal basis of the orthogonal complement of `span{basis}` in
/// `C^m`, as matrix columns.
pub fn complement_basis(basis: &[CVector], m: usize) -> CMatrix {
    let mut candidates: Vec<CVector> = basis.to_vec();
    let k = basis.len();
    for i in 0..m {
        let mut e = CVector::zeros(m);
        e[i] = c(1.0);
        candidates.push(e);
    }
    let full = orthonormal_basis(&candidates, 1e-8);
    let cols: Vec<CVector> = full.into_iter().skip(k).take(m - k).collect();
    CMatrix::from_columns(&cols)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues sorted in
/// descending order with matching eigenvector columns. Non-finite input
/// yields NaN eigenvalues (the iterative solver would not terminate).
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    if !m.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        return (
            vec![f64::NAN; m.nrows()],
            CMatrix::identity(m.nrows(), m.nrows()),
        );
    }
    let h = (m + m.adjoint()) * c(0.5);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    (values, vectors)
}

/// Cholesky factor of a Hermitian matrix, or `None` unless it is positive
/// definite. nalgebra's complex factorisation takes square roots of negative
/// pivots instead of failing, so the pivots are checked here.
pub fn hermitian_cholesky(m: &CMatrix) -> Option<Cholesky<Complex64, Dyn>> {
    let chol = m.clone().cholesky()?;
    let ok = chol
        .l_dirty()
        .diagonal()
        .iter()
        .all(|d| d.re > 0.0 && d.re.is_finite() && d.im.abs() <= 1e-12 * d.re);
    ok.then_some(chol)
}

/// Largest singular value ratio `σ₂/σ₁` (0 for the zero matrix).
pub fn second_singular_ratio(m: &CMatrix) -> f64 {
    let s = m.clone().singular_values();
    let mut v: Vec<f64> = s.iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    if v.is_empty() || v[0] == 0.0 {
        return 0.0;
    }
    v.get(1).copied().unwrap_or(0.0) / v[0]
}
