//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{CMat, RMat, C64};

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(m: &CMat) -> (DVector<f64>, CMat) {
    let se = SymmetricEigen::new(m.clone());
    let n = se.eigenvalues.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let vals = DVector::from_iterator(n, idx.iter().map(|&i| se.eigenvalues[i]));
    let vecs = CMat::from_fn(n, n, |r, c| se.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigvalsh(m: &CMat) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Real symmetric variant of [`eigh`].
pub fn eigh_real(m: &RMat) -> (DVector<f64>, RMat) {
    let se = SymmetricEigen::new(m.clone());
    let n = se.eigenvalues.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let vals = DVector::from_iterator(n, idx.iter().map(|&i| se.eigenvalues[i]));
    let vecs = RMat::from_fn(n, n, |r, c| se.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Largest |m_ij - conj(m_ji)|.
pub fn hermiticity_error(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut e: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            e = e.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    e
}

/// Apply f to the spectrum of a Hermitian matrix.
pub fn hermitian_fn(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (w, u) = eigh(m);
    let d = DMatrix::from_diagonal(&w.map(|x| C64::new(f(x), 0.0)));
    &u * d * u.adjoint()
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Pauli matrices (x, y, z).
pub fn pauli() -> [CMat; 3] {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    [
        CMat::from_row_slice(2, 2, &[z, o, o, z]),
        CMat::from_row_slice(2, 2, &[z, -i, i, z]),
        CMat::from_row_slice(2, 2, &[o, z, z, -o]),
    ]
}

/// τ_a·τ_b on two qubits with Pauli normalization; spectrum {-3, 1, 1, 1}.
pub fn tau_dot_tau() -> CMat {
    let p = pauli();
    let mut m = CMat::zeros(4, 4);
    for s in &p {
        m += kron(s, s);
    }
    m
}

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}
