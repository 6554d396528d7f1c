//! Small dense linear-algebra and sampling helpers shared by the analysis
//! modules.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Random generator for sample stream `stream` under a user seed.
///
/// Every sampling loop in the crate draws from ChaCha8 with the user seed as
/// key and the task index as stream id, so results do not depend on the
/// order in which parallel tasks finish.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Uniform point on the unit sphere `S^{n-1}` (normalized Gaussian).
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    loop {
        let v = gaussian_vector(rng, n);
        let norm = v.norm();
        if norm > 1e-300 {
            return v / norm;
        }
    }
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of `diag(R)` pushed into `Q`.
pub fn haar_orthogonal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_iterator(n, n, (0..n * n).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Eigenvalues (ascending) and matching eigenvector columns of a symmetric
/// matrix.
pub fn sym_eigen_sorted(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn sym_eigenvalues_sorted(m: &DMatrix<f64>) -> Vec<f64> {
    let mut values: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Determinant through an LU factorization.
pub fn determinant(m: &DMatrix<f64>) -> f64 {
    m.clone().lu().determinant()
}

/// `|det m| / prod_j |m_j|`, which lies in `[0, 1]` by Hadamard's inequality.
pub fn scaled_determinant(m: &DMatrix<f64>) -> f64 {
    let mut scale = 1.0;
    for col in m.column_iter() {
        let norm = col.norm();
        if norm == 0.0 {
            return 0.0;
        }
        scale *= norm;
    }
    determinant(m).abs() / scale
}

/// Symmetrized outer product `a b^T + b a^T`.
pub fn sym_outer(a: &DVector<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    a * b.transpose() + b * a.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_matrix_is_orthogonal() {
        let mut rng = substream(7, 0);
        for n in [1, 3, 6] {
            let q = haar_orthogonal(&mut rng, n);
            let defect = &q.transpose() * &q - DMatrix::identity(n, n);
            assert!(max_abs(&defect) < 1e-12);
        }
    }

    #[test]
    fn substreams_are_reproducible_and_distinct() {
        let a = gaussian_vector(&mut substream(1, 3), 4);
        let b = gaussian_vector(&mut substream(1, 3), 4);
        let c = gaussian_vector(&mut substream(1, 4), 4);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn sorted_eigenpairs_reconstruct() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, -1.0, 0.5, 0.0, 0.5, 3.0]);
        let (values, vectors) = sym_eigen_sorted(&m);
        assert!(values.windows(2).all(|w| w[0] <= w[1]));
        for (k, &lambda) in values.iter().enumerate() {
            let v = vectors.column(k).into_owned();
            assert!((&m * &v - v * lambda).norm() < 1e-12);
        }
    }

    #[test]
    fn hadamard_ratio_bounds() {
        let id = DMatrix::<f64>::identity(4, 4);
        assert!((scaled_determinant(&id) - 1.0).abs() < 1e-15);
        let sing = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(scaled_determinant(&sing) < 1e-15);
    }
}
