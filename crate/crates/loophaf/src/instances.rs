//! Seeded random test instances.
//!
//! Every generator draws from a ChaCha8 stream, so an instance is fully
//! reproducible from its seed. The default matrix distribution has
//! independent real and imaginary parts uniform on `[-scale, scale]` before
//! midpoint symmetrization.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::matrix::{LoopVector, SymmetricMatrix};

/// The crate-wide seeded generator.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform(rng: &mut ChaCha8Rng, scale: f64) -> f64 {
    rng.gen_range(-scale..=scale)
}

/// Random complex symmetric matrix with entries bounded by `scale` in each
/// component.
pub fn random_symmetric(dim: usize, rng: &mut ChaCha8Rng, scale: f64) -> SymmetricMatrix {
    let raw: Vec<Vec<Complex64>> = (0..dim)
        .map(|_| {
            (0..dim)
                .map(|_| Complex64::new(uniform(rng, scale), uniform(rng, scale)))
                .collect()
        })
        .collect();
    SymmetricMatrix::from_rows(&raw, f64::INFINITY).expect("finite random entries")
}

/// Random complex loop vector with components bounded by `scale`.
pub fn random_loop_vector(dim: usize, rng: &mut ChaCha8Rng, scale: f64) -> LoopVector {
    LoopVector::from_entries(
        (0..dim)
            .map(|_| Complex64::new(uniform(rng, scale), uniform(rng, scale)))
            .collect(),
    )
}

/// Rank-deficient complex symmetric matrix: `A·Aᵀ` for a random `dim × rank`
/// factor, rescaled so the largest entry magnitude is `scale`.
pub fn random_singular_symmetric(
    dim: usize,
    rank: usize,
    rng: &mut ChaCha8Rng,
    scale: f64,
) -> SymmetricMatrix {
    assert!(rank < dim, "rank must be strictly below the dimension");
    let a: Vec<Vec<Complex64>> = (0..dim)
        .map(|_| {
            (0..rank)
                .map(|_| Complex64::new(uniform(rng, 1.0), uniform(rng, 1.0)))
                .collect()
        })
        .collect();
    let mut rows = vec![vec![Complex64::default(); dim]; dim];
    let mut max_abs = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            // non-conjugate product keeps the matrix symmetric, not Hermitian
            let mut acc = Complex64::default();
            for k in 0..rank {
                acc += a[i][k] * a[j][k];
            }
            rows[i][j] = acc;
            max_abs = max_abs.max(acc.re.abs()).max(acc.im.abs());
        }
    }
    if max_abs > 0.0 {
        let f = scale / max_abs;
        for row in rows.iter_mut() {
            for e in row.iter_mut() {
                *e *= f;
            }
        }
    }
    SymmetricMatrix::from_rows(&rows, 1e-12).expect("product matrix is symmetric")
}

/// Real symmetric matrix `Q·D·Qᵀ` with deliberately repeated eigenvalues,
/// entries bounded by `scale` (the spectral radius bounds every entry).
pub fn random_repeated_eigenvalue_symmetric(
    dim: usize,
    rng: &mut ChaCha8Rng,
    scale: f64,
) -> SymmetricMatrix {
    let b = DMatrix::from_fn(dim, dim, |_, _| uniform(rng, 1.0));
    let q = b.qr().q();
    let mut eigenvalues = Vec::with_capacity(dim);
    while eigenvalues.len() < dim {
        let lambda = uniform(rng, scale * 0.8);
        eigenvalues.push(lambda);
        if eigenvalues.len() < dim {
            eigenvalues.push(lambda);
        }
    }
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(eigenvalues));
    let s = &q * d * q.transpose();
    let rows: Vec<Vec<Complex64>> = (0..dim)
        .map(|i| (0..dim).map(|j| Complex64::new(s[(i, j)], 0.0)).collect())
        .collect();
    SymmetricMatrix::from_rows(&rows, 1e-10).expect("roundoff-level asymmetry")
}

/// Random real positive semidefinite matrix `B·Bᵀ` with `B` entries uniform
/// on `[-scale, scale]`.
pub fn random_psd_covariance(dim: usize, rng: &mut ChaCha8Rng, scale: f64) -> Vec<Vec<f64>> {
    let b: Vec<Vec<f64>> = (0..dim)
        .map(|_| (0..dim).map(|_| uniform(rng, scale)).collect())
        .collect();
    (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| (0..dim).map(|k| b[i][k] * b[j][k]).sum())
                .collect()
        })
        .collect()
}
