//! Joint moments of a real multivariate Gaussian via (loop) hafnians.
//!
//! Central moments are hafnians of the replicated covariance; non-central
//! moments are loop hafnians of the replicated covariance with the mean as
//! the loop vector. A seeded Monte-Carlo estimator serves as an independent
//! statistical oracle.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::combinatorial::{lhaf_bruteforce_with_cap, DEFAULT_ENUM_CAP};
use crate::error::{Error, Result};
use crate::genfun::{lemma_lhaf_with_cap, DEFAULT_DEGREE_CAP};
use crate::matrix::{extend_matrix, extend_vector, LoopVector, MultiIndex, SymmetricMatrix};
use crate::parallel::ordered_map;

/// Eigenvalues may undershoot zero by this fraction of the spectral norm
/// before the covariance is rejected; anything above is clipped to zero.
pub const PSD_TOLERANCE_FACTOR: f64 = 1e-10;

/// Monte-Carlo sampling always splits into this many blocks with derived
/// seeds, so estimates do not depend on the thread count.
const MC_BLOCKS: usize = 64;

/// A real Gaussian measure: covariance (validated positive semidefinite,
/// clipped at roundoff scale) and mean.
#[derive(Clone, Debug)]
pub struct GaussianSpec {
    covariance: SymmetricMatrix,
    mean: Vec<f64>,
    /// row-major factor L with K = L·Lᵀ, from the clipped eigensystem
    factor: Vec<f64>,
}

impl GaussianSpec {
    /// Validates and stores a covariance/mean pair.
    ///
    /// The raw grid is midpoint-symmetrized, its eigensystem computed, and
    /// eigenvalues below `-1e-10·‖K‖` rejected; negatives above that floor
    /// are clipped to zero and the covariance rebuilt from the clipped
    /// spectrum.
    pub fn new(covariance: &[Vec<f64>], mean: Vec<f64>) -> Result<Self> {
        let dim = covariance.len();
        for (row, r) in covariance.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::NonSquare {
                    row,
                    len: r.len(),
                    expected: dim,
                });
            }
            for (col, x) in r.iter().enumerate() {
                if !x.is_finite() {
                    return Err(Error::NonFinite { row, col });
                }
            }
        }
        if mean.len() != dim {
            return Err(Error::DimensionMismatch {
                matrix: dim,
                vector: mean.len(),
            });
        }
        if mean.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { row: 0, col: 0 });
        }

        let sym = nalgebra::DMatrix::from_fn(dim, dim, |i, j| {
            (covariance[i][j] + covariance[j][i]) * 0.5
        });
        let eig = sym.clone().symmetric_eigen();
        let norm = eig
            .eigenvalues
            .iter()
            .fold(0.0f64, |acc, &l| acc.max(l.abs()));
        let floor = -PSD_TOLERANCE_FACTOR * norm;
        if let Some(&bad) = eig.eigenvalues.iter().find(|&&l| l < floor) {
            return Err(Error::NotPositiveSemidefinite {
                eigenvalue: bad,
                floor,
            });
        }
        let clipped: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
        let q = &eig.eigenvectors;
        // rebuild from the spectrum only when something was actually clipped;
        // clean inputs pass through with nothing but midpoint symmetrization
        let covariance = if eig.eigenvalues.iter().any(|&l| l < 0.0) {
            let lambda = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(
                clipped.clone(),
            ));
            let rebuilt = q * &lambda * q.transpose();
            let rows: Vec<Vec<Complex64>> = (0..dim)
                .map(|i| {
                    (0..dim)
                        .map(|j| Complex64::new((rebuilt[(i, j)] + rebuilt[(j, i)]) * 0.5, 0.0))
                        .collect()
                })
                .collect();
            SymmetricMatrix::from_rows(&rows, 0.0)?
        } else {
            let rows: Vec<Vec<Complex64>> = (0..dim)
                .map(|i| (0..dim).map(|j| Complex64::new(sym[(i, j)], 0.0)).collect())
                .collect();
            SymmetricMatrix::from_rows(&rows, 0.0)?
        };

        let sqrt_lambda = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(
            clipped.iter().map(|&l| l.sqrt()).collect(),
        ));
        let l = q * sqrt_lambda;
        let mut factor = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                factor.push(l[(i, j)]);
            }
        }

        Ok(Self {
            covariance,
            mean,
            factor,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// The clipped covariance actually used by every computation here.
    pub fn covariance(&self) -> &SymmetricMatrix {
        &self.covariance
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    fn mean_loop_vector(&self) -> LoopVector {
        LoopVector::from_entries(
            self.mean
                .iter()
                .map(|&x| Complex64::new(x, 0.0))
                .collect(),
        )
    }
}

/// How a moment is evaluated; both routes are exposed so tests can pit them
/// against each other.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MomentRoute {
    /// Loop hafnian of the replicated covariance by direct enumeration.
    BruteForce,
    /// Derivative route through the truncated series engine.
    Lemma,
}

fn lhaf_real(value: Complex64) -> f64 {
    // real inputs keep the imaginary component at exactly zero
    debug_assert!(value.im.abs() <= 1e-10 * value.re.abs().max(1.0));
    value.re
}

/// `E[Π X_j^{q_j}]`: the loop hafnian of the replicated covariance with the
/// replicated mean as loop vector.
///
/// Routes to brute force while the replicated dimension is within the
/// enumeration cap, to the derivative route beyond it. The all-zero query is
/// the empty product and yields one.
pub fn gaussian_moment(spec: &GaussianSpec, query: &MultiIndex) -> Result<f64> {
    let route = if query.total() <= DEFAULT_ENUM_CAP {
        MomentRoute::BruteForce
    } else {
        MomentRoute::Lemma
    };
    gaussian_moment_via(spec, query, route)
}

/// [`gaussian_moment`] with an explicit route.
pub fn gaussian_moment_via(
    spec: &GaussianSpec,
    query: &MultiIndex,
    route: MomentRoute,
) -> Result<f64> {
    if query.len() != spec.dim() {
        return Err(Error::LengthMismatch {
            expected: spec.dim(),
            found: query.len(),
        });
    }
    let mean = spec.mean_loop_vector();
    let value = match route {
        MomentRoute::BruteForce => {
            let k = extend_matrix(spec.covariance(), query)?;
            let v = extend_vector(&mean, query)?;
            lhaf_bruteforce_with_cap(&k, &v, DEFAULT_ENUM_CAP)?
        }
        MomentRoute::Lemma => {
            lemma_lhaf_with_cap(spec.covariance(), &mean, query, DEFAULT_DEGREE_CAP)?
        }
    };
    Ok(lhaf_real(value))
}

/// `E[Π (X_j - E X_j)^{q_j}]`: the hafnian of the replicated covariance.
/// Odd-total queries vanish by symmetry and short-circuit to zero.
pub fn central_moment(spec: &GaussianSpec, query: &MultiIndex) -> Result<f64> {
    central_moment_via(
        spec,
        query,
        if query.total() <= DEFAULT_ENUM_CAP {
            MomentRoute::BruteForce
        } else {
            MomentRoute::Lemma
        },
    )
}

/// [`central_moment`] with an explicit route.
pub fn central_moment_via(
    spec: &GaussianSpec,
    query: &MultiIndex,
    route: MomentRoute,
) -> Result<f64> {
    if query.len() != spec.dim() {
        return Err(Error::LengthMismatch {
            expected: spec.dim(),
            found: query.len(),
        });
    }
    if query.total() % 2 != 0 {
        return Ok(0.0);
    }
    let zero_mean = LoopVector::zero(spec.dim());
    let value = match route {
        MomentRoute::BruteForce => {
            let k = extend_matrix(spec.covariance(), query)?;
            let v = extend_vector(&zero_mean, query)?;
            lhaf_bruteforce_with_cap(&k, &v, DEFAULT_ENUM_CAP)?
        }
        MomentRoute::Lemma => {
            lemma_lhaf_with_cap(spec.covariance(), &zero_mean, query, DEFAULT_DEGREE_CAP)?
        }
    };
    Ok(lhaf_real(value))
}

#[derive(Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Monte-Carlo estimate of `E[Π X_j^{q_j}]` with its standard error.
///
/// Draws `samples` vectors `mean + L·ξ` with standard-normal `ξ` from
/// ChaCha8 streams derived from `seed`; the block structure is fixed, so the
/// estimate depends only on the seed, never on the thread count.
pub fn mc_moment_estimate(
    spec: &GaussianSpec,
    query: &MultiIndex,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if query.len() != spec.dim() {
        return Err(Error::LengthMismatch {
            expected: spec.dim(),
            found: query.len(),
        });
    }
    let dim = spec.dim();
    let base = samples / MC_BLOCKS;
    let remainder = samples % MC_BLOCKS;
    let blocks: Vec<(usize, usize)> = (0..MC_BLOCKS)
        .map(|b| (b, base + usize::from(b < remainder)))
        .collect();

    let powers: Vec<i32> = query.counts().iter().map(|&n| n as i32).collect();
    let stats = ordered_map(blocks, |(block, count)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(block as u64 + 1);
        let mut sum = Kahan::default();
        let mut sum_sq = Kahan::default();
        let mut xi = vec![0.0f64; dim];
        for _ in 0..count {
            for slot in xi.iter_mut() {
                *slot = StandardNormal.sample(&mut rng);
            }
            let mut w = 1.0f64;
            for i in 0..dim {
                if powers[i] == 0 {
                    continue;
                }
                let mut x = spec.mean[i];
                for (j, &g) in xi.iter().enumerate() {
                    x += spec.factor[i * dim + j] * g;
                }
                w *= x.powi(powers[i]);
            }
            sum.add(w);
            sum_sq.add(w * w);
        }
        (sum.sum, sum_sq.sum)
    });

    let mut total = Kahan::default();
    let mut total_sq = Kahan::default();
    for (s, ss) in stats {
        total.add(s);
        total_sq.add(ss);
    }
    let n = samples as f64;
    let estimate = total.sum / n;
    let stderr = if samples >= 2 {
        let variance = ((total_sq.sum - n * estimate * estimate) / (n - 1.0)).max(0.0);
        (variance / n).sqrt()
    } else {
        f64::INFINITY
    };
    Ok((estimate, stderr))
}
