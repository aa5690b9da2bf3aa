//! The two series routes to loop hafnians, and the harness that plays them
//! against the enumeration oracle.
//!
//! Derivative route: the loop hafnian of an extended `(S, v)` pair equals the
//! mixed partial derivative of `exp(x'Sx/2 + v'x)` at the origin, i.e. a
//! Taylor coefficient of the truncated series times the factorials of the
//! counts. One series at total degree `Σ n_j` serves every count vector up to
//! that total.
//!
//! Generating-function route: for an even-dimensional `(S, v)` the single
//! series `exp(v'(1-ZS)^{-1}Zv/2) / sqrt(det(1-ZS))` in `m = dim/2` variables
//! carries the loop hafnians of *all* paired extensions as its scaled
//! coefficients, where `Z` is the block-counter-diagonal matrix holding each
//! variable twice. The square-root branch is fixed by a constant term of +1.
//!
//! `verify_master_theorem` evaluates both routes and the brute-force sum on
//! every count vector up to a requested order and reports the deviations.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::combinatorial::{lhaf_bruteforce_with_cap, DEFAULT_ENUM_CAP};
use crate::error::{Error, Result};
use crate::matrix::{paired_extension, LoopVector, MultiIndex, SymmetricMatrix};
use crate::parallel::ordered_map;
use crate::series::{SeriesMatrix, TruncatedSeries};

/// Default bound on the total series degree of the derivative route.
pub const DEFAULT_DEGREE_CAP: usize = 24;

/// Below this magnitude of the reference value, deviations are judged
/// absolutely instead of relatively; loop hafnians can legitimately vanish
/// through sign cancellation, where relative error is meaningless.
pub const ABS_TOL_FLOOR: f64 = 1e-6;

const COND_CAP: f64 = 1e12;

/// `exp(x'Sx/2 + v'x)` truncated at `max_total`, in `dim(S)` variables.
///
/// Loop hafnians of every extension of `(S, v)` with `Σ n_j ≤ max_total` are
/// coefficients of this one series, scaled by `Π n_j!`.
pub fn lemma_generating_series(
    s: &SymmetricMatrix,
    v: &LoopVector,
    max_total: usize,
) -> Result<TruncatedSeries> {
    if v.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            matrix: s.dim(),
            vector: v.dim(),
        });
    }
    let mu = s.dim();
    check_series_size(mu, max_total)?;
    let mut p = TruncatedSeries::zero(mu, max_total);
    let mut e = vec![0u32; mu];
    for i in 0..mu {
        for j in i..mu {
            let coeff = if i == j {
                s.get(i, i) * 0.5
            } else {
                s.get(i, j)
            };
            if coeff.re == 0.0 && coeff.im == 0.0 {
                continue;
            }
            e[i] += 1;
            e[j] += 1;
            p.set_monomial(&e, coeff);
            e[i] = 0;
            e[j] = 0;
        }
        let vi = v.get(i);
        if vi.re != 0.0 || vi.im != 0.0 {
            e[i] = 1;
            p.set_monomial(&e, vi);
            e[i] = 0;
        }
    }
    p.exp()
}

/// Loop hafnian of the `(S, v)` extension with the given counts, via the
/// derivative route.
pub fn lemma_lhaf(s: &SymmetricMatrix, v: &LoopVector, counts: &MultiIndex) -> Result<Complex64> {
    lemma_lhaf_with_cap(s, v, counts, DEFAULT_DEGREE_CAP)
}

/// [`lemma_lhaf`] with an explicit total-degree cap.
pub fn lemma_lhaf_with_cap(
    s: &SymmetricMatrix,
    v: &LoopVector,
    counts: &MultiIndex,
    cap: usize,
) -> Result<Complex64> {
    if counts.len() != s.dim() {
        return Err(Error::LengthMismatch {
            expected: s.dim(),
            found: counts.len(),
        });
    }
    let total = counts.total();
    if total > cap {
        return Err(Error::DegreeCapExceeded { degree: total, cap });
    }
    let series = lemma_generating_series(s, v, total)?;
    Ok(series.coefficient(counts)? * counts.factorial_product())
}

fn check_series_size(nvars: usize, max_degree: usize) -> Result<()> {
    if TruncatedSeries::<Complex64>::dense_size(nvars, max_degree).is_none() {
        return Err(Error::DegreeCapExceeded {
            degree: max_degree,
            cap: DEFAULT_DEGREE_CAP,
        });
    }
    Ok(())
}

/// The block-counter-diagonal variable matrix: `Z[i, m+i] = Z[m+i, i] = z_i`.
fn z_series_matrix(m: usize, max_degree: usize) -> SeriesMatrix {
    let mut z = SeriesMatrix::zero(2 * m, m, max_degree);
    for i in 0..m {
        let zi = TruncatedSeries::variable(m, max_degree, i);
        z.set(i, m + i, zi.clone());
        z.set(m + i, i, zi);
    }
    z
}

fn constant_series_matrix(s: &SymmetricMatrix, nvars: usize, max_degree: usize) -> SeriesMatrix {
    let n = s.dim();
    let mut out = SeriesMatrix::zero(n, nvars, max_degree);
    for i in 0..n {
        for j in 0..n {
            let e = s.get(i, j);
            if e.re != 0.0 || e.im != 0.0 {
                out.set(i, j, TruncatedSeries::constant(nvars, max_degree, e));
            }
        }
    }
    out
}

/// The generating-function series `exp(v'(1-ZS)^{-1}Zv/2) / sqrt(det(1-ZS))`
/// in `m = dim/2` variables, truncated at `order`.
///
/// The determinant is an exact polynomial of total degree ≤ `dim`, so the
/// construction runs at working order `max(order, dim)` and truncates back at
/// the end; the result is bit-identical either way.
pub fn master_lhs_series(
    s: &SymmetricMatrix,
    v: &LoopVector,
    order: usize,
) -> Result<TruncatedSeries> {
    if s.dim() % 2 != 0 {
        return Err(Error::OddDimension { dim: s.dim() });
    }
    if v.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            matrix: s.dim(),
            vector: v.dim(),
        });
    }
    let m = s.dim() / 2;
    let work = order.max(s.dim());
    check_series_size(m, work)?;

    let z = z_series_matrix(m, work);
    let s_const = constant_series_matrix(s, m, work);
    let zs = z.mul(&s_const)?;

    let id = SeriesMatrix::identity(2 * m, m, work);
    let det = id.sub(&zs)?.det()?;
    let det_inv_sqrt = det.inv_sqrt()?;

    // (1 - ZS)^{-1} Z as the exact truncated Neumann sum, then v'(.)v / 2
    let resolvent_z = zs.neumann_inverse_times(&z)?;
    let mut quad = TruncatedSeries::zero(m, work);
    for i in 0..2 * m {
        let vi = v.get(i);
        if vi.re == 0.0 && vi.im == 0.0 {
            continue;
        }
        for j in 0..2 * m {
            let vj = v.get(j);
            if vj.re == 0.0 && vj.im == 0.0 {
                continue;
            }
            let entry = resolvent_z.get(i, j);
            if entry.is_zero() {
                continue;
            }
            quad = quad.add(&entry.scale(&(vi * vj * 0.5)))?;
        }
    }

    let lhs = quad.exp()?.mul(&det_inv_sqrt)?;
    Ok(lhs.truncate(order))
}

/// Loop hafnians of every paired extension with `Σ n_j ≤ order`, read off the
/// generating function in one pass.
#[derive(Clone, Debug, PartialEq)]
pub struct LhafBatch {
    m: usize,
    order: usize,
    values: BTreeMap<MultiIndex, Complex64>,
}

impl LhafBatch {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self, counts: &MultiIndex) -> Option<Complex64> {
        self.values.get(counts).copied()
    }

    /// Entries in graded-lex order of the count vectors.
    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, &Complex64)> {
        self.values.iter()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Evaluates the generating function and scales each coefficient by
/// `Π n_j!`; the all-zero count vector always carries the value one.
pub fn lhaf_batch(s: &SymmetricMatrix, v: &LoopVector, order: usize) -> Result<LhafBatch> {
    let lhs = master_lhs_series(s, v, order)?;
    let m = s.dim() / 2;
    let mut values = BTreeMap::new();
    for counts in MultiIndex::all_up_to(m, order) {
        let value = lhs.coefficient(&counts)? * counts.factorial_product();
        values.insert(counts, value);
    }
    Ok(LhafBatch { m, order, values })
}

/// One count vector compared across the three routes.
#[derive(Clone, Debug)]
pub struct VerificationRecord {
    pub counts: MultiIndex,
    pub genfun: Complex64,
    pub lemma: Complex64,
    pub brute: Complex64,
    /// `|genfun - brute|`
    pub genfun_abs_dev: f64,
    /// deviation metric: relative to `|brute|`, or absolute below the floor
    pub genfun_dev: f64,
    pub lemma_abs_dev: f64,
    pub lemma_dev: f64,
}

/// Wall-clock time spent in each route during verification.
#[derive(Clone, Copy, Debug, Default)]
pub struct RouteTimings {
    pub genfun: Duration,
    pub lemma: Duration,
    pub brute: Duration,
}

#[derive(Clone, Debug)]
pub struct VerificationReport {
    pub order: usize,
    pub tolerance: f64,
    pub records: Vec<VerificationRecord>,
    pub max_deviation: f64,
    pub passed: bool,
    pub timings: RouteTimings,
}

fn deviation_metric(value: Complex64, reference: Complex64, abs_floor: f64) -> (f64, f64) {
    let abs = (value - reference).norm();
    let metric = if reference.norm() < abs_floor {
        abs
    } else {
        abs / reference.norm()
    };
    (abs, metric)
}

/// Compares the generating-function batch, the derivative route, and the
/// brute-force sum on every count vector with `Σ n_j ≤ order`.
///
/// The brute force runs on extended matrices of dimension `2·Σ n_j`, so
/// `2·order` must stay within the enumeration cap.
pub fn verify_master_theorem(
    s: &SymmetricMatrix,
    v: &LoopVector,
    order: usize,
    tolerance: f64,
) -> Result<VerificationReport> {
    verify_master_theorem_with_floor(s, v, order, tolerance, ABS_TOL_FLOOR)
}

/// [`verify_master_theorem`] with an explicit absolute-deviation floor.
pub fn verify_master_theorem_with_floor(
    s: &SymmetricMatrix,
    v: &LoopVector,
    order: usize,
    tolerance: f64,
    abs_floor: f64,
) -> Result<VerificationReport> {
    if 2 * order > DEFAULT_ENUM_CAP {
        return Err(Error::DimensionCapExceeded {
            dim: 2 * order,
            cap: DEFAULT_ENUM_CAP,
        });
    }
    let m = s.dim() / 2;

    let t = Instant::now();
    let batch = lhaf_batch(s, v, order)?;
    let genfun_time = t.elapsed();

    let indices = MultiIndex::all_up_to(m, order);

    let t = Instant::now();
    let lemma_series = lemma_generating_series(s, v, 2 * order)?;
    let lemma_values: Vec<Complex64> = indices
        .iter()
        .map(|counts| {
            let doubled = counts.doubled();
            Ok(lemma_series.coefficient(&doubled)? * doubled.factorial_product())
        })
        .collect::<Result<_>>()?;
    let lemma_time = t.elapsed();

    let t = Instant::now();
    let brute_values: Vec<Complex64> = ordered_map(indices.clone(), |counts| {
        let (es, ev) = paired_extension(s, v, &counts)?;
        lhaf_bruteforce_with_cap(&es, &ev, DEFAULT_ENUM_CAP)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let brute_time = t.elapsed();

    let mut records = Vec::with_capacity(indices.len());
    let mut max_deviation = 0.0f64;
    for (k, counts) in indices.into_iter().enumerate() {
        let genfun = batch.value(&counts).expect("batch covers every index");
        let lemma = lemma_values[k];
        let brute = brute_values[k];
        let (genfun_abs_dev, genfun_dev) = deviation_metric(genfun, brute, abs_floor);
        let (lemma_abs_dev, lemma_dev) = deviation_metric(lemma, brute, abs_floor);
        max_deviation = max_deviation.max(genfun_dev).max(lemma_dev);
        records.push(VerificationRecord {
            counts,
            genfun,
            lemma,
            brute,
            genfun_abs_dev,
            genfun_dev,
            lemma_abs_dev,
            lemma_dev,
        });
    }

    Ok(VerificationReport {
        order,
        tolerance,
        passed: max_deviation <= tolerance,
        max_deviation,
        records,
        timings: RouteTimings {
            genfun: genfun_time,
            lemma: lemma_time,
            brute: brute_time,
        },
    })
}

fn infinity_norm(m: &DMatrix<Complex64>) -> f64 {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn numeric_z(m: usize, z: &[Complex64]) -> DMatrix<Complex64> {
    let n = 2 * m;
    let mut out = DMatrix::zeros(n, n);
    for (i, &zi) in z.iter().enumerate() {
        out[(i, m + i)] = zi;
        out[(m + i, i)] = zi;
    }
    out
}

/// Numeric check of the resolvent identity
/// `S⁻¹ - S⁻¹(S⁻¹ - Z)⁻¹S⁻¹ = -(1 - ZS)⁻¹Z`
/// at concrete small `z` values; returns the maximum entrywise deviation.
///
/// `S` must be numerically invertible and `Z·S` contractive; the spectral
/// radius is estimated as `‖(ZS)³²‖^{1/32}`.
pub fn eq13_identity_check(s: &SymmetricMatrix, z: &[Complex64]) -> Result<f64> {
    if s.dim() % 2 != 0 {
        return Err(Error::OddDimension { dim: s.dim() });
    }
    let m = s.dim() / 2;
    if z.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            found: z.len(),
        });
    }
    let n = s.dim();
    let sm = DMatrix::from_fn(n, n, |i, j| s.get(i, j));
    let s_inv = sm
        .clone()
        .lu()
        .try_inverse()
        .ok_or(Error::SingularMatrix {
            cond: f64::INFINITY,
            cap: COND_CAP,
        })?;
    let cond = infinity_norm(&sm) * infinity_norm(&s_inv);
    if !cond.is_finite() || cond > COND_CAP {
        return Err(Error::SingularMatrix {
            cond,
            cap: COND_CAP,
        });
    }

    let zm = numeric_z(m, z);
    let zs = &zm * &sm;
    let mut power = zs.clone();
    for _ in 0..5 {
        power = &power * &power;
    }
    let rho = infinity_norm(&power).powf(1.0 / 32.0);
    if rho >= 1.0 {
        return Err(Error::NonContractive { rho });
    }

    let inner = (&s_inv - &zm)
        .lu()
        .try_inverse()
        .ok_or(Error::SingularMatrix {
            cond: f64::INFINITY,
            cap: COND_CAP,
        })?;
    let lhs = &s_inv - &s_inv * inner * &s_inv;

    let identity = DMatrix::identity(n, n);
    let rhs = -((identity - &zs)
        .lu()
        .try_inverse()
        .ok_or(Error::SingularMatrix {
            cond: f64::INFINITY,
            cap: COND_CAP,
        })?
        * &zm);

    let mut max_dev = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            max_dev = max_dev.max((lhs[(i, j)] - rhs[(i, j)]).norm());
        }
    }
    Ok(max_dev)
}
