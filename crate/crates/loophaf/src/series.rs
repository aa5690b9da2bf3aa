//! Truncated multivariate formal power series.
//!
//! The ring `C[z_1,…,z_v] / (total degree > N)` with complex coefficients by
//! default; the coefficient type is generic so the ring-law tests can run in
//! exact Gaussian-rational arithmetic. Coefficients are stored densely over
//! all exponents of total degree ≤ N in graded-lexicographic order (total
//! degree first, then plain lexicographic), with a combinatorial rank
//! function mapping exponent tuples to offsets. At the scale this crate
//! targets the dense layout is close to full and direct convolution beats
//! anything fancier.
//!
//! Multiplication discards products above the truncation order, so every
//! operation here is exact in the quotient ring; in particular a Neumann sum
//! `Σ M^k · R` over a matrix whose entries all have zero constant term is the
//! exact truncated inverse action, with no remainder to analyze.
//!
//! Convolution and the derived operations accumulate contributions in a fixed
//! order that does not depend on the truncation order, so computing at a high
//! order and truncating afterwards is bit-identical to computing at the low
//! order directly.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::MultiIndex;

/// Coefficient ring of a [`TruncatedSeries`].
///
/// `from_ratio` embeds the small rational factors used by the exponential and
/// inverse-square-root recurrences; both arguments stay word-sized.
pub trait Coeff: Clone + PartialEq + std::fmt::Debug {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn neg(&self) -> Self;
    fn from_ratio(num: i64, den: u64) -> Self;
}

impl Coeff for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }

    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }

    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }

    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }

    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }

    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }

    fn neg(&self) -> Self {
        -self
    }

    fn from_ratio(num: i64, den: u64) -> Self {
        Complex64::new(num as f64 / den as f64, 0.0)
    }
}

/// Monomial table for a fixed `(nvars, max_degree)` shape: the graded-lex
/// list of exponent tuples, per-degree offsets, and the rank function.
#[derive(Debug)]
struct Grading {
    nvars: usize,
    max_degree: usize,
    /// flat exponent storage, stride `nvars`
    exponents: Vec<u32>,
    /// total degree of each monomial
    degrees: Vec<u32>,
    /// monomials of degree `d` occupy `offsets[d]..offsets[d+1]`
    offsets: Vec<usize>,
    /// Pascal triangle up to row `nvars + max_degree`
    binomial: Vec<Vec<u64>>,
}

impl Grading {
    fn new(nvars: usize, max_degree: usize) -> Arc<Self> {
        let size = Self::count(nvars, max_degree)
            .expect("series shape too large for dense coefficient storage");
        let binomial = pascal(nvars + max_degree);
        let mut exponents = Vec::with_capacity(size * nvars);
        let mut degrees = Vec::with_capacity(size);
        let mut offsets = Vec::with_capacity(max_degree + 2);
        offsets.push(0);
        let mut scratch = vec![0u32; nvars];
        for d in 0..=max_degree {
            if nvars == 0 {
                if d == 0 {
                    degrees.push(0);
                }
            } else {
                emit_degree_block(&mut scratch, 0, d as u32, &mut exponents, &mut degrees);
            }
            offsets.push(degrees.len());
        }
        Arc::new(Self {
            nvars,
            max_degree,
            exponents,
            degrees,
            offsets,
            binomial,
        })
    }

    /// Number of monomials of total degree ≤ `max_degree` in `nvars`
    /// variables, or `None` if it does not fit comfortably in memory.
    fn count(nvars: usize, max_degree: usize) -> Option<usize> {
        let mut acc: u128 = 1;
        for k in 1..=nvars.min(max_degree) {
            // C(nvars + max_degree, nvars) built incrementally
            acc = acc
                .checked_mul((nvars.max(max_degree) + k) as u128)?
                .checked_div(k as u128)?;
            if acc > 50_000_000 {
                return None;
            }
        }
        Some(acc as usize)
    }

    fn len(&self) -> usize {
        self.degrees.len()
    }

    fn exponent(&self, idx: usize) -> &[u32] {
        &self.exponents[idx * self.nvars..(idx + 1) * self.nvars]
    }

    fn degree(&self, idx: usize) -> usize {
        self.degrees[idx] as usize
    }

    /// End of the monomial range with total degree ≤ `d`.
    fn end_of_degree(&self, d: usize) -> usize {
        self.offsets[d.min(self.max_degree) + 1]
    }

    fn choose(&self, n: usize, k: usize) -> u64 {
        if k > n {
            0
        } else {
            self.binomial[n][k]
        }
    }

    /// Vectors of length `w` with non-negative entries summing to `r`.
    fn compositions(&self, w: usize, r: usize) -> u64 {
        if w == 0 {
            u64::from(r == 0)
        } else {
            self.choose(r + w - 1, w - 1)
        }
    }

    /// Offset of an exponent tuple with total degree ≤ `max_degree`.
    fn rank(&self, e: &[u32]) -> usize {
        debug_assert_eq!(e.len(), self.nvars);
        let total: u32 = e.iter().sum();
        let mut rank = self.offsets[total as usize];
        let mut remaining = total as usize;
        for (k, &ek) in e.iter().enumerate() {
            let after = self.nvars - k - 1;
            for c in 0..ek as usize {
                rank += self.compositions(after, remaining - c) as usize;
            }
            remaining -= ek as usize;
        }
        rank
    }
}

fn emit_degree_block(
    scratch: &mut [u32],
    pos: usize,
    remaining: u32,
    exponents: &mut Vec<u32>,
    degrees: &mut Vec<u32>,
) {
    if pos == scratch.len() - 1 {
        scratch[pos] = remaining;
        exponents.extend_from_slice(scratch);
        degrees.push(scratch.iter().sum());
        scratch[pos] = 0;
        return;
    }
    for v in 0..=remaining {
        scratch[pos] = v;
        emit_degree_block(scratch, pos + 1, remaining - v, exponents, degrees);
        scratch[pos] = 0;
    }
}

fn pascal(n: usize) -> Vec<Vec<u64>> {
    let mut rows: Vec<Vec<u64>> = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let mut row = vec![1u64; i + 1];
        for k in 1..i {
            row[k] = rows[i - 1][k - 1] + rows[i - 1][k];
        }
        rows.push(row);
    }
    rows
}

/// Multivariate formal power series truncated at a fixed total degree.
#[derive(Clone, Debug)]
pub struct TruncatedSeries<C: Coeff = Complex64> {
    grading: Arc<Grading>,
    coeffs: Vec<C>,
}

impl<C: Coeff> PartialEq for TruncatedSeries<C> {
    fn eq(&self, other: &Self) -> bool {
        self.nvars() == other.nvars()
            && self.max_degree() == other.max_degree()
            && self.coeffs == other.coeffs
    }
}

impl<C: Coeff> TruncatedSeries<C> {
    /// Number of stored coefficients for a series of this shape, or `None`
    /// when the dense layout would not fit comfortably in memory.
    pub fn dense_size(nvars: usize, max_degree: usize) -> Option<usize> {
        Grading::count(nvars, max_degree)
    }

    pub fn zero(nvars: usize, max_degree: usize) -> Self {
        let grading = Grading::new(nvars, max_degree);
        let coeffs = vec![C::zero(); grading.len()];
        Self { grading, coeffs }
    }

    pub fn constant(nvars: usize, max_degree: usize, value: C) -> Self {
        let mut s = Self::zero(nvars, max_degree);
        s.coeffs[0] = value;
        s
    }

    pub fn one(nvars: usize, max_degree: usize) -> Self {
        Self::constant(nvars, max_degree, C::one())
    }

    /// The variable `z_j`, or zero if the truncation order is below one.
    pub fn variable(nvars: usize, max_degree: usize, j: usize) -> Self {
        assert!(j < nvars, "variable index {j} out of range for {nvars} variables");
        let mut s = Self::zero(nvars, max_degree);
        let mut e = vec![0u32; nvars];
        e[j] = 1;
        s.set_monomial(&e, C::one());
        s
    }

    /// Adds `value·z^e`; exponents beyond the truncation order are dropped,
    /// matching the quotient-ring semantics.
    pub fn set_monomial(&mut self, exponents: &[u32], value: C) {
        assert_eq!(exponents.len(), self.nvars());
        let total: u32 = exponents.iter().sum();
        if total as usize > self.max_degree() {
            return;
        }
        let r = self.grading.rank(exponents);
        self.coeffs[r] = value;
    }

    pub fn nvars(&self) -> usize {
        self.grading.nvars
    }

    pub fn max_degree(&self) -> usize {
        self.grading.max_degree
    }

    pub fn constant_term(&self) -> &C {
        &self.coeffs[0]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(C::is_zero)
    }

    /// Stored coefficient of `z^k`, or an error if `k` exceeds the truncation
    /// order (absent exponents within range read as zero).
    pub fn coefficient(&self, k: &MultiIndex) -> Result<C> {
        if k.len() != self.nvars() {
            return Err(Error::LengthMismatch {
                expected: self.nvars(),
                found: k.len(),
            });
        }
        if k.total() > self.max_degree() {
            return Err(Error::DegreeOutOfRange {
                degree: k.total(),
                max_degree: self.max_degree(),
            });
        }
        let e: Vec<u32> = k.counts().iter().map(|&n| n as u32).collect();
        Ok(self.coeffs[self.grading.rank(&e)].clone())
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.nvars() != other.nvars() || self.max_degree() != other.max_degree() {
            return Err(Error::ShapeMismatch {
                nvars_a: self.nvars(),
                degree_a: self.max_degree(),
                nvars_b: other.nvars(),
                degree_b: other.max_degree(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.add(b))
            .collect();
        Ok(Self {
            grading: self.grading.clone(),
            coeffs,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.sub(b))
            .collect();
        Ok(Self {
            grading: self.grading.clone(),
            coeffs,
        })
    }

    pub fn scale(&self, factor: &C) -> Self {
        let coeffs = self.coeffs.iter().map(|a| a.mul(factor)).collect();
        Self {
            grading: self.grading.clone(),
            coeffs,
        }
    }

    /// Truncated product; every pair of monomials whose total degree exceeds
    /// the order is discarded.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let g = &self.grading;
        let nvars = g.nvars;
        let mut out = vec![C::zero(); g.len()];
        let mut scratch = vec![0u32; nvars];
        for i in 0..g.len() {
            let a = &self.coeffs[i];
            if a.is_zero() {
                continue;
            }
            let di = g.degree(i);
            let ei = g.exponent(i);
            let j_end = g.end_of_degree(g.max_degree - di);
            for j in 0..j_end {
                let b = &other.coeffs[j];
                if b.is_zero() {
                    continue;
                }
                let ej = g.exponent(j);
                for (k, slot) in scratch.iter_mut().enumerate() {
                    *slot = ei[k] + ej[k];
                }
                let r = g.rank(&scratch);
                out[r] = out[r].add(&a.mul(b));
            }
        }
        Ok(Self {
            grading: self.grading.clone(),
            coeffs: out,
        })
    }

    /// `Σ_{k≤N} A^k / k!`; requires an exactly zero constant term so the
    /// result's constant term is exactly one.
    pub fn exp(&self) -> Result<Self> {
        if !self.constant_term().is_zero() {
            return Err(Error::NonzeroConstantTerm);
        }
        let one = Self::one(self.nvars(), self.max_degree());
        let mut acc = one.clone();
        for k in (1..=self.max_degree()).rev() {
            let prod = self.mul(&acc)?;
            acc = one.add(&prod.scale(&C::from_ratio(1, k as u64)))?;
        }
        Ok(acc)
    }

    /// `A^{-1/2}` with constant term exactly +1; requires the constant term
    /// of `A` to be exactly one.
    pub fn inv_sqrt(&self) -> Result<Self> {
        self.binomial_series(|k| (-(2 * k as i64 - 1), 2 * k as u64))
    }

    /// `A^{-1}` for a series with constant term exactly one; used for the
    /// elimination pivots in [`SeriesMatrix::det`].
    pub fn inv(&self) -> Result<Self> {
        self.binomial_series(|_k| (-1, 1))
    }

    /// `Σ c_k·u^k` with `u = A - 1` and `c_k = c_{k-1}·step(k)`, `c_0 = 1`.
    fn binomial_series(&self, step: impl Fn(usize) -> (i64, u64)) -> Result<Self> {
        if *self.constant_term() != C::one() {
            return Err(Error::ConstantTermNotOne);
        }
        let one = Self::one(self.nvars(), self.max_degree());
        let u = self.sub(&one)?;
        let mut acc = one.clone();
        let mut pow = one;
        let mut coef = C::one();
        for k in 1..=self.max_degree() {
            pow = pow.mul(&u)?;
            if pow.is_zero() {
                break;
            }
            let (num, den) = step(k);
            coef = coef.mul(&C::from_ratio(num, den));
            acc = acc.add(&pow.scale(&coef))?;
        }
        Ok(acc)
    }

    /// Restriction to a lower truncation order; bit-identical to having
    /// computed at that order directly.
    pub fn truncate(&self, new_max_degree: usize) -> Self {
        if new_max_degree >= self.max_degree() {
            return self.clone();
        }
        let grading = Grading::new(self.nvars(), new_max_degree);
        let len = grading.len();
        let coeffs = self.coeffs[..len].to_vec();
        Self { grading, coeffs }
    }

    /// Numeric evaluation at a point (mainly for cross-checks against dense
    /// linear algebra).
    pub fn evaluate(&self, point: &[C]) -> C {
        assert_eq!(point.len(), self.nvars());
        let g = &self.grading;
        let mut total = C::zero();
        for i in 0..g.len() {
            if self.coeffs[i].is_zero() {
                continue;
            }
            let mut term = self.coeffs[i].clone();
            for (k, &e) in g.exponent(i).iter().enumerate() {
                for _ in 0..e {
                    term = term.mul(&point[k]);
                }
            }
            total = total.add(&term);
        }
        total
    }
}

/// Square matrix of series sharing one shape; the `Z`-dependent matrices of
/// the generating-function route live here.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesMatrix<C: Coeff = Complex64> {
    dim: usize,
    nvars: usize,
    max_degree: usize,
    entries: Vec<TruncatedSeries<C>>,
}

impl<C: Coeff> SeriesMatrix<C> {
    pub fn zero(dim: usize, nvars: usize, max_degree: usize) -> Self {
        let entries = (0..dim * dim)
            .map(|_| TruncatedSeries::zero(nvars, max_degree))
            .collect();
        Self {
            dim,
            nvars,
            max_degree,
            entries,
        }
    }

    pub fn identity(dim: usize, nvars: usize, max_degree: usize) -> Self {
        let mut m = Self::zero(dim, nvars, max_degree);
        for i in 0..dim {
            m.entries[i * dim + i] = TruncatedSeries::one(nvars, max_degree);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &TruncatedSeries<C> {
        &self.entries[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: TruncatedSeries<C>) {
        assert_eq!(value.nvars(), self.nvars);
        assert_eq!(value.max_degree(), self.max_degree);
        self.entries[i * self.dim + j] = value;
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim
            || self.nvars != other.nvars
            || self.max_degree != other.max_degree
        {
            return Err(Error::ShapeMismatch {
                nvars_a: self.nvars,
                degree_a: self.max_degree,
                nvars_b: other.nvars,
                degree_b: other.max_degree,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.add(b))
            .collect::<Result<_>>()?;
        Ok(Self {
            dim: self.dim,
            nvars: self.nvars,
            max_degree: self.max_degree,
            entries,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.sub(b))
            .collect::<Result<_>>()?;
        Ok(Self {
            dim: self.dim,
            nvars: self.nvars,
            max_degree: self.max_degree,
            entries,
        })
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let mut out = Self::zero(self.dim, self.nvars, self.max_degree);
        for i in 0..self.dim {
            for j in 0..self.dim {
                let mut acc = TruncatedSeries::zero(self.nvars, self.max_degree);
                for k in 0..self.dim {
                    let a = self.get(i, k);
                    let b = other.get(k, j);
                    if a.is_zero() || b.is_zero() {
                        continue;
                    }
                    acc = acc.add(&a.mul(b)?)?;
                }
                out.entries[i * self.dim + j] = acc;
            }
        }
        Ok(out)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(TruncatedSeries::is_zero)
    }

    fn constant_part_is_identity(&self) -> bool {
        (0..self.dim).all(|i| {
            (0..self.dim).all(|j| {
                let c = self.get(i, j).constant_term();
                if i == j {
                    *c == C::one()
                } else {
                    c.is_zero()
                }
            })
        })
    }

    /// Determinant by LU elimination in the series ring.
    ///
    /// Requires the constant-term matrix to be the identity, which keeps
    /// every pivot invertible (constant term one) throughout elimination.
    pub fn det(&self) -> Result<TruncatedSeries<C>> {
        if !self.constant_part_is_identity() {
            return Err(Error::NonUnitConstantTerm);
        }
        let n = self.dim;
        let mut work = self.entries.clone();
        let mut det = TruncatedSeries::one(self.nvars, self.max_degree);
        for k in 0..n {
            let pivot = work[k * n + k].clone();
            det = det.mul(&pivot)?;
            if k + 1 == n {
                break;
            }
            let pivot_inv = pivot.inv()?;
            for i in (k + 1)..n {
                if work[i * n + k].is_zero() {
                    continue;
                }
                let factor = work[i * n + k].mul(&pivot_inv)?;
                for j in k..n {
                    if work[k * n + j].is_zero() {
                        continue;
                    }
                    let delta = factor.mul(&work[k * n + j])?;
                    work[i * n + j] = work[i * n + j].sub(&delta)?;
                }
            }
        }
        Ok(det)
    }

    /// `(Σ_{k≤N} M^k) · R` where every entry of `M = self` has zero constant
    /// term. `M^k` has minimum total degree `k`, so the sum is the exact
    /// truncated `(1 - M)^{-1} R`.
    pub fn neumann_inverse_times(&self, r: &Self) -> Result<Self> {
        self.check_shape(r)?;
        if self
            .entries
            .iter()
            .any(|e| !e.constant_term().is_zero())
        {
            return Err(Error::NonzeroConstantTermInLinearPart);
        }
        let mut acc = r.clone();
        let mut term = r.clone();
        for _ in 1..=self.max_degree {
            term = self.mul(&term)?;
            if term.is_zero() {
                break;
            }
            acc = acc.add(&term)?;
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    type S = TruncatedSeries<Complex64>;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn idx(counts: &[usize]) -> MultiIndex {
        MultiIndex::new(counts.to_vec())
    }

    /// Independent convolution oracle over a sparse map representation.
    fn naive_mul(
        a: &BTreeMap<Vec<u32>, Complex64>,
        b: &BTreeMap<Vec<u32>, Complex64>,
        max_degree: u32,
    ) -> BTreeMap<Vec<u32>, Complex64> {
        let mut out: BTreeMap<Vec<u32>, Complex64> = BTreeMap::new();
        for (ea, ca) in a {
            for (eb, cb) in b {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
                if e.iter().sum::<u32>() > max_degree {
                    continue;
                }
                *out.entry(e).or_insert_with(|| c(0.0, 0.0)) += ca * cb;
            }
        }
        out
    }

    fn from_map(map: &BTreeMap<Vec<u32>, Complex64>, nvars: usize, max_degree: usize) -> S {
        let mut s = S::zero(nvars, max_degree);
        for (e, v) in map {
            s.set_monomial(e, *v);
        }
        s
    }

    fn seeded_sparse(
        nvars: usize,
        max_degree: usize,
        seed: u64,
        terms: usize,
    ) -> BTreeMap<Vec<u32>, Complex64> {
        // tiny deterministic LCG; good enough for exercising the arithmetic
        let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        let mut map = BTreeMap::new();
        for _ in 0..terms {
            let mut e = vec![0u32; nvars];
            let mut budget = (next() % (max_degree as u64 + 1)) as u32;
            for slot in e.iter_mut() {
                if budget == 0 {
                    break;
                }
                let take = (next() % (budget as u64 + 1)) as u32;
                *slot = take;
                budget -= take;
            }
            let re = ((next() % 2000) as f64 - 1000.0) / 512.0;
            let im = ((next() % 2000) as f64 - 1000.0) / 512.0;
            map.insert(e, c(re, im));
        }
        map
    }

    #[test]
    fn one_plus_z_times_one_minus_z() {
        let one = S::one(1, 2);
        let z = S::variable(1, 2, 0);
        let a = one.add(&z).unwrap();
        let b = one.sub(&z).unwrap();
        let p = a.mul(&b).unwrap();
        assert_eq!(p.coefficient(&idx(&[0])).unwrap(), c(1.0, 0.0));
        assert_eq!(p.coefficient(&idx(&[1])).unwrap(), c(0.0, 0.0));
        assert_eq!(p.coefficient(&idx(&[2])).unwrap(), c(-1.0, 0.0));
    }

    #[test]
    fn product_beyond_order_truncates_to_zero() {
        let z1 = S::variable(2, 1, 0);
        let z2 = S::variable(2, 1, 1);
        assert!(z1.mul(&z2).unwrap().is_zero());
    }

    #[test]
    fn mul_matches_naive_convolution_oracle() {
        for seed in 0..6u64 {
            let a = seeded_sparse(3, 4, seed * 2 + 1, 5);
            let b = seeded_sparse(3, 4, seed * 2 + 2, 5);
            let pa = from_map(&a, 3, 4);
            let pb = from_map(&b, 3, 4);
            let prod = pa.mul(&pb).unwrap();
            let oracle = naive_mul(&a, &b, 4);
            for m in MultiIndex::all_up_to(3, 4) {
                let e: Vec<u32> = m.counts().iter().map(|&n| n as u32).collect();
                let want = oracle.get(&e).copied().unwrap_or_else(|| c(0.0, 0.0));
                let got = prod.coefficient(&m).unwrap();
                assert!(
                    (got - want).norm() <= 1e-12,
                    "seed {seed}, exponent {e:?}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn exp_of_single_variable() {
        let z = S::variable(1, 3, 0);
        let e = z.exp().unwrap();
        let expect = [1.0, 1.0, 0.5, 1.0 / 6.0];
        for (k, want) in expect.iter().enumerate() {
            let got = e.coefficient(&idx(&[k])).unwrap();
            assert!((got - c(*want, 0.0)).norm() < 1e-15, "k={k}");
        }
    }

    #[test]
    fn exp_of_zero_is_one() {
        let z = S::zero(2, 3);
        let e = z.exp().unwrap();
        assert_eq!(*e.constant_term(), c(1.0, 0.0));
        assert_eq!(e.coefficient(&idx(&[1, 0])).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn exp_cross_coefficient_matches_multinomial() {
        // exp(z1+z2) = ... + (z1+z2)^2/2 + ... so [z1 z2] = 1
        let s = S::variable(2, 2, 0).add(&S::variable(2, 2, 1)).unwrap();
        let e = s.exp().unwrap();
        assert_eq!(e.coefficient(&idx(&[1, 1])).unwrap(), c(1.0, 0.0));
    }

    #[test]
    fn exp_rejects_nonzero_constant_term() {
        let s = S::one(1, 2);
        assert!(matches!(s.exp(), Err(Error::NonzeroConstantTerm)));
    }

    #[test]
    fn exp_is_multiplicative_within_tolerance() {
        for seed in 0..4u64 {
            let mut a = seeded_sparse(2, 5, 100 + seed, 4);
            let mut b = seeded_sparse(2, 5, 200 + seed, 4);
            a.remove(&vec![0, 0]);
            b.remove(&vec![0, 0]);
            let pa = from_map(&a, 2, 5);
            let pb = from_map(&b, 2, 5);
            let lhs = pa.add(&pb).unwrap().exp().unwrap();
            let rhs = pa.exp().unwrap().mul(&pb.exp().unwrap()).unwrap();
            for m in MultiIndex::all_up_to(2, 5) {
                let x = lhs.coefficient(&m).unwrap();
                let y = rhs.coefficient(&m).unwrap();
                assert!((x - y).norm() <= 1e-12 * (1.0 + y.norm()), "seed {seed}");
            }
        }
    }

    #[test]
    fn inv_sqrt_binomial_values() {
        // (1 - 2z)^{-1/2} = 1 + z + 3/2 z^2 + ...
        let one = S::one(1, 2);
        let a = one
            .sub(&S::variable(1, 2, 0).scale(&c(2.0, 0.0)))
            .unwrap();
        let b = a.inv_sqrt().unwrap();
        assert_eq!(b.coefficient(&idx(&[0])).unwrap(), c(1.0, 0.0));
        assert_eq!(b.coefficient(&idx(&[1])).unwrap(), c(1.0, 0.0));
        assert_eq!(b.coefficient(&idx(&[2])).unwrap(), c(1.5, 0.0));
    }

    #[test]
    fn inv_sqrt_of_one_is_one() {
        let one = S::one(3, 4);
        assert_eq!(one.inv_sqrt().unwrap(), one);
    }

    #[test]
    fn inv_sqrt_squares_back_to_inverse() {
        for seed in 0..4u64 {
            let mut m = seeded_sparse(2, 5, 300 + seed, 5);
            m.insert(vec![0, 0], c(1.0, 0.0));
            let a = from_map(&m, 2, 5);
            let b = a.inv_sqrt().unwrap();
            let prod = b.mul(&b.mul(&a).unwrap()).unwrap();
            let one = S::one(2, 5);
            for mi in MultiIndex::all_up_to(2, 5) {
                let x = prod.coefficient(&mi).unwrap();
                let y = one.coefficient(&mi).unwrap();
                assert!((x - y).norm() <= 1e-12, "seed {seed} at {mi:?}: {x}");
            }
        }
    }

    #[test]
    fn inv_sqrt_rejects_constant_term_not_one() {
        let s = S::constant(1, 2, c(2.0, 0.0));
        assert!(matches!(s.inv_sqrt(), Err(Error::ConstantTermNotOne)));
        let z = S::variable(1, 2, 0);
        assert!(matches!(z.inv_sqrt(), Err(Error::ConstantTermNotOne)));
    }

    #[test]
    fn series_inverse_is_geometric() {
        let one = S::one(1, 4);
        let a = one.sub(&S::variable(1, 4, 0)).unwrap();
        let b = a.inv().unwrap();
        for k in 0..=4 {
            assert_eq!(b.coefficient(&idx(&[k])).unwrap(), c(1.0, 0.0));
        }
        let prod = a.mul(&b).unwrap();
        assert_eq!(prod, one);
    }

    #[test]
    fn coefficient_accessor_and_range_check() {
        let s = S::one(1, 2)
            .add(&S::variable(1, 2, 0).scale(&c(2.0, 0.0)))
            .unwrap();
        assert_eq!(s.coefficient(&idx(&[1])).unwrap(), c(2.0, 0.0));
        assert_eq!(s.coefficient(&idx(&[0])).unwrap(), c(1.0, 0.0));
        assert!(matches!(
            s.coefficient(&idx(&[3])),
            Err(Error::DegreeOutOfRange { degree: 3, max_degree: 2 })
        ));
        let mut zz = S::zero(2, 2);
        zz.set_monomial(&[1, 1], c(1.0, 0.0));
        assert_eq!(zz.coefficient(&idx(&[2, 0])).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let a = S::zero(2, 3);
        let b = S::zero(3, 3);
        assert!(matches!(a.add(&b), Err(Error::ShapeMismatch { .. })));
        let d = S::zero(2, 4);
        assert!(matches!(a.mul(&d), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn truncation_order_consistency_is_bitwise() {
        for seed in 0..4u64 {
            let a = seeded_sparse(3, 6, 400 + seed, 6);
            let b = seeded_sparse(3, 6, 500 + seed, 6);
            let high = from_map(&a, 3, 6).mul(&from_map(&b, 3, 6)).unwrap();
            let low = from_map(&a, 3, 4).mul(&from_map(&b, 3, 4)).unwrap();
            let truncated = high.truncate(4);
            assert_eq!(truncated, low, "seed {seed}");

            let mut am = a.clone();
            am.remove(&vec![0, 0, 0]);
            let e_high = from_map(&am, 3, 6).exp().unwrap().truncate(4);
            let e_low = from_map(&am, 3, 4).exp().unwrap();
            assert_eq!(e_high, e_low, "exp seed {seed}");
        }
    }

    #[test]
    fn associativity_and_distributivity_in_float_mode() {
        for seed in 0..4u64 {
            let a = from_map(&seeded_sparse(3, 5, 600 + seed, 5), 3, 5);
            let b = from_map(&seeded_sparse(3, 5, 700 + seed, 5), 3, 5);
            let cc = from_map(&seeded_sparse(3, 5, 800 + seed, 5), 3, 5);
            let ab_c = a.mul(&b).unwrap().mul(&cc).unwrap();
            let a_bc = a.mul(&b.mul(&cc).unwrap()).unwrap();
            let lhs = a.mul(&b.add(&cc).unwrap()).unwrap();
            let rhs = a.mul(&b).unwrap().add(&a.mul(&cc).unwrap()).unwrap();
            for m in MultiIndex::all_up_to(3, 5) {
                let x = ab_c.coefficient(&m).unwrap();
                let y = a_bc.coefficient(&m).unwrap();
                assert!((x - y).norm() <= 1e-12 * (1.0 + y.norm()));
                let x = lhs.coefficient(&m).unwrap();
                let y = rhs.coefficient(&m).unwrap();
                assert!((x - y).norm() <= 1e-12 * (1.0 + y.norm()));
            }
        }
    }

    #[test]
    fn det_of_identity_is_one() {
        let m: SeriesMatrix = SeriesMatrix::identity(3, 2, 3);
        let d = m.det().unwrap();
        assert_eq!(d, S::one(2, 3));
    }

    #[test]
    fn det_two_by_two_hand_expansion() {
        // M = [[1 - b z, -c z], [-a z, 1 - b z]] with a=2, b=1, c=3
        // det = (1 - z)^2 - 6 z^2 = 1 - 2z - 5z^2
        let (a, b, cc) = (2.0, 1.0, 3.0);
        let z = S::variable(1, 2, 0);
        let one = S::one(1, 2);
        let mut m: SeriesMatrix = SeriesMatrix::zero(2, 1, 2);
        m.set(0, 0, one.sub(&z.scale(&c(b, 0.0))).unwrap());
        m.set(0, 1, z.scale(&c(-cc, 0.0)));
        m.set(1, 0, z.scale(&c(-a, 0.0)));
        m.set(1, 1, one.sub(&z.scale(&c(b, 0.0))).unwrap());
        let d = m.det().unwrap();
        assert_eq!(d.coefficient(&idx(&[0])).unwrap(), c(1.0, 0.0));
        assert_eq!(d.coefficient(&idx(&[1])).unwrap(), c(-2.0, 0.0));
        assert_eq!(d.coefficient(&idx(&[2])).unwrap(), c(-5.0, 0.0));
    }

    #[test]
    fn det_rejects_non_identity_constant_part() {
        let mut m: SeriesMatrix = SeriesMatrix::identity(2, 1, 2);
        m.set(0, 1, S::one(1, 2));
        assert!(matches!(m.det(), Err(Error::NonUnitConstantTerm)));
    }

    /// Leibniz-formula determinant oracle over the naive sparse arithmetic.
    fn leibniz_det(
        entries: &[Vec<BTreeMap<Vec<u32>, Complex64>>],
        nvars: usize,
        max_degree: usize,
    ) -> BTreeMap<Vec<u32>, Complex64> {
        let n = entries.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut out: BTreeMap<Vec<u32>, Complex64> = BTreeMap::new();
        permute(&mut perm, 0, &mut |p, sign| {
            let mut prod: BTreeMap<Vec<u32>, Complex64> = BTreeMap::new();
            prod.insert(vec![0; nvars], c(sign, 0.0));
            for (i, &j) in p.iter().enumerate() {
                prod = naive_mul(&prod, &entries[i][j], max_degree as u32);
            }
            for (e, v) in prod {
                *out.entry(e).or_insert_with(|| c(0.0, 0.0)) += v;
            }
        });
        out
    }

    fn permute(perm: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize], f64)) {
        let n = perm.len();
        if k == n {
            // sign by counting inversions
            let mut inversions = 0;
            for i in 0..n {
                for j in (i + 1)..n {
                    if perm[i] > perm[j] {
                        inversions += 1;
                    }
                }
            }
            let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
            visit(perm, sign);
            return;
        }
        for i in k..n {
            perm.swap(k, i);
            permute(perm, k + 1, visit);
            perm.swap(k, i);
        }
    }

    #[test]
    fn det_matches_leibniz_oracle_on_random_four_by_four() {
        let nvars = 2;
        let max_degree = 4;
        let n = 4;
        let mut maps: Vec<Vec<BTreeMap<Vec<u32>, Complex64>>> = Vec::new();
        let mut m: SeriesMatrix = SeriesMatrix::zero(n, nvars, max_degree);
        for i in 0..n {
            let mut row = Vec::new();
            for j in 0..n {
                let mut e = seeded_sparse(nvars, max_degree, (900 + i * n + j) as u64, 3);
                // unit constant part: identity on the diagonal, zero off it
                if i == j {
                    e.insert(vec![0; nvars], c(1.0, 0.0));
                } else {
                    e.remove(&vec![0; nvars]);
                }
                m.set(i, j, from_map(&e, nvars, max_degree));
                row.push(e);
            }
            maps.push(row);
        }
        let d = m.det().unwrap();
        let oracle = leibniz_det(&maps, nvars, max_degree);
        for mi in MultiIndex::all_up_to(nvars, max_degree) {
            let e: Vec<u32> = mi.counts().iter().map(|&x| x as u32).collect();
            let want = oracle.get(&e).copied().unwrap_or_else(|| c(0.0, 0.0));
            let got = d.coefficient(&mi).unwrap();
            assert!(
                (got - want).norm() <= 1e-10 * (1.0 + want.norm()),
                "{mi:?}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn det_is_multiplicative() {
        let nvars = 2;
        let max_degree = 3;
        let n = 3;
        let build = |offset: u64| {
            let mut m: SeriesMatrix = SeriesMatrix::zero(n, nvars, max_degree);
            for i in 0..n {
                for j in 0..n {
                    let mut e =
                        seeded_sparse(nvars, max_degree, offset + (i * n + j) as u64, 2);
                    if i == j {
                        e.insert(vec![0; nvars], c(1.0, 0.0));
                    } else {
                        e.remove(&vec![0; nvars]);
                    }
                    m.set(i, j, from_map(&e, nvars, max_degree));
                }
            }
            m
        };
        let m1 = build(2000);
        let m2 = build(3000);
        let lhs = m1.mul(&m2).unwrap().det().unwrap();
        let rhs = m1.det().unwrap().mul(&m2.det().unwrap()).unwrap();
        for mi in MultiIndex::all_up_to(nvars, max_degree) {
            let x = lhs.coefficient(&mi).unwrap();
            let y = rhs.coefficient(&mi).unwrap();
            assert!((x - y).norm() <= 1e-12 * (1.0 + y.norm()), "{mi:?}");
        }
    }

    #[test]
    fn neumann_with_zero_linear_part_returns_rhs() {
        let m: SeriesMatrix = SeriesMatrix::zero(2, 1, 3);
        let r = SeriesMatrix::identity(2, 1, 3);
        assert_eq!(m.neumann_inverse_times(&r).unwrap(), r);
    }

    #[test]
    fn neumann_scalar_case_is_geometric_series() {
        let b = 0.75;
        let mut m: SeriesMatrix = SeriesMatrix::zero(1, 1, 4);
        m.set(0, 0, S::variable(1, 4, 0).scale(&c(b, 0.0)));
        let r = SeriesMatrix::identity(1, 1, 4);
        let inv = m.neumann_inverse_times(&r).unwrap();
        for k in 0..=4u32 {
            let got = inv.get(0, 0).coefficient(&idx(&[k as usize])).unwrap();
            let want = c(b.powi(k as i32), 0.0);
            assert!((got - want).norm() <= 1e-14, "k={k}");
        }
    }

    #[test]
    fn neumann_rejects_nonzero_constant_linear_part() {
        let m: SeriesMatrix = SeriesMatrix::identity(2, 1, 3);
        let r = SeriesMatrix::identity(2, 1, 3);
        assert!(matches!(
            m.neumann_inverse_times(&r),
            Err(Error::NonzeroConstantTermInLinearPart)
        ));
    }

    // --- exact-coefficient mode -------------------------------------------

    mod rational {
        use super::*;
        use num::{BigInt, BigRational, Complex, One, Zero};
        use proptest::prelude::*;

        /// Gaussian rationals: exact coefficient ring for the law tests.
        type Q = Complex<BigRational>;

        impl Coeff for Q {
            fn zero() -> Self {
                Complex::new(BigRational::zero(), BigRational::zero())
            }

            fn one() -> Self {
                Complex::new(BigRational::one(), BigRational::zero())
            }

            fn is_zero(&self) -> bool {
                self.re.is_zero() && self.im.is_zero()
            }

            fn add(&self, rhs: &Self) -> Self {
                self + rhs
            }

            fn sub(&self, rhs: &Self) -> Self {
                self - rhs
            }

            fn mul(&self, rhs: &Self) -> Self {
                self * rhs
            }

            fn neg(&self) -> Self {
                -self
            }

            fn from_ratio(num: i64, den: u64) -> Self {
                Complex::new(
                    BigRational::new(BigInt::from(num), BigInt::from(den)),
                    BigRational::zero(),
                )
            }
        }

        fn q(re_num: i32, re_den: u8, im_num: i32, im_den: u8) -> Q {
            Complex::new(
                BigRational::new(BigInt::from(re_num), BigInt::from(re_den.max(1))),
                BigRational::new(BigInt::from(im_num), BigInt::from(im_den.max(1))),
            )
        }

        #[derive(Clone, Debug)]
        struct SparseSpec {
            terms: Vec<(Vec<u32>, (i32, u8, i32, u8))>,
        }

        fn sparse_spec(nvars: usize, max_degree: u32) -> impl Strategy<Value = SparseSpec> {
            let term = (
                proptest::collection::vec(0..=max_degree, nvars),
                (-9i32..=9, 1u8..=6, -9i32..=9, 1u8..=6),
            );
            proptest::collection::vec(term, 0..=4).prop_map(|terms| SparseSpec { terms })
        }

        fn build(spec: &SparseSpec, nvars: usize, max_degree: usize) -> TruncatedSeries<Q> {
            let mut s = TruncatedSeries::<Q>::zero(nvars, max_degree);
            for (e, (rn, rd, im, id)) in &spec.terms {
                let total: u32 = e.iter().sum();
                if total as usize > max_degree {
                    continue;
                }
                s.set_monomial(e, q(*rn, *rd, *im, *id));
            }
            s
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn ring_laws_hold_exactly(
                sa in sparse_spec(3, 4),
                sb in sparse_spec(3, 4),
                sc in sparse_spec(3, 4),
            ) {
                let nvars = 3;
                let max_degree = 4;
                let a = build(&sa, nvars, max_degree);
                let b = build(&sb, nvars, max_degree);
                let c = build(&sc, nvars, max_degree);

                let ab_c = a.mul(&b).unwrap().mul(&c).unwrap();
                let a_bc = a.mul(&b.mul(&c).unwrap()).unwrap();
                prop_assert_eq!(ab_c, a_bc);

                let lhs = a.mul(&b.add(&c).unwrap()).unwrap();
                let rhs = a.mul(&b).unwrap().add(&a.mul(&c).unwrap()).unwrap();
                prop_assert_eq!(lhs, rhs);

                let comm_ab = a.mul(&b).unwrap();
                let comm_ba = b.mul(&a).unwrap();
                prop_assert_eq!(comm_ab, comm_ba);
            }
        }

        #[test]
        fn exact_inv_sqrt_consistency() {
            // A = 1 + z1/2 - z2^2/3: B*B*A must be exactly one
            let mut a = TruncatedSeries::<Q>::one(2, 4);
            a.set_monomial(&[1, 0], q(1, 2, 0, 1));
            a.set_monomial(&[0, 2], q(-1, 3, 0, 1));
            let b = a.inv_sqrt().unwrap();
            let prod = b.mul(&b.mul(&a).unwrap()).unwrap();
            assert_eq!(prod, TruncatedSeries::<Q>::one(2, 4));
        }
    }
}
