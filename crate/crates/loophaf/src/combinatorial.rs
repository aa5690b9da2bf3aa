//! Ground-truth enumeration oracle.
//!
//! Direct enumeration of perfect matchings (all partitions of `{0,…,2m-1}`
//! into pairs) and single-pair matchings (partitions of `{0,…,μ-1}` into
//! pairs and singletons), and the hafnian / loop-hafnian sums over them.
//!
//! Enumeration order is fixed: recurse on the smallest unassigned index,
//! singleton branch first, then pairs with partners in increasing order.
//! Sums are accumulated by a Kahan-compensated fold at every recursion node,
//! with exact-zero terms skipped. The fold tree is a property of the input
//! alone, so results are bit-identical across thread counts and identical to
//! the sequential fallback; terms that carry an exactly zero weight cannot
//! perturb the result, which keeps identities like `lhaf(S, 0) = haf(S)` and
//! the odd-to-even embedding exact rather than approximate.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{LoopVector, SymmetricMatrix};
use crate::parallel::ordered_map;

/// Default bound on the matrix dimension accepted by the brute-force sums.
///
/// SPM(20) already has ≈ 2.4·10⁹ elements; anything beyond is past the scale
/// this oracle is meant for.
pub const DEFAULT_ENUM_CAP: usize = 20;

// The assignment bitmask is a u64; one bit must stay free for the full mask.
const HARD_DIM_LIMIT: usize = 63;

/// A partition of `{0,…,μ-1}` into pairs and singletons.
///
/// Pairs are stored with the smaller index first and sorted by it; singletons
/// are sorted ascending. Both orders follow from the enumeration scheme.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    pairs: Vec<(usize, usize)>,
    singletons: Vec<usize>,
}

impl Partition {
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn singletons(&self) -> &[usize] {
        &self.singletons
    }

    pub fn block_count(&self) -> usize {
        self.pairs.len() + self.singletons.len()
    }
}

#[derive(Clone, Copy, Debug)]
enum Choice {
    Singleton(usize),
    Pair(usize, usize),
}

/// Restartable depth-first enumerator over SPM(μ) or PMP(μ).
///
/// Created by [`enumerate_spm`] and [`enumerate_pmp`]; yields every partition
/// exactly once in the deterministic order described in the module docs.
pub struct PartitionIter {
    n: usize,
    with_singletons: bool,
    stack: Vec<Choice>,
    used: u64,
    started: bool,
    done: bool,
}

/// All partitions of `{0,…,n-1}` into pairs and singletons; `n = 0` yields
/// the single empty partition.
pub fn enumerate_spm(n: usize) -> PartitionIter {
    PartitionIter::new(n, true)
}

/// All perfect matchings of `{0,…,n-1}`; `n` must be even.
pub fn enumerate_pmp(n: usize) -> Result<PartitionIter> {
    if n % 2 != 0 {
        return Err(Error::OddDimension { dim: n });
    }
    Ok(PartitionIter::new(n, false))
}

impl PartitionIter {
    fn new(n: usize, with_singletons: bool) -> Self {
        assert!(n <= HARD_DIM_LIMIT, "partition enumeration limited to {HARD_DIM_LIMIT} indices");
        Self {
            n,
            with_singletons,
            stack: Vec::with_capacity(n),
            used: 0,
            started: false,
            done: false,
        }
    }

    fn first_free(&self, from: usize) -> Option<usize> {
        (from..self.n).find(|&k| self.used & (1 << k) == 0)
    }

    fn push(&mut self, choice: Choice) {
        match choice {
            Choice::Singleton(i) => self.used |= 1 << i,
            Choice::Pair(i, j) => self.used |= (1 << i) | (1 << j),
        }
        self.stack.push(choice);
    }

    fn pop(&mut self) -> Option<Choice> {
        let choice = self.stack.pop()?;
        match choice {
            Choice::Singleton(i) => self.used &= !(1 << i),
            Choice::Pair(i, j) => self.used &= !((1 << i) | (1 << j)),
        }
        Some(choice)
    }

    /// Extends the current partial assignment with first choices until every
    /// index is assigned.
    fn descend(&mut self) {
        while let Some(i) = self.first_free(0) {
            if self.with_singletons {
                self.push(Choice::Singleton(i));
            } else {
                // even number of free indices is an invariant in pair-only mode
                let j = self.first_free(i + 1).expect("free partner must exist");
                self.push(Choice::Pair(i, j));
            }
        }
    }

    fn current(&self) -> Partition {
        let mut pairs = Vec::new();
        let mut singletons = Vec::new();
        for choice in &self.stack {
            match *choice {
                Choice::Singleton(i) => singletons.push(i),
                Choice::Pair(i, j) => pairs.push((i, j)),
            }
        }
        Partition { pairs, singletons }
    }
}

impl Iterator for PartitionIter {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            self.descend();
            return Some(self.current());
        }
        while let Some(choice) = self.pop() {
            let next_choice = match choice {
                Choice::Singleton(i) => self.first_free(i + 1).map(|j| Choice::Pair(i, j)),
                Choice::Pair(i, j) => self.first_free(j + 1).map(|j2| Choice::Pair(i, j2)),
            };
            if let Some(c) = next_choice {
                self.push(c);
                self.descend();
                return Some(self.current());
            }
        }
        self.done = true;
        None
    }
}

/// Component-wise Kahan accumulator for complex terms.
///
/// Adding an exact zero component is a no-op by construction; see the module
/// docs for why that matters.
#[derive(Clone, Copy, Default)]
pub(crate) struct KahanComplex {
    sum_re: f64,
    c_re: f64,
    sum_im: f64,
    c_im: f64,
}

impl KahanComplex {
    pub(crate) fn add(&mut self, z: Complex64) {
        if z.re != 0.0 {
            let y = z.re - self.c_re;
            let t = self.sum_re + y;
            self.c_re = (t - self.sum_re) - y;
            self.sum_re = t;
        }
        if z.im != 0.0 {
            let y = z.im - self.c_im;
            let t = self.sum_im + y;
            self.c_im = (t - self.sum_im) - y;
            self.sum_im = t;
        }
    }

    pub(crate) fn value(&self) -> Complex64 {
        Complex64::new(self.sum_re, self.sum_im)
    }
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn full_mask(n: usize) -> u64 {
    if n == 0 {
        0
    } else {
        (1u64 << n) - 1
    }
}

/// Sum over the subtree rooted at the given partial assignment, entirely
/// sequential.
fn node_sum_seq(
    s: &SymmetricMatrix,
    v: Option<&LoopVector>,
    used: u64,
    prod: Complex64,
) -> Complex64 {
    let n = s.dim();
    if used == full_mask(n) {
        return prod;
    }
    if prod == ZERO {
        // every leaf below carries an exactly zero term
        return ZERO;
    }
    let i = (!used).trailing_zeros() as usize;
    let mut acc = KahanComplex::default();
    if let Some(v) = v {
        acc.add(node_sum_seq(s, Some(v), used | (1 << i), prod * v.get(i)));
    }
    for j in (i + 1)..n {
        if used & (1 << j) == 0 {
            acc.add(node_sum_seq(
                s,
                v,
                used | (1 << i) | (1 << j),
                prod * s.get(i, j),
            ));
        }
    }
    acc.value()
}

/// Same tree as [`node_sum_seq`], but the first `levels` recursion levels fan
/// out over the deterministic chunk set. Chunk values and fold order do not
/// depend on the executor, so this is bit-identical to the sequential walk.
fn node_sum_fanout(
    s: &SymmetricMatrix,
    v: Option<&LoopVector>,
    used: u64,
    prod: Complex64,
    levels: usize,
) -> Complex64 {
    let n = s.dim();
    if levels == 0 {
        return node_sum_seq(s, v, used, prod);
    }
    if used == full_mask(n) {
        return prod;
    }
    if prod == ZERO {
        return ZERO;
    }
    let i = (!used).trailing_zeros() as usize;
    let mut children: Vec<(u64, Complex64)> = Vec::with_capacity(n);
    if let Some(v) = v {
        children.push((used | (1 << i), prod * v.get(i)));
    }
    for j in (i + 1)..n {
        if used & (1 << j) == 0 {
            children.push((used | (1 << i) | (1 << j), prod * s.get(i, j)));
        }
    }
    let values = ordered_map(children, |(child_used, child_prod)| {
        node_sum_fanout(s, v, child_used, child_prod, levels - 1)
    });
    let mut acc = KahanComplex::default();
    for value in values {
        acc.add(value);
    }
    acc.value()
}

fn check_cap(dim: usize, cap: usize) -> Result<()> {
    let cap = cap.min(HARD_DIM_LIMIT);
    if dim > cap {
        return Err(Error::DimensionCapExceeded { dim, cap });
    }
    Ok(())
}

fn fanout_levels(dim: usize) -> usize {
    // two levels give O(dim^2) chunks, plenty for desk-scale instances
    if dim >= 12 {
        2
    } else if dim >= 8 {
        1
    } else {
        0
    }
}

fn one_complex() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

/// Hafnian by direct enumeration of perfect matchings; `dim` must be even
/// and within [`DEFAULT_ENUM_CAP`].
pub fn haf_bruteforce(s: &SymmetricMatrix) -> Result<Complex64> {
    haf_bruteforce_with_cap(s, DEFAULT_ENUM_CAP)
}

/// [`haf_bruteforce`] with an explicit enumeration cap.
pub fn haf_bruteforce_with_cap(s: &SymmetricMatrix, cap: usize) -> Result<Complex64> {
    if s.dim() % 2 != 0 {
        return Err(Error::OddDimension { dim: s.dim() });
    }
    check_cap(s.dim(), cap)?;
    Ok(node_sum_fanout(s, None, 0, one_complex(), fanout_levels(s.dim())))
}

/// Sequential reference path for [`haf_bruteforce`]; returns bit-identical
/// values and exists for determinism checks and benchmarks.
pub fn haf_bruteforce_sequential(s: &SymmetricMatrix) -> Result<Complex64> {
    if s.dim() % 2 != 0 {
        return Err(Error::OddDimension { dim: s.dim() });
    }
    check_cap(s.dim(), DEFAULT_ENUM_CAP)?;
    Ok(node_sum_seq(s, None, 0, one_complex()))
}

/// Loop hafnian by direct enumeration of single-pair matchings.
pub fn lhaf_bruteforce(s: &SymmetricMatrix, v: &LoopVector) -> Result<Complex64> {
    lhaf_bruteforce_with_cap(s, v, DEFAULT_ENUM_CAP)
}

/// [`lhaf_bruteforce`] with an explicit enumeration cap.
pub fn lhaf_bruteforce_with_cap(
    s: &SymmetricMatrix,
    v: &LoopVector,
    cap: usize,
) -> Result<Complex64> {
    if s.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            matrix: s.dim(),
            vector: v.dim(),
        });
    }
    check_cap(s.dim(), cap)?;
    Ok(node_sum_fanout(
        s,
        Some(v),
        0,
        one_complex(),
        fanout_levels(s.dim()),
    ))
}

/// Sequential reference path for [`lhaf_bruteforce`].
pub fn lhaf_bruteforce_sequential(s: &SymmetricMatrix, v: &LoopVector) -> Result<Complex64> {
    if s.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            matrix: s.dim(),
            vector: v.dim(),
        });
    }
    check_cap(s.dim(), DEFAULT_ENUM_CAP)?;
    Ok(node_sum_seq(s, Some(v), 0, one_complex()))
}

/// Loop hafnian with the diagonal of `S` as the loop vector
/// (diagonal-as-loop semantics).
pub fn lhaf_diagonal(s: &SymmetricMatrix) -> Result<Complex64> {
    lhaf_bruteforce(s, &s.diagonal())
}

/// [`lhaf_diagonal`] with an explicit enumeration cap.
pub fn lhaf_diagonal_with_cap(s: &SymmetricMatrix, cap: usize) -> Result<Complex64> {
    lhaf_bruteforce_with_cap(s, &s.diagonal(), cap)
}
