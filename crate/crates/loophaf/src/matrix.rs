//! Core domain types: complex symmetric matrices, loop vectors, multi-indices,
//! and the row/column replication ("extension") operations they support.
//!
//! An extension replaces entry `s[i][j]` by an `n_i × n_j` constant block and
//! repeats vector entries accordingly; indices with a zero count are dropped.
//! The paired variant applies the same counts to indices `j` and `j + m` of an
//! even-dimensional matrix, and `embed_odd` lifts an odd-dimensional problem
//! to an even one without changing its loop hafnian.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Square complex symmetric matrix with exact stored symmetry.
///
/// Entries are kept in dense row-major order. Construction symmetrizes the
/// input (midpoint rule) after rejecting asymmetry beyond a caller tolerance,
/// so `get(i, j)` and `get(j, i)` return bitwise-identical values. Dimension
/// zero is allowed: extensions with an all-zero count vector produce the 0×0
/// matrix, whose hafnian and loop hafnian are one by convention.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

impl SymmetricMatrix {
    /// Validates a raw square grid and returns the midpoint-symmetrized matrix.
    ///
    /// Rejects non-square input, non-finite entries, and any pair with
    /// `|raw[i][j] - raw[j][i]| > tol`.
    pub fn from_rows(raw: &[Vec<Complex64>], tol: f64) -> Result<Self> {
        let dim = raw.len();
        for (row, r) in raw.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::NonSquare {
                    row,
                    len: r.len(),
                    expected: dim,
                });
            }
            for (col, z) in r.iter().enumerate() {
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(Error::NonFinite { row, col });
                }
            }
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                let dev = (raw[i][j] - raw[j][i]).norm();
                if dev > tol {
                    return Err(Error::AsymmetryExceedsTolerance {
                        row: i,
                        col: j,
                        deviation: dev,
                        tolerance: tol,
                    });
                }
            }
        }
        let mut entries = vec![Complex64::default(); dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                entries[i * dim + j] = (raw[i][j] + raw[j][i]) * 0.5;
            }
        }
        Ok(Self { dim, entries })
    }

    /// Builds a matrix from entries already known to be exactly symmetric.
    ///
    /// Used internally by the extension operations; panics in debug builds if
    /// the invariant is violated.
    pub(crate) fn from_symmetric_entries(dim: usize, entries: Vec<Complex64>) -> Self {
        debug_assert_eq!(entries.len(), dim * dim);
        debug_assert!((0..dim).all(|i| (0..dim).all(|j| entries[i * dim + j] == entries[j * dim + i])));
        Self { dim, entries }
    }

    /// The zero matrix of the given dimension.
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![Complex64::default(); dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.dim + j]
    }

    /// The diagonal as a loop vector (definition 2.1 semantics).
    pub fn diagonal(&self) -> LoopVector {
        LoopVector::from_entries((0..self.dim).map(|i| self.get(i, i)).collect())
    }

    pub fn rows(&self) -> Vec<Vec<Complex64>> {
        (0..self.dim)
            .map(|i| self.entries[i * self.dim..(i + 1) * self.dim].to_vec())
            .collect()
    }
}

/// Complex vector supplying the singleton weights of a loop hafnian.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopVector {
    entries: Vec<Complex64>,
}

impl LoopVector {
    pub fn from_entries(entries: Vec<Complex64>) -> Self {
        Self { entries }
    }

    /// The zero vector, which reduces a loop hafnian to a plain hafnian.
    pub fn zero(dim: usize) -> Self {
        Self {
            entries: vec![Complex64::default(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    #[inline]
    pub fn get(&self, i: usize) -> Complex64 {
        self.entries[i]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }
}

/// Ordered tuple of non-negative counts `(n_1, …, n_k)`.
///
/// Ordering is graded lexicographic: first by total, then lexicographically
/// entry by entry. This is the order used for series coefficient storage and
/// for sorted batch output.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(counts: Vec<usize>) -> Self {
        Self(counts)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn counts(&self) -> &[usize] {
        &self.0
    }

    /// Sum of all counts.
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&n| n == 0)
    }

    /// `(n_1,…,n_m) ↦ (n_1,…,n_m,n_1,…,n_m)`, the count vector of a paired extension.
    pub fn doubled(&self) -> MultiIndex {
        let mut counts = self.0.clone();
        counts.extend_from_slice(&self.0);
        Self(counts)
    }

    /// `Π n_j!` as a float; exact for the totals reachable under the degree caps.
    pub fn factorial_product(&self) -> f64 {
        self.0
            .iter()
            .map(|&n| (1..=n).map(|k| k as f64).product::<f64>())
            .product()
    }

    /// All multi-indices of the given length with total ≤ `max_total`,
    /// in graded-lex order.
    pub fn all_up_to(len: usize, max_total: usize) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        for total in 0..=max_total {
            let mut current = vec![0usize; len];
            emit_compositions(&mut current, 0, total, len, &mut out);
        }
        out
    }
}

fn emit_compositions(
    current: &mut Vec<usize>,
    pos: usize,
    remaining: usize,
    len: usize,
    out: &mut Vec<MultiIndex>,
) {
    if len == 0 {
        if remaining == 0 {
            out.push(MultiIndex(current.clone()));
        }
        return;
    }
    if pos == len - 1 {
        current[pos] = remaining;
        out.push(MultiIndex(current.clone()));
        current[pos] = 0;
        return;
    }
    for v in 0..=remaining {
        current[pos] = v;
        emit_compositions(current, pos + 1, remaining - v, len, out);
        current[pos] = 0;
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.total()
            .cmp(&other.total())
            .then_with(|| self.0.cmp(&other.0))
    }
}

/// Replaces each entry `s[i][j]` by the constant block `s[i][j]·J_{n_i×n_j}`.
/// Indices with `n_j = 0` are dropped; all-one counts reproduce the input.
pub fn extend_matrix(s: &SymmetricMatrix, counts: &MultiIndex) -> Result<SymmetricMatrix> {
    if counts.len() != s.dim() {
        return Err(Error::LengthMismatch {
            expected: s.dim(),
            found: counts.len(),
        });
    }
    // source index of every output row/column, in block order
    let sources: Vec<usize> = counts
        .counts()
        .iter()
        .enumerate()
        .flat_map(|(i, &n)| std::iter::repeat(i).take(n))
        .collect();
    let dim = sources.len();
    let mut entries = vec![Complex64::default(); dim * dim];
    for (r, &i) in sources.iter().enumerate() {
        for (c, &j) in sources.iter().enumerate() {
            entries[r * dim + c] = s.get(i, j);
        }
    }
    Ok(SymmetricMatrix::from_symmetric_entries(dim, entries))
}

/// Repeats entry `v_j` exactly `n_j` times, in index order.
pub fn extend_vector(v: &LoopVector, counts: &MultiIndex) -> Result<LoopVector> {
    if counts.len() != v.dim() {
        return Err(Error::LengthMismatch {
            expected: v.dim(),
            found: counts.len(),
        });
    }
    let entries = counts
        .counts()
        .iter()
        .enumerate()
        .flat_map(|(j, &n)| std::iter::repeat(v.get(j)).take(n))
        .collect();
    Ok(LoopVector::from_entries(entries))
}

/// Extension of an even-dimensional `(S, v)` where indices `j` and `j + m`
/// share the count `n_j`; equivalent to extending with the doubled counts.
pub fn paired_extension(
    s: &SymmetricMatrix,
    v: &LoopVector,
    counts: &MultiIndex,
) -> Result<(SymmetricMatrix, LoopVector)> {
    if s.dim() % 2 != 0 {
        return Err(Error::OddDimension { dim: s.dim() });
    }
    if v.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            matrix: s.dim(),
            vector: v.dim(),
        });
    }
    if counts.len() != s.dim() / 2 {
        return Err(Error::LengthMismatch {
            expected: s.dim() / 2,
            found: counts.len(),
        });
    }
    let doubled = counts.doubled();
    Ok((extend_matrix(s, &doubled)?, extend_vector(v, &doubled)?))
}

/// Prepends one index with unit corner entry, zero fringe and unit loop weight
/// to an odd-dimensional matrix. The loop hafnian is unchanged: the new index
/// only ever contributes its singleton weight 1, and all its pairing weights
/// vanish.
pub fn embed_odd(s: &SymmetricMatrix, v: &LoopVector) -> Result<(SymmetricMatrix, LoopVector)> {
    if v.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            matrix: s.dim(),
            vector: v.dim(),
        });
    }
    let m = embed_odd_matrix(s)?;
    let mut entries = Vec::with_capacity(v.dim() + 1);
    entries.push(Complex64::new(1.0, 0.0));
    entries.extend_from_slice(v.entries());
    Ok((m, LoopVector::from_entries(entries)))
}

/// Matrix part of [`embed_odd`]; the unit corner entry also serves as the loop
/// weight under diagonal-as-loop semantics.
pub fn embed_odd_matrix(s: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    if s.dim() % 2 == 0 {
        return Err(Error::EvenDimension { dim: s.dim() });
    }
    let dim = s.dim() + 1;
    let mut entries = vec![Complex64::default(); dim * dim];
    entries[0] = Complex64::new(1.0, 0.0);
    for i in 0..s.dim() {
        for j in 0..s.dim() {
            entries[(i + 1) * dim + (j + 1)] = s.get(i, j);
        }
    }
    Ok(SymmetricMatrix::from_symmetric_entries(dim, entries))
}
