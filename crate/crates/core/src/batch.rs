//! Mini-batch index sets `I ⊂ [n]` with `|I| = m`.

use rand::Rng;

use crate::error::{Error, Result};

/// A set of `m` distinct record indices drawn from `[0, n)`.
///
/// Indices are kept in draw order; equality and [`BatchIndex::sorted`] treat
/// the batch as a set. `m == n` is stored without an index list.
#[derive(Clone, Debug)]
pub struct BatchIndex {
    n: usize,
    m: usize,
    /// Empty when the batch is the full index set.
    indices: Vec<u32>,
}

impl PartialEq for BatchIndex {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.m == other.m && self.sorted() == other.sorted()
    }
}

impl Eq for BatchIndex {}

impl BatchIndex {
    /// The full index set `[n]`.
    pub fn full(n: usize) -> Self {
        BatchIndex {
            n,
            m: n,
            indices: Vec::new(),
        }
    }

    /// Validates and wraps an explicit index set.
    pub fn from_indices(n: usize, indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::contract("a batch needs at least one index"));
        }
        let mut seen = vec![false; n];
        for &i in &indices {
            if i >= n {
                return Err(Error::contract(format!("batch index {i} out of range [0, {n})")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::contract(format!("batch index {i} repeated")));
            }
        }
        if indices.len() == n {
            return Ok(BatchIndex::full(n));
        }
        Ok(BatchIndex {
            n,
            m: indices.len(),
            indices: indices.into_iter().map(|i| i as u32).collect(),
        })
    }

    /// Batch size m.
    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    /// Population size n.
    pub fn population(&self) -> usize {
        self.n
    }

    pub fn is_full(&self) -> bool {
        self.m == self.n
    }

    pub fn iter(&self) -> BatchIter<'_> {
        if self.is_full() {
            BatchIter::Full(0..self.n)
        } else {
            BatchIter::Subset(self.indices.iter())
        }
    }

    /// Indices in increasing order.
    pub fn sorted(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.iter().collect();
        v.sort_unstable();
        v
    }
}

pub enum BatchIter<'a> {
    Full(std::ops::Range<usize>),
    Subset(std::slice::Iter<'a, u32>),
}

impl Iterator for BatchIter<'_> {
    type Item = usize;
    #[inline]
    fn next(&mut self) -> Option<usize> {
        match self {
            BatchIter::Full(r) => r.next(),
            BatchIter::Subset(it) => it.next().map(|&i| i as usize),
        }
    }
}

/// Draws uniform m-subsets of `[0, n)` by partial Fisher–Yates.
///
/// The permutation buffer persists between draws: a partial shuffle of any
/// arrangement yields a uniform subset, so no reset is needed and each draw
/// costs O(m). `m == n` consumes no randomness.
#[derive(Clone, Debug)]
pub struct BatchSampler {
    n: usize,
    m: usize,
    perm: Vec<u32>,
}

impl BatchSampler {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if m == 0 || m > n {
            return Err(Error::contract(format!("batch size must satisfy 1 <= m <= n, got m={m}, n={n}")));
        }
        if n > u32::MAX as usize {
            return Err(Error::contract("datasets beyond u32::MAX records are not supported"));
        }
        let perm = if m == n { Vec::new() } else { (0..n as u32).collect() };
        Ok(BatchSampler { n, m, perm })
    }

    pub fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> BatchIndex {
        if self.m == self.n {
            return BatchIndex::full(self.n);
        }
        let n = self.n as u32;
        for k in 0..self.m {
            let j = rng.random_range(k as u32..n) as usize;
            self.perm.swap(k, j);
        }
        BatchIndex {
            n: self.n,
            m: self.m,
            indices: self.perm[..self.m].to_vec(),
        }
    }
}

/// A uniformly random m-subset of `[0, n)`.
pub fn sample_batch<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<BatchIndex> {
    Ok(BatchSampler::new(n, m)?.draw(rng))
}
