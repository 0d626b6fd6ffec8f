//! Enumeration of m-subsets of `[0, n)` in colexicographic order.

/// Yields every m-subset of `[0, n)` as a sorted index vector, in colex order.
#[derive(Clone, Debug)]
pub struct Subsets {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Subsets {
    /// # Panics
    /// If `m == 0` or `m > n`.
    pub fn new(n: usize, m: usize) -> Self {
        assert!(m >= 1 && m <= n, "need 1 <= m <= n");
        Subsets {
            n,
            current: Some((0..m).collect()),
        }
    }
}

/// Colex successor: bump the lowest element that can move up, reset the ones
/// below it to `0..j`.
fn successor(c: &mut [usize], n: usize) -> bool {
    let m = c.len();
    for j in 0..m {
        let limit = if j + 1 < m { c[j + 1] } else { n };
        if c[j] + 1 < limit {
            c[j] += 1;
            for (i, v) in c.iter_mut().enumerate().take(j) {
                *v = i;
            }
            return true;
        }
    }
    false
}

impl Iterator for Subsets {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.take()?;
        let mut next = out.clone();
        if successor(&mut next, self.n) {
            self.current = Some(next);
        }
        Some(out)
    }
}
