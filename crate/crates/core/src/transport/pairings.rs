use crate::error::{Error, Result};

/// Default largest vector count accepted for exhaustive enumeration.
pub const DEFAULT_CAP: usize = 12;

/// `(n - 1)!!`, the number of perfect matchings of `n` items (`n` even).
pub fn matching_count(n: usize) -> u64 {
    (1..n as u64).step_by(2).product()
}

/// Lazily enumerates every perfect matching of `0..n` exactly once.
///
/// Each matching is built by repeatedly pairing the smallest free index with
/// one of the remaining ones; a mixed-radix counter walks all choices, so
/// the order is deterministic and pairs are listed as `(smaller, larger)`.
#[derive(Debug, Clone)]
pub struct Pairings {
    n: usize,
    choice: Vec<usize>,
    done: bool,
}

impl Pairings {
    fn decode(&self) -> Vec<(usize, usize)> {
        let mut free: Vec<usize> = (0..self.n).collect();
        let mut pairs = Vec::with_capacity(self.n / 2);
        for &c in &self.choice {
            let first = free.remove(0);
            let second = free.remove(c);
            pairs.push((first, second));
        }
        pairs
    }

    fn advance(&mut self) {
        for k in (0..self.choice.len()).rev() {
            let radix = self.n - 1 - 2 * k;
            if self.choice[k] + 1 < radix {
                self.choice[k] += 1;
                return;
            }
            self.choice[k] = 0;
        }
        self.done = true;
    }
}

impl Iterator for Pairings {
    type Item = Vec<(usize, usize)>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = self.decode();
        self.advance();
        Some(item)
    }
}

/// All perfect matchings of `n_vectors` items; `n_vectors` must be even,
/// at least 2 and at most `cap`.
pub fn enumerate_pairings(n_vectors: usize, cap: usize) -> Result<Pairings> {
    if n_vectors % 2 == 1 || n_vectors == 0 {
        return Err(Error::OddVectorCount(n_vectors));
    }
    if n_vectors > cap {
        return Err(Error::CapExceeded { n: n_vectors, cap });
    }
    Ok(Pairings {
        n: n_vectors,
        choice: vec![0; n_vectors / 2],
        done: false,
    })
}

/// Checks that `pairs` covers `0..n` exactly once.
pub fn validate_matching(pairs: &[(usize, usize)], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &(a, b) in pairs {
        for i in [a, b] {
            if i >= n || seen[i] {
                return Err(Error::InvalidArgument(format!(
                    "pairing is not a perfect matching of {n} vectors (index {i})"
                )));
            }
            seen[i] = true;
        }
    }
    if seen.iter().all(|&s| s) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "pairing leaves some of the {n} vectors unmatched"
        )))
    }
}
