//! Permutations on small index sets, used for decoder label relabeling
//! and environment action relabeling.

use crate::error::{Error, Result};
use crate::rng::Rng;
use rand::Rng as _;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    /// Transposition swapping `i` and `j`; identity when `i == j`.
    pub fn transposition(n: usize, i: usize, j: usize) -> Self {
        assert!(i < n && j < n, "transposition out of range");
        let mut v: Vec<usize> = (0..n).collect();
        v.swap(i, j);
        Permutation(v)
    }

    pub fn from_vec(v: Vec<usize>) -> Result<Self> {
        let n = v.len();
        let mut seen = vec![false; n];
        for &x in &v {
            if x >= n || seen[x] {
                return Err(Error::contract(format!("not a permutation: {v:?}")));
            }
            seen[x] = true;
        }
        Ok(Permutation(v))
    }

    /// Uniform random permutation (Fisher-Yates).
    pub fn random(n: usize, rng: &mut Rng) -> Self {
        let mut v: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            v.swap(i, j);
        }
        Permutation(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &x)| i == x)
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.0[i]
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose_after(&self, other: &Permutation) -> Permutation {
        assert_eq!(self.len(), other.len(), "permutation size mismatch");
        Permutation(other.0.iter().map(|&x| self.0[x]).collect())
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.0.len()];
        for (i, &x) in self.0.iter().enumerate() {
            inv[x] = i;
        }
        Permutation(inv)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

/// Visit all permutations of size `n` (Heap's algorithm). Intended for
/// exhaustive label matching at small cluster counts.
pub fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    assert!(n <= 8, "exhaustive permutation search limited to n <= 8");
    let mut v: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    f(&v);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                v.swap(0, i);
            } else {
                v.swap(c[i], i);
            }
            f(&v);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}
