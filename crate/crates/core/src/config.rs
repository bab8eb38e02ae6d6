//! Bond and spin configurations.

use serde::{Deserialize, Serialize};

/// A `{closed, open}` assignment on the edges of a graph, bit-packed.
///
/// Bit `e` of the packed words is set when edge `e` is open. Unused high bits
/// of the last word are always zero, so equality and hashing are structural.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct BondConfig {
    len: usize,
    words: Vec<u64>,
}

impl BondConfig {
    /// All edges closed.
    pub fn closed(len: usize) -> Self {
        BondConfig {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    /// All edges open.
    pub fn open(len: usize) -> Self {
        let mut c = Self::closed(len);
        for w in c.words.iter_mut() {
            *w = u64::MAX;
        }
        c.trim();
        c
    }

    /// Builds a configuration from the low `len` bits of `mask` (`len <= 64`).
    pub fn from_mask(len: usize, mask: u64) -> Self {
        assert!(len <= 64, "from_mask needs len <= 64");
        let mut c = Self::closed(len);
        if len > 0 {
            c.words[0] = mask;
            c.trim();
        }
        c
    }

    pub fn from_open_edges(len: usize, open: impl IntoIterator<Item = usize>) -> Self {
        let mut c = Self::closed(len);
        for e in open {
            c.set(e, true);
        }
        c
    }

    pub fn from_words(len: usize, words: Vec<u64>) -> Self {
        assert_eq!(words.len(), len.div_ceil(64));
        let mut c = BondConfig { len, words };
        c.trim();
        c
    }

    fn trim(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// The configuration as a single mask, if it has at most 64 edges.
    pub fn as_mask(&self) -> Option<u64> {
        match self.words.len() {
            0 => Some(0),
            1 => Some(self.words[0]),
            _ => None,
        }
    }

    /// Overwrites the configuration with a mask (`len <= 64`), reusing storage.
    pub fn set_mask(&mut self, mask: u64) {
        assert!(self.len <= 64);
        if self.len > 0 {
            self.words[0] = mask;
            self.trim();
        }
    }

    #[inline]
    pub fn get(&self, e: usize) -> bool {
        debug_assert!(e < self.len);
        (self.words[e >> 6] >> (e & 63)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, e: usize, open: bool) {
        debug_assert!(e < self.len);
        let bit = 1u64 << (e & 63);
        if open {
            self.words[e >> 6] |= bit;
        } else {
            self.words[e >> 6] &= !bit;
        }
    }

    #[inline]
    pub fn toggle(&mut self, e: usize) {
        self.words[e >> 6] ^= 1u64 << (e & 63);
    }

    pub fn clear(&mut self) {
        self.words.fill(0);
    }

    pub fn count_open(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Indices of open edges in increasing order.
    pub fn iter_open(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let b = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(i * 64 + b)
                }
            })
        })
    }

    pub fn is_subset_of(&self, other: &BondConfig) -> bool {
        self.len == other.len
            && self
                .words
                .iter()
                .zip(&other.words)
                .all(|(a, b)| a & !b == 0)
    }

    pub fn union_with(&mut self, other: &BondConfig) {
        assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn xor_with(&mut self, other: &BondConfig) {
        assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }
}

/// A `±1` assignment on the lattice vertices; the ghost is implicitly `+1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpinConfig(pub Vec<i8>);

impl SpinConfig {
    pub fn all_plus(n: usize) -> Self {
        SpinConfig(vec![1; n])
    }

    /// Spins from the low `n` bits of `bits`: bit set means `+1`.
    pub fn from_bits(n: usize, bits: u64) -> Self {
        SpinConfig((0..n).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, v: usize) -> i8 {
        self.0[v]
    }

    /// Spin of `v`, treating every index past the lattice vertices as the ghost.
    #[inline]
    pub fn get_or_ghost(&self, v: usize) -> i8 {
        if v < self.0.len() {
            self.0[v]
        } else {
            1
        }
    }

    pub fn magnetization(&self) -> f64 {
        self.0.iter().map(|&s| s as f64).sum::<f64>() / self.0.len().max(1) as f64
    }
}
