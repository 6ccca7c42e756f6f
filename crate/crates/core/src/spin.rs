//! Bit-packed classical spin configurations.
//!
//! A set bit means spin −1, so basis index 0 is the all-plus state and the
//! integer value of a configuration on at most 64 sites is its quantum basis index.

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpinConfig {
    n: usize,
    words: Vec<u64>,
}

impl SpinConfig {
    pub fn all_plus(n: usize) -> Self {
        Self { n, words: vec![0; n.div_ceil(64)] }
    }

    pub fn all_minus(n: usize) -> Self {
        let mut z = Self::all_plus(n);
        for i in 0..n {
            z.flip(i);
        }
        z
    }

    /// Configuration whose bit pattern is `index` (site i is bit i).
    pub fn from_index(n: usize, index: u64) -> Self {
        assert!(n <= 64, "from_index needs at most 64 sites");
        let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        Self { n, words: vec![index & mask] }
    }

    pub fn from_spins(spins: &[i8]) -> Self {
        let mut z = Self::all_plus(spins.len());
        for (i, &s) in spins.iter().enumerate() {
            assert!(s == 1 || s == -1, "spins must be ±1");
            if s < 0 {
                z.flip(i);
            }
        }
        z
    }

    pub fn index(&self) -> u64 {
        assert!(self.n <= 64, "index needs at most 64 sites");
        self.words.first().copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn spin(&self, i: usize) -> i8 {
        if (self.words[i >> 6] >> (i & 63)) & 1 == 1 {
            -1
        } else {
            1
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, s: i8) {
        if self.spin(i) != s {
            self.flip(i);
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.words[i >> 6] ^= 1u64 << (i & 63);
    }

    /// Global spin flip.
    pub fn flipped(&self) -> Self {
        let mut z = self.clone();
        for i in 0..self.n {
            z.flip(i);
        }
        z
    }

    pub fn magnetization(&self) -> i64 {
        let down: u32 = self.words.iter().map(|w| w.count_ones()).sum();
        self.n as i64 - 2 * down as i64
    }

    pub fn spins(&self) -> Vec<i8> {
        (0..self.n).map(|i| self.spin(i)).collect()
    }

    pub fn hamming(&self, other: &Self) -> usize {
        self.words.iter().zip(&other.words).map(|(a, b)| (a ^ b).count_ones() as usize).sum()
    }
}
