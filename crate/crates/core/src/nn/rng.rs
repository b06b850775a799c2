//! Deterministic randomness. Every random draw in the workspace goes through
//! a `SeedStream` derived from the master seed and a textual label, so runs
//! are bit-reproducible and independent components consume independent
//! streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

/// Derive a child seed from a master seed and a label.
///
/// Stable across platforms: SHA-256 over the little-endian seed bytes and the
/// label, truncated to 64 bits.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Seeded ChaCha12 stream with the few sampling helpers the pipeline needs.
pub struct SeedStream {
    seed: u64,
    rng: ChaCha12Rng,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream for a named component. Children depend only on the
    /// parent's seed and the label, not on how much the parent has drawn.
    pub fn child(&self, label: &str) -> SeedStream {
        SeedStream::new(derive_seed(self.seed, label))
    }

    pub fn u64(&mut self) -> u64 {
        self.rng.gen()
    }

    /// Uniform in [0, 1).
    pub fn f64(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Uniform integer in [0, n).
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        self.rng.gen_range(0..n)
    }

    /// Standard normal via Box-Muller on the ChaCha stream.
    pub fn normal(&mut self) -> f64 {
        loop {
            let u1 = self.rng.gen::<f64>();
            let u2 = self.rng.gen::<f64>();
            if u1 > f64::MIN_POSITIVE {
                return (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
            }
        }
    }

    pub fn normal_vec(&mut self, n: usize, mean: f64, std: f64) -> Vec<f64> {
        (0..n).map(|_| mean + std * self.normal()).collect()
    }

    pub fn uniform_vec(&mut self, n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|_| lo + (hi - lo) * self.f64()).collect()
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.rng.gen_range(0..=i);
            items.swap(i, j);
        }
    }

    /// Inverted-dropout keep mask: entries are 1/(1-p) with probability 1-p,
    /// else 0. `p` must be in [0, 1).
    pub fn dropout_mask(&mut self, n: usize, p: f64) -> Vec<f64> {
        assert!((0.0..1.0).contains(&p), "dropout p out of range");
        let scale = 1.0 / (1.0 - p);
        (0..n)
            .map(|_| if self.f64() < p { 0.0 } else { scale })
            .collect()
    }
}
