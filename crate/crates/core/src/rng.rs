//! Seeded, counter-based random streams.
//!
//! Every stream is a ChaCha8 keystream. The key packs `(seed, replication,
//! purpose)` and the 64-bit ChaCha stream id carries an index (a training
//! point, a Monte Carlo chunk). Two streams share no state, so points and
//! replications can be generated in any order or in parallel and still
//! reproduce bit-for-bit.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::oracles::normal::norm_inv_cdf;

/// What a stream is used for. Distinct purposes get disjoint keys.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Purpose {
    Dataset,
    Init,
    Shuffle,
    Check,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Dataset => 0x6461_7461,
            Purpose::Init => 0x696e_6974,
            Purpose::Shuffle => 0x7368_7566,
            Purpose::Check => 0x6368_6563,
        }
    }
}

/// Root of the stream tree for one `(seed, replication)` pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamFactory {
    seed: u64,
    replication: u64,
}

impl StreamFactory {
    pub fn new(seed: u64, replication: u64) -> Self {
        Self { seed, replication }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replication(&self) -> u64 {
        self.replication
    }

    pub fn stream(&self, purpose: Purpose, index: u64) -> RngStream {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.replication.to_le_bytes());
        key[16..24].copy_from_slice(&purpose.tag().to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(index);
        RngStream { rng }
    }
}

/// A single substream. Not shared across threads; each worker owns one.
#[derive(Clone, Debug)]
pub struct RngStream {
    rng: ChaCha8Rng,
}

impl RngStream {
    /// Uniform on the open interval (0, 1), on the 2⁻⁵³ lattice offset by half a step.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal by inverse-CDF transform of one uniform.
    #[inline]
    pub fn normal(&mut self) -> f64 {
        norm_inv_cdf(self.uniform())
    }

    pub fn fill_normals(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.normal();
        }
    }

    /// Integer in `0..n` by multiply-shift.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        ((self.rng.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
