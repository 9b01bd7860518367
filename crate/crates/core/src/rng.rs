//! Counter-based random streams.
//!
//! A stream is identified by `(seed, stream_id)`. The generator is ChaCha8 with
//! the stream id fed into the cipher's stream parameter, so streams are
//! independent and the output for a given pair is the same on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Deterministic sub-stream, e.g. one per direction or per trial.
    pub fn child(&self, index: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id: splitmix64(self.stream_id ^ splitmix64(index.wrapping_add(0x5851_F42D_4C95_7F2D))),
        }
    }

    pub fn generator(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
pub fn std_normal<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    let z: f64 = rng.sample(StandardNormal);
    T::lit(z)
}

/// Uniform on the open interval (0, 1).
#[inline]
pub fn open_unit<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    let u: f64 = rng.sample(rand::distr::Open01);
    T::lit(u)
}

pub fn std_normal_vec<T: Real, R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<T> {
    (0..d).map(|_| std_normal(rng)).collect()
}
