//! Counter-based random streams.
//!
//! A scenario is identified by `(seed, index)`; its `k`-th standard normal
//! draw is a pure function of `(seed, index, k)`. Each normal consumes exactly
//! two 64-bit words of a ChaCha8 stream (Box–Muller, cosine branch only), so
//! draw `k` always lives at word position `4k` of stream `index`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS_PER_NORMAL: u128 = 4;

pub struct NormalStream {
    rng: ChaCha8Rng,
}

impl NormalStream {
    pub fn new(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        Self { rng }
    }

    /// Stream positioned so that the next call returns draw number `draw`.
    pub fn at(seed: u64, index: u64, draw: u64) -> Self {
        let mut s = Self::new(seed, index);
        s.rng.set_word_pos(draw as u128 * WORDS_PER_NORMAL);
        s
    }

    pub fn next_normal(&mut self) -> f64 {
        let u1 = unit_open_closed(self.rng.next_u64());
        let u2 = unit(self.rng.next_u64());
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Uniform on `[0, 1)` from the top 53 bits.
pub fn unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform on `(0, 1]`.
fn unit_open_closed(bits: u64) -> f64 {
    1.0 - unit(bits)
}

pub fn uniform(rng: &mut impl RngCore) -> f64 {
    unit(rng.next_u64())
}

pub fn normal(rng: &mut impl RngCore) -> f64 {
    let u1 = unit_open_closed(rng.next_u64());
    let u2 = unit(rng.next_u64());
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Seeded general-purpose generator for non-scenario randomness
/// (multi-start points, control sampling).
pub fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
