//! Seed splitting. Every random quantity is drawn from a ChaCha stream keyed by
//! the run seed and a stream id, so items can be generated independently and
//! in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Purpose {
    PriorPhantom = 1,
    TestPhantom = 2,
    Noise = 3,
    Init = 4,
}

/// Stream id for item `index` of a given purpose.
pub fn stream_id(purpose: Purpose, index: u64) -> u64 {
    ((purpose as u64) << 48) ^ index
}

pub fn rng(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(purpose, index));
    rng
}

/// A 64-bit seed for a derived item, e.g. the phantom behind test image `k`.
pub fn derive_seed(seed: u64, purpose: Purpose, index: u64) -> u64 {
    use rand::RngCore;
    rng(seed, purpose, index).next_u64()
}
