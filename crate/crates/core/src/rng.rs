//! Seeded substreams.
//!
//! Every random draw in a simulation comes from a ChaCha8 generator keyed by
//! the user seed and positioned on a stream derived from
//! `(trial, interval, cell, purpose)`. Results are therefore independent of
//! evaluation order and thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a substream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Truth = 1,
    Activation = 2,
    Measurement = 3,
    Channel = 4,
    Noise = 5,
    Quantization = 6,
}

/// User seed plus the trial a draw belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngSeed {
    pub seed: u64,
    pub trial: u64,
}

impl RngSeed {
    pub fn new(seed: u64, trial: u64) -> Self {
        Self { seed, trial }
    }

    pub fn stream(&self, purpose: Purpose, interval: u64, cell: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut h = splitmix64(self.trial);
        h = splitmix64(h ^ interval);
        h = splitmix64(h ^ cell);
        h = splitmix64(h ^ purpose as u64);
        rng.set_stream(h);
        rng
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
