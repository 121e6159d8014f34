//! Seeded, stream-partitioned random number generation.
//!
//! Every Monte Carlo draw in the crate comes from a [`SeedSpec`]: a master seed
//! selecting a ChaCha8 key and a stream id selecting an independent keystream.
//! Replicate `k` of an experiment uses stream `k`, so results do not depend on
//! how work is split across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    /// Same master seed, different stream.
    pub fn stream(self, stream_id: u64) -> Self {
        Self {
            stream_id,
            ..self
        }
    }

    /// A fresh master seed for a named sub-task, so that e.g. bootstrap draws
    /// never share streams with the samples they resample.
    pub fn derive(self, tag: u64) -> Self {
        Self {
            master_seed: splitmix64(self.master_seed ^ splitmix64(tag.wrapping_add(self.stream_id))),
            stream_id: 0,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn fill_standard_normal<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
}

/// `d` i.i.d. N(0,1) values from the given stream.
pub fn sample_standard_gaussian(d: usize, seed: SeedSpec) -> Vec<f64> {
    let mut out = vec![0.0; d];
    fill_standard_normal(&mut seed.rng(), &mut out);
    out
}

/// Splits `0..total` into `batches` contiguous ranges of near-equal length.
pub(crate) fn batch_ranges(total: usize, batches: usize) -> Vec<std::ops::Range<usize>> {
    let batches = batches.clamp(1, total.max(1));
    (0..batches)
        .map(|b| (b * total / batches)..((b + 1) * total / batches))
        .collect()
}
