//! Reproducible random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream keyed by the run seed
//! and a tuple of tags (experiment, voxel, trial block, ...). Work is split
//! into fixed-size trial blocks, each with its own stream, so results do not
//! depend on how blocks are scheduled across threads.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Trials per independently seeded block.
pub const TRIAL_BLOCK: usize = 4096;

/// Root of a family of independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamSeed(pub u64);

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl StreamSeed {
    /// Derives a child seed; distinct tag paths give unrelated streams.
    pub fn child(self, tag: u64) -> StreamSeed {
        StreamSeed(splitmix64(
            self.0 ^ splitmix64(tag.wrapping_add(0x6A09_E667_F3BC_C909)),
        ))
    }

    pub fn derive(self, tags: &[u64]) -> StreamSeed {
        tags.iter().fold(self, |s, &t| s.child(t))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

/// Circularly-symmetric complex Gaussian with the given variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Unit-modulus symbol with uniform phase.
pub fn unit_symbol<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * rng.random::<f64>())
}

/// Splits `n` trials into `(block index, block length)` pairs.
pub fn trial_blocks(n: usize) -> impl Iterator<Item = (u64, usize)> {
    (0..n.div_ceil(TRIAL_BLOCK)).map(move |b| {
        let start = b * TRIAL_BLOCK;
        (b as u64, TRIAL_BLOCK.min(n - start))
    })
}
