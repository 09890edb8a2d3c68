//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by a
//! `(seed, stream)` pair. Work that may run in parallel (Monte Carlo trials,
//! random restarts) derives one stream per unit of work, so results do not
//! depend on how that work is scheduled or sharded.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type StreamRng = ChaCha8Rng;

/// Generator for substream `stream` of `seed`.
pub fn substream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream keys for the distinct consumers inside one seeded computation.
pub(crate) mod streams {
    pub const FRAME: u64 = 1;
    pub const KT: u64 = 1 << 20;
    pub const BT: u64 = 2 << 20;
    pub const NEAR_ORTHO: u64 = 3 << 20;
    pub const TALAGRAND: u64 = 4 << 20;
    pub const CERT_SAMPLES: u64 = 5 << 20;
    pub const RADEMACHER: u64 = 1 << 40;
    pub const GAUSSIAN_NORM: u64 = 2 << 40;
    pub const COMPLEMENT: u64 = 3 << 40;
}

pub fn gaussian(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn gaussian_vector(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| gaussian(rng)).collect()
}

/// Uniformly random unit vector in `R^n`.
pub fn unit_sphere(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    loop {
        let g = gaussian_vector(rng, n);
        let r = crate::matrix::norm2(&g);
        if r > 1e-12 {
            return g.into_iter().map(|x| x / r).collect();
        }
    }
}

/// Fisher–Yates shuffle of `0..n`.
pub fn permutation(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        p.swap(i, j);
    }
    p
}
