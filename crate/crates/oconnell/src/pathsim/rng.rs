//! Per-path random streams.
//!
//! Every path owns ChaCha8 stream `path` under the run seed, so what a path
//! sees does not depend on which thread runs it or in what order. Auxiliary
//! draws (kill uniforms, bootstrap resampling) use disjoint stream ranges.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const AUX: u64 = 1 << 62;
const BOOT: u64 = 1 << 63;

pub(crate) fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(path);
    r
}

/// Stream for the kill uniforms of bernoulli mode, so both kill modes see the
/// same Brownian increments.
pub(crate) fn aux_rng(seed: u64, path: u64) -> ChaCha8Rng {
    path_rng(seed, AUX | path)
}

pub(crate) fn bootstrap_rng(seed: u64) -> ChaCha8Rng {
    path_rng(seed, BOOT)
}

/// Identifier reported for a path: the stream index under the run seed.
pub fn path_stream(path: u64) -> u64 {
    path
}

#[inline]
pub(crate) fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}
