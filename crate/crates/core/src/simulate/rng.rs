//! Reproducible random number streams.
//!
//! Every consumer addresses an independent stream by (seed, rep, stream).
//! ChaCha's 64-bit stream nonce carries the (rep, stream) pair, so
//! replications can run in parallel and still produce identical output for
//! a given seed, independent of thread scheduling.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Independent generator for (seed, rep, stream). `stream` must be < 2^16.
pub fn stream_rng(seed: u64, rep: u64, stream: u64) -> ChaCha8Rng {
    debug_assert!(stream < (1 << 16));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((rep << 16) | (stream & 0xFFFF));
    rng
}

pub fn fill_standard_normal<R: Rng>(rng: &mut R, m: &mut DMatrix<f64>) {
    for v in m.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
}

pub fn standard_normal_vector<R: Rng>(rng: &mut R, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample(StandardNormal))
}
