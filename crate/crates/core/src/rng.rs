//! Per-trial random substreams.
//!
//! Trial `i` of a run seeded with `seed` always draws from the ChaCha8 stream
//! `(seed, i)`, so tallies do not depend on how trials are spread over threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::protocol::{Tally, TrialRecord};

pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Runs `n_trials` independent trials in parallel and sums their records.
pub fn par_tally<F>(n_trials: u64, seed: u64, trial: F) -> Tally
where
    F: Fn(&mut ChaCha8Rng) -> TrialRecord + Sync,
{
    (0..n_trials)
        .into_par_iter()
        .fold(Tally::default, |mut t, i| {
            let mut rng = trial_rng(seed, i);
            t.record(&trial(&mut rng));
            t
        })
        .reduce(Tally::default, |mut a, b| {
            a.merge(&b);
            a
        })
}
