//! Seeded generator streams.
//!
//! Every stochastic operation takes an explicit generator so runs are
//! reproducible. Independent streams (replicates, episodes, evaluation)
//! are derived from a base seed and a tag path with a SplitMix64 mix, so
//! the same `(base seed, tags...)` always yields the same stream
//! regardless of thread scheduling.

use rand::Rng as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream for a base seed alone.
pub fn seed_rng(seed: u64) -> Rng {
    derive_rng(seed, &[])
}

/// Stream derived from a base seed and a tag path, e.g.
/// `derive_rng(base, &[replicate as u64, 1])` for a replicate's
/// evaluation stream.
pub fn derive_rng(base: u64, tags: &[u64]) -> Rng {
    let mut state = base ^ 0x6c62_272e_07bb_0142;
    let mut _mix = splitmix64(&mut state);
    for &t in tags {
        state ^= t.wrapping_mul(0x2545_f491_4f6c_dd1d);
        _mix = splitmix64(&mut state);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    Rng::from_seed(key)
}

/// Child stream seeded from the parent's next draw mixed with a tag.
/// Advances the parent by one u64.
pub fn child_rng(parent: &mut Rng, tag: u64) -> Rng {
    derive_rng(parent.random::<u64>(), &[tag])
}

/// Inverse-CDF draw from a probability vector. The final positive-mass
/// bucket absorbs floating-point slack.
pub fn categorical(rng: &mut Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
            acc += p;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

pub fn bernoulli(rng: &mut Rng, p: f64) -> bool {
    rng.random::<f64>() < p
}
