//! Interactive episodic environment interface and an instrumented
//! wrapper that counts consumed episodes.

use crate::rng::Rng;
use crate::trajectory::Observation;
use std::sync::atomic::{AtomicU64, Ordering};

/// An episodic environment with hidden latent states emitting rich
/// observations. Implementations are cheap value objects: all methods
/// take `&self` plus an explicit generator, so one instance per worker
/// with its own stream is safe.
pub trait BlockEnv {
    fn horizon(&self) -> usize;
    fn num_actions(&self) -> usize;
    /// Latent state counts per level, length `horizon + 1`.
    fn states_per_level(&self) -> &[usize];
    fn obs_dim(&self) -> usize;

    fn initial_state(&self) -> usize {
        0
    }

    fn latent_step(&self, h: usize, s: usize, a: usize, rng: &mut Rng) -> usize;

    /// Reward paid on the transition `(h, s, a) -> s_next`.
    fn step_reward(&self, h: usize, s: usize, a: usize, s_next: usize, rng: &mut Rng) -> f64;

    fn emit(&self, h: usize, s: usize, rng: &mut Rng) -> Observation;

    /// Whether rollouts may record the true latent-state sequence. Off by
    /// default; the training path never reads it.
    fn diagnostics(&self) -> bool {
        false
    }

    /// Called once per sampled episode; hook for instrumentation.
    fn note_episode(&self) {}
}

impl<E: BlockEnv> BlockEnv for &E {
    fn horizon(&self) -> usize {
        (**self).horizon()
    }
    fn num_actions(&self) -> usize {
        (**self).num_actions()
    }
    fn states_per_level(&self) -> &[usize] {
        (**self).states_per_level()
    }
    fn obs_dim(&self) -> usize {
        (**self).obs_dim()
    }
    fn initial_state(&self) -> usize {
        (**self).initial_state()
    }
    fn latent_step(&self, h: usize, s: usize, a: usize, rng: &mut Rng) -> usize {
        (**self).latent_step(h, s, a, rng)
    }
    fn step_reward(&self, h: usize, s: usize, a: usize, s_next: usize, rng: &mut Rng) -> f64 {
        (**self).step_reward(h, s, a, s_next, rng)
    }
    fn emit(&self, h: usize, s: usize, rng: &mut Rng) -> Observation {
        (**self).emit(h, s, rng)
    }
    fn diagnostics(&self) -> bool {
        (**self).diagnostics()
    }
    fn note_episode(&self) {
        (**self).note_episode()
    }
}

/// Wraps an environment with an episode counter for exact trajectory
/// accounting. The counter is atomic so replicate workers can share a
/// read-only reference if they ever need to.
pub struct Instrumented<E> {
    inner: E,
    episodes: AtomicU64,
}

impl<E: BlockEnv> Instrumented<E> {
    pub fn new(inner: E) -> Self {
        Instrumented {
            inner,
            episodes: AtomicU64::new(0),
        }
    }

    pub fn episodes(&self) -> u64 {
        self.episodes.load(Ordering::Relaxed)
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }
}

impl<E: BlockEnv> BlockEnv for Instrumented<E> {
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }
    fn num_actions(&self) -> usize {
        self.inner.num_actions()
    }
    fn states_per_level(&self) -> &[usize] {
        self.inner.states_per_level()
    }
    fn obs_dim(&self) -> usize {
        self.inner.obs_dim()
    }
    fn initial_state(&self) -> usize {
        self.inner.initial_state()
    }
    fn latent_step(&self, h: usize, s: usize, a: usize, rng: &mut Rng) -> usize {
        self.inner.latent_step(h, s, a, rng)
    }
    fn step_reward(&self, h: usize, s: usize, a: usize, s_next: usize, rng: &mut Rng) -> f64 {
        self.inner.step_reward(h, s, a, s_next, rng)
    }
    fn emit(&self, h: usize, s: usize, rng: &mut Rng) -> Observation {
        self.inner.emit(h, s, rng)
    }
    fn diagnostics(&self) -> bool {
        self.inner.diagnostics()
    }
    fn note_episode(&self) {
        self.episodes.fetch_add(1, Ordering::Relaxed);
    }
}
