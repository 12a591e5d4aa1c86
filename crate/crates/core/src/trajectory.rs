//! Episode trajectories and rollout routines.
//!
//! A rollout splits its generator into a dynamics stream and an emission
//! stream, so a latent-only rollout with the same parent generator walks
//! the identical latent path as a full observation rollout. That makes
//! the "true decoders simulate the latent MDP" identity checkable
//! episode by episode rather than only in distribution.

use crate::env::BlockEnv;
use crate::policy::{ObsPolicy, TabularPolicy};
use crate::rng::{child_rng, Rng};
use crate::ulo::Decoder;

pub type Observation = Vec<f64>;

const DYNAMICS_STREAM: u64 = 0x01;
const EMISSION_STREAM: u64 = 0x02;

/// One episode. `states` holds the per-level representation the episode
/// was played on: observations for environment rollouts, state indices
/// for latent rollouts. `latents` carries the true latent sequence only
/// when the environment's diagnostics channel is enabled.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    /// Length `H + 1`: one entry per level including the terminal one.
    pub states: Vec<S>,
    /// Length `H`.
    pub actions: Vec<usize>,
    /// Length `H`.
    pub rewards: Vec<f64>,
    pub latents: Option<Vec<usize>>,
}

pub type ObsTrajectory = Trajectory<Observation>;
pub type LatentTrajectory = Trajectory<usize>;

impl<S> Trajectory<S> {
    pub fn reward_sum(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

/// Rolls one full episode of `phi` on `env`.
pub fn sample_trajectory<E: BlockEnv>(env: &E, phi: &ObsPolicy, rng: &mut Rng) -> ObsTrajectory {
    assert_eq!(
        env.horizon(),
        phi.horizon(),
        "environment and policy horizons differ"
    );
    env.note_episode();
    let mut dyn_rng = child_rng(rng, DYNAMICS_STREAM);
    let mut emit_rng = child_rng(rng, EMISSION_STREAM);
    let horizon = env.horizon();
    let mut observations = Vec::with_capacity(horizon + 1);
    let mut actions = Vec::with_capacity(horizon);
    let mut rewards = Vec::with_capacity(horizon);
    let mut latents = Vec::with_capacity(horizon + 1);
    let mut s = env.initial_state();
    latents.push(s);
    let mut obs = env.emit(0, s, &mut emit_rng);
    for h in 0..horizon {
        let a = phi.act(h, &obs);
        observations.push(obs);
        let s_next = env.latent_step(h, s, a, &mut dyn_rng);
        let r = env.step_reward(h, s, a, s_next, &mut dyn_rng);
        actions.push(a);
        rewards.push(r);
        s = s_next;
        latents.push(s);
        obs = env.emit(h + 1, s, &mut emit_rng);
    }
    observations.push(obs);
    Trajectory {
        states: observations,
        actions,
        rewards,
        latents: env.diagnostics().then_some(latents),
    }
}

/// Rolls one episode on the latent dynamics alone, skipping emissions.
/// With the same parent generator this follows exactly the latent path
/// of [`sample_trajectory`].
pub fn sample_latent_trajectory<E: BlockEnv>(
    env: &E,
    pi: &TabularPolicy,
    rng: &mut Rng,
) -> LatentTrajectory {
    assert_eq!(
        env.horizon(),
        pi.horizon(),
        "environment and policy horizons differ"
    );
    env.note_episode();
    let mut dyn_rng = child_rng(rng, DYNAMICS_STREAM);
    let _ = child_rng(rng, EMISSION_STREAM);
    let horizon = env.horizon();
    let mut states = Vec::with_capacity(horizon + 1);
    let mut actions = Vec::with_capacity(horizon);
    let mut rewards = Vec::with_capacity(horizon);
    let mut s = env.initial_state();
    states.push(s);
    for h in 0..horizon {
        let a = pi.action(h, s);
        let s_next = env.latent_step(h, s, a, &mut dyn_rng);
        let r = env.step_reward(h, s, a, s_next, &mut dyn_rng);
        actions.push(a);
        rewards.push(r);
        s = s_next;
        states.push(s);
    }
    Trajectory {
        states,
        actions,
        rewards,
        latents: None,
    }
}

/// Replaces each observation with its decoded state index. The
/// diagnostics channel is dropped: downstream consumers only ever see
/// decoded states.
pub fn decode_trajectory(traj: &ObsTrajectory, decoders: &[Decoder]) -> LatentTrajectory {
    assert_eq!(decoders.len(), traj.states.len(), "decoder count mismatch");
    Trajectory {
        states: traj
            .states
            .iter()
            .enumerate()
            .map(|(h, obs)| decoders[h].predict(obs))
            .collect(),
        actions: traj.actions.clone(),
        rewards: traj.rewards.clone(),
        latents: None,
    }
}

/// Empirical mean episodic reward over `episodes` fresh rollouts.
pub fn mean_episode_reward<E: BlockEnv>(
    env: &E,
    phi: &ObsPolicy,
    episodes: usize,
    rng: &mut Rng,
) -> f64 {
    assert!(episodes >= 1, "need at least one evaluation episode");
    let total: f64 = (0..episodes)
        .map(|_| sample_trajectory(env, phi, rng).reward_sum())
        .sum();
    total / episodes as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Instrumented;
    use crate::latent::RewardNoise;
    use crate::lock::{LockEnv, LockSpec};
    use crate::policy::compose_policy;
    use crate::rng::seed_rng;

    #[test]
    fn deterministic_env_reproduces_bitwise() {
        let spec = LockSpec::bernoulli(5, 0.0, 3).with_reward_noise(RewardNoise::Deterministic);
        let env = LockEnv::new(spec).unwrap();
        let pi = TabularPolicy::constant(&env.states_per_level()[..5], 2);
        let phi = compose_policy(pi, env.oracle_decoders()).unwrap();
        let a = sample_trajectory(&env, &phi, &mut seed_rng(42));
        let b = sample_trajectory(&env, &phi, &mut seed_rng(42));
        assert_eq!(a, b);
    }

    #[test]
    fn trajectory_shape_matches_horizon() {
        let env = LockEnv::new(LockSpec::bernoulli(5, 0.2, 3)).unwrap();
        let pi = TabularPolicy::constant(&env.states_per_level()[..5], 0);
        let phi = compose_policy(pi, env.oracle_decoders()).unwrap();
        let traj = sample_trajectory(&env, &phi, &mut seed_rng(1));
        assert_eq!(traj.states.len(), 6);
        assert_eq!(traj.actions.len(), 5);
        assert_eq!(traj.rewards.len(), 5);
        assert!(traj.latents.is_none());
    }

    #[test]
    fn reward_sum_within_horizon_bounds() {
        let env = LockEnv::new(LockSpec::bernoulli(6, 0.5, 9)).unwrap();
        let mut rng = seed_rng(8);
        for seed in 0..200 {
            let pi = TabularPolicy::random(&env.states_per_level()[..6], 4, &mut seed_rng(seed));
            let phi = compose_policy(pi, env.oracle_decoders()).unwrap();
            let traj = sample_trajectory(&env, &phi, &mut rng);
            let sum = traj.reward_sum();
            assert!((0.0..=6.0).contains(&sum));
            assert!(traj.rewards.iter().all(|r| (0.0..=1.0).contains(r)));
        }
    }

    #[test]
    fn latent_rollout_matches_decoded_rollout_stepwise() {
        let env = LockEnv::new(LockSpec::bernoulli(5, 0.2, 11)).unwrap();
        let mut rng_a = seed_rng(55);
        let mut rng_b = seed_rng(55);
        let pi = TabularPolicy::random(&env.states_per_level()[..5], 4, &mut seed_rng(6));
        let phi = compose_policy(pi.clone(), env.oracle_decoders()).unwrap();
        for _ in 0..100 {
            let obs_traj = sample_trajectory(&env, &phi, &mut rng_a);
            let lat_traj = sample_latent_trajectory(&env, &pi, &mut rng_b);
            let decoded = decode_trajectory(&obs_traj, phi.decoders());
            assert_eq!(decoded.states, lat_traj.states);
            assert_eq!(decoded.actions, lat_traj.actions);
            assert_eq!(decoded.rewards, lat_traj.rewards);
        }
    }

    #[test]
    fn optimal_policy_mean_reward_near_half() {
        let env = LockEnv::new(LockSpec::bernoulli(5, 0.2, 17)).unwrap();
        let vi = crate::latent::value_iteration(env.mdp());
        let phi = compose_policy(vi.policy, env.oracle_decoders()).unwrap();
        let mean = mean_episode_reward(&env, &phi, 10_000, &mut seed_rng(4));
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn episode_counter_counts_both_rollout_kinds() {
        let env = Instrumented::new(LockEnv::new(LockSpec::bernoulli(4, 0.0, 2)).unwrap());
        let pi = TabularPolicy::constant(&env.states_per_level()[..4], 0);
        let phi = compose_policy(pi.clone(), env.inner().oracle_decoders()).unwrap();
        let mut rng = seed_rng(10);
        for _ in 0..7 {
            sample_trajectory(&env, &phi, &mut rng);
        }
        for _ in 0..5 {
            sample_latent_trajectory(&env, &pi, &mut rng);
        }
        assert_eq!(env.episodes(), 12);
    }
}
