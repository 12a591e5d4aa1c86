//! Tabular latent-space MDP: per-level transition kernels, reward means,
//! and the exact dynamic-programming oracles used as ground truth.
//!
//! Levels are 0-based throughout the crate: decision levels run over
//! `0..H` and the terminal level is `H`, so `states_per_level` has
//! length `H + 1`.

use crate::error::{Error, Result};
use crate::policy::TabularPolicy;

/// Row sums of a transition kernel must match 1 to this tolerance after
/// construction-time normalization.
pub const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardNoise {
    /// Rewards are paid at their mean.
    Deterministic,
    /// Rewards are 0/1 draws with the stated mean.
    Bernoulli,
}

#[derive(Debug, Clone)]
pub struct LatentMdp {
    horizon: usize,
    states_per_level: Vec<usize>,
    num_actions: usize,
    /// `transition[h][s][a][s']`, `h` in `0..H`.
    transition: Vec<Vec<Vec<Vec<f64>>>>,
    /// `reward_mean[h][s][a]` in `[0, 1]`.
    reward_mean: Vec<Vec<Vec<f64>>>,
    reward_noise: RewardNoise,
}

impl LatentMdp {
    /// Builds and validates a latent MDP. Transition rows are normalized,
    /// then checked against [`PROB_TOL`]; zero rows and out-of-range
    /// reward means are rejected.
    pub fn new(
        states_per_level: Vec<usize>,
        num_actions: usize,
        mut transition: Vec<Vec<Vec<Vec<f64>>>>,
        reward_mean: Vec<Vec<Vec<f64>>>,
        reward_noise: RewardNoise,
    ) -> Result<Self> {
        if states_per_level.len() < 2 {
            return Err(Error::contract("need at least one decision level"));
        }
        let horizon = states_per_level.len() - 1;
        if num_actions == 0 {
            return Err(Error::contract("need at least one action"));
        }
        if states_per_level.iter().any(|&n| n == 0) {
            return Err(Error::contract("every level needs at least one state"));
        }
        if transition.len() != horizon || reward_mean.len() != horizon {
            return Err(Error::contract("kernel/reward level count must equal horizon"));
        }
        for h in 0..horizon {
            if transition[h].len() != states_per_level[h] || reward_mean[h].len() != states_per_level[h] {
                return Err(Error::contract(format!("level {h}: state count mismatch")));
            }
            for s in 0..states_per_level[h] {
                if transition[h][s].len() != num_actions || reward_mean[h][s].len() != num_actions {
                    return Err(Error::contract(format!("level {h} state {s}: action count mismatch")));
                }
                for a in 0..num_actions {
                    let row = &mut transition[h][s][a];
                    if row.len() != states_per_level[h + 1] {
                        return Err(Error::contract(format!(
                            "level {h} ({s},{a}): next-state count mismatch"
                        )));
                    }
                    if row.iter().any(|&p| !p.is_finite() || p < 0.0) {
                        return Err(Error::contract(format!(
                            "level {h} ({s},{a}): negative or non-finite probability"
                        )));
                    }
                    let sum: f64 = row.iter().sum();
                    if sum <= 0.0 {
                        return Err(Error::contract(format!("level {h} ({s},{a}): zero row")));
                    }
                    for p in row.iter_mut() {
                        *p /= sum;
                    }
                    let renorm: f64 = row.iter().sum();
                    if (renorm - 1.0).abs() > PROB_TOL {
                        return Err(Error::contract(format!(
                            "level {h} ({s},{a}): row sum {renorm} beyond tolerance"
                        )));
                    }
                    let r = reward_mean[h][s][a];
                    if !(0.0..=1.0).contains(&r) {
                        return Err(Error::contract(format!(
                            "level {h} ({s},{a}): reward mean {r} outside [0,1]"
                        )));
                    }
                }
            }
        }
        Ok(LatentMdp {
            horizon,
            states_per_level,
            num_actions,
            transition,
            reward_mean,
            reward_noise,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn states_per_level(&self) -> &[usize] {
        &self.states_per_level
    }

    pub fn states_at(&self, level: usize) -> usize {
        self.states_per_level[level]
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn reward_noise(&self) -> RewardNoise {
        self.reward_noise
    }

    /// Next-state distribution for `(h, s, a)`.
    pub fn probs(&self, h: usize, s: usize, a: usize) -> &[f64] {
        &self.transition[h][s][a]
    }

    pub fn reward_mean(&self, h: usize, s: usize, a: usize) -> f64 {
        self.reward_mean[h][s][a]
    }

    /// The agent always starts in state 0 of level 0.
    pub fn initial_state(&self) -> usize {
        0
    }
}

/// Output of backward dynamic programming.
#[derive(Debug, Clone)]
pub struct ValueIteration {
    pub value: f64,
    pub policy: TabularPolicy,
    /// `q[h][s][a]` optimal action values.
    pub q: Vec<Vec<Vec<f64>>>,
}

/// Exact backward DP over reward means. Ties in the greedy argmax break
/// toward the lowest action index.
pub fn value_iteration(mdp: &LatentMdp) -> ValueIteration {
    let horizon = mdp.horizon();
    let mut v_next = vec![0.0; mdp.states_at(horizon)];
    let mut q = vec![Vec::new(); horizon];
    let mut actions = vec![Vec::new(); horizon];
    for h in (0..horizon).rev() {
        let n = mdp.states_at(h);
        let mut qh = vec![vec![0.0; mdp.num_actions()]; n];
        let mut ah = vec![0usize; n];
        let mut vh = vec![0.0; n];
        for s in 0..n {
            let mut best = f64::NEG_INFINITY;
            let mut best_a = 0;
            for a in 0..mdp.num_actions() {
                let cont: f64 = mdp
                    .probs(h, s, a)
                    .iter()
                    .zip(v_next.iter())
                    .map(|(p, v)| p * v)
                    .sum();
                let val = mdp.reward_mean(h, s, a) + cont;
                qh[s][a] = val;
                if val > best {
                    best = val;
                    best_a = a;
                }
            }
            ah[s] = best_a;
            vh[s] = best;
        }
        q[h] = qh;
        actions[h] = ah;
        v_next = vh;
    }
    ValueIteration {
        value: v_next[mdp.initial_state()],
        policy: TabularPolicy::new(actions),
        q,
    }
}

/// Exact expected return of a tabular policy via forward propagation of
/// the per-level state distribution.
pub fn policy_value(mdp: &LatentMdp, pi: &TabularPolicy) -> Result<f64> {
    if pi.horizon() != mdp.horizon() {
        return Err(Error::contract(format!(
            "policy horizon {} != mdp horizon {}",
            pi.horizon(),
            mdp.horizon()
        )));
    }
    for h in 0..mdp.horizon() {
        if pi.states_at(h) < mdp.states_at(h) {
            return Err(Error::contract(format!(
                "policy covers {} states at level {h}, mdp has {}",
                pi.states_at(h),
                mdp.states_at(h)
            )));
        }
        for s in 0..mdp.states_at(h) {
            if pi.action(h, s) >= mdp.num_actions() {
                return Err(Error::contract(format!(
                    "policy action {} out of range at ({h},{s})",
                    pi.action(h, s)
                )));
            }
        }
    }
    let mut dist = vec![0.0; mdp.states_at(0)];
    dist[mdp.initial_state()] = 1.0;
    let mut value = 0.0;
    for h in 0..mdp.horizon() {
        let mut next = vec![0.0; mdp.states_at(h + 1)];
        for (s, &mass) in dist.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let a = pi.action(h, s);
            value += mass * mdp.reward_mean(h, s, a);
            for (s2, &p) in mdp.probs(h, s, a).iter().enumerate() {
                next[s2] += mass * p;
            }
        }
        dist = next;
    }
    Ok(value)
}
