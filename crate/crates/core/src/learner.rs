//! Episodic no-regret tabular learners: UCB-bonus Q-learning (OracleQ)
//! and epsilon-greedy Q-learning. Both follow a strict propose/update
//! alternation: one proposed policy, one consumed trajectory, repeat.

use crate::error::{Error, Result};
use crate::policy::TabularPolicy;
use crate::rng::{derive_rng, Rng};
use crate::trajectory::LatentTrajectory;
use rand::Rng as _;

/// How one decoded state's table row carries over when the decoders
/// behind the state space are refit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowRemap {
    /// The new state inherits this old state's statistics.
    Inherit(usize),
    /// The new state is treated as never visited.
    Fresh,
}

/// Interface the trajectory-sampling loop drives. `propose` and `update`
/// must strictly alternate; `final_policy` is the greedy readout and may
/// be taken at any time.
pub trait NoRegretLearner {
    fn propose(&mut self) -> Result<TabularPolicy>;
    fn update(&mut self, traj: &LatentTrajectory) -> Result<()>;
    fn final_policy(&self) -> TabularPolicy;
    fn num_actions(&self) -> usize;
    fn states_per_level(&self) -> &[usize];
    /// Extends level `h` to at least `states` states, initializing new
    /// rows like fresh cells. Used by the observation-tabularized mode
    /// where the state space grows as new observations appear.
    fn grow(&mut self, level: usize, states: usize);
    /// Rewires one level's rows after the decoded state space changed
    /// identity, e.g. because decoders were refit.
    fn remap(&mut self, level: usize, rows: &[RowRemap]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateSchedule {
    /// `(H + 1) / (H + t)` at the t-th visit.
    Hoeffding,
    /// Fixed learning rate; diagnostic mode.
    Constant(f64),
}

#[derive(Debug, Clone)]
pub struct OracleQConfig {
    /// Bonus scale `c` in `c * sqrt(H^3 * iota / t)`.
    pub bonus_scale: f64,
    /// Confidence term `iota`.
    pub confidence: f64,
    /// Optimism cap: Q is initialized here and clamped to `[0, cap]`.
    pub cap: f64,
    pub rate: RateSchedule,
}

impl Default for OracleQConfig {
    fn default() -> Self {
        OracleQConfig {
            bonus_scale: 0.05,
            confidence: 1.0,
            cap: 1.0,
            rate: RateSchedule::Hoeffding,
        }
    }
}

fn greedy(q: &[Vec<Vec<f64>>]) -> TabularPolicy {
    TabularPolicy::new(
        q.iter()
            .map(|level| {
                level
                    .iter()
                    .map(|row| {
                        let mut best = f64::NEG_INFINITY;
                        let mut best_a = 0;
                        for (a, &v) in row.iter().enumerate() {
                            if v > best {
                                best = v;
                                best_a = a;
                            }
                        }
                        best_a
                    })
                    .collect()
            })
            .collect(),
    )
}

fn check_trajectory(
    traj: &LatentTrajectory,
    states_per_level: &[usize],
    num_actions: usize,
) -> Result<()> {
    let horizon = states_per_level.len() - 1;
    if traj.states.len() != horizon + 1 || traj.actions.len() != horizon {
        return Err(Error::contract(format!(
            "trajectory of {} states / {} actions for horizon {horizon}",
            traj.states.len(),
            traj.actions.len()
        )));
    }
    for (h, &s) in traj.states.iter().enumerate() {
        if s >= states_per_level[h] {
            return Err(Error::DecodingRange {
                level: h,
                state: s,
                limit: states_per_level[h],
            });
        }
    }
    if let Some(&a) = traj.actions.iter().find(|&&a| a >= num_actions) {
        return Err(Error::contract(format!("action {a} out of range")));
    }
    Ok(())
}

/// UCB-bonus Q-learning with optimistic initialization: on each visited
/// step, `Q <- (1-eta) Q + eta (r + V_next + bonus)` with
/// `eta = (H+1)/(H+t)` and `bonus = c sqrt(H^3 iota / t)`, Q clamped to
/// `[0, cap]` and `V(h, s) = min(cap, max_a Q(h, s, a))`.
pub struct OracleQ {
    cfg: OracleQConfig,
    states_per_level: Vec<usize>,
    num_actions: usize,
    q: Vec<Vec<Vec<f64>>>,
    counts: Vec<Vec<Vec<u64>>>,
    pending: bool,
}

impl OracleQ {
    pub fn new(states_per_level: Vec<usize>, num_actions: usize, cfg: OracleQConfig) -> Self {
        let horizon = states_per_level.len() - 1;
        let q = (0..horizon)
            .map(|h| vec![vec![cfg.cap; num_actions]; states_per_level[h]])
            .collect();
        let counts = (0..horizon)
            .map(|h| vec![vec![0u64; num_actions]; states_per_level[h]])
            .collect();
        OracleQ {
            cfg,
            states_per_level,
            num_actions,
            q,
            counts,
            pending: false,
        }
    }

    pub fn bonus(&self, t: u64) -> f64 {
        let h = (self.states_per_level.len() - 1) as f64;
        self.cfg.bonus_scale * (h.powi(3) * self.cfg.confidence / t as f64).sqrt()
    }

    pub fn q_tables(&self) -> &Vec<Vec<Vec<f64>>> {
        &self.q
    }

    pub fn visit_counts(&self) -> &Vec<Vec<Vec<u64>>> {
        &self.counts
    }
}

impl NoRegretLearner for OracleQ {
    fn propose(&mut self) -> Result<TabularPolicy> {
        if self.pending {
            return Err(Error::Sequencing(
                "propose called with an episode still pending".into(),
            ));
        }
        self.pending = true;
        Ok(greedy(&self.q))
    }

    fn update(&mut self, traj: &LatentTrajectory) -> Result<()> {
        if !self.pending {
            return Err(Error::Sequencing("update without a proposed episode".into()));
        }
        check_trajectory(traj, &self.states_per_level, self.num_actions)?;
        self.pending = false;
        let horizon = self.states_per_level.len() - 1;
        for h in 0..horizon {
            let (s, a, s_next) = (traj.states[h], traj.actions[h], traj.states[h + 1]);
            let r = traj.rewards[h];
            self.counts[h][s][a] += 1;
            let t = self.counts[h][s][a];
            let eta = match self.cfg.rate {
                RateSchedule::Hoeffding => (horizon as f64 + 1.0) / (horizon as f64 + t as f64),
                RateSchedule::Constant(x) => x,
            };
            let v_next = if h + 1 < horizon {
                let best = self.q[h + 1][s_next]
                    .iter()
                    .fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                best.min(self.cfg.cap)
            } else {
                0.0
            };
            let target = r + v_next + self.bonus(t);
            let updated = (1.0 - eta) * self.q[h][s][a] + eta * target;
            self.q[h][s][a] = updated.clamp(0.0, self.cfg.cap);
        }
        Ok(())
    }

    fn final_policy(&self) -> TabularPolicy {
        greedy(&self.q)
    }

    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn states_per_level(&self) -> &[usize] {
        &self.states_per_level
    }

    fn grow(&mut self, level: usize, states: usize) {
        if states <= self.states_per_level[level] {
            return;
        }
        self.states_per_level[level] = states;
        if level < self.q.len() {
            self.q[level].resize(states, vec![self.cfg.cap; self.num_actions]);
            self.counts[level].resize(states, vec![0; self.num_actions]);
        }
    }

    fn remap(&mut self, level: usize, rows: &[RowRemap]) {
        if level >= self.q.len() || rows.is_empty() {
            return;
        }
        let old_q = self.q[level].clone();
        let old_counts = self.counts[level].clone();
        self.q[level] = rows
            .iter()
            .map(|r| match r {
                RowRemap::Inherit(o) => old_q[*o].clone(),
                RowRemap::Fresh => vec![self.cfg.cap; self.num_actions],
            })
            .collect();
        self.counts[level] = rows
            .iter()
            .map(|r| match r {
                RowRemap::Inherit(o) => old_counts[*o].clone(),
                RowRemap::Fresh => vec![0; self.num_actions],
            })
            .collect();
        self.states_per_level[level] = rows.len();
    }
}

#[derive(Debug, Clone)]
pub struct EpsGreedyConfig {
    pub learning_rate: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for EpsGreedyConfig {
    fn default() -> Self {
        EpsGreedyConfig {
            learning_rate: 0.25,
            epsilon: 0.1,
            seed: 0,
        }
    }
}

/// One-step Q-learning with a constant learning rate. Exploration is
/// mixed in at proposal time: each proposed policy takes a uniform
/// random action with probability epsilon per (level, state) cell, the
/// greedy action otherwise, so proposals stay deterministic tabular
/// policies.
pub struct EpsGreedyQ {
    cfg: EpsGreedyConfig,
    states_per_level: Vec<usize>,
    num_actions: usize,
    q: Vec<Vec<Vec<f64>>>,
    counts: Vec<Vec<Vec<u64>>>,
    rng: Rng,
    pending: bool,
}

impl EpsGreedyQ {
    pub fn new(states_per_level: Vec<usize>, num_actions: usize, cfg: EpsGreedyConfig) -> Self {
        let horizon = states_per_level.len() - 1;
        let q = (0..horizon)
            .map(|h| vec![vec![0.0; num_actions]; states_per_level[h]])
            .collect();
        let counts = (0..horizon)
            .map(|h| vec![vec![0u64; num_actions]; states_per_level[h]])
            .collect();
        let rng = derive_rng(cfg.seed, &[0x6570_7367]);
        EpsGreedyQ {
            cfg,
            states_per_level,
            num_actions,
            q,
            counts,
            rng,
            pending: false,
        }
    }

    pub fn q_tables(&self) -> &Vec<Vec<Vec<f64>>> {
        &self.q
    }

    pub fn visit_counts(&self) -> &Vec<Vec<Vec<u64>>> {
        &self.counts
    }
}

impl NoRegretLearner for EpsGreedyQ {
    fn propose(&mut self) -> Result<TabularPolicy> {
        if self.pending {
            return Err(Error::Sequencing(
                "propose called with an episode still pending".into(),
            ));
        }
        self.pending = true;
        let greedy = greedy(&self.q);
        let mut actions = Vec::with_capacity(greedy.horizon());
        for h in 0..greedy.horizon() {
            let row: Vec<usize> = (0..greedy.states_at(h))
                .map(|s| {
                    if self.rng.random::<f64>() < self.cfg.epsilon {
                        self.rng.random_range(0..self.num_actions)
                    } else {
                        greedy.action(h, s)
                    }
                })
                .collect();
            actions.push(row);
        }
        Ok(TabularPolicy::new(actions))
    }

    fn update(&mut self, traj: &LatentTrajectory) -> Result<()> {
        if !self.pending {
            return Err(Error::Sequencing("update without a proposed episode".into()));
        }
        check_trajectory(traj, &self.states_per_level, self.num_actions)?;
        self.pending = false;
        let horizon = self.states_per_level.len() - 1;
        for h in 0..horizon {
            let (s, a, s_next) = (traj.states[h], traj.actions[h], traj.states[h + 1]);
            self.counts[h][s][a] += 1;
            let v_next = if h + 1 < horizon {
                self.q[h + 1][s_next]
                    .iter()
                    .fold(f64::NEG_INFINITY, |m, &v| m.max(v))
            } else {
                0.0
            };
            let td = traj.rewards[h] + v_next - self.q[h][s][a];
            self.q[h][s][a] += self.cfg.learning_rate * td;
        }
        Ok(())
    }

    fn final_policy(&self) -> TabularPolicy {
        greedy(&self.q)
    }

    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn states_per_level(&self) -> &[usize] {
        &self.states_per_level
    }

    fn grow(&mut self, level: usize, states: usize) {
        if states <= self.states_per_level[level] {
            return;
        }
        self.states_per_level[level] = states;
        if level < self.q.len() {
            self.q[level].resize(states, vec![0.0; self.num_actions]);
            self.counts[level].resize(states, vec![0; self.num_actions]);
        }
    }

    fn remap(&mut self, level: usize, rows: &[RowRemap]) {
        if level >= self.q.len() || rows.is_empty() {
            return;
        }
        let old_q = self.q[level].clone();
        let old_counts = self.counts[level].clone();
        self.q[level] = rows
            .iter()
            .map(|r| match r {
                RowRemap::Inherit(o) => old_q[*o].clone(),
                RowRemap::Fresh => vec![0.0; self.num_actions],
            })
            .collect();
        self.counts[level] = rows
            .iter()
            .map(|r| match r {
                RowRemap::Inherit(o) => old_counts[*o].clone(),
                RowRemap::Fresh => vec![0; self.num_actions],
            })
            .collect();
        self.states_per_level[level] = rows.len();
    }
}
