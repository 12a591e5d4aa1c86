//! Combination-lock environments: a depth-H chain with two rewarding
//! live lanes and an absorbing dead lane, emitting rich observations.
//!
//! Latent structure per level: states 0 and 1 are the live lanes, state
//! 2 is the dead lane. From a live state one action (the "good" one)
//! moves to state 0 with probability `1 - alpha` and to state 1 with
//! probability `alpha`, a second action has the flipped behavior, and
//! the remaining two actions fall into the dead lane. Every action from
//! the dead lane stays there. Reaching a live state at the terminal
//! level pays a Bernoulli(0.5) reward; everything else pays zero.
//!
//! Which visible action label plays which role is hidden behind
//! per-(level, state) permutations drawn once per environment from the
//! relabel seed. Index preconditions on `latent_step`/`emit` are
//! asserted; violations panic with a diagnostic.

use crate::env::BlockEnv;
use crate::error::{Error, Result};
use crate::latent::{LatentMdp, RewardNoise};
use crate::perm::Permutation;
use crate::policy::TabularPolicy;
use crate::rng::{bernoulli, derive_rng, Rng};
use crate::trajectory::Observation;
use crate::ulo::Decoder;
use rand_distr::{Distribution, StandardNormal};

pub const LOCK_ACTIONS: usize = 4;
const LIVE_A: usize = 0;
const LIVE_B: usize = 1;
const DEAD: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Emission {
    /// Observations in {0,1}^(H+3): one-hot state plus i.i.d.
    /// Bernoulli(0.5) distractor coordinates.
    Bernoulli,
    /// Observations in R^(H+3): one-hot state plus i.i.d. N(0, sigma^2)
    /// noise on every coordinate, one-hot ones included.
    Gaussian { sigma: f64 },
}

/// How action labels are scrambled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelabelMode {
    /// Independent permutation per (level, state). Default.
    PerLevelState,
    /// One permutation per level, shared by its states.
    PerLevel,
    /// No scrambling; the good action is index 0 everywhere. Test mode.
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LockSpec {
    pub horizon: usize,
    pub alpha: f64,
    pub emission: Emission,
    pub relabel_seed: u64,
    pub relabel_mode: RelabelMode,
    pub reward_noise: RewardNoise,
    pub diagnostics: bool,
    /// Latent states at level 0. The chain has a unique start state, so
    /// the default is 1; deeper levels always hold 3.
    pub level1_states: usize,
}

impl LockSpec {
    pub fn bernoulli(horizon: usize, alpha: f64, relabel_seed: u64) -> Self {
        LockSpec {
            horizon,
            alpha,
            emission: Emission::Bernoulli,
            relabel_seed,
            relabel_mode: RelabelMode::PerLevelState,
            reward_noise: RewardNoise::Bernoulli,
            diagnostics: false,
            level1_states: 1,
        }
    }

    pub fn gaussian(horizon: usize, alpha: f64, sigma: f64, relabel_seed: u64) -> Self {
        LockSpec {
            emission: Emission::Gaussian { sigma },
            ..LockSpec::bernoulli(horizon, alpha, relabel_seed)
        }
    }

    pub fn with_diagnostics(mut self, on: bool) -> Self {
        self.diagnostics = on;
        self
    }

    pub fn with_reward_noise(mut self, noise: RewardNoise) -> Self {
        self.reward_noise = noise;
        self
    }

    pub fn with_relabel_mode(mut self, mode: RelabelMode) -> Self {
        self.relabel_mode = mode;
        self
    }
}

/// Per-(level, state) uniform permutations of the four action labels,
/// fixed for the run. Entry `[h][s]` maps a visible label to its role
/// (0 good, 1 flipped, 2..=3 dead).
pub fn randomize_action_labels(
    horizon: usize,
    states_per_level: &[usize],
    mode: RelabelMode,
    seed: u64,
) -> Vec<Vec<Permutation>> {
    let mut rng = derive_rng(seed, &[0x6c6f_636b]);
    (0..horizon)
        .map(|h| match mode {
            RelabelMode::Identity => {
                vec![Permutation::identity(LOCK_ACTIONS); states_per_level[h]]
            }
            RelabelMode::PerLevel => {
                vec![Permutation::random(LOCK_ACTIONS, &mut rng); states_per_level[h]]
            }
            RelabelMode::PerLevelState => (0..states_per_level[h])
                .map(|_| Permutation::random(LOCK_ACTIONS, &mut rng))
                .collect(),
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct LockEnv {
    spec: LockSpec,
    states_per_level: Vec<usize>,
    relabel: Vec<Vec<Permutation>>,
    mdp: LatentMdp,
}

impl LockEnv {
    pub fn new(spec: LockSpec) -> Result<Self> {
        if spec.horizon == 0 {
            return Err(Error::Config("lock horizon must be positive".into()));
        }
        if !(0.0..=1.0).contains(&spec.alpha) {
            return Err(Error::Config(format!(
                "lock alpha {} outside [0,1]",
                spec.alpha
            )));
        }
        if let Emission::Gaussian { sigma } = spec.emission {
            if !(sigma > 0.0) {
                return Err(Error::Config(format!("lock sigma {sigma} must be positive")));
            }
        }
        if !(1..=3).contains(&spec.level1_states) {
            return Err(Error::Config(format!(
                "level-1 state count {} outside 1..=3",
                spec.level1_states
            )));
        }
        let mut states_per_level = vec![3usize; spec.horizon + 1];
        states_per_level[0] = spec.level1_states;
        let relabel = randomize_action_labels(
            spec.horizon,
            &states_per_level,
            spec.relabel_mode,
            spec.relabel_seed,
        );
        let mdp = derive_mdp(&spec, &states_per_level, &relabel)?;
        Ok(LockEnv {
            spec,
            states_per_level,
            relabel,
            mdp,
        })
    }

    pub fn spec(&self) -> &LockSpec {
        &self.spec
    }

    /// The exact tabular model of the latent dynamics, with reward means
    /// substituted for the Bernoulli terminal draw.
    pub fn mdp(&self) -> &LatentMdp {
        &self.mdp
    }

    pub fn relabel_tables(&self) -> &[Vec<Permutation>] {
        &self.relabel
    }

    fn role(&self, h: usize, s: usize, a: usize) -> usize {
        self.relabel[h][s].apply(a)
    }

    /// Reward draw for arriving in `s_next` at the terminal level.
    pub fn terminal_reward(&self, s_next: usize, rng: &mut Rng) -> f64 {
        if s_next >= DEAD {
            return 0.0;
        }
        match self.spec.reward_noise {
            RewardNoise::Deterministic => 0.5,
            RewardNoise::Bernoulli => {
                if bernoulli(rng, 0.5) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Decoders that read the true block structure off the one-hot
    /// coordinates. Exact for Bernoulli emissions; test fixture.
    pub fn oracle_decoders(&self) -> Vec<Decoder> {
        (0..=self.spec.horizon)
            .map(|h| {
                let classes = self.states_per_level[h];
                let centers: Vec<Vec<f64>> = (0..classes)
                    .map(|s| {
                        let mut c = vec![0.0; self.obs_dim()];
                        c[s] = 1.0;
                        c
                    })
                    .collect();
                Decoder::nearest_centroid(h, centers, None)
            })
            .collect()
    }

    /// Policy taking the good-role action everywhere (optimal).
    pub fn good_policy(&self) -> TabularPolicy {
        self.role_policy(0)
    }

    /// Policy taking a dead-role action everywhere (value zero).
    pub fn dead_policy(&self) -> TabularPolicy {
        self.role_policy(DEAD)
    }

    fn role_policy(&self, want: usize) -> TabularPolicy {
        let actions = (0..self.spec.horizon)
            .map(|h| {
                (0..self.states_per_level[h])
                    .map(|s| {
                        (0..LOCK_ACTIONS)
                            .find(|&a| {
                                let r = self.role(h, s, a);
                                if want >= DEAD {
                                    r >= DEAD
                                } else {
                                    r == want
                                }
                            })
                            .expect("every role is present in a permutation")
                    })
                    .collect()
            })
            .collect();
        TabularPolicy::new(actions)
    }
}

fn derive_mdp(
    spec: &LockSpec,
    states_per_level: &[usize],
    relabel: &[Vec<Permutation>],
) -> Result<LatentMdp> {
    let horizon = spec.horizon;
    let alpha = spec.alpha;
    let mut transition = Vec::with_capacity(horizon);
    let mut rewards = Vec::with_capacity(horizon);
    for h in 0..horizon {
        let n = states_per_level[h];
        let n_next = states_per_level[h + 1];
        let mut th = Vec::with_capacity(n);
        let mut rh = Vec::with_capacity(n);
        for s in 0..n {
            let mut ts = Vec::with_capacity(LOCK_ACTIONS);
            let mut rs = Vec::with_capacity(LOCK_ACTIONS);
            for a in 0..LOCK_ACTIONS {
                let role = relabel[h][s].apply(a);
                let mut row = vec![0.0; n_next];
                if s >= DEAD || role >= DEAD {
                    row[DEAD] = 1.0;
                } else if role == LIVE_A {
                    row[LIVE_A] = 1.0 - alpha;
                    row[LIVE_B] = alpha;
                } else {
                    row[LIVE_B] = 1.0 - alpha;
                    row[LIVE_A] = alpha;
                }
                let reward = if h + 1 == horizon && s < DEAD && role < DEAD {
                    0.5
                } else {
                    0.0
                };
                ts.push(row);
                rs.push(reward);
            }
            th.push(ts);
            rh.push(rs);
        }
        transition.push(th);
        rewards.push(rh);
    }
    LatentMdp::new(
        states_per_level.to_vec(),
        LOCK_ACTIONS,
        transition,
        rewards,
        spec.reward_noise,
    )
}

impl BlockEnv for LockEnv {
    fn horizon(&self) -> usize {
        self.spec.horizon
    }

    fn num_actions(&self) -> usize {
        LOCK_ACTIONS
    }

    fn states_per_level(&self) -> &[usize] {
        &self.states_per_level
    }

    fn obs_dim(&self) -> usize {
        self.spec.horizon + 3
    }

    fn latent_step(&self, h: usize, s: usize, a: usize, rng: &mut Rng) -> usize {
        assert!(h < self.spec.horizon, "level {h} out of range");
        assert!(s < self.states_per_level[h], "state {s} out of range at level {h}");
        assert!(a < LOCK_ACTIONS, "action {a} out of range");
        let role = self.role(h, s, a);
        if s >= DEAD || role >= DEAD {
            return DEAD;
        }
        let switched = bernoulli(rng, self.spec.alpha);
        match (role, switched) {
            (LIVE_A, false) | (LIVE_B, true) => LIVE_A,
            _ => LIVE_B,
        }
    }

    fn step_reward(&self, h: usize, _s: usize, _a: usize, s_next: usize, rng: &mut Rng) -> f64 {
        if h + 1 == self.spec.horizon {
            self.terminal_reward(s_next, rng)
        } else {
            0.0
        }
    }

    fn emit(&self, h: usize, s: usize, rng: &mut Rng) -> Observation {
        assert!(h <= self.spec.horizon, "level {h} out of range");
        assert!(s < self.states_per_level[h], "state {s} out of range at level {h}");
        let dim = self.obs_dim();
        let mut obs = vec![0.0; dim];
        obs[s] = 1.0;
        match self.spec.emission {
            Emission::Bernoulli => {
                for x in obs.iter_mut().take(dim).skip(3) {
                    *x = if bernoulli(rng, 0.5) { 1.0 } else { 0.0 };
                }
            }
            Emission::Gaussian { sigma } => {
                for x in obs.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *x += sigma * z;
                }
            }
        }
        obs
    }

    fn diagnostics(&self) -> bool {
        self.spec.diagnostics
    }
}
