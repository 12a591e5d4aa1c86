//! Seeded, replicated experiment runs producing learning-curve records.
//!
//! Every replicate runs in its own worker with generator streams derived
//! from `(base_seed, replicate)`, so results are identical regardless of
//! thread scheduling. Training rollouts go through an instrumented
//! environment whose episode counter is the records' trajectory axis;
//! evaluation rollouts use a separate uncounted handle and stream.

pub mod config;
pub mod records;
pub mod selfcheck;

pub use config::{expand_grid, Algorithm, EnvKind, ExperimentConfig, Timing};
pub use records::{
    bands, emit_bands, emit_csv, emit_svg, parse_csv, BandPoint, LearningCurveRecord,
};

use crate::env::{BlockEnv, Instrumented};
use crate::error::{Error, Result};
use crate::learner::{EpsGreedyQ, NoRegretLearner, OracleQ};
use crate::lock::LockEnv;
use crate::policy::{compose_policy, ObsPolicy, TabularPolicy};
use crate::rng::{child_rng, derive_rng, Rng};
use crate::trajectory::{
    mean_episode_reward, sample_latent_trajectory, LatentTrajectory, Trajectory,
};
use crate::textio::{decoder_to_text, qtable_to_text};
use crate::url::{select_best, url_train};
use rand::Rng as _;
use std::collections::HashMap;
use std::time::Instant;

/// Empirical mean episodic reward of `phi` over fresh rollouts.
pub fn evaluate_policy<E: BlockEnv>(env: &E, phi: &ObsPolicy, episodes: usize, rng: &mut Rng) -> f64 {
    mean_episode_reward(env, phi, episodes, rng)
}

/// Final model state of one replicate, for checkpoint files.
pub struct ReplicateArtifacts {
    pub replicate: usize,
    /// One documented-format text per level; empty when the algorithm
    /// has no decoders.
    pub decoder_texts: Vec<String>,
    /// Q-table dump of the final learner, when one exists.
    pub qtable_text: Option<String>,
}

/// Runs all replicates of a configuration and returns their records in
/// replicate order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<LearningCurveRecord>> {
    Ok(run_experiment_full(cfg)?.0)
}

/// As [`run_experiment`], also returning per-replicate checkpoint
/// artifacts when `cfg.checkpoints` is set.
pub fn run_experiment_full(
    cfg: &ExperimentConfig,
) -> Result<(Vec<LearningCurveRecord>, Vec<ReplicateArtifacts>)> {
    cfg.validate()?;
    type RepResult = Result<(Vec<LearningCurveRecord>, ReplicateArtifacts)>;
    let results: Vec<RepResult> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..cfg.replicates)
            .map(|rep| scope.spawn(move || run_replicate(cfg, rep)))
            .collect();
        handles
            .into_iter()
            .map(|h| match h.join() {
                Ok(r) => r,
                Err(panic) => std::panic::resume_unwind(panic),
            })
            .collect()
    });
    let mut records = Vec::new();
    let mut artifacts = Vec::new();
    for r in results {
        let (recs, art) = r?;
        records.extend(recs);
        if cfg.checkpoints {
            artifacts.push(art);
        }
    }
    Ok((records, artifacts))
}

struct Recorder {
    records: Vec<LearningCurveRecord>,
    replicate: usize,
    step: u64,
    points: u64,
    next: u64,
    timing: Timing,
    start: Instant,
}

impl Recorder {
    fn new(cfg: &ExperimentConfig, replicate: usize) -> Self {
        let step = cfg.eval_grid_step();
        Recorder {
            records: Vec::new(),
            replicate,
            step,
            points: (cfg.budget / step).max(1),
            next: 1,
            timing: cfg.timing,
            start: Instant::now(),
        }
    }

    fn pending(&self, counter: u64) -> bool {
        self.next <= self.points && counter >= self.step * self.next
    }

    fn finished(&self) -> bool {
        self.next > self.points
    }

    /// Emits one record per crossed grid point; the evaluation closure
    /// runs once per call even when several points were crossed at once.
    fn record(&mut self, counter: u64, mut eval: impl FnMut() -> f64) {
        let mut value = None;
        while self.pending(counter) {
            let v = *value.get_or_insert_with(&mut eval);
            let seconds = match self.timing {
                Timing::Wall => self.start.elapsed().as_secs_f64(),
                Timing::Off => 0.0,
            };
            self.records.push(LearningCurveRecord {
                replicate: self.replicate,
                trajectories: counter,
                mean_reward: v,
                seconds,
            });
            self.next += 1;
        }
    }

    /// Fills any grid points not yet emitted, evaluating once.
    fn flush(&mut self, counter: u64, mut eval: impl FnMut() -> f64) {
        if self.finished() {
            return;
        }
        let mut value = None;
        while !self.finished() {
            let v = *value.get_or_insert_with(&mut eval);
            let seconds = match self.timing {
                Timing::Wall => self.start.elapsed().as_secs_f64(),
                Timing::Off => 0.0,
            };
            self.records.push(LearningCurveRecord {
                replicate: self.replicate,
                trajectories: counter,
                mean_reward: v,
                seconds,
            });
            self.next += 1;
        }
    }
}

fn run_replicate(
    cfg: &ExperimentConfig,
    replicate: usize,
) -> Result<(Vec<LearningCurveRecord>, ReplicateArtifacts)> {
    let env = Instrumented::new(cfg.build_env(replicate)?);
    let mut train_rng = derive_rng(cfg.base_seed, &[replicate as u64, 1]);
    let mut eval_rng = derive_rng(cfg.base_seed, &[replicate as u64, 2]);
    let mut recorder = Recorder::new(cfg, replicate);
    let mut artifacts = ReplicateArtifacts {
        replicate,
        decoder_texts: Vec::new(),
        qtable_text: None,
    };
    match cfg.algorithm {
        Algorithm::Url => {
            let decoders =
                run_url(cfg, &env, &mut train_rng, &mut eval_rng, &mut recorder)?;
            artifacts.decoder_texts = decoders.iter().map(decoder_to_text).collect();
        }
        Algorithm::OracleQLat => {
            let mut learner = OracleQ::new(
                env.states_per_level().to_vec(),
                env.num_actions(),
                cfg.oracleq_config(),
            );
            run_latent(cfg, &env, &mut learner, &mut train_rng, &mut eval_rng, &mut recorder)?;
            artifacts.qtable_text =
                Some(qtable_to_text(learner.q_tables(), learner.visit_counts()));
        }
        Algorithm::QLearningLat => {
            let seed = derive_rng(cfg.base_seed, &[replicate as u64, 3]).random::<u64>();
            let mut learner = EpsGreedyQ::new(
                env.states_per_level().to_vec(),
                env.num_actions(),
                cfg.epsgreedy_config(seed),
            );
            run_latent(cfg, &env, &mut learner, &mut train_rng, &mut eval_rng, &mut recorder)?;
            artifacts.qtable_text =
                Some(qtable_to_text(learner.q_tables(), learner.visit_counts()));
        }
        Algorithm::OracleQObs => {
            let mut learner = OracleQ::new(
                vec![0; cfg.horizon + 1],
                env.num_actions(),
                cfg.oracleq_config(),
            );
            run_obs(cfg, &env, &mut learner, &mut train_rng, &mut eval_rng, &mut recorder)?;
            artifacts.qtable_text =
                Some(qtable_to_text(learner.q_tables(), learner.visit_counts()));
        }
        Algorithm::QLearningObs => {
            let seed = derive_rng(cfg.base_seed, &[replicate as u64, 3]).random::<u64>();
            let mut learner = EpsGreedyQ::new(
                vec![0; cfg.horizon + 1],
                env.num_actions(),
                cfg.epsgreedy_config(seed),
            );
            run_obs(cfg, &env, &mut learner, &mut train_rng, &mut eval_rng, &mut recorder)?;
            artifacts.qtable_text =
                Some(qtable_to_text(learner.q_tables(), learner.visit_counts()));
        }
    }
    Ok((recorder.records, artifacts))
}

fn run_latent<L: NoRegretLearner>(
    cfg: &ExperimentConfig,
    env: &Instrumented<LockEnv>,
    learner: &mut L,
    train_rng: &mut Rng,
    eval_rng: &mut Rng,
    recorder: &mut Recorder,
) -> Result<()> {
    let eval_env = env.inner();
    while env.episodes() < cfg.budget {
        let pi = learner.propose()?;
        let traj = sample_latent_trajectory(env, &pi, train_rng);
        learner.update(&traj)?;
        if recorder.pending(env.episodes()) {
            let greedy = learner.final_policy();
            recorder.record(env.episodes(), || {
                latent_policy_mean(eval_env, &greedy, cfg.eval_episodes, eval_rng)
            });
        }
    }
    let greedy = learner.final_policy();
    recorder.flush(env.episodes(), || {
        latent_policy_mean(eval_env, &greedy, cfg.eval_episodes, eval_rng)
    });
    Ok(())
}

fn latent_policy_mean(env: &LockEnv, pi: &TabularPolicy, episodes: usize, rng: &mut Rng) -> f64 {
    let total: f64 = (0..episodes)
        .map(|_| sample_latent_trajectory(env, pi, rng).reward_sum())
        .sum();
    total / episodes as f64
}

fn run_url(
    cfg: &ExperimentConfig,
    env: &Instrumented<LockEnv>,
    train_rng: &mut Rng,
    eval_rng: &mut Rng,
    recorder: &mut Recorder,
) -> Result<Vec<crate::ulo::Decoder>> {
    let eval_env = env.inner();
    let clusters = cfg.clusters_per_level();
    let ulo_cfg = cfg.ulo_config(&clusters);
    let mut params = cfg.url_params();
    // each learner episode consumes at least one trajectory, so the
    // budget callback always fires before this bound
    params.episodes = cfg.budget as usize;
    let oq = cfg.oracleq_config();
    let eval_episodes = cfg.eval_episodes;

    let candidates = {
        let recorder = &mut *recorder;
        let eval_rng = &mut *eval_rng;
        url_train(
            env,
            &ulo_cfg,
            |_| OracleQ::new(clusters.clone(), env.num_actions(), oq.clone()),
            &params,
            train_rng,
            |p| {
                let counter = env.episodes();
                if recorder.pending(counter) {
                    let phi = compose_policy(p.greedy.clone(), p.decoders.to_vec())
                        .expect("learner and decoder ranges match by construction");
                    recorder.record(counter, || {
                        evaluate_policy(eval_env, &phi, eval_episodes, eval_rng)
                    });
                }
                counter < cfg.budget
            },
        )?
    };

    let best = if candidates.len() == 1 {
        &candidates[0]
    } else {
        let horizon = env.horizon();
        let episodes = params.eval_episodes(horizon);
        let (idx, _) = select_best(&candidates, eval_env, episodes, eval_rng)?;
        &candidates[idx]
    };
    recorder.flush(env.episodes(), || {
        evaluate_policy(eval_env, best, eval_episodes, eval_rng)
    });
    Ok(best.decoders().to_vec())
}

/// Observation-tabular driver: each distinct observation bit pattern is
/// a tabular state in a dynamically grown table. A state first seen
/// mid-episode takes action 0, the choice a fresh optimistic or
/// zero-initialized row would make anyway.
fn run_obs<L: NoRegretLearner>(
    cfg: &ExperimentConfig,
    env: &Instrumented<LockEnv>,
    learner: &mut L,
    train_rng: &mut Rng,
    eval_rng: &mut Rng,
    recorder: &mut Recorder,
) -> Result<()> {
    let horizon = cfg.horizon;
    if env.obs_dim() > 64 {
        return Err(Error::Config(
            "observation-tabular mode supports up to 64 observation bits".into(),
        ));
    }
    let mut tables: Vec<HashMap<u64, usize>> = vec![HashMap::new(); horizon + 1];
    let eval_env = env.inner();

    while env.episodes() < cfg.budget {
        let pi = learner.propose()?;
        env.note_episode();
        let mut dyn_rng = child_rng(train_rng, 1);
        let mut emit_rng = child_rng(train_rng, 2);
        let mut states = Vec::with_capacity(horizon + 1);
        let mut actions = Vec::with_capacity(horizon);
        let mut rewards = Vec::with_capacity(horizon);
        let mut latent = env.initial_state();
        let mut obs = env.emit(0, latent, &mut emit_rng);
        for h in 0..horizon {
            let idx = tabularize(&mut tables[h], learner, h, &obs);
            let action = if idx < pi.states_at(h) {
                pi.action(h, idx)
            } else {
                0
            };
            let next = env.latent_step(h, latent, action, &mut dyn_rng);
            let reward = env.step_reward(h, latent, action, next, &mut dyn_rng);
            states.push(idx);
            actions.push(action);
            rewards.push(reward);
            latent = next;
            obs = env.emit(h + 1, latent, &mut emit_rng);
        }
        states.push(tabularize(&mut tables[horizon], learner, horizon, &obs));
        let traj: LatentTrajectory = Trajectory {
            states,
            actions,
            rewards,
            latents: None,
        };
        learner.update(&traj)?;

        if recorder.pending(env.episodes()) {
            let greedy = learner.final_policy();
            recorder.record(env.episodes(), || {
                obs_policy_mean(eval_env, &greedy, &tables, cfg.eval_episodes, eval_rng)
            });
        }
    }
    let greedy = learner.final_policy();
    recorder.flush(env.episodes(), || {
        obs_policy_mean(eval_env, &greedy, &tables, cfg.eval_episodes, eval_rng)
    });
    Ok(())
}

fn tabularize<L: NoRegretLearner>(
    table: &mut HashMap<u64, usize>,
    learner: &mut L,
    level: usize,
    obs: &[f64],
) -> usize {
    let key = obs_bits(obs);
    if let Some(&idx) = table.get(&key) {
        return idx;
    }
    let idx = table.len();
    table.insert(key, idx);
    learner.grow(level, idx + 1);
    idx
}

fn obs_bits(obs: &[f64]) -> u64 {
    obs.iter()
        .enumerate()
        .fold(0u64, |k, (i, &v)| k | (u64::from(v >= 0.5) << i))
}

fn obs_policy_mean(
    env: &LockEnv,
    pi: &TabularPolicy,
    tables: &[HashMap<u64, usize>],
    episodes: usize,
    rng: &mut Rng,
) -> f64 {
    let horizon = env.horizon();
    let mut total = 0.0;
    for _ in 0..episodes {
        let mut dyn_rng = child_rng(rng, 1);
        let mut emit_rng = child_rng(rng, 2);
        let mut latent = env.initial_state();
        let mut obs = env.emit(0, latent, &mut emit_rng);
        for h in 0..horizon {
            let action = tables[h]
                .get(&obs_bits(&obs))
                .copied()
                .filter(|&idx| idx < pi.states_at(h))
                .map(|idx| pi.action(h, idx))
                .unwrap_or(0);
            let next = env.latent_step(h, latent, action, &mut dyn_rng);
            total += env.step_reward(h, latent, action, next, &mut dyn_rng);
            latent = next;
            obs = env.emit(h + 1, latent, &mut emit_rng);
        }
    }
    total / episodes as f64
}
