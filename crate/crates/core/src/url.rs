//! Unsupervised-RL training loop: a no-regret tabular learner proposes
//! policies over decoded states while a trajectory-sampling routine
//! keeps the decoders good enough that the learner cannot tell it is
//! not running on the latent MDP itself.
//!
//! Two data-collection modes are provided. The theoretical mode runs the
//! full inner loop each episode: it refits decoders from fresh batches
//! drawn under the uniform mixture of all policies proposed so far, and
//! keeps decoder labels consistent across refits with a stored label
//! bank plus the swap-repair routine. The practical mode collects one
//! small batch per episode under the current composite policy, refits on
//! the growing accumulation (gated to geometric growth so total fitting
//! cost stays linear), skips label repair, and freezes the decoders
//! permanently once two consecutive fits agree on a held-out set.

use crate::env::BlockEnv;
use crate::error::{Error, Result};
use crate::perm::Permutation;
use crate::policy::{compose_policy, ObsPolicy, TabularPolicy};
use crate::rng::{derive_rng, Rng};
use crate::trajectory::{
    decode_trajectory, mean_episode_reward, sample_trajectory, LatentTrajectory, Observation,
};
use crate::learner::{NoRegretLearner, RowRemap};
use crate::ulo::{best_permutation_accuracy, fit_ulo, refit_level, Decoder, UloConfig};
use rand::Rng as _;
use std::collections::VecDeque;

/// Stored observation samples per confirmed (level, label). A label is
/// inserted at most once per level and samples are never mutated after
/// insertion; per-level insertion order is preserved.
#[derive(Debug, Clone)]
pub struct LabelBank {
    levels: Vec<Vec<(usize, Vec<Observation>)>>,
}

impl LabelBank {
    pub fn new(levels: usize) -> Self {
        LabelBank {
            levels: vec![Vec::new(); levels],
        }
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn contains(&self, level: usize, label: usize) -> bool {
        self.levels[level].iter().any(|(s, _)| *s == label)
    }

    /// Returns false (and leaves the bank unchanged) if the label is
    /// already confirmed at this level.
    pub fn insert(&mut self, level: usize, label: usize, samples: Vec<Observation>) -> bool {
        if self.contains(level, label) {
            return false;
        }
        self.levels[level].push((label, samples));
        true
    }

    pub fn entries(&self, level: usize) -> &[(usize, Vec<Observation>)] {
        &self.levels[level]
    }

    pub fn labels_at(&self, level: usize) -> usize {
        self.levels[level].len()
    }
}

/// Swap-repair of decoder output labels against the bank: for each
/// stored sample, if strictly more than 3/5 of its observations decode
/// to some other label, swap that label with the stored one. Decoder
/// parameters are untouched; only output permutations change.
pub fn fix_label(decoders: &mut [Decoder], bank: &LabelBank) {
    for (level, dec) in decoders.iter_mut().enumerate() {
        if level >= bank.level_count() {
            break;
        }
        for (label, samples) in bank.entries(level) {
            if *label >= dec.classes() || samples.is_empty() {
                continue;
            }
            let mut counts = vec![0usize; dec.classes()];
            for x in samples {
                counts[dec.predict(x)] += 1;
            }
            // strict majority beyond 3/5, in integers
            let winner = (0..counts.len()).find(|&c| 5 * counts[c] > 3 * samples.len());
            if let Some(other) = winner {
                if other != *label {
                    dec.permute_labels(&Permutation::transposition(dec.classes(), *label, other));
                }
            }
        }
    }
}

/// Confirms new labels from a test batch: level by level, ascending
/// label order, a not-yet-confirmed label whose decoded test sample
/// reaches `3 * eps * batch * ln(1/delta1)` observations is inserted
/// into the bank with those observations.
pub fn update_label_bank(
    bank: &mut LabelBank,
    test_per_level: &[Vec<Observation>],
    decoders: &[Decoder],
    batch: usize,
    eps_thresh: f64,
    delta1: f64,
) {
    let threshold = bank_threshold(batch, eps_thresh, delta1);
    for (level, (obs, dec)) in test_per_level.iter().zip(decoders.iter()).enumerate() {
        let mut groups: Vec<Vec<Observation>> = vec![Vec::new(); dec.classes()];
        for x in obs {
            groups[dec.predict(x)].push(x.clone());
        }
        for (label, group) in groups.into_iter().enumerate() {
            if !bank.contains(level, label) && group.len() as f64 >= threshold {
                bank.insert(level, label, group);
            }
        }
    }
}

pub fn bank_threshold(batch: usize, eps_thresh: f64, delta1: f64) -> f64 {
    3.0 * eps_thresh * batch as f64 * (1.0 / delta1).ln()
}

/// Per-level row rewiring from old decoded labels to new ones: a new
/// label inherits an old row when at least 80% of its window
/// observations carried that old label; otherwise it starts fresh.
fn remap_plan(now: &[usize], before: &[usize], classes: usize) -> Vec<RowRemap> {
    let mut counts = vec![vec![0usize; classes]; classes];
    for (&c, &o) in now.iter().zip(before.iter()) {
        counts[c][o] += 1;
    }
    counts
        .into_iter()
        .map(|row| {
            let total: usize = row.iter().sum();
            let (best_old, best) = row
                .iter()
                .enumerate()
                .max_by_key(|(_, &c)| c)
                .map(|(i, &c)| (i, c))
                .unwrap_or((0, 0));
            if total > 0 && 5 * best >= 4 * total {
                RowRemap::Inherit(best_old)
            } else {
                RowRemap::Fresh
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UrlMode {
    Theoretical,
    Practical,
}

#[derive(Debug, Clone)]
pub struct UrlParams {
    /// Batch size B.
    pub batch: usize,
    /// Learner episode budget K.
    pub episodes: usize,
    /// Target optimality gap of the outer loop.
    pub epsilon: f64,
    /// Outer failure probability.
    pub delta: f64,
    /// Internal threshold scale of the sampling routine.
    pub eps_thresh: f64,
    /// Internal confidence of the sampling routine.
    pub delta1: f64,
    pub mode: UrlMode,
    pub restarts_override: Option<usize>,
    pub eval_episodes_override: Option<usize>,
    pub tsr_iters_override: Option<usize>,
    /// Practical mode: freeze decoders when consecutive fits disagree on
    /// less than this fraction of held-out labels (per level, up to the
    /// best permutation).
    pub stability_threshold: f64,
    /// Practical mode: held-out observations per level.
    pub stability_holdout: usize,
    /// Practical mode: refit once the accumulation has grown by this
    /// factor since the last fit. Keeps total fitting cost linear in the
    /// trajectory budget instead of quadratic.
    pub refit_growth: f64,
    /// Practical mode: when set, refits warm-start from the previous
    /// model and a fresh challenger replaces it only on a relative
    /// objective win beyond this margin. `None` refits from scratch.
    pub refit_margin: Option<f64>,
    /// Practical mode: no refits after this fraction of the episode
    /// budget, so late fits cannot reshuffle the states under a nearly
    /// annealed learner.
    pub refit_deadline: f64,
}

impl UrlParams {
    pub fn new(batch: usize, episodes: usize) -> Self {
        UrlParams {
            batch,
            episodes,
            epsilon: 0.1,
            delta: 0.1,
            eps_thresh: 0.01,
            delta1: 0.1,
            mode: UrlMode::Practical,
            restarts_override: None,
            eval_episodes_override: None,
            tsr_iters_override: None,
            stability_threshold: 0.01,
            stability_holdout: 200,
            refit_growth: 1.5,
            refit_margin: None,
            refit_deadline: 0.8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config(format!("epsilon {} outside (0,1)", self.epsilon)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta {} outside (0,1)", self.delta)));
        }
        if !(self.delta1 > 0.0 && self.delta1 < 1.0) {
            return Err(Error::Config(format!("delta1 {} outside (0,1)", self.delta1)));
        }
        let guard = self.eps_thresh * (1.0 / self.delta1).ln();
        if !(guard > 0.0 && guard <= 0.1) {
            return Err(Error::Config(format!(
                "eps_thresh * ln(1/delta1) = {guard} outside (0, 0.1]"
            )));
        }
        if !(self.stability_threshold > 0.0) {
            return Err(Error::Config("stability threshold must be positive".into()));
        }
        if !(self.refit_growth > 1.0) {
            return Err(Error::Config("refit growth factor must exceed 1".into()));
        }
        if !(0.0..=1.0).contains(&self.refit_deadline) {
            return Err(Error::Config("refit deadline must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Restart count `N = ceil(ln(2/delta) / 2)` unless overridden.
    pub fn restarts(&self) -> usize {
        self.restarts_override
            .unwrap_or_else(|| ((2.0 / self.delta).ln() / 2.0).ceil() as usize)
            .max(1)
    }

    /// Evaluation episodes `L = ceil(9 H^2 / (2 eps^2) ln(2N/delta))`
    /// unless overridden.
    pub fn eval_episodes(&self, horizon: usize) -> usize {
        self.eval_episodes_override.unwrap_or_else(|| {
            let h = horizon as f64;
            let n = self.restarts() as f64;
            (9.0 * h * h / (2.0 * self.epsilon * self.epsilon)
                * (2.0 * n / self.delta).ln())
            .ceil() as usize
        })
    }

    /// Inner iteration count `J = (H + 1) |S| + 1` with `|S|` the largest
    /// per-level latent state count, unless overridden.
    pub fn tsr_iters(&self, horizon: usize, max_states: usize) -> usize {
        self.tsr_iters_override
            .unwrap_or((horizon + 1) * max_states + 1)
    }
}

/// State carried across trajectory-sampling calls within one restart:
/// the policy mixture, the current decoders, the label bank, and the
/// practical-mode accumulation.
pub struct TsrMemory {
    policies: Vec<ObsPolicy>,
    decoders: Vec<Decoder>,
    bank: LabelBank,
    clusters_per_level: Vec<usize>,
    training: Vec<Vec<Observation>>,
    /// Rolling held-out window per level: the most recent observations,
    /// excluded from training until they age out. Stability and refit
    /// alignment are judged on it, so both track the current mixture.
    holdout: Vec<VecDeque<Observation>>,
    holdout_target: usize,
    stable: bool,
    pending_remap: Option<Vec<Vec<RowRemap>>>,
    fits: usize,
    rows_at_last_fit: usize,
    last_disagreement: Option<f64>,
    /// Refits reuse one stream so consecutive fits on similar data land
    /// in the same optima: the stability check then measures the data,
    /// not initialization churn.
    fit_seed: u64,
}

impl TsrMemory {
    /// Fresh memory: empty policy set, empty bank, and constant
    /// decoders mapping everything to state 0.
    pub fn new<E: BlockEnv>(
        env: &E,
        clusters_per_level: &[usize],
        holdout_target: usize,
        fit_seed: u64,
    ) -> Self {
        let decoders = clusters_per_level
            .iter()
            .enumerate()
            .map(|(h, &m)| Decoder::constant(h, m, env.obs_dim()))
            .collect();
        TsrMemory {
            policies: Vec::new(),
            decoders,
            bank: LabelBank::new(clusters_per_level.len()),
            clusters_per_level: clusters_per_level.to_vec(),
            training: vec![Vec::new(); clusters_per_level.len()],
            holdout: vec![VecDeque::new(); clusters_per_level.len()],
            holdout_target,
            stable: false,
            pending_remap: None,
            fits: 0,
            rows_at_last_fit: 0,
            last_disagreement: None,
            fit_seed,
        }
    }

    /// Memory with injected decoders, optionally frozen (no refitting in
    /// practical mode). Test fixture and warm-start hook.
    pub fn with_decoders<E: BlockEnv>(
        env: &E,
        clusters_per_level: &[usize],
        decoders: Vec<Decoder>,
        frozen: bool,
    ) -> Self {
        let mut mem = TsrMemory::new(env, clusters_per_level, 0, 0);
        mem.decoders = decoders;
        mem.stable = frozen;
        mem
    }

    pub fn decoders(&self) -> &[Decoder] {
        &self.decoders
    }

    pub fn policy_count(&self) -> usize {
        self.policies.len()
    }

    pub fn bank(&self) -> &LabelBank {
        &self.bank
    }

    pub fn stable(&self) -> bool {
        self.stable
    }

    pub fn fits(&self) -> usize {
        self.fits
    }

    /// Trajectories routed into the practical-mode training accumulation.
    pub fn training_rows(&self) -> usize {
        self.training.first().map(Vec::len).unwrap_or(0)
    }

    /// Worst per-level holdout disagreement at the most recent
    /// stability check.
    pub fn last_disagreement(&self) -> Option<f64> {
        self.last_disagreement
    }

    /// Row rewiring for the learner after the most recent refit, taken
    /// at most once.
    pub fn take_remap(&mut self) -> Option<Vec<Vec<RowRemap>>> {
        self.pending_remap.take()
    }
}

fn scatter(states: Vec<Observation>, buckets: &mut [Vec<Observation>]) {
    for (h, obs) in states.into_iter().enumerate() {
        buckets[h].push(obs);
    }
}

/// One trajectory-sampling call for proposed policy `pi` at 1-based
/// episode index `episode_index`: refines the decoders, then plays the
/// composite policy once and returns its decoded trajectory together
/// with the decoders that produced it.
pub fn tsr<E: BlockEnv>(
    env: &E,
    ulo_cfg: &UloConfig,
    pi: &TabularPolicy,
    episode_index: usize,
    params: &UrlParams,
    mem: &mut TsrMemory,
    rng: &mut Rng,
) -> Result<(LatentTrajectory, Vec<Decoder>)> {
    assert!(episode_index >= 1, "episode index is 1-based");
    let levels = env.horizon() + 1;
    let max_states = env.states_per_level().iter().copied().max().unwrap_or(1);
    let j_iters = params.tsr_iters(env.horizon(), max_states);

    match params.mode {
        UrlMode::Theoretical => {
            for i in 1..=j_iters {
                let phi = compose_policy(pi.clone(), mem.decoders.clone())?;
                mem.policies.push(phi);
                debug_assert_eq!(mem.policies.len(), (episode_index - 1) * j_iters + i);

                let train_count = ((episode_index - 1) * j_iters + i) * params.batch;
                let mut train: Vec<Vec<Observation>> = vec![Vec::new(); levels];
                for _ in 0..train_count {
                    let pick = rng.random_range(0..mem.policies.len());
                    let traj = sample_trajectory(env, &mem.policies[pick], rng);
                    scatter(traj.states, &mut train);
                }
                let mut test: Vec<Vec<Observation>> = vec![Vec::new(); levels];
                let current = mem.policies.last().expect("just pushed");
                for _ in 0..params.batch {
                    let traj = sample_trajectory(env, current, rng);
                    scatter(traj.states, &mut test);
                }

                let mut fitted = fit_ulo(&train, ulo_cfg, rng)?;
                fix_label(&mut fitted, &mem.bank);
                update_label_bank(
                    &mut mem.bank,
                    &test,
                    &fitted,
                    params.batch,
                    params.eps_thresh,
                    params.delta1,
                );
                mem.decoders = fitted;
            }
        }
        UrlMode::Practical => {
            // One collect-and-refit pass per learner episode: the
            // learner keeps its one-trajectory-per-episode cadence while
            // the accumulated dataset and decoders improve on the side.
            let before_deadline = episode_index as f64
                <= params.refit_deadline * params.episodes.max(1) as f64;
            if !mem.stable && before_deadline {
                let phi = compose_policy(pi.clone(), mem.decoders.clone())?;
                for _ in 0..params.batch {
                    let traj = sample_trajectory(env, &phi, rng);
                    for (h, obs) in traj.states.into_iter().enumerate() {
                        mem.holdout[h].push_back(obs);
                        if mem.holdout[h].len() > mem.holdout_target {
                            let aged = mem.holdout[h].pop_front().expect("nonempty");
                            mem.training[h].push(aged);
                        }
                    }
                }
                let rows = mem.training_rows();
                let ready = mem.clusters_per_level.iter().all(|&m| rows >= m);
                let grown = rows as f64
                    >= (mem.rows_at_last_fit as f64 * params.refit_growth).max(1.0);
                if ready && grown {
                    let had_prev_fit = mem.fits > 0;
                    let mut fit_rng = derive_rng(mem.fit_seed, &[0x6669_7473]);
                    let mut fitted = if ulo_cfg.pooled {
                        fit_ulo(&mem.training, ulo_cfg, &mut fit_rng)?
                    } else {
                        mem.training
                            .iter()
                            .enumerate()
                            .map(|(h, data)| {
                                let prev = match params.refit_margin {
                                    Some(_) if had_prev_fit => Some(mem.decoders[h].kind()),
                                    _ => None,
                                };
                                refit_level(
                                    data,
                                    h,
                                    ulo_cfg.clusters_per_level[h],
                                    ulo_cfg,
                                    &mut fit_rng,
                                    prev,
                                    params.refit_margin.unwrap_or(0.0),
                                )
                            })
                            .collect::<Result<Vec<_>>>()?
                    };
                    mem.fits += 1;
                    mem.rows_at_last_fit = rows;
                    let holdout_full = mem.holdout_target > 0
                        && mem.holdout.iter().all(|h| h.len() >= mem.holdout_target);
                    let mut worst = 0.0f64;
                    let mut remap = Vec::with_capacity(fitted.len());
                    for (h, dec) in fitted.iter_mut().enumerate() {
                        if mem.holdout[h].is_empty() {
                            remap.push(vec![RowRemap::Fresh; dec.classes()]);
                            continue;
                        }
                        let mut now: Vec<usize> =
                            mem.holdout[h].iter().map(|x| dec.predict(x)).collect();
                        let before: Vec<usize> = mem.holdout[h]
                            .iter()
                            .map(|x| mem.decoders[h].predict(x))
                            .collect();
                        let (agreement, perm) =
                            best_permutation_accuracy(&now, &before, dec.classes());
                        // Relabel the refit to agree with the decoders
                        // the learner has been seeing; without this the
                        // learner's tables lose their meaning at every
                        // fit.
                        if had_prev_fit {
                            dec.permute_labels(&perm);
                            for label in now.iter_mut() {
                                *label = perm.apply(*label);
                            }
                        }
                        worst = worst.max(1.0 - agreement);
                        remap.push(remap_plan(&now, &before, dec.classes()));
                    }
                    if had_prev_fit {
                        mem.pending_remap = Some(remap);
                    }
                    // the freeze decision compares two real fits on a
                    // full recent window, with at least that much
                    // training data behind them
                    if had_prev_fit && holdout_full && rows >= mem.holdout_target {
                        mem.last_disagreement = Some(worst);
                        if worst < params.stability_threshold {
                            mem.stable = true;
                        }
                    }
                    mem.decoders = fitted;
                }
            }
        }
    }

    let phi = compose_policy(pi.clone(), mem.decoders.clone())?;
    let traj = sample_trajectory(env, &phi, rng);
    let latent = decode_trajectory(&traj, phi.decoders());
    Ok((latent, mem.decoders.clone()))
}

/// Per-episode progress handed to the caller after each learner update.
/// Returning `false` stops the current restart early (its candidate is
/// still finalized).
pub struct UrlProgress<'a> {
    pub restart: usize,
    pub episode: usize,
    pub decoders: &'a [Decoder],
    pub greedy: TabularPolicy,
    pub decoders_stable: bool,
}

/// The outer loop: for each of N restarts, drive a fresh learner for up
/// to K episodes through the trajectory-sampling routine, then compose
/// its final proposal with the final decoders into a candidate policy.
pub fn url_train<E, L, F, C>(
    env: &E,
    ulo_cfg: &UloConfig,
    mut make_learner: F,
    params: &UrlParams,
    rng: &mut Rng,
    mut progress: C,
) -> Result<Vec<ObsPolicy>>
where
    E: BlockEnv,
    L: NoRegretLearner,
    F: FnMut(usize) -> L,
    C: FnMut(UrlProgress) -> bool,
{
    params.validate()?;
    ulo_cfg.validate()?;
    let mut candidates = Vec::new();
    for restart in 0..params.restarts() {
        let mut learner = make_learner(restart);
        let fit_seed = rng.random::<u64>();
        let mut mem = TsrMemory::new(env, &ulo_cfg.clusters_per_level, params.stability_holdout, fit_seed);
        let mut episode = 0;
        while episode < params.episodes {
            episode += 1;
            let pi = learner.propose()?;
            let (traj, _) = tsr(env, ulo_cfg, &pi, episode, params, &mut mem, rng)?;
            if let Some(remap) = mem.take_remap() {
                // carry the learner's statistics over to the refit
                // state identities before it consumes the trajectory
                for (level, rows) in remap.iter().enumerate() {
                    learner.remap(level, rows);
                }
            }
            learner.update(&traj)?;
            let keep_going = progress(UrlProgress {
                restart,
                episode,
                decoders: mem.decoders(),
                greedy: learner.final_policy(),
                decoders_stable: mem.stable(),
            });
            if !keep_going {
                break;
            }
        }
        // Final proposal plus one more sampling call to finalize the
        // decoders; its trajectory is unused.
        let pi_final = learner.propose()?;
        let (_, decoders) = tsr(env, ulo_cfg, &pi_final, episode + 1, params, &mut mem, rng)?;
        candidates.push(compose_policy(pi_final, decoders)?);
    }
    Ok(candidates)
}

/// Evaluates each candidate over `episodes` rollouts and returns the
/// index of the best mean (lowest index on ties) plus all means.
/// Candidates share one generator stream, so identical candidates score
/// identically.
pub fn select_best<E: BlockEnv>(
    candidates: &[ObsPolicy],
    env: &E,
    episodes: usize,
    rng: &mut Rng,
) -> Result<(usize, Vec<f64>)> {
    if candidates.is_empty() {
        return Err(Error::contract("no candidates to select from"));
    }
    if episodes == 0 {
        return Err(Error::contract("need at least one evaluation episode"));
    }
    let base = rng.random::<u64>();
    let means: Vec<f64> = candidates
        .iter()
        .map(|phi| {
            let mut eval_rng = derive_rng(base, &[0x7365_6c65_6374]);
            mean_episode_reward(env, phi, episodes, &mut eval_rng)
        })
        .collect();
    let mut best = 0;
    for (i, &m) in means.iter().enumerate() {
        if m > means[best] {
            best = i;
        }
    }
    Ok((best, means))
}
