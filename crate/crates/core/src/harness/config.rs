//! Experiment configuration: a flat key=value text format plus
//! command-line overrides, and grid expansion for sweeps.
//!
//! Recognized keys (defaults in parentheses):
//!
//! environment — `env` (lockbernoulli|lockgaussian), `H` (5), `alpha`
//! (0.0), `sigma` (0.1), `relabel` (per-state|per-level|identity),
//! `reward_noise` (bernoulli|deterministic), `level1_states` (1)
//!
//! run — `algorithm` (url|oracleq-lat|oracleq-obs|qlearning-lat|
//! qlearning-obs), `budget` (100000), `replicates` (10), `base_seed`
//! (1, alias `seed`), `eval_every` (0 = budget/20), `eval_episodes`
//! (1000), `timing` (wall|off)
//!
//! learners — `oracleq_c` (0.05), `oracleq_iota` (1.0), `oracleq_cap`
//! (1.0), `ql_lr` (0.25), `ql_eps` (0.1)
//!
//! decoding — `ulo` (kmeans|gmm), `pca` (auto|none|<dims>), `restarts`
//! (5), `max_iters` (100), `tol` (1e-6), `variance_floor` (1e-4),
//! `pooled` (false)
//!
//! framework — `url_mode` (practical|theoretical), `batch` (10),
//! `url_eps` (0.1), `url_delta` (0.1), `eps_thresh` (0.01), `delta1`
//! (0.1), `url_restarts` (1; 0 = formula), `url_eval` (0 = formula),
//! `tsr_iters` (0 = formula), `stability_threshold` (0.01),
//! `stability_holdout` (200), `refit_growth` (1.5)

use crate::error::{Error, Result};
use crate::latent::RewardNoise;
use crate::learner::{EpsGreedyConfig, OracleQConfig};
use crate::lock::{LockEnv, LockSpec, RelabelMode};
use crate::rng::derive_rng;
use crate::ulo::{PcaDims, UloConfig, UloMethod};
use crate::url::{UrlMode, UrlParams};
use rand::Rng as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    LockBernoulli,
    LockGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Url,
    OracleQLat,
    OracleQObs,
    QLearningLat,
    QLearningObs,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Url => "url",
            Algorithm::OracleQLat => "oracleq-lat",
            Algorithm::OracleQObs => "oracleq-obs",
            Algorithm::QLearningLat => "qlearning-lat",
            Algorithm::QLearningObs => "qlearning-obs",
        }
    }

    pub fn observation_tabular(&self) -> bool {
        matches!(self, Algorithm::OracleQObs | Algorithm::QLearningObs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Timing {
    Wall,
    Off,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvKind,
    pub horizon: usize,
    pub alpha: f64,
    pub sigma: f64,
    pub relabel: RelabelMode,
    pub reward_noise: RewardNoise,
    pub level1_states: usize,

    pub algorithm: Algorithm,
    pub budget: u64,
    pub replicates: usize,
    pub base_seed: u64,
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub timing: Timing,
    /// Emit per-replicate decoder / Q-table checkpoint files.
    pub checkpoints: bool,

    pub oracleq_c: f64,
    pub oracleq_iota: f64,
    pub oracleq_cap: f64,
    pub ql_lr: f64,
    pub ql_eps: f64,

    pub ulo_method: UloMethod,
    pub pca: PcaDims,
    /// None picks per environment: standardized coordinates on binary
    /// observations, raw coordinates on gaussian ones.
    pub standardize: Option<bool>,
    pub restarts: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub variance_floor: f64,
    pub pooled: bool,

    pub url_mode: UrlMode,
    pub batch: usize,
    pub url_eps: f64,
    pub url_delta: f64,
    pub eps_thresh: f64,
    pub delta1: f64,
    pub url_restarts: usize,
    pub url_eval: usize,
    pub tsr_iters: usize,
    pub stability_threshold: f64,
    pub stability_holdout: usize,
    pub refit_growth: f64,
    pub refit_margin: Option<f64>,
    pub refit_deadline: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let oq = OracleQConfig::default();
        let ql = EpsGreedyConfig::default();
        ExperimentConfig {
            env: EnvKind::LockBernoulli,
            horizon: 5,
            alpha: 0.0,
            sigma: 0.1,
            relabel: RelabelMode::PerLevelState,
            reward_noise: RewardNoise::Bernoulli,
            level1_states: 1,
            algorithm: Algorithm::Url,
            budget: 100_000,
            replicates: 10,
            base_seed: 1,
            eval_every: 0,
            eval_episodes: 1000,
            timing: Timing::Wall,
            checkpoints: false,
            oracleq_c: oq.bonus_scale,
            oracleq_iota: oq.confidence,
            oracleq_cap: oq.cap,
            ql_lr: ql.learning_rate,
            ql_eps: ql.epsilon,
            ulo_method: UloMethod::KMeans,
            pca: PcaDims::Auto,
            standardize: None,
            restarts: 5,
            max_iters: 100,
            tol: 1e-6,
            variance_floor: 1e-4,
            pooled: false,
            url_mode: UrlMode::Practical,
            batch: 10,
            url_eps: 0.1,
            url_delta: 0.1,
            eps_thresh: 0.01,
            delta1: 0.1,
            url_restarts: 1,
            url_eval: 0,
            tsr_iters: 0,
            stability_threshold: 0.01,
            stability_holdout: 200,
            refit_growth: 1.5,
            refit_margin: None,
            refit_deadline: 0.8,
        }
    }
}

fn bad(key: &str, value: &str) -> Error {
    Error::Config(format!("bad value {value:?} for key {key:?}"))
}

impl ExperimentConfig {
    /// Parses the key=value text format. `#` starts a comment; blank
    /// lines are skipped; unknown keys are rejected.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got {line:?}")))?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn parse(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut cfg = ExperimentConfig::from_text(text)?;
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value.parse::<T>().map_err(|_| bad(key, value))
        }
        match key {
            "env" => {
                self.env = match value {
                    "lockbernoulli" => EnvKind::LockBernoulli,
                    "lockgaussian" => EnvKind::LockGaussian,
                    _ => return Err(bad(key, value)),
                }
            }
            "H" => self.horizon = num(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "sigma" => self.sigma = num(key, value)?,
            "relabel" => {
                self.relabel = match value {
                    "per-state" => RelabelMode::PerLevelState,
                    "per-level" => RelabelMode::PerLevel,
                    "identity" => RelabelMode::Identity,
                    _ => return Err(bad(key, value)),
                }
            }
            "reward_noise" => {
                self.reward_noise = match value {
                    "bernoulli" => RewardNoise::Bernoulli,
                    "deterministic" => RewardNoise::Deterministic,
                    _ => return Err(bad(key, value)),
                }
            }
            "level1_states" => self.level1_states = num(key, value)?,
            "algorithm" => {
                self.algorithm = match value {
                    "url" => Algorithm::Url,
                    "oracleq-lat" => Algorithm::OracleQLat,
                    "oracleq-obs" => Algorithm::OracleQObs,
                    "qlearning-lat" => Algorithm::QLearningLat,
                    "qlearning-obs" => Algorithm::QLearningObs,
                    _ => return Err(bad(key, value)),
                }
            }
            "budget" => self.budget = num(key, value)?,
            "replicates" => self.replicates = num(key, value)?,
            "base_seed" | "seed" => self.base_seed = num(key, value)?,
            "eval_every" => self.eval_every = num(key, value)?,
            "eval_episodes" => self.eval_episodes = num(key, value)?,
            "timing" => {
                self.timing = match value {
                    "wall" => Timing::Wall,
                    "off" => Timing::Off,
                    _ => return Err(bad(key, value)),
                }
            }
            "checkpoints" => {
                self.checkpoints = match value {
                    "true" | "1" => true,
                    "false" | "0" => false,
                    _ => return Err(bad(key, value)),
                }
            }
            "oracleq_c" => self.oracleq_c = num(key, value)?,
            "oracleq_iota" => self.oracleq_iota = num(key, value)?,
            "oracleq_cap" => self.oracleq_cap = num(key, value)?,
            "ql_lr" => self.ql_lr = num(key, value)?,
            "ql_eps" => self.ql_eps = num(key, value)?,
            "ulo" => {
                self.ulo_method = match value {
                    "kmeans" => UloMethod::KMeans,
                    "gmm" => UloMethod::Gmm,
                    _ => return Err(bad(key, value)),
                }
            }
            "pca" => {
                self.pca = match value {
                    "auto" => PcaDims::Auto,
                    "none" => PcaDims::Disabled,
                    _ => PcaDims::Fixed(num(key, value)?),
                }
            }
            "standardize" => {
                self.standardize = match value {
                    "auto" => None,
                    "true" | "1" => Some(true),
                    "false" | "0" => Some(false),
                    _ => return Err(bad(key, value)),
                }
            }
            "restarts" => self.restarts = num(key, value)?,
            "max_iters" => self.max_iters = num(key, value)?,
            "tol" => self.tol = num(key, value)?,
            "variance_floor" => self.variance_floor = num(key, value)?,
            "pooled" => {
                self.pooled = match value {
                    "true" | "1" => true,
                    "false" | "0" => false,
                    _ => return Err(bad(key, value)),
                }
            }
            "url_mode" => {
                self.url_mode = match value {
                    "practical" => UrlMode::Practical,
                    "theoretical" => UrlMode::Theoretical,
                    _ => return Err(bad(key, value)),
                }
            }
            "batch" => self.batch = num(key, value)?,
            "url_eps" => self.url_eps = num(key, value)?,
            "url_delta" => self.url_delta = num(key, value)?,
            "eps_thresh" => self.eps_thresh = num(key, value)?,
            "delta1" => self.delta1 = num(key, value)?,
            "url_restarts" => self.url_restarts = num(key, value)?,
            "url_eval" => self.url_eval = num(key, value)?,
            "tsr_iters" => self.tsr_iters = num(key, value)?,
            "stability_threshold" => self.stability_threshold = num(key, value)?,
            "stability_holdout" => self.stability_holdout = num(key, value)?,
            "refit_growth" => self.refit_growth = num(key, value)?,
            "refit_margin" => {
                self.refit_margin = match value {
                    "none" => None,
                    _ => Some(num(key, value)?),
                }
            }
            "refit_deadline" => self.refit_deadline = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::Config("budget must be positive".into()));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicate count must be >= 1".into()));
        }
        if self.eval_episodes == 0 {
            return Err(Error::Config("eval_episodes must be >= 1".into()));
        }
        if self.algorithm.observation_tabular() && self.env == EnvKind::LockGaussian {
            return Err(Error::Config(
                "observation-tabular algorithms are rejected on gaussian emissions \
                 (infinitely many observations)"
                    .into(),
            ));
        }
        if self.algorithm == Algorithm::Url {
            self.url_params().validate()?;
            self.ulo_config(&self.clusters_per_level()).validate()?;
        }
        self.lock_spec(0).map(|_| ())
    }

    /// Derives a per-replicate environment spec: action labels are
    /// reassigned at the start of each training run, so the relabel seed
    /// mixes the base seed with the replicate index.
    pub fn lock_spec(&self, replicate: usize) -> Result<LockSpec> {
        let relabel_seed = derive_rng(self.base_seed, &[replicate as u64, 0x7265_6c61])
            .random::<u64>();
        let mut spec = match self.env {
            EnvKind::LockBernoulli => LockSpec::bernoulli(self.horizon, self.alpha, relabel_seed),
            EnvKind::LockGaussian => {
                LockSpec::gaussian(self.horizon, self.alpha, self.sigma, relabel_seed)
            }
        };
        spec.relabel_mode = self.relabel;
        spec.reward_noise = self.reward_noise;
        spec.level1_states = self.level1_states;
        // spec constraints checked by environment construction
        LockEnv::new(spec.clone()).map(|_| spec)
    }

    pub fn build_env(&self, replicate: usize) -> Result<LockEnv> {
        LockEnv::new(self.lock_spec(replicate)?)
    }

    pub fn clusters_per_level(&self) -> Vec<usize> {
        let mut clusters = vec![3usize; self.horizon + 1];
        clusters[0] = self.level1_states;
        clusters
    }

    pub fn oracleq_config(&self) -> OracleQConfig {
        OracleQConfig {
            bonus_scale: self.oracleq_c,
            confidence: self.oracleq_iota,
            cap: self.oracleq_cap,
            ..OracleQConfig::default()
        }
    }

    pub fn epsgreedy_config(&self, seed: u64) -> EpsGreedyConfig {
        EpsGreedyConfig {
            learning_rate: self.ql_lr,
            epsilon: self.ql_eps,
            seed,
        }
    }

    pub fn ulo_config(&self, clusters_per_level: &[usize]) -> UloConfig {
        let mut cfg = UloConfig::new(self.ulo_method, clusters_per_level.to_vec());
        cfg.pca_dims = self.pca;
        // On binary observations the distractor coordinates carry the
        // largest raw variance and would dominate the projection, so
        // the k-means route standardizes them away by default there;
        // gaussian distractors are weak and standardizing would amplify
        // them instead.
        cfg.standardize = self
            .standardize
            .unwrap_or(self.env == EnvKind::LockBernoulli);
        cfg.restarts = self.restarts;
        cfg.max_iters = self.max_iters;
        cfg.tol = self.tol;
        cfg.variance_floor = self.variance_floor;
        cfg.pooled = self.pooled;
        cfg
    }

    pub fn url_params(&self) -> UrlParams {
        let mut p = UrlParams::new(self.batch, self.budget as usize);
        p.epsilon = self.url_eps;
        p.delta = self.url_delta;
        p.eps_thresh = self.eps_thresh;
        p.delta1 = self.delta1;
        p.mode = self.url_mode;
        p.stability_threshold = self.stability_threshold;
        p.stability_holdout = self.stability_holdout;
        p.refit_growth = self.refit_growth;
        p.refit_margin = self.refit_margin;
        p.refit_deadline = self.refit_deadline;
        if self.url_restarts > 0 {
            p.restarts_override = Some(self.url_restarts);
        }
        if self.url_eval > 0 {
            p.eval_episodes_override = Some(self.url_eval);
        }
        if self.tsr_iters > 0 {
            p.tsr_iters_override = Some(self.tsr_iters);
        }
        p
    }

    pub fn eval_grid_step(&self) -> u64 {
        if self.eval_every > 0 {
            self.eval_every
        } else {
            (self.budget / 20).max(1)
        }
    }
}

/// Expands a grid file into named configurations: same key=value format,
/// but values may be comma-separated lists; the cartesian product is
/// taken in file order.
pub fn expand_grid(text: &str) -> Result<Vec<(String, ExperimentConfig)>> {
    let mut keys: Vec<(String, Vec<String>)> = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got {line:?}")))?;
        let values: Vec<String> = value.split(',').map(|v| v.trim().to_string()).collect();
        if values.is_empty() || values.iter().any(String::is_empty) {
            return Err(Error::Config(format!("empty value in {line:?}")));
        }
        keys.push((key.trim().to_string(), values));
    }
    let mut combos: Vec<(String, ExperimentConfig)> = vec![(String::new(), ExperimentConfig::default())];
    for (key, values) in &keys {
        let mut next = Vec::with_capacity(combos.len() * values.len());
        for (name, cfg) in &combos {
            for v in values {
                let mut cfg = cfg.clone();
                cfg.set(key, v)?;
                let name = if values.len() == 1 {
                    name.clone()
                } else if name.is_empty() {
                    format!("{key}-{v}")
                } else {
                    format!("{name}_{key}-{v}")
                };
                next.push((name, cfg));
            }
        }
        combos = next;
    }
    for (name, cfg) in &mut combos {
        if name.is_empty() {
            *name = "run".to_string();
        }
        cfg.validate()?;
    }
    Ok(combos)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_defaults_and_overrides() {
        let text = "# comment\nenv = lockgaussian\nH = 10\nalpha = 0.2\nalgorithm = url\n";
        let cfg = ExperimentConfig::parse(
            text,
            &[("sigma".into(), "0.2".into()), ("budget".into(), "5000".into())],
        )
        .unwrap();
        assert_eq!(cfg.env, EnvKind::LockGaussian);
        assert_eq!(cfg.horizon, 10);
        assert_eq!(cfg.sigma, 0.2);
        assert_eq!(cfg.budget, 5000);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_text("frobnicate = 3\n").is_err());
    }

    #[test]
    fn obs_algorithms_rejected_on_gaussian() {
        let text = "env = lockgaussian\nalgorithm = qlearning-obs\n";
        let err = ExperimentConfig::parse(text, &[]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let ok = "env = lockbernoulli\nalgorithm = qlearning-obs\n";
        assert!(ExperimentConfig::parse(ok, &[]).is_ok());
    }

    #[test]
    fn relabel_seed_differs_per_replicate() {
        let cfg = ExperimentConfig::default();
        let a = cfg.lock_spec(0).unwrap();
        let b = cfg.lock_spec(1).unwrap();
        assert_ne!(a.relabel_seed, b.relabel_seed);
        let a2 = cfg.lock_spec(0).unwrap();
        assert_eq!(a.relabel_seed, a2.relabel_seed);
    }

    #[test]
    fn grid_expansion_is_cartesian_in_file_order() {
        let grid = "H = 5, 10\nalpha = 0.0, 0.2, 0.5\nalgorithm = oracleq-lat\n";
        let combos = expand_grid(grid).unwrap();
        assert_eq!(combos.len(), 6);
        assert_eq!(combos[0].0, "H-5_alpha-0.0");
        assert_eq!(combos[5].0, "H-10_alpha-0.5");
        assert_eq!(combos[3].1.horizon, 10);
        assert_eq!(combos[1].1.alpha, 0.2);
    }

    #[test]
    fn eval_grid_defaults_to_twentieth() {
        let mut cfg = ExperimentConfig::default();
        cfg.budget = 100_000;
        assert_eq!(cfg.eval_grid_step(), 5000);
        cfg.eval_every = 777;
        assert_eq!(cfg.eval_grid_step(), 777);
    }
}
