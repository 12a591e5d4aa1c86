//! Unsupervised decoding oracles: given unlabeled per-level observation
//! batches, produce per-level classifiers mapping observations to
//! decoded state indices, correct up to an unknown label permutation.

pub mod gmm;
pub mod kmeans;
pub mod linalg;
pub mod pca;

pub use gmm::{gmm_fit, GmmFit};
pub use kmeans::{kmeans_fit, KmeansFit};
pub use pca::{pca_fit, pca_fit_scaled, PcaProjection};

use crate::error::{Error, Result};
use crate::perm::{for_each_permutation, Permutation};
use crate::rng::Rng;
use gmm::log_density_diag;
use linalg::squared_distance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UloMethod {
    KMeans,
    Gmm,
}

/// PCA dimension policy for the k-means route.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcaDims {
    /// `min(d, clusters + 1)` per level.
    Auto,
    Disabled,
    Fixed(usize),
}

impl PcaDims {
    fn resolve(&self, d: usize, clusters: usize) -> Option<usize> {
        match *self {
            PcaDims::Auto => Some(d.min(clusters + 1)),
            PcaDims::Disabled => None,
            PcaDims::Fixed(k) => Some(k.clamp(1, d)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct UloConfig {
    pub method: UloMethod,
    /// Decoded-state count per level; also each decoder's class count.
    pub clusters_per_level: Vec<usize>,
    pub pca_dims: PcaDims,
    /// Standardize coordinates (correlation-matrix PCA) before the
    /// k-means route. Amplifies low-variance signal coordinates, e.g.
    /// rarely visited one-hot coordinates in binary observations.
    pub standardize: bool,
    pub max_iters: usize,
    pub tol: f64,
    pub restarts: usize,
    pub variance_floor: f64,
    /// Fit one model on all levels at once, with the level index
    /// appended as a scaled feature. Practical-mode option.
    pub pooled: bool,
    pub pooled_level_scale: f64,
}

impl UloConfig {
    pub fn new(method: UloMethod, clusters_per_level: Vec<usize>) -> Self {
        UloConfig {
            method,
            clusters_per_level,
            pca_dims: PcaDims::Auto,
            standardize: false,
            max_iters: 100,
            tol: 1e-6,
            restarts: 5,
            variance_floor: 1e-4,
            pooled: false,
            pooled_level_scale: 10.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("ulo tol {} must be positive", self.tol)));
        }
        if self.restarts == 0 {
            return Err(Error::Config("ulo restarts must be >= 1".into()));
        }
        if !(self.variance_floor > 0.0) {
            return Err(Error::Config("variance floor must be positive".into()));
        }
        if self.clusters_per_level.iter().any(|&m| m == 0) {
            return Err(Error::Config("cluster counts must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DecoderKind {
    /// Nearest center by squared distance, after an optional PCA
    /// projection. Ties break to the lowest center index.
    NearestCentroid {
        centers: Vec<Vec<f64>>,
        pca: Option<PcaProjection>,
    },
    /// Highest-posterior component of a diagonal Gaussian mixture.
    GmmMap {
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        variances: Vec<Vec<f64>>,
    },
    /// Shared pooled model: the level index (scaled) is appended to the
    /// observation, the pooled cluster is looked up, and mapped to this
    /// level's local label.
    Pooled {
        model: Box<DecoderKind>,
        level_feature: f64,
        cluster_to_local: Vec<usize>,
    },
}

impl DecoderKind {
    fn input_dim(&self) -> usize {
        match self {
            DecoderKind::NearestCentroid { centers, pca } => pca
                .as_ref()
                .map(|p| p.input_dim())
                .unwrap_or_else(|| centers.first().map(Vec::len).unwrap_or(0)),
            DecoderKind::GmmMap { means, .. } => means[0].len(),
            DecoderKind::Pooled { model, .. } => model.input_dim() - 1,
        }
    }

    fn raw_classes(&self) -> usize {
        match self {
            DecoderKind::NearestCentroid { centers, .. } => centers.len(),
            DecoderKind::GmmMap { weights, .. } => weights.len(),
            DecoderKind::Pooled {
                cluster_to_local, ..
            } => cluster_to_local.iter().copied().max().unwrap_or(0) + 1,
        }
    }

    fn predict_raw(&self, x: &[f64]) -> usize {
        match self {
            DecoderKind::NearestCentroid { centers, pca } => {
                let projected;
                let y: &[f64] = match pca {
                    Some(p) => {
                        projected = p.project(x);
                        &projected
                    }
                    None => x,
                };
                let mut best = f64::INFINITY;
                let mut best_i = 0;
                for (i, c) in centers.iter().enumerate() {
                    let d = squared_distance(y, c);
                    if d < best {
                        best = d;
                        best_i = i;
                    }
                }
                best_i
            }
            DecoderKind::GmmMap {
                weights,
                means,
                variances,
            } => {
                let mut best = f64::NEG_INFINITY;
                let mut best_i = 0;
                for i in 0..weights.len() {
                    let lp = weights[i].max(1e-300).ln()
                        + log_density_diag(x, &means[i], &variances[i]);
                    if lp > best {
                        best = lp;
                        best_i = i;
                    }
                }
                best_i
            }
            DecoderKind::Pooled {
                model,
                level_feature,
                cluster_to_local,
            } => {
                let mut xx = Vec::with_capacity(x.len() + 1);
                xx.extend_from_slice(x);
                xx.push(*level_feature);
                cluster_to_local[model.predict_raw(&xx)]
            }
        }
    }
}

/// Per-level classifier from observations to decoded state indices,
/// composable with a label permutation. Immutable after fitting apart
/// from label relabeling.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoder {
    level: usize,
    classes: usize,
    kind: DecoderKind,
    label_permutation: Permutation,
}

impl Decoder {
    pub fn nearest_centroid(level: usize, centers: Vec<Vec<f64>>, pca: Option<PcaProjection>) -> Self {
        let classes = centers.len();
        Decoder {
            level,
            classes,
            kind: DecoderKind::NearestCentroid { centers, pca },
            label_permutation: Permutation::identity(classes),
        }
    }

    pub fn gmm_map(level: usize, fit: GmmFit) -> Self {
        let classes = fit.weights.len();
        Decoder {
            level,
            classes,
            kind: DecoderKind::GmmMap {
                weights: fit.weights,
                means: fit.means,
                variances: fit.variances,
            },
            label_permutation: Permutation::identity(classes),
        }
    }

    /// Maps every observation to state 0 while exposing `classes`
    /// labels: the fixed starting point before any data has been seen.
    pub fn constant(level: usize, classes: usize, dim: usize) -> Self {
        Decoder::nearest_centroid(level, vec![vec![0.0; dim]; classes], None)
    }

    pub(crate) fn from_parts(
        level: usize,
        classes: usize,
        kind: DecoderKind,
        label_permutation: Permutation,
    ) -> Result<Self> {
        if label_permutation.len() != classes {
            return Err(Error::contract("label permutation size != classes"));
        }
        if kind.raw_classes() > classes {
            return Err(Error::contract("decoder kind emits more labels than classes"));
        }
        Ok(Decoder {
            level,
            classes,
            kind,
            label_permutation,
        })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn input_dim(&self) -> usize {
        self.kind.input_dim()
    }

    pub fn kind(&self) -> &DecoderKind {
        &self.kind
    }

    pub fn label_permutation(&self) -> &Permutation {
        &self.label_permutation
    }

    /// Decoded state index in `[0, classes)`.
    #[inline]
    pub fn predict(&self, x: &[f64]) -> usize {
        assert_eq!(
            x.len(),
            self.kind.input_dim(),
            "observation dimension mismatch at level {}",
            self.level
        );
        self.label_permutation.apply(self.kind.predict_raw(x))
    }

    /// [`predict`](Self::predict) with the dimension contract as an error.
    pub fn try_predict(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.kind.input_dim() {
            return Err(Error::contract(format!(
                "observation dim {} != decoder dim {} at level {}",
                x.len(),
                self.kind.input_dim(),
                self.level
            )));
        }
        Ok(self.predict(x))
    }

    /// Applies `perm` on top of the current output labels.
    pub fn permute_labels(&mut self, perm: &Permutation) {
        assert_eq!(perm.len(), self.classes, "permutation size mismatch");
        self.label_permutation = perm.compose_after(&self.label_permutation);
    }
}

/// Fits one decoder per level with identity label permutations, or one
/// pooled model shared by all levels when `cfg.pooled` is set.
pub fn fit_ulo(per_level: &[Vec<Vec<f64>>], cfg: &UloConfig, rng: &mut Rng) -> Result<Vec<Decoder>> {
    cfg.validate()?;
    if cfg.clusters_per_level.len() != per_level.len() {
        return Err(Error::contract(format!(
            "{} levels of data, {} cluster counts",
            per_level.len(),
            cfg.clusters_per_level.len()
        )));
    }
    for (data, &m) in per_level.iter().zip(cfg.clusters_per_level.iter()) {
        if data.len() < m {
            return Err(Error::InsufficientData {
                need: m,
                got: data.len(),
            });
        }
    }
    if cfg.pooled {
        fit_pooled(per_level, cfg, rng)
    } else {
        per_level
            .iter()
            .zip(cfg.clusters_per_level.iter())
            .enumerate()
            .map(|(h, (data, &m))| fit_level(data, h, m, cfg, rng))
            .collect()
    }
}

fn fit_level(data: &[Vec<f64>], level: usize, clusters: usize, cfg: &UloConfig, rng: &mut Rng) -> Result<Decoder> {
    match cfg.method {
        UloMethod::KMeans => {
            let d = data[0].len();
            let dims = cfg.pca_dims.resolve(d, clusters).filter(|&k| k < d);
            if let Some(dims) = dims.filter(|_| data.len() >= 2) {
                let pca = pca_fit_scaled(data, dims, cfg.standardize)?;
                let projected: Vec<Vec<f64>> = data.iter().map(|x| pca.project(x)).collect();
                let km = kmeans_fit(&projected, clusters, cfg, rng)?;
                Ok(Decoder::nearest_centroid(level, km.centers, Some(pca)))
            } else {
                let km = kmeans_fit(data, clusters, cfg, rng)?;
                Ok(Decoder::nearest_centroid(level, km.centers, None))
            }
        }
        UloMethod::Gmm => {
            let fit = gmm_fit(data, clusters, cfg, rng)?;
            Ok(Decoder::gmm_map(level, fit))
        }
    }
}

/// Refits one level, continuing from the previous decoder's parameters
/// when given. The warm-started model keeps cluster identities stable
/// across refits; a freshly seeded challenger replaces it only when it
/// beats the continuation by the relative objective margin, so the
/// labeling does not churn between near-tied optima as the dataset
/// grows.
pub fn refit_level(
    data: &[Vec<f64>],
    level: usize,
    clusters: usize,
    cfg: &UloConfig,
    rng: &mut Rng,
    prev: Option<&DecoderKind>,
    margin: f64,
) -> Result<Decoder> {
    if data.len() < clusters {
        return Err(Error::InsufficientData {
            need: clusters,
            got: data.len(),
        });
    }
    match cfg.method {
        UloMethod::KMeans => {
            let d = data[0].len();
            let dims = cfg
                .pca_dims
                .resolve(d, clusters)
                .filter(|&k| k < d && data.len() >= 2);
            let (pca, work): (Option<PcaProjection>, std::borrow::Cow<[Vec<f64>]>) = match dims {
                Some(dims) => {
                    let p = pca_fit_scaled(data, dims, cfg.standardize)?;
                    let projected: Vec<Vec<f64>> = data.iter().map(|x| p.project(x)).collect();
                    (Some(p), std::borrow::Cow::Owned(projected))
                }
                None => (None, std::borrow::Cow::Borrowed(data)),
            };
            let fresh = kmeans_fit(&work, clusters, cfg, rng)?;
            let warm = prev.and_then(|kind| match kind {
                DecoderKind::NearestCentroid {
                    centers,
                    pca: prev_pca,
                } if centers.len() == clusters => {
                    let raw: Vec<Vec<f64>> = centers
                        .iter()
                        .map(|c| match prev_pca {
                            Some(p) => p.reconstruct(c),
                            None => c.clone(),
                        })
                        .collect();
                    let start: Vec<Vec<f64>> = match &pca {
                        Some(p) => raw.iter().map(|c| p.project(c)).collect(),
                        None => raw,
                    };
                    Some(kmeans::lloyd_from(&work, start, cfg))
                }
                _ => None,
            });
            let chosen = match warm {
                Some(w) if fresh.wcss >= w.wcss * (1.0 - margin) => w,
                _ => fresh,
            };
            Ok(Decoder::nearest_centroid(level, chosen.centers, pca))
        }
        UloMethod::Gmm => {
            let fresh = gmm_fit(data, clusters, cfg, rng)?;
            let warm = prev.and_then(|kind| match kind {
                DecoderKind::GmmMap {
                    weights,
                    means,
                    variances,
                } if weights.len() == clusters => gmm::gmm_fit_from(
                    data,
                    weights.clone(),
                    means.clone(),
                    variances.clone(),
                    cfg,
                )
                .ok(),
                _ => None,
            });
            let chosen = match warm {
                Some(w) if fresh.loglik <= w.loglik + margin * w.loglik.abs().max(0.05) => w,
                _ => fresh,
            };
            Ok(Decoder::gmm_map(level, chosen))
        }
    }
}

fn fit_pooled(per_level: &[Vec<Vec<f64>>], cfg: &UloConfig, rng: &mut Rng) -> Result<Vec<Decoder>> {
    let levels = per_level.len();
    let total_clusters: usize = cfg.clusters_per_level.iter().sum();
    let mut pooled = Vec::new();
    let mut row_level = Vec::new();
    for (h, data) in per_level.iter().enumerate() {
        for x in data {
            let mut xx = Vec::with_capacity(x.len() + 1);
            xx.extend_from_slice(x);
            xx.push(cfg.pooled_level_scale * h as f64);
            pooled.push(xx);
            row_level.push(h);
        }
    }
    let max_clusters = cfg.clusters_per_level.iter().copied().max().unwrap_or(1);
    let model = match cfg.method {
        UloMethod::KMeans => {
            let d = pooled[0].len();
            let dims = cfg
                .pca_dims
                .resolve(d, max_clusters + 1)
                .filter(|&k| k < d && pooled.len() >= 2);
            if let Some(dims) = dims {
                let pca = pca_fit_scaled(&pooled, dims, cfg.standardize)?;
                let projected: Vec<Vec<f64>> = pooled.iter().map(|x| pca.project(x)).collect();
                let km = kmeans_fit(&projected, total_clusters, cfg, rng)?;
                DecoderKind::NearestCentroid {
                    centers: km.centers,
                    pca: Some(pca),
                }
            } else {
                let km = kmeans_fit(&pooled, total_clusters, cfg, rng)?;
                DecoderKind::NearestCentroid {
                    centers: km.centers,
                    pca: None,
                }
            }
        }
        UloMethod::Gmm => {
            let fit = gmm_fit(&pooled, total_clusters, cfg, rng)?;
            DecoderKind::GmmMap {
                weights: fit.weights,
                means: fit.means,
                variances: fit.variances,
            }
        }
    };

    // Assign each level's pooled clusters to local labels by training
    // mass; clusters a level never produced fall back to label 0.
    let mut counts = vec![vec![0usize; total_clusters]; levels];
    for (xx, &h) in pooled.iter().zip(row_level.iter()) {
        counts[h][model.predict_raw(xx)] += 1;
    }
    (0..levels)
        .map(|h| {
            let m = cfg.clusters_per_level[h];
            let mut order: Vec<usize> = (0..total_clusters).collect();
            order.sort_by_key(|&c| (std::cmp::Reverse(counts[h][c]), c));
            let mut map = vec![0usize; total_clusters];
            for (local, &c) in order.iter().take(m).enumerate() {
                map[c] = local;
            }
            Decoder::from_parts(
                h,
                m,
                DecoderKind::Pooled {
                    model: Box::new(model.clone()),
                    level_feature: cfg.pooled_level_scale * h as f64,
                    cluster_to_local: map,
                },
                Permutation::identity(m),
            )
        })
        .collect()
}

/// Fraction of observations assigned the true label under the best
/// output relabeling, found by exhaustive search over permutations.
/// Returns the accuracy and the maximizing permutation.
pub fn best_permutation_accuracy(
    predicted: &[usize],
    truth: &[usize],
    classes: usize,
) -> (f64, Permutation) {
    assert_eq!(predicted.len(), truth.len(), "label count mismatch");
    assert!(!predicted.is_empty(), "empty label set");
    let mut confusion = vec![vec![0usize; classes]; classes];
    for (&p, &t) in predicted.iter().zip(truth.iter()) {
        confusion[p][t] += 1;
    }
    let mut best = 0usize;
    let mut best_perm: Vec<usize> = (0..classes).collect();
    for_each_permutation(classes, |perm| {
        let correct: usize = (0..classes).map(|p| confusion[p][perm[p]]).sum();
        if correct > best {
            best = correct;
            best_perm = perm.to_vec();
        }
    });
    (
        best as f64 / predicted.len() as f64,
        Permutation::from_vec(best_perm).expect("valid permutation"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::BlockEnv;
    use crate::lock::{LockEnv, LockSpec};
    use crate::policy::TabularPolicy;
    use crate::rng::seed_rng;
    use crate::trajectory::sample_trajectory;

    #[test]
    fn centroid_hit_returns_permuted_index() {
        let centers = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let mut dec = Decoder::nearest_centroid(0, centers.clone(), None);
        assert_eq!(dec.predict(&[1.0, 0.0]), 1);
        dec.permute_labels(&Permutation::transposition(3, 0, 1));
        assert_eq!(dec.predict(&[1.0, 0.0]), 0);
        assert_eq!(dec.predict(&[0.0, 1.0]), 2);
    }

    #[test]
    fn swap_permutation_relates_outputs_pointwise() {
        let centers = vec![vec![-1.0], vec![1.0]];
        let plain = Decoder::nearest_centroid(0, centers.clone(), None);
        let mut swapped = Decoder::nearest_centroid(0, centers, None);
        let swap = Permutation::transposition(2, 0, 1);
        swapped.permute_labels(&swap);
        let mut rng = seed_rng(1);
        use rand::Rng as _;
        for _ in 0..200 {
            let x = [rng.random_range(-2.0..2.0)];
            assert_eq!(swapped.predict(&x), swap.apply(plain.predict(&x)));
        }
    }

    #[test]
    fn tie_breaks_to_lowest_raw_index() {
        let dec = Decoder::nearest_centroid(0, vec![vec![1.0], vec![1.0], vec![0.0]], None);
        assert_eq!(dec.predict(&[1.0]), 0);
        let mut permuted = dec.clone();
        permuted.permute_labels(&Permutation::from_vec(vec![2, 0, 1]).unwrap());
        // raw winner is still index 0; output is its permuted label.
        assert_eq!(permuted.predict(&[1.0]), 2);
    }

    #[test]
    fn permutation_composition_law() {
        let centers = vec![vec![0.0], vec![1.0], vec![2.0]];
        let gamma = Permutation::from_vec(vec![1, 2, 0]).unwrap();
        let beta = Permutation::transposition(3, 0, 2);

        let mut via_gamma = Decoder::nearest_centroid(0, centers.clone(), None);
        via_gamma.permute_labels(&gamma);

        let mut via_both = Decoder::nearest_centroid(0, centers, None);
        via_both.permute_labels(&beta.compose_after(&gamma));

        for x in [[0.1], [0.9], [1.6], [2.4]] {
            assert_eq!(via_both.predict(&x), beta.apply(via_gamma.predict(&x)));
        }
    }

    #[test]
    fn predict_is_pure() {
        let dec = Decoder::nearest_centroid(0, vec![vec![0.0, 1.0], vec![1.0, 0.0]], None);
        let x = [0.4, 0.6];
        let first = dec.predict(&x);
        for _ in 0..10 {
            assert_eq!(dec.predict(&x), first);
        }
    }

    #[test]
    fn dimension_contract() {
        let dec = Decoder::nearest_centroid(2, vec![vec![0.0, 0.0]], None);
        assert!(dec.try_predict(&[1.0]).is_err());
        assert!(dec.try_predict(&[1.0, 2.0]).is_ok());
    }

    #[test]
    fn fit_ulo_level_counts_match_config() {
        let env = LockEnv::new(LockSpec::bernoulli(5, 0.0, 3).with_diagnostics(true)).unwrap();
        let mut rng = seed_rng(5);
        let mut per_level: Vec<Vec<Vec<f64>>> = vec![Vec::new(); 6];
        let pi = TabularPolicy::constant(&env.states_per_level()[..5], 0);
        let phi = crate::policy::compose_policy(pi, env.oracle_decoders()).unwrap();
        for _ in 0..40 {
            let traj = sample_trajectory(&env, &phi, &mut rng);
            for (h, obs) in traj.states.iter().enumerate() {
                per_level[h].push(obs.clone());
            }
        }
        let cfg = UloConfig::new(UloMethod::KMeans, vec![1, 3, 3, 3, 3, 3]);
        let decoders = fit_ulo(&per_level, &cfg, &mut rng).unwrap();
        assert_eq!(decoders.len(), 6);
        for (h, dec) in decoders.iter().enumerate() {
            assert_eq!(dec.classes(), cfg.clusters_per_level[h]);
            assert_eq!(dec.level(), h);
            assert!(dec.label_permutation().is_identity());
        }
    }

    #[test]
    fn noiseless_blocks_are_fully_pure() {
        // Zero-noise test mode: bare one-hot observations per state.
        let mut per_level: Vec<Vec<Vec<f64>>> = Vec::new();
        let mut truth: Vec<Vec<usize>> = Vec::new();
        for _ in 0..3 {
            let mut data = Vec::new();
            let mut labels = Vec::new();
            for s in 0..3usize {
                for _ in 0..20 {
                    let mut x = vec![0.0; 6];
                    x[s] = 1.0;
                    data.push(x);
                    labels.push(s);
                }
            }
            per_level.push(data);
            truth.push(labels);
        }
        for method in [UloMethod::KMeans, UloMethod::Gmm] {
            let cfg = UloConfig::new(method, vec![3, 3, 3]);
            let decoders = fit_ulo(&per_level, &cfg, &mut seed_rng(7)).unwrap();
            for (h, dec) in decoders.iter().enumerate() {
                let pred: Vec<usize> = per_level[h].iter().map(|x| dec.predict(x)).collect();
                let (acc, _) = best_permutation_accuracy(&pred, &truth[h], 3);
                assert_eq!(acc, 1.0, "method {method:?} level {h}");
            }
        }
    }

    #[test]
    fn gaussian_lock_purity_high_with_balanced_samples() {
        let env = LockEnv::new(LockSpec::gaussian(4, 0.0, 0.1, 9).with_diagnostics(true)).unwrap();
        let mut rng = seed_rng(11);
        let per_state = 300;
        let mut per_level: Vec<Vec<Vec<f64>>> = vec![Vec::new(); 5];
        let mut truth: Vec<Vec<usize>> = vec![Vec::new(); 5];
        let mut emit_rng = seed_rng(12);
        for h in 0..5 {
            for s in 0..env.states_per_level()[h] {
                for _ in 0..per_state {
                    per_level[h].push(env.emit(h, s, &mut emit_rng));
                    truth[h].push(s);
                }
            }
        }
        for method in [UloMethod::KMeans, UloMethod::Gmm] {
            let cfg = UloConfig::new(method, vec![1, 3, 3, 3, 3]);
            let decoders = fit_ulo(&per_level, &cfg, &mut rng).unwrap();
            for h in 1..5 {
                let pred: Vec<usize> = per_level[h].iter().map(|x| decoders[h].predict(x)).collect();
                let (acc, _) = best_permutation_accuracy(&pred, &truth[h], 3);
                assert!(acc >= 0.99, "method {method:?} level {h} purity {acc}");
            }
        }
    }

    #[test]
    fn insufficient_level_data_propagates() {
        let per_level = vec![vec![vec![0.0; 4]; 5], vec![vec![0.0; 4]; 2]];
        let cfg = UloConfig::new(UloMethod::KMeans, vec![1, 3]);
        assert!(matches!(
            fit_ulo(&per_level, &cfg, &mut seed_rng(0)),
            Err(Error::InsufficientData { need: 3, got: 2 })
        ));
    }

    #[test]
    fn pooled_mode_separates_levels_and_states() {
        let mut per_level: Vec<Vec<Vec<f64>>> = Vec::new();
        let mut truth: Vec<Vec<usize>> = Vec::new();
        for h in 0..3 {
            let states = if h == 0 { 1 } else { 3 };
            let mut data = Vec::new();
            let mut labels = Vec::new();
            for s in 0..states {
                for _ in 0..30 {
                    let mut x = vec![0.0; 5];
                    x[s] = 1.0;
                    data.push(x);
                    labels.push(s);
                }
            }
            per_level.push(data);
            truth.push(labels);
        }
        let mut cfg = UloConfig::new(UloMethod::KMeans, vec![1, 3, 3]);
        cfg.pooled = true;
        cfg.restarts = 10;
        let decoders = fit_ulo(&per_level, &cfg, &mut seed_rng(21)).unwrap();
        for (h, dec) in decoders.iter().enumerate() {
            assert_eq!(dec.classes(), cfg.clusters_per_level[h]);
            let pred: Vec<usize> = per_level[h].iter().map(|x| dec.predict(x)).collect();
            let (acc, _) = best_permutation_accuracy(&pred, &truth[h], dec.classes());
            assert!(acc >= 0.99, "pooled level {h} purity {acc}");
        }
    }

    #[test]
    fn best_permutation_is_exact_on_known_relabeling() {
        let truth = vec![0, 0, 1, 1, 2, 2];
        let pred = vec![2, 2, 0, 0, 1, 1];
        let (acc, perm) = best_permutation_accuracy(&pred, &truth, 3);
        assert_eq!(acc, 1.0);
        assert_eq!(perm.apply(2), 0);
        assert_eq!(perm.apply(0), 1);
        assert_eq!(perm.apply(1), 2);
    }
}
