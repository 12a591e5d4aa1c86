//! k-means with k-means++ seeding and Lloyd iterations.

use super::linalg::squared_distance;
use super::UloConfig;
use crate::error::{Error, Result};
use crate::rng::Rng;
use rand::Rng as _;

#[derive(Debug, Clone)]
pub struct KmeansFit {
    pub centers: Vec<Vec<f64>>,
    /// Within-cluster sum of squares of the returned centers.
    pub wcss: f64,
    pub iterations: usize,
    /// Objective after each assignment pass; non-increasing.
    pub wcss_history: Vec<f64>,
}

/// Best of `cfg.restarts` runs by within-cluster sum of squares.
pub fn kmeans_fit(
    data: &[Vec<f64>],
    clusters: usize,
    cfg: &UloConfig,
    rng: &mut Rng,
) -> Result<KmeansFit> {
    if clusters == 0 {
        return Err(Error::contract("cluster count must be positive"));
    }
    if data.len() < clusters {
        return Err(Error::InsufficientData {
            need: clusters,
            got: data.len(),
        });
    }
    let mut best: Option<KmeansFit> = None;
    for _ in 0..cfg.restarts.max(1) {
        let fit = kmeans_single(data, clusters, cfg, rng);
        if best.as_ref().is_none_or(|b| fit.wcss < b.wcss) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn kmeans_single(data: &[Vec<f64>], clusters: usize, cfg: &UloConfig, rng: &mut Rng) -> KmeansFit {
    lloyd_from(data, plus_plus_init(data, clusters, rng), cfg)
}

/// Lloyd iterations from given starting centers; deterministic.
pub fn lloyd_from(data: &[Vec<f64>], centers: Vec<Vec<f64>>, cfg: &UloConfig) -> KmeansFit {
    assert!(!data.is_empty() && !centers.is_empty());
    let dim = data[0].len();
    let clusters = centers.len();
    let mut centers = centers;
    let mut assign = vec![0usize; data.len()];
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let wcss = assign_points(data, &centers, &mut assign);
        let wcss = fix_empty_clusters(data, &mut centers, &mut assign, wcss);
        history.push(wcss);
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; clusters];
        let mut counts = vec![0usize; clusters];
        for (x, &c) in data.iter().zip(assign.iter()) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(x.iter()) {
                *s += v;
            }
        }
        let mut movement = 0.0f64;
        for c in 0..clusters {
            if counts[c] == 0 {
                continue;
            }
            for s in sums[c].iter_mut() {
                *s /= counts[c] as f64;
            }
            movement = movement.max(squared_distance(&sums[c], &centers[c]).sqrt());
            centers[c] = std::mem::take(&mut sums[c]);
        }
        if movement < cfg.tol || iterations >= cfg.max_iters {
            break;
        }
    }
    let wcss = assign_points(data, &centers, &mut assign);
    history.push(wcss);
    KmeansFit {
        centers,
        wcss,
        iterations,
        wcss_history: history,
    }
}

/// k-means++: first center uniform, later centers drawn with probability
/// proportional to squared distance from the chosen set.
fn plus_plus_init(data: &[Vec<f64>], clusters: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let mut centers = Vec::with_capacity(clusters);
    centers.push(data[rng.random_range(0..data.len())].clone());
    let mut d2: Vec<f64> = data
        .iter()
        .map(|x| squared_distance(x, &centers[0]))
        .collect();
    while centers.len() < clusters {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = data.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                u -= w;
                if u <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..data.len())
        };
        centers.push(data[idx].clone());
        for (w, x) in d2.iter_mut().zip(data.iter()) {
            let nd = squared_distance(x, centers.last().unwrap());
            if nd < *w {
                *w = nd;
            }
        }
    }
    centers
}

fn assign_points(data: &[Vec<f64>], centers: &[Vec<f64>], assign: &mut [usize]) -> f64 {
    let mut wcss = 0.0;
    for (slot, x) in assign.iter_mut().zip(data.iter()) {
        let mut best = f64::INFINITY;
        let mut best_c = 0;
        for (c, center) in centers.iter().enumerate() {
            let d = squared_distance(x, center);
            if d < best {
                best = d;
                best_c = c;
            }
        }
        *slot = best_c;
        wcss += best;
    }
    wcss
}

/// Reseeds each empty cluster to the farthest point whose own cluster
/// has at least two members, so a donor cluster never empties and the
/// loop clears one empty cluster per pass. Never increases the
/// objective.
fn fix_empty_clusters(
    data: &[Vec<f64>],
    centers: &mut [Vec<f64>],
    assign: &mut [usize],
    mut wcss: f64,
) -> f64 {
    let mut counts = vec![0usize; centers.len()];
    for &c in assign.iter() {
        counts[c] += 1;
    }
    loop {
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return wcss;
        };
        let Some((far_idx, far_d)) = data
            .iter()
            .enumerate()
            .filter(|(i, _)| counts[assign[*i]] >= 2)
            .map(|(i, x)| (i, squared_distance(x, &centers[assign[i]])))
            .max_by(|a, b| a.1.total_cmp(&b.1))
        else {
            // every nonempty cluster is a singleton; impossible with
            // n >= clusters, but bail rather than spin
            return wcss;
        };
        counts[assign[far_idx]] -= 1;
        counts[empty] += 1;
        centers[empty] = data[far_idx].clone();
        assign[far_idx] = empty;
        wcss -= far_d;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seed_rng;
    use crate::ulo::{best_permutation_accuracy, UloConfig, UloMethod};

    use rand_distr::{Distribution, StandardNormal};

    fn cfg() -> UloConfig {
        UloConfig::new(UloMethod::KMeans, vec![])
    }

    #[test]
    fn separable_pair_recovers_points() {
        let data = vec![vec![0.0], vec![10.0]];
        let fit = kmeans_fit(&data, 2, &cfg(), &mut seed_rng(1)).unwrap();
        let mut centers: Vec<f64> = fit.centers.iter().map(|c| c[0]).collect();
        centers.sort_by(f64::total_cmp);
        assert_eq!(centers, vec![0.0, 10.0]);
        assert_eq!(fit.wcss, 0.0);
    }

    #[test]
    fn one_cluster_is_sample_mean() {
        let mut rng = seed_rng(2);
        let data: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..3).map(|_| rng.random_range(-4.0..4.0)).collect())
            .collect();
        let fit = kmeans_fit(&data, 1, &cfg(), &mut rng).unwrap();
        for j in 0..3 {
            let mean: f64 = data.iter().map(|x| x[j]).sum::<f64>() / data.len() as f64;
            assert!((fit.centers[0][j] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn three_blobs_at_onehot_corners() {
        let mut rng = seed_rng(3);
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..100 {
            for s in 0..3usize {
                let mut x = vec![0.0; 3];
                x[s] = 1.0;
                for v in x.iter_mut() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *v += 0.1 * z;
                }
                data.push(x);
                labels.push(s);
            }
        }
        let fit = kmeans_fit(&data, 3, &cfg(), &mut rng).unwrap();
        let pred: Vec<usize> = data
            .iter()
            .map(|x| {
                fit.centers
                    .iter()
                    .enumerate()
                    .min_by(|a, b| {
                        squared_distance(x, a.1).total_cmp(&squared_distance(x, b.1))
                    })
                    .unwrap()
                    .0
            })
            .collect();
        let (acc, _) = best_permutation_accuracy(&pred, &labels, 3);
        assert!(acc >= 0.99, "purity {acc}");
    }

    #[test]
    fn objective_never_increases() {
        let mut rng = seed_rng(4);
        for _ in 0..20 {
            let n = rng.random_range(10..80);
            let d = rng.random_range(1..5);
            let data: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let m = rng.random_range(1..5.min(n));
            let fit = kmeans_fit(&data, m, &cfg(), &mut rng).unwrap();
            for w in fit.wcss_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "history {:?}", fit.wcss_history);
            }
        }
    }

    #[test]
    fn too_few_points_is_an_error() {
        let data = vec![vec![1.0], vec![2.0]];
        let err = kmeans_fit(&data, 3, &cfg(), &mut seed_rng(5)).unwrap_err();
        assert!(matches!(err, Error::InsufficientData { need: 3, got: 2 }));
    }

    #[test]
    fn duplicate_points_fill_clusters() {
        let data = vec![vec![1.0, 1.0]; 6];
        let fit = kmeans_fit(&data, 3, &cfg(), &mut seed_rng(6)).unwrap();
        assert_eq!(fit.centers.len(), 3);
        assert_eq!(fit.wcss, 0.0);
    }
}
