//! Diagonal-covariance Gaussian mixtures fit by expectation
//! maximization, k-means initialized.

use super::kmeans::kmeans_fit;
use super::linalg::squared_distance;
use super::UloConfig;
use crate::error::{Error, Result};
use crate::rng::Rng;

const LOG_2PI: f64 = 1.837_877_066_409_345_4;

#[derive(Debug, Clone)]
pub struct GmmFit {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// Per-component diagonal variances, clamped to the variance floor.
    pub variances: Vec<Vec<f64>>,
    /// Mean log-likelihood at the last E-step.
    pub loglik: f64,
    /// Mean log-likelihood after each E-step; non-decreasing.
    pub loglik_history: Vec<f64>,
    pub iterations: usize,
}

pub fn gmm_fit(
    data: &[Vec<f64>],
    components: usize,
    cfg: &UloConfig,
    rng: &mut Rng,
) -> Result<GmmFit> {
    if components == 0 {
        return Err(Error::contract("component count must be positive"));
    }
    let n = data.len();
    if n < components {
        return Err(Error::InsufficientData {
            need: components,
            got: n,
        });
    }
    let dim = data[0].len();
    let floor = cfg.variance_floor;

    // Moment-matched start from a k-means partition.
    let km = kmeans_fit(data, components, cfg, rng)?;
    let mut assign = vec![0usize; n];
    for (slot, x) in assign.iter_mut().zip(data.iter()) {
        *slot = km
            .centers
            .iter()
            .enumerate()
            .min_by(|a, b| squared_distance(x, a.1).total_cmp(&squared_distance(x, b.1)))
            .unwrap()
            .0;
    }
    let mut weights = vec![0.0; components];
    let means = km.centers;
    let mut variances = vec![vec![0.0; dim]; components];
    let mut counts = vec![0usize; components];
    for (&c, x) in assign.iter().zip(data.iter()) {
        counts[c] += 1;
        for (v, (xi, mi)) in variances[c].iter_mut().zip(x.iter().zip(means[c].iter())) {
            *v += (xi - mi) * (xi - mi);
        }
    }
    for c in 0..components {
        weights[c] = (counts[c].max(1) as f64) / n as f64;
        for v in variances[c].iter_mut() {
            *v = (*v / counts[c].max(1) as f64).max(floor);
        }
    }
    let wsum: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= wsum;
    }
    gmm_fit_from(data, weights, means, variances, cfg)
}

/// EM from explicit starting parameters; used for warm-started refits.
pub fn gmm_fit_from(
    data: &[Vec<f64>],
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    variances: Vec<Vec<f64>>,
    cfg: &UloConfig,
) -> Result<GmmFit> {
    let n = data.len();
    let components = weights.len();
    if components == 0 || means.len() != components || variances.len() != components {
        return Err(Error::contract("inconsistent mixture parameters"));
    }
    if n < components {
        return Err(Error::InsufficientData {
            need: components,
            got: n,
        });
    }
    let dim = data[0].len();
    let floor = cfg.variance_floor;
    let mut weights = weights;
    let mut means = means;
    let mut variances = variances;
    for c in 0..components {
        for v in variances[c].iter_mut() {
            *v = v.max(floor);
        }
    }

    let mut resp = vec![vec![0.0; components]; n];
    let mut history = Vec::new();
    let mut prev_ll = f64::NEG_INFINITY;
    let mut iterations = 0;

    for _ in 0..cfg.max_iters {
        iterations += 1;

        // E-step in log space.
        let mut ll_sum = 0.0;
        for (x, r) in data.iter().zip(resp.iter_mut()) {
            let mut max_lp = f64::NEG_INFINITY;
            for c in 0..components {
                let lp = weights[c].ln() + log_density_diag(x, &means[c], &variances[c]);
                r[c] = lp;
                if lp > max_lp {
                    max_lp = lp;
                }
            }
            let mut z = 0.0;
            for rc in r.iter_mut() {
                *rc = (*rc - max_lp).exp();
                z += *rc;
            }
            ll_sum += z.ln() + max_lp;
            for rc in r.iter_mut() {
                *rc /= z;
            }
        }
        let ll = ll_sum / n as f64;
        history.push(ll);
        if ll - prev_ll < cfg.tol && iterations > 1 {
            break;
        }
        prev_ll = ll;

        // M-step with floored variances; a vanished component keeps its
        // previous parameters.
        for c in 0..components {
            let nk: f64 = resp.iter().map(|r| r[c]).sum();
            if nk < 1e-10 {
                weights[c] = 1e-10;
                continue;
            }
            weights[c] = nk / n as f64;
            let mut mean = vec![0.0; dim];
            for (x, r) in data.iter().zip(resp.iter()) {
                for (mi, xi) in mean.iter_mut().zip(x.iter()) {
                    *mi += r[c] * xi;
                }
            }
            for mi in mean.iter_mut() {
                *mi /= nk;
            }
            let mut var = vec![0.0; dim];
            for (x, r) in data.iter().zip(resp.iter()) {
                for (vi, (xi, mi)) in var.iter_mut().zip(x.iter().zip(mean.iter())) {
                    *vi += r[c] * (xi - mi) * (xi - mi);
                }
            }
            for vi in var.iter_mut() {
                *vi = (*vi / nk).max(floor);
            }
            means[c] = mean;
            variances[c] = var;
        }
        let wsum: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= wsum;
        }
    }

    Ok(GmmFit {
        weights,
        means,
        variances,
        loglik: *history.last().unwrap(),
        loglik_history: history,
        iterations,
    })
}

/// Log density of a diagonal Gaussian.
pub fn log_density_diag(x: &[f64], mean: &[f64], variance: &[f64]) -> f64 {
    let mut acc = 0.0;
    for ((xi, mi), vi) in x.iter().zip(mean.iter()).zip(variance.iter()) {
        let d = xi - mi;
        acc += -0.5 * (LOG_2PI + vi.ln() + d * d / vi);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seed_rng;
    use crate::ulo::{UloConfig, UloMethod};
    use rand::Rng as _;
    use rand_distr::{Distribution, StandardNormal};

    fn cfg() -> UloConfig {
        UloConfig::new(UloMethod::Gmm, vec![])
    }

    #[test]
    fn single_component_matches_sample_moments() {
        let mut rng = seed_rng(1);
        let data: Vec<Vec<f64>> = (0..200)
            .map(|_| {
                (0..2)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        3.0 + 2.0 * z
                    })
                    .collect()
            })
            .collect();
        let fit = gmm_fit(&data, 1, &cfg(), &mut rng).unwrap();
        let n = data.len() as f64;
        for j in 0..2 {
            let mean: f64 = data.iter().map(|x| x[j]).sum::<f64>() / n;
            let var: f64 = data.iter().map(|x| (x[j] - mean) * (x[j] - mean)).sum::<f64>() / n;
            assert!((fit.means[0][j] - mean).abs() < 1e-9);
            assert!((fit.variances[0][j] - var.max(cfg().variance_floor)).abs() < 1e-6);
        }
        assert!((fit.weights[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn well_separated_pair_has_crisp_responsibilities() {
        let mut rng = seed_rng(2);
        let mut data = Vec::new();
        for _ in 0..150 {
            for &center in &[-5.0, 5.0] {
                let z: f64 = StandardNormal.sample(&mut rng);
                data.push(vec![center + 0.1 * z]);
            }
        }
        let fit = gmm_fit(&data, 2, &cfg(), &mut rng).unwrap();
        // Brute-force responsibility from the fitted parameters.
        for x in &data {
            let lp: Vec<f64> = (0..2)
                .map(|c| fit.weights[c].ln() + log_density_diag(x, &fit.means[c], &fit.variances[c]))
                .collect();
            let max = lp[0].max(lp[1]);
            let z = (lp[0] - max).exp() + (lp[1] - max).exp();
            let top = (lp.iter().cloned().fold(f64::MIN, f64::max) - max).exp() / z;
            assert!(top > 0.999, "responsibility {top}");
        }
    }

    #[test]
    fn loglik_never_decreases() {
        let mut rng = seed_rng(3);
        for _ in 0..15 {
            let n = rng.random_range(20..100);
            let d = rng.random_range(1..4);
            let data: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    (0..d)
                        .map(|_| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            z + if rng.random::<bool>() { 2.0 } else { -2.0 }
                        })
                        .collect()
                })
                .collect();
            let m = rng.random_range(1..4);
            let fit = gmm_fit(&data, m, &cfg(), &mut rng).unwrap();
            for w in fit.loglik_history.windows(2) {
                assert!(w[1] >= w[0] - 1e-8, "history {:?}", fit.loglik_history);
            }
        }
    }

    #[test]
    fn variance_floor_is_enforced() {
        let data = vec![vec![1.0], vec![1.0], vec![1.0], vec![2.0]];
        let fit = gmm_fit(&data, 2, &cfg(), &mut seed_rng(4)).unwrap();
        for vs in &fit.variances {
            for &v in vs {
                assert!(v >= cfg().variance_floor);
            }
        }
    }

    #[test]
    fn too_few_points_is_an_error() {
        let data = vec![vec![0.0]];
        assert!(matches!(
            gmm_fit(&data, 2, &cfg(), &mut seed_rng(5)),
            Err(Error::InsufficientData { need: 2, got: 1 })
        ));
    }
}
