//! Principal component analysis on the sample covariance.

use super::linalg::{dot, symmetric_eigen};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PcaProjection {
    pub mean: Vec<f64>,
    /// Top eigenvectors of the sample covariance, one per row, ordered
    /// by descending eigenvalue.
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
}

impl PcaProjection {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.components.len()
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.mean.len(), "pca input dimension mismatch");
        let centered: Vec<f64> = x.iter().zip(self.mean.iter()).map(|(a, b)| a - b).collect();
        self.components.iter().map(|c| dot(c, &centered)).collect()
    }

    /// Maps a projected point back into input space (transpose map plus
    /// mean); exact for data lying in the retained subspace.
    pub fn reconstruct(&self, y: &[f64]) -> Vec<f64> {
        let mut x = self.mean.clone();
        for (coef, comp) in y.iter().zip(self.components.iter()) {
            for (xi, ci) in x.iter_mut().zip(comp.iter()) {
                *xi += coef * ci;
            }
        }
        x
    }
}

/// Fits the top `dims` principal components of the sample covariance.
/// Requires at least two samples and `1 <= dims <= d`.
pub fn pca_fit(data: &[Vec<f64>], dims: usize) -> Result<PcaProjection> {
    pca_fit_scaled(data, dims, false)
}

/// As [`pca_fit`], optionally on standardized coordinates (correlation
/// matrix instead of covariance). The per-coordinate scaling is folded
/// into the component rows, so `project` works on raw inputs either
/// way; constant coordinates are dropped from the projection. With
/// standardization the rows are not orthonormal in the raw metric and
/// [`PcaProjection::reconstruct`] is only approximate.
pub fn pca_fit_scaled(data: &[Vec<f64>], dims: usize, standardize: bool) -> Result<PcaProjection> {
    let n = data.len();
    if n < 2 {
        return Err(Error::contract(format!("pca needs >= 2 samples, got {n}")));
    }
    let d = data[0].len();
    if dims == 0 || dims > d {
        return Err(Error::contract(format!(
            "pca target dims {dims} outside 1..={d}"
        )));
    }
    let nf = n as f64;
    let mut mean = vec![0.0; d];
    for x in data {
        assert_eq!(x.len(), d, "ragged data");
        for (m, v) in mean.iter_mut().zip(x.iter()) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= nf;
    }
    let mut cov = vec![vec![0.0; d]; d];
    for x in data {
        let c: Vec<f64> = x.iter().zip(mean.iter()).map(|(a, b)| a - b).collect();
        for i in 0..d {
            for j in 0..=i {
                cov[i][j] += c[i] * c[j];
            }
        }
    }
    let denom = nf - 1.0;
    for i in 0..d {
        for j in 0..=i {
            cov[i][j] /= denom;
            cov[j][i] = cov[i][j];
        }
    }
    let inv_scale: Option<Vec<f64>> = standardize.then(|| {
        (0..d)
            .map(|i| {
                let sd = cov[i][i].sqrt();
                if sd > 1e-12 {
                    1.0 / sd
                } else {
                    0.0
                }
            })
            .collect()
    });
    if let Some(s) = &inv_scale {
        for i in 0..d {
            for j in 0..d {
                cov[i][j] *= s[i] * s[j];
            }
        }
    }
    let (values, vectors) = symmetric_eigen(&cov);
    let mut components: Vec<Vec<f64>> = vectors.into_iter().take(dims).collect();
    if let Some(s) = &inv_scale {
        for row in components.iter_mut() {
            for (r, si) in row.iter_mut().zip(s.iter()) {
                *r *= si;
            }
        }
    }
    Ok(PcaProjection {
        mean,
        components,
        eigenvalues: values.into_iter().take(dims).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::BlockEnv;
    use crate::lock::{LockEnv, LockSpec};
    use crate::rng::seed_rng;
    use crate::ulo::linalg::squared_distance;
    use rand::Rng as _;

    #[test]
    fn line_in_r3_reconstructs_exactly() {
        let dir = [1.0, -2.0, 0.5];
        let data: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let t = i as f64 * 0.3 - 6.0;
                dir.iter().map(|d| 1.0 + t * d).collect()
            })
            .collect();
        let pca = pca_fit(&data, 1).unwrap();
        for x in &data {
            let back = pca.reconstruct(&pca.project(x));
            assert!(squared_distance(x, &back) < 1e-18);
        }
    }

    #[test]
    fn full_rank_projection_is_orthonormal() {
        let mut rng = seed_rng(17);
        let data: Vec<Vec<f64>> = (0..100)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let pca = pca_fit(&data, 4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let g = dot(&pca.components[i], &pca.components[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-9, "gram[{i}][{j}] = {g}");
            }
        }
    }

    #[test]
    fn top_subspace_beats_onehot_coordinate_variance() {
        // Oracle route: coordinate variances computed directly by a
        // two-pass sum, no eigensolver involved.
        let env = LockEnv::new(LockSpec::bernoulli(5, 0.0, 23)).unwrap();
        let mut rng = seed_rng(8);
        let mut data = Vec::new();
        for s in 0..3 {
            for _ in 0..200 {
                data.push(env.emit(2, s, &mut rng));
            }
        }
        let pca = pca_fit(&data, 3).unwrap();
        let captured: f64 = pca.eigenvalues.iter().sum();

        let n = data.len() as f64;
        let mut onehot_var = 0.0;
        for coord in 0..3 {
            let mean: f64 = data.iter().map(|x| x[coord]).sum::<f64>() / n;
            onehot_var += data
                .iter()
                .map(|x| (x[coord] - mean) * (x[coord] - mean))
                .sum::<f64>()
                / (n - 1.0);
        }
        assert!(
            captured >= onehot_var - 1e-12,
            "captured {captured} < one-hot {onehot_var}"
        );

        // And the eigenvalues must equal the variance of the projected
        // data, recomputed independently.
        let projected: Vec<Vec<f64>> = data.iter().map(|x| pca.project(x)).collect();
        for k in 0..3 {
            let mean: f64 = projected.iter().map(|y| y[k]).sum::<f64>() / n;
            let var: f64 = projected
                .iter()
                .map(|y| (y[k] - mean) * (y[k] - mean))
                .sum::<f64>()
                / (n - 1.0);
            assert!((var - pca.eigenvalues[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_dims_and_tiny_samples() {
        let data = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(pca_fit(&data, 3).is_err());
        assert!(pca_fit(&data, 0).is_err());
        assert!(pca_fit(&data[..1], 1).is_err());
    }
}
