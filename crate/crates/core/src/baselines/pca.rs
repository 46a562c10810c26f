use nalgebra::{DMatrix, DVector, SymmetricEigen};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PcaError {
    #[error("k = {k} exceeds input dimension {dim}")]
    TooManyComponents { k: usize, dim: usize },
    #[error("need more than k = {k} points, got {n}")]
    TooFewPoints { k: usize, n: usize },
    #[error("point has dimension {got}, model expects {expected}")]
    DimensionMismatch { got: usize, expected: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    pub mean: DVector<f64>,
    /// `dim x k`, columns orthonormal, ordered by decreasing variance.
    pub components: DMatrix<f64>,
    pub k: usize,
}

/// Top-`k` eigenvectors of the sample covariance.
pub fn pca_fit(data: &[Vec<f64>], k: usize) -> Result<PcaModel, PcaError> {
    let n = data.len();
    let dim = data.first().map_or(0, |p| p.len());
    if k > dim {
        return Err(PcaError::TooManyComponents { k, dim });
    }
    if n <= k {
        return Err(PcaError::TooFewPoints { k, n });
    }
    if let Some(p) = data.iter().find(|p| p.len() != dim) {
        return Err(PcaError::DimensionMismatch { got: p.len(), expected: dim });
    }
    let x = DMatrix::from_fn(n, dim, |i, j| data[i][j]);
    let mean = DVector::from_fn(dim, |j, _| x.column(j).mean());
    let mut xc = x;
    for mut row in xc.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = (xc.transpose() * &xc) / (n as f64 - 1.0).max(1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let components = DMatrix::from_fn(dim, k, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(PcaModel { mean, components, k })
}

/// Squared norm of the centred point minus its projection onto the
/// retained components.
pub fn pca_residual(model: &PcaModel, point: &[f64]) -> Result<f64, PcaError> {
    if point.len() != model.mean.len() {
        return Err(PcaError::DimensionMismatch { got: point.len(), expected: model.mean.len() });
    }
    let xc = DVector::from_column_slice(point) - &model.mean;
    let proj = &model.components * (model.components.transpose() * &xc);
    Ok((xc - proj).norm_squared())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(seed: u64, n: usize, d: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..d).map(|j| rng.gen_range(-1.0..1.0) * (j + 1) as f64).collect())
            .collect()
    }

    #[test]
    fn rank_one_line() {
        let data: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let m = pca_fit(&data, 1).unwrap();
        let c = m.components.column(0);
        let dot = (c[0] + 2.0 * c[1]) / 5f64.sqrt();
        assert!((dot.abs() - 1.0).abs() < 1e-10);
        for p in &data {
            assert!(pca_residual(&m, p).unwrap() < 1e-10);
        }
    }

    #[test]
    fn full_basis_reconstructs_everything() {
        let data = random(1, 40, 4);
        let m = pca_fit(&data, 4).unwrap();
        for p in &data {
            assert!(pca_residual(&m, p).unwrap() < 1e-10);
        }
    }

    #[test]
    fn mean_has_zero_residual() {
        let data = random(2, 30, 3);
        let m = pca_fit(&data, 1).unwrap();
        let mean: Vec<f64> = m.mean.iter().copied().collect();
        assert!(pca_residual(&m, &mean).unwrap() < 1e-20);
    }

    #[test]
    fn components_orthonormal() {
        for seed in 0..20 {
            let data = random(seed, 60, 5);
            let m = pca_fit(&data, 3).unwrap();
            let gram = m.components.transpose() * &m.components;
            let err = (gram - DMatrix::<f64>::identity(3, 3)).abs().max();
            assert!(err < 1e-8, "seed {seed}: {err}");
        }
    }

    /// Brute-force oracle: least-squares coefficients from the normal
    /// equations, solved with an explicit inverse of the Gram matrix.
    #[test]
    fn residual_matches_normal_equation_projection() {
        let data = random(7, 50, 4);
        let m = pca_fit(&data, 2).unwrap();
        let v = &m.components;
        let gram_inv = (v.transpose() * v).try_inverse().unwrap();
        for p in random(8, 10, 4) {
            let xc: Vec<f64> = p.iter().zip(m.mean.iter()).map(|(a, b)| a - b).collect();
            let xc = DVector::from_vec(xc);
            let coef = &gram_inv * (v.transpose() * &xc);
            let mut r = 0.0;
            for i in 0..4 {
                let mut proj = 0.0;
                for j in 0..2 {
                    proj += v[(i, j)] * coef[j];
                }
                r += (xc[i] - proj).powi(2);
            }
            assert!((pca_residual(&m, &p).unwrap() - r).abs() < 1e-10);
        }
    }

    #[test]
    fn errors() {
        let data = random(3, 10, 2);
        assert_eq!(pca_fit(&data, 3).unwrap_err(), PcaError::TooManyComponents { k: 3, dim: 2 });
        let m = pca_fit(&data, 1).unwrap();
        assert!(matches!(pca_residual(&m, &[1.0]), Err(PcaError::DimensionMismatch { .. })));
    }
}
