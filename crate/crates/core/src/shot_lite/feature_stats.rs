use crate::error::{Error, Result};
use crate::types::FeatureMatrix;

/// Smallest standard deviation [`estimate_stats`] will report.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-dimension feature moments, the feature-space counterpart of
/// normalization-layer running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    /// Mean zero, unit deviation: standardizing with this is the identity.
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Column means and population standard deviations (floored at [`STD_FLOOR`]).
pub fn estimate_stats(feats: &FeatureMatrix) -> Result<FeatureStats> {
    let n = feats.rows();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let d = feats.cols();
    let mut mean = vec![0.0; d];
    for row in feats.iter_rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; d];
    for row in feats.iter_rows() {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var
        .into_iter()
        .map(|s| (s / n as f64).sqrt().max(STD_FLOOR))
        .collect();
    Ok(FeatureStats { mean, std })
}

/// `(x_j - mean_j) / std_j` column by column.
pub fn standardize(feats: &FeatureMatrix, stats: &FeatureStats) -> Result<FeatureMatrix> {
    feats.check_cols(stats.dim())?;
    let data = feats
        .iter_rows()
        .flat_map(|row| {
            row.iter()
                .zip(&stats.mean)
                .zip(&stats.std)
                .map(|((v, m), s)| (v - m) / s)
        })
        .collect();
    FeatureMatrix::new(feats.rows(), feats.cols(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_rows() {
        let m = FeatureMatrix::from_rows(&[[0.0, 0.0], [2.0, 2.0]]).unwrap();
        let s = estimate_stats(&m).unwrap();
        assert_eq!(s.mean, vec![1.0, 1.0]);
        assert_eq!(s.std, vec![1.0, 1.0]);
    }

    #[test]
    fn constant_column_is_floored() {
        let m = FeatureMatrix::from_rows(&[[3.0, 1.0], [3.0, 2.0], [3.0, 0.0]]).unwrap();
        assert_eq!(estimate_stats(&m).unwrap().std[0], STD_FLOOR);
    }

    #[test]
    fn single_row_is_rejected() {
        let m = FeatureMatrix::from_rows(&[[3.0, 1.0]]).unwrap();
        assert!(matches!(estimate_stats(&m), Err(Error::TooFewSamples { needed: 2, got: 1 })));
    }

    fn random(seed: u64, n: usize, d: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..d).map(|j| rng.random_range(-1.0..1.0) * (j + 1) as f64 + j as f64).collect())
            .collect()
    }

    #[test]
    fn matches_naive_two_pass() {
        let rows = random(1, 100, 5);
        let s = estimate_stats(&FeatureMatrix::from_rows(&rows).unwrap()).unwrap();
        for j in 0..5 {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let mean = col.iter().sum::<f64>() / 100.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 100.0;
            assert!((s.mean[j] - mean).abs() < 1e-12);
            assert!((s.std[j] - var.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn standardize_properties() {
        let x = FeatureMatrix::from_rows(&random(2, 50, 4)).unwrap();
        let z = standardize(&x, &estimate_stats(&x).unwrap()).unwrap();
        let zs = estimate_stats(&z).unwrap();
        for j in 0..4 {
            assert!(zs.mean[j].abs() < 1e-10);
            assert!((zs.std[j] - 1.0).abs() < 1e-10);
        }
        assert_eq!(standardize(&x, &FeatureStats::identity(4)).unwrap(), x);

        let shifted = FeatureMatrix::new(
            50,
            4,
            x.as_slice().iter().enumerate().map(|(i, v)| v + [3.0, -7.0, 0.5, 100.0][i % 4]).collect(),
        )
        .unwrap();
        let zshift = standardize(&shifted, &estimate_stats(&shifted).unwrap()).unwrap();
        for (a, b) in z.as_slice().iter().zip(zshift.as_slice()) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(matches!(
            standardize(&x, &FeatureStats::identity(3)),
            Err(Error::DimMismatch { .. })
        ));
    }
}
