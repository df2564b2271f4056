use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{FeatureMatrix, LabeledDomain};

/// Parameters of a synthetic source/target pair.
///
/// Class anchors sit on the scaled standard simplex `s/sqrt(2) * e_c`, so every
/// pair of anchors is exactly `class_separation` apart. The target draws fresh
/// blobs from the same anchors and then applies translation, per-dimension
/// scaling and a rotation in the plane of the first two dimensions, in that
/// order. Empty `translation` / `per_dim_scale` mean zero and one. Omitted
/// fields take their default values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftSpec {
    pub num_classes: usize,
    pub dim: usize,
    pub samples_per_class: usize,
    pub class_separation: f64,
    pub noise_sigma: f64,
    /// Radians.
    #[serde(default)]
    pub rotation_angle: f64,
    #[serde(default)]
    pub translation: Vec<f64>,
    #[serde(default)]
    pub per_dim_scale: Vec<f64>,
    pub seed: u64,
}

impl Default for ShiftSpec {
    fn default() -> Self {
        Self {
            num_classes: 5,
            dim: 16,
            samples_per_class: 40,
            class_separation: 4.0,
            noise_sigma: 1.0,
            rotation_angle: 0.0,
            translation: Vec::new(),
            per_dim_scale: Vec::new(),
            seed: 0,
        }
    }
}

impl ShiftSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.num_classes == 0 || self.samples_per_class == 0 {
            return bad("num_classes and samples_per_class must be >= 1".into());
        }
        if self.dim < self.num_classes {
            return bad(format!(
                "dim ({}) must be at least num_classes ({})",
                self.dim, self.num_classes
            ));
        }
        if !(self.class_separation > 0.0 && self.class_separation.is_finite()) {
            return bad("class_separation must be > 0".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be >= 0".into());
        }
        if !self.rotation_angle.is_finite() || (self.rotation_angle != 0.0 && self.dim < 2) {
            return bad("rotation needs a finite angle and dim >= 2".into());
        }
        if !self.translation.is_empty() && self.translation.len() != self.dim {
            return bad(format!("translation must have length {}", self.dim));
        }
        if self.translation.iter().any(|v| !v.is_finite()) {
            return bad("translation must be finite".into());
        }
        if !self.per_dim_scale.is_empty() && self.per_dim_scale.len() != self.dim {
            return bad(format!("per_dim_scale must have length {}", self.dim));
        }
        if self.per_dim_scale.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return bad("per_dim_scale entries must be > 0".into());
        }
        Ok(())
    }

    pub fn anchor(&self, class: usize) -> Vec<f64> {
        let mut a = vec![0.0; self.dim];
        a[class] = self.class_separation / std::f64::consts::SQRT_2;
        a
    }

    /// Applies the target distortion to one point in place.
    pub fn distort(&self, x: &mut [f64]) {
        for (v, t) in x.iter_mut().zip(&self.translation) {
            *v += t;
        }
        for (v, s) in x.iter_mut().zip(&self.per_dim_scale) {
            *v *= s;
        }
        if self.rotation_angle != 0.0 {
            let (sin, cos) = self.rotation_angle.sin_cos();
            let (a, b) = (x[0], x[1]);
            x[0] = cos * a - sin * b;
            x[1] = sin * a + cos * b;
        }
    }
}

fn sample_blobs(spec: &ShiftSpec, rng: &mut ChaCha8Rng, distort: bool) -> Result<LabeledDomain> {
    let n = spec.num_classes * spec.samples_per_class;
    let mut data = Vec::with_capacity(n * spec.dim);
    let mut labels = Vec::with_capacity(n);
    for class in 0..spec.num_classes {
        let anchor = spec.anchor(class);
        for _ in 0..spec.samples_per_class {
            let mut x: Vec<f64> = anchor
                .iter()
                .map(|a| {
                    let z: f64 = StandardNormal.sample(rng);
                    a + spec.noise_sigma * z
                })
                .collect();
            if distort {
                spec.distort(&mut x);
            }
            data.extend(x);
            labels.push(class as i32);
        }
    }
    LabeledDomain::new(FeatureMatrix::new(n, spec.dim, data)?, labels, spec.num_classes)
}

/// Seeded source and target domains; rows are grouped by class.
pub fn gen_domain_pair(spec: &ShiftSpec) -> Result<(LabeledDomain, LabeledDomain)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let source = sample_blobs(spec, &mut rng, false)?;
    let target = sample_blobs(spec, &mut rng, true)?;
    Ok((source, target))
}
