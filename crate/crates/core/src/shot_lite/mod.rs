//! SHOT-lite: pseudo-labeling plus an affine feature adapter trained with the
//! information-maximization loss while the source classifier stays frozen.
//!
//! Full SHOT fine-tunes the backbone; here the backbone is replaced by an
//! affine map `z -> Mz + b` on precomputed features, trained with the same
//! loss family and the same pseudo-label / adapter alternation.
//!
//! The module also holds the feature-statistics re-estimation used as the
//! feature-level stand-in for adapting batch-norm statistics.

mod feature_stats;
mod im_loss;

pub use feature_stats::{estimate_stats, standardize, FeatureStats, STD_FLOOR};
pub use im_loss::{im_loss, ImLoss};

use crate::align::{init_from_soft_preds, spherical_kmeans, KMeansConfig};
use crate::error::{Error, Result};
use crate::linalg;
use crate::probing::{accuracy, cp_classify, predict, predict_proba};
use crate::types::{FeatureMatrix, LabeledDomain, LinearClassifier, Prototypes, SoftPredictions};

/// Affine map `z -> Mz + b` applied to features before the frozen classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureAdapter {
    /// `D x D`, row-major.
    pub matrix: Vec<f64>,
    pub offset: Vec<f64>,
}

impl FeatureAdapter {
    pub fn identity(dim: usize) -> Self {
        let mut matrix = vec![0.0; dim * dim];
        for i in 0..dim {
            matrix[i * dim + i] = 1.0;
        }
        Self {
            matrix,
            offset: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.dim())
    }

    pub fn apply(&self, feats: &FeatureMatrix) -> Result<FeatureMatrix> {
        let d = self.dim();
        feats.check_cols(d)?;
        let mut out = Vec::with_capacity(feats.rows() * d);
        for z in feats.iter_rows() {
            for j in 0..d {
                out.push(linalg::dot(&self.matrix[j * d..(j + 1) * d], z) + self.offset[j]);
            }
        }
        FeatureMatrix::new(feats.rows(), d, out)
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.matrix.iter().chain(&self.offset)
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.matrix.iter_mut().chain(self.offset.iter_mut())
    }
}

/// Gradient of the adapter objective, shaped like [`FeatureAdapter`].
pub type AdapterGradient = FeatureAdapter;

#[derive(Debug, Clone, PartialEq)]
pub struct ShotConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Weight of the pseudo-label cross-entropy.
    pub beta: f64,
    /// Gradient-descent steps on the adapter per epoch.
    pub steps_per_epoch: usize,
    /// An epoch's descent stops early below this gradient infinity norm.
    pub grad_tol: f64,
    /// Clustering rounds per pseudo-labeling; later rounds re-seed from the
    /// previous round's hard labels.
    pub cluster_rounds: usize,
    pub kmeans: KMeansConfig,
    /// Recorded with results. The procedure itself draws no random numbers.
    pub seed: u64,
}

impl Default for ShotConfig {
    fn default() -> Self {
        Self {
            epochs: 15,
            learning_rate: 1e-2,
            beta: 0.3,
            steps_per_epoch: 50,
            grad_tol: 1e-8,
            cluster_rounds: 1,
            kmeans: KMeansConfig::default(),
            seed: 0,
        }
    }
}

impl ShotConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be >= 0".into()));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidConfig("beta must be >= 0".into()));
        }
        if self.cluster_rounds == 0 {
            return Err(Error::InvalidConfig("cluster_rounds must be >= 1".into()));
        }
        self.kmeans.validate()
    }
}

/// Soft-prediction prototypes refined by spherical k-means, then nearest
/// prototype labels.
pub fn shot_pseudo_labels(
    clf: &LinearClassifier,
    target: &FeatureMatrix,
    cfg: &KMeansConfig,
) -> Result<(Vec<usize>, Prototypes)> {
    shot_pseudo_labels_rounds(clf, target, cfg, 1)
}

/// [`shot_pseudo_labels`] with `rounds - 1` extra re-seeded clustering rounds.
pub fn shot_pseudo_labels_rounds(
    clf: &LinearClassifier,
    target: &FeatureMatrix,
    cfg: &KMeansConfig,
    rounds: usize,
) -> Result<(Vec<usize>, Prototypes)> {
    let probs = predict_proba(clf, target)?;
    let mut init = init_from_soft_preds(&probs, target)?;
    let mut labels = Vec::new();
    for round in 0..rounds.max(1) {
        if round > 0 {
            let hard = SoftPredictions::one_hot(&labels, clf.num_classes())?;
            init = init_from_soft_preds(&hard, target)?;
        }
        let result = spherical_kmeans(&init, target, cfg)?;
        labels = cp_classify(&result.prototypes, target)?;
        init = result.prototypes;
    }
    Ok((labels, init))
}

/// `L_IM + beta * CE(pseudo_labels)` for the classifier applied to adapted
/// features, with its gradient with respect to the adapter.
pub fn adapter_objective(
    clf: &LinearClassifier,
    feats: &FeatureMatrix,
    pseudo_labels: &[usize],
    beta: f64,
    adapter: &FeatureAdapter,
) -> Result<(f64, AdapterGradient)> {
    let (value, grad) = adapter_objective_impl(clf, feats, pseudo_labels, beta, adapter, true)?;
    Ok((value, grad.expect("gradient requested")))
}

fn adapter_objective_impl(
    clf: &LinearClassifier,
    feats: &FeatureMatrix,
    pseudo_labels: &[usize],
    beta: f64,
    adapter: &FeatureAdapter,
    with_grad: bool,
) -> Result<(f64, Option<AdapterGradient>)> {
    if pseudo_labels.len() != feats.rows() {
        return Err(Error::ShapeMismatch {
            what: "pseudo labels",
            expected: feats.rows(),
            actual: pseudo_labels.len(),
        });
    }
    let adapted = adapter.apply(feats)?;
    let probs = predict_proba(clf, &adapted)?;
    let n = feats.rows();
    let c = clf.num_classes();
    let d = adapter.dim();
    let inv_n = 1.0 / n as f64;

    let im = im_loss(&probs);
    let mut ce = 0.0;
    for (p, &y) in probs.probs().iter_rows().zip(pseudo_labels) {
        ce -= p[y].max(f64::MIN_POSITIVE).ln();
    }
    let value = im.value + beta * ce * inv_n;
    if !with_grad {
        return Ok((value, None));
    }

    let mut grad = FeatureAdapter {
        matrix: vec![0.0; d * d],
        offset: vec![0.0; d],
    };
    let mut ds = vec![0.0; c];
    let mut dz = vec![0.0; d];
    let w = clf.weights();
    for (i, z) in feats.iter_rows().enumerate() {
        let p = probs.probs().row(i);
        let g = im.grad_logits.row(i);
        for k in 0..c {
            let onehot = if k == pseudo_labels[i] { 1.0 } else { 0.0 };
            ds[k] = g[k] + beta * inv_n * (p[k] - onehot);
        }
        // dL/dz' = W^T ds
        dz.iter_mut().for_each(|v| *v = 0.0);
        for (k, &s) in ds.iter().enumerate() {
            for (v, wk) in dz.iter_mut().zip(w.row(k)) {
                *v += s * wk;
            }
        }
        for j in 0..d {
            grad.offset[j] += dz[j];
            for (m, zl) in grad.matrix[j * d..(j + 1) * d].iter_mut().zip(z) {
                *m += dz[j] * zl;
            }
        }
    }
    Ok((value, Some(grad)))
}

/// Adapter and pseudo-labels produced by [`shot_lite_fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct ShotLiteFit {
    pub adapter: FeatureAdapter,
    /// Classifier predictions on the adapted target after each epoch.
    pub epoch_predictions: Vec<Vec<usize>>,
    /// Accepted objective values within each epoch.
    pub epoch_losses: Vec<Vec<f64>>,
    pub pseudo_labels: Vec<usize>,
}

/// Label-free SHOT-lite training on target features.
///
/// Each epoch recomputes pseudo-labels on the currently adapted features and
/// then takes up to `steps_per_epoch` descent steps on the adapter, halving
/// the step whenever it would raise the objective.
pub fn shot_lite_fit(
    clf: &LinearClassifier,
    target: &FeatureMatrix,
    cfg: &ShotConfig,
) -> Result<ShotLiteFit> {
    cfg.validate()?;
    target.check_cols(clf.dim())?;
    let mut adapter = FeatureAdapter::identity(clf.dim());
    let mut epoch_predictions = Vec::with_capacity(cfg.epochs);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut pseudo_labels = Vec::new();

    for _ in 0..cfg.epochs {
        let adapted = adapter.apply(target)?;
        pseudo_labels =
            shot_pseudo_labels_rounds(clf, &adapted, &cfg.kmeans, cfg.cluster_rounds)?.0;

        let (mut f, mut grad) = adapter_objective(clf, target, &pseudo_labels, cfg.beta, &adapter)?;
        let mut losses = vec![f];
        let mut step = cfg.learning_rate;
        'steps: for _ in 0..cfg.steps_per_epoch {
            if linalg::inf_norm(&grad.matrix).max(linalg::inf_norm(&grad.offset)) < cfg.grad_tol {
                break;
            }
            loop {
                let mut candidate = adapter.clone();
                for (p, g) in candidate.params_mut().zip(grad.params()) {
                    *p -= step * g;
                }
                let accepted = match adapter_objective_impl(
                    clf,
                    target,
                    &pseudo_labels,
                    cfg.beta,
                    &candidate,
                    false,
                ) {
                    Ok((fc, _)) if fc.is_finite() && fc <= f => Some(candidate),
                    Ok(_) | Err(Error::NonFiniteValue { .. }) => None,
                    Err(e) => return Err(e),
                };
                if let Some(next) = accepted {
                    adapter = next;
                    (f, grad) = adapter_objective(clf, target, &pseudo_labels, cfg.beta, &adapter)?;
                    losses.push(f);
                    break;
                }
                step *= 0.5;
                if step < 1e-12 * cfg.learning_rate.max(f64::MIN_POSITIVE) {
                    break 'steps;
                }
            }
        }
        epoch_losses.push(losses);
        epoch_predictions.push(predict(clf, &adapter.apply(target)?)?);
    }
    Ok(ShotLiteFit {
        adapter,
        epoch_predictions,
        epoch_losses,
        pseudo_labels,
    })
}

/// SHOT-lite run with transductive accuracies.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotLiteOutcome {
    pub fit: ShotLiteFit,
    /// Accuracy of the frozen classifier before adaptation.
    pub initial_accuracy: f64,
    /// Accuracy after each epoch.
    pub accuracy_trace: Vec<f64>,
}

impl ShotLiteOutcome {
    pub fn final_accuracy(&self) -> f64 {
        *self.accuracy_trace.last().expect("at least one epoch")
    }
}

/// Trains on the label-stripped target, then scores every epoch against the
/// held evaluation labels.
pub fn shot_lite_adapt(
    clf: &LinearClassifier,
    target: &LabeledDomain,
    cfg: &ShotConfig,
) -> Result<ShotLiteOutcome> {
    target.features().check_cols(clf.dim())?;
    let fit = shot_lite_fit(clf, target.features(), cfg)?;
    let initial_accuracy = accuracy(&predict(clf, target.features())?, target.labels())?;
    let accuracy_trace = fit
        .epoch_predictions
        .iter()
        .map(|p| accuracy(p, target.labels()))
        .collect::<Result<Vec<_>>>()?;
    Ok(ShotLiteOutcome {
        fit,
        initial_accuracy,
        accuracy_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::init_from_soft_preds;
    use crate::harness::{gen_domain_pair, ShiftSpec};
    use crate::probing::{fit_multinomial, FitConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mat<R: AsRef<[f64]>>(rows: &[R]) -> FeatureMatrix {
        FeatureMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn confident_classifier_pseudo_labels_match_clusters() {
        let clf = LinearClassifier::new(mat(&[[5.0, 0.0], [0.0, 5.0]]), None, 0.0).unwrap();
        let target = mat(&[[3.0, 0.2], [2.5, -0.1], [0.1, 3.0], [-0.2, 2.0]]);
        let (labels, protos) = shot_pseudo_labels(&clf, &target, &KMeansConfig::default()).unwrap();
        // oracle: compose the already-tested steps by hand
        let init = init_from_soft_preds(&predict_proba(&clf, &target).unwrap(), &target).unwrap();
        let km = spherical_kmeans(&init, &target, &KMeansConfig::default()).unwrap();
        assert_eq!(labels, cp_classify(&km.prototypes, &target).unwrap());
        assert_eq!(labels, vec![0, 0, 1, 1]);
        assert_eq!(protos, km.prototypes);
    }

    #[test]
    fn uniform_classifier_is_deterministic() {
        let clf = LinearClassifier::new(FeatureMatrix::zeros(2, 2).unwrap(), None, 0.0).unwrap();
        let target = mat(&[[2.0, 0.1], [1.0, -0.1], [-1.0, 0.1], [-0.5, -0.1]]);
        let a = shot_pseudo_labels(&clf, &target, &KMeansConfig::default()).unwrap();
        let b = shot_pseudo_labels(&clf, &target, &KMeansConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_sample_pseudo_label() {
        let clf = LinearClassifier::new(mat(&[[1.0, 0.0], [0.0, 1.0]]), None, 0.0).unwrap();
        let target = mat(&[[0.2, 0.9]]);
        let (labels, _) = shot_pseudo_labels(&clf, &target, &KMeansConfig::default()).unwrap();
        let init = init_from_soft_preds(&predict_proba(&clf, &target).unwrap(), &target).unwrap();
        assert_eq!(labels, cp_classify(&init, &target).unwrap());
    }

    #[test]
    fn adapter_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (n, d, c) = (6, 3, 2);
        let w: Vec<f64> = (0..c * d).map(|_| rng.random_range(-1.5..1.5)).collect();
        let clf = LinearClassifier::new(FeatureMatrix::new(c, d, w).unwrap(), None, 0.0).unwrap();
        let feats = FeatureMatrix::new(n, d, (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let labels: Vec<usize> = (0..n).map(|i| i % c).collect();
        let mut adapter = FeatureAdapter::identity(d);
        adapter.params_mut().for_each(|p| *p += rng.random_range(-0.3..0.3));
        let (_, grad) = adapter_objective(&clf, &feats, &labels, 0.3, &adapter).unwrap();
        let analytic: Vec<f64> = grad.params().copied().collect();
        let h = 1e-5;
        for (i, a) in analytic.iter().enumerate() {
            let mut up = adapter.clone();
            *up.params_mut().nth(i).unwrap() += h;
            let mut dn = adapter.clone();
            *dn.params_mut().nth(i).unwrap() -= h;
            let fu = adapter_objective(&clf, &feats, &labels, 0.3, &up).unwrap().0;
            let fd = adapter_objective(&clf, &feats, &labels, 0.3, &dn).unwrap().0;
            let num = (fu - fd) / (2.0 * h);
            let rel = (a - num).abs() / a.abs().max(num.abs()).max(1e-6);
            assert!(rel < 1e-4, "param {i}: {a} vs {num}");
        }
    }

    fn pair(seed: u64) -> (LabeledDomain, LabeledDomain) {
        gen_domain_pair(&ShiftSpec { seed, ..ShiftSpec::default() }).unwrap()
    }

    #[test]
    fn zero_learning_rate_keeps_identity() {
        let (source, target) = pair(4);
        let clf = fit_multinomial(&source, &FitConfig::default()).unwrap();
        let cfg = ShotConfig { beta: 0.0, epochs: 1, learning_rate: 0.0, ..ShotConfig::default() };
        let out = shot_lite_adapt(&clf, &target, &cfg).unwrap();
        assert!(out.fit.adapter.is_identity());
        assert_eq!(out.final_accuracy(), out.initial_accuracy);
    }

    #[test]
    fn null_shift_does_not_hurt() {
        let (source, target) = pair(9);
        let clf = fit_multinomial(&source, &FitConfig::default()).unwrap();
        let out = shot_lite_adapt(&clf, &target, &ShotConfig::default()).unwrap();
        assert!(out.final_accuracy() >= out.initial_accuracy - 0.02);
        assert_eq!(out.accuracy_trace.len(), 15);
    }

    #[test]
    fn losses_within_epoch_never_increase() {
        let spec = ShiftSpec { rotation_angle: 0.4, seed: 2, ..ShiftSpec::default() };
        let (source, target) = gen_domain_pair(&spec).unwrap();
        let clf = fit_multinomial(&source, &FitConfig::default()).unwrap();
        let fit = shot_lite_fit(&clf, target.features(), &ShotConfig { epochs: 3, ..ShotConfig::default() }).unwrap();
        for losses in &fit.epoch_losses {
            for w in losses.windows(2) {
                assert!(w[1] <= w[0] + 1e-10);
            }
        }
    }

    #[test]
    fn identity_pseudo_labels_are_reproducible() {
        let (source, target) = pair(5);
        let clf = fit_multinomial(&source, &FitConfig::default()).unwrap();
        let feats = FeatureAdapter::identity(clf.dim()).apply(target.features()).unwrap();
        let a = shot_pseudo_labels(&clf, &feats, &KMeansConfig::default()).unwrap();
        let b = shot_pseudo_labels(&clf, &feats, &KMeansConfig::default()).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1.centroids().as_slice(), b.1.centroids().as_slice());
    }

    #[test]
    fn config_validation() {
        assert!(ShotConfig { epochs: 0, ..ShotConfig::default() }.validate().is_err());
        assert!(ShotConfig { beta: -1.0, ..ShotConfig::default() }.validate().is_err());
        assert!(ShotConfig { learning_rate: f64::NAN, ..ShotConfig::default() }.validate().is_err());
    }

    #[test]
    fn dimension_mismatch() {
        let clf = LinearClassifier::new(mat(&[[1.0, 0.0], [0.0, 1.0]]), None, 0.0).unwrap();
        let target = LabeledDomain::new(mat(&[[1.0, 2.0, 3.0]]), vec![0], 2).unwrap();
        assert!(matches!(
            shot_lite_adapt(&clf, &target, &ShotConfig::default()),
            Err(Error::DimMismatch { .. })
        ));
    }
}
