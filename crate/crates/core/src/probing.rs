//! Linear probing and cluster probing of frozen features.
//!
//! Linear probing fits an L2-regularized multinomial regression
//! `z -> softmax(Wz)` on source features and measures argmax accuracy.
//! Cluster probing averages the features of each class into a prototype and
//! classifies by the smallest cosine dissimilarity `1/2 - cos(k_c, z)/2`.

use crate::error::{Error, Result};
use crate::linalg;
use crate::types::{
    DomainRole, FeatureMatrix, FitDiagnostics, LabeledDomain, LinearClassifier, Prototypes,
    SoftPredictions,
};

/// Solver settings for [`fit_multinomial`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Coefficient of the squared Frobenius norm of `W`.
    pub lambda: f64,
    pub max_iters: usize,
    /// Stop once the gradient's infinity norm drops below this.
    pub grad_tol: f64,
    /// Initial gradient-descent step; halved whenever a step would raise the objective.
    pub step_size: f64,
    /// Fit an unregularized per-class bias.
    pub use_bias: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            lambda: 0.01,
            max_iters: 10_000,
            grad_tol: 1e-6,
            step_size: 1.0,
            use_bias: false,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be a finite value >= 0, got {}",
                self.lambda
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidConfig("grad_tol must be > 0".into()));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidConfig("step_size must be > 0".into()));
        }
        Ok(())
    }
}

/// Objective `lambda * ||W||_F^2 + mean_i -log softmax(W z_i + b)[y_i]`.
///
/// `params` holds `W` row-major followed by the bias when `use_bias`. When
/// `grad` is given it receives the gradient in the same layout.
pub(crate) fn multinomial_objective(
    feats: &FeatureMatrix,
    labels: &[usize],
    num_classes: usize,
    use_bias: bool,
    lambda: f64,
    params: &[f64],
    mut grad: Option<&mut [f64]>,
) -> f64 {
    let d = feats.cols();
    let n = feats.rows() as f64;
    let (w, b) = params.split_at(num_classes * d);
    let mut logits = vec![0.0; num_classes];
    if let Some(g) = grad.as_deref_mut() {
        g.iter_mut().for_each(|v| *v = 0.0);
    }
    let mut loss = 0.0;
    for (z, &y) in feats.iter_rows().zip(labels) {
        for (c, l) in logits.iter_mut().enumerate() {
            *l = linalg::dot(&w[c * d..(c + 1) * d], z) + if use_bias { b[c] } else { 0.0 };
        }
        let lse = linalg::log_sum_exp(&logits);
        loss += lse - logits[y];
        if let Some(g) = grad.as_deref_mut() {
            for c in 0..num_classes {
                let mut r = (logits[c] - lse).exp();
                if c == y {
                    r -= 1.0;
                }
                let r = r / n;
                for (gj, zj) in g[c * d..(c + 1) * d].iter_mut().zip(z) {
                    *gj += r * zj;
                }
                if use_bias {
                    g[num_classes * d + c] += r;
                }
            }
        }
    }
    let reg: f64 = w.iter().map(|v| v * v).sum();
    if let Some(g) = grad {
        for (gj, wj) in g[..num_classes * d].iter_mut().zip(w) {
            *gj += 2.0 * lambda * wj;
        }
    }
    loss / n + lambda * reg
}

/// Fits a multinomial regression by full-batch gradient descent from `W = 0`.
///
/// Running out of iterations is not an error: the best iterate is returned
/// and [`FitDiagnostics::converged`] is false.
pub fn fit_multinomial(train: &LabeledDomain, cfg: &FitConfig) -> Result<LinearClassifier> {
    cfg.validate()?;
    train.validate(DomainRole::Source)?;
    let labels = train.class_indices()?;
    let feats = train.features();
    let c = train.num_classes();
    let d = train.dim();
    let n_params = c * d + if cfg.use_bias { c } else { 0 };

    let objective = |p: &[f64], g: Option<&mut [f64]>| {
        multinomial_objective(feats, &labels, c, cfg.use_bias, cfg.lambda, p, g)
    };

    let mut params = vec![0.0; n_params];
    let mut grad = vec![0.0; n_params];
    let mut candidate = vec![0.0; n_params];
    let mut f = objective(&params, Some(&mut grad));
    let mut trace = vec![f];
    let mut step = cfg.step_size;
    let mut converged = false;
    let mut iterations = 0;

    'outer: while iterations < cfg.max_iters {
        if linalg::inf_norm(&grad) < cfg.grad_tol {
            converged = true;
            break;
        }
        loop {
            for ((cand, p), g) in candidate.iter_mut().zip(&params).zip(&grad) {
                *cand = p - step * g;
            }
            let fc = objective(&candidate, None);
            if fc.is_finite() && fc <= f {
                std::mem::swap(&mut params, &mut candidate);
                f = objective(&params, Some(&mut grad));
                trace.push(f);
                iterations += 1;
                break;
            }
            step *= 0.5;
            if step < f64::MIN_POSITIVE {
                break 'outer;
            }
        }
    }
    if !converged && linalg::inf_norm(&grad) < cfg.grad_tol {
        converged = true;
    }

    let bias = cfg.use_bias.then(|| params[c * d..].to_vec());
    params.truncate(c * d);
    let weights = FeatureMatrix::from_parts(c, d, params);
    let diagnostics = FitDiagnostics {
        iterations,
        converged,
        grad_norm: linalg::inf_norm(&grad),
        objective: f,
        objective_trace: trace,
    };
    Ok(LinearClassifier::new(weights, bias, cfg.lambda)?.with_diagnostics(diagnostics))
}

/// Class probabilities `softmax(Wz + b)` for every row.
pub fn predict_proba(clf: &LinearClassifier, feats: &FeatureMatrix) -> Result<SoftPredictions> {
    feats.check_cols(clf.dim())?;
    let c = clf.num_classes();
    let mut data = vec![0.0; feats.rows() * c];
    for (z, out) in feats.iter_rows().zip(data.chunks_exact_mut(c)) {
        clf.logits_into(z, out);
        linalg::softmax_in_place(out);
    }
    Ok(SoftPredictions::from_parts(FeatureMatrix::from_parts(
        feats.rows(),
        c,
        data,
    )))
}

/// Argmax class per row.
pub fn predict(clf: &LinearClassifier, feats: &FeatureMatrix) -> Result<Vec<usize>> {
    feats.check_cols(clf.dim())?;
    let mut logits = vec![0.0; clf.num_classes()];
    Ok(feats
        .iter_rows()
        .map(|z| {
            clf.logits_into(z, &mut logits);
            linalg::argmax(&logits)
        })
        .collect())
}

/// Fraction of predictions equal to the labels; every label must be present.
pub fn accuracy(predictions: &[usize], labels: &[i32]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            what: "predictions",
            expected: labels.len(),
            actual: predictions.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::Empty);
    }
    let mut hits = 0usize;
    for (row, (&p, &l)) in predictions.iter().zip(labels).enumerate() {
        if l < 0 {
            return Err(Error::UnlabeledSample { row });
        }
        if p == l as usize {
            hits += 1;
        }
    }
    Ok(hits as f64 / labels.len() as f64)
}

/// Linear-probing accuracy of `clf` on a fully labeled test domain.
pub fn lp_accuracy(clf: &LinearClassifier, test: &LabeledDomain) -> Result<f64> {
    let probs = predict_proba(clf, test.features())?;
    accuracy(&probs.argmax(), test.labels())
}

/// Per-class feature means (unlabeled rows ignored).
pub fn class_prototypes(train: &LabeledDomain) -> Result<Prototypes> {
    let c = train.num_classes();
    let d = train.dim();
    let mut sums = vec![0.0; c * d];
    let mut counts = vec![0usize; c];
    for (z, &l) in train.features().iter_rows().zip(train.labels()) {
        if l < 0 {
            continue;
        }
        let l = l as usize;
        counts[l] += 1;
        for (s, v) in sums[l * d..(l + 1) * d].iter_mut().zip(z) {
            *s += v;
        }
    }
    if let Some(class) = counts.iter().position(|&n| n == 0) {
        return Err(Error::EmptyClass { class });
    }
    for (row, &n) in sums.chunks_exact_mut(d).zip(&counts) {
        row.iter_mut().for_each(|v| *v /= n as f64);
    }
    Ok(Prototypes::new(FeatureMatrix::from_parts(c, d, sums)))
}

/// `1/2 - <a, b> / (2 ||a|| ||b||)`, in `[0, 1]`.
pub fn cosine_dissim(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let saa = linalg::dot(a, a);
    let sbb = linalg::dot(b, b);
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::ZeroVector);
    }
    // one square root keeps identical directions at exactly zero
    let denom = if (saa * sbb).is_finite() && saa * sbb > 0.0 {
        (saa * sbb).sqrt()
    } else {
        saa.sqrt() * sbb.sqrt()
    };
    Ok((0.5 - linalg::dot(a, b) / (2.0 * denom)).clamp(0.0, 1.0))
}

/// Nearest-prototype classification under cosine dissimilarity.
///
/// Stale prototypes never win; ties go to the lowest class index.
pub fn cp_classify(protos: &Prototypes, feats: &FeatureMatrix) -> Result<Vec<usize>> {
    feats.check_cols(protos.dim())?;
    let mut active = Vec::with_capacity(protos.num_classes());
    for c in 0..protos.num_classes() {
        if protos.is_stale(c) {
            continue;
        }
        let k = protos.centroid(c);
        let nk = linalg::norm(k);
        if nk == 0.0 {
            return Err(Error::ZeroVector);
        }
        active.push((c, k, nk));
    }
    if active.is_empty() {
        return Err(Error::AllCentroidsStale);
    }
    feats
        .iter_rows()
        .map(|z| {
            let nz = linalg::norm(z);
            if nz == 0.0 {
                return Err(Error::ZeroVector);
            }
            let mut best = (usize::MAX, f64::INFINITY);
            for &(c, k, nk) in &active {
                let dissim = 0.5 - linalg::dot(k, z) / (2.0 * nk * nz);
                if dissim < best.1 {
                    best = (c, dissim);
                }
            }
            Ok(best.0)
        })
        .collect()
}

/// Cluster-probing accuracy: prototypes from `train`, evaluated on `test`.
pub fn cp_accuracy(train: &LabeledDomain, test: &LabeledDomain) -> Result<f64> {
    train.validate(DomainRole::Source)?;
    if test.num_classes() != train.num_classes() {
        return Err(Error::DimMismatch {
            expected: train.num_classes(),
            actual: test.num_classes(),
        });
    }
    let protos = class_prototypes(train)?;
    let predictions = cp_classify(&protos, test.features())?;
    accuracy(&predictions, test.labels())
}
