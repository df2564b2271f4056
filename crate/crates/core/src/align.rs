//! Simple class alignment (SCA).
//!
//! Source-side prototypes seed a spherical k-means run on the unlabeled target
//! features; the refined prototypes then act as a cosine 1-NN classifier on
//! the target. Four seedings are provided: source class means, rows of a
//! multinomial-regression weight matrix, and target means under hard or soft
//! classifier predictions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::probing::{self, accuracy, class_prototypes, predict_proba};
use crate::types::{
    l2_normalize_rows, DomainRole, FeatureMatrix, LabeledDomain, LinearClassifier, Prototypes,
    SoftPredictions,
};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansConfig {
    pub max_iters: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self { max_iters: 100 }
    }
}

impl KMeansConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("k-means max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Outcome of [`spherical_kmeans`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScaResult {
    /// Unit-norm centroids; rows that never received a sample stay zero and stale.
    pub prototypes: Prototypes,
    pub assignments: Vec<usize>,
    pub iterations_used: usize,
    pub converged: bool,
    /// `sum_i (1/2 - <z_i, k_{c_i}>/2)` after every assignment step.
    pub objective_trace: Vec<f64>,
}

/// How SCA seeds its prototypes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Initialization {
    #[serde(rename = "source_labels")]
    SourceLabels,
    #[serde(rename = "mr_weights")]
    MrWeights,
    #[serde(rename = "hard")]
    HardPreds,
    #[serde(rename = "soft")]
    SoftPreds,
}

impl Initialization {
    pub const ALL: [Initialization; 4] = [
        Initialization::SourceLabels,
        Initialization::MrWeights,
        Initialization::HardPreds,
        Initialization::SoftPreds,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Initialization::SourceLabels => "source_labels",
            Initialization::MrWeights => "mr_weights",
            Initialization::HardPreds => "hard",
            Initialization::SoftPreds => "soft",
        }
    }
}

impl fmt::Display for Initialization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Initialization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Initialization::ALL
            .into_iter()
            .find(|i| i.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown SCA init '{s}'")))
    }
}

pub fn init_from_source_labels(source: &LabeledDomain) -> Result<Prototypes> {
    source.validate(DomainRole::Source)?;
    class_prototypes(source)
}

/// Prototypes are the rows of `W`; any bias is ignored.
pub fn init_from_mr_weights(clf: &LinearClassifier) -> Prototypes {
    Prototypes::new(clf.weights().clone())
}

/// Mean target feature per argmax pseudo-class.
pub fn init_from_hard_preds(clf: &LinearClassifier, target: &FeatureMatrix) -> Result<Prototypes> {
    let labels = predict_proba(clf, target)?.argmax();
    let c = clf.num_classes();
    let d = target.cols();
    let mut sums = vec![0.0; c * d];
    let mut counts = vec![0usize; c];
    for (z, &l) in target.iter_rows().zip(&labels) {
        counts[l] += 1;
        for (s, v) in sums[l * d..(l + 1) * d].iter_mut().zip(z) {
            *s += v;
        }
    }
    let stale: Vec<bool> = counts.iter().map(|&n| n == 0).collect();
    for (row, &n) in sums.chunks_exact_mut(d).zip(&counts) {
        if n > 0 {
            row.iter_mut().for_each(|v| *v /= n as f64);
        }
    }
    Ok(Prototypes::from_parts(
        FeatureMatrix::from_parts(c, d, sums),
        false,
        stale,
    ))
}

/// `k_c = sum_i p_ic z_i / sum_i p_ic`; a vanishing denominator marks `k_c` stale.
pub fn init_from_soft_preds(probs: &SoftPredictions, target: &FeatureMatrix) -> Result<Prototypes> {
    if probs.rows() != target.rows() {
        return Err(Error::DimMismatch {
            expected: target.rows(),
            actual: probs.rows(),
        });
    }
    let c = probs.num_classes();
    let d = target.cols();
    let mut sums = vec![0.0; c * d];
    let mut mass = vec![0.0; c];
    for (z, p) in target.iter_rows().zip(probs.probs().iter_rows()) {
        for k in 0..c {
            mass[k] += p[k];
            for (s, v) in sums[k * d..(k + 1) * d].iter_mut().zip(z) {
                *s += p[k] * v;
            }
        }
    }
    let mut stale = vec![false; c];
    for (k, row) in sums.chunks_exact_mut(d).enumerate() {
        if mass[k] <= 1e-12 {
            stale[k] = true;
            row.iter_mut().for_each(|v| *v = 0.0);
        } else {
            row.iter_mut().for_each(|v| *v /= mass[k]);
        }
    }
    Ok(Prototypes::from_parts(
        FeatureMatrix::from_parts(c, d, sums),
        false,
        stale,
    ))
}

/// Builds the seeding prototypes for `init`. `clf` is required for every
/// initialization except [`Initialization::SourceLabels`].
pub fn initial_prototypes(
    init: Initialization,
    source: &LabeledDomain,
    clf: Option<&LinearClassifier>,
    target: &FeatureMatrix,
) -> Result<Prototypes> {
    let need_clf = || {
        clf.ok_or_else(|| Error::InvalidConfig(format!("init '{init}' needs a source classifier")))
    };
    match init {
        Initialization::SourceLabels => init_from_source_labels(source),
        Initialization::MrWeights => Ok(init_from_mr_weights(need_clf()?)),
        Initialization::HardPreds => init_from_hard_preds(need_clf()?, target),
        Initialization::SoftPreds => {
            let probs = predict_proba(need_clf()?, target)?;
            init_from_soft_preds(&probs, target)
        }
    }
}

/// Spherical k-means from fixed initial centroids.
///
/// Target rows are normalized once. Each pass normalizes the centroids,
/// assigns every sample to the most cosine-similar non-zero centroid (lowest
/// index on ties) and stops when the assignment repeats exactly. Otherwise the
/// centroids become the means of their assigned unit vectors; a centroid left
/// without samples, or whose mean vanishes, keeps its previous value and is
/// flagged stale. Stale centroids with a non-zero direction still compete in
/// later passes.
pub fn spherical_kmeans(
    init: &Prototypes,
    target: &FeatureMatrix,
    cfg: &KMeansConfig,
) -> Result<ScaResult> {
    cfg.validate()?;
    target.check_cols(init.dim())?;
    let x = l2_normalize_rows(target)?;
    let c = init.num_classes();
    let d = init.dim();
    let mut centroids = init.centroids().as_slice().to_vec();
    let mut stale = init.stale().to_vec();
    let mut previous: Option<Vec<usize>> = None;
    let mut assignments = vec![0usize; x.rows()];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations_used = 0;

    let mut sums = vec![0.0; c * d];
    let mut counts = vec![0usize; c];
    for iter in 1..=cfg.max_iters {
        iterations_used = iter;
        let eligible = normalize_centroids(&mut centroids, d);
        if !eligible.iter().any(|&e| e) {
            return Err(Error::AllCentroidsStale);
        }

        let mut objective = 0.0;
        for (z, a) in x.iter_rows().zip(assignments.iter_mut()) {
            let mut best = (usize::MAX, f64::NEG_INFINITY);
            for k in (0..c).filter(|&k| eligible[k]) {
                let sim = linalg::dot(&centroids[k * d..(k + 1) * d], z);
                if sim > best.1 {
                    best = (k, sim);
                }
            }
            *a = best.0;
            objective += 0.5 - 0.5 * best.1;
        }
        trace.push(objective);

        if previous.as_deref() == Some(assignments.as_slice()) {
            converged = true;
            break;
        }

        sums.iter_mut().for_each(|v| *v = 0.0);
        counts.iter_mut().for_each(|v| *v = 0);
        for (z, &a) in x.iter_rows().zip(&assignments) {
            counts[a] += 1;
            for (s, v) in sums[a * d..(a + 1) * d].iter_mut().zip(z) {
                *s += v;
            }
        }
        for k in 0..c {
            let mean = &mut sums[k * d..(k + 1) * d];
            if counts[k] == 0 {
                stale[k] = true;
                continue;
            }
            mean.iter_mut().for_each(|v| *v /= counts[k] as f64);
            if linalg::norm(mean) == 0.0 {
                stale[k] = true;
                continue;
            }
            centroids[k * d..(k + 1) * d].copy_from_slice(mean);
            stale[k] = false;
        }
        previous = Some(assignments.clone());
    }
    normalize_centroids(&mut centroids, d);

    Ok(ScaResult {
        prototypes: Prototypes::from_parts(FeatureMatrix::from_parts(c, d, centroids), true, stale),
        assignments,
        iterations_used,
        converged,
        objective_trace: trace,
    })
}

/// Normalizes non-zero rows in place; returns which rows are non-zero.
fn normalize_centroids(centroids: &mut [f64], d: usize) -> Vec<bool> {
    centroids
        .chunks_exact_mut(d)
        .map(|row| {
            let n = linalg::norm(row);
            if n > 0.0 {
                row.iter_mut().for_each(|v| *v /= n);
                true
            } else {
                false
            }
        })
        .collect()
}

/// SCA run with its transductive target accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaOutcome {
    pub result: ScaResult,
    pub predictions: Vec<usize>,
    pub accuracy: f64,
}

/// Refines `source_side` on the target features and classifies the target by
/// nearest refined prototype. Target labels are read only to score the result.
pub fn sca(
    source_side: &Prototypes,
    target: &LabeledDomain,
    cfg: &KMeansConfig,
) -> Result<ScaOutcome> {
    let result = spherical_kmeans(source_side, target.features(), cfg)?;
    let predictions = probing::cp_classify(&result.prototypes, target.features())?;
    let accuracy = accuracy(&predictions, target.labels())?;
    Ok(ScaOutcome {
        result,
        predictions,
        accuracy,
    })
}
