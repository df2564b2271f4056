//! Shared domain types: feature matrices, labeled domains, linear classifiers,
//! prototypes and soft predictions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Sentinel label for samples without a class.
pub const UNLABELED: i32 = -1;

/// Dense row-major `rows x cols` matrix of finite doubles, one sample per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                what: "matrix data",
                expected: rows * cols,
                actual: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                row: pos / cols,
                col: pos % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::ShapeMismatch {
                    what: "row",
                    expected: cols,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![0.0; rows * cols])
    }

    /// Builds a matrix whose entries the caller already knows are finite.
    pub(crate) fn from_parts(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert!(rows > 0 && cols > 0);
        debug_assert_eq!(data.len(), rows * cols);
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Selects rows by index, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self::new(indices.len(), self.cols, data)
    }

    pub(crate) fn check_cols(&self, expected: usize) -> Result<()> {
        if self.cols != expected {
            return Err(Error::DimMismatch {
                expected,
                actual: self.cols,
            });
        }
        Ok(())
    }
}

/// Which role a domain plays; source domains must populate every class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainRole {
    Source,
    Target,
}

/// Features plus integer labels in `{-1, 0..C-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDomain {
    features: FeatureMatrix,
    labels: Vec<i32>,
    num_classes: usize,
}

impl LabeledDomain {
    pub fn new(features: FeatureMatrix, labels: Vec<i32>, num_classes: usize) -> Result<Self> {
        check_parts(&features, &labels, num_classes, DomainRole::Target)?;
        Ok(Self {
            features,
            labels,
            num_classes,
        })
    }

    /// A domain with every sample unlabeled.
    pub fn unlabeled(features: FeatureMatrix, num_classes: usize) -> Result<Self> {
        let labels = vec![UNLABELED; features.rows()];
        Self::new(features, labels, num_classes)
    }

    /// Builds and validates in one step from raw row-major values.
    pub fn from_raw(
        rows: usize,
        cols: usize,
        values: Vec<f64>,
        labels: Vec<i32>,
        num_classes: usize,
        role: DomainRole,
    ) -> Result<Self> {
        let features = FeatureMatrix::new(rows, cols, values)?;
        check_parts(&features, &labels, num_classes, role)?;
        Ok(Self {
            features,
            labels,
            num_classes,
        })
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn has_labels(&self) -> bool {
        self.labels.iter().any(|&l| l != UNLABELED)
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.labels.iter().all(|&l| l != UNLABELED)
    }

    /// Same features with every label replaced by the unlabeled sentinel.
    pub fn without_labels(&self) -> Self {
        Self {
            features: self.features.clone(),
            labels: vec![UNLABELED; self.len()],
            num_classes: self.num_classes,
        }
    }

    /// Re-declares the class count (e.g. a target read from disk adopting its source's C).
    pub fn with_num_classes(self, num_classes: usize) -> Result<Self> {
        Self::new(self.features, self.labels, num_classes)
    }

    /// Labels as class indices, failing on the first unlabeled row.
    pub fn class_indices(&self) -> Result<Vec<usize>> {
        self.labels
            .iter()
            .enumerate()
            .map(|(row, &l)| {
                if l < 0 {
                    Err(Error::UnlabeledSample { row })
                } else {
                    Ok(l as usize)
                }
            })
            .collect()
    }

    pub fn validate(&self, role: DomainRole) -> Result<()> {
        check_parts(&self.features, &self.labels, self.num_classes, role)
    }

    pub fn into_parts(self) -> (FeatureMatrix, Vec<i32>, usize) {
        (self.features, self.labels, self.num_classes)
    }
}

/// Checks every [`LabeledDomain`] invariant for the given role.
pub fn validate_domain(domain: &LabeledDomain, role: DomainRole) -> Result<()> {
    domain.validate(role)
}

fn check_parts(
    features: &FeatureMatrix,
    labels: &[i32],
    num_classes: usize,
    role: DomainRole,
) -> Result<()> {
    if labels.len() != features.rows() {
        return Err(Error::ShapeMismatch {
            what: "labels",
            expected: features.rows(),
            actual: labels.len(),
        });
    }
    if num_classes == 0 {
        return Err(Error::InvalidConfig("num_classes must be at least 1".into()));
    }
    if let Some(pos) = features.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue {
            row: pos / features.cols(),
            col: pos % features.cols(),
        });
    }
    let mut counts = vec![0usize; num_classes];
    for (row, &label) in labels.iter().enumerate() {
        if label == UNLABELED {
            continue;
        }
        if label < 0 || label as usize >= num_classes {
            return Err(Error::LabelOutOfRange {
                row,
                label,
                num_classes,
            });
        }
        counts[label as usize] += 1;
    }
    if role == DomainRole::Source {
        if let Some(class) = counts.iter().position(|&c| c == 0) {
            return Err(Error::EmptyClass { class });
        }
    }
    Ok(())
}

/// Scales every row to unit L2 norm.
pub fn l2_normalize_rows(m: &FeatureMatrix) -> Result<FeatureMatrix> {
    let mut data = Vec::with_capacity(m.as_slice().len());
    for (i, row) in m.iter_rows().enumerate() {
        let norm = linalg::norm(row);
        if norm == 0.0 {
            return Err(Error::ZeroRow { row: i });
        }
        data.extend(row.iter().map(|v| v / norm));
    }
    Ok(FeatureMatrix::from_parts(m.rows(), m.cols(), data))
}

/// Diagnostics recorded by the multinomial solver.
#[derive(Debug, Clone, PartialEq)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    /// Infinity norm of the objective gradient at the returned iterate.
    pub grad_norm: f64,
    pub objective: f64,
    /// Objective after every accepted step, starting with the initial iterate.
    pub objective_trace: Vec<f64>,
}

/// Softmax classifier `z -> softmax(Wz + b)` with `W` of shape `C x D`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    weights: FeatureMatrix,
    bias: Option<Vec<f64>>,
    lambda: f64,
    diagnostics: Option<FitDiagnostics>,
}

impl LinearClassifier {
    pub fn new(weights: FeatureMatrix, bias: Option<Vec<f64>>, lambda: f64) -> Result<Self> {
        if let Some(b) = &bias {
            if b.len() != weights.rows() {
                return Err(Error::ShapeMismatch {
                    what: "bias",
                    expected: weights.rows(),
                    actual: b.len(),
                });
            }
            if let Some(col) = b.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue { row: 0, col });
            }
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda must be >= 0, got {lambda}")));
        }
        Ok(Self {
            weights,
            bias,
            lambda,
            diagnostics: None,
        })
    }

    pub(crate) fn with_diagnostics(mut self, diagnostics: FitDiagnostics) -> Self {
        self.diagnostics = Some(diagnostics);
        self
    }

    pub fn weights(&self) -> &FeatureMatrix {
        &self.weights
    }

    pub fn bias(&self) -> Option<&[f64]> {
        self.bias.as_deref()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn diagnostics(&self) -> Option<&FitDiagnostics> {
        self.diagnostics.as_ref()
    }

    pub fn num_classes(&self) -> usize {
        self.weights.rows()
    }

    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    /// Writes `Wz + b` into `out`.
    pub fn logits_into(&self, z: &[f64], out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            *o = linalg::dot(self.weights.row(c), z) + self.bias.as_ref().map_or(0.0, |b| b[c]);
        }
    }
}

/// Class centroids `k_1..k_C`.
///
/// A centroid is *stale* when no sample contributed to it the last time it was
/// built. Stale rows may be all-zero; they never win a nearest-prototype vote.
#[derive(Debug, Clone, PartialEq)]
pub struct Prototypes {
    centroids: FeatureMatrix,
    normalized: bool,
    stale: Vec<bool>,
}

impl Prototypes {
    pub fn new(centroids: FeatureMatrix) -> Self {
        let stale = vec![false; centroids.rows()];
        Self {
            centroids,
            normalized: false,
            stale,
        }
    }

    pub fn with_stale(centroids: FeatureMatrix, stale: Vec<bool>) -> Result<Self> {
        if stale.len() != centroids.rows() {
            return Err(Error::ShapeMismatch {
                what: "stale flags",
                expected: centroids.rows(),
                actual: stale.len(),
            });
        }
        Ok(Self {
            centroids,
            normalized: false,
            stale,
        })
    }

    pub(crate) fn from_parts(centroids: FeatureMatrix, normalized: bool, stale: Vec<bool>) -> Self {
        debug_assert_eq!(stale.len(), centroids.rows());
        Self {
            centroids,
            normalized,
            stale,
        }
    }

    pub fn centroids(&self) -> &FeatureMatrix {
        &self.centroids
    }

    pub fn centroid(&self, c: usize) -> &[f64] {
        self.centroids.row(c)
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn stale(&self) -> &[bool] {
        &self.stale
    }

    pub fn is_stale(&self, c: usize) -> bool {
        self.stale[c]
    }

    pub fn num_classes(&self) -> usize {
        self.centroids.rows()
    }

    pub fn dim(&self) -> usize {
        self.centroids.cols()
    }
}

/// Row-stochastic `N x C` matrix of class probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftPredictions {
    probs: FeatureMatrix,
}

impl SoftPredictions {
    pub fn new(probs: FeatureMatrix) -> Result<Self> {
        for (i, row) in probs.iter_rows().enumerate() {
            if let Some(col) = row.iter().position(|&p| p < 0.0) {
                return Err(Error::NonFiniteValue { row: i, col });
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidConfig(format!(
                    "probability row {i} sums to {s}, not 1"
                )));
            }
        }
        Ok(Self { probs })
    }

    /// One-hot rows for the given class indices.
    pub fn one_hot(labels: &[usize], num_classes: usize) -> Result<Self> {
        let mut data = vec![0.0; labels.len() * num_classes];
        for (i, &l) in labels.iter().enumerate() {
            if l >= num_classes {
                return Err(Error::LabelOutOfRange {
                    row: i,
                    label: l as i32,
                    num_classes,
                });
            }
            data[i * num_classes + l] = 1.0;
        }
        Self::new(FeatureMatrix::new(labels.len(), num_classes, data)?)
    }

    pub(crate) fn from_parts(probs: FeatureMatrix) -> Self {
        Self { probs }
    }

    pub fn probs(&self) -> &FeatureMatrix {
        &self.probs
    }

    pub fn rows(&self) -> usize {
        self.probs.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.probs.cols()
    }

    /// Most probable class per row; ties go to the lowest index.
    pub fn argmax(&self) -> Vec<usize> {
        self.probs.iter_rows().map(linalg::argmax).collect()
    }
}
