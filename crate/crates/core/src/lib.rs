//! Source-free unsupervised domain adaptation on precomputed feature vectors.
//!
//! The crate works on features exported from a frozen backbone and provides:
//!
//! * [`probing`]: linear probing (multinomial regression) and cluster probing
//!   (cosine nearest-prototype classification),
//! * [`align`]: simple class alignment, i.e. spherical k-means refinement of
//!   source-side prototypes on the unlabeled target, with four initializations,
//! * [`shot_lite`]: SHOT-style pseudo-labeling with an affine feature adapter,
//!   plus feature-statistics re-estimation (the feature-space analog of
//!   adapting batch-norm statistics),
//! * [`stats`]: the OLS models used to relate backbone quality to transfer
//!   accuracy, with adjusted R² and coefficient significance,
//! * [`harness`]: a seeded domain-pair generator, per-pair experiment runner,
//!   failure-rate metrics and the batch runner behind `sfuda run`,
//! * [`io`]: the SFDK binary feature format, CSV features and run manifests.
// Negated comparisons reject NaN on purpose; index loops mirror the matrix math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]


pub mod align;
pub mod error;
pub mod harness;
pub mod io;
mod linalg;
pub mod probing;
pub mod shot_lite;
pub mod stats;
pub mod types;

pub use error::{Error, ErrorKind, Result};
pub use types::{
    l2_normalize_rows, validate_domain, DomainRole, FeatureMatrix, FitDiagnostics,
    LabeledDomain, LinearClassifier, Prototypes, SoftPredictions, UNLABELED,
};
