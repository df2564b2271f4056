//! Deterministic workloads shared by the criterion benchmarks.

use sfuda_core::harness::{gen_domain_pair, ShiftSpec};
use sfuda_core::LabeledDomain;

/// A shifted blob pair of `classes * per_class` rows per domain in `dim` dimensions.
pub fn shifted_pair(classes: usize, dim: usize, per_class: usize) -> (LabeledDomain, LabeledDomain) {
    let spec = ShiftSpec {
        num_classes: classes,
        dim,
        samples_per_class: per_class,
        rotation_angle: 0.4,
        translation: vec![0.5; dim],
        seed: 42,
        ..ShiftSpec::default()
    };
    gen_domain_pair(&spec).expect("valid benchmark spec")
}
