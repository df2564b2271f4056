use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ExperimentOutcome, Method};
use crate::error::{Error, Result};
use crate::stats::mean_std;

/// Mean and population std of `values`, summed in sorted order so the result
/// does not depend on input order.
fn order_free_mean_std(mut values: Vec<f64>) -> Result<(f64, f64)> {
    values.sort_by(f64::total_cmp);
    mean_std(&values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailureSummary {
    pub count: usize,
    pub failed: usize,
    /// `100 * failed / count`.
    pub rate_percent: f64,
    pub delta_mean: f64,
    pub delta_std: f64,
}

pub fn failure_rate(outcomes: &[ExperimentOutcome]) -> Result<FailureSummary> {
    if outcomes.is_empty() {
        return Err(Error::Empty);
    }
    let failed = outcomes.iter().filter(|o| o.failed).count();
    let (delta_mean, delta_std) = order_free_mean_std(outcomes.iter().map(|o| o.delta).collect())?;
    Ok(FailureSummary {
        count: outcomes.len(),
        failed,
        rate_percent: 100.0 * failed as f64 / outcomes.len() as f64,
        delta_mean,
        delta_std,
    })
}

/// Delta statistics split by the failed flag; a side with no outcomes is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConditionalDegradation {
    pub success: Option<(f64, f64)>,
    pub failure: Option<(f64, f64)>,
}

pub fn conditional_degradation(outcomes: &[ExperimentOutcome]) -> ConditionalDegradation {
    let side = |failed: bool| {
        let deltas: Vec<f64> = outcomes
            .iter()
            .filter(|o| o.failed == failed)
            .map(|o| o.delta)
            .collect();
        order_free_mean_std(deltas).ok()
    };
    ConditionalDegradation {
        success: side(false),
        failure: side(true),
    }
}

/// One row of a grouped summary: adapted accuracy and delta as mean ± std.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub group: String,
    pub method: Method,
    pub count: usize,
    pub accuracy: (f64, f64),
    pub delta: (f64, f64),
}

impl fmt::Display for GroupRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{:.4} ± {:.4}\t{:.4} ± {:.4}",
            self.group,
            self.method,
            self.count,
            self.accuracy.0,
            self.accuracy.1,
            self.delta.0,
            self.delta.1
        )
    }
}

/// Groups outcomes by `metadata[group_key]` and method; rows are sorted by
/// group, then method.
pub fn group_summary(outcomes: &[ExperimentOutcome], group_key: &str) -> Result<Vec<GroupRow>> {
    let mut groups: BTreeMap<(&str, Method), Vec<&ExperimentOutcome>> = BTreeMap::new();
    for o in outcomes {
        let group = o.metadata.get(group_key).ok_or_else(|| Error::MissingKey {
            pair_id: o.pair_id.clone(),
            key: group_key.to_string(),
        })?;
        groups.entry((group.as_str(), o.method)).or_default().push(o);
    }
    groups
        .into_iter()
        .map(|((group, method), members)| {
            Ok(GroupRow {
                group: group.to_string(),
                method,
                count: members.len(),
                accuracy: order_free_mean_std(members.iter().map(|o| o.adapted_target_acc).collect())?,
                delta: order_free_mean_std(members.iter().map(|o| o.delta).collect())?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn outcomes(pairs: &[(f64, f64)]) -> Vec<ExperimentOutcome> {
        pairs
            .iter()
            .enumerate()
            .map(|(i, &(b, a))| ExperimentOutcome::new(format!("p{i}"), Method::Sca, b, a))
            .collect()
    }

    #[test]
    fn half_failed() {
        let s = failure_rate(&outcomes(&[(0.5, 0.6), (0.5, 0.4)])).unwrap();
        assert_eq!(s.rate_percent, 50.0);
        assert_eq!(s.failed, 1);
    }

    #[test]
    fn ties_are_not_failures() {
        let s = failure_rate(&outcomes(&[(0.5, 0.5), (0.7, 0.7), (0.0, 0.0)])).unwrap();
        assert_eq!(s.rate_percent, 0.0);
        assert_eq!(s.delta_mean, 0.0);
    }

    #[test]
    fn seventy_four_pairs() {
        let pairs: Vec<_> = (0..74).map(|i| if i < 12 { (0.6, 0.5) } else { (0.5, 0.6) }).collect();
        let s = failure_rate(&outcomes(&pairs)).unwrap();
        assert_eq!(format!("{:.1}", s.rate_percent), "16.2");
    }

    #[test]
    fn empty_is_an_error() {
        assert!(matches!(failure_rate(&[]), Err(Error::Empty)));
    }

    #[test]
    fn degradation_split() {
        let set = outcomes(&[(0.0, 2.0), (0.0, 4.0), (0.0, -3.0)]);
        let d = conditional_degradation(&set);
        assert_eq!(d.success, Some((3.0, 1.0)));
        assert_eq!(d.failure, Some((-3.0, 0.0)));
        let d = conditional_degradation(&set[..2]);
        assert_eq!(d.failure, None);
    }

    #[test]
    fn grouped_rows() {
        let set = vec![
            ExperimentOutcome::new("a", Method::Sca, 0.5, 0.7).with_metadata("norm", "bn"),
            ExperimentOutcome::new("b", Method::Sca, 0.5, 0.6).with_metadata("norm", "ln"),
            ExperimentOutcome::new("c", Method::Sca, 0.5, 0.5).with_metadata("norm", "bn"),
        ];
        let rows = group_summary(&set, "norm").unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].group, "bn");
        assert_eq!(rows[0].count, 2);
        assert!((rows[0].accuracy.0 - 0.6).abs() < 1e-12);
        assert!((rows[0].accuracy.1 - 0.1).abs() < 1e-12);
        assert_eq!(rows[1].accuracy, (0.6, 0.0));
        let mut rev = set.clone();
        rev.reverse();
        assert_eq!(group_summary(&rev, "norm").unwrap(), rows);
        assert!(matches!(
            group_summary(&set, "pretrain"),
            Err(Error::MissingKey { .. })
        ));
    }

    proptest! {
        #[test]
        fn permutation_invariant(
            pairs in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..40),
            rot in 0usize..40,
        ) {
            let set = outcomes(&pairs);
            let mut shuffled = set.clone();
            shuffled.rotate_left(rot % set.len());
            shuffled.reverse();
            prop_assert_eq!(failure_rate(&set).unwrap(), failure_rate(&shuffled).unwrap());
            prop_assert_eq!(conditional_degradation(&set), conditional_degradation(&shuffled));
        }

        #[test]
        fn failed_iff_negative_delta(b in 0.0f64..1.0, a in 0.0f64..1.0) {
            let o = ExperimentOutcome::new("x", Method::Cp, b, a);
            prop_assert_eq!(o.failed, o.delta < 0.0);
        }
    }
}
