//! Experiment execution: the synthetic pair generator, single-pair runs,
//! failure metrics and the manifest batch runner.

mod batch;
mod generator;
mod metrics;

pub use batch::{
    format_sig6, load_pair, render_results, run_manifest, write_results_atomic, BatchReport, ResultRow,
    RESULT_COLUMNS,
};
pub use generator::{gen_domain_pair, ShiftSpec};
pub use metrics::{
    conditional_degradation, failure_rate, group_summary, ConditionalDegradation,
    FailureSummary, GroupRow,
};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::align::{initial_prototypes, spherical_kmeans, Initialization, KMeansConfig};
use crate::error::{Error, Result};
use crate::probing::{
    accuracy, class_prototypes, cp_classify, fit_multinomial, lp_accuracy, predict, FitConfig,
};
use crate::shot_lite::{
    estimate_stats, shot_lite_fit, standardize, FeatureAdapter, ShotConfig,
};
use crate::types::{DomainRole, LabeledDomain, Prototypes};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Lp,
    Cp,
    Sca,
    ShotLite,
    FtStats,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Lp,
        Method::Cp,
        Method::Sca,
        Method::ShotLite,
        Method::FtStats,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Lp => "lp",
            Method::Cp => "cp",
            Method::Sca => "sca",
            Method::ShotLite => "shot_lite",
            Method::FtStats => "ft_stats",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

/// Optional per-experiment overrides. Unset fields fall back to the method
/// defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<Initialization>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
}

/// Initialization used by `sca` when none is given.
pub const DEFAULT_SCA_INIT: Initialization = Initialization::MrWeights;

impl MethodParams {
    pub fn fit_config(&self) -> Result<FitConfig> {
        let mut cfg = FitConfig::default();
        if let Some(lambda) = self.lambda {
            cfg.lambda = lambda;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn shot_config(&self, seed: u64) -> Result<ShotConfig> {
        let mut cfg = ShotConfig {
            seed,
            ..ShotConfig::default()
        };
        if let Some(epochs) = self.epochs {
            cfg.epochs = epochs;
        }
        if let Some(beta) = self.beta {
            cfg.beta = beta;
        }
        if let Some(lr) = self.learning_rate {
            cfg.learning_rate = lr;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Rejects overrides that the method would silently ignore.
    pub fn check_applicable(&self, method: Method) -> Result<()> {
        let unused = |name: &str| {
            Err(Error::InvalidConfig(format!(
                "parameter '{name}' does not apply to method '{method}'"
            )))
        };
        if self.init.is_some() && method != Method::Sca {
            return unused("init");
        }
        if method != Method::ShotLite {
            if self.epochs.is_some() {
                return unused("epochs");
            }
            if self.beta.is_some() {
                return unused("beta");
            }
            if self.learning_rate.is_some() {
                return unused("learning_rate");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub pair_id: String,
    pub method: Method,
    /// Linear-probe accuracy on the source features it was fitted on.
    pub source_acc: f64,
    /// Linear probe fitted on the source, scored on the target.
    pub baseline_target_acc: f64,
    pub adapted_target_acc: f64,
    pub delta: f64,
    /// `adapted_target_acc < baseline_target_acc`; ties count as success.
    pub failed: bool,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl ExperimentOutcome {
    pub fn new(
        pair_id: impl Into<String>,
        method: Method,
        baseline_target_acc: f64,
        adapted_target_acc: f64,
    ) -> Self {
        Self {
            pair_id: pair_id.into(),
            method,
            source_acc: f64::NAN,
            baseline_target_acc,
            adapted_target_acc,
            delta: adapted_target_acc - baseline_target_acc,
            failed: adapted_target_acc < baseline_target_acc,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }
}

/// Method-specific artifacts of one run, computed without target labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Adaptation {
    pub predictions: Vec<usize>,
    /// Refined prototypes (`cp` and `sca`).
    pub prototypes: Option<Prototypes>,
    /// Trained adapter (`shot_lite`).
    pub adapter: Option<FeatureAdapter>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairRun {
    pub outcome: ExperimentOutcome,
    pub adaptation: Adaptation,
}

/// [`run_pair_detailed`] without the artifacts.
pub fn run_pair(
    source: &LabeledDomain,
    target: &LabeledDomain,
    method: Method,
    params: &MethodParams,
    seed: u64,
) -> Result<ExperimentOutcome> {
    run_pair_detailed(source, target, method, params, seed).map(|r| r.outcome)
}

/// Runs one transductive experiment.
///
/// Adaptation code only ever sees a label-stripped copy of the target; the
/// target labels are read afterwards to score the baseline and the adapted
/// predictions. The returned outcome has an empty `pair_id`.
pub fn run_pair_detailed(
    source: &LabeledDomain,
    target: &LabeledDomain,
    method: Method,
    params: &MethodParams,
    seed: u64,
) -> Result<PairRun> {
    source.validate(DomainRole::Source)?;
    target.validate(DomainRole::Target)?;
    target.features().check_cols(source.dim())?;
    if target.num_classes() > source.num_classes() {
        return Err(Error::ShapeMismatch {
            what: "target class count",
            expected: source.num_classes(),
            actual: target.num_classes(),
        });
    }
    params.check_applicable(method)?;
    let fit_cfg = params.fit_config()?;
    let clf = fit_multinomial(source, &fit_cfg)?;
    let unlabeled = target.without_labels();
    let feats = unlabeled.features();

    let adaptation = match method {
        Method::Lp => Adaptation {
            predictions: predict(&clf, feats)?,
            prototypes: None,
            adapter: None,
        },
        Method::Cp => {
            let protos = class_prototypes(source)?;
            Adaptation {
                predictions: cp_classify(&protos, feats)?,
                prototypes: Some(protos),
                adapter: None,
            }
        }
        Method::Sca => {
            let init = params.init.unwrap_or(DEFAULT_SCA_INIT);
            let seeds = initial_prototypes(init, source, Some(&clf), feats)?;
            let result = spherical_kmeans(&seeds, feats, &KMeansConfig::default())?;
            Adaptation {
                predictions: cp_classify(&result.prototypes, feats)?,
                prototypes: Some(result.prototypes),
                adapter: None,
            }
        }
        Method::ShotLite => {
            let fit = shot_lite_fit(&clf, feats, &params.shot_config(seed)?)?;
            Adaptation {
                predictions: fit.epoch_predictions.last().cloned().unwrap_or_default(),
                prototypes: None,
                adapter: Some(fit.adapter),
            }
        }
        Method::FtStats => {
            let src_stats = estimate_stats(source.features())?;
            let tgt_stats = estimate_stats(feats)?;
            let (src_feats, _, c) = source.clone().into_parts();
            let src_std =
                LabeledDomain::new(standardize(&src_feats, &src_stats)?, source.labels().to_vec(), c)?;
            let clf_std = fit_multinomial(&src_std, &fit_cfg)?;
            Adaptation {
                predictions: predict(&clf_std, &standardize(feats, &tgt_stats)?)?,
                prototypes: None,
                adapter: None,
            }
        }
    };

    let source_acc = lp_accuracy(&clf, source)?;
    let baseline = lp_accuracy(&clf, target)?;
    let adapted = match method {
        Method::Lp => baseline,
        _ => accuracy(&adaptation.predictions, target.labels())?,
    };
    let mut outcome = ExperimentOutcome::new(String::new(), method, baseline, adapted);
    outcome.source_acc = source_acc;
    outcome.metadata.insert("seed".into(), seed.to_string());
    Ok(PairRun { outcome, adaptation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::FeatureMatrix;

    fn pair(seed: u64) -> (LabeledDomain, LabeledDomain) {
        gen_domain_pair(&ShiftSpec {
            samples_per_class: 20,
            rotation_angle: 0.4,
            seed,
            ..ShiftSpec::default()
        })
        .unwrap()
    }

    #[test]
    fn lp_against_itself() {
        let (s, t) = pair(1);
        let o = run_pair(&s, &t, Method::Lp, &MethodParams::default(), 1).unwrap();
        assert_eq!(o.delta, 0.0);
        assert!(!o.failed);
    }

    #[test]
    fn constructed_failure() {
        let o = ExperimentOutcome::new("x", Method::Sca, 0.50, 0.40);
        assert!(o.failed);
        assert!((o.delta + 0.10).abs() < 1e-12);
        let tie = ExperimentOutcome::new("y", Method::Sca, 0.5, 0.5);
        assert!(!tie.failed);
    }

    #[test]
    fn sca_on_null_shift() {
        let (s, t) = gen_domain_pair(&ShiftSpec { seed: 21, ..ShiftSpec::default() }).unwrap();
        for init in Initialization::ALL {
            let params = MethodParams { init: Some(init), ..MethodParams::default() };
            let o = run_pair(&s, &t, Method::Sca, &params, 0).unwrap();
            assert!(o.delta.abs() <= 0.05, "{init}: {}", o.delta);
            assert_eq!(o.failed, o.delta < 0.0);
        }
    }

    #[test]
    fn canary_labels_never_reach_adaptation() {
        let (s, t) = pair(5);
        let (feats, labels, c) = t.clone().into_parts();
        let poisoned: Vec<i32> = labels.iter().map(|&l| (l + 1) % c as i32).collect();
        let poisoned = LabeledDomain::new(feats, poisoned, c).unwrap();
        for method in Method::ALL {
            let params = MethodParams {
                epochs: (method == Method::ShotLite).then_some(2),
                ..MethodParams::default()
            };
            let a = run_pair_detailed(&s, &t, method, &params, 9).unwrap();
            let b = run_pair_detailed(&s, &poisoned, method, &params, 9).unwrap();
            assert_eq!(a.adaptation, b.adaptation, "{method}");
            assert_ne!(a.outcome.adapted_target_acc, b.outcome.adapted_target_acc, "{method}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let (s, t) = pair(2);
        let narrow = LabeledDomain::new(
            FeatureMatrix::zeros(2, 3).unwrap(),
            vec![0, 1],
            2,
        )
        .unwrap();
        assert!(run_pair(&s, &narrow, Method::Lp, &MethodParams::default(), 0).is_err());
        let p = MethodParams { epochs: Some(3), ..MethodParams::default() };
        assert!(matches!(
            run_pair(&s, &t, Method::Sca, &p, 0),
            Err(Error::InvalidConfig(_))
        ));
        let p = MethodParams { lambda: Some(-1.0), ..MethodParams::default() };
        assert!(run_pair(&s, &t, Method::Lp, &p, 0).is_err());
        assert!(matches!("nrc".parse::<Method>(), Err(Error::UnknownMethod(_))));
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{m}\""));
        }
    }

    #[test]
    fn ft_stats_recovers_scale_shift() {
        let mut scale = vec![1.0; 16];
        for s in scale.iter_mut().take(4) {
            *s = 10.0;
        }
        let spec = ShiftSpec { per_dim_scale: scale, seed: 8, ..ShiftSpec::default() };
        let (s, t) = gen_domain_pair(&spec).unwrap();
        let o = run_pair(&s, &t, Method::FtStats, &MethodParams::default(), 0).unwrap();
        assert!(o.delta > 0.0, "{o:?}");
    }
}
