//! Regression models relating backbone quality to transfer accuracy.
//!
//! The simple model is `accuracy = m * top1 + q + e`. The interaction model
//! lets pre-training shift both slope and intercept:
//! `accuracy = (m + dm * pretrain) * top1 + q + dq * pretrain + e`.
//! Fits report R², adjusted R² and classical OLS significance.

mod special;

pub use special::{beta_reg, beta_reg_with_complement, ln_beta, ln_gamma, student_t_two_sided_p};

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg;

/// Condition-number estimate above which a design is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Significance level used when pruning interaction terms.
pub const DEFAULT_ALPHA: f64 = 0.01;

/// One backbone's measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackboneRecord {
    /// Top-1 accuracy on the pre-training benchmark, in `[0, 1]`.
    pub top1: f64,
    /// 0 for the smaller pre-training set, 1 for the larger one.
    pub pretrain: u8,
    /// Downstream accuracy, in `[0, 1]`.
    pub accuracy: f64,
}

impl BackboneRecord {
    pub fn new(top1: f64, pretrain: u8, accuracy: f64) -> Result<Self> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !in_unit(top1) || !in_unit(accuracy) || pretrain > 1 {
            return Err(Error::OutOfRange(format!(
                "record: top1={top1}, pretrain={pretrain}, accuracy={accuracy}"
            )));
        }
        Ok(Self {
            top1,
            pretrain,
            accuracy,
        })
    }
}

/// A regression term; coefficients are always reported in the order below.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    /// `q`
    Intercept,
    /// `m`
    Slope,
    /// `dq`
    InterceptShift,
    /// `dm`
    SlopeShift,
}

impl Term {
    pub const INTERACTION: [Term; 4] = [
        Term::Intercept,
        Term::Slope,
        Term::InterceptShift,
        Term::SlopeShift,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Term::Intercept => "q",
            Term::Slope => "m",
            Term::InterceptShift => "dq",
            Term::SlopeShift => "dm",
        }
    }

    fn value(self, r: &BackboneRecord) -> f64 {
        let g = f64::from(r.pretrain);
        match self {
            Term::Intercept => 1.0,
            Term::Slope => r.top1,
            Term::InterceptShift => g,
            Term::SlopeShift => r.top1 * g,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub terms: Vec<Term>,
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub ss_tot: f64,
    pub ss_res: f64,
    pub r2: f64,
    pub adj_r2: f64,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    /// Number of estimated parameters, intercept included.
    pub df: usize,
}

impl RegressionFit {
    pub fn n(&self) -> usize {
        self.residuals.len()
    }

    pub fn coefficient(&self, term: Term) -> Option<f64> {
        self.position(term).map(|i| self.coefficients[i])
    }

    pub fn p_value(&self, term: Term) -> Option<f64> {
        self.position(term).map(|i| self.p_values[i])
    }

    fn position(&self, term: Term) -> Option<usize> {
        self.terms.iter().position(|&t| t == term)
    }
}

/// `1 - (1 - r2) (n - 1) / (n - df)`.
pub fn adjusted_r2(r2: f64, n: usize, df: usize) -> Result<f64> {
    if n <= df {
        return Err(Error::DegenerateDof { n, df });
    }
    Ok(1.0 - (1.0 - r2) * (n as f64 - 1.0) / (n - df) as f64)
}

/// Standard errors, t statistics and two-sided p-values from
/// `sigma^2 (X^T X)^{-1}` with `sigma^2 = ss_res / (n - df)`.
///
/// An exact fit (`ss_res == 0`) yields zero standard errors, infinite t and
/// p-values of 0.
pub fn coef_pvalues(
    coefficients: &[f64],
    xtx_inv_diag: &[f64],
    ss_res: f64,
    n: usize,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let df = coefficients.len();
    if n <= df {
        return Err(Error::DegenerateDof { n, df });
    }
    let nu = (n - df) as f64;
    let sigma2 = ss_res / nu;
    let mut se = Vec::with_capacity(df);
    let mut t = Vec::with_capacity(df);
    let mut p = Vec::with_capacity(df);
    for (&beta, &v) in coefficients.iter().zip(xtx_inv_diag) {
        let s = (sigma2 * v).sqrt();
        se.push(s);
        if ss_res == 0.0 {
            t.push(if beta < 0.0 { f64::NEG_INFINITY } else { f64::INFINITY });
            p.push(0.0);
        } else {
            let ti = beta / s;
            t.push(ti);
            p.push(student_t_two_sided_p(ti, nu));
        }
    }
    Ok((se, t, p))
}

/// OLS on the design spanned by `terms`.
pub fn fit_terms(records: &[BackboneRecord], terms: &[Term]) -> Result<RegressionFit> {
    let n = records.len();
    let p = terms.len();
    if n < 3 || n <= p {
        return Err(Error::TooFewSamples {
            needed: 3.max(p + 1),
            got: n,
        });
    }
    if records
        .iter()
        .any(|r| !r.top1.is_finite() || !r.accuracy.is_finite())
    {
        return Err(Error::NonFiniteValue { row: 0, col: 0 });
    }

    let x: Vec<f64> = records
        .iter()
        .flat_map(|r| terms.iter().map(move |t| t.value(r)))
        .collect();
    let y: Vec<f64> = records.iter().map(|r| r.accuracy).collect();

    // Equilibrate columns so the pivot-ratio condition estimate is scale free.
    let mut scale = vec![0.0; p];
    for row in x.chunks_exact(p) {
        for (s, v) in scale.iter_mut().zip(row) {
            *s += v * v;
        }
    }
    if scale.contains(&0.0) {
        return Err(Error::RankDeficient {
            condition: f64::INFINITY,
        });
    }
    scale.iter_mut().for_each(|s| *s = s.sqrt());

    let mut xtx = vec![0.0; p * p];
    let mut xty = vec![0.0; p];
    for (row, &yi) in x.chunks_exact(p).zip(&y) {
        for i in 0..p {
            let xi = row[i] / scale[i];
            xty[i] += xi * yi;
            for j in 0..p {
                xtx[i * p + j] += xi * row[j] / scale[j];
            }
        }
    }
    let l = linalg::cholesky(&xtx, p).ok_or(Error::RankDeficient {
        condition: f64::INFINITY,
    })?;
    let diag: Vec<f64> = (0..p).map(|i| l[i * p + i]).collect();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let condition = (hi / lo).powi(2);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::RankDeficient { condition });
    }

    let scaled_beta = linalg::cholesky_solve(&l, p, &xty);
    let coefficients: Vec<f64> = scaled_beta.iter().zip(&scale).map(|(b, s)| b / s).collect();
    let inv = linalg::cholesky_inverse(&l, p);
    let xtx_inv_diag: Vec<f64> = (0..p).map(|i| inv[i * p + i] / (scale[i] * scale[i])).collect();

    let residuals: Vec<f64> = x
        .chunks_exact(p)
        .zip(&y)
        .map(|(row, yi)| yi - linalg::dot(row, &coefficients))
        .collect();
    let mean = y.iter().sum::<f64>() / n as f64;
    let mut ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let mut ss_res: f64 = residuals.iter().map(|e| e * e).sum();
    // Sums at rounding level count as exactly zero.
    let floor = 1e-24 * y.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    if ss_res <= floor {
        ss_res = 0.0;
    }
    if ss_tot <= floor {
        ss_tot = 0.0;
    }

    let r2 = if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            return Err(Error::DegenerateVariance);
        }
    } else {
        1.0 - ss_res / ss_tot
    };
    let adj_r2 = adjusted_r2(r2, n, p)?;
    let (std_errors, t_stats, p_values) = coef_pvalues(&coefficients, &xtx_inv_diag, ss_res, n)?;

    Ok(RegressionFit {
        terms: terms.to_vec(),
        coefficients,
        residuals,
        ss_tot,
        ss_res,
        r2,
        adj_r2,
        std_errors,
        t_stats,
        p_values,
        df: p,
    })
}

/// `accuracy = m * top1 + q`, coefficients `[q, m]`.
pub fn fit_linear(records: &[BackboneRecord]) -> Result<RegressionFit> {
    if records.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: records.len(),
        });
    }
    if distinct_top1(records.iter()) < 2 {
        return Err(Error::RankDeficient {
            condition: f64::INFINITY,
        });
    }
    fit_terms(records, &[Term::Intercept, Term::Slope])
}

/// Full interaction model, coefficients `[q, m, dq, dm]`.
pub fn fit_interaction(records: &[BackboneRecord]) -> Result<RegressionFit> {
    check_groups(records)?;
    fit_terms(records, &Term::INTERACTION)
}

fn distinct_top1<'a>(records: impl Iterator<Item = &'a BackboneRecord>) -> usize {
    let mut values: Vec<f64> = records.map(|r| r.top1).collect();
    values.sort_by(|a, b| a.total_cmp(b));
    values.dedup();
    values.len()
}

fn check_groups(records: &[BackboneRecord]) -> Result<()> {
    for g in 0..=1u8 {
        if distinct_top1(records.iter().filter(|r| r.pretrain == g)) < 2 {
            return Err(Error::MissingGroup);
        }
    }
    Ok(())
}

/// Interaction fit after backward elimination restricted to `dq` and `dm`.
///
/// While either shift term has a p-value above `alpha`, the one with the
/// larger p-value is dropped and the model refit. `q` and `m` always stay.
pub fn prune_insignificant(
    records: &[BackboneRecord],
    alpha: f64,
) -> Result<(RegressionFit, Vec<Term>)> {
    check_groups(records)?;
    let mut terms = Term::INTERACTION.to_vec();
    let mut removed = Vec::new();
    loop {
        let fit = fit_terms(records, &terms)?;
        let worst = [Term::SlopeShift, Term::InterceptShift]
            .into_iter()
            .filter_map(|t| fit.p_value(t).map(|p| (t, p)))
            .filter(|&(_, p)| p > alpha)
            .fold(None, |best: Option<(Term, f64)>, cand| match best {
                Some(b) if b.1 >= cand.1 => Some(b),
                _ => Some(cand),
            });
        match worst {
            Some((term, _)) => {
                terms.retain(|&t| t != term);
                removed.push(term);
            }
            None => return Ok((fit, removed)),
        }
    }
}

/// Arithmetic mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Empty);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}
