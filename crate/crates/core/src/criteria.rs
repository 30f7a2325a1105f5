//! Closed-form model selection criteria and the argmin selection rule.
//!
//! `Mcp` and `Aicc` are the unbiased baselines for the squared and
//! Kullback-Leibler risks of the maximum likelihood estimator; `Zmcp` and
//! `Zklic` subtract the shrinkage correction that makes them unbiased for
//! the corresponding generalized ridge estimator instead. `Aic` is the
//! conventional multivariate-regression criterion with parameter count
//! `p·k_J + p(p+1)/2`.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, Dyn};

use crate::error::{Error, Result};
use crate::estimators::{shrinkage_weights_with_chol, ShrinkageVariant};
use crate::linmodel::{sufficient_stats, CandidateModel, Dataset, SufficientStats};

/// The five supported selection criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CriterionKind {
    Mcp,
    Zmcp,
    Aic,
    Aicc,
    Zklic,
}

impl CriterionKind {
    pub const ALL: [CriterionKind; 5] = [
        CriterionKind::Mcp,
        CriterionKind::Zmcp,
        CriterionKind::Aic,
        CriterionKind::Aicc,
        CriterionKind::Zklic,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            CriterionKind::Mcp => "mcp",
            CriterionKind::Zmcp => "zmcp",
            CriterionKind::Aic => "aic",
            CriterionKind::Aicc => "aicc",
            CriterionKind::Zklic => "zklic",
        }
    }
}

impl fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for CriterionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mcp" => Ok(CriterionKind::Mcp),
            "zmcp" => Ok(CriterionKind::Zmcp),
            "aic" => Ok(CriterionKind::Aic),
            "aicc" => Ok(CriterionKind::Aicc),
            "zklic" => Ok(CriterionKind::Zklic),
            other => Err(Error::Parse(format!("unknown criterion {other:?}"))),
        }
    }
}

/// One evaluated criterion: the value and, for the shrinkage criteria, the
/// correction that was subtracted from the baseline (zero otherwise).
#[derive(Debug, Clone)]
pub struct CriterionValue {
    pub criterion: CriterionKind,
    pub model: CandidateModel,
    pub value: f64,
    pub correction: f64,
}

// ---------------------------------------------------------------------------
// Scalar formula helpers
// ---------------------------------------------------------------------------

fn mcp_value(n: usize, p: usize, k_full: usize, k_j: usize, trace: f64) -> f64 {
    let (n, p, k_full, k_j) = (n as f64, p as f64, k_full as f64, k_j as f64);
    (n - k_full - p - 1.0) * trace + p * (2.0 * k_j + p + 1.0 - n)
}

fn zmcp_correction(p: usize, trace_lambda_over_c: f64) -> f64 {
    (p as f64 - 2.0) * trace_lambda_over_c
}

fn aic_value(n: usize, p: usize, k_j: usize, log_det_cov: f64) -> f64 {
    let (nf, pf, kf) = (n as f64, p as f64, k_j as f64);
    let params = pf * kf + pf * (pf + 1.0) / 2.0;
    nf * log_det_cov + nf * pf * TAU.ln() + nf * pf + 2.0 * params
}

fn aicc_value(n: usize, p: usize, k_j: usize, log_det_cov: f64) -> f64 {
    let (nf, pf, kf) = (n as f64, p as f64, k_j as f64);
    nf * log_det_cov + nf * pf * TAU.ln() + nf * pf * (nf + kf) / (nf - kf - pf - 1.0)
}

fn zklic_correction(n: usize, p: usize, k_j: usize, trace_lambda_over_c: f64) -> f64 {
    let (nf, pf, kf) = (n as f64, p as f64, k_j as f64);
    nf * (pf - 2.0) / (nf - kf - pf + 1.0) * trace_lambda_over_c
}

/// Log-determinant of `S/n` from a Cholesky factor of `S`.
fn log_det_scaled(chol: &Cholesky<f64, Dyn>, n: usize, p: usize) -> f64 {
    let l = chol.l_dirty();
    let mut log_det = 0.0;
    for i in 0..p {
        log_det += l[(i, i)].ln();
    }
    2.0 * log_det - p as f64 * (n as f64).ln()
}

// ---------------------------------------------------------------------------
// Criterion evaluation
// ---------------------------------------------------------------------------

/// Evaluates one criterion on the sufficient statistics of a candidate.
pub fn evaluate(kind: CriterionKind, stats: &SufficientStats) -> Result<CriterionValue> {
    evaluate_inner(kind, stats, None)
}

pub fn mcp(stats: &SufficientStats) -> Result<CriterionValue> {
    evaluate(CriterionKind::Mcp, stats)
}

pub fn zmcp(stats: &SufficientStats) -> Result<CriterionValue> {
    evaluate(CriterionKind::Zmcp, stats)
}

pub fn aic(stats: &SufficientStats) -> Result<CriterionValue> {
    evaluate(CriterionKind::Aic, stats)
}

pub fn aicc(stats: &SufficientStats) -> Result<CriterionValue> {
    evaluate(CriterionKind::Aicc, stats)
}

pub fn zklic(stats: &SufficientStats) -> Result<CriterionValue> {
    evaluate(CriterionKind::Zklic, stats)
}

/// Evaluation with an optional caller-held Cholesky factor of `S_F`, so
/// drivers evaluating a whole family factorize it once.
pub(crate) fn evaluate_shared(
    kind: CriterionKind,
    stats: &SufficientStats,
    shared_full: Option<&Cholesky<f64, Dyn>>,
) -> Result<CriterionValue> {
    evaluate_inner(kind, stats, shared_full)
}

/// Core evaluation; `shared_full` optionally carries a Cholesky factor of
/// `S_F` so a family evaluation factorizes it once.
fn evaluate_inner(
    kind: CriterionKind,
    stats: &SufficientStats,
    shared_full: Option<&Cholesky<f64, Dyn>>,
) -> Result<CriterionValue> {
    let n = stats.n;
    let p = stats.p;
    let k_j = stats.k_model();
    let k_f = stats.k_full;

    let value = match kind {
        CriterionKind::Mcp | CriterionKind::Zmcp => {
            if n as i64 - k_f as i64 - p as i64 - 1 <= 0 {
                return Err(Error::DegreesOfFreedom(format!(
                    "mcp needs n - k_F - p - 1 > 0 (n={n}, k_F={k_f}, p={p})"
                )));
            }
            let owned;
            let chol = match shared_full {
                Some(c) => c,
                None => {
                    owned = stats.residual_full.clone().cholesky().ok_or_else(|| {
                        Error::SingularCovariance(
                            "full-model residual matrix is not positive definite".into(),
                        )
                    })?;
                    &owned
                }
            };
            let trace = chol.solve(&stats.residual).trace();
            let base = mcp_value(n, p, k_f, k_j, trace);
            match kind {
                CriterionKind::Mcp => base,
                _ => {
                    let weights =
                        shrinkage_weights_with_chol(ShrinkageVariant::Squared, stats, chol)?;
                    let correction = zmcp_correction(p, weights.trace_lambda_over_c());
                    return Ok(CriterionValue {
                        criterion: kind,
                        model: stats.model.clone(),
                        value: base - correction,
                        correction,
                    });
                }
            }
        }
        CriterionKind::Aic | CriterionKind::Aicc | CriterionKind::Zklic => {
            let chol = stats.residual.clone().cholesky().ok_or_else(|| {
                Error::SingularCovariance(
                    "candidate residual matrix is not positive definite".into(),
                )
            })?;
            let log_det_cov = log_det_scaled(&chol, n, p);
            match kind {
                CriterionKind::Aic => aic_value(n, p, k_j, log_det_cov),
                _ => {
                    if n as i64 - k_j as i64 - p as i64 - 1 <= 0 {
                        return Err(Error::DegreesOfFreedom(format!(
                            "aicc needs n - k_J - p - 1 > 0 (n={n}, k_J={k_j}, p={p})"
                        )));
                    }
                    let base = aicc_value(n, p, k_j, log_det_cov);
                    if kind == CriterionKind::Aicc {
                        base
                    } else {
                        let weights =
                            shrinkage_weights_with_chol(ShrinkageVariant::Kl, stats, &chol)?;
                        let correction = zklic_correction(n, p, k_j, weights.trace_lambda_over_c());
                        return Ok(CriterionValue {
                            criterion: kind,
                            model: stats.model.clone(),
                            value: base - correction,
                            correction,
                        });
                    }
                }
            }
        }
    };
    if !value.is_finite() {
        return Err(Error::DegenerateStatistic(format!(
            "{kind} evaluated to a non-finite value"
        )));
    }
    Ok(CriterionValue {
        criterion: kind,
        model: stats.model.clone(),
        value,
        correction: 0.0,
    })
}

// ---------------------------------------------------------------------------
// Selection
// ---------------------------------------------------------------------------

/// Result of selecting over a candidate family: the winner, the full value
/// table, and any members skipped under `allow_partial`.
#[derive(Debug, Clone)]
pub struct Selection {
    pub best: CandidateModel,
    pub table: Vec<CriterionValue>,
    pub skipped: Vec<(CandidateModel, String)>,
}

/// Evaluates `kind` on every family member and returns the minimizer.
/// Ties break toward the smaller candidate, then lexicographically. With
/// `allow_partial`, members that fail the criterion's preconditions are
/// reported and excluded instead of aborting the selection.
pub fn select(
    kind: CriterionKind,
    data: &Dataset,
    family: &[CandidateModel],
    allow_partial: bool,
) -> Result<Selection> {
    if family.is_empty() {
        return Err(Error::InvalidCandidate("empty candidate family".into()));
    }
    let shared_full = match kind {
        CriterionKind::Mcp | CriterionKind::Zmcp => {
            Some(data.residual_full().clone().cholesky().ok_or_else(|| {
                Error::SingularCovariance(
                    "full-model residual matrix is not positive definite".into(),
                )
            })?)
        }
        _ => None,
    };
    let mut table = Vec::with_capacity(family.len());
    let mut skipped = Vec::new();
    for model in family {
        let result = sufficient_stats(data, model)
            .and_then(|stats| evaluate_inner(kind, &stats, shared_full.as_ref()));
        match result {
            Ok(v) => table.push(v),
            Err(e) if allow_partial => skipped.push((model.clone(), e.to_string())),
            Err(e) => return Err(e),
        }
    }
    let best = argmin(&table).ok_or_else(|| {
        Error::InvalidCandidate("every family member failed the criterion preconditions".into())
    })?;
    Ok(Selection {
        best,
        table,
        skipped,
    })
}

/// Deterministic argmin over a value table: smallest value, ties broken by
/// smaller candidate size, then lexicographic index order.
pub fn argmin(table: &[CriterionValue]) -> Option<CandidateModel> {
    let mut best: Option<&CriterionValue> = None;
    for entry in table {
        match best {
            None => best = Some(entry),
            Some(cur) => {
                let better = entry.value < cur.value
                    || (entry.value == cur.value
                        && (entry.model.len() < cur.model.len()
                            || (entry.model.len() == cur.model.len()
                                && entry.model.indices() < cur.model.indices())));
                if better {
                    best = Some(entry);
                }
            }
        }
    }
    best.map(|b| b.model.clone())
}

/// All non-empty subsets of {1, …, k} in size-then-lexicographic order.
/// Guarded at k ≤ 20; exponential enumeration must be an explicit opt-in.
pub fn power_set_family(k: usize) -> Result<Vec<CandidateModel>> {
    if k == 0 {
        return Err(Error::InvalidCandidate("k must be at least 1".into()));
    }
    if k > 20 {
        return Err(Error::InvalidCandidate(format!(
            "power-set enumeration is limited to k <= 20, got k = {k}"
        )));
    }
    let mut family = Vec::with_capacity((1usize << k) - 1);
    for mask in 1u32..(1u32 << k) {
        let indices: Vec<usize> = (0..k)
            .filter(|b| mask & (1 << b) != 0)
            .map(|b| b + 1)
            .collect();
        family.push(CandidateModel::new(indices).expect("mask subsets are valid"));
    }
    family.sort_by(|a, b| {
        a.len()
            .cmp(&b.len())
            .then_with(|| a.indices().cmp(b.indices()))
    });
    Ok(family)
}

/// Nested candidate family {1}, {1,2}, …, {1..k}.
pub fn nested_family(k: usize) -> Vec<CandidateModel> {
    (1..=k).map(CandidateModel::nested).collect()
}
