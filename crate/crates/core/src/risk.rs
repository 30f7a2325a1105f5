//! Exact per-replication loss functions under the squared and
//! Kullback-Leibler risks, the closed-form predictive log-density, the
//! noncentrality diagnostics, and Monte Carlo risk estimation.
//!
//! Squared loss is evaluated in prediction space,
//! `tr(Σ⁻¹(A_JΦ − A_{J*}B_*)ᵀ(A_JΦ − A_{J*}B_*))`, which stays well defined
//! for underspecified candidates. The Kullback-Leibler loss integrates the
//! fresh-data expectation analytically, so a replication's loss needs no
//! inner sampling loop.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::criteria::{self, CriterionKind};
use crate::error::{Error, Result};
use crate::estimators::{
    generalized_ridge, mle_coefficients, mle_covariance, shrinkage_weights, ShrinkageVariant,
};
use crate::linmodel::{submatrix, sufficient_stats, CandidateModel, Dataset, SufficientStats};
use crate::simulation::{replication_data, Scenario};

/// The data-generating truth of a simulation: the true candidate, its
/// coefficient matrix, and the row covariance.
#[derive(Debug, Clone)]
pub struct Truth {
    pub model: CandidateModel,
    /// Coefficients of the true candidate, `k_{J*}×p`.
    pub coefficients: DMatrix<f64>,
    /// Row covariance `Σ`, symmetric positive definite.
    pub covariance: DMatrix<f64>,
}

impl Truth {
    pub fn new(
        model: CandidateModel,
        coefficients: DMatrix<f64>,
        covariance: DMatrix<f64>,
    ) -> Result<Self> {
        if coefficients.nrows() != model.len() {
            return Err(Error::ShapeMismatch(format!(
                "true coefficients have {} rows but the true model selects {} columns",
                coefficients.nrows(),
                model.len()
            )));
        }
        if covariance.nrows() != covariance.ncols() || covariance.nrows() != coefficients.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "covariance is {}×{} but p = {}",
                covariance.nrows(),
                covariance.ncols(),
                coefficients.ncols()
            )));
        }
        if covariance.clone().cholesky().is_none() {
            return Err(Error::SingularCovariance(
                "true covariance is not positive definite".into(),
            ));
        }
        Ok(Truth {
            model,
            coefficients,
            covariance,
        })
    }

    pub fn p(&self) -> usize {
        self.covariance.nrows()
    }
}

/// Mean and standard error of a Monte Carlo estimate.
#[derive(Debug, Clone, Copy)]
pub struct RiskEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub reps: usize,
}

impl RiskEstimate {
    /// Summarizes replication values: mean and `sd/√reps` with the unbiased
    /// sample variance. Needs at least two values.
    pub fn from_values(values: &[f64]) -> Result<RiskEstimate> {
        let reps = values.len();
        if reps < 2 {
            return Err(Error::TooManyFailures(format!(
                "need at least 2 successful replications, got {reps}"
            )));
        }
        let mean = values.iter().sum::<f64>() / reps as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (reps as f64 - 1.0);
        Ok(RiskEstimate {
            mean,
            std_error: (var / reps as f64).sqrt(),
            reps,
        })
    }
}

/// Which estimator a Monte Carlo run evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Mle,
    GreSquared,
    GreKl,
}

impl EstimatorKind {
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorKind::Mle => "mle",
            EstimatorKind::GreSquared => "gre-squared",
            EstimatorKind::GreKl => "gre-kl",
        }
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mle" => Ok(EstimatorKind::Mle),
            "gre-squared" => Ok(EstimatorKind::GreSquared),
            "gre-kl" => Ok(EstimatorKind::GreKl),
            other => Err(Error::Parse(format!("unknown estimator {other:?}"))),
        }
    }
}

/// Which loss a Monte Carlo run evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Squared,
    Kl,
    /// Raw expected `−2 log f̂` without subtracting the truth's entropy:
    /// the series the `kl` loss is the constant-free version of.
    Neg2Pred,
}

impl LossKind {
    pub fn label(&self) -> &'static str {
        match self {
            LossKind::Squared => "squared",
            LossKind::Kl => "kl",
            LossKind::Neg2Pred => "neg2pred",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "squared" => Ok(LossKind::Squared),
            "kl" => Ok(LossKind::Kl),
            "neg2pred" => Ok(LossKind::Neg2Pred),
            other => Err(Error::Parse(format!("unknown loss {other:?}"))),
        }
    }
}

/// Evaluate the loss on a fixed candidate or on the winner of a criterion.
#[derive(Debug, Clone)]
pub enum ModelChoice {
    Fixed(CandidateModel),
    Selected(CriterionKind),
}

// ---------------------------------------------------------------------------
// Loss functions
// ---------------------------------------------------------------------------

/// `A_JΦ − A_{J*}B_*`, the prediction-space gap between a fitted candidate
/// and the truth.
fn mean_gap(
    phi: &DMatrix<f64>,
    model: &CandidateModel,
    truth: &Truth,
    design: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let a_j = submatrix(design, model)?;
    if phi.nrows() != model.len() || phi.ncols() != truth.p() {
        return Err(Error::ShapeMismatch(format!(
            "estimate is {}×{}, expected {}×{}",
            phi.nrows(),
            phi.ncols(),
            model.len(),
            truth.p()
        )));
    }
    let a_star = submatrix(design, &truth.model)?;
    Ok(a_j * phi - a_star * &truth.coefficients)
}

/// Squared loss `tr(Σ⁻¹(A_JΦ − A_{J*}B_*)ᵀ(A_JΦ − A_{J*}B_*))`, valid for
/// underspecified candidates.
pub fn squared_loss(
    phi: &DMatrix<f64>,
    model: &CandidateModel,
    truth: &Truth,
    design: &DMatrix<f64>,
) -> Result<f64> {
    let gap = mean_gap(phi, model, truth, design)?;
    let chol = truth.covariance.clone().cholesky().ok_or_else(|| {
        Error::SingularCovariance("true covariance is not positive definite".into())
    })?;
    // tr(Σ⁻¹GᵀG) = ‖L⁻¹Gᵀ‖²_F, which is nonnegative by construction.
    let solved = chol
        .l_dirty()
        .solve_lower_triangular(&gap.transpose())
        .ok_or_else(|| Error::SingularCovariance("Cholesky factor is singular".into()))?;
    Ok(solved.norm_squared())
}

fn log_det_from_chol(m: &DMatrix<f64>) -> Result<(nalgebra::Cholesky<f64, nalgebra::Dyn>, f64)> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SingularCovariance("covariance is not positive definite".into()))?;
    let l = chol.l_dirty();
    let log_det = 2.0 * (0..m.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>();
    Ok((chol, log_det))
}

/// Exact expectation over fresh data `Ỹ ~ N(A_{J*}B_*, Σ⊗I)` of
/// `−2 log f(Ỹ | Φ, Σ̂)`:
/// `n log|Σ̂| + np log 2π + n tr(Σ̂⁻¹Σ) + tr(Σ̂⁻¹GᵀG)` with the mean gap `G`.
pub fn neg2_predictive_loglik(
    phi: &DMatrix<f64>,
    sigma_hat: &DMatrix<f64>,
    model: &CandidateModel,
    truth: &Truth,
    design: &DMatrix<f64>,
) -> Result<f64> {
    let n = design.nrows() as f64;
    let p = truth.p() as f64;
    if sigma_hat.nrows() != truth.p() || sigma_hat.ncols() != truth.p() {
        return Err(Error::ShapeMismatch(format!(
            "plug-in covariance is {}×{}, expected {}×{}",
            sigma_hat.nrows(),
            sigma_hat.ncols(),
            truth.p(),
            truth.p()
        )));
    }
    let gap = mean_gap(phi, model, truth, design)?;
    let (chol, log_det) = log_det_from_chol(sigma_hat)?;
    let trace_cov = chol.solve(&truth.covariance).trace();
    let trace_gap = chol.solve(&(gap.transpose() * &gap)).trace();
    Ok(n * log_det + n * p * std::f64::consts::TAU.ln() + n * trace_cov + trace_gap)
}

/// Expected value of `−2 log f` under the truth itself:
/// `n log|Σ| + np log 2π + np`.
fn neg2_entropy(truth: &Truth, n: usize) -> Result<f64> {
    let (_, log_det) = log_det_from_chol(&truth.covariance)?;
    let (n, p) = (n as f64, truth.p() as f64);
    Ok(n * log_det + n * p * std::f64::consts::TAU.ln() + n * p)
}

/// Per-replication Kullback-Leibler loss of a plug-in predictive density:
/// half the excess of its expected `−2 log f̂` over the truth's.
pub fn kl_loss(
    phi: &DMatrix<f64>,
    sigma_hat: &DMatrix<f64>,
    model: &CandidateModel,
    truth: &Truth,
    design: &DMatrix<f64>,
) -> Result<f64> {
    let plug_in = neg2_predictive_loglik(phi, sigma_hat, model, truth, design)?;
    let baseline = neg2_entropy(truth, design.nrows())?;
    Ok(0.5 * (plug_in - baseline))
}

// ---------------------------------------------------------------------------
// Noncentrality
// ---------------------------------------------------------------------------

/// Noncentrality diagnostics of a candidate: the `r_J×r_J` matrices
/// `Ω_J` and `Ξ_J = Ω_J/(np)` plus the numerical rank of `Ω_J`.
#[derive(Debug, Clone)]
pub struct Noncentrality {
    pub omega: DMatrix<f64>,
    pub xi: DMatrix<f64>,
    pub rank: usize,
}

/// Builds the noncentrality matrix of a candidate from the spectral
/// factorization of `Σ^{-1/2}(A_{J*}B_*)ᵀ(H_F − H_J)(A_{J*}B_*)Σ^{-1/2}`,
/// keeping the top `r_J = k_F − k_J` eigenpairs. `Ω_J` vanishes exactly when
/// the candidate contains the true model.
pub fn noncentrality(
    design: &DMatrix<f64>,
    model: &CandidateModel,
    truth: &Truth,
) -> Result<Noncentrality> {
    let k_f = design.ncols();
    let k_j = model.len();
    if model.max_index() > k_f {
        return Err(Error::InvalidCandidate(format!(
            "index {} out of range for {k_f} design columns",
            model.max_index()
        )));
    }
    let n = design.nrows();
    let p = truth.p();
    if k_j >= k_f {
        // J = F: no dropped directions, the matrices are empty.
        return Ok(Noncentrality {
            omega: DMatrix::zeros(0, 0),
            xi: DMatrix::zeros(0, 0),
            rank: 0,
        });
    }
    let r_j = k_f - k_j;

    let mean = submatrix(design, &truth.model)? * &truth.coefficients;
    let q_f = design.clone().qr().q();
    let a_j = submatrix(design, model)?;
    let q_j = a_j.clone().qr().q();
    let projected = &q_f * (q_f.transpose() * &mean) - &q_j * (q_j.transpose() * &mean);
    let m = {
        let raw = mean.transpose() * &projected;
        let t = raw.transpose();
        (raw + t) * 0.5
    };

    // Symmetric inverse square root of the true covariance.
    let eig = SymmetricEigen::new(truth.covariance.clone());
    if eig.eigenvalues.min() <= 0.0 {
        return Err(Error::SingularCovariance(
            "true covariance is not positive definite".into(),
        ));
    }
    let mut inv_sqrt = eig.eigenvectors.clone();
    for c in 0..p {
        let s = eig.eigenvalues[c].sqrt().recip();
        for r in 0..p {
            inv_sqrt[(r, c)] *= s;
        }
    }
    let inv_sqrt = &inv_sqrt * eig.eigenvectors.transpose();
    let omega_tilde = {
        let raw = &inv_sqrt * m * &inv_sqrt;
        let t = raw.transpose();
        (raw + t) * 0.5
    };

    // Top r_J eigenvalues carry the whole spectrum: the matrix has rank at
    // most min(r_J, p) because H_F − H_J is a projector of rank r_J. When
    // r_J > p the remaining diagonal of Ω_J is zero.
    let mut spectrum: Vec<f64> = SymmetricEigen::new(omega_tilde)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    spectrum.sort_by(|a, b| b.partial_cmp(a).unwrap());
    spectrum.truncate(r_j);
    spectrum.resize(r_j, 0.0);
    let omega = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(spectrum.clone()));
    let xi = &omega / (n as f64 * p as f64);
    // Rank tolerance is anchored to the unprojected noncentrality scale
    // tr(Σ⁻¹(A_{J*}B_*)ᵀ(A_{J*}B_*)), so a numerically zero Ω_J does not
    // count its own rounding noise as rank.
    let scale = (&mean * &inv_sqrt).norm_squared().max(spectrum[0].abs());
    let rank = spectrum.iter().filter(|v| **v > 1e-10 * scale).count();
    Ok(Noncentrality { omega, xi, rank })
}

// ---------------------------------------------------------------------------
// Monte Carlo estimation
// ---------------------------------------------------------------------------

/// Computes the chosen estimator on a candidate's statistics and evaluates
/// the chosen per-replication loss against the truth.
pub fn estimator_loss(
    stats: &SufficientStats,
    estimator: EstimatorKind,
    loss: LossKind,
    truth: &Truth,
    design: &DMatrix<f64>,
) -> Result<f64> {
    let phi = match estimator {
        EstimatorKind::Mle => mle_coefficients(stats),
        EstimatorKind::GreSquared => {
            let weights = shrinkage_weights(ShrinkageVariant::Squared, stats)?;
            generalized_ridge(stats, &weights)?
        }
        EstimatorKind::GreKl => {
            let weights = shrinkage_weights(ShrinkageVariant::Kl, stats)?;
            generalized_ridge(stats, &weights)?
        }
    };
    match loss {
        LossKind::Squared => squared_loss(&phi, &stats.model, truth, design),
        LossKind::Kl => {
            let sigma_hat = mle_covariance(stats);
            kl_loss(&phi, &sigma_hat, &stats.model, truth, design)
        }
        LossKind::Neg2Pred => {
            let sigma_hat = mle_covariance(stats);
            neg2_predictive_loglik(&phi, &sigma_hat, &stats.model, truth, design)
        }
    }
}

/// Outcome of a Monte Carlo risk run: the summary estimate plus the
/// per-replication losses (`None` marks a failed replication), aligned by
/// replication index so runs sharing a scenario seed can be paired.
#[derive(Debug, Clone)]
pub struct MonteCarloRisk {
    pub estimate: RiskEstimate,
    pub losses: Vec<Option<f64>>,
    pub failures: usize,
}

/// Maximum tolerated share of failed replications.
const MAX_FAILURE_SHARE: f64 = 0.01;

/// Monte Carlo estimate of a risk: draws data per replication from the
/// scenario's substreams, fits the estimator (optionally after
/// criterion-based selection), and summarizes the per-replication losses.
/// Deterministic given the scenario seed, regardless of thread count.
pub fn monte_carlo_risk(
    scenario: &Scenario,
    estimator: EstimatorKind,
    loss: LossKind,
    choice: &ModelChoice,
    reps: usize,
) -> Result<MonteCarloRisk> {
    if reps < 2 {
        return Err(Error::InfeasibleScenario(format!(
            "need at least 2 replications, got {reps}"
        )));
    }
    let outcomes: Vec<std::result::Result<f64, String>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            replication_loss(scenario, estimator, loss, choice, rep).map_err(|e| e.to_string())
        })
        .collect();
    summarize(outcomes)
}

fn replication_loss(
    scenario: &Scenario,
    estimator: EstimatorKind,
    loss: LossKind,
    choice: &ModelChoice,
    rep: usize,
) -> Result<f64> {
    let (design, response) = replication_data(scenario, rep)?;
    let data = Dataset::new(response, design)?;
    let model = match choice {
        ModelChoice::Fixed(j) => j.clone(),
        ModelChoice::Selected(kind) => {
            criteria::select(*kind, &data, &scenario.family, false)?.best
        }
    };
    let stats = sufficient_stats(&data, &model)?;
    estimator_loss(&stats, estimator, loss, &scenario.truth, data.design())
}

fn summarize(outcomes: Vec<std::result::Result<f64, String>>) -> Result<MonteCarloRisk> {
    let reps = outcomes.len();
    let mut losses = Vec::with_capacity(reps);
    let mut values = Vec::with_capacity(reps);
    let mut first_error = None;
    for outcome in outcomes {
        match outcome {
            Ok(v) => {
                losses.push(Some(v));
                values.push(v);
            }
            Err(e) => {
                losses.push(None);
                if first_error.is_none() {
                    first_error = Some(e);
                }
            }
        }
    }
    let failures = reps - values.len();
    if failures as f64 > MAX_FAILURE_SHARE * reps as f64 {
        return Err(Error::TooManyFailures(format!(
            "{failures}/{reps} replications failed; first error: {}",
            first_error.unwrap_or_default()
        )));
    }
    let estimate = RiskEstimate::from_values(&values)?;
    Ok(MonteCarloRisk {
        estimate,
        losses,
        failures,
    })
}

/// Mean and standard error of the replication-wise difference `a − b`,
/// over replications where both runs succeeded.
pub fn paired_difference(a: &[Option<f64>], b: &[Option<f64>]) -> Result<RiskEstimate> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "paired runs have {} and {} replications",
            a.len(),
            b.len()
        )));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b.iter())
        .filter_map(|(x, y)| match (x, y) {
            (Some(x), Some(y)) => Some(x - y),
            _ => None,
        })
        .collect();
    RiskEstimate::from_values(&diffs)
}

// ---------------------------------------------------------------------------
// Risk tables
// ---------------------------------------------------------------------------

/// One row of a risk table, keyed by the criterion or estimator it belongs
/// to and the candidate it was evaluated on (`selected` for post-selection
/// rows).
#[derive(Debug, Clone)]
pub struct RiskTableRow {
    pub label: String,
    pub model_label: String,
    pub loss: LossKind,
    pub mean: f64,
    pub std_error: f64,
    pub reps: usize,
    pub failures: usize,
}

/// Renders risk rows as CSV with the fixed column set
/// `criterion_or_estimator,J,loss,mean,std_error,reps,failures`.
pub fn risk_table_csv(rows: &[RiskTableRow]) -> String {
    let mut out = String::from("criterion_or_estimator,J,loss,mean,std_error,reps,failures\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.label,
            row.model_label,
            row.loss.label(),
            row.mean,
            row.std_error,
            row.reps,
            row.failures
        ));
    }
    out
}
