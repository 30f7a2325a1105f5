//! Maximum likelihood and generalized ridge estimators of the coefficient
//! matrix.
//!
//! In the rotated coordinates every row shrinks independently: row i of the
//! generalized ridge estimate is `(1 − λᵢ/cᵢ)·xᵢ`, where `λᵢ` is a fixed
//! shrinkage intensity and `cᵢ = xᵢᵀS⁻¹xᵢ` a data-driven quadratic form. The
//! `Squared` variant takes `S = S_F` and the `Kl` variant `S = S_J`; each
//! uses the intensity that minimizes the corresponding risk. The same
//! estimator can be rewritten as an explicit ridge solve with penalty
//! `K = D⁻¹Λ(C − Λ)⁻¹` in the eigenbasis, which serves as a cross-check.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::linmodel::{SpectralBasis, SufficientStats};

/// Which risk the shrinkage intensities are tuned for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShrinkageVariant {
    /// Squared risk: quadratic forms against the full-model residual `S_F`,
    /// intensity `λᵢ = dᵢ(p−2)/(n−k_F−p+3)`.
    Squared,
    /// Kullback-Leibler risk: quadratic forms against the candidate residual
    /// `S_J`, intensity `λᵢ = dᵢ(p−2)/(n−k_J−p+1)`.
    Kl,
}

impl ShrinkageVariant {
    pub fn label(&self) -> &'static str {
        match self {
            ShrinkageVariant::Squared => "squared",
            ShrinkageVariant::Kl => "kl",
        }
    }
}

/// Diagonal shrinkage weights of one candidate: intensities `lambda` and
/// quadratic forms `quad_forms` (the diagonals of Λ_J and C_J).
#[derive(Debug, Clone)]
pub struct ShrinkageSpec {
    pub variant: ShrinkageVariant,
    pub lambda: DVector<f64>,
    pub quad_forms: DVector<f64>,
}

impl ShrinkageSpec {
    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    /// Per-row multipliers `1 − λᵢ/cᵢ`. May be negative; no positive-part
    /// clamping is applied.
    pub fn shrink_factors(&self) -> DVector<f64> {
        DVector::from_fn(self.lambda.len(), |i, _| {
            1.0 - self.lambda[i] / self.quad_forms[i]
        })
    }

    /// `tr(Λ_J C_J⁻¹) = Σᵢ λᵢ/cᵢ`, the quantity entering the criteria
    /// corrections.
    pub fn trace_lambda_over_c(&self) -> f64 {
        (0..self.lambda.len())
            .map(|i| self.lambda[i] / self.quad_forms[i])
            .sum()
    }
}

/// Diagonal of the equivalent ridge penalty `K_J = D⁻¹Λ(C − Λ)⁻¹` in the
/// eigenbasis, defined when every `cᵢ > λᵢ`.
#[derive(Debug, Clone)]
pub struct RidgeForm {
    pub diag: DVector<f64>,
}

/// Least-squares coefficients `B̂_J = P_J X_J`.
pub fn mle_coefficients(stats: &SufficientStats) -> DMatrix<f64> {
    &stats.basis.vectors * &stats.rotated
}

/// Maximum likelihood covariance `Σ̂_J = S_J / n`.
pub fn mle_covariance(stats: &SufficientStats) -> DMatrix<f64> {
    &stats.residual / stats.n as f64
}

/// Risk-minimizing shrinkage weights for the chosen variant.
pub fn shrinkage_weights(
    variant: ShrinkageVariant,
    stats: &SufficientStats,
) -> Result<ShrinkageSpec> {
    let scale = match variant {
        ShrinkageVariant::Squared => &stats.residual_full,
        ShrinkageVariant::Kl => &stats.residual,
    };
    let chol = scale.clone().cholesky().ok_or_else(|| {
        Error::SingularCovariance(format!(
            "residual matrix for the {} variant is not positive definite",
            variant.label()
        ))
    })?;
    shrinkage_weights_with_chol(variant, stats, &chol)
}

/// Same as [`shrinkage_weights`], reusing a caller-held factorization of
/// `S_F` (Squared) or `S_J` (Kl).
pub(crate) fn shrinkage_weights_with_chol(
    variant: ShrinkageVariant,
    stats: &SufficientStats,
    chol: &Cholesky<f64, Dyn>,
) -> Result<ShrinkageSpec> {
    let n = stats.n as f64;
    let p = stats.p as f64;
    if stats.p < 3 {
        return Err(Error::SteinCondition(format!(
            "shrinkage requires p >= 3, got p = {}",
            stats.p
        )));
    }
    let denom = match variant {
        ShrinkageVariant::Squared => n - stats.k_full as f64 - p + 3.0,
        ShrinkageVariant::Kl => n - stats.k_model() as f64 - p + 1.0,
    };
    if denom <= 0.0 {
        return Err(Error::DegreesOfFreedom(format!(
            "{} variant needs a positive denominator, got {denom}",
            variant.label()
        )));
    }
    let k_j = stats.k_model();
    let mut lambda = DVector::zeros(k_j);
    let mut quad_forms = DVector::zeros(k_j);
    for i in 0..k_j {
        lambda[i] = stats.basis.values[i] * (p - 2.0) / denom;
        let xi = stats.rotated.row(i).transpose();
        let solved = chol.solve(&xi);
        let c = xi.dot(&solved);
        if !c.is_finite() || c <= 0.0 {
            return Err(Error::DegenerateStatistic(format!(
                "quadratic form c_{} = {c} is not positive",
                i + 1
            )));
        }
        quad_forms[i] = c;
    }
    Ok(ShrinkageSpec {
        variant,
        lambda,
        quad_forms,
    })
}

/// Generalized ridge estimate in shrinkage form,
/// `B̂ = P_J (I − Λ_J C_J⁻¹) X_J`.
pub fn generalized_ridge(stats: &SufficientStats, spec: &ShrinkageSpec) -> Result<DMatrix<f64>> {
    if spec.dim() != stats.k_model() {
        return Err(Error::ShapeMismatch(format!(
            "shrinkage weights have {} rows, candidate has {}",
            spec.dim(),
            stats.k_model()
        )));
    }
    let mut shrunk = stats.rotated.clone();
    for i in 0..spec.dim() {
        let c = spec.quad_forms[i];
        if c == 0.0 || !c.is_finite() {
            return Err(Error::DegenerateStatistic(format!(
                "quadratic form c_{} = {c}",
                i + 1
            )));
        }
        let factor = 1.0 - spec.lambda[i] / c;
        for col in 0..shrunk.ncols() {
            shrunk[(i, col)] *= factor;
        }
    }
    Ok(&stats.basis.vectors * shrunk)
}

/// Explicit ridge solve `(A_JᵀA_J + P_J K_J P_Jᵀ)⁻¹ A_JᵀY` with
/// `K_J = D⁻¹Λ(C − Λ)⁻¹`. This is a verification path; it must agree with
/// [`generalized_ridge`] whenever every `cᵢ > λᵢ`.
pub fn ridge_form(
    spec: &ShrinkageSpec,
    basis: &SpectralBasis,
    a_j: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> Result<(RidgeForm, DMatrix<f64>)> {
    let k_j = basis.dim();
    if spec.dim() != k_j {
        return Err(Error::ShapeMismatch(format!(
            "shrinkage weights have {} rows, basis has {k_j}",
            spec.dim()
        )));
    }
    let mut diag = DVector::zeros(k_j);
    for i in 0..k_j {
        let gap = spec.quad_forms[i] - spec.lambda[i];
        if gap <= 0.0 {
            return Err(Error::NonpositivePenalty(format!(
                "c_{} - lambda_{} = {gap} must be positive for the ridge form",
                i + 1,
                i + 1
            )));
        }
        diag[i] = spec.lambda[i] / (basis.values[i] * gap);
    }
    let penalty = &basis.vectors * DMatrix::from_diagonal(&diag) * basis.vectors.transpose();
    let gram = a_j.transpose() * a_j;
    let system = gram + penalty;
    let chol = system.cholesky().ok_or_else(|| {
        Error::SingularCovariance("penalized Gram matrix is not positive definite".into())
    })?;
    let estimate = chol.solve(&(a_j.transpose() * y));
    Ok((RidgeForm { diag }, estimate))
}
