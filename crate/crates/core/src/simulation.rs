//! Scenario construction, data generation, and the two experiment drivers:
//! risk of the selected model and probability of selecting the true model.
//!
//! A scenario pins everything a run needs — design case, dimensions, truth,
//! candidate family, replication count, and seed — so results are
//! reproducible bit for bit. Replication `i` draws only from substreams
//! derived from `(seed, i, purpose)`, never from shared RNG state, which
//! makes runs independent of execution order and thread count.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{self, CriterionKind};
use crate::error::{Error, Result};
use crate::linmodel::{
    read_matrix_csv, submatrix, sufficient_stats, CandidateModel, Dataset, SufficientStats,
};
use crate::risk::{estimator_loss, EstimatorKind, LossKind, RiskEstimate, RiskTableRow, Truth};

/// Default number of design columns in paper-style scenarios.
pub const DEFAULT_K: usize = 10;
/// Default autoregressive correlation of the row covariance.
pub const DEFAULT_RHO: f64 = 0.8;
/// Default replication count.
pub const DEFAULT_REPS: usize = 1000;
/// Fixed arbitrary default seed so out-of-the-box runs are reproducible.
pub const DEFAULT_SEED: u64 = 424242;

// ---------------------------------------------------------------------------
// Reproducible substreams
// ---------------------------------------------------------------------------

/// What a derived random stream is used for; part of the stream key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    Design = 1,
    Response = 2,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the random stream of one `(seed, replication, purpose)` triple.
///
/// The key is folded into a 64-bit state
/// (`seed + φ·(replication+1) + c·purpose` with the splitmix64 constants),
/// which a splitmix64 chain expands into a 256-bit ChaCha8 seed. The
/// derivation is the contract: any two distinct triples get independent
/// streams and a triple's stream never depends on evaluation order.
pub fn rep_rng(seed: u64, replication: u64, purpose: StreamPurpose) -> ChaCha8Rng {
    let mut state = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(replication.wrapping_add(1)))
        .wrapping_add(0xD1B5_4A32_D192_ED03u64.wrapping_mul(purpose as u64));
    let mut bytes = [0u8; 32];
    for chunk in bytes.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}

// ---------------------------------------------------------------------------
// Data generation
// ---------------------------------------------------------------------------

/// Autoregressive correlation matrix with entries `rho^|a−b|`.
pub fn ar_covariance(p: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |a, b| {
        rho.powi((a as i64 - b as i64).unsigned_abs() as i32)
    })
}

/// Vandermonde-style design built from one draw vector: column `b`
/// (1-based) is the elementwise `(b−1)`-th power, so column one is all ones.
pub fn polynomial_design(u: &[f64], k: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(u.len(), k);
    for (r, &v) in u.iter().enumerate() {
        let mut pow = 1.0;
        for c in 0..k {
            a[(r, c)] = pow;
            pow *= v;
        }
    }
    a
}

/// Case 1 design: powers of a single uniform draw `u ~ U(−1, 1)`.
pub fn design_case1<R: Rng>(n: usize, k: usize, rng: &mut R) -> DMatrix<f64> {
    let u: Vec<f64> = (0..n).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect();
    polynomial_design(&u, k)
}

/// Case 2 design: i.i.d. standard normal entries.
pub fn design_case2<R: Rng>(n: usize, k: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(n, k, |_, _| rng.sample(StandardNormal))
}

/// Draws `Y = A_{J*}B_* + E L_Σᵀ` with i.i.d. standard normal `E`, so rows
/// are independent with covariance `Σ`.
pub fn sample_response<R: Rng>(
    design: &DMatrix<f64>,
    truth: &Truth,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let mean = submatrix(design, &truth.model)? * &truth.coefficients;
    let chol = truth.covariance.clone().cholesky().ok_or_else(|| {
        Error::SingularCovariance("true covariance is not positive definite".into())
    })?;
    let n = design.nrows();
    let p = truth.p();
    let noise = DMatrix::<f64>::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok(mean + noise * chol.l().transpose())
}

/// The `5×p` paper-default coefficient matrix: rows `1, −2, 3, −4, 5`
/// replicated across all responses.
pub fn paper_default_coefficients(p: usize) -> DMatrix<f64> {
    let values = [1.0, -2.0, 3.0, -4.0, 5.0];
    DMatrix::from_fn(5, p, |r, _| values[r])
}

/// The default `p/n` sweep: 0.04, 0.06, …, 0.80.
pub fn paper_grid() -> Vec<f64> {
    (0..39).map(|i| 0.04 + 0.02 * i as f64).collect()
}

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

/// How the design matrix is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DesignCase {
    #[serde(rename = "case1")]
    Case1Polynomial,
    #[serde(rename = "case2")]
    Case2Gaussian,
    #[serde(rename = "from_file")]
    FromFile(PathBuf),
}

impl DesignCase {
    /// Short token used in output file names.
    pub fn label(&self) -> &'static str {
        match self {
            DesignCase::Case1Polynomial => "case1",
            DesignCase::Case2Gaussian => "case2",
            DesignCase::FromFile(_) => "file",
        }
    }
}

/// True coefficients in a scenario file: the literal string
/// `"paper-default"` or an explicit row-major matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefficientSpec {
    Named(String),
    Matrix(Vec<Vec<f64>>),
}

impl Default for CoefficientSpec {
    fn default() -> Self {
        CoefficientSpec::Named("paper-default".into())
    }
}

/// The JSON schema of a scenario file. Optional fields default to the
/// paper-style experiment: `k = 10`, `rho = 0.8`, nested candidate family,
/// paper-default coefficients on `J_* = {1,…,5}`, 1000 replications.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub case: DesignCase,
    pub n: usize,
    pub p: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Vec<Vec<usize>>>,
    #[serde(default)]
    pub b_star: CoefficientSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_star: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub grid: Vec<f64>,
    #[serde(default)]
    pub fixed_design: bool,
}

fn default_k() -> usize {
    DEFAULT_K
}
fn default_rho() -> f64 {
    DEFAULT_RHO
}
fn default_reps() -> usize {
    DEFAULT_REPS
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}

/// Loads and parses a scenario file.
pub fn load_scenario_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

impl ScenarioConfig {
    /// Paper-style configuration for one design case and dimension pair.
    pub fn paper_default(case: DesignCase, n: usize, p: usize) -> Self {
        ScenarioConfig {
            case,
            n,
            p,
            k: DEFAULT_K,
            rho: DEFAULT_RHO,
            reps: DEFAULT_REPS,
            seed: DEFAULT_SEED,
            family: None,
            b_star: CoefficientSpec::default(),
            j_star: None,
            grid: Vec::new(),
            fixed_design: false,
        }
    }

    /// Resolves the configuration into a runnable scenario at response
    /// dimension `p` (grid sweeps call this once per grid point).
    pub fn resolve(&self, p: usize) -> Result<Scenario> {
        if self.n == 0 || p == 0 || self.k == 0 {
            return Err(Error::InfeasibleScenario(
                "n, p, and k must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::InfeasibleScenario(format!(
                "rho must lie in [0, 1), got {}",
                self.rho
            )));
        }
        let margin = self.n as i64 - p as i64 - self.k as i64 - 1;
        if margin <= 0 {
            return Err(Error::InfeasibleScenario(format!(
                "n - p - k - 1 = {margin} must be positive (n={}, p={p}, k={})",
                self.n, self.k
            )));
        }
        let coefficients = match &self.b_star {
            CoefficientSpec::Named(name) if name == "paper-default" => {
                if self.k < 5 {
                    return Err(Error::InfeasibleScenario(format!(
                        "paper-default truth uses columns 1..5, but k = {}",
                        self.k
                    )));
                }
                paper_default_coefficients(p)
            }
            CoefficientSpec::Named(other) => {
                return Err(Error::Parse(format!(
                    "unknown b_star spec {other:?}; use \"paper-default\" or a matrix"
                )))
            }
            CoefficientSpec::Matrix(rows) => {
                if rows.is_empty() || rows.iter().any(|r| r.len() != p) {
                    return Err(Error::ShapeMismatch(format!(
                        "b_star matrix must be k_J*×{p}"
                    )));
                }
                DMatrix::from_fn(rows.len(), p, |r, c| rows[r][c])
            }
        };
        let j_star = match &self.j_star {
            Some(indices) => CandidateModel::new(indices.clone())?,
            None => CandidateModel::full(coefficients.nrows()),
        };
        if j_star.len() != coefficients.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "j_star selects {} columns but b_star has {} rows",
                j_star.len(),
                coefficients.nrows()
            )));
        }
        if j_star.max_index() > self.k {
            return Err(Error::InvalidCandidate(format!(
                "true model index {} exceeds k = {}",
                j_star.max_index(),
                self.k
            )));
        }
        let truth = Truth::new(j_star, coefficients, ar_covariance(p, self.rho))?;
        let family = match &self.family {
            Some(members) => members
                .iter()
                .map(|m| {
                    let model = CandidateModel::new(m.clone())?;
                    if model.max_index() > self.k {
                        return Err(Error::InvalidCandidate(format!(
                            "family member {model} exceeds k = {}",
                            self.k
                        )));
                    }
                    Ok(model)
                })
                .collect::<Result<Vec<_>>>()?,
            None => criteria::nested_family(self.k),
        };
        if family.is_empty() {
            return Err(Error::InvalidCandidate("empty candidate family".into()));
        }
        let design_file = match &self.case {
            DesignCase::FromFile(path) => {
                let m = read_matrix_csv(path)?;
                if m.nrows() != self.n || m.ncols() != self.k {
                    return Err(Error::ShapeMismatch(format!(
                        "design file is {}×{}, scenario says n={} k={}",
                        m.nrows(),
                        m.ncols(),
                        self.n,
                        self.k
                    )));
                }
                Some(m)
            }
            _ => None,
        };
        Ok(Scenario {
            case: self.case.clone(),
            n: self.n,
            p,
            k: self.k,
            rho: self.rho,
            truth,
            family,
            reps: self.reps,
            seed: self.seed,
            fixed_design: self.fixed_design,
            design_file,
        })
    }
}

/// A fully resolved simulation experiment.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub case: DesignCase,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub rho: f64,
    pub truth: Truth,
    pub family: Vec<CandidateModel>,
    pub reps: usize,
    pub seed: u64,
    pub fixed_design: bool,
    design_file: Option<DMatrix<f64>>,
}

/// Paper-style scenario for one design case and dimension pair:
/// `k = 10`, nested family `J_1..J_10`, paper-default truth,
/// `Σ_{ab} = 0.8^|a−b|`, 1000 replications.
pub fn default_scenario(case: DesignCase, n: usize, p: usize) -> Result<Scenario> {
    ScenarioConfig::paper_default(case, n, p).resolve(p)
}

/// Generates replication `rep`'s data `(A, Y)` from the scenario's
/// substreams. With `fixed_design` the design comes from substream 0 for
/// every replication; a file-backed design is constant by definition.
pub fn replication_data(scenario: &Scenario, rep: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let design = match (&scenario.case, &scenario.design_file) {
        (DesignCase::FromFile(_), Some(m)) => m.clone(),
        (DesignCase::FromFile(path), None) => {
            return Err(Error::Parse(format!(
                "design file {} was not loaded",
                path.display()
            )))
        }
        (case, _) => {
            let design_rep = if scenario.fixed_design { 0 } else { rep as u64 };
            let mut rng = rep_rng(scenario.seed, design_rep, StreamPurpose::Design);
            match case {
                DesignCase::Case1Polynomial => design_case1(scenario.n, scenario.k, &mut rng),
                DesignCase::Case2Gaussian => design_case2(scenario.n, scenario.k, &mut rng),
                DesignCase::FromFile(_) => unreachable!(),
            }
        }
    };
    let mut rng = rep_rng(scenario.seed, rep as u64, StreamPurpose::Response);
    let response = sample_response(&design, &scenario.truth, &mut rng)?;
    Ok((design, response))
}

// ---------------------------------------------------------------------------
// Experiment drivers
// ---------------------------------------------------------------------------

/// The estimator and loss a criterion's selected-model risk is reported
/// under: squared-risk criteria pair with squared loss, Kullback-Leibler
/// criteria with the KL loss, and each shrinkage criterion with the
/// estimator it is unbiased for.
pub fn designated_target(criterion: CriterionKind) -> (EstimatorKind, LossKind) {
    match criterion {
        CriterionKind::Mcp => (EstimatorKind::Mle, LossKind::Squared),
        CriterionKind::Zmcp => (EstimatorKind::GreSquared, LossKind::Squared),
        CriterionKind::Aic => (EstimatorKind::Mle, LossKind::Kl),
        CriterionKind::Aicc => (EstimatorKind::Mle, LossKind::Kl),
        CriterionKind::Zklic => (EstimatorKind::GreKl, LossKind::Kl),
    }
}

#[derive(Debug, Clone)]
enum RowSpec {
    Selected {
        criterion: CriterionKind,
        estimator: EstimatorKind,
        loss: LossKind,
    },
    Fixed {
        estimator: EstimatorKind,
        loss: LossKind,
        candidate: usize,
    },
}

/// Maximum tolerated share of failed replications per row.
const MAX_FAILURE_SHARE: f64 = 0.01;

/// Runs the selected-model risk experiment: for every criterion, the loss
/// of its designated estimator on the model it selects, plus fixed-model
/// rows for each family member under every requested loss (maximum
/// likelihood and the loss-matched generalized ridge estimator).
pub fn run_risk_experiment(
    scenario: &Scenario,
    criteria_list: &[CriterionKind],
    losses: &[LossKind],
) -> Result<Vec<RiskTableRow>> {
    let mut rows = Vec::new();
    for &criterion in criteria_list {
        let (estimator, loss) = designated_target(criterion);
        rows.push(RowSpec::Selected {
            criterion,
            estimator,
            loss,
        });
    }
    for &loss in losses {
        let matched = match loss {
            LossKind::Squared => EstimatorKind::GreSquared,
            LossKind::Kl | LossKind::Neg2Pred => EstimatorKind::GreKl,
        };
        for estimator in [EstimatorKind::Mle, matched] {
            for candidate in 0..scenario.family.len() {
                rows.push(RowSpec::Fixed {
                    estimator,
                    loss,
                    candidate,
                });
            }
        }
    }

    let per_rep: Vec<Vec<std::result::Result<f64, String>>> = (0..scenario.reps)
        .into_par_iter()
        .map(|rep| risk_replication(scenario, &rows, rep))
        .collect();

    let mut out = Vec::with_capacity(rows.len());
    for (row_idx, row) in rows.iter().enumerate() {
        let mut values = Vec::with_capacity(scenario.reps);
        let mut failures = 0usize;
        let mut first_error = None;
        for rep in &per_rep {
            match &rep[row_idx] {
                Ok(v) => values.push(*v),
                Err(e) => {
                    failures += 1;
                    if first_error.is_none() {
                        first_error = Some(e.clone());
                    }
                }
            }
        }
        if failures as f64 > MAX_FAILURE_SHARE * scenario.reps as f64 {
            return Err(Error::TooManyFailures(format!(
                "{failures}/{} replications failed for row {row_idx}; first error: {}",
                scenario.reps,
                first_error.unwrap_or_default()
            )));
        }
        let estimate = RiskEstimate::from_values(&values)?;
        let (label, model_label, loss) = match row {
            RowSpec::Selected {
                criterion,
                estimator,
                loss,
            } => (
                format!("{}:{}", criterion.label(), estimator.label()),
                "selected".to_string(),
                *loss,
            ),
            RowSpec::Fixed {
                estimator,
                loss,
                candidate,
            } => (
                estimator.label().to_string(),
                scenario.family[*candidate].label(),
                *loss,
            ),
        };
        out.push(RiskTableRow {
            label,
            model_label,
            loss,
            mean: estimate.mean,
            std_error: estimate.std_error,
            reps: estimate.reps,
            failures,
        });
    }
    Ok(out)
}

fn risk_replication(
    scenario: &Scenario,
    rows: &[RowSpec],
    rep: usize,
) -> Vec<std::result::Result<f64, String>> {
    let prepared = prepare_replication(scenario, rep);
    let (data, stats) = match &prepared {
        Ok(v) => v,
        Err(e) => return vec![Err(e.clone()); rows.len()],
    };
    let shared_full = data.residual_full().clone().cholesky();

    rows.iter()
        .map(|row| -> std::result::Result<f64, String> {
            match row {
                RowSpec::Selected {
                    criterion,
                    estimator,
                    loss,
                } => {
                    let chol = shared_full.as_ref().ok_or_else(|| {
                        "full-model residual is not positive definite".to_string()
                    })?;
                    let mut table = Vec::with_capacity(stats.len());
                    for s in stats {
                        let s = s.as_ref().map_err(|e| e.clone())?;
                        table.push(
                            criteria::evaluate_shared(*criterion, s, Some(chol))
                                .map_err(|e| e.to_string())?,
                        );
                    }
                    let best = criteria::argmin(&table)
                        .ok_or_else(|| "empty criterion table".to_string())?;
                    let idx = scenario
                        .family
                        .iter()
                        .position(|m| *m == best)
                        .expect("argmin returns a family member");
                    let s = stats[idx].as_ref().map_err(|e| e.clone())?;
                    estimator_loss(s, *estimator, *loss, &scenario.truth, data.design())
                        .map_err(|e| e.to_string())
                }
                RowSpec::Fixed {
                    estimator,
                    loss,
                    candidate,
                } => {
                    let s = stats[*candidate].as_ref().map_err(|e| e.clone())?;
                    estimator_loss(s, *estimator, *loss, &scenario.truth, data.design())
                        .map_err(|e| e.to_string())
                }
            }
        })
        .collect()
}

type PreparedReplication = (Dataset, Vec<std::result::Result<SufficientStats, String>>);

fn prepare_replication(
    scenario: &Scenario,
    rep: usize,
) -> std::result::Result<PreparedReplication, String> {
    let (design, response) = replication_data(scenario, rep).map_err(|e| e.to_string())?;
    let data = Dataset::new(response, design).map_err(|e| e.to_string())?;
    let stats = scenario
        .family
        .iter()
        .map(|model| sufficient_stats(&data, model).map_err(|e| e.to_string()))
        .collect();
    Ok((data, stats))
}

/// One row of the selection-probability experiment.
#[derive(Debug, Clone)]
pub struct SelectionRow {
    pub criterion: CriterionKind,
    pub probability: f64,
    pub std_error: f64,
    pub reps: usize,
    pub failures: usize,
}

/// Runs the true-model selection experiment: per criterion, the fraction of
/// replications whose selected model equals `J_*` exactly, with a binomial
/// standard error.
pub fn run_selection_experiment(
    scenario: &Scenario,
    criteria_list: &[CriterionKind],
) -> Result<Vec<SelectionRow>> {
    let per_rep: Vec<Vec<std::result::Result<bool, String>>> = (0..scenario.reps)
        .into_par_iter()
        .map(|rep| selection_replication(scenario, criteria_list, rep))
        .collect();

    let mut out = Vec::with_capacity(criteria_list.len());
    for (c_idx, &criterion) in criteria_list.iter().enumerate() {
        let mut hits = 0usize;
        let mut valid = 0usize;
        let mut failures = 0usize;
        let mut first_error = None;
        for rep in &per_rep {
            match &rep[c_idx] {
                Ok(hit) => {
                    valid += 1;
                    if *hit {
                        hits += 1;
                    }
                }
                Err(e) => {
                    failures += 1;
                    if first_error.is_none() {
                        first_error = Some(e.clone());
                    }
                }
            }
        }
        if failures as f64 > MAX_FAILURE_SHARE * scenario.reps as f64 {
            return Err(Error::TooManyFailures(format!(
                "{failures}/{} replications failed for {criterion}; first error: {}",
                scenario.reps,
                first_error.unwrap_or_default()
            )));
        }
        if valid == 0 {
            return Err(Error::TooManyFailures(format!(
                "no successful replications for {criterion}"
            )));
        }
        let probability = hits as f64 / valid as f64;
        let std_error = (probability * (1.0 - probability) / valid as f64).sqrt();
        out.push(SelectionRow {
            criterion,
            probability,
            std_error,
            reps: valid,
            failures,
        });
    }
    Ok(out)
}

fn selection_replication(
    scenario: &Scenario,
    criteria_list: &[CriterionKind],
    rep: usize,
) -> Vec<std::result::Result<bool, String>> {
    let prepared = prepare_replication(scenario, rep);
    let (data, stats) = match &prepared {
        Ok(v) => v,
        Err(e) => return vec![Err(e.clone()); criteria_list.len()],
    };
    let shared_full = data.residual_full().clone().cholesky();

    criteria_list
        .iter()
        .map(|&criterion| -> std::result::Result<bool, String> {
            let chol = shared_full
                .as_ref()
                .ok_or_else(|| "full-model residual is not positive definite".to_string())?;
            let mut table = Vec::with_capacity(stats.len());
            for s in stats {
                let s = s.as_ref().map_err(|e| e.clone())?;
                table.push(
                    criteria::evaluate_shared(criterion, s, Some(chol))
                        .map_err(|e| e.to_string())?,
                );
            }
            let best =
                criteria::argmin(&table).ok_or_else(|| "empty criterion table".to_string())?;
            Ok(best == scenario.truth.model)
        })
        .collect()
}

/// Renders selection rows as CSV with columns
/// `criterion,prob_true_model,std_error,reps,failures`.
pub fn selection_table_csv(rows: &[SelectionRow]) -> String {
    let mut out = String::from("criterion,prob_true_model,std_error,reps,failures\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.criterion.label(),
            row.probability,
            row.std_error,
            row.reps,
            row.failures
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Grid sweeps
// ---------------------------------------------------------------------------

/// One point of a `p/n` sweep with its feasibility margin
/// `n − p − k − 1` (the binding degrees-of-freedom inequality).
#[derive(Debug, Clone, Serialize)]
pub struct GridPoint {
    pub n: usize,
    pub p: usize,
    pub ratio: f64,
    pub margin: i64,
    pub feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

fn grid_point(config: &ScenarioConfig, p: usize, ratio: f64, shrinkage: bool) -> GridPoint {
    let margin = config.n as i64 - p as i64 - config.k as i64 - 1;
    let mut reason = None;
    if margin <= 0 {
        reason = Some(format!("n - p - k - 1 = {margin} is not positive"));
    } else if shrinkage && p < 3 {
        reason = Some(format!("shrinkage criteria need p >= 3, got p = {p}"));
    }
    GridPoint {
        n: config.n,
        p,
        ratio,
        margin,
        feasible: reason.is_none(),
        reason,
    }
}

/// Expands a configuration's `p/n` grid into grid points, marking
/// infeasible points instead of failing the sweep. An empty grid yields the
/// single configured `p`. `shrinkage` says whether the run involves
/// shrinkage criteria or estimators (which require `p ≥ 3`).
pub fn expand_grid(config: &ScenarioConfig, shrinkage: bool) -> Vec<GridPoint> {
    if config.grid.is_empty() {
        let ratio = config.p as f64 / config.n as f64;
        return vec![grid_point(config, config.p, ratio, shrinkage)];
    }
    config
        .grid
        .iter()
        .map(|&ratio| {
            let p = ((config.n as f64 * ratio).round() as usize).max(1);
            grid_point(config, p, ratio, shrinkage)
        })
        .collect()
}

/// Result of a sweep: per-point tables plus the points that were skipped.
#[derive(Debug, Clone)]
pub struct RiskSweep {
    pub completed: Vec<(GridPoint, Vec<RiskTableRow>)>,
    pub skipped: Vec<GridPoint>,
}

#[derive(Debug, Clone)]
pub struct SelectionSweep {
    pub completed: Vec<(GridPoint, Vec<SelectionRow>)>,
    pub skipped: Vec<GridPoint>,
}

fn reject_matrix_truth_with_grid(config: &ScenarioConfig) -> Result<()> {
    if !config.grid.is_empty() && matches!(config.b_star, CoefficientSpec::Matrix(_)) {
        return Err(Error::InfeasibleScenario(
            "an explicit b_star matrix fixes p and cannot be combined with a grid sweep".into(),
        ));
    }
    Ok(())
}

/// Runs the risk experiment over the configuration's grid, skipping
/// infeasible points.
pub fn run_risk_sweep(
    config: &ScenarioConfig,
    criteria_list: &[CriterionKind],
    losses: &[LossKind],
) -> Result<RiskSweep> {
    reject_matrix_truth_with_grid(config)?;
    let shrinkage = !losses.is_empty()
        || criteria_list
            .iter()
            .any(|c| matches!(c, CriterionKind::Zmcp | CriterionKind::Zklic));
    let mut completed = Vec::new();
    let mut skipped = Vec::new();
    for point in expand_grid(config, shrinkage) {
        if !point.feasible {
            skipped.push(point);
            continue;
        }
        let scenario = config.resolve(point.p)?;
        let rows = run_risk_experiment(&scenario, criteria_list, losses)?;
        completed.push((point, rows));
    }
    Ok(RiskSweep { completed, skipped })
}

/// Runs the selection experiment over the configuration's grid, skipping
/// infeasible points.
pub fn run_selection_sweep(
    config: &ScenarioConfig,
    criteria_list: &[CriterionKind],
) -> Result<SelectionSweep> {
    reject_matrix_truth_with_grid(config)?;
    let shrinkage = criteria_list
        .iter()
        .any(|c| matches!(c, CriterionKind::Zmcp | CriterionKind::Zklic));
    let mut completed = Vec::new();
    let mut skipped = Vec::new();
    for point in expand_grid(config, shrinkage) {
        if !point.feasible {
            skipped.push(point);
            continue;
        }
        let scenario = config.resolve(point.p)?;
        let rows = run_selection_experiment(&scenario, criteria_list)?;
        completed.push((point, rows));
    }
    Ok(SelectionSweep { completed, skipped })
}

/// Renders a risk sweep as one CSV with grid columns prepended to the risk
/// table columns.
pub fn risk_sweep_csv(sweep: &RiskSweep) -> String {
    let mut out = String::from(
        "n,p,p_over_n,feasibility_margin,criterion_or_estimator,J,loss,mean,std_error,reps,failures\n",
    );
    for (point, rows) in &sweep.completed {
        for row in rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                point.n,
                point.p,
                point.ratio,
                point.margin,
                row.label,
                row.model_label,
                row.loss.label(),
                row.mean,
                row.std_error,
                row.reps,
                row.failures
            ));
        }
    }
    out
}

/// Renders a selection sweep as one CSV with grid columns prepended.
pub fn selection_sweep_csv(sweep: &SelectionSweep) -> String {
    let mut out = String::from(
        "n,p,p_over_n,feasibility_margin,criterion,prob_true_model,std_error,reps,failures\n",
    );
    for (point, rows) in &sweep.completed {
        for row in rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                point.n,
                point.p,
                point.ratio,
                point.margin,
                row.criterion.label(),
                row.probability,
                row.std_error,
                row.reps,
                row.failures
            ));
        }
    }
    out
}
