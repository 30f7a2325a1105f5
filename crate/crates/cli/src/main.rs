//! Command-line surface for estimation, criterion evaluation, model
//! selection, and the two simulation experiments.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 validation failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use ridge_select::criteria::{self, CriterionKind};
use ridge_select::estimators::{
    generalized_ridge, mle_coefficients, ridge_form, shrinkage_weights, ShrinkageSpec,
    ShrinkageVariant,
};
use ridge_select::linmodel::{matrix_to_csv, submatrix, sufficient_stats, CandidateModel, Dataset};
use ridge_select::risk::{EstimatorKind, LossKind};
use ridge_select::simulation::{
    load_scenario_config, risk_sweep_csv, run_risk_sweep, run_selection_sweep, selection_sweep_csv,
    ScenarioConfig,
};
use ridge_select::{Error, Result};

#[derive(Parser)]
#[command(
    name = "ridge-select",
    version,
    about = "Generalized ridge estimation and closed-form model selection for multivariate linear regression"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a candidate model and write the coefficient matrix as CSV.
    Fit(FitArgs),
    /// Evaluate selection criteria over a candidate family.
    Criteria(CriteriaArgs),
    /// Select the best candidate under one criterion.
    Select(SelectArgs),
    /// Run the selected-model risk experiment over a scenario grid.
    SimulateRisk(SimulateArgs),
    /// Run the true-model selection experiment over a scenario grid.
    SimulateSelection(SimulateArgs),
    /// Validate a scenario file and report its grid feasibility.
    ValidateScenario(ValidateArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Response matrix CSV (n×p, no header).
    #[arg(long)]
    y: PathBuf,
    /// Design matrix CSV (n×k, no header).
    #[arg(long)]
    a: PathBuf,
    /// Candidate columns, 1-based, e.g. `1,3,5`.
    #[arg(long)]
    j: String,
    /// Estimator: mle, gre-squared, or gre-kl.
    #[arg(long)]
    estimator: String,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Diagnostics sidecar JSON path (defaults to `<out>.diagnostics.json`).
    #[arg(long)]
    diagnostics: Option<PathBuf>,
    /// Also compute the explicit ridge-form estimate and report agreement.
    #[arg(long)]
    check_ridge_form: bool,
}

#[derive(Args)]
struct CriteriaArgs {
    #[arg(long)]
    y: PathBuf,
    #[arg(long)]
    a: PathBuf,
    /// Candidate family JSON: a list of 1-based index lists.
    #[arg(
        long,
        conflicts_with = "power_set",
        required_unless_present = "power_set"
    )]
    family: Option<PathBuf>,
    /// Enumerate every non-empty column subset (guarded at k <= 20).
    #[arg(long)]
    power_set: bool,
    /// Comma-separated criteria (default: all five).
    #[arg(long, default_value = "mcp,zmcp,aic,aicc,zklic")]
    which: String,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    y: PathBuf,
    #[arg(long)]
    a: PathBuf,
    /// Candidate family JSON: a list of 1-based index lists.
    #[arg(
        long,
        conflicts_with = "power_set",
        required_unless_present = "power_set"
    )]
    family: Option<PathBuf>,
    /// Enumerate every non-empty column subset (guarded at k <= 20).
    #[arg(long)]
    power_set: bool,
    /// Criterion to minimize.
    #[arg(long)]
    criterion: String,
    /// Skip family members that fail the criterion's preconditions.
    #[arg(long)]
    allow_partial: bool,
    /// Write the full value table to this CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Override the scenario's p/n grid, e.g. `0.04,0.1,0.2`.
    #[arg(long)]
    grid: Option<String>,
    /// Output directory (default: current directory).
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Comma-separated criteria to evaluate.
    #[arg(long, default_value = "mcp,zmcp,aic,aicc,zklic")]
    criteria: String,
    /// Comma-separated losses for fixed-model rows (risk experiment only).
    #[arg(long, default_value = "squared,kl,neg2pred")]
    losses: String,
    /// Worker threads (0 = auto); RIDGE_SELECT_THREADS overrides.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    scenario: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Criteria(args) => cmd_criteria(args),
        Command::Select(args) => cmd_select(args),
        Command::SimulateRisk(args) => cmd_simulate(args, Experiment::Risk),
        Command::SimulateSelection(args) => cmd_simulate(args, Experiment::Selection),
        Command::ValidateScenario(args) => cmd_validate(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn write_or_print(path: &Option<PathBuf>, content: &str) -> Result<()> {
    match path {
        Some(p) => {
            std::fs::write(p, content)?;
        }
        None => print!("{content}"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

fn cmd_fit(args: FitArgs) -> Result<ExitCode> {
    let data = Dataset::from_csv_files(&args.y, &args.a)?;
    let model = CandidateModel::from_str(&args.j)?;
    let estimator = EstimatorKind::from_str(&args.estimator)?;
    let stats = sufficient_stats(&data, &model)?;

    let (coefficients, weights) = match estimator {
        EstimatorKind::Mle => (mle_coefficients(&stats), None),
        EstimatorKind::GreSquared => {
            let w = shrinkage_weights(ShrinkageVariant::Squared, &stats)?;
            (generalized_ridge(&stats, &w)?, Some(w))
        }
        EstimatorKind::GreKl => {
            let w = shrinkage_weights(ShrinkageVariant::Kl, &stats)?;
            (generalized_ridge(&stats, &w)?, Some(w))
        }
    };

    let mut diagnostics = serde_json::Map::new();
    diagnostics.insert("estimator".into(), estimator.label().into());
    diagnostics.insert("j".into(), model.indices().to_vec().into());
    diagnostics.insert(
        "d".into(),
        stats
            .basis
            .values
            .iter()
            .copied()
            .collect::<Vec<f64>>()
            .into(),
    );
    if let Some(w) = &weights {
        diagnostics.insert(
            "lambda".into(),
            w.lambda.iter().copied().collect::<Vec<f64>>().into(),
        );
        diagnostics.insert(
            "c".into(),
            w.quad_forms.iter().copied().collect::<Vec<f64>>().into(),
        );
        diagnostics.insert(
            "shrink_factors".into(),
            w.shrink_factors()
                .iter()
                .copied()
                .collect::<Vec<f64>>()
                .into(),
        );
        if (0..w.dim()).all(|i| w.quad_forms[i] > w.lambda[i]) {
            let k: Vec<f64> = (0..w.dim())
                .map(|i| w.lambda[i] / (stats.basis.values[i] * (w.quad_forms[i] - w.lambda[i])))
                .collect();
            diagnostics.insert("k_ridge".into(), k.into());
        }
    }
    if args.check_ridge_form {
        let w = weights.as_ref().ok_or_else(|| {
            Error::NonpositivePenalty(
                "--check-ridge-form needs a shrinkage estimator, not mle".into(),
            )
        })?;
        let report = ridge_form_report(&data, &model, &stats.basis, w, &coefficients)?;
        diagnostics.insert("ridge_form_check".into(), report);
    }

    write_or_print(&args.out, &matrix_to_csv(&coefficients))?;
    let diag_path = args.diagnostics.clone().or_else(|| {
        args.out
            .as_ref()
            .map(|p| p.with_extension("diagnostics.json"))
    });
    if let Some(path) = diag_path {
        let text = serde_json::to_string_pretty(&serde_json::Value::Object(diagnostics))
            .expect("diagnostics serialize");
        std::fs::write(path, text)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn ridge_form_report(
    data: &Dataset,
    model: &CandidateModel,
    basis: &ridge_select::linmodel::SpectralBasis,
    weights: &ShrinkageSpec,
    shrunk: &nalgebra::DMatrix<f64>,
) -> Result<serde_json::Value> {
    let a_j = submatrix(data.design(), model)?;
    let (_, ridge) = ridge_form(weights, basis, &a_j, data.response())?;
    let max_rel_error = (&ridge - shrunk).norm() / shrunk.norm().max(1e-300);
    println!("ridge-form agreement: relative error {max_rel_error:.3e} (tolerance 1e-8)");
    Ok(serde_json::json!({
        "max_rel_error": max_rel_error,
        "tolerance": 1e-8,
        "within_tolerance": max_rel_error <= 1e-8,
    }))
}

// ---------------------------------------------------------------------------
// criteria / select
// ---------------------------------------------------------------------------

fn parse_list<T: FromStr<Err = Error>>(list: &str) -> Result<Vec<T>> {
    list.split(',')
        .filter(|tok| !tok.trim().is_empty())
        .map(T::from_str)
        .collect()
}

fn read_family(path: &Path) -> Result<Vec<CandidateModel>> {
    let text = std::fs::read_to_string(path)?;
    let raw: Vec<Vec<usize>> = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    raw.into_iter().map(CandidateModel::new).collect()
}

fn criterion_table_csv(rows: &[criteria::CriterionValue]) -> String {
    let mut out = String::from("criterion,J,value,correction\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.criterion.label(),
            row.model.label(),
            row.value,
            row.correction
        ));
    }
    out
}

fn resolve_family(
    family: &Option<PathBuf>,
    power_set: bool,
    data: &Dataset,
) -> Result<Vec<CandidateModel>> {
    if power_set {
        criteria::power_set_family(data.k())
    } else {
        read_family(family.as_ref().expect("clap enforces one of the two"))
    }
}

fn cmd_criteria(args: CriteriaArgs) -> Result<ExitCode> {
    let data = Dataset::from_csv_files(&args.y, &args.a)?;
    let family = resolve_family(&args.family, args.power_set, &data)?;
    let kinds: Vec<CriterionKind> = parse_list(&args.which)?;
    let mut rows = Vec::new();
    for kind in kinds {
        for model in &family {
            let stats = sufficient_stats(&data, model)?;
            rows.push(criteria::evaluate(kind, &stats)?);
        }
    }
    write_or_print(&args.out, &criterion_table_csv(&rows))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_select(args: SelectArgs) -> Result<ExitCode> {
    let data = Dataset::from_csv_files(&args.y, &args.a)?;
    let family = resolve_family(&args.family, args.power_set, &data)?;
    let kind = CriterionKind::from_str(&args.criterion)?;
    let selection = criteria::select(kind, &data, &family, args.allow_partial)?;
    for (model, reason) in &selection.skipped {
        eprintln!("skipped {model}: {reason}");
    }
    println!("selected: {}", selection.best);
    if args.out.is_some() {
        write_or_print(&args.out, &criterion_table_csv(&selection.table))?;
    }
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

enum Experiment {
    Risk,
    Selection,
}

fn configure_threads(flag: usize) -> Result<()> {
    let threads = match std::env::var("RIDGE_SELECT_THREADS") {
        Ok(text) => text.trim().parse::<usize>().map_err(|_| {
            Error::Parse(format!(
                "RIDGE_SELECT_THREADS must be an integer, got {text:?}"
            ))
        })?,
        Err(_) => flag,
    };
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Parse(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn load_config_with_grid(args: &SimulateArgs) -> Result<ScenarioConfig> {
    let mut config = load_scenario_config(&args.scenario)?;
    if let Some(grid) = &args.grid {
        config.grid = grid
            .split(',')
            .filter(|tok| !tok.trim().is_empty())
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad grid ratio {tok:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
    }
    Ok(config)
}

fn cmd_simulate(args: SimulateArgs, experiment: Experiment) -> Result<ExitCode> {
    configure_threads(args.threads)?;
    let config = load_config_with_grid(&args)?;
    let criteria_list: Vec<CriterionKind> = parse_list(&args.criteria)?;
    std::fs::create_dir_all(&args.out)?;
    let case_label = config.case.label();

    let (stem, csv, points, failures): (String, String, serde_json::Value, usize) = match experiment
    {
        Experiment::Risk => {
            let losses: Vec<LossKind> = parse_list(&args.losses)?;
            let sweep = run_risk_sweep(&config, &criteria_list, &losses)?;
            if sweep.completed.is_empty() {
                return Err(Error::InfeasibleScenario(
                    "no feasible grid point; nothing to run".into(),
                ));
            }
            let failures = sweep
                .completed
                .iter()
                .flat_map(|(_, rows)| rows.iter().map(|r| r.failures))
                .sum();
            let points =
                grid_manifest(sweep.completed.iter().map(|(p, _)| p), sweep.skipped.iter());
            (
                format!("risk_{case_label}"),
                risk_sweep_csv(&sweep),
                points,
                failures,
            )
        }
        Experiment::Selection => {
            let sweep = run_selection_sweep(&config, &criteria_list)?;
            if sweep.completed.is_empty() {
                return Err(Error::InfeasibleScenario(
                    "no feasible grid point; nothing to run".into(),
                ));
            }
            let failures = sweep
                .completed
                .iter()
                .flat_map(|(_, rows)| rows.iter().map(|r| r.failures))
                .sum();
            let points =
                grid_manifest(sweep.completed.iter().map(|(p, _)| p), sweep.skipped.iter());
            (
                format!("selection_{case_label}"),
                selection_sweep_csv(&sweep),
                points,
                failures,
            )
        }
    };

    let csv_path = args.out.join(format!("{stem}.csv"));
    std::fs::write(&csv_path, &csv)?;
    let manifest = serde_json::json!({
        "tool_version": env!("CARGO_PKG_VERSION"),
        "scenario_file": args.scenario.display().to_string(),
        "seed": config.seed,
        "n": config.n,
        "k": config.k,
        "rho": config.rho,
        "reps": config.reps,
        "fixed_design": config.fixed_design,
        "criteria": criteria_list.iter().map(|c| c.label()).collect::<Vec<_>>(),
        "grid": points,
        "replication_failures": failures,
        "outputs": [csv_path.display().to_string()],
    });
    let manifest_path = args.out.join(format!("{stem}.manifest.json"));
    std::fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifest).expect("manifest serialize"),
    )?;
    println!(
        "wrote {} and {}",
        csv_path.display(),
        manifest_path.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn grid_manifest<'a>(
    completed: impl Iterator<Item = &'a ridge_select::simulation::GridPoint>,
    skipped: impl Iterator<Item = &'a ridge_select::simulation::GridPoint>,
) -> serde_json::Value {
    let mut entries: Vec<serde_json::Value> = Vec::new();
    for point in completed {
        entries.push(serde_json::to_value(point).expect("grid point serialize"));
    }
    for point in skipped {
        entries.push(serde_json::to_value(point).expect("grid point serialize"));
    }
    serde_json::Value::Array(entries)
}

// ---------------------------------------------------------------------------
// validate-scenario
// ---------------------------------------------------------------------------

fn cmd_validate(args: ValidateArgs) -> Result<ExitCode> {
    let config = load_scenario_config(&args.scenario)?;
    let scenario = config.resolve(config.p)?;
    println!(
        "scenario ok: case={} n={} p={} k={} rho={} reps={} seed={} family={} truth={}",
        scenario.case.label(),
        scenario.n,
        scenario.p,
        scenario.k,
        scenario.rho,
        scenario.reps,
        scenario.seed,
        scenario.family.len(),
        scenario.truth.model,
    );
    if !config.grid.is_empty() {
        let points = ridge_select::simulation::expand_grid(&config, true);
        let feasible = points.iter().filter(|p| p.feasible).count();
        println!("grid: {} points, {} feasible", points.len(), feasible);
        for point in points.iter().filter(|p| !p.feasible) {
            println!(
                "  skipping p/n={} (p={}): {}",
                point.ratio,
                point.p,
                point.reason.as_deref().unwrap_or("infeasible")
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}
