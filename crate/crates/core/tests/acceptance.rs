//! Acceptance suite: analytically forced identities, dominance and
//! unbiasedness properties verified by paired Monte Carlo, and the two
//! qualitative trend checks. Each test prints one pass/fail line
//! (`cargo test --test acceptance -- --nocapture` to see them all).

use std::time::Instant;

use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use ridge_select::criteria::{self, CriterionKind};
use ridge_select::estimators::{
    generalized_ridge, mle_covariance, ridge_form, shrinkage_weights, ShrinkageVariant,
};
use ridge_select::linmodel::{submatrix, sufficient_stats, CandidateModel, Dataset};
use ridge_select::risk::{
    estimator_loss, monte_carlo_risk, neg2_predictive_loglik, noncentrality, paired_difference,
    EstimatorKind, LossKind, ModelChoice, RiskEstimate, Truth,
};
use ridge_select::simulation::{
    default_scenario, replication_data, run_selection_experiment, DesignCase, Scenario,
    ScenarioConfig,
};

fn check(num: usize, name: &str, pass: bool, started: Instant, budget_s: f64, details: &str) {
    let elapsed = started.elapsed().as_secs_f64();
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("acceptance {num:02} {name}: {verdict} — {details} [{elapsed:.2}s]");
    assert!(pass, "acceptance {num:02} {name} failed: {details}");
    assert!(
        elapsed < budget_s,
        "acceptance {num:02} {name} exceeded its {budget_s}s budget ({elapsed:.2}s)"
    );
}

fn randn(rng: &mut StdRng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

fn scenario(case: DesignCase, n: usize, p: usize) -> Scenario {
    default_scenario(case, n, p).expect("paper-default scenario is feasible")
}

#[test]
fn acceptance_01_mcp_full_model_identity() {
    let started = Instant::now();
    let (n, p, k) = (50, 5, 8);
    let mut worst: f64 = 0.0;
    let mut rng = StdRng::seed_from_u64(101);
    for _ in 0..100 {
        let data = Dataset::new(randn(&mut rng, n, p), randn(&mut rng, n, k)).unwrap();
        let stats = sufficient_stats(&data, &CandidateModel::full(k)).unwrap();
        let v = criteria::mcp(&stats).unwrap();
        worst = worst.max((v.value - (p * k) as f64).abs());
    }
    check(
        1,
        "mcp full-model identity",
        worst <= 1e-9,
        started,
        1.0,
        &format!("max |MCp(F) - p*k_F| = {worst:.3e} over 100 datasets"),
    );
}

#[test]
fn acceptance_02_ridge_form_equivalence() {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(202);
    let mut accepted = 0;
    let mut worst: f64 = 0.0;
    let mut attempts = 0;
    while accepted < 100 {
        attempts += 1;
        assert!(
            attempts < 5000,
            "could not find 100 instances with c > lambda"
        );
        let data = Dataset::new(randn(&mut rng, 40, 6), randn(&mut rng, 40, 7)).unwrap();
        let j = CandidateModel::new(vec![1, 3, 4, 6]).unwrap();
        let stats = sufficient_stats(&data, &j).unwrap();
        let weights = match shrinkage_weights(ShrinkageVariant::Squared, &stats) {
            Ok(w) => w,
            Err(_) => continue,
        };
        if (0..weights.dim()).any(|i| weights.quad_forms[i] <= weights.lambda[i]) {
            continue;
        }
        accepted += 1;
        let shrunk = generalized_ridge(&stats, &weights).unwrap();
        let a_j = submatrix(data.design(), &j).unwrap();
        let (_, ridge) = ridge_form(&weights, &stats.basis, &a_j, data.response()).unwrap();
        worst = worst.max((&ridge - &shrunk).norm() / shrunk.norm());
    }
    check(
        2,
        "ridge-form vs shrinkage-form equivalence",
        worst <= 1e-8,
        started,
        5.0,
        &format!("max relative Frobenius error = {worst:.3e} over 100 instances"),
    );
}

/// Paired dominance over common replications: returns
/// (label, mean base, mean shrunk, paired mean, paired SE) per candidate.
fn paired_dominance(
    s: &Scenario,
    base: EstimatorKind,
    shrunk: EstimatorKind,
    loss: LossKind,
    candidates: &[CandidateModel],
    reps: usize,
) -> Vec<(String, f64, f64, RiskEstimate)> {
    candidates
        .iter()
        .map(|j| {
            let choice = ModelChoice::Fixed(j.clone());
            let mc_base = monte_carlo_risk(s, base, loss, &choice, reps).unwrap();
            let mc_shrunk = monte_carlo_risk(s, shrunk, loss, &choice, reps).unwrap();
            let paired = paired_difference(&mc_base.losses, &mc_shrunk.losses).unwrap();
            (
                j.to_string(),
                mc_base.estimate.mean,
                mc_shrunk.estimate.mean,
                paired,
            )
        })
        .collect()
}

#[test]
fn acceptance_03_squared_risk_dominance() {
    let started = Instant::now();
    let reps = 1000;
    let mut pass = true;
    let mut details = String::new();
    for case in [DesignCase::Case1Polynomial, DesignCase::Case2Gaussian] {
        let s = scenario(case.clone(), 100, 10);
        let family: Vec<CandidateModel> = (1..=10).map(CandidateModel::nested).collect();
        let rows = paired_dominance(
            &s,
            EstimatorKind::Mle,
            EstimatorKind::GreSquared,
            LossKind::Squared,
            &family,
            reps,
        );
        let worst = rows
            .iter()
            .map(|(_, _, _, d)| d.mean / d.std_error)
            .fold(f64::INFINITY, f64::min);
        for (label, mean_mle, mean_gre, diff) in &rows {
            if !(mean_gre < mean_mle && diff.mean > 2.0 * diff.std_error) {
                pass = false;
                details.push_str(&format!(
                    "{} {label}: mle {mean_mle:.3} vs gre {mean_gre:.3}, diff {}±{}; ",
                    case.label(),
                    diff.mean,
                    diff.std_error
                ));
            }
        }
        details.push_str(&format!("{} min diff/SE = {worst:.1}; ", case.label()));
    }
    check(
        3,
        "squared-risk dominance of the generalized ridge estimator",
        pass,
        started,
        120.0,
        &details,
    );
}

#[test]
fn acceptance_04_kl_risk_dominance() {
    let started = Instant::now();
    let reps = 1000;
    let mut pass = true;
    let mut details = String::new();
    for case in [DesignCase::Case1Polynomial, DesignCase::Case2Gaussian] {
        let s = scenario(case.clone(), 100, 10);
        let overspecified: Vec<CandidateModel> = (5..=10).map(CandidateModel::nested).collect();
        let rows = paired_dominance(
            &s,
            EstimatorKind::Mle,
            EstimatorKind::GreKl,
            LossKind::Kl,
            &overspecified,
            reps,
        );
        let worst = rows
            .iter()
            .map(|(_, _, _, d)| d.mean / d.std_error)
            .fold(f64::INFINITY, f64::min);
        for (label, mean_mle, mean_gre, diff) in &rows {
            if !(mean_gre < mean_mle && diff.mean > 2.0 * diff.std_error) {
                pass = false;
                details.push_str(&format!(
                    "{} {label}: mle {mean_mle:.3} vs gre {mean_gre:.3}, diff {}±{}; ",
                    case.label(),
                    diff.mean,
                    diff.std_error
                ));
            }
        }
        details.push_str(&format!("{} min diff/SE = {worst:.1}; ", case.label()));
    }
    check(
        4,
        "kl-risk dominance of the generalized ridge plug-in",
        pass,
        started,
        120.0,
        &details,
    );
}

#[test]
fn acceptance_05_zmcp_unbiasedness() {
    let started = Instant::now();
    let reps = 2000;
    let s = scenario(DesignCase::Case2Gaussian, 100, 10);
    let mut pass = true;
    let mut details = String::new();
    for alpha in [5usize, 7, 10] {
        let j = CandidateModel::nested(alpha);
        let mut criterion_vals = Vec::with_capacity(reps);
        let mut losses = Vec::with_capacity(reps);
        for rep in 0..reps {
            let (a, y) = replication_data(&s, rep).unwrap();
            let data = Dataset::new(y, a).unwrap();
            let stats = sufficient_stats(&data, &j).unwrap();
            criterion_vals.push(criteria::zmcp(&stats).unwrap().value);
            losses.push(
                estimator_loss(
                    &stats,
                    EstimatorKind::GreSquared,
                    LossKind::Squared,
                    &s.truth,
                    data.design(),
                )
                .unwrap(),
            );
        }
        let est_c = RiskEstimate::from_values(&criterion_vals).unwrap();
        let est_l = RiskEstimate::from_values(&losses).unwrap();
        let combined = (est_c.std_error.powi(2) + est_l.std_error.powi(2)).sqrt();
        let gap = (est_c.mean - est_l.mean).abs();
        if gap > 3.0 * combined {
            pass = false;
        }
        details.push_str(&format!(
            "J_{alpha}: zmcp {:.3} vs loss {:.3} (gap {:.3}, 3SE {:.3}); ",
            est_c.mean,
            est_l.mean,
            gap,
            3.0 * combined
        ));
    }
    check(
        5,
        "zmcp unbiasedness for the shrunk squared risk",
        pass,
        started,
        180.0,
        &details,
    );
}

#[test]
fn acceptance_06_zklic_unbiasedness() {
    let started = Instant::now();
    let reps = 2000;
    let s = scenario(DesignCase::Case2Gaussian, 100, 10);
    let mut pass = true;
    let mut details = String::new();
    for alpha in [5usize, 7] {
        let j = CandidateModel::nested(alpha);
        let mut criterion_vals = Vec::with_capacity(reps);
        let mut neg2s = Vec::with_capacity(reps);
        for rep in 0..reps {
            let (a, y) = replication_data(&s, rep).unwrap();
            let data = Dataset::new(y, a).unwrap();
            let stats = sufficient_stats(&data, &j).unwrap();
            criterion_vals.push(criteria::zklic(&stats).unwrap().value);
            let weights = shrinkage_weights(ShrinkageVariant::Kl, &stats).unwrap();
            let phi = generalized_ridge(&stats, &weights).unwrap();
            let sigma_hat = mle_covariance(&stats);
            neg2s.push(
                neg2_predictive_loglik(&phi, &sigma_hat, &j, &s.truth, data.design()).unwrap(),
            );
        }
        let est_c = RiskEstimate::from_values(&criterion_vals).unwrap();
        let est_l = RiskEstimate::from_values(&neg2s).unwrap();
        let combined = (est_c.std_error.powi(2) + est_l.std_error.powi(2)).sqrt();
        let gap = (est_c.mean - est_l.mean).abs();
        if gap > 3.0 * combined {
            pass = false;
        }
        details.push_str(&format!(
            "J_{alpha}: zklic {:.3} vs -2 pred loglik {:.3} (gap {:.3}, 3SE {:.3}); ",
            est_c.mean,
            est_l.mean,
            gap,
            3.0 * combined
        ));
    }
    check(
        6,
        "zklic unbiasedness for the shrunk predictive risk",
        pass,
        started,
        180.0,
        &details,
    );
}

#[test]
fn acceptance_07_mcp_estimates_mle_risk() {
    let started = Instant::now();
    let reps = 500;
    let s = scenario(DesignCase::Case2Gaussian, 100, 10);
    let mut pass = true;
    let mut details = String::new();
    for alpha in 5..=10usize {
        let j = CandidateModel::nested(alpha);
        let mut vals = Vec::with_capacity(reps);
        for rep in 0..reps {
            let (a, y) = replication_data(&s, rep).unwrap();
            let data = Dataset::new(y, a).unwrap();
            let stats = sufficient_stats(&data, &j).unwrap();
            vals.push(criteria::mcp(&stats).unwrap().value);
        }
        let est = RiskEstimate::from_values(&vals).unwrap();
        let target = (10 * alpha) as f64;
        let gap = (est.mean - target).abs();
        if gap > 3.0 * est.std_error {
            pass = false;
        }
        details.push_str(&format!(
            "J_{alpha}: {:.2} vs {target} (±{:.2}); ",
            est.mean, est.std_error
        ));
    }
    check(
        7,
        "mean mcp matches the analytic mle risk p*k_J",
        pass,
        started,
        60.0,
        &details,
    );
}

#[test]
fn acceptance_08_noncentrality_vanishes() {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(808);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let k = 6;
        let design = randn(&mut rng, 30, k);
        let p = 3;
        let spd = {
            let g = randn(&mut rng, p + 2, p);
            g.transpose() * g + DMatrix::identity(p, p) * 0.5
        };
        let j_star = CandidateModel::new(vec![1, 3]).unwrap();
        let truth = Truth::new(j_star.clone(), randn(&mut rng, 2, p), spd).unwrap();
        // Every superset of {1, 3} within {1..6}.
        for mask in 0u32..16 {
            let mut indices = vec![1usize, 3];
            for (bit, idx) in [2usize, 4, 5, 6].iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    indices.push(*idx);
                }
            }
            indices.sort_unstable();
            let j = CandidateModel::new(indices).unwrap();
            let nc = noncentrality(&design, &j, &truth).unwrap();
            worst = worst.max(nc.omega.norm());
            assert_eq!(nc.rank, 0, "rank must vanish for {j}");
        }
    }
    check(
        8,
        "noncentrality vanishes on overspecified candidates",
        worst <= 1e-9,
        started,
        1.0,
        &format!("max ||Omega_J|| = {worst:.3e} over 100 truths"),
    );
}

#[test]
fn acceptance_09_consistency_trend() {
    let started = Instant::now();
    let reps = 200;
    let criteria_list = [CriterionKind::Zmcp, CriterionKind::Zklic];
    let probs = |n: usize, p: usize| {
        let mut config = ScenarioConfig::paper_default(DesignCase::Case2Gaussian, n, p);
        config.reps = reps;
        let s = config.resolve(p).unwrap();
        run_selection_experiment(&s, &criteria_list).unwrap()
    };
    let at_100 = probs(100, 10);
    let at_400 = probs(400, 40);
    let mut pass = true;
    let mut details = String::new();
    for (row_100, row_400) in at_100.iter().zip(at_400.iter()) {
        let se = (row_100.std_error.powi(2) + row_400.std_error.powi(2)).sqrt();
        let delta = row_400.probability - row_100.probability;
        // Strict increase separated by 2 SE, or non-decrease within SE.
        let ok = delta > 2.0 * se || delta >= -se;
        if !ok {
            pass = false;
        }
        details.push_str(&format!(
            "{}: {:.3} -> {:.3} (2SE {:.3}); ",
            row_100.criterion.label(),
            row_100.probability,
            row_400.probability,
            2.0 * se
        ));
    }
    // At n=400 the shrinkage criterion picks the truth in the majority of
    // replications.
    let zmcp_400 = at_400
        .iter()
        .find(|r| r.criterion == CriterionKind::Zmcp)
        .unwrap();
    if zmcp_400.probability <= 0.5 {
        pass = false;
        details.push_str(&format!(
            "zmcp majority check failed: {:.3}; ",
            zmcp_400.probability
        ));
    }
    check(
        9,
        "selection probability grows with n at fixed p/n",
        pass,
        started,
        300.0,
        &details,
    );
}

#[test]
fn acceptance_10_selected_model_risk_ordering() {
    let started = Instant::now();
    let reps = 500;
    let s = scenario(DesignCase::Case1Polynomial, 100, 10);
    let mc_mle = monte_carlo_risk(
        &s,
        EstimatorKind::Mle,
        LossKind::Squared,
        &ModelChoice::Selected(CriterionKind::Mcp),
        reps,
    )
    .unwrap();
    let mc_gre = monte_carlo_risk(
        &s,
        EstimatorKind::GreSquared,
        LossKind::Squared,
        &ModelChoice::Selected(CriterionKind::Zmcp),
        reps,
    )
    .unwrap();
    let paired = paired_difference(&mc_mle.losses, &mc_gre.losses).unwrap();
    // The shrinkage pipeline must not be worse by more than 2 paired SE.
    let pass = paired.mean >= -2.0 * paired.std_error;
    check(
        10,
        "selected-model risk: zmcp+gre vs mcp+mle",
        pass,
        started,
        120.0,
        &format!(
            "mcp:mle {:.3} vs zmcp:gre {:.3}, paired diff {:.3} ± {:.3}",
            mc_mle.estimate.mean, mc_gre.estimate.mean, paired.mean, paired.std_error
        ),
    );
}

#[test]
fn acceptance_11_predictive_loglik_oracle() {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(1111);
    let samples = 100_000;
    let mut pass = true;
    let mut worst_z: f64 = 0.0;
    for _ in 0..10 {
        let n = 8;
        let p = 3;
        let design = randn(&mut rng, n, 4);
        let spd = {
            let g = randn(&mut rng, p + 2, p);
            g.transpose() * g + DMatrix::identity(p, p) * 0.5
        };
        let truth = Truth::new(
            CandidateModel::new(vec![1, 2]).unwrap(),
            randn(&mut rng, 2, p),
            spd.clone(),
        )
        .unwrap();
        let model = CandidateModel::new(vec![1, 3, 4]).unwrap();
        let phi = randn(&mut rng, 3, p);
        let sigma_hat = {
            let g = randn(&mut rng, p + 2, p);
            g.transpose() * g + DMatrix::identity(p, p) * 0.5
        };
        let closed = neg2_predictive_loglik(&phi, &sigma_hat, &model, &truth, &design).unwrap();

        let mean = submatrix(&design, &truth.model).unwrap() * &truth.coefficients;
        let l_true = truth.covariance.clone().cholesky().unwrap().l();
        let chol_hat = sigma_hat.clone().cholesky().unwrap();
        let log_det: f64 = 2.0 * (0..p).map(|i| chol_hat.l_dirty()[(i, i)].ln()).sum::<f64>();
        let fitted = submatrix(&design, &model).unwrap() * &phi;
        let mut vals = Vec::with_capacity(samples);
        for _ in 0..samples {
            let e = randn(&mut rng, n, p);
            let y = &mean + e * l_true.transpose();
            let resid = &y - &fitted;
            let quad = chol_hat.solve(&(resid.transpose() * &resid)).trace();
            vals.push(n as f64 * log_det + (n * p) as f64 * std::f64::consts::TAU.ln() + quad);
        }
        let est = RiskEstimate::from_values(&vals).unwrap();
        let z = (est.mean - closed).abs() / est.std_error;
        worst_z = worst_z.max(z);
        if z > 3.0 {
            pass = false;
        }
    }
    check(
        11,
        "closed-form predictive log-density vs sampling oracle",
        pass,
        started,
        30.0,
        &format!("max |z| = {worst_z:.2} over 10 instances of 1e5 samples"),
    );
}
