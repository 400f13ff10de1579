//! Repeated-trial checks of the estimator and the decision rules.

use clot_core::oracle::gaussian_pair_nte;
use clot_core::rng::derive_seed;
use clot_core::sim::{sample_scenario, scenario, GridPoint, Scenario};
use clot_core::{h_summary, nte_estimate, run_cf_clot, variance_components, KernelSpec, Law, TestConfig, TestMode};
use rayon::prelude::*;

fn moderate() -> Scenario {
    scenario("gaussian-moderate").unwrap()
}

fn nte_and_sigma(s: &Scenario, m: usize, seed: u64) -> (f64, f64) {
    let p = sample_scenario(s, m, seed).unwrap();
    let sum = h_summary(&KernelSpec::gaussian(1.0).unwrap(), &p).unwrap();
    (nte_estimate(&sum), variance_components(&sum).unwrap().sigma_hat)
}

#[test]
fn estimator_error_shrinks_at_root_m_rate() {
    let s = moderate();
    let target = gaussian_pair_nte(0.0, 1.0, 1.0, 1.0, 1.0);
    let ms = [125usize, 250, 500, 1000];
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &m in &ms {
        let mut errs: Vec<f64> = (0..150u64)
            .into_par_iter()
            .map(|t| (nte_and_sigma(&s, m, derive_seed(m as u64, t)).0 - target).abs())
            .collect();
        errs.sort_by(f64::total_cmp);
        let median = (errs[74] + errs[75]) / 2.0;
        xs.push((m as f64).ln());
        ys.push(median.ln());
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    assert!((-0.75..=-0.25).contains(&slope), "slope {slope}");
}

#[test]
fn sigma_hat_tracks_the_replication_spread() {
    let s = moderate();
    let m = 300;
    let runs: Vec<(f64, f64)> = (0..400u64).into_par_iter().map(|t| nte_and_sigma(&s, m, 77_000 + t)).collect();
    let scaled: Vec<f64> = runs.iter().map(|r| (m as f64).sqrt() * r.0).collect();
    let mean = scaled.iter().sum::<f64>() / scaled.len() as f64;
    let sd = (scaled.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (scaled.len() - 1) as f64).sqrt();
    let sigma_mean = runs.iter().map(|r| r.1).sum::<f64>() / runs.len() as f64;
    assert!((sigma_mean / sd - 1.0).abs() < 0.12, "sigma_hat {sigma_mean} vs replication sd {sd}");
}

fn rate(s: &Scenario, m: usize, config: TestConfig, trials: u64, seed: u64) -> f64 {
    let spec = KernelSpec::gaussian(1.0).unwrap();
    let hits: usize = (0..trials)
        .into_par_iter()
        .map(|t| {
            let p = sample_scenario(s, m, derive_seed(seed, t)).unwrap();
            let c = config.with_seed(derive_seed(seed ^ 0xa5a5, t));
            run_cf_clot(&spec, &p, &c).unwrap().decision.rejected() as usize
        })
        .sum();
    hits as f64 / trials as f64
}

fn cell(m: usize) -> Vec<GridPoint> {
    vec![GridPoint { m, epsilon: 0.05, alpha: 0.05 }]
}

fn slack(alpha: f64, trials: u64) -> f64 {
    alpha + 3.0 * (alpha * (1.0 - alpha) / trials as f64).sqrt()
}

#[test]
fn permutation_test_is_valid_under_equal_laws() {
    let s = scenario("gaussian-exact-null").unwrap();
    for alpha in [0.05, 0.1] {
        let config = TestConfig::new(0.0, alpha, TestMode::PermutationTwoSample).with_replicates(200);
        let r = rate(&s, 40, config, 300, 11);
        assert!(r <= slack(alpha, 300), "alpha {alpha}: rate {r}");
    }
}

#[test]
fn bootstrap_mode_is_calibrated_at_the_boundary() {
    // ε equal to the population value: the null holds with equality.
    let s = Scenario::new("boundary", Law::gaussian(0.0, 1.0), Law::gaussian(0.5, 1.0), cell(200));
    let eps = gaussian_pair_nte(0.0, 1.0, 0.5, 1.0, 1.0);
    let config = TestConfig::new(eps, 0.05, TestMode::Bootstrap).with_replicates(200);
    let r = rate(&s, 200, config, 300, 12);
    assert!(r <= slack(0.05, 300), "rate {r}");
}

#[test]
fn asymptotic_mode_is_calibrated_at_the_boundary() {
    let s = Scenario::new("boundary", Law::gaussian(0.0, 1.0), Law::gaussian(1.0, 1.0), cell(300));
    let eps = gaussian_pair_nte(0.0, 1.0, 1.0, 1.0, 1.0);
    let r = rate(&s, 300, TestConfig::new(eps, 0.05, TestMode::Asymptotic), 400, 13);
    assert!(r <= slack(0.05, 400), "rate {r}");
}

#[test]
fn power_grows_with_m_under_a_fixed_alternative() {
    let s = moderate();
    let config = TestConfig::new(0.03, 0.05, TestMode::Asymptotic);
    let rates: Vec<f64> = [100usize, 300, 900].iter().map(|&m| rate(&s, m, config, 150, 14)).collect();
    assert!(rates[0] <= rates[1] + 0.05 && rates[1] <= rates[2] + 0.05, "{rates:?}");
    assert!(rates[2] >= 0.9, "{rates:?}");
}

#[test]
fn rejection_is_monotone_in_epsilon_and_alpha() {
    let s = moderate();
    let spec = KernelSpec::gaussian(1.0).unwrap();
    for t in 0..40u64 {
        let p = sample_scenario(&s, 150, t).unwrap();
        let decisions: Vec<bool> = [0.01, 0.03, 0.05, 0.08, 0.12]
            .iter()
            .map(|&e| run_cf_clot(&spec, &p, &TestConfig::new(e, 0.05, TestMode::Asymptotic)).unwrap().decision.rejected())
            .collect();
        assert!(decisions.windows(2).all(|w| w[0] >= w[1]), "seed {t}: {decisions:?}");
        let by_alpha: Vec<bool> = [0.01, 0.05, 0.1, 0.2]
            .iter()
            .map(|&a| run_cf_clot(&spec, &p, &TestConfig::new(0.05, a, TestMode::Asymptotic)).unwrap().decision.rejected())
            .collect();
        assert!(by_alpha.windows(2).all(|w| w[0] <= w[1]), "seed {t}: {by_alpha:?}");
    }
}
