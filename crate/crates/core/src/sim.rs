//! Synthetic scenarios and repeated-trial experiments: Type-I error under
//! equal laws, power under separated laws, and the shape of the studentized
//! statistic.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ClotError, Result};
use crate::hypothesis::{run_cf_clot, standard_normal_quantile, TestConfig, TestMode};
use crate::kernel::{BandwidthPolicy, KernelPolicy};
use crate::law::Law;
use crate::oracle::{population_nte_oracle, OracleEstimate};
use crate::pof::{Column, ColumnRole, Dataset, LinearModel, LinearTerm};
use crate::rng::derive_seed;
use crate::stats::{h_summary, nte_estimate, variance_components, PairedOutcomes};

/// Draws used for oracle values that gate experiments.
pub const ORACLE_DRAWS: usize = 400_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub m: usize,
    pub epsilon: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub factual: Law,
    pub counterfactual: Law,
    pub dim: usize,
    pub kernel: KernelPolicy,
    pub grid: Vec<GridPoint>,
    /// Decision rule for cells with ε > 0; ε = 0 cells always use the
    /// permutation test.
    pub mode: TestMode,
    pub replicates: usize,
}

fn grid(ms: &[usize], epsilons: &[f64], alphas: &[f64]) -> Vec<GridPoint> {
    let mut out = Vec::new();
    for &epsilon in epsilons {
        for &alpha in alphas {
            for &m in ms {
                out.push(GridPoint { m, epsilon, alpha });
            }
        }
    }
    out
}

impl Scenario {
    pub fn new(name: &str, factual: Law, counterfactual: Law, grid: Vec<GridPoint>) -> Self {
        Scenario {
            name: name.to_string(),
            factual,
            counterfactual,
            dim: 1,
            kernel: KernelPolicy::fixed_gaussian(1.0),
            grid,
            mode: TestMode::Asymptotic,
            replicates: 200,
        }
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.factual.validate()?;
        self.counterfactual.validate()?;
        if self.grid.is_empty() {
            return Err(ClotError::InvalidConfig(format!("scenario `{}` has an empty grid", self.name)));
        }
        if self.dim == 0 {
            return Err(ClotError::InvalidConfig("scenario dimension must be positive".into()));
        }
        Ok(())
    }

    pub fn is_null(&self) -> bool {
        self.factual == self.counterfactual
    }

    /// Monte-Carlo population N-TE. Needs a fixed bandwidth.
    pub fn oracle(&self, draws: usize, seed: u64) -> Result<OracleEstimate> {
        let spec = match self.kernel.bandwidth {
            BandwidthPolicy::Fixed(_) => self.kernel.resolve_fixed()?,
            BandwidthPolicy::Median => {
                return Err(ClotError::Precondition(format!(
                    "scenario `{}` has a data-dependent bandwidth; its population value is undefined",
                    self.name
                )))
            }
        };
        population_nte_oracle(&self.factual, &self.counterfactual, self.dim, &spec, draws, seed)
    }

    fn config_for(&self, point: &GridPoint, seed: u64) -> TestConfig {
        let mode = if point.epsilon == 0.0 {
            TestMode::PermutationTwoSample
        } else {
            self.mode
        };
        TestConfig::new(point.epsilon, point.alpha, mode)
            .with_replicates(self.replicates)
            .with_seed(seed)
    }
}

/// Named scenarios available to the calibration commands.
pub fn registry() -> Vec<Scenario> {
    let std_normal = Law::gaussian(0.0, 1.0);
    vec![
        Scenario::new("gaussian-null", std_normal, std_normal, grid(&[500], &[0.05], &[0.01, 0.05])),
        Scenario::new("gaussian-null-2d", std_normal, std_normal, grid(&[200], &[0.05], &[0.05])).with_dim(2),
        Scenario::new(
            "two-point-null",
            Law::TwoPoint { p: 0.3, a: 0.0, b: 1.0 },
            Law::TwoPoint { p: 0.3, a: 0.0, b: 1.0 },
            grid(&[200], &[0.05], &[0.05]),
        ),
        Scenario::new("point-mass-null", Law::point_mass(0.5), Law::point_mass(0.5), grid(&[100], &[0.05], &[0.05])),
        Scenario::new("gaussian-exact-null", std_normal, std_normal, grid(&[100], &[0.0], &[0.05])),
        Scenario::new(
            "gaussian-shift",
            std_normal,
            Law::gaussian(2.0, 1.0),
            grid(&[100, 250, 500], &[0.1], &[0.05]),
        ),
        Scenario::new(
            "gaussian-moderate",
            std_normal,
            Law::gaussian(1.0, 1.0),
            grid(&[250, 500, 1000], &[0.03], &[0.05]),
        ),
        Scenario::new(
            "far-alternative",
            Law::point_mass(0.0),
            Law::point_mass(10.0),
            grid(&[10, 100, 500], &[0.1], &[0.05]),
        ),
    ]
}

pub fn scenario(name: &str) -> Result<Scenario> {
    registry()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| ClotError::UnknownScenario(name.to_string()))
}

pub fn scenario_names() -> Vec<String> {
    registry().into_iter().map(|s| s.name).collect()
}

/// `m` factual draws then `m` counterfactual draws from one seeded stream.
pub fn sample_scenario(scenario: &Scenario, m: usize, seed: u64) -> Result<PairedOutcomes> {
    scenario.validate()?;
    if m < 3 {
        return Err(ClotError::TooFewSamples {
            required: 3,
            actual: m,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = scenario.factual.sample(&mut rng, m, scenario.dim)?;
    let c = scenario.counterfactual.sample(&mut rng, m, scenario.dim)?;
    PairedOutcomes::new(f, c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub m: usize,
    pub epsilon: f64,
    pub alpha: f64,
    pub trials: usize,
    pub rejections: usize,
    pub rejection_rate: f64,
    /// Binomial standard error of the rate.
    pub std_error: f64,
}

/// Rejection rate at one grid cell. Trial `t` samples with seed
/// `derive_seed(seed, 2t)` and tests with `derive_seed(seed, 2t + 1)`.
pub fn rejection_rate(scenario: &Scenario, point: &GridPoint, trials: usize, seed: u64) -> Result<RateRow> {
    if trials == 0 {
        return Err(ClotError::InvalidConfig("trials must be positive".into()));
    }
    let rejected: Vec<bool> = (0..trials as u64)
        .into_par_iter()
        .map(|t| -> Result<bool> {
            let paired = sample_scenario(scenario, point.m, derive_seed(seed, 2 * t))?;
            let (spec, _) = scenario.kernel.resolve(&paired)?;
            let config = scenario.config_for(point, derive_seed(seed, 2 * t + 1));
            Ok(run_cf_clot(&spec, &paired, &config)?.decision.rejected())
        })
        .collect::<Result<_>>()?;
    let rejections = rejected.iter().filter(|&&r| r).count();
    let rate = rejections as f64 / trials as f64;
    Ok(RateRow {
        m: point.m,
        epsilon: point.epsilon,
        alpha: point.alpha,
        trials,
        rejections,
        rejection_rate: rate,
        std_error: (rate * (1.0 - rate) / trials as f64).sqrt(),
    })
}

fn grid_rates(scenario: &Scenario, trials: usize, seed: u64) -> Result<Vec<RateRow>> {
    scenario
        .grid
        .iter()
        .enumerate()
        .map(|(i, p)| rejection_rate(scenario, p, trials, derive_seed(seed, i as u64)))
        .collect()
}

/// Empirical Type-I error per grid cell for a scenario with equal laws.
pub fn null_distribution_experiment(scenario: &Scenario, trials: usize, seed: u64) -> Result<Vec<RateRow>> {
    scenario.validate()?;
    if !scenario.is_null() {
        return Err(ClotError::Precondition(format!(
            "scenario `{}` does not have equal laws",
            scenario.name
        )));
    }
    grid_rates(scenario, trials, seed)
}

/// Empirical power per grid cell. Every cell's ε must sit more than three
/// oracle standard errors below the population N-TE.
pub fn power_experiment(scenario: &Scenario, trials: usize, seed: u64) -> Result<Vec<RateRow>> {
    scenario.validate()?;
    let oracle = scenario.oracle(ORACLE_DRAWS, derive_seed(seed, u64::MAX))?;
    for p in &scenario.grid {
        if oracle.value - p.epsilon <= 3.0 * oracle.std_error {
            return Err(ClotError::Precondition(format!(
                "scenario `{}` is not an alternative at epsilon = {}: population N-TE {} ± {}",
                scenario.name, p.epsilon, oracle.value, oracle.std_error
            )));
        }
    }
    grid_rates(scenario, trials, seed)
}

/// Null experiment for equal laws, power experiment otherwise.
pub fn calibrate(scenario: &Scenario, trials: usize, seed: u64) -> Result<Vec<RateRow>> {
    if scenario.is_null() {
        null_distribution_experiment(scenario, trials, seed)
    } else {
        power_experiment(scenario, trials, seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalityDiagnostics {
    pub m: usize,
    pub trials: usize,
    pub oracle: f64,
    pub mean: f64,
    pub sd: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// Largest gap between sorted values and standard normal quantiles over
    /// the central 90% of the sample.
    pub qq_max_deviation: f64,
}

impl NormalityDiagnostics {
    pub fn magnitudes(&self) -> [f64; 3] {
        [self.skewness.abs(), self.excess_kurtosis.abs(), self.qq_max_deviation]
    }

    /// How many of the three diagnostics are strictly larger here than in `other`.
    pub fn worse_count(&self, other: &NormalityDiagnostics) -> usize {
        self.magnitudes()
            .iter()
            .zip(other.magnitudes())
            .filter(|(a, b)| **a > *b)
            .count()
    }
}

pub fn normality_diagnostics(values: &[f64]) -> (f64, f64, f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let moment = |k: i32| values.iter().map(|v| (v - mean).powi(k)).sum::<f64>() / n;
    let (m2, m3, m4) = (moment(2), moment(3), moment(4));
    let skew = m3 / m2.powf(1.5);
    let kurt = m4 / (m2 * m2) - 3.0;

    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let len = sorted.len();
    let (lo, hi) = ((0.05 * len as f64) as usize, (0.95 * len as f64).ceil() as usize);
    let qq = (lo..hi.min(len))
        .map(|i| (sorted[i] - standard_normal_quantile((i as f64 + 0.5) / len as f64)).abs())
        .fold(0.0, f64::max);
    (mean, m2.sqrt(), skew, kurt, qq)
}

/// Collects `√m (N-TE estimate - ε') / σ̂` over seeded trials, where `ε'` is
/// the scenario's population value.
pub fn asymptotic_normality_check(
    scenario: &Scenario,
    m: usize,
    trials: usize,
    seed: u64,
) -> Result<NormalityDiagnostics> {
    scenario.validate()?;
    if trials < 10 {
        return Err(ClotError::InvalidConfig("need at least 10 trials".into()));
    }
    let oracle = scenario.oracle(ORACLE_DRAWS * 5, derive_seed(seed, u64::MAX))?;
    let margin = 3.0 * oracle.std_error;
    if !(oracle.value > margin && oracle.value < 1.0 - margin) {
        return Err(ClotError::Precondition(format!(
            "population N-TE {} ± {} is not bounded away from 0 and 1",
            oracle.value, oracle.std_error
        )));
    }
    let root_m = (m as f64).sqrt();
    let z: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| -> Result<f64> {
            let paired = sample_scenario(scenario, m, derive_seed(seed, t))?;
            let (spec, _) = scenario.kernel.resolve(&paired)?;
            let summary = h_summary(&spec, &paired)?;
            let vc = variance_components(&summary)?;
            if vc.sigma_hat <= 0.0 {
                return Err(ClotError::Precondition(format!("trial {t}: degenerate sigma_hat = 0")));
            }
            Ok(root_m * (nte_estimate(&summary) - oracle.value) / vc.sigma_hat)
        })
        .collect::<Result<_>>()?;
    let (mean, sd, skewness, excess_kurtosis, qq_max_deviation) = normality_diagnostics(&z);
    Ok(NormalityDiagnostics {
        m,
        trials,
        oracle: oracle.value,
        mean,
        sd,
        skewness,
        excess_kurtosis,
        qq_max_deviation,
    })
}

/// Tabular audit example: a binary `group` attribute (level `B` with
/// probability 0.15) carrying logistic coefficient `group_coef`, a balanced
/// binary `region` the model ignores, and one observable feature.
pub fn biased_logistic(rows: usize, group_coef: f64, seed: u64) -> Result<(Dataset, LinearModel)> {
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};
    if rows < 3 {
        return Err(ClotError::TooFewSamples {
            required: 3,
            actual: rows,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut group = Vec::with_capacity(rows);
    let mut region = Vec::with_capacity(rows);
    let mut x1 = Vec::with_capacity(rows);
    for _ in 0..rows {
        group.push(if rng.random::<f64>() < 0.15 { "B" } else { "A" });
        region.push(if rng.random::<f64>() < 0.5 { "north" } else { "south" });
        let x: f64 = StandardNormal.sample(&mut rng);
        x1.push(x);
    }
    let model = LinearModel::logistic(
        -1.0,
        vec![LinearTerm::numeric("x1", 0.5), LinearTerm::indicator("group", "B", group_coef)],
    );
    let dataset = Dataset::new(vec![
        Column::categorical("group", ColumnRole::Sensitive, group),
        Column::categorical("region", ColumnRole::Sensitive, region),
        Column::numeric("x1", ColumnRole::Observable, x1),
    ])?;
    Ok((dataset, model))
}
