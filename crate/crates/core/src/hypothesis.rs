//! The closeness test: thresholds, decisions, p-values, and sensitivity presets.
//!
//! Under `H0: N-TE ≤ ε` the asymptotic rule rejects when the estimate exceeds
//! `τ_α = ε + σ̂ · z_{1-α} / √m`. The bootstrap rule replaces `σ̂ · z / √m`
//! with the `(1-α)`-quantile of mean-centered bootstrap replicates. For
//! `ε = 0` the null is degenerate and only the permutation two-sample mode
//! applies; its statistic is the M-TE estimate.
//!
//! p-values are diagnostic; the decision is the threshold comparison.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{ClotError, Result};
use crate::kernel::KernelSpec;
use crate::resampling::{bootstrap_replicates, permutation_distribution, ReplicateSet, WeightCentering};
use crate::stats::{h_summary, mte_estimate, nte_estimate, variance_components, PairedOutcomes};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestMode {
    Asymptotic,
    Bootstrap,
    PermutationTwoSample,
}

impl TestMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TestMode::Asymptotic => "asymptotic",
            TestMode::Bootstrap => "bootstrap",
            TestMode::PermutationTwoSample => "permutation-two-sample",
        }
    }
}

impl std::str::FromStr for TestMode {
    type Err = ClotError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "asymptotic" => Ok(TestMode::Asymptotic),
            "bootstrap" => Ok(TestMode::Bootstrap),
            "permutation" | "permutation-two-sample" => Ok(TestMode::PermutationTwoSample),
            other => Err(ClotError::InvalidConfig(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SensitivityLevel {
    Strong,
    Neutral,
    Weak,
}

impl std::str::FromStr for SensitivityLevel {
    type Err = ClotError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strong" => Ok(SensitivityLevel::Strong),
            "neutral" => Ok(SensitivityLevel::Neutral),
            "weak" => Ok(SensitivityLevel::Weak),
            other => Err(ClotError::InvalidConfig(format!("unknown preset `{other}`"))),
        }
    }
}

/// Strong: exact equality via the two-sample test. Neutral: small tolerated
/// discrepancy. Weak: only large discrepancies count as unfair.
pub fn sensitivity_preset(level: SensitivityLevel) -> (f64, TestMode) {
    match level {
        SensitivityLevel::Strong => (0.0, TestMode::PermutationTwoSample),
        SensitivityLevel::Neutral => (0.1, TestMode::Asymptotic),
        SensitivityLevel::Weak => (0.3, TestMode::Asymptotic),
    }
}

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_REPLICATES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub epsilon: f64,
    pub alpha: f64,
    pub mode: TestMode,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default)]
    pub centering: WeightCentering,
}

impl Default for TestConfig {
    /// The neutral preset.
    fn default() -> Self {
        TestConfig::from_preset(SensitivityLevel::Neutral)
    }
}

impl TestConfig {
    pub fn new(epsilon: f64, alpha: f64, mode: TestMode) -> Self {
        TestConfig {
            epsilon,
            alpha,
            mode,
            replicates: DEFAULT_REPLICATES,
            seed: 0,
            centering: WeightCentering::default(),
        }
    }

    pub fn from_preset(level: SensitivityLevel) -> Self {
        let (epsilon, mode) = sensitivity_preset(level);
        TestConfig::new(epsilon, DEFAULT_ALPHA, mode)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_replicates(mut self, b: usize) -> Self {
        self.replicates = b;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(ClotError::InvalidConfig(format!(
                "epsilon must lie in [0, 1), got {}",
                self.epsilon
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(ClotError::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        match self.mode {
            TestMode::PermutationTwoSample if self.epsilon != 0.0 => Err(ClotError::InvalidConfig(
                "permutation-two-sample mode requires epsilon = 0".into(),
            )),
            TestMode::Asymptotic if self.epsilon == 0.0 => Err(ClotError::DegenerateNull),
            TestMode::Bootstrap | TestMode::PermutationTwoSample
                if self.replicates < crate::resampling::MIN_REPLICATES =>
            {
                Err(ClotError::TooFewReplicates(self.replicates))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    /// Discrepancy beyond ε: unfair.
    RejectH0,
    /// Consistent with ε-closeness: fair.
    FailToReject,
}

impl Decision {
    pub fn rejected(self) -> bool {
        self == Decision::RejectH0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub bandwidth: f64,
    pub bound: f64,
    pub denom_mean: f64,
    pub mte: f64,
    pub zeta1: f64,
    pub zeta2: f64,
    pub variance_ordering_violated: bool,
}

/// The asymptotic rule, reported next to the bootstrap rule in bootstrap mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleSummary {
    pub threshold: f64,
    pub decision: Decision,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub sigma_hat: f64,
    pub threshold: f64,
    pub decision: Decision,
    pub p_value: f64,
    pub mode: TestMode,
    pub epsilon: f64,
    pub alpha: f64,
    pub m: usize,
    pub diagnostics: Diagnostics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asymptotic_rule: Option<RuleSummary>,
}

pub fn standard_normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

pub fn standard_normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// `τ_α = ε + σ̂ · z_{1-α} / √m`.
pub fn threshold(epsilon: f64, alpha: f64, sigma_hat: f64, m: usize) -> Result<f64> {
    if m < 3 {
        return Err(ClotError::TooFewSamples {
            required: 3,
            actual: m,
        });
    }
    if epsilon == 0.0 {
        return Err(ClotError::DegenerateNull);
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) || !(alpha > 0.0 && alpha < 1.0) {
        return Err(ClotError::InvalidConfig(format!(
            "threshold needs epsilon > 0 and alpha in (0, 1), got ({epsilon}, {alpha})"
        )));
    }
    if !(sigma_hat >= 0.0 && sigma_hat.is_finite()) {
        return Err(ClotError::InvalidConfig(format!("sigma_hat must be finite and ≥ 0, got {sigma_hat}")));
    }
    Ok(epsilon + sigma_hat * standard_normal_quantile(1.0 - alpha) / (m as f64).sqrt())
}

/// Strict comparison: ties fail to reject.
pub fn decide(statistic: f64, threshold: f64) -> Decision {
    if statistic > threshold {
        Decision::RejectH0
    } else {
        Decision::FailToReject
    }
}

fn asymptotic_p_value(statistic: f64, epsilon: f64, sigma_hat: f64, m: usize) -> f64 {
    let excess = statistic - epsilon;
    if sigma_hat > 0.0 {
        let z = (m as f64).sqrt() * excess / sigma_hat;
        (1.0 - standard_normal_cdf(z)).clamp(0.0, 1.0)
    } else if excess > 0.0 {
        0.0
    } else {
        1.0
    }
}

fn resampling_p_value(set: &ReplicateSet, x: f64) -> f64 {
    (1 + set.count_at_least(x)) as f64 / (set.b + 1) as f64
}

pub fn run_cf_clot(spec: &KernelSpec, paired: &PairedOutcomes, config: &TestConfig) -> Result<TestOutcome> {
    run_cf_clot_with_replicates(spec, paired, config).map(|(o, _)| o)
}

/// As [`run_cf_clot`], also returning the replicates the decision used
/// (bootstrap replicates are returned uncentered).
pub fn run_cf_clot_with_replicates(
    spec: &KernelSpec,
    paired: &PairedOutcomes,
    config: &TestConfig,
) -> Result<(TestOutcome, Option<ReplicateSet>)> {
    config.validate()?;
    let m = paired.m();
    if m < 3 {
        return Err(ClotError::TooFewSamples {
            required: 3,
            actual: m,
        });
    }
    let summary = h_summary(spec, paired)?;
    let vc = variance_components(&summary)?;
    let nte = nte_estimate(&summary);
    let mte = mte_estimate(&summary);
    let diagnostics = Diagnostics {
        bandwidth: spec.bandwidth(),
        bound: spec.bound(),
        denom_mean: summary.denom_mean(),
        mte,
        zeta1: vc.zeta1,
        zeta2: vc.zeta2,
        variance_ordering_violated: vc.ordering_violated,
    };
    let (eps, alpha) = (config.epsilon, config.alpha);

    let asymptotic = |statistic: f64| -> Result<RuleSummary> {
        let tau = threshold(eps, alpha, vc.sigma_hat, m)?;
        Ok(RuleSummary {
            threshold: tau,
            decision: decide(statistic, tau),
            p_value: asymptotic_p_value(statistic, eps, vc.sigma_hat, m),
        })
    };

    let outcome = |statistic, threshold, decision, p_value, asymptotic_rule| TestOutcome {
        statistic,
        sigma_hat: vc.sigma_hat,
        threshold,
        decision,
        p_value,
        mode: config.mode,
        epsilon: eps,
        alpha,
        m,
        diagnostics,
        asymptotic_rule,
    };

    match config.mode {
        TestMode::Asymptotic => {
            let rule = asymptotic(nte)?;
            Ok((outcome(nte, rule.threshold, rule.decision, rule.p_value, None), None))
        }
        TestMode::Bootstrap => {
            let reps = bootstrap_replicates(&summary, config.replicates, config.seed, config.centering)?;
            let centered = reps.centered();
            let tau = eps + centered.quantile(1.0 - alpha);
            let p = resampling_p_value(&centered, nte - eps);
            let side = if eps > 0.0 { Some(asymptotic(nte)?) } else { None };
            Ok((outcome(nte, tau, decide(nte, tau), p, side), Some(reps)))
        }
        TestMode::PermutationTwoSample => {
            let reps = permutation_distribution(spec, paired, config.replicates, config.seed)?;
            let p = resampling_p_value(&reps, mte);
            let decision = if p <= alpha {
                Decision::RejectH0
            } else {
                Decision::FailToReject
            };
            let tau = reps.quantile(1.0 - alpha);
            Ok((outcome(mte, tau, decision, p, None), Some(reps)))
        }
    }
}
