//! Counterfactual fairness as distributional closeness.
//!
//! A model is ε-counterfactually fair toward a sensitive attribute when its
//! outputs on factual rows and on rows where the attribute was intervened on
//! are close in the normalized kernel treatment effect (N-TE),
//! `MMD²(P, Q) / (4K - ‖μ_P‖² - ‖μ_Q‖²) ∈ [0, 1]`. This crate provides the
//! estimators, the asymptotic, bootstrap, and permutation tests of
//! `H0: N-TE ≤ ε`, the intervention and audit machinery, and the simulation
//! harness used to calibrate it.

pub mod error;
pub mod hypothesis;
pub mod kernel;
pub mod law;
pub mod matrix;
pub mod oracle;
pub mod pof;
pub mod resampling;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod sum;

pub use error::{ClotError, Result};
pub use hypothesis::{
    decide, run_cf_clot, run_cf_clot_with_replicates, sensitivity_preset, threshold, Decision, Diagnostics,
    RuleSummary, SensitivityLevel, TestConfig, TestMode, TestOutcome,
};
pub use kernel::{
    gram_block, kernel_eval, median_heuristic_bandwidth, Bandwidth, BandwidthPolicy, BuiltinKernel, GramBlock,
    KernelFamily, KernelPolicy, KernelSpec,
};
pub use law::Law;
pub use matrix::Matrix;
pub use oracle::{population_nte_oracle, OracleEstimate};
pub use pof::{
    apply_intervention, audit_all, audit_attribute, default_intervention, generate_paired_outcomes, overlap_check,
    AttributeReport, AuditSettings, Column, ColumnData, ColumnRole, Dataset, InterventionSpec, LinearModel,
    LinearTerm, ModelAudit, Operator, Predictor, Value, Verdict,
};
pub use resampling::{
    bootstrap_distribution, bootstrap_statistic, multinomial_weights, permutation_distribution, BootstrapDraw,
    ReplicateSet, WeightCentering,
};
pub use stats::{h_summary, mte_estimate, nte_estimate, variance_components, HStatSummary, PairedOutcomes, VarianceComponents};
