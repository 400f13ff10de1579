use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::intervention::{apply_intervention, default_intervention, overlap_check, InterventionSpec, OverlapDiagnostics};
use super::predictor::Predictor;
use crate::error::{ClotError, Result};
use crate::hypothesis::{run_cf_clot_with_replicates, Decision, TestConfig, TestOutcome};
use crate::kernel::KernelPolicy;
use crate::resampling::ReplicateSet;
use crate::rng::derive_seed;
use crate::stats::PairedOutcomes;

/// Factual outputs `f(data)` and counterfactual outputs `f(do(data))`.
pub fn generate_paired_outcomes(
    dataset: &Dataset,
    predictor: &dyn Predictor,
    spec: &InterventionSpec,
) -> Result<PairedOutcomes> {
    let intervened = apply_intervention(dataset, spec)?;
    let factual = predictor.predict(dataset)?;
    let counterfactual = predictor.predict(&intervened)?;
    let n = dataset.n_rows();
    for out in [&factual, &counterfactual] {
        if out.rows() != n {
            return Err(ClotError::Predictor(format!(
                "predictor returned {} rows for {n} inputs",
                out.rows()
            )));
        }
        if out.cols() != predictor.output_dim() {
            return Err(ClotError::Predictor(format!(
                "predictor returned {} columns, declared {}",
                out.cols(),
                predictor.output_dim()
            )));
        }
    }
    PairedOutcomes::new(factual, counterfactual)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeReport {
    pub attribute: String,
    pub intervention: InterventionSpec,
    pub outcome: TestOutcome,
    pub overlap: OverlapDiagnostics,
    /// The median heuristic met an all-identical pooled sample.
    pub bandwidth_degenerate: bool,
}

pub fn audit_attribute(
    dataset: &Dataset,
    predictor: &dyn Predictor,
    attribute: &str,
    intervention: &InterventionSpec,
    kernel: &KernelPolicy,
    config: &TestConfig,
) -> Result<AttributeReport> {
    audit_attribute_detailed(dataset, predictor, attribute, intervention, kernel, config).map(|(r, _)| r)
}

/// As [`audit_attribute`], also returning the resampling replicates if the
/// mode used any.
pub fn audit_attribute_detailed(
    dataset: &Dataset,
    predictor: &dyn Predictor,
    attribute: &str,
    intervention: &InterventionSpec,
    kernel: &KernelPolicy,
    config: &TestConfig,
) -> Result<(AttributeReport, Option<ReplicateSet>)> {
    if intervention.attribute != attribute {
        return Err(ClotError::InvalidIntervention {
            attribute: attribute.to_string(),
            reason: format!("intervention targets `{}`", intervention.attribute),
        });
    }
    let overlap = overlap_check(dataset, intervention)?;
    let paired = generate_paired_outcomes(dataset, predictor, intervention)?;
    let (spec, bw) = kernel.resolve(&paired)?;
    let (outcome, replicates) = run_cf_clot_with_replicates(&spec, &paired, config)?;
    Ok((
        AttributeReport {
            attribute: attribute.to_string(),
            intervention: intervention.clone(),
            outcome,
            overlap,
            bandwidth_degenerate: bw.degenerate,
        },
        replicates,
    ))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AuditSettings {
    pub kernel: KernelPolicy,
    pub test: TestConfig,
    /// Per-attribute replacements for the default interventions.
    #[serde(default)]
    pub interventions: BTreeMap<String, InterventionSpec>,
}

impl AuditSettings {
    pub fn new(kernel: KernelPolicy, test: TestConfig) -> Self {
        AuditSettings {
            kernel,
            test,
            interventions: BTreeMap::new(),
        }
    }

    pub fn with_intervention(mut self, spec: InterventionSpec) -> Self {
        self.interventions.insert(spec.attribute.clone(), spec);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// Every attribute failed to reject: ε-counterfactually fair.
    Fair,
    Unfair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelAudit {
    pub verdict: Verdict,
    pub epsilon: f64,
    pub alpha: f64,
    pub reports: Vec<AttributeReport>,
    pub notes: Vec<String>,
}

impl ModelAudit {
    pub fn rejected_attributes(&self) -> Vec<&str> {
        self.reports
            .iter()
            .filter(|r| r.outcome.decision.rejected())
            .map(|r| r.attribute.as_str())
            .collect()
    }
}

pub fn audit_all(dataset: &Dataset, predictor: &dyn Predictor, settings: &AuditSettings) -> Result<ModelAudit> {
    audit_all_detailed(dataset, predictor, settings).map(|(a, _)| a)
}

/// Audits every sensitive column independently, in column order. Attribute
/// `k` runs with test seed `derive_seed(seed, 2k)`; default interventions get
/// `derive_seed(seed, 2k + 1)`.
pub fn audit_all_detailed(
    dataset: &Dataset,
    predictor: &dyn Predictor,
    settings: &AuditSettings,
) -> Result<(ModelAudit, Vec<Option<ReplicateSet>>)> {
    dataset.validate_for_audit()?;
    settings.test.validate()?;
    let attributes = dataset.sensitive_columns();
    for name in settings.interventions.keys() {
        if !attributes.contains(&name.as_str()) {
            return Err(ClotError::InvalidConfig(format!(
                "intervention override for `{name}`, which is not a sensitive column"
            )));
        }
    }
    let base = settings.test.seed;
    let results: Vec<(AttributeReport, Option<ReplicateSet>)> = attributes
        .par_iter()
        .enumerate()
        .map(|(k, &attr)| {
            let k = k as u64;
            let intervention = match settings.interventions.get(attr) {
                Some(spec) => spec.clone(),
                None => default_intervention(dataset, attr, derive_seed(base, 2 * k + 1))?,
            };
            let config = TestConfig {
                seed: derive_seed(base, 2 * k),
                ..settings.test
            };
            audit_attribute_detailed(dataset, predictor, attr, &intervention, &settings.kernel, &config)
        })
        .collect::<Result<_>>()?;

    let (reports, replicates): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let verdict = if reports.iter().all(|r| r.outcome.decision == Decision::FailToReject) {
        Verdict::Fair
    } else {
        Verdict::Unfair
    };
    let mut notes = vec![
        "Unconfoundedness of the interventions is assumed, not tested.".to_string(),
        "Factual and counterfactual outputs are treated as two i.i.d. samples; the row pairing is not used."
            .to_string(),
    ];
    if reports.len() > 1 {
        notes.push(format!(
            "{} attributes were each tested at alpha = {}; no multiple-testing correction is applied.",
            reports.len(),
            settings.test.alpha
        ));
    }
    for r in &reports {
        if let Some(w) = &r.overlap.warning {
            notes.push(w.clone());
        }
    }
    Ok((
        ModelAudit {
            verdict,
            epsilon: settings.test.epsilon,
            alpha: settings.test.alpha,
            reports,
            notes,
        },
        replicates,
    ))
}
