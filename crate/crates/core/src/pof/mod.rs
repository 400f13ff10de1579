//! Distribution-based potential outcomes: intervene on one sensitive
//! attribute, run the model on factual and intervened rows, and test the two
//! output samples for closeness.

mod audit;
mod dataset;
mod intervention;
mod predictor;

pub use audit::{
    audit_all_detailed,
    audit_all, audit_attribute, audit_attribute_detailed, generate_paired_outcomes, AttributeReport,
    AuditSettings, ModelAudit, Verdict,
};
pub use dataset::{Column, ColumnData, ColumnRole, Dataset, Value};
pub use intervention::{
    apply_intervention, default_intervention, overlap_check, InterventionSpec, Operator, OverlapDiagnostics,
};
pub use predictor::{canonical_key, ExternalCommand, LinearModel, LinearTerm, Link, PredictionTable, Predictor};
