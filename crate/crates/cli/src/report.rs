//! JSON reports and plot-ready CSV sidecars.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clot_core::resampling::ReplicateSet;
use clot_core::{AttributeReport, Bandwidth, KernelPolicy, TestConfig, TestOutcome, Verdict};
use serde::{Deserialize, Serialize};

use crate::config::AuditConfig;
use crate::error::{io_err, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const TIMESTAMP_FIELD: &str = "generated_unix_secs";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub schema_version: u32,
    pub toolkit: String,
    pub version: String,
    /// The only field that varies between identical runs. Honors
    /// `SOURCE_DATE_EPOCH`.
    pub generated_unix_secs: u64,
}

impl ReportHeader {
    pub fn now() -> Self {
        let secs = std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()));
        ReportHeader {
            schema_version: SCHEMA_VERSION,
            toolkit: "clot".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            generated_unix_secs: secs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub path: PathBuf,
    pub rows: usize,
    pub dropped_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveSettings {
    pub kernel: KernelPolicy,
    pub test: TestConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub header: ReportHeader,
    pub config: AuditConfig,
    pub settings: EffectiveSettings,
    pub dataset: DatasetSummary,
    pub verdict: Verdict,
    pub epsilon: f64,
    pub alpha: f64,
    pub attributes: Vec<AttributeReport>,
    pub notes: Vec<String>,
    #[serde(default)]
    pub histograms: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub header: ReportHeader,
    pub factual: PathBuf,
    pub counterfactual: PathBuf,
    pub settings: EffectiveSettings,
    pub bandwidth: Bandwidth,
    pub outcome: TestOutcome,
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(value)?).map_err(io_err(path))
}

/// The report with its timestamp removed, for determinism comparisons.
pub fn report_body(text: &str) -> Result<String> {
    let mut v: serde_json::Value = serde_json::from_str(text)?;
    if let Some(h) = v.get_mut("header").and_then(|h| h.as_object_mut()) {
        h.remove(TIMESTAMP_FIELD);
    }
    Ok(serde_json::to_string_pretty(&v)?)
}

/// Equal-width density histogram as `value,density` rows, `value` being the
/// bin centre. A constant sample becomes one unit-width bin.
pub fn histogram_csv(set: &ReplicateSet, bins: usize) -> String {
    let bins = bins.max(1);
    let lo = set.values[0];
    let hi = set.values[set.b - 1];
    let mut out = String::from("value,density\n");
    if hi <= lo {
        out.push_str(&format!("{lo:?},1.0\n"));
        return out;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in &set.values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    for (k, c) in counts.iter().enumerate() {
        let centre = lo + (k as f64 + 0.5) * width;
        let density = *c as f64 / (set.b as f64 * width);
        out.push_str(&format!("{centre:?},{density:?}\n"));
    }
    out
}
