//! TOML audit configuration. Relative paths resolve against the directory
//! holding the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clot_core::pof::{ExternalCommand, PredictionTable};
use clot_core::resampling::WeightCentering;
use clot_core::{
    BandwidthPolicy, BuiltinKernel, ColumnRole, InterventionSpec, KernelPolicy, LinearModel, LinearTerm, Operator,
    Predictor, SensitivityLevel, TestConfig, TestMode, Value,
};
use serde::{Deserialize, Serialize};

use crate::error::{csv_err, io_err, CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    pub dataset: PathBuf,
    /// Column name to role. Undeclared columns are not read.
    pub columns: BTreeMap<String, ColumnRole>,
    pub model: ModelConfig,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub test: TestSection,
    #[serde(default)]
    pub interventions: Vec<InterventionConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    Logistic {
        intercept: f64,
        #[serde(default)]
        terms: Vec<LinearTerm>,
    },
    Linear {
        intercept: f64,
        #[serde(default)]
        terms: Vec<LinearTerm>,
    },
    /// A CSV of precomputed outputs keyed by `key_columns`; it must also hold
    /// rows for the intervened inputs.
    PredictionFile {
        path: PathBuf,
        key_columns: Vec<String>,
        output_columns: Vec<String>,
    },
    Command {
        program: String,
        #[serde(default)]
        args: Vec<String>,
        output_dim: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandwidthKeyword {
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BandwidthSetting {
    Fixed(f64),
    Keyword(BandwidthKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default = "default_family")]
    pub family: BuiltinKernel,
    #[serde(default = "default_bandwidth")]
    pub bandwidth: BandwidthSetting,
}

fn default_family() -> BuiltinKernel {
    BuiltinKernel::Gaussian
}

fn default_bandwidth() -> BandwidthSetting {
    BandwidthSetting::Keyword(BandwidthKeyword::Median)
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            family: default_family(),
            bandwidth: default_bandwidth(),
        }
    }
}

impl KernelConfig {
    pub fn policy(&self) -> KernelPolicy {
        KernelPolicy {
            family: self.family,
            bandwidth: match self.bandwidth {
                BandwidthSetting::Fixed(h) => BandwidthPolicy::Fixed(h),
                BandwidthSetting::Keyword(BandwidthKeyword::Median) => BandwidthPolicy::Median,
            },
        }
    }
}

/// Test settings. A preset supplies ε and the mode; explicit keys win.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<SensitivityLevel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<TestMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centering: Option<WeightCentering>,
}

impl TestSection {
    /// Fields set in `over` replace those here; a new preset clears the
    /// ε and mode it would otherwise be overridden by.
    pub fn overlay(&self, over: &TestSection) -> TestSection {
        let mut out = *self;
        if over.preset.is_some() {
            out.preset = over.preset;
            out.epsilon = None;
            out.mode = None;
        }
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { out.$f = over.$f; } )* };
        }
        take!(epsilon, alpha, mode, replicates, seed, centering);
        out
    }

    pub fn resolve(&self) -> Result<TestConfig> {
        let mut config = TestConfig::from_preset(self.preset.unwrap_or(SensitivityLevel::Neutral));
        if let Some(e) = self.epsilon {
            config.epsilon = e;
            // ε = 0 only has the two-sample test.
            if self.mode.is_none() && self.preset.is_none() {
                config.mode = if e == 0.0 {
                    TestMode::PermutationTwoSample
                } else {
                    TestMode::Asymptotic
                };
            }
        }
        if let Some(a) = self.alpha {
            config.alpha = a;
        }
        if let Some(m) = self.mode {
            config.mode = m;
        }
        if let Some(b) = self.replicates {
            config.replicates = b;
        }
        if let Some(s) = self.seed {
            config.seed = s;
        }
        if let Some(c) = self.centering {
            config.centering = c;
        }
        config.validate()?;
        Ok(config)
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterventionConfig {
    pub attribute: String,
    /// `fixed-replacement`, `value-swap`, `uniform-redraw`, `neutral-fill`, or `identity`.
    pub operator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<Vec<(Value, Value)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl InterventionConfig {
    pub fn to_spec(&self) -> Result<InterventionSpec> {
        let need_value = || {
            self.value.clone().ok_or_else(|| {
                CliError::Usage(format!("intervention on `{}`: `{}` needs `value`", self.attribute, self.operator))
            })
        };
        let operator = match self.operator.as_str() {
            "fixed-replacement" => Operator::FixedReplacement { value: need_value()? },
            "neutral-fill" => Operator::NeutralFill { value: need_value()? },
            "value-swap" => Operator::ValueSwap {
                map: self.map.clone().ok_or_else(|| {
                    CliError::Usage(format!("intervention on `{}`: `value-swap` needs `map`", self.attribute))
                })?,
            },
            "uniform-redraw" => Operator::UniformRedraw,
            "identity" => Operator::ValueSwap { map: Vec::new() },
            other => {
                return Err(CliError::Usage(format!(
                    "intervention on `{}`: unknown operator `{other}`",
                    self.attribute
                )))
            }
        };
        Ok(InterventionSpec::new(&self.attribute, operator).with_seed(self.seed.unwrap_or(0)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default = "default_report_name")]
    pub report: String,
    /// Write `<attribute>_replicates.csv` histograms for resampling modes.
    #[serde(default = "default_true")]
    pub histograms: bool,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

fn default_report_name() -> String {
    "audit_report.json".into()
}

fn default_bins() -> usize {
    40
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            report: default_report_name(),
            histograms: true,
            bins: default_bins(),
        }
    }
}

impl AuditConfig {
    pub fn parse(text: &str, path: &Path) -> Result<AuditConfig> {
        toml::from_str(text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<AuditConfig> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut config = AuditConfig::parse(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.rebase(base);
        Ok(config)
    }

    fn rebase(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.dataset);
        if let ModelConfig::PredictionFile { path, .. } = &mut self.model {
            join(path);
        }
        if let Some(dir) = &mut self.output.dir {
            join(dir);
        }
    }

    pub fn interventions(&self) -> Result<Vec<InterventionSpec>> {
        self.interventions.iter().map(InterventionConfig::to_spec).collect()
    }

    pub fn predictor(&self) -> Result<Box<dyn Predictor>> {
        Ok(match &self.model {
            ModelConfig::Logistic { intercept, terms } => Box::new(LinearModel::logistic(*intercept, terms.clone())),
            ModelConfig::Linear { intercept, terms } => Box::new(LinearModel {
                intercept: *intercept,
                terms: terms.clone(),
                link: clot_core::pof::Link::Identity,
            }),
            ModelConfig::PredictionFile {
                path,
                key_columns,
                output_columns,
            } => Box::new(load_prediction_table(path, key_columns, output_columns)?),
            ModelConfig::Command {
                program,
                args,
                output_dim,
            } => Box::new(ExternalCommand {
                program: program.clone(),
                args: args.clone(),
                output_dim: *output_dim,
            }),
        })
    }
}

fn load_prediction_table(path: &Path, keys: &[String], outputs: &[String]) -> Result<PredictionTable> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err(path))?;
    let header = reader.headers().map_err(csv_err(path))?.clone();
    let find = |name: &String| {
        header.iter().position(|h| h == name).ok_or_else(|| CliError::MissingColumn {
            path: path.to_path_buf(),
            column: name.clone(),
        })
    };
    let key_idx = keys.iter().map(find).collect::<Result<Vec<_>>>()?;
    let out_idx = outputs.iter().map(find).collect::<Result<Vec<_>>>()?;
    let mut entries = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        let key = key_idx.iter().map(|&i| record[i].to_string()).collect();
        let out = out_idx
            .iter()
            .map(|&i| {
                record[i].parse::<f64>().map_err(|_| CliError::Parse {
                    path: path.to_path_buf(),
                    line: k as u64 + 2,
                    message: format!("`{}` is not a number", &record[i]),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        entries.push((key, out));
    }
    Ok(PredictionTable::new(keys.to_vec(), entries)?)
}
