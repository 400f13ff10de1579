use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clot_core::pof::audit_all_detailed;
use clot_core::sim::{self, RateRow};
use clot_core::{run_cf_clot, AuditSettings, ColumnRole, PairedOutcomes, Verdict};
use serde::{Deserialize, Serialize};

use crate::config::{AuditConfig, KernelConfig, ModelConfig, OutputConfig, TestSection};
use crate::error::{io_err, CliError, Result};
use crate::ingest::{ingest_csv, read_matrix, write_dataset_csv, write_matrix};
use crate::report::{histogram_csv, write_json, AuditReport, DatasetSummary, EffectiveSettings, ReportHeader, TestReport};

/// Process exit statuses.
pub mod exit {
    /// Fail to reject / fair.
    pub const OK: i32 = 0;
    /// At least one null hypothesis rejected / unfair.
    pub const REJECT: i32 = 1;
    pub const ERROR: i32 = 2;
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Kernel and test sections for `test`, all optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFileConfig {
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub test: TestSection,
}

impl TestFileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        toml::from_str(&text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

pub struct TestRun {
    pub report: TestReport,
    pub report_path: Option<PathBuf>,
}

impl TestRun {
    pub fn exit_code(&self) -> i32 {
        if self.report.outcome.decision.rejected() {
            exit::REJECT
        } else {
            exit::OK
        }
    }
}

/// Direct test on two sample files of equal shape.
pub fn cmd_test(
    factual: &Path,
    counterfactual: &Path,
    file: &TestFileConfig,
    overrides: &TestSection,
    out: Option<&Path>,
) -> Result<TestRun> {
    let f = read_matrix(factual)?;
    let c = read_matrix(counterfactual)?;
    if f.rows() != c.rows() || f.cols() != c.cols() {
        return Err(CliError::Usage(format!(
            "sample shapes differ: {}×{} in {} vs {}×{} in {}",
            f.rows(),
            f.cols(),
            factual.display(),
            c.rows(),
            c.cols(),
            counterfactual.display()
        )));
    }
    let paired = PairedOutcomes::new(f, c)?;
    let kernel = file.kernel.policy();
    let test = file.test.overlay(overrides).resolve()?;
    let (spec, bandwidth) = kernel.resolve(&paired)?;
    let outcome = run_cf_clot(&spec, &paired, &test)?;
    let report = TestReport {
        header: ReportHeader::now(),
        factual: factual.to_path_buf(),
        counterfactual: counterfactual.to_path_buf(),
        settings: EffectiveSettings { kernel, test },
        bandwidth,
        outcome,
    };
    let report_path = match out {
        Some(dir) => {
            ensure_dir(dir)?;
            let p = dir.join("test_report.json");
            write_json(&report, &p)?;
            Some(p)
        }
        None => None,
    };
    Ok(TestRun { report, report_path })
}

pub struct AuditRun {
    pub report: AuditReport,
    pub report_path: Option<PathBuf>,
}

impl AuditRun {
    pub fn exit_code(&self) -> i32 {
        match self.report.verdict {
            Verdict::Fair => exit::OK,
            Verdict::Unfair => exit::REJECT,
        }
    }
}

/// Runs the audit described by `config_path`. Reports go to `out`, else to
/// the config's output directory; with neither nothing is written.
pub fn cmd_audit(config_path: &Path, overrides: &TestSection, out: Option<&Path>) -> Result<AuditRun> {
    let config = AuditConfig::load(config_path)?;
    let ingested = ingest_csv(&config.dataset, &config.columns)?;
    let predictor = config.predictor()?;
    let kernel = config.kernel.policy();
    let test = config.test.overlay(overrides).resolve()?;
    let mut settings = AuditSettings::new(kernel, test);
    for spec in config.interventions()? {
        settings = settings.with_intervention(spec);
    }
    let (audit, replicates) = audit_all_detailed(&ingested.dataset, predictor.as_ref(), &settings)?;

    let dir = out.map(Path::to_path_buf).or_else(|| config.output.dir.clone());
    let mut histograms = Vec::new();
    if let Some(dir) = &dir {
        ensure_dir(dir)?;
        if config.output.histograms {
            for (r, set) in audit.reports.iter().zip(&replicates) {
                if let Some(set) = set {
                    let name = PathBuf::from(format!("{}_replicates.csv", r.attribute));
                    let path = dir.join(&name);
                    fs::write(&path, histogram_csv(set, config.output.bins)).map_err(io_err(&path))?;
                    histograms.push(name);
                }
            }
        }
    }
    let report = AuditReport {
        header: ReportHeader::now(),
        dataset: DatasetSummary {
            path: config.dataset.clone(),
            rows: ingested.dataset.n_rows(),
            dropped_rows: ingested.dropped_rows,
        },
        settings: EffectiveSettings { kernel, test },
        verdict: audit.verdict,
        epsilon: audit.epsilon,
        alpha: audit.alpha,
        attributes: audit.reports,
        notes: audit.notes,
        histograms,
        config,
    };
    let report_path = match &dir {
        Some(dir) => {
            let p = dir.join(&report.config.output.report);
            write_json(&report, &p)?;
            Some(p)
        }
        None => None,
    };
    Ok(AuditRun { report, report_path })
}

pub const CALIBRATION_HEADER: &str = "m,epsilon,alpha,rejection_rate,mc_std_error";

pub fn calibration_csv(rows: &[RateRow]) -> String {
    let mut out = format!("{CALIBRATION_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:?},{:?},{:?},{:?}\n",
            r.m, r.epsilon, r.alpha, r.rejection_rate, r.std_error
        ));
    }
    out
}

/// Rejection rates over a registered scenario's grid. `epsilon`/`alpha`
/// replace the grid's values when given.
pub fn cmd_calibrate(
    scenario: &str,
    trials: usize,
    seed: u64,
    epsilon: Option<f64>,
    alpha: Option<f64>,
    replicates: Option<usize>,
) -> Result<Vec<RateRow>> {
    if trials == 0 {
        return Err(CliError::Usage("--trials must be positive".into()));
    }
    let mut s = sim::scenario(scenario)?;
    for p in &mut s.grid {
        if let Some(e) = epsilon {
            p.epsilon = e;
        }
        if let Some(a) = alpha {
            p.alpha = a;
        }
    }
    if let Some(b) = replicates {
        s.replicates = b;
    }
    Ok(sim::calibrate(&s, trials, seed)?)
}

/// Name of the synthetic audit example accepted by `simulate`.
pub const BIASED_LOGISTIC: &str = "biased-logistic";

/// Writes samples of a registered scenario, or the biased-logistic dataset
/// with a ready-to-run audit config.
pub fn cmd_simulate(scenario: &str, size: usize, seed: u64, coef: f64, out: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(out)?;
    if scenario == BIASED_LOGISTIC {
        let (dataset, model) = sim::biased_logistic(size, coef, seed)?;
        let data_path = out.join("biased_logistic.csv");
        write_dataset_csv(&dataset, &data_path)?;
        let config = AuditConfig {
            dataset: PathBuf::from("biased_logistic.csv"),
            columns: dataset.columns().iter().map(|c| (c.name.clone(), c.role)).collect::<BTreeMap<String, ColumnRole>>(),
            model: ModelConfig::Logistic {
                intercept: model.intercept,
                terms: model.terms,
            },
            kernel: KernelConfig::default(),
            test: TestSection {
                preset: Some(clot_core::SensitivityLevel::Neutral),
                seed: Some(seed),
                ..Default::default()
            },
            interventions: Vec::new(),
            output: OutputConfig::default(),
        };
        let text = toml::to_string_pretty(&config).map_err(|e| CliError::Usage(e.to_string()))?;
        let config_path = out.join("biased_logistic.toml");
        fs::write(&config_path, text).map_err(io_err(&config_path))?;
        return Ok(vec![data_path, config_path]);
    }
    let s = sim::scenario(scenario)?;
    let paired = sim::sample_scenario(&s, size, seed)?;
    let f = out.join(format!("{scenario}_factual.csv"));
    let c = out.join(format!("{scenario}_counterfactual.csv"));
    write_matrix(paired.factual(), "y", &f)?;
    write_matrix(paired.counterfactual(), "y", &c)?;
    Ok(vec![f, c])
}
