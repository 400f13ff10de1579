//! Multinomial bootstrap replicates of the N-TE estimator and permutation
//! replicates of the M-TE estimator.
//!
//! A bootstrap draw takes `W ~ Mult(m; 1/m, ..., 1/m)` and forms
//! `φ_ij = (w_i - c)(w_j - c)`. By default `c = 1/m`, which is the literal
//! centering of the published replicate formula even though `E[w_i] = 1`;
//! [`WeightCentering::Unit`] switches to `c = 1`. The replicate is
//! `Σ_{i≠j} φ_ij H_ij / denom_sum`, with the denominator left unweighted.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ClotError, Result};
use crate::kernel::{gram_block, KernelSpec};
use crate::matrix::Matrix;
use crate::rng::substream;
use crate::stats::{h_summary, HStatSummary, PairedOutcomes};

pub const MIN_REPLICATES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightCentering {
    /// `w_i - 1/m`.
    #[default]
    InverseM,
    /// `w_i - 1`.
    Unit,
}

impl WeightCentering {
    fn offset(self, m: usize) -> f64 {
        match self {
            WeightCentering::InverseM => 1.0 / m as f64,
            WeightCentering::Unit => 1.0,
        }
    }
}

/// One multinomial weight vector. `φ` is derived on demand from the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapDraw {
    pub weights: Vec<u32>,
    pub centering: WeightCentering,
}

impl BootstrapDraw {
    pub fn m(&self) -> usize {
        self.weights.len()
    }

    pub fn centered(&self) -> Vec<f64> {
        let c = self.centering.offset(self.m());
        self.weights.iter().map(|&w| w as f64 - c).collect()
    }

    pub fn phi(&self, i: usize, j: usize) -> f64 {
        let c = self.centering.offset(self.m());
        (self.weights[i] as f64 - c) * (self.weights[j] as f64 - c)
    }

    pub fn phi_matrix(&self) -> Matrix {
        let m = self.m();
        let c = self.centered();
        let data = (0..m * m).map(|k| c[k / m] * c[k % m]).collect();
        Matrix::new(m, m, data).expect("square")
    }
}

/// Counts of `m` independent equiprobable category draws.
pub fn multinomial_weights<R: Rng + ?Sized>(
    m: usize,
    rng: &mut R,
    centering: WeightCentering,
) -> Result<BootstrapDraw> {
    if m < 2 {
        return Err(ClotError::TooFewSamples {
            required: 2,
            actual: m,
        });
    }
    let mut weights = vec![0u32; m];
    for _ in 0..m {
        weights[rng.random_range(0..m)] += 1;
    }
    Ok(BootstrapDraw { weights, centering })
}

pub fn bootstrap_statistic(summary: &HStatSummary, draw: &BootstrapDraw) -> Result<f64> {
    let m = summary.m;
    if draw.m() != m {
        return Err(ClotError::DimensionMismatch {
            expected: m,
            actual: draw.m(),
        });
    }
    let c = draw.centered();
    let h = &summary.h_matrix;
    // H has a zero diagonal, so the full quadratic form is the i ≠ j sum.
    let mut total = 0.0;
    for (i, &ci) in c.iter().enumerate() {
        let row: f64 = h.row(i).iter().zip(&c).map(|(hij, cj)| hij * cj).sum();
        total += ci * row;
    }
    Ok(total / summary.denom_sum)
}

/// Sorted replicate values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSet {
    pub values: Vec<f64>,
    pub b: usize,
    pub seed: u64,
}

impl ReplicateSet {
    fn from_unsorted(mut values: Vec<f64>, seed: u64) -> Self {
        values.sort_by(f64::total_cmp);
        let b = values.len();
        ReplicateSet { values, b, seed }
    }

    pub fn mean(&self) -> f64 {
        crate::sum::exact_sum(self.values.iter().copied()) / self.b as f64
    }

    /// Empirical quantile `values[⌈p·B⌉ - 1]` (inverse of the empirical CDF).
    pub fn quantile(&self, p: f64) -> f64 {
        let idx = ((p * self.b as f64).ceil() as usize).clamp(1, self.b) - 1;
        self.values[idx]
    }

    pub fn count_at_least(&self, x: f64) -> usize {
        self.b - self.values.partition_point(|&v| v < x)
    }

    /// The replicates shifted to mean zero.
    pub fn centered(&self) -> ReplicateSet {
        let mu = self.mean();
        ReplicateSet::from_unsorted(self.values.iter().map(|v| v - mu).collect(), self.seed)
    }
}

fn check_replicates(b: usize) -> Result<()> {
    if b < MIN_REPLICATES {
        Err(ClotError::TooFewReplicates(b))
    } else {
        Ok(())
    }
}

/// Bootstrap replicates on a precomputed summary; replicate `r` draws from
/// stream `(seed, r)`.
pub fn bootstrap_replicates(
    summary: &HStatSummary,
    b: usize,
    seed: u64,
    centering: WeightCentering,
) -> Result<ReplicateSet> {
    check_replicates(b)?;
    let values = (0..b)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, r as u64);
            let draw = multinomial_weights(summary.m, &mut rng, centering)?;
            bootstrap_statistic(summary, &draw)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ReplicateSet::from_unsorted(values, seed))
}

pub fn bootstrap_distribution(
    spec: &KernelSpec,
    paired: &PairedOutcomes,
    b: usize,
    seed: u64,
) -> Result<ReplicateSet> {
    check_replicates(b)?;
    let summary = h_summary(spec, paired)?;
    bootstrap_replicates(&summary, b, seed, WeightCentering::default())
}

/// The pooled-row ordering used by permutation replicate `index`: the first
/// `m` entries form the new factual group, the rest the counterfactual group.
pub fn permutation_split(m: usize, seed: u64, index: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..2 * m).collect();
    let mut rng = substream(seed, index as u64);
    idx.shuffle(&mut rng);
    idx
}

/// Re-splits the pooled `2m` rows at random and recomputes the M-TE estimate
/// on each split.
pub fn permutation_distribution(
    spec: &KernelSpec,
    paired: &PairedOutcomes,
    b: usize,
    seed: u64,
) -> Result<ReplicateSet> {
    check_replicates(b)?;
    let m = paired.m();
    let pooled = paired.pooled();
    let gram = gram_block(spec, &pooled, &pooled)?.values;
    let pairs = (m * (m - 1)) as f64;
    let values = (0..b)
        .into_par_iter()
        .map(|r| {
            let idx = permutation_split(m, seed, r);
            let (a, c) = idx.split_at(m);
            split_mte(&gram, a, c) / pairs
        })
        .collect();
    Ok(ReplicateSet::from_unsorted(values, seed))
}

/// `Σ_{i≠j} H_ij` for the split, read off the pooled Gram matrix.
fn split_mte(gram: &Matrix, a: &[usize], c: &[usize]) -> f64 {
    let m = a.len();
    let mut total = 0.0;
    for i in 0..m {
        let (ai, ci) = (a[i], c[i]);
        let ga = gram.row(ai);
        let gc = gram.row(ci);
        let mut row = 0.0;
        for j in 0..m {
            if j == i {
                continue;
            }
            let (aj, cj) = (a[j], c[j]);
            row += (ga[aj] + gc[cj]) - (ga[cj] + gc[aj]);
        }
        total += row;
    }
    total
}
