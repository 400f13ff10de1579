//! MMD and normalized treatment-effect statistics.
//!
//! With factual outputs `y_i` and counterfactual outputs `y'_i`, the pair kernel
//!
//! ```text
//! H_ij = k(y_i, y_j) + k(y'_i, y'_j) - k(y_i, y'_j) - k(y'_i, y_j)
//! ```
//!
//! drives everything here. The M-TE estimator is the U-statistic
//! `Σ_{i≠j} H_ij / (m(m-1))`; the N-TE estimator divides `Σ_{i≠j} H_ij` by
//! `Σ_{i≠j} [4K - k(y_i, y_j) - k(y'_i, y'_j)]`, which is at least
//! `2K·m(m-1)` and therefore never zero.
//!
//! All sums are correctly rounded, so results are invariant (bit for bit)
//! under swapping the two groups, under permuting paired rows, and under the
//! number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ClotError, Result};
use crate::kernel::KernelSpec;
use crate::matrix::Matrix;
use crate::sum::{exact_sum, ExactSum};

/// Equal-size factual and counterfactual output samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedOutcomes {
    factual: Matrix,
    counterfactual: Matrix,
}

impl PairedOutcomes {
    pub fn new(factual: Matrix, counterfactual: Matrix) -> Result<Self> {
        if factual.rows() != counterfactual.rows() {
            return Err(ClotError::DimensionMismatch {
                expected: factual.rows(),
                actual: counterfactual.rows(),
            });
        }
        if factual.cols() != counterfactual.cols() {
            return Err(ClotError::DimensionMismatch {
                expected: factual.cols(),
                actual: counterfactual.cols(),
            });
        }
        if factual.rows() < 2 {
            return Err(ClotError::TooFewSamples {
                required: 2,
                actual: factual.rows(),
            });
        }
        if factual.cols() < 1 {
            return Err(ClotError::InvalidDataset("outputs need at least one column".into()));
        }
        if !factual.is_finite() || !counterfactual.is_finite() {
            return Err(ClotError::NonFinite("paired outcomes"));
        }
        Ok(PairedOutcomes {
            factual,
            counterfactual,
        })
    }

    pub fn factual(&self) -> &Matrix {
        &self.factual
    }

    pub fn counterfactual(&self) -> &Matrix {
        &self.counterfactual
    }

    /// Sample size per group.
    pub fn m(&self) -> usize {
        self.factual.rows()
    }

    pub fn dim(&self) -> usize {
        self.factual.cols()
    }

    /// Factual rows followed by counterfactual rows.
    pub fn pooled(&self) -> Matrix {
        self.factual
            .vstack(&self.counterfactual)
            .expect("column counts checked at construction")
    }

    pub fn swapped(&self) -> PairedOutcomes {
        PairedOutcomes {
            factual: self.counterfactual.clone(),
            counterfactual: self.factual.clone(),
        }
    }
}

/// Pairwise kernel sums over ordered pairs `i ≠ j`, plus the `H` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HStatSummary {
    pub m: usize,
    /// Kernel bound `K`.
    pub bound: f64,
    pub h_sum: f64,
    pub within_f_sum: f64,
    pub within_c_sum: f64,
    /// `Σ_{i≠j} [k(y_i, y'_j) + k(y'_i, y_j)]`.
    pub cross_sum_offdiag: f64,
    pub denom_sum: f64,
    /// `m × m`, zero diagonal.
    pub h_matrix: Matrix,
}

impl HStatSummary {
    /// Number of ordered pairs, `m(m-1)`.
    pub fn pairs(&self) -> f64 {
        (self.m * (self.m - 1)) as f64
    }

    /// `denom_sum / (m² - m)`, which estimates `4K - ‖μ_P‖² - ‖μ_Q‖²`.
    pub fn denom_mean(&self) -> f64 {
        self.denom_sum / self.pairs()
    }

    /// `h_sum / (m² - m)`.
    pub fn h_mean(&self) -> f64 {
        self.h_sum / self.pairs()
    }

    /// Empirical `‖μ_P‖²` over distinct pairs.
    pub fn factual_embedding_norm_sq(&self) -> f64 {
        self.within_f_sum / self.pairs()
    }

    pub fn counterfactual_embedding_norm_sq(&self) -> f64 {
        self.within_c_sum / self.pairs()
    }
}

struct RowSums {
    h: ExactSum,
    wf: ExactSum,
    wc: ExactSum,
    cross: ExactSum,
}

/// Computes the pairwise sums over the upper triangle `i < j` and doubles
/// them; every term is symmetric in `(i, j)`, bit for bit, so `H` is built
/// by mirroring.
pub fn h_summary(spec: &KernelSpec, paired: &PairedOutcomes) -> Result<HStatSummary> {
    let m = paired.m();
    if m < 2 {
        return Err(ClotError::TooFewSamples {
            required: 2,
            actual: m,
        });
    }
    let x = paired.factual();
    let y = paired.counterfactual();

    let rows: Vec<(Vec<f64>, RowSums)> = (0..m)
        .into_par_iter()
        .map(|i| -> Result<(Vec<f64>, RowSums)> {
            let (xi, yi) = (x.row(i), y.row(i));
            let (mut sh, mut swf, mut swc, mut scr) = (ExactSum::new(), ExactSum::new(), ExactSum::new(), ExactSum::new());
            let mut upper = Vec::with_capacity(m - i - 1);
            for j in i + 1..m {
                let (xj, yj) = (x.row(j), y.row(j));
                let kxx = spec.eval_raw(xi, xj)?;
                let kyy = spec.eval_raw(yi, yj)?;
                let kxy = spec.eval_raw(xi, yj)?;
                let kyx = spec.eval_raw(yi, xj)?;
                // Grouped so the value is the same whichever index comes
                // first, and swapping the groups is exact.
                let within = kxx + kyy;
                let cross = kxy + kyx;
                let hij = within - cross;
                upper.push(hij);
                sh.add(hij);
                swf.add(kxx);
                swc.add(kyy);
                scr.add(cross);
            }
            let sums = RowSums {
                h: sh,
                wf: swf,
                wc: swc,
                cross: scr,
            };
            Ok((upper, sums))
        })
        .collect::<Result<_>>()?;

    let mut h = vec![0.0; m * m];
    for (i, (upper, _)) in rows.iter().enumerate() {
        for (k, &v) in upper.iter().enumerate() {
            let j = i + 1 + k;
            h[i * m + j] = v;
            h[j * m + i] = v;
        }
    }
    // Row partials are merged before the single rounding, so the totals do
    // not depend on how pairs fall into rows; doubling is exact.
    let total = |f: fn(&RowSums) -> &ExactSum| {
        let mut acc = ExactSum::new();
        for r in &rows {
            acc.absorb(f(&r.1));
        }
        2.0 * acc.value()
    };
    let within_f_sum = total(|r| &r.wf);
    let within_c_sum = total(|r| &r.wc);
    let pairs = (m * (m - 1)) as f64;
    Ok(HStatSummary {
        m,
        bound: spec.bound(),
        h_sum: total(|r| &r.h),
        within_f_sum,
        within_c_sum,
        cross_sum_offdiag: total(|r| &r.cross),
        denom_sum: 4.0 * spec.bound() * pairs - (within_f_sum + within_c_sum),
        h_matrix: Matrix::new(m, m, h)?,
    })
}

/// Unbiased MMD² estimate, in `[-2K, 2K]`.
pub fn mte_estimate(summary: &HStatSummary) -> f64 {
    summary.h_sum / summary.pairs()
}

/// N-TE estimate. At most 1; may be slightly negative and is not clamped.
pub fn nte_estimate(summary: &HStatSummary) -> f64 {
    summary.h_sum / summary.denom_sum
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponents {
    pub zeta1: f64,
    pub zeta2: f64,
    /// Standard deviation of `√m · N-TE`.
    pub sigma_hat: f64,
    /// Set when `zeta2 < zeta1` beyond rounding noise.
    pub ordering_violated: bool,
}

/// Plug-in U-statistic variance components of `H` and the resulting σ̂.
///
/// `zeta1` is the dispersion of the row means `r_i = Σ_{j≠i} H_ij / (m-1)`
/// around `H̄`, `zeta2` the dispersion of all off-diagonal `H_ij`. Then
///
/// ```text
/// σ̂ = sqrt(((4m - 8) ζ1 + 2 ζ2) / (m - 1)) / (denom_sum / (m² - m))
/// ```
pub fn variance_components(summary: &HStatSummary) -> Result<VarianceComponents> {
    let m = summary.m;
    if m < 3 {
        return Err(ClotError::TooFewSamples {
            required: 3,
            actual: m,
        });
    }
    let h_bar = summary.h_mean();
    let h = &summary.h_matrix;
    let mf = m as f64;

    let per_row: Vec<(f64, ExactSum)> = (0..m)
        .into_par_iter()
        .map(|i| {
            let row = h.row(i);
            let r_i = exact_sum(row.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v))
                / (mf - 1.0);
            // H is symmetric: the upper triangle, doubled, covers i ≠ j.
            let mut dev = ExactSum::new();
            dev.extend(row[i + 1..].iter().map(|&v| (v - h_bar) * (v - h_bar)));
            ((r_i - h_bar) * (r_i - h_bar), dev)
        })
        .collect();

    let zeta1 = exact_sum(per_row.iter().map(|p| p.0)) / mf;
    let mut dev = ExactSum::new();
    for p in &per_row {
        dev.absorb(&p.1);
    }
    let zeta2 = 2.0 * dev.value() / summary.pairs();
    let tol = 1e-12 * zeta2.abs().max(zeta1.abs()).max(f64::MIN_POSITIVE);
    let ordering_violated = zeta2 + tol < zeta1;

    let var_scaled = (((4.0 * mf - 8.0) * zeta1 + 2.0 * zeta2) / (mf - 1.0)).max(0.0);
    let sigma_hat = var_scaled.sqrt() / summary.denom_mean();
    Ok(VarianceComponents {
        zeta1,
        zeta2,
        sigma_hat,
        ordering_violated,
    })
}
