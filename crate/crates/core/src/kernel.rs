//! Bounded kernels, the median-heuristic bandwidth, and Gram blocks.
//!
//! Built-in families are bounded by `K = 1`:
//!
//! ```text
//! gaussian:  k(x, y) = exp(-‖x - y‖² / (2 h²))
//! laplacian: k(x, y) = exp(-‖x - y‖₁ / h)
//! ```
//!
//! Custom kernels carry a user-supplied bound and every evaluation is
//! checked against `[0, K]`; a violation is an error, never a clamp.

use std::fmt;
use std::sync::Arc;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ClotError, Result};
use crate::matrix::Matrix;
use crate::stats::PairedOutcomes;

pub type KernelFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

#[derive(Clone)]
pub enum KernelFamily {
    Gaussian,
    Laplacian,
    Custom { name: String, func: Arc<KernelFn> },
}

impl fmt::Debug for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelFamily::Gaussian => f.write_str("Gaussian"),
            KernelFamily::Laplacian => f.write_str("Laplacian"),
            KernelFamily::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl KernelFamily {
    pub fn name(&self) -> &str {
        match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Laplacian => "laplacian",
            KernelFamily::Custom { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KernelSpec {
    family: KernelFamily,
    bandwidth: f64,
    bound: f64,
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        Self::builtin(KernelFamily::Gaussian, bandwidth)
    }

    pub fn laplacian(bandwidth: f64) -> Result<Self> {
        Self::builtin(KernelFamily::Laplacian, bandwidth)
    }

    fn builtin(family: KernelFamily, bandwidth: f64) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        Ok(KernelSpec {
            family,
            bandwidth,
            bound: 1.0,
        })
    }

    /// A user kernel bounded by `bound`. The caller asserts that it is
    /// positive definite and characteristic; only the bound is checked.
    pub fn custom<F>(name: impl Into<String>, func: F, bandwidth: f64, bound: f64) -> Result<Self>
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        check_bandwidth(bandwidth)?;
        if !(bound.is_finite() && bound > 0.0) {
            return Err(ClotError::InvalidKernel(format!(
                "bound must be positive and finite, got {bound}"
            )));
        }
        Ok(KernelSpec {
            family: KernelFamily::Custom {
                name: name.into(),
                func: Arc::new(func),
            },
            bandwidth,
            bound,
        })
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// The kernel bound `K`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Same family and bound with a different bandwidth.
    pub fn with_bandwidth(&self, bandwidth: f64) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        Ok(KernelSpec {
            bandwidth,
            ..self.clone()
        })
    }

    /// Evaluation without dimension or finiteness checks.
    #[inline]
    pub(crate) fn eval_raw(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match &self.family {
            KernelFamily::Gaussian => {
                let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                Ok((-sq / (2.0 * self.bandwidth * self.bandwidth)).exp())
            }
            KernelFamily::Laplacian => {
                let l1: f64 = x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
                Ok((-l1 / self.bandwidth).exp())
            }
            KernelFamily::Custom { func, .. } => {
                let v = func(x, y);
                if !(v.is_finite() && (0.0..=self.bound).contains(&v)) {
                    return Err(ClotError::KernelOutOfBounds {
                        value: v,
                        bound: self.bound,
                    });
                }
                Ok(v)
            }
        }
    }
}

fn check_bandwidth(bandwidth: f64) -> Result<()> {
    if bandwidth.is_finite() && bandwidth > 0.0 {
        Ok(())
    } else {
        Err(ClotError::InvalidKernel(format!(
            "bandwidth must be positive and finite, got {bandwidth}"
        )))
    }
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(ClotError::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if !x.iter().chain(y).all(|v| v.is_finite()) {
        return Err(ClotError::NonFinite("kernel input"));
    }
    spec.eval_raw(x, y)
}

/// Result of the median heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidth {
    pub value: f64,
    /// Set when every pooled row is identical and the fallback of 1.0 was used.
    pub degenerate: bool,
}

/// Median of all pairwise Euclidean distances between distinct rows.
///
/// A zero median falls back to the smallest nonzero distance; an all-identical
/// sample yields 1.0 with `degenerate` set.
pub fn median_heuristic_bandwidth(pooled: &Matrix) -> Result<Bandwidth> {
    let n = pooled.rows();
    if n < 2 {
        return Err(ClotError::TooFewSamples {
            required: 2,
            actual: n,
        });
    }
    if !pooled.is_finite() {
        return Err(ClotError::NonFinite("pooled sample"));
    }
    let mut dists: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let xi = pooled.row(i);
            (i + 1..n).map(move |j| euclidean(xi, pooled.row(j)))
        })
        .collect();

    let median = median_in_place(&mut dists);
    if median > 0.0 {
        return Ok(Bandwidth {
            value: median,
            degenerate: false,
        });
    }
    let smallest_nonzero = dists
        .iter()
        .copied()
        .filter(|&d| d > 0.0)
        .fold(f64::INFINITY, f64::min);
    if smallest_nonzero.is_finite() {
        Ok(Bandwidth {
            value: smallest_nonzero,
            degenerate: false,
        })
    } else {
        warn!("all {n} pooled rows are identical; bandwidth falls back to 1.0");
        Ok(Bandwidth {
            value: 1.0,
            degenerate: true,
        })
    }
}

fn euclidean(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Median with the even-length convention of averaging the two middle values.
fn median_in_place(values: &mut [f64]) -> f64 {
    let n = values.len();
    let mid = n / 2;
    let (lower, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower_max = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower_max + upper)
    }
}

/// How the kernel of an audit is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BuiltinKernel {
    Gaussian,
    Laplacian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandwidthPolicy {
    /// Median heuristic on the pooled factual + counterfactual sample.
    Median,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelPolicy {
    pub family: BuiltinKernel,
    pub bandwidth: BandwidthPolicy,
}

impl Default for KernelPolicy {
    fn default() -> Self {
        KernelPolicy {
            family: BuiltinKernel::Gaussian,
            bandwidth: BandwidthPolicy::Median,
        }
    }
}

impl KernelPolicy {
    pub fn fixed_gaussian(bandwidth: f64) -> Self {
        KernelPolicy {
            family: BuiltinKernel::Gaussian,
            bandwidth: BandwidthPolicy::Fixed(bandwidth),
        }
    }

    /// The kernel of a fixed-bandwidth policy.
    pub fn resolve_fixed(&self) -> Result<KernelSpec> {
        match self.bandwidth {
            BandwidthPolicy::Fixed(h) => self.build(h),
            BandwidthPolicy::Median => Err(ClotError::InvalidKernel(
                "median-heuristic bandwidth needs a sample".into(),
            )),
        }
    }

    fn build(&self, h: f64) -> Result<KernelSpec> {
        match self.family {
            BuiltinKernel::Gaussian => KernelSpec::gaussian(h),
            BuiltinKernel::Laplacian => KernelSpec::laplacian(h),
        }
    }

    /// Resolves the policy against a pair of samples. Both groups share the
    /// bandwidth, computed on their union.
    pub fn resolve(&self, paired: &PairedOutcomes) -> Result<(KernelSpec, Bandwidth)> {
        let bw = match self.bandwidth {
            BandwidthPolicy::Fixed(h) => Bandwidth {
                value: h,
                degenerate: false,
            },
            BandwidthPolicy::Median => median_heuristic_bandwidth(&paired.pooled())?,
        };
        Ok((self.build(bw.value)?, bw))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleSource {
    Factual,
    Counterfactual,
    Pooled,
    Unlabeled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramBlock {
    pub values: Matrix,
    pub row_source: SampleSource,
    pub col_source: SampleSource,
}

impl GramBlock {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values.get(i, j)
    }
}

/// Entry `(i, j)` is `k(x_i, y_j)`. Rows are filled in parallel; each entry
/// is computed independently so the result does not depend on thread count.
pub fn gram_block(spec: &KernelSpec, x: &Matrix, y: &Matrix) -> Result<GramBlock> {
    gram_block_labeled(spec, x, SampleSource::Unlabeled, y, SampleSource::Unlabeled)
}

pub fn gram_block_labeled(
    spec: &KernelSpec,
    x: &Matrix,
    row_source: SampleSource,
    y: &Matrix,
    col_source: SampleSource,
) -> Result<GramBlock> {
    if x.cols() != y.cols() {
        return Err(ClotError::DimensionMismatch {
            expected: x.cols(),
            actual: y.cols(),
        });
    }
    if !x.is_finite() || !y.is_finite() {
        return Err(ClotError::NonFinite("gram input"));
    }
    let (m, n) = (x.rows(), y.rows());
    let mut data = vec![0.0; m * n];
    if n > 0 {
        data.par_chunks_mut(n)
            .enumerate()
            .try_for_each(|(i, out)| -> Result<()> {
                let xi = x.row(i);
                for (j, slot) in out.iter_mut().enumerate() {
                    *slot = spec.eval_raw(xi, y.row(j))?;
                }
                Ok(())
            })?;
    }
    Ok(GramBlock {
        values: Matrix::new(m, n, data)?,
        row_source,
        col_source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
        let data = (0..rows * cols).map(|_| rng.random_range(-2.0..2.0)).collect();
        Matrix::new(rows, cols, data).unwrap()
    }

    #[test]
    fn gaussian_self_similarity_is_one() {
        for h in [0.01, 1.0, 37.5] {
            let k = KernelSpec::gaussian(h).unwrap();
            assert_eq!(kernel_eval(&k, &[0.3, -1.2], &[0.3, -1.2]).unwrap(), 1.0);
        }
    }

    #[test]
    fn gaussian_unit_distance() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        let v = kernel_eval(&k, &[0.0, 0.0], &[0.6, 0.8]).unwrap();
        assert!((v - 0.606_530_659_7).abs() < 1e-10);
        assert!((v - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn gaussian_far_points_underflow_to_zero() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        let v = kernel_eval(&k, &[0.0], &[100.0]).unwrap();
        assert!(v >= 0.0 && v < 1e-300);
    }

    #[test]
    fn laplacian_uses_l1_distance() {
        let k = KernelSpec::laplacian(2.0).unwrap();
        let v = kernel_eval(&k, &[0.0, 0.0], &[1.0, -1.0]).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn eval_rejects_bad_inputs() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        assert!(matches!(
            kernel_eval(&k, &[0.0], &[0.0, 1.0]),
            Err(ClotError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            kernel_eval(&k, &[f64::NAN], &[0.0]),
            Err(ClotError::NonFinite(_))
        ));
        assert!(KernelSpec::gaussian(0.0).is_err());
        assert!(KernelSpec::laplacian(-1.0).is_err());
    }

    #[test]
    fn custom_kernel_bound_violation_is_an_error() {
        let k = KernelSpec::custom("scaled", |x, y| 3.0 * (-(x[0] - y[0]).abs()).exp(), 1.0, 2.0)
            .unwrap();
        assert!(matches!(
            kernel_eval(&k, &[0.0], &[0.0]),
            Err(ClotError::KernelOutOfBounds { .. })
        ));
        let ok = KernelSpec::custom("half", |x, y| 2.0 * (-(x[0] - y[0]).abs()).exp(), 1.0, 2.0)
            .unwrap();
        assert_eq!(kernel_eval(&ok, &[1.0], &[1.0]).unwrap(), 2.0);
        assert_eq!(ok.bound(), 2.0);
    }

    #[test]
    fn median_single_pair() {
        let bw = median_heuristic_bandwidth(&Matrix::column(&[0.0, 2.0])).unwrap();
        assert_eq!(bw.value, 2.0);
        assert!(!bw.degenerate);
    }

    #[test]
    fn median_all_identical_is_degenerate() {
        let bw = median_heuristic_bandwidth(&Matrix::column(&[0.0, 0.0, 0.0])).unwrap();
        assert_eq!(bw.value, 1.0);
        assert!(bw.degenerate);
    }

    #[test]
    fn median_zero_falls_back_to_smallest_nonzero() {
        // 6 zero distances and 4 of 3.0: the median is 0
        let bw = median_heuristic_bandwidth(&Matrix::column(&[0.0, 0.0, 0.0, 0.0, 3.0])).unwrap();
        assert_eq!(bw.value, 3.0);
        assert!(!bw.degenerate);
    }

    #[test]
    fn median_needs_two_rows() {
        assert!(median_heuristic_bandwidth(&Matrix::column(&[1.0])).is_err());
    }

    #[test]
    fn median_matches_sort_all_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        for (rows, cols) in [(50, 3), (51, 1), (2, 4)] {
            let x = random_matrix(&mut rng, rows, cols);
            let mut all = Vec::new();
            for i in 0..rows {
                for j in i + 1..rows {
                    let d: f64 = (0..cols)
                        .map(|c| (x.get(i, c) - x.get(j, c)).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    all.push(d);
                }
            }
            all.sort_by(f64::total_cmp);
            let n = all.len();
            let expected = if n % 2 == 1 {
                all[n / 2]
            } else {
                0.5 * (all[n / 2 - 1] + all[n / 2])
            };
            let got = median_heuristic_bandwidth(&x).unwrap().value;
            assert_eq!(got, expected);
        }
    }

    #[test]
    fn gram_single_row_and_constant_rows() {
        let k = KernelSpec::gaussian(0.7).unwrap();
        let one = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let g = gram_block(&k, &one, &one).unwrap();
        assert_eq!(g.values.as_slice(), &[1.0]);

        let same = Matrix::from_rows(&[[0.5], [0.5], [0.5]]).unwrap();
        let g = gram_block(&k, &same, &same).unwrap();
        assert!(g.values.as_slice().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn gram_matches_scalar_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        let k = KernelSpec::gaussian(1.3).unwrap();
        let x = random_matrix(&mut rng, 6, 3);
        let y = random_matrix(&mut rng, 6, 3);
        let g = gram_block(&k, &x, &y).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let sq: f64 = (0..3).map(|c| (x.get(i, c) - y.get(j, c)).powi(2)).sum();
                let v = (-sq / (2.0 * 1.3 * 1.3)).exp();
                assert_eq!(g.get(i, j), v);
            }
        }
    }

    #[test]
    fn gram_rejects_column_mismatch() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        let x = Matrix::zeros(2, 2);
        let y = Matrix::zeros(2, 3);
        assert!(gram_block(&k, &x, &y).is_err());
    }

    #[test]
    fn gram_transpose_symmetry_and_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for k in [KernelSpec::gaussian(0.8).unwrap(), KernelSpec::laplacian(0.8).unwrap()] {
            let x = random_matrix(&mut rng, 7, 2);
            let y = random_matrix(&mut rng, 5, 2);
            let xy = gram_block(&k, &x, &y).unwrap();
            let yx = gram_block(&k, &y, &x).unwrap();
            assert_eq!(xy.values, yx.values.transpose());
            let xx = gram_block(&k, &x, &x).unwrap();
            for i in 0..7 {
                assert_eq!(xx.get(i, i), 1.0);
            }
            assert!(xx.values.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn gram_self_block_is_psd() {
        // Cholesky of G + tol*I succeeds iff the smallest eigenvalue exceeds -tol.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = 8;
        for k in [KernelSpec::gaussian(0.5).unwrap(), KernelSpec::laplacian(0.5).unwrap()] {
            let x = random_matrix(&mut rng, m, 2);
            let g = gram_block(&k, &x, &x).unwrap();
            let tol = 1e-8 * m as f64;
            let mut l = vec![0.0; m * m];
            for i in 0..m {
                for j in 0..=i {
                    let mut s = g.get(i, j) + if i == j { tol } else { 0.0 };
                    for p in 0..j {
                        s -= l[i * m + p] * l[j * m + p];
                    }
                    if i == j {
                        assert!(s > 0.0, "not positive semidefinite");
                        l[i * m + i] = s.sqrt();
                    } else {
                        l[i * m + j] = s / l[j * m + j];
                    }
                }
            }
        }
    }

    #[test]
    fn gaussian_scale_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_matrix(&mut rng, 6, 2);
        let c = 7.25;
        let xs = Matrix::new(6, 2, x.as_slice().iter().map(|v| v * c).collect()).unwrap();
        let g1 = gram_block(&KernelSpec::gaussian(0.9).unwrap(), &x, &x).unwrap();
        let g2 = gram_block(&KernelSpec::gaussian(0.9 * c).unwrap(), &xs, &xs).unwrap();
        for (a, b) in g1.values.as_slice().iter().zip(g2.values.as_slice()) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
        }
    }
}
