//! Monte-Carlo reference values for the population N-TE.
//!
//! Each draw takes fresh `u, u' ~ P` and `v, v' ~ Q` and records
//! `h = k(u,u') + k(v,v') - k(u,v') - k(u',v)` (unbiased for MMD²) and
//! `g = 4K - k(u,u') - k(v,v')`. The estimate is `mean(h) / mean(g)` with a
//! delta-method standard error.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ClotError, Result};
use crate::kernel::KernelSpec;
use crate::law::Law;
use crate::rng::substream;
use crate::sum::exact_sum;

const CHUNK: usize = 10_000;
pub const MIN_ORACLE_DRAWS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    pub value: f64,
    pub std_error: f64,
    pub mmd2: f64,
    pub mmd2_std_error: f64,
    pub draws: usize,
}

impl OracleEstimate {
    /// `(value - x) / std_error`, infinite when the error is zero.
    pub fn z_score(&self, x: f64) -> f64 {
        let d = self.value - x;
        if self.std_error > 0.0 {
            d / self.std_error
        } else if d == 0.0 {
            0.0
        } else {
            d.signum() * f64::INFINITY
        }
    }
}

struct ChunkMoments {
    h: f64,
    g: f64,
    hh: f64,
    gg: f64,
    hg: f64,
}

pub fn population_nte_oracle(
    factual: &Law,
    counterfactual: &Law,
    dim: usize,
    spec: &KernelSpec,
    draws: usize,
    seed: u64,
) -> Result<OracleEstimate> {
    factual.validate()?;
    counterfactual.validate()?;
    if draws < MIN_ORACLE_DRAWS {
        return Err(ClotError::Precondition(format!(
            "oracle needs at least {MIN_ORACLE_DRAWS} draws, got {draws}"
        )));
    }
    if dim == 0 {
        return Err(ClotError::InvalidConfig("dimension must be positive".into()));
    }
    let four_k = 4.0 * spec.bound();
    let chunks = draws.div_ceil(CHUNK);
    let moments: Vec<ChunkMoments> = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<ChunkMoments> {
            let n = CHUNK.min(draws - c * CHUNK);
            let mut rng = substream(seed, c as u64);
            let mut buf = vec![0.0; 4 * dim];
            let (mut hs, mut gs) = (Vec::with_capacity(n), Vec::with_capacity(n));
            for _ in 0..n {
                let (uu, vv) = buf.split_at_mut(2 * dim);
                factual.fill(&mut rng, uu);
                counterfactual.fill(&mut rng, vv);
                let (u, u2) = uu.split_at(dim);
                let (v, v2) = vv.split_at(dim);
                let kuu = spec.eval_raw(u, u2)?;
                let kvv = spec.eval_raw(v, v2)?;
                let kuv = spec.eval_raw(u, v2)?;
                let kvu = spec.eval_raw(u2, v)?;
                hs.push((kuu + kvv) - (kuv + kvu));
                gs.push(four_k - (kuu + kvv));
            }
            Ok(ChunkMoments {
                h: exact_sum(hs.iter().copied()),
                g: exact_sum(gs.iter().copied()),
                hh: exact_sum(hs.iter().map(|h| h * h)),
                gg: exact_sum(gs.iter().map(|g| g * g)),
                hg: exact_sum(hs.iter().zip(&gs).map(|(h, g)| h * g)),
            })
        })
        .collect::<Result<_>>()?;

    let n = draws as f64;
    let mean_h = exact_sum(moments.iter().map(|c| c.h)) / n;
    let mean_g = exact_sum(moments.iter().map(|c| c.g)) / n;
    let e_hh = exact_sum(moments.iter().map(|c| c.hh)) / n;
    let e_gg = exact_sum(moments.iter().map(|c| c.gg)) / n;
    let e_hg = exact_sum(moments.iter().map(|c| c.hg)) / n;
    let bessel = n / (n - 1.0);
    let var_h = ((e_hh - mean_h * mean_h) * bessel).max(0.0);
    let var_g = ((e_gg - mean_g * mean_g) * bessel).max(0.0);
    let cov_hg = (e_hg - mean_h * mean_g) * bessel;

    let ratio = mean_h / mean_g;
    // Var(h - R g) / (n · mean_g²)
    let lin_var = (var_h - 2.0 * ratio * cov_hg + ratio * ratio * var_g).max(0.0);
    Ok(OracleEstimate {
        value: ratio,
        std_error: (lin_var / n).sqrt() / mean_g,
        mmd2: mean_h,
        mmd2_std_error: (var_h / n).sqrt(),
        draws,
    })
}

/// Closed-form population N-TE for two univariate gaussians under the
/// gaussian kernel of bandwidth `h`:
/// `E k(X, Y) = h / sqrt(h² + s²) · exp(-Δ² / (2(h² + s²)))` with `s² = σ_X² + σ_Y²`.
pub fn gaussian_pair_nte(mean_p: f64, sd_p: f64, mean_q: f64, sd_q: f64, h: f64) -> f64 {
    let ek = |dm: f64, s2: f64| h / (h * h + s2).sqrt() * (-(dm * dm) / (2.0 * (h * h + s2))).exp();
    let pp = ek(0.0, 2.0 * sd_p * sd_p);
    let qq = ek(0.0, 2.0 * sd_q * sd_q);
    let pq = ek(mean_p - mean_q, sd_p * sd_p + sd_q * sd_q);
    (pp + qq - 2.0 * pq) / (4.0 - pp - qq)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_laws_are_within_three_standard_errors_of_zero() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        let law = Law::gaussian(0.3, 1.4);
        let est = population_nte_oracle(&law, &law, 2, &k, 50_000, 9).unwrap();
        assert!(est.z_score(0.0).abs() <= 3.0, "{est:?}");
    }

    #[test]
    fn far_point_masses_give_one() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        let est = population_nte_oracle(&Law::point_mass(0.0), &Law::point_mass(100.0), 1, &k, 10_000, 1)
            .unwrap();
        assert_eq!(est.value, 1.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn too_few_draws_rejected() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        let law = Law::gaussian(0.0, 1.0);
        assert!(population_nte_oracle(&law, &law, 1, &k, 9_999, 0).is_err());
        let bad = Law::gaussian(0.0, -1.0);
        assert!(population_nte_oracle(&bad, &law, 1, &k, 10_000, 0).is_err());
    }

    #[test]
    fn matches_closed_form_for_gaussians() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        for (dm, seed) in [(0.5, 1u64), (1.0, 2), (2.0, 3)] {
            let est = population_nte_oracle(
                &Law::gaussian(0.0, 1.0),
                &Law::gaussian(dm, 1.0),
                1,
                &k,
                400_000,
                seed,
            )
            .unwrap();
            let exact = gaussian_pair_nte(0.0, 1.0, dm, 1.0, 1.0);
            assert!(est.z_score(exact).abs() <= 4.0, "dm={dm}: {est:?} vs {exact}");
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        let p = Law::gaussian(0.0, 1.0);
        let q = Law::TwoPoint { p: 0.4, a: -1.0, b: 1.0 };
        let a = population_nte_oracle(&p, &q, 1, &k, 30_000, 5).unwrap();
        let b = population_nte_oracle(&p, &q, 1, &k, 30_000, 5).unwrap();
        assert_eq!(a, b);
    }
}
