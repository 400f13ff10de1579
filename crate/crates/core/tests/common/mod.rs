//! Direct loop implementations used as oracles, written against the
//! definitions rather than the library's row-sum layout.

#![allow(dead_code)]

use clot_core::{Matrix, PairedOutcomes};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn gauss(x: &[f64], y: &[f64], h: f64) -> f64 {
    let mut d2 = 0.0;
    for k in 0..x.len() {
        d2 += (x[k] - y[k]) * (x[k] - y[k]);
    }
    (-d2 / (2.0 * h * h)).exp()
}

pub fn laplace(x: &[f64], y: &[f64], h: f64) -> f64 {
    let mut d1 = 0.0;
    for k in 0..x.len() {
        d1 += (x[k] - y[k]).abs();
    }
    (-d1 / h).exp()
}

#[derive(Clone)]
pub struct Brute {
    pub h: Vec<Vec<f64>>,
    pub denom: Vec<Vec<f64>>,
    pub mte: f64,
    pub nte: f64,
    pub zeta1: f64,
    pub zeta2: f64,
    pub sigma: f64,
}

pub fn brute(f: &Matrix, c: &Matrix, k: &dyn Fn(&[f64], &[f64]) -> f64, bound: f64) -> Brute {
    let m = f.rows();
    let mf = m as f64;
    let mut h = vec![vec![0.0; m]; m];
    let mut denom = vec![vec![0.0; m]; m];
    let (mut hs, mut ds) = (0.0, 0.0);
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let (yi, yj, ci, cj) = (f.row(i), f.row(j), c.row(i), c.row(j));
            h[i][j] = k(yi, yj) + k(ci, cj) - k(yi, cj) - k(ci, yj);
            denom[i][j] = 4.0 * bound - k(yi, yj) - k(ci, cj);
            hs += h[i][j];
            ds += denom[i][j];
        }
    }
    let pairs = mf * (mf - 1.0);
    let hbar = hs / pairs;
    let mut z1 = 0.0;
    let mut z2 = 0.0;
    for i in 0..m {
        let mut r = 0.0;
        for j in 0..m {
            if i != j {
                r += h[i][j];
                z2 += (h[i][j] - hbar).powi(2);
            }
        }
        r /= mf - 1.0;
        z1 += (r - hbar).powi(2);
    }
    z1 /= mf;
    z2 /= pairs;
    let sigma = (((4.0 * mf - 8.0) * z1 + 2.0 * z2) / (mf - 1.0)).max(0.0).sqrt() / (ds / pairs);
    Brute {
        h,
        denom,
        mte: hbar,
        nte: hs / ds,
        zeta1: z1,
        zeta2: z2,
        sigma,
    }
}

/// `Σ_{i≠j} (w_i - c)(w_j - c) H_ij / Σ_{i≠j} denom_ij`.
pub fn brute_bootstrap(b: &Brute, weights: &[u32], offset: f64) -> f64 {
    let m = weights.len();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..m {
        for j in 0..m {
            if i != j {
                num += (weights[i] as f64 - offset) * (weights[j] as f64 - offset) * b.h[i][j];
                den += b.denom[i][j];
            }
        }
    }
    num / den
}

/// As [`brute_bootstrap`] with `|φ_ij|`.
pub fn brute_bootstrap_abs(b: &Brute, weights: &[u32], offset: f64) -> f64 {
    let m = weights.len();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..m {
        for j in 0..m {
            if i != j {
                num += ((weights[i] as f64 - offset) * (weights[j] as f64 - offset)).abs() * b.h[i][j];
                den += b.denom[i][j];
            }
        }
    }
    num / den
}

/// Random paired instance with `m ∈ [3, 12]`, `d ∈ [1, 4]`; some instances
/// share rows between the groups.
pub fn random_instance(seed: u64) -> PairedOutcomes {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(3..=12);
    let d = rng.random_range(1..=4);
    let shift = rng.random_range(-1.5..1.5);
    let scale = rng.random_range(0.2..3.0);
    let f: Vec<f64> = (0..m * d).map(|_| rng.random_range(-1.0..1.0) * scale).collect();
    let mut c: Vec<f64> = (0..m * d).map(|_| rng.random_range(-1.0..1.0) * scale + shift).collect();
    if seed % 4 == 0 {
        c[..d].copy_from_slice(&f[..d]);
    }
    PairedOutcomes::new(Matrix::new(m, d, f).unwrap(), Matrix::new(m, d, c).unwrap()).unwrap()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300) || (a - b).abs() <= 1e-300
}
