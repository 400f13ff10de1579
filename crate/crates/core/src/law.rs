//! Sampling laws for synthetic outcome samples. Each law generates the
//! coordinates of a `d`-dimensional outcome independently.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ClotError, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum Law {
    Gaussian { mean: f64, sd: f64 },
    PointMass { value: f64 },
    /// `a` with probability `p`, otherwise `b`.
    TwoPoint { p: f64, a: f64, b: f64 },
}

impl Law {
    pub fn gaussian(mean: f64, sd: f64) -> Self {
        Law::Gaussian { mean, sd }
    }

    pub fn point_mass(value: f64) -> Self {
        Law::PointMass { value }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Law::Gaussian { mean, sd } => mean.is_finite() && sd.is_finite() && sd > 0.0,
            Law::PointMass { value } => value.is_finite(),
            Law::TwoPoint { p, a, b } => (0.0..=1.0).contains(&p) && a.is_finite() && b.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(ClotError::InvalidConfig(format!("unsupported law parameters: {self:?}")))
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Law::Gaussian { mean, sd } => Normal::new(mean, sd)
                .expect("validated")
                .sample(rng),
            Law::PointMass { value } => value,
            Law::TwoPoint { p, a, b } => {
                if rng.random::<f64>() < p {
                    a
                } else {
                    b
                }
            }
        }
    }

    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match *self {
            Law::Gaussian { mean, sd } => {
                let n = Normal::new(mean, sd).expect("validated");
                out.iter_mut().for_each(|v| *v = n.sample(rng));
            }
            _ => out.iter_mut().for_each(|v| *v = self.draw(rng)),
        }
    }

    /// `rows × dim` matrix of independent draws.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, rows: usize, dim: usize) -> Result<Matrix> {
        self.validate()?;
        let mut data = vec![0.0; rows * dim];
        self.fill(rng, &mut data);
        Matrix::new(rows, dim, data)
    }
}
