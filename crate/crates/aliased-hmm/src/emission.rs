//! Univariate Gaussian emission parameters.
//!
//! Downstream code touches emissions through exactly three capabilities —
//! density evaluation, sampling, and the pairwise inner product
//! `∫ f g dy` — so further families can slot in behind the same surface
//! without disturbing the moment or learning machinery.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A univariate Gaussian `N(mean, var)`, the one emission family shipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub mean: f64,
    pub var: f64,
}

impl Gaussian {
    pub fn new(mean: f64, var: f64) -> Result<Self> {
        if !(var > 0.0) || !var.is_finite() || !mean.is_finite() {
            return Err(Error::InvalidModel(format!(
                "emission variance must be positive and finite, got N({mean}, {var})"
            )));
        }
        Ok(Self { mean, var })
    }

    /// Density value at `y`.
    pub fn density(&self, y: f64) -> f64 {
        let d = y - self.mean;
        (-d * d / (2.0 * self.var)).exp() / (2.0 * std::f64::consts::PI * self.var).sqrt()
    }

    /// Upper bound on the density, attained at the mean.
    pub fn peak_density(&self) -> f64 {
        1.0 / (2.0 * std::f64::consts::PI * self.var).sqrt()
    }

    /// One draw from the distribution.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Normal::new(self.mean, self.var.sqrt())
            .expect("variance validated at construction")
            .sample(rng)
    }

    /// Inner product `∫ f g dy` of two Gaussian densities, in closed form:
    /// the value of `N(0, var_a + var_b)` at `mean_a - mean_b`.
    pub fn inner_product(&self, other: &Gaussian) -> f64 {
        let s = self.var + other.var;
        let d = self.mean - other.mean;
        (-d * d / (2.0 * s)).exp() / (2.0 * std::f64::consts::PI * s).sqrt()
    }

    /// Scale-free separation `|mean_a - mean_b| / sqrt(var_a + var_b)`.
    ///
    /// Distinct parameters with separation below a small threshold make the
    /// kernel matrix nearly singular; validation warns below 0.05.
    pub fn separation(&self, other: &Gaussian) -> f64 {
        (self.mean - other.mean).abs() / (self.var + other.var).sqrt()
    }
}
