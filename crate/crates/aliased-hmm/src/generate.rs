//! Random model generation for experiments, calibration, and tests.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::decomp;
use crate::emission::Gaussian;
use crate::model::{stationary_of, Hmm};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random column-stochastic matrix. Each column is a normalized vector of
/// Exp(1) draws; independently, entries are zeroed with probability
/// `zero_prob` (always keeping at least one positive entry per column).
pub fn random_stochastic_matrix<R: Rng>(rng: &mut R, n: usize, zero_prob: f64) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    for j in 0..n {
        loop {
            let mut col: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
            for x in col.iter_mut() {
                if rng.random::<f64>() < zero_prob {
                    *x = 0.0;
                }
            }
            let s: f64 = col.iter().sum();
            if s > 1e-9 {
                for (i, x) in col.iter().enumerate() {
                    a[(i, j)] = x / s;
                }
                break;
            }
        }
    }
    a
}

/// Random ergodic transition matrix whose last two states form a minimal
/// aliased pair; returns the matrix and the stationary split weight.
///
/// `zero_prob > 0` sprinkles structural zeros, which is what makes the
/// identifiability analysis non-trivial; the draw is retried until the chain
/// is ergodic and clearly minimal.
pub fn random_aliased_matrix<R: Rng>(rng: &mut R, n: usize, zero_prob: f64) -> (DMatrix<f64>, f64) {
    assert!(n >= 3, "an aliased pair needs at least one other state");
    loop {
        let a = random_stochastic_matrix(rng, n, zero_prob);
        let Ok(pi) = stationary_of(&a) else { continue };
        let mass = pi[n - 2] + pi[n - 1];
        let beta = pi[n - 2] / mass;
        let Ok(d) = decomp::decompose(&a, beta) else {
            continue;
        };
        if d.delta_out.abs().max() > 1e-3 && d.delta_in.abs().max() > 1e-3 {
            return (a, beta);
        }
    }
}

/// Well-separated unit-variance Gaussians for `m` distinct components.
pub fn spread_emissions(m: usize) -> Vec<Gaussian> {
    (0..m)
        .map(|i| Gaussian::new(3.0 * i as f64, 1.0).expect("unit variance"))
        .collect()
}

/// Random minimal 2-aliased model with `n` states: transition from
/// [`random_aliased_matrix`], distinct unit-variance emissions except for the
/// duplicated final component.
pub fn random_aliased_model<R: Rng>(rng: &mut R, n: usize, zero_prob: f64) -> Hmm {
    let (a, _) = random_aliased_matrix(rng, n, zero_prob);
    let mut emissions = spread_emissions(n - 1);
    emissions.push(emissions[n - 2]);
    Hmm::new(a, emissions, None).expect("generated dimensions are consistent")
}
