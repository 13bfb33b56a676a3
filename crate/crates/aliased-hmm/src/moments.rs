//! Second- and third-order output moments: population closed forms,
//! single-pass empirical estimators, kernel-free transforms, and the
//! deviation quantities that expose aliasing.
//!
//! For distinct emission components `f_1 .. f_m` the raw moments are
//! `E[f_i(Y_0) f_j(Y_t)]` at lags `t = 1, 2, 3` and the consecutive triples
//! `E[f_i(Y_0) f_c(Y_1) f_j(Y_2)]`. Sandwiching with the inverse kernel and
//! the inverse merged stationary weights turns these into "kernel-free"
//! matrices in which transition structure appears directly: the lag-1
//! kernel-free moment *is* the merged transition matrix, and the deviations
//!
//! ```text
//! DM2    = M(2) - M(1)^2
//! DM3    = M(3) - M(2) M(1) - M(1) M(2) + M(1)^3
//! DG(c)  = G(c) - M(1) diag(K[., c]) M(1)
//! ```
//!
//! vanish exactly for a non-aliased chain and collapse to scaled copies of
//! the rank-one matrix `d_out * d_in'` for a 2-aliased one.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::decomp::{lift_operator, merge_operator};
use crate::emission::Gaussian;
use crate::error::{Error, Result};
use crate::model::Hmm;

/// Kernel condition numbers above this value trigger a noise warning: the
/// kernel-free transform amplifies moment error by roughly
/// `1 / (sigma_min(K)^2 * min_i pi_i)`.
pub const CONDITION_WARN: f64 = 1e8;

/// Gram matrix of pairwise inner products of distinct emission densities.
#[derive(Debug, Clone)]
pub struct Kernel {
    k: DMatrix<f64>,
    inv: DMatrix<f64>,
    condition: f64,
}

impl Kernel {
    /// Builds the kernel from pairwise-distinct emission parameters.
    pub fn new(emissions: &[Gaussian]) -> Result<Self> {
        let m = emissions.len();
        for i in 0..m {
            for j in i + 1..m {
                if emissions[i] == emissions[j] {
                    return Err(Error::CoincidentEmissions(i, j));
                }
            }
        }
        let k = DMatrix::from_fn(m, m, |i, j| emissions[i].inner_product(&emissions[j]));
        let chol = k.clone().cholesky().ok_or(Error::SingularKernel)?;
        let inv = chol.inverse();
        let eigen = k.clone().symmetric_eigen().eigenvalues;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for &e in eigen.iter() {
            lo = lo.min(e);
            hi = hi.max(e);
        }
        Ok(Self {
            k,
            inv,
            condition: hi / lo,
        })
    }

    pub fn dim(&self) -> usize {
        self.k.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inv
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn is_ill_conditioned(&self) -> bool {
        self.condition > CONDITION_WARN
    }

    /// Kernel lifted to the full state space: `B' K B` for the merge
    /// operator `B` of an `n`-state chain with the aliased pair last.
    pub fn lifted(&self, n: usize) -> DMatrix<f64> {
        let b = merge_operator(n);
        b.transpose() * &self.k * b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Population,
    Empirical { t_len: usize },
}

/// Raw, kernel-free, and deviation moments in the unique-component space.
#[derive(Debug, Clone)]
pub struct MomentSet {
    /// Raw lagged second moments at lags 1, 2, 3.
    pub raw_lagged: [DMatrix<f64>; 3],
    /// Raw consecutive third moments, one per middle component.
    pub raw_triple: Vec<DMatrix<f64>>,
    /// Kernel-free lagged moments `M(1..3)`.
    pub lagged: [DMatrix<f64>; 3],
    /// Kernel-free triples `G(c)`.
    pub triple: Vec<DMatrix<f64>>,
    pub dm2: DMatrix<f64>,
    pub dm3: DMatrix<f64>,
    pub dg: Vec<DMatrix<f64>>,
    pub provenance: Provenance,
}

impl MomentSet {
    /// Merged transition-matrix estimate carried by the lag-1 moment.
    pub fn merged_transition(&self) -> &DMatrix<f64> {
        &self.lagged[0]
    }

    fn finish(
        raw_lagged: [DMatrix<f64>; 3],
        raw_triple: Vec<DMatrix<f64>>,
        kernel: &Kernel,
        pi_merged: &DVector<f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        let m = kernel.dim();
        if pi_merged.len() != m {
            return Err(Error::Dimension(format!(
                "stationary weights have length {}, kernel dimension is {m}",
                pi_merged.len()
            )));
        }
        if pi_merged.iter().any(|&p| p <= 0.0) {
            return Err(Error::InvalidModel(
                "merged stationary weights must be strictly positive".into(),
            ));
        }
        let kinv = kernel.inverse();
        let d_inv = DMatrix::from_diagonal(&pi_merged.map(|p| 1.0 / p));
        let strip = |raw: &DMatrix<f64>| kinv * raw * kinv * &d_inv;

        let lagged = [
            strip(&raw_lagged[0]),
            strip(&raw_lagged[1]),
            strip(&raw_lagged[2]),
        ];
        let triple: Vec<DMatrix<f64>> = raw_triple.iter().map(|g| strip(g)).collect();

        let m1 = &lagged[0];
        let dm2 = &lagged[1] - m1 * m1;
        let dm3 = &lagged[2] - &lagged[1] * m1 - m1 * &lagged[1] + m1 * m1 * m1;
        let dg: Vec<DMatrix<f64>> = triple
            .iter()
            .enumerate()
            .map(|(c, g)| {
                let mid = DMatrix::from_diagonal(&kernel.matrix().column(c).into_owned());
                g - m1 * mid * m1
            })
            .collect();

        Ok(Self {
            raw_lagged,
            raw_triple,
            lagged,
            triple,
            dm2,
            dm3,
            dg,
            provenance,
        })
    }
}

/// Population moments of a stationary model, dispatching on whether an
/// aliased pair is designated.
pub fn population_moments(h: &Hmm) -> Result<MomentSet> {
    let info = h.stationary()?;
    let unique = h.unique_emissions();
    let kernel = Kernel::new(&unique)?;
    match h.aliased_pair() {
        Some(_) => population_moments_aliased(
            h.transition(),
            info.beta.expect("aliased model has a split weight"),
            &info.pi_merged.expect("aliased model has merged weights"),
            &kernel,
        ),
        None => population_moments_plain(h.transition(), &info.pi, &kernel),
    }
}

/// Population moments of a 2-aliased chain (aliased pair last) with split
/// weight `beta` and merged stationary weights `pi_merged`.
pub fn population_moments_aliased(
    a: &DMatrix<f64>,
    beta: f64,
    pi_merged: &DVector<f64>,
    kernel: &Kernel,
) -> Result<MomentSet> {
    let n = a.nrows();
    if kernel.dim() != n - 1 {
        return Err(Error::Dimension(format!(
            "kernel dimension {} does not match {n}-state aliased chain",
            kernel.dim()
        )));
    }
    let b = merge_operator(n);
    let c = lift_operator(n, beta);
    population_from_operators(a, &b, &c, kernel, pi_merged)
}

/// Population moments of a non-aliased chain: merge and lift collapse to the
/// identity.
pub fn population_moments_plain(
    a: &DMatrix<f64>,
    pi: &DVector<f64>,
    kernel: &Kernel,
) -> Result<MomentSet> {
    let n = a.nrows();
    if kernel.dim() != n {
        return Err(Error::Dimension(format!(
            "kernel dimension {} does not match {n}-state chain",
            kernel.dim()
        )));
    }
    let eye = DMatrix::identity(n, n);
    population_from_operators(a, &eye, &eye, kernel, pi)
}

fn population_from_operators(
    a: &DMatrix<f64>,
    bop: &DMatrix<f64>,
    cop: &DMatrix<f64>,
    kernel: &Kernel,
    pi_merged: &DVector<f64>,
) -> Result<MomentSet> {
    let k = kernel.matrix();
    let d = DMatrix::from_diagonal(pi_merged);
    let tail = cop * &d * k;

    let mut power = a.clone();
    let mut raw_lagged = Vec::with_capacity(3);
    for _ in 0..3 {
        raw_lagged.push(k * bop * &power * &tail);
        power = &power * a;
    }
    let raw_lagged: [DMatrix<f64>; 3] = raw_lagged.try_into().expect("exactly three lags");

    let lifted = bop.transpose() * k * bop;
    let raw_triple: Vec<DMatrix<f64>> = (0..kernel.dim())
        .map(|c| {
            let mid = DMatrix::from_diagonal(&lifted.column(c).into_owned());
            k * bop * a * mid * a * &tail
        })
        .collect();

    MomentSet::finish(
        raw_lagged,
        raw_triple,
        kernel,
        pi_merged,
        Provenance::Population,
    )
}

/// Streaming accumulator for the raw moments: one pass, O(m^3) state.
///
/// Push outputs in order; lagged and triple moments for every lag with at
/// least one complete term can be read off at any point.
#[derive(Debug, Clone)]
pub struct MomentAccumulator {
    emissions: Vec<Gaussian>,
    ring: [DVector<f64>; 4],
    count: usize,
    lag_sums: [DMatrix<f64>; 3],
    triple_sums: Vec<DMatrix<f64>>,
}

impl MomentAccumulator {
    pub fn new(emissions: &[Gaussian]) -> Self {
        let m = emissions.len();
        Self {
            emissions: emissions.to_vec(),
            ring: std::array::from_fn(|_| DVector::zeros(m)),
            count: 0,
            lag_sums: std::array::from_fn(|_| DMatrix::zeros(m, m)),
            triple_sums: vec![DMatrix::zeros(m, m); m],
        }
    }

    pub fn push(&mut self, y: f64) {
        let m = self.emissions.len();
        let dens = DVector::from_fn(m, |i, _| self.emissions[i].density(y));
        let l = self.count;
        for t in 1..=3usize {
            if l >= t {
                let past = &self.ring[(l - t) % 4];
                self.lag_sums[t - 1].ger(1.0, past, &dens, 1.0);
            }
        }
        if l >= 2 {
            let first = self.ring[(l - 2) % 4].clone();
            let mid = self.ring[(l - 1) % 4].clone();
            for (c, sum) in self.triple_sums.iter_mut().enumerate() {
                sum.ger(mid[c], &first, &dens, 1.0);
            }
        }
        self.ring[l % 4] = dens;
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Raw lagged moment at lag `t` (1, 2, or 3), normalized by the number
    /// of complete terms; `None` until the first term exists.
    pub fn lagged_moment(&self, t: usize) -> Option<DMatrix<f64>> {
        assert!((1..=3).contains(&t));
        (self.count > t).then(|| &self.lag_sums[t - 1] / (self.count - t) as f64)
    }

    /// Raw consecutive triple moments, one per middle component.
    pub fn triple_moments(&self) -> Option<Vec<DMatrix<f64>>> {
        (self.count > 2).then(|| {
            self.triple_sums
                .iter()
                .map(|s| s / (self.count - 2) as f64)
                .collect()
        })
    }
}

/// Empirical moments of an output sequence, with the emission parameters and
/// merged stationary weights treated as known inputs.
pub fn empirical_moments(
    y: &[f64],
    emissions: &[Gaussian],
    pi_merged: &DVector<f64>,
    kernel: &Kernel,
) -> Result<MomentSet> {
    if y.len() < 4 {
        return Err(Error::SequenceTooShort {
            len: y.len(),
            min: 4,
        });
    }
    if emissions.len() != kernel.dim() {
        return Err(Error::Dimension(format!(
            "{} emission components, kernel dimension {}",
            emissions.len(),
            kernel.dim()
        )));
    }
    let mut acc = MomentAccumulator::new(emissions);
    for &v in y {
        acc.push(v);
    }
    let raw_lagged = [
        acc.lagged_moment(1).expect("len >= 4"),
        acc.lagged_moment(2).expect("len >= 4"),
        acc.lagged_moment(3).expect("len >= 4"),
    ];
    let raw_triple = acc.triple_moments().expect("len >= 4");
    MomentSet::finish(
        raw_lagged,
        raw_triple,
        kernel,
        pi_merged,
        Provenance::Empirical { t_len: y.len() },
    )
}
