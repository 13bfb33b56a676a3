//! Model representation, validation, stationary analysis, and simulation.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::emission::Gaussian;
use crate::error::{Error, Result};

/// Pairs of distinct emission parameters closer than this scale-free
/// separation get a numerical-fragility warning from [`Hmm::validate`].
pub const SEPARATION_WARNING: f64 = 0.05;

const STOCHASTIC_TOL: f64 = 1e-12;

/// A parametric-output HMM with column-stochastic transition matrix
/// `a[(i, j)] = P(next = i | current = j)`.
///
/// If two emission parameters coincide (or a pair is designated explicitly),
/// the states are relabeled on construction so the aliased pair sits last;
/// [`Hmm::ingest_permutation`] maps the internal order back to the caller's.
#[derive(Debug, Clone)]
pub struct Hmm {
    a: DMatrix<f64>,
    emissions: Vec<Gaussian>,
    initial: Option<DVector<f64>>,
    aliased_pair: Option<(usize, usize)>,
    permutation: Vec<usize>,
}

/// One violated model invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    ColumnSum { column: usize, sum: f64 },
    NegativeEntry { row: usize, column: usize, value: f64 },
    Reducible,
    Periodic { period: usize },
    InitialNotDistribution { sum: f64 },
    InitialNegative { index: usize, value: f64 },
    ExcessAliasing { states: Vec<usize> },
    DesignatedPairNotAliased { pair: (usize, usize) },
}

/// Non-fatal observations about a model.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// Distinct emissions nearly coincide; kernel-based steps get noisy.
    CloseEmissions { i: usize, j: usize, separation: f64 },
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Warning>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Stationary distribution plus the aliased-pair split weight.
#[derive(Debug, Clone)]
pub struct StationaryInfo {
    /// Unique fixed point of the transition matrix, strictly positive.
    pub pi: DVector<f64>,
    /// `pi[n-2] / (pi[n-2] + pi[n-1])` when an aliased pair is designated.
    pub beta: Option<f64>,
    /// Stationary distribution of the merged chain (aliased pair summed).
    pub pi_merged: Option<DVector<f64>>,
}

impl Hmm {
    /// Builds a model, auto-designating an aliased pair from coinciding
    /// emission parameters and relabeling states so the pair sits last.
    pub fn new(
        a: DMatrix<f64>,
        emissions: Vec<Gaussian>,
        initial: Option<DVector<f64>>,
    ) -> Result<Self> {
        let pair = detect_aliased_pair(&emissions);
        Self::with_aliased_pair(a, emissions, initial, pair)
    }

    /// Same as [`Hmm::new`] but with the aliased pair designated explicitly
    /// (0-based state indices).
    pub fn with_aliased_pair(
        a: DMatrix<f64>,
        emissions: Vec<Gaussian>,
        initial: Option<DVector<f64>>,
        pair: Option<(usize, usize)>,
    ) -> Result<Self> {
        let n = emissions.len();
        if n == 0 {
            return Err(Error::InvalidModel("model needs at least one state".into()));
        }
        if a.nrows() != n || a.ncols() != n {
            return Err(Error::Dimension(format!(
                "transition matrix is {}x{}, expected {n}x{n}",
                a.nrows(),
                a.ncols()
            )));
        }
        if let Some(init) = &initial {
            if init.len() != n {
                return Err(Error::Dimension(format!(
                    "initial distribution has length {}, expected {n}",
                    init.len()
                )));
            }
        }
        let permutation = match pair {
            None => (0..n).collect::<Vec<_>>(),
            Some((i, j)) => {
                if i >= n || j >= n || i == j {
                    return Err(Error::InvalidModel(format!(
                        "aliased pair ({i}, {j}) out of range for n = {n}"
                    )));
                }
                let (lo, hi) = (i.min(j), i.max(j));
                let mut order: Vec<usize> = (0..n).filter(|&s| s != lo && s != hi).collect();
                order.push(lo);
                order.push(hi);
                order
            }
        };
        let a = crate::linalg::permute_states(&a, &permutation);
        let emissions: Vec<Gaussian> = permutation.iter().map(|&s| emissions[s]).collect();
        let initial = initial.map(|init| {
            DVector::from_iterator(n, permutation.iter().map(|&s| init[s]))
        });
        Ok(Self {
            a,
            emissions,
            initial,
            aliased_pair: pair.map(|_| (n - 2, n - 1)),
            permutation,
        })
    }

    pub fn n(&self) -> usize {
        self.emissions.len()
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn emissions(&self) -> &[Gaussian] {
        &self.emissions
    }

    pub fn initial(&self) -> Option<&DVector<f64>> {
        self.initial.as_ref()
    }

    /// Designated aliased pair in internal (canonical) labeling; always
    /// `(n-2, n-1)` when present.
    pub fn aliased_pair(&self) -> Option<(usize, usize)> {
        self.aliased_pair
    }

    /// Internal state index -> caller-supplied state index.
    pub fn ingest_permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// The unique emission parameters, aliased component last.
    ///
    /// For a non-aliased model this is simply all emissions.
    pub fn unique_emissions(&self) -> Vec<Gaussian> {
        match self.aliased_pair {
            Some(_) => self.emissions[..self.n() - 1].to_vec(),
            None => self.emissions.clone(),
        }
    }

    /// Checks every model invariant and reports all violations found.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let n = self.n();

        for j in 0..n {
            let sum = self.a.column(j).sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                report.violations.push(Violation::ColumnSum { column: j, sum });
            }
            for i in 0..n {
                if self.a[(i, j)] < 0.0 {
                    report.violations.push(Violation::NegativeEntry {
                        row: i,
                        column: j,
                        value: self.a[(i, j)],
                    });
                }
            }
        }

        if let Some(init) = &self.initial {
            let sum = init.sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                report
                    .violations
                    .push(Violation::InitialNotDistribution { sum });
            }
            for (i, &v) in init.iter().enumerate() {
                if v < 0.0 {
                    report
                        .violations
                        .push(Violation::InitialNegative { index: i, value: v });
                }
            }
        }

        if !is_strongly_connected(&self.a) {
            report.violations.push(Violation::Reducible);
        } else {
            let p = period(&self.a);
            if p > 1 {
                report.violations.push(Violation::Periodic { period: p });
            }
        }

        self.check_alias_structure(&mut report);
        report
    }

    fn check_alias_structure(&self, report: &mut ValidationReport) {
        let n = self.n();
        // Group states by exactly equal emission parameters.
        let mut groups: Vec<Vec<usize>> = Vec::new();
        'outer: for s in 0..n {
            for g in groups.iter_mut() {
                if self.emissions[g[0]] == self.emissions[s] {
                    g.push(s);
                    continue 'outer;
                }
            }
            groups.push(vec![s]);
        }
        let mut pairs = 0;
        for g in &groups {
            if g.len() > 2 {
                report
                    .violations
                    .push(Violation::ExcessAliasing { states: g.clone() });
            } else if g.len() == 2 {
                pairs += 1;
                if pairs > 1 {
                    report
                        .violations
                        .push(Violation::ExcessAliasing { states: g.clone() });
                }
            }
        }
        if let Some(pair) = self.aliased_pair {
            if self.emissions[pair.0] != self.emissions[pair.1] {
                report
                    .violations
                    .push(Violation::DesignatedPairNotAliased { pair });
            }
        }
        for (gi, g) in groups.iter().enumerate() {
            for h in groups.iter().skip(gi + 1) {
                let (i, j) = (g[0], h[0]);
                let sep = self.emissions[i].separation(&self.emissions[j]);
                if sep < SEPARATION_WARNING {
                    report.warnings.push(Warning::CloseEmissions {
                        i,
                        j,
                        separation: sep,
                    });
                }
            }
        }
    }

    /// Unique stationary distribution via a direct linear solve: one balance
    /// equation is replaced by the normalization row.
    pub fn stationary(&self) -> Result<StationaryInfo> {
        stationary_of(&self.a).map(|pi| {
            let (beta, pi_merged) = match self.aliased_pair {
                Some((hi, lo)) => {
                    let mass = pi[hi] + pi[lo];
                    let m = self.n() - 1;
                    let mut merged = DVector::zeros(m);
                    for i in 0..m - 1 {
                        merged[i] = pi[i];
                    }
                    merged[m - 1] = mass;
                    (Some(pi[hi] / mass), Some(merged))
                }
                None => (None, None),
            };
            StationaryInfo { pi, beta, pi_merged }
        })
    }

    /// Generates `t_len` steps of hidden states (0-based) and outputs.
    ///
    /// The start state is drawn from the model's initial distribution when
    /// present, otherwise from the stationary distribution. Equal seeds give
    /// bit-identical sequences.
    pub fn simulate(&self, t_len: usize, seed: u64) -> Result<(Vec<usize>, Vec<f64>)> {
        if t_len == 0 {
            return Err(Error::InvalidConfig("sequence length must be >= 1".into()));
        }
        let report = self.validate();
        if !report.is_clean() {
            return Err(Error::InvalidModel(format!(
                "cannot simulate from an invalid model: {:?}",
                report.violations
            )));
        }
        let start = match &self.initial {
            Some(init) => init.clone(),
            None => self.stationary()?.pi,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut states = Vec::with_capacity(t_len);
        let mut outputs = Vec::with_capacity(t_len);
        let mut state = sample_categorical(&mut rng, start.iter().copied());
        for _ in 0..t_len {
            states.push(state);
            outputs.push(self.emissions[state].sample(&mut rng));
            state = sample_categorical(&mut rng, self.a.column(state).iter().copied());
        }
        Ok((states, outputs))
    }
}

/// Finds the designated aliased pair from exactly coinciding parameters.
/// Returns `None` when all parameters are distinct; excess coincidences are
/// left for `validate` to flag.
fn detect_aliased_pair(emissions: &[Gaussian]) -> Option<(usize, usize)> {
    for i in 0..emissions.len() {
        for j in i + 1..emissions.len() {
            if emissions[i] == emissions[j] {
                return Some((i, j));
            }
        }
    }
    None
}

fn sample_categorical<R: Rng>(rng: &mut R, weights: impl Iterator<Item = f64>) -> usize {
    let w: Vec<f64> = weights.collect();
    let r: f64 = rng.random::<f64>() * w.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, &p) in w.iter().enumerate() {
        acc += p;
        if r < acc {
            return i;
        }
    }
    w.len() - 1
}

/// Stationary distribution of a column-stochastic matrix.
pub fn stationary_of(a: &DMatrix<f64>) -> Result<DVector<f64>> {
    if !is_strongly_connected(a) {
        return Err(Error::NotErgodic(
            "positive-entry digraph is not strongly connected".into(),
        ));
    }
    let p = period(a);
    if p > 1 {
        return Err(Error::NotErgodic(format!("chain is periodic with period {p}")));
    }
    let n = a.nrows();
    let mut m = a.clone();
    for i in 0..n {
        m[(i, i)] -= 1.0;
    }
    for j in 0..n {
        m[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let pi = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NotErgodic("singular balance system".into()))?;
    if pi.iter().any(|&x| x <= 0.0) {
        return Err(Error::NotErgodic(
            "stationary solve produced non-positive entries".into(),
        ));
    }
    Ok(pi)
}

/// Strong connectivity of the digraph with an edge j -> i iff `a[(i, j)] > 0`.
fn is_strongly_connected(a: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    let fwd = |from: usize| (0..n).filter(move |&to| a[(to, from)] > 0.0);
    let bwd = |from: usize| (0..n).filter(move |&to| a[(from, to)] > 0.0);
    reaches_all(n, fwd) && reaches_all(n, bwd)
}

fn reaches_all<I: Iterator<Item = usize>>(n: usize, neighbors: impl Fn(usize) -> I) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for v in neighbors(u) {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Period of an (assumed strongly connected) chain: gcd over all edges
/// `u -> v` of `dist(u) + 1 - dist(v)` for BFS distances from state 0.
fn period(a: &DMatrix<f64>) -> usize {
    let n = a.nrows();
    let mut dist = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::from([0usize]);
    dist[0] = 0;
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if a[(v, u)] > 0.0 && dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut g: u64 = 0;
    for u in 0..n {
        for v in 0..n {
            if a[(v, u)] > 0.0 && dist[u] != usize::MAX && dist[v] != usize::MAX {
                let diff = (dist[u] as i64 + 1 - dist[v] as i64).unsigned_abs();
                g = gcd(g, diff);
            }
        }
    }
    g.max(1) as usize
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// The 4-state reference model used across tests and shipped as
/// `data/paper4.json`: states 3 and 4 share the `N(0, 1)` output.
#[doc(hidden)]
pub fn reference_model() -> Hmm {
    let a = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.3, 0.25, 0.0, 0.8, //
            0.6, 0.25, 0.2, 0.0, //
            0.0, 0.5, 0.1, 0.1, //
            0.1, 0.0, 0.7, 0.1,
        ],
    );
    let emissions = vec![
        Gaussian::new(3.0, 1.0).unwrap(),
        Gaussian::new(6.0, 1.0).unwrap(),
        Gaussian::new(0.0, 1.0).unwrap(),
        Gaussian::new(0.0, 1.0).unwrap(),
    ];
    Hmm::new(a, emissions, None).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn power_iteration_pi(a: &DMatrix<f64>, steps: usize) -> DVector<f64> {
        let n = a.nrows();
        let mut v = DVector::from_element(n, 1.0 / n as f64);
        for _ in 0..steps {
            v = a * v;
            v /= v.sum();
        }
        v
    }

    #[test]
    fn reference_model_is_clean() {
        let report = reference_model().validate();
        assert!(report.is_clean(), "unexpected violations: {:?}", report.violations);
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn disconnected_chain_is_flagged() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let e = vec![
            Gaussian::new(0.0, 1.0).unwrap(),
            Gaussian::new(5.0, 1.0).unwrap(),
        ];
        let report = Hmm::new(a, e, None).unwrap().validate();
        assert!(report.violations.contains(&Violation::Reducible));
    }

    #[test]
    fn bad_column_sum_is_flagged() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.4, 0.5]);
        let e = vec![
            Gaussian::new(0.0, 1.0).unwrap(),
            Gaussian::new(5.0, 1.0).unwrap(),
        ];
        let report = Hmm::new(a, e, None).unwrap().validate();
        assert!(matches!(
            report.violations[0],
            Violation::ColumnSum { column: 0, .. }
        ));
    }

    #[test]
    fn two_cycle_is_periodic() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let e = vec![
            Gaussian::new(0.0, 1.0).unwrap(),
            Gaussian::new(5.0, 1.0).unwrap(),
        ];
        let report = Hmm::new(a, e, None).unwrap().validate();
        assert!(report.violations.contains(&Violation::Periodic { period: 2 }));
    }

    #[test]
    fn excess_aliasing_is_flagged() {
        let a = DMatrix::from_element(3, 3, 1.0 / 3.0);
        let e = vec![Gaussian::new(0.0, 1.0).unwrap(); 3];
        let report = Hmm::new(a, e, None).unwrap().validate();
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::ExcessAliasing { .. })));
    }

    #[test]
    fn close_emissions_warn() {
        let a = DMatrix::from_element(2, 2, 0.5);
        let e = vec![
            Gaussian::new(0.0, 1.0).unwrap(),
            Gaussian::new(0.01, 1.0).unwrap(),
        ];
        let report = Hmm::new(a, e, None).unwrap().validate();
        assert!(report.is_clean());
        assert!(matches!(report.warnings[0], Warning::CloseEmissions { .. }));
    }

    #[test]
    fn doubly_stochastic_has_uniform_stationary() {
        let a = DMatrix::from_row_slice(
            3,
            3,
            &[0.2, 0.3, 0.5, 0.5, 0.2, 0.3, 0.3, 0.5, 0.2],
        );
        let e = vec![
            Gaussian::new(0.0, 1.0).unwrap(),
            Gaussian::new(4.0, 1.0).unwrap(),
            Gaussian::new(8.0, 1.0).unwrap(),
        ];
        let info = Hmm::new(a, e, None).unwrap().stationary().unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(info.pi[i], 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn symmetric_two_state_stationary() {
        let a = DMatrix::from_element(2, 2, 0.5);
        let e = vec![
            Gaussian::new(0.0, 1.0).unwrap(),
            Gaussian::new(5.0, 1.0).unwrap(),
        ];
        let info = Hmm::new(a, e, None).unwrap().stationary().unwrap();
        assert_abs_diff_eq!(info.pi[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(info.pi[1], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn reference_stationary_matches_oracles() {
        let h = reference_model();
        let info = h.stationary().unwrap();
        // Fixed-point residual.
        let residual = (h.transition() * &info.pi - &info.pi).abs().max();
        assert!(residual < 1e-10);
        // Independent oracle: long power iteration.
        let oracle = power_iteration_pi(h.transition(), 10_000);
        assert!((&info.pi - &oracle).abs().max() < 1e-12);
        // Frozen values (exact solution is (465, 446, 555/2.912..) / 2912).
        let expected = [465.0 / 1456.0, 446.0 / 1456.0, 555.0 / 2912.0, 535.0 / 2912.0];
        for i in 0..4 {
            assert_abs_diff_eq!(info.pi[i], expected[i], epsilon = 1e-12);
        }
        assert_abs_diff_eq!(info.beta.unwrap(), 111.0 / 218.0, epsilon = 1e-12);
        let merged = info.pi_merged.unwrap();
        assert_abs_diff_eq!(merged[2], expected[2] + expected[3], epsilon = 1e-14);
    }

    #[test]
    fn non_ergodic_stationary_errors() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let e = vec![
            Gaussian::new(0.0, 1.0).unwrap(),
            Gaussian::new(5.0, 1.0).unwrap(),
        ];
        assert!(matches!(
            Hmm::new(a, e, None).unwrap().stationary(),
            Err(Error::NotErgodic(_))
        ));
    }

    #[test]
    fn deterministic_cycle_alternates() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let e = vec![
            Gaussian::new(0.0, 1.0).unwrap(),
            Gaussian::new(5.0, 1.0).unwrap(),
        ];
        let init = DVector::from_row_slice(&[1.0, 0.0]);
        // Periodic chains fail validation, so sample the walk directly.
        let h = Hmm::new(a.clone(), e, Some(init)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut state = 0usize;
        let mut states = vec![];
        for _ in 0..6 {
            states.push(state);
            state = sample_categorical(&mut rng, h.transition().column(state).iter().copied());
        }
        assert_eq!(states, vec![0, 1, 0, 1, 0, 1]);
    }

    #[test]
    fn simulate_is_reproducible_and_matches_stationary() {
        let h = reference_model();
        let (s1, y1) = h.simulate(200_000, 9).unwrap();
        let (s2, y2) = h.simulate(200_000, 9).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(y1, y2);
        let info = h.stationary().unwrap();
        let mut freq = [0.0f64; 4];
        for &s in &s1 {
            freq[s] += 1.0;
        }
        for f in freq.iter_mut() {
            *f /= s1.len() as f64;
        }
        for i in 0..4 {
            assert_abs_diff_eq!(freq[i], info.pi[i], epsilon = 0.01);
        }
    }

    #[test]
    fn single_step_simulation() {
        let h = reference_model();
        let (s, y) = h.simulate(1, 3).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(y.len(), 1);
    }

    #[test]
    fn ingestion_permutes_aliased_pair_last() {
        // Aliased states supplied as (0, 2); canonical order must move them
        // to the back and keep the matrix consistent.
        let a = DMatrix::from_row_slice(
            3,
            3,
            &[0.1, 0.3, 0.5, 0.4, 0.4, 0.3, 0.5, 0.3, 0.2],
        );
        let e = vec![
            Gaussian::new(0.0, 1.0).unwrap(),
            Gaussian::new(5.0, 1.0).unwrap(),
            Gaussian::new(0.0, 1.0).unwrap(),
        ];
        let h = Hmm::new(a.clone(), e, None).unwrap();
        assert_eq!(h.aliased_pair(), Some((1, 2)));
        assert_eq!(h.ingest_permutation(), &[1, 0, 2]);
        // P(new 0 | new 1) = P(old 1 | old 0) = 0.4.
        assert_abs_diff_eq!(h.transition()[(0, 1)], 0.4, epsilon = 1e-15);
        assert_eq!(h.emissions()[1], h.emissions()[2]);
        assert_eq!(h.unique_emissions().len(), 2);
    }
}
