//! Decomposition of a 2-aliased transition matrix into a merged chain plus
//! three rank-one corrections.
//!
//! With the aliased pair in the last two positions, any column-stochastic
//! `A` splits as
//!
//! ```text
//! A = C_b * A_merged * B  +  C_b * d_out * c_b'  +  b * d_in' * B  +  kappa * b * c_b'
//! ```
//!
//! where `B` merges the pair, `C_b` lifts the merged chain back using the
//! split weight `beta`, and `(d_out, d_in, kappa)` carry everything that
//! distinguishes the two aliased states: exit behavior, entry behavior, and
//! the internal 2x2 dynamics. The operators are materialized as explicit
//! matrices so each term of the identity can be checked on its own.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Entries of `P(pair | j)` at or below this level count as "no entry
/// support": the relative entry probability is defined as zero there instead
/// of amplifying numerical dust into huge ratios.
pub const SUPPORT_EPS: f64 = 1e-14;

/// Merge operator `B`: identity on non-aliased states, sums the last two.
pub fn merge_operator(n: usize) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(n - 1, n);
    for i in 0..n - 2 {
        b[(i, i)] = 1.0;
    }
    b[(n - 2, n - 2)] = 1.0;
    b[(n - 2, n - 1)] = 1.0;
    b
}

/// Lift operator `C_beta`: identity on non-aliased states, splits the merged
/// state with weights `(beta, 1 - beta)`.
pub fn lift_operator(n: usize, beta: f64) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(n, n - 1);
    for i in 0..n - 2 {
        c[(i, i)] = 1.0;
    }
    c[(n - 2, n - 2)] = beta;
    c[(n - 1, n - 2)] = 1.0 - beta;
    c
}

/// Sign vector `b = e_{n-1} - e_n` spanning the aliased direction.
pub fn alias_sign(n: usize) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    v[n - 2] = 1.0;
    v[n - 1] = -1.0;
    v
}

/// Weight covector `c_beta = (0, .., 0, 1 - beta, -beta)`.
pub fn alias_weights(n: usize, beta: f64) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    v[n - 2] = 1.0 - beta;
    v[n - 1] = -beta;
    v
}

/// The five components of the decomposition.
#[derive(Debug, Clone)]
pub struct AliasDecomposition {
    /// Merged `(n-1) x (n-1)` column-stochastic chain.
    pub a_merged: DMatrix<f64>,
    /// Split weight of the first aliased state within the pair.
    pub beta: f64,
    /// Relative entry probabilities, one per source state (length n).
    pub alpha: DVector<f64>,
    /// Exit difference between the aliased states (length n-1).
    pub delta_out: DVector<f64>,
    /// Entry imbalance relative to `beta` (length n-1).
    pub delta_in: DVector<f64>,
    /// Internal-dynamics scalar.
    pub kappa: f64,
}

fn check_inputs(a: &DMatrix<f64>, beta: f64) -> Result<usize> {
    let n = a.nrows();
    if !a.is_square() || n < 2 {
        return Err(Error::Dimension(format!(
            "expected square matrix with n >= 2, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidBeta(beta));
    }
    Ok(n)
}

/// Merged chain `B A C_beta`, collapsing the last two states.
pub fn merge(a: &DMatrix<f64>, beta: f64) -> Result<DMatrix<f64>> {
    let n = check_inputs(a, beta)?;
    Ok(merge_operator(n) * a * lift_operator(n, beta))
}

/// Relative probability of landing in state `n-1` rather than `n`,
/// conditional on entering the pair from state `j`; zero off the entry
/// support.
pub fn relative_entry(a: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = check_inputs(a, 0.0)?;
    let mut alpha = DVector::zeros(n);
    for j in 0..n {
        let into_pair = a[(n - 2, j)] + a[(n - 1, j)];
        if into_pair > SUPPORT_EPS {
            alpha[j] = a[(n - 2, j)] / into_pair;
        }
    }
    Ok(alpha)
}

/// Computes all five components for a matrix whose aliased pair is last.
///
/// `beta` is the stationary split weight when decomposing a concrete model,
/// but any value in `[0, 1]` is accepted; the learner re-estimates it.
pub fn decompose(a: &DMatrix<f64>, beta: f64) -> Result<AliasDecomposition> {
    let n = check_inputs(a, beta)?;
    let m = n - 1;
    let alpha = relative_entry(a)?;
    let p_hi = a[(n - 2, n - 2)] + a[(n - 1, n - 2)];
    let p_lo = a[(n - 2, n - 1)] + a[(n - 1, n - 1)];

    let mut delta_out = DVector::zeros(m);
    for i in 0..m - 1 {
        delta_out[i] = a[(i, n - 2)] - a[(i, n - 1)];
    }
    delta_out[m - 1] = p_hi - p_lo;

    let mut delta_in = DVector::zeros(m);
    for (j, entry) in delta_in.iter_mut().enumerate().take(m - 1) {
        let into_pair = a[(n - 2, j)] + a[(n - 1, j)];
        *entry = (alpha[j] - beta) * into_pair;
    }
    delta_in[m - 1] =
        beta * (alpha[n - 2] - beta) * p_hi + (1.0 - beta) * (alpha[n - 1] - beta) * p_lo;

    let kappa = (alpha[n - 2] - beta) * p_hi - (alpha[n - 1] - beta) * p_lo;

    Ok(AliasDecomposition {
        a_merged: merge(a, beta)?,
        beta,
        alpha,
        delta_out,
        delta_in,
        kappa,
    })
}

/// Rebuilds the full matrix from its components; exact inverse of
/// [`decompose`] up to floating-point roundoff.
pub fn reconstruct(d: &AliasDecomposition) -> Result<DMatrix<f64>> {
    let m = d.a_merged.nrows();
    if d.a_merged.ncols() != m || d.delta_out.len() != m || d.delta_in.len() != m {
        return Err(Error::Dimension(
            "decomposition components disagree on the merged dimension".into(),
        ));
    }
    let n = m + 1;
    let b = merge_operator(n);
    let c = lift_operator(n, d.beta);
    let sign = alias_sign(n);
    let weights = alias_weights(n, d.beta);
    Ok(&c * &d.a_merged * &b
        + (&c * &d.delta_out) * weights.transpose()
        + &sign * d.delta_in.transpose() * &b
        + d.kappa * sign * weights.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate;
    use crate::linalg::singular_values;
    use crate::model::reference_model;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn reference_beta() -> f64 {
        111.0 / 218.0
    }

    #[test]
    fn merged_reference_edges() {
        let h = reference_model();
        let beta = h.stationary().unwrap().beta.unwrap();
        assert_abs_diff_eq!(beta, reference_beta(), epsilon = 1e-12);
        let merged = merge(h.transition(), beta).unwrap();
        // Oracle: the explicit operator product.
        let oracle = merge_operator(4) * h.transition() * lift_operator(4, beta);
        assert!((&merged - &oracle).abs().max() < 1e-15);
        assert_abs_diff_eq!(merged[(0, 2)], (1.0 - beta) * 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(merged[(1, 2)], beta * 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(merged[(2, 0)], 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(merged[(2, 1)], 0.5, epsilon = 1e-12);
        assert!(crate::linalg::is_column_stochastic(&merged, 1e-12));
    }

    #[test]
    fn merge_with_beta_one_uses_first_aliased_column() {
        let h = reference_model();
        let a = h.transition();
        let merged = merge(a, 1.0).unwrap();
        let b = merge_operator(4);
        let expected = &b * a.column(2);
        for i in 0..3 {
            assert_abs_diff_eq!(merged[(i, 2)], expected[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn merge_two_state_chain_to_scalar() {
        let a = DMatrix::from_row_slice(2, 2, &[0.3, 0.6, 0.7, 0.4]);
        let merged = merge(&a, 0.25).unwrap();
        assert_eq!(merged.shape(), (1, 1));
        assert_abs_diff_eq!(merged[(0, 0)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn merge_rejects_bad_beta() {
        let a = DMatrix::from_element(2, 2, 0.5);
        assert!(matches!(merge(&a, 1.5), Err(Error::InvalidBeta(_))));
    }

    #[test]
    fn relative_entry_reference() {
        let h = reference_model();
        let alpha = relative_entry(h.transition()).unwrap();
        // Direct ratios of the printed entries, e.g. alpha_3 = 0.1 / 0.8.
        let expected = [0.0, 1.0, 0.125, 0.5];
        for j in 0..4 {
            assert_abs_diff_eq!(alpha[j], expected[j], epsilon = 1e-12);
        }
    }

    #[test]
    fn relative_entry_off_support_is_zero() {
        let mut a = DMatrix::from_element(3, 3, 1.0 / 3.0);
        a[(1, 0)] = 0.0; // no entry into the pair from state 0
        a[(2, 0)] = 0.0;
        a[(0, 0)] = 1.0;
        let alpha = relative_entry(&a).unwrap();
        assert_eq!(alpha[0], 0.0);
    }

    #[test]
    fn relative_entry_is_one_when_only_first_reachable() {
        let mut a = DMatrix::from_element(3, 3, 1.0 / 3.0);
        a[(2, 0)] = 0.0;
        a[(1, 0)] = 2.0 / 3.0;
        let alpha = relative_entry(&a).unwrap();
        assert_abs_diff_eq!(alpha[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn decompose_reference_values() {
        let h = reference_model();
        let beta = reference_beta();
        let d = decompose(h.transition(), beta).unwrap();
        // Exit differences, column n-1 minus column n of the printed matrix.
        assert_abs_diff_eq!(d.delta_out[0], -0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(d.delta_out[1], 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(d.delta_out[2], 0.6, epsilon = 1e-12);
        // Independent route: the operator identities
        // d_out = B A b, d_in' = c_b' A C_b, kappa = c_b' A b.
        let a = h.transition();
        let (b, c) = (merge_operator(4), lift_operator(4, beta));
        let (sign, w) = (alias_sign(4), alias_weights(4, beta));
        let d_out_oracle = &b * a * &sign;
        let d_in_oracle = (w.transpose() * a * &c).transpose();
        let kappa_oracle = (w.transpose() * a * &sign)[(0, 0)];
        assert!((&d.delta_out - d_out_oracle).abs().max() < 1e-14);
        assert!((&d.delta_in - d_in_oracle).abs().max() < 1e-14);
        assert_abs_diff_eq!(d.kappa, kappa_oracle, epsilon = 1e-14);
    }

    #[test]
    fn identical_aliased_columns_have_zero_exit_difference() {
        let mut a = DMatrix::from_element(4, 4, 0.25);
        a.set_column(3, &a.column(2).into_owned());
        let d = decompose(&a, 0.4).unwrap();
        assert!(d.delta_out.abs().max() < 1e-15);
    }

    #[test]
    fn entry_balance_gives_zero_delta_in() {
        // alpha_j == beta for every entering state makes the entry imbalance
        // vanish identically, for that beta.
        let beta = 0.3;
        let n = 4;
        let mut a = DMatrix::zeros(n, n);
        for j in 0..n {
            let into_pair = 0.5;
            a[(n - 2, j)] = beta * into_pair;
            a[(n - 1, j)] = (1.0 - beta) * into_pair;
            a[(0, j)] = 0.2;
            a[(1, j)] = 0.3;
        }
        let d = decompose(&a, beta).unwrap();
        assert!(d.delta_in.abs().max() < 1e-15);
    }

    #[test]
    fn reconstruct_reference_round_trip() {
        let h = reference_model();
        let d = decompose(h.transition(), reference_beta()).unwrap();
        let back = reconstruct(&d).unwrap();
        assert!((h.transition() - &back).abs().max() < 1e-12);
    }

    #[test]
    fn reconstruct_without_corrections_is_lifted_merge() {
        let h = reference_model();
        let beta = reference_beta();
        let mut d = decompose(h.transition(), beta).unwrap();
        d.delta_out.fill(0.0);
        d.delta_in.fill(0.0);
        d.kappa = 0.0;
        let lifted = reconstruct(&d).unwrap();
        let expected = lift_operator(4, beta) * &d.a_merged * merge_operator(4);
        assert!((&lifted - &expected).abs().max() < 1e-15);
    }

    #[test]
    fn correction_terms_have_rank_at_most_one() {
        let h = reference_model();
        let beta = reference_beta();
        let d = decompose(h.transition(), beta).unwrap();
        let n = 4;
        let (b, c) = (merge_operator(n), lift_operator(n, beta));
        let (sign, w) = (alias_sign(n), alias_weights(n, beta));
        let terms = [
            (&c * &d.delta_out) * w.transpose(),
            &sign * d.delta_in.transpose() * &b,
            d.kappa * &sign * w.transpose(),
        ];
        for term in &terms {
            let sv = singular_values(term);
            assert!(sv.len() < 2 || sv[1] < 1e-12, "term has rank > 1: {sv}");
        }
    }

    #[test]
    fn lifting_identities_at_stationary_beta() {
        let h = reference_model();
        let info = h.stationary().unwrap();
        let beta = info.beta.unwrap();
        let merged = merge(h.transition(), beta).unwrap();
        let b = merge_operator(4);
        let c = lift_operator(4, beta);
        let pi_merged = &b * &info.pi;
        assert!((&merged - &b * h.transition() * &c).abs().max() < 1e-14);
        assert!((&info.pi - &c * &pi_merged).abs().max() < 1e-12);
        // The merged stationary distribution is the fixed point of the
        // merged chain.
        assert!((&merged * &pi_merged - &pi_merged).abs().max() < 1e-12);
    }

    #[test]
    fn random_round_trips() {
        let mut rng = generate::rng(1234);
        for _ in 0..100 {
            let (a, beta) = generate::random_aliased_matrix(&mut rng, 5, 0.3);
            let d = decompose(&a, beta).unwrap();
            let back = reconstruct(&d).unwrap();
            assert!((&a - &back).abs().max() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn round_trip_with_arbitrary_beta(seed in 0u64..10_000, beta in 0.0f64..=1.0) {
            let mut rng = generate::rng(seed);
            let (a, _) = generate::random_aliased_matrix(&mut rng, 4, 0.0);
            let d = decompose(&a, beta).unwrap();
            let back = reconstruct(&d).unwrap();
            prop_assert!((&a - &back).abs().max() < 1e-12);
        }

        #[test]
        fn reconstruction_preserves_column_sums(seed in 0u64..10_000) {
            let mut rng = generate::rng(seed);
            let (a, beta) = generate::random_aliased_matrix(&mut rng, 6, 0.4);
            let d = decompose(&a, beta).unwrap();
            let back = reconstruct(&d).unwrap();
            prop_assert!(crate::linalg::column_sum_error(&back) < 1e-12);
        }
    }
}
