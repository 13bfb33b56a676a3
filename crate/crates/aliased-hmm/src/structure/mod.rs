//! Minimality and strict identifiability of 2-aliased chains.
//!
//! Minimality asks whether the aliased pair can be merged without changing
//! the output law; it reduces to non-vanishing of the exit and entry
//! differences from the decomposition. Identifiability asks whether any
//! *other* transition matrix produces the same law: the candidates form a
//! two-parameter family of similarity transforms, and the model is strictly
//! identifiable exactly when the set of parameters keeping that transform
//! non-negative collapses to the original point.

mod diagrams;
mod region;

pub use diagrams::{effective_region, Constraint, Diagram, DiagramSource, EffectiveRegion, Shape};
pub use region::{feasible_region, BlockConstraints, Branch, Curve, FeasibleRegion};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::decomp::{self, AliasDecomposition};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{stationary_of, Hmm};

/// Infinity-norm level below which an exit/entry difference counts as zero.
pub const ZERO_TOL: f64 = 1e-12;

/// Which minimality conditions apply, determined by the start distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StartCase {
    /// Initial mass on the aliased pair is split differently from the
    /// stationary weight: only the exit difference must be nonzero.
    SkewedSplit,
    /// No initial mass on the pair or a stationary split (the default
    /// stationary start lands here): exit *and* entry differences must be
    /// nonzero.
    StationarySplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroedComponent {
    DeltaOut,
    DeltaIn,
}

/// Outcome of the minimality test with the evidence behind it.
#[derive(Debug, Clone, Serialize)]
pub struct MinimalityVerdict {
    pub minimal: bool,
    pub case: StartCase,
    pub delta_out_norm: f64,
    pub delta_in_norm: f64,
    /// Components found to vanish; non-empty exactly when not minimal.
    pub zeroed: Vec<ZeroedComponent>,
}

/// Decides minimality of a 2-aliased model.
///
/// `initial` overrides the model's own initial distribution; with neither
/// present the chain starts stationary. A skewed start needs only a nonzero
/// exit difference; a stationary-split start additionally needs a nonzero
/// entry difference.
pub fn is_minimal(h: &Hmm, initial: Option<&DVector<f64>>) -> Result<MinimalityVerdict> {
    let (hi, lo) = h.aliased_pair().ok_or(Error::NotAliased)?;
    let info = h.stationary()?;
    let beta = info.beta.expect("aliased model has a split weight");
    let d = decomp::decompose(h.transition(), beta)?;

    let case = match initial.or(h.initial()) {
        None => StartCase::StationarySplit,
        Some(init) => {
            let pair_mass = init[hi] + init[lo];
            if pair_mass.abs() <= ZERO_TOL {
                StartCase::StationarySplit
            } else {
                let beta0 = init[hi] / pair_mass;
                if (beta0 - beta).abs() <= ZERO_TOL {
                    StartCase::StationarySplit
                } else {
                    StartCase::SkewedSplit
                }
            }
        }
    };

    let out_norm = d.delta_out.abs().max();
    let in_norm = d.delta_in.abs().max();
    let mut zeroed = Vec::new();
    if out_norm < ZERO_TOL {
        zeroed.push(ZeroedComponent::DeltaOut);
    }
    if case == StartCase::StationarySplit && in_norm < ZERO_TOL {
        zeroed.push(ZeroedComponent::DeltaIn);
    }
    Ok(MinimalityVerdict {
        minimal: zeroed.is_empty(),
        case,
        delta_out_norm: out_norm,
        delta_in_norm: in_norm,
        zeroed,
    })
}

/// Two-parameter similarity transform acting on the aliased pair.
///
/// Columns of the result always sum to one; entries may be negative, and
/// the set of `(tau_hi, tau_lo)` keeping them non-negative is exactly the
/// family of equivalent transition matrices. `(1, 0)` returns `a` itself.
pub fn similarity_transform(a: &DMatrix<f64>, tau_hi: f64, tau_lo: f64) -> Result<DMatrix<f64>> {
    if !(tau_hi > tau_lo) {
        return Err(Error::InvalidTau(tau_hi, tau_lo));
    }
    let n = a.nrows();
    if !a.is_square() || n < 2 {
        return Err(Error::Dimension("similarity transform needs a square matrix".into()));
    }
    let det = tau_hi - tau_lo;
    // Right action: mix the last two columns.
    let mut m = a.clone();
    let col_hi = a.column(n - 2) * tau_hi + a.column(n - 1) * (1.0 - tau_hi);
    let col_lo = a.column(n - 2) * tau_lo + a.column(n - 1) * (1.0 - tau_lo);
    m.set_column(n - 2, &col_hi);
    m.set_column(n - 1, &col_lo);
    // Left action: unmix the last two rows.
    let row_hi = (m.row(n - 2) * (1.0 - tau_lo) - m.row(n - 1) * tau_lo) / det;
    let row_lo = (m.row(n - 1) * tau_hi - m.row(n - 2) * (1.0 - tau_hi)) / det;
    m.set_row(n - 2, &row_hi);
    m.set_row(n - 1, &row_lo);
    Ok(m)
}

/// Canonical form shared by the region and diagram analyses: the model must
/// be minimal, and the aliased labels are swapped if needed so the first
/// aliased state has the larger probability of staying inside the pair.
pub(crate) struct Canonical {
    pub a: DMatrix<f64>,
    pub swapped: bool,
    pub decomp: AliasDecomposition,
}

pub(crate) fn canonicalize(a: &DMatrix<f64>) -> Result<Canonical> {
    let n = a.nrows();
    if !a.is_square() || n < 2 {
        return Err(Error::Dimension("expected a square transition matrix".into()));
    }
    let check = |a: &DMatrix<f64>| -> Result<AliasDecomposition> {
        let pi = stationary_of(a)?;
        let beta = pi[n - 2] / (pi[n - 2] + pi[n - 1]);
        decomp::decompose(a, beta)
    };
    let d = check(a)?;
    if d.delta_out.abs().max() < ZERO_TOL {
        return Err(Error::NotMinimal("exit difference vanishes".into()));
    }
    if d.delta_in.abs().max() < ZERO_TOL {
        return Err(Error::NotMinimal("entry difference vanishes".into()));
    }
    let p_hi = a[(n - 2, n - 2)] + a[(n - 1, n - 2)];
    let p_lo = a[(n - 2, n - 1)] + a[(n - 1, n - 1)];
    if p_hi >= p_lo {
        Ok(Canonical {
            a: a.clone(),
            swapped: false,
            decomp: d,
        })
    } else {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.swap(n - 2, n - 1);
        let swapped = linalg::permute_states(a, &perm);
        let d = check(&swapped)?;
        Ok(Canonical {
            a: swapped,
            swapped: true,
            decomp: d,
        })
    }
}

/// Full structural report: minimality, the feasible-region geometry, the
/// local constraint diagrams, and the identifiability verdict.
#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub n: usize,
    pub minimality: MinimalityVerdict,
    /// Present only for minimal models; the geometry is undefined otherwise.
    pub region: Option<FeasibleRegion>,
    pub effective: Option<EffectiveRegion>,
    /// Diagram-intersection verdict (primary decision).
    pub identifiable: Option<bool>,
    /// Region sampling verdict (secondary; should agree with `identifiable`).
    pub singleton: Option<bool>,
    pub warnings: Vec<String>,
}

/// Runs the whole structural analysis for a 2-aliased model under its
/// stationary start.
pub fn analyze(h: &Hmm) -> Result<AnalysisReport> {
    let minimality = is_minimal(h, None)?;
    let mut report = AnalysisReport {
        n: h.n(),
        minimality,
        region: None,
        effective: None,
        identifiable: None,
        singleton: None,
        warnings: Vec::new(),
    };
    for w in h.validate().warnings {
        report.warnings.push(format!("{w:?}"));
    }
    if !report.minimality.minimal {
        return Ok(report);
    }
    let region = feasible_region(h.transition())?;
    let effective = effective_region(h.transition())?;
    report.identifiable = Some(effective.identifiable);
    report.singleton = Some(region.singleton);
    if region.singleton != effective.identifiable {
        report.warnings.push(
            "region sampling and diagram intersection disagree on identifiability".into(),
        );
    }
    report.warnings.extend(effective.near_ties.iter().cloned());
    report.region = Some(region);
    report.effective = Some(effective);
    Ok(report)
}
