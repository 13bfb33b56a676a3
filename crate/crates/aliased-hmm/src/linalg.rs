//! Small dense-matrix helpers shared across the crate.

use nalgebra::{DMatrix, DVector};

/// Largest deviation of any column sum from one.
pub fn column_sum_error(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| (c.sum() - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Checks that `a` is square with non-negative entries and unit column sums.
pub fn is_column_stochastic(a: &DMatrix<f64>, tol: f64) -> bool {
    a.is_square() && a.iter().all(|&x| x >= -tol) && column_sum_error(a) <= tol
}

/// Result of projecting a matrix onto the column-stochastic set.
#[derive(Debug, Clone)]
pub struct Projected {
    pub matrix: DMatrix<f64>,
    /// Total mass of negative entries clipped away, summed over the matrix.
    pub negativity_mass: f64,
}

/// Clips negative entries to zero and renormalizes each column to sum one.
///
/// Clipping (rather than a Euclidean simplex projection) preserves the
/// structural zeros that the identifiability analysis keys on. A column with
/// no positive mass left becomes uniform.
pub fn project_column_stochastic(a: &DMatrix<f64>) -> Projected {
    let mut out = a.clone();
    let mut mass = 0.0;
    for mut col in out.column_iter_mut() {
        for x in col.iter_mut() {
            if *x < 0.0 {
                mass += -*x;
                *x = 0.0;
            }
        }
        let s = col.sum();
        if s > 0.0 {
            col /= s;
        } else {
            col.fill(1.0 / col.len() as f64);
        }
    }
    Projected {
        matrix: out,
        negativity_mass: mass,
    }
}

/// Frobenius inner product `<a, b> = sum_ij a_ij b_ij`.
pub fn frob_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Singular values of `a` in descending order.
pub fn singular_values(a: &DMatrix<f64>) -> DVector<f64> {
    a.clone().svd(false, false).singular_values
}

/// Leading singular triple `(sigma_1, u_1, v_1)` of `a`.
pub fn leading_singular_triple(a: &DMatrix<f64>) -> (f64, DVector<f64>, DVector<f64>) {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("svd with u requested");
    let vt = svd.v_t.expect("svd with v_t requested");
    let sigma = svd.singular_values[0];
    (sigma, u.column(0).into(), vt.row(0).transpose())
}

/// Applies the state relabeling `perm` (new index -> old index) to a square
/// matrix: `out[(i, j)] = a[(perm[i], perm[j])]`.
pub fn permute_states(a: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
    let n = perm.len();
    assert_eq!(a.nrows(), n);
    DMatrix::from_fn(n, n, |i, j| a[(perm[i], perm[j])])
}

/// Inverse of a permutation given as new-index -> old-index.
pub fn invert_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    inv
}

/// Row-major nested-array view of a matrix, the layout used in every JSON
/// interface of this crate.
pub fn to_rows(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect())
        .collect()
}

/// Builds a matrix from row-major nested arrays, checking rectangularity.
pub fn from_rows(rows: &[Vec<f64>]) -> Option<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return None;
    }
    Some(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}
