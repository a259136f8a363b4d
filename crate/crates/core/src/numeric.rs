//! Small numeric helpers shared by the operator and analysis modules.

use nalgebra::{DMatrix, DVector};

/// Default relative tolerance for floating-point comparisons of derived
/// quantities (moments, reconstructions, identities).
pub const DEFAULT_REL_TOL: f64 = 1e-9;

/// Relative closeness with an absolute floor of 1.0, so values near zero are
/// compared absolutely. Suitable for moment-scale quantities.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    let scale = a.abs().max(b.abs()).max(1.0);
    (a - b).abs() <= tol * scale
}

/// Strict relative closeness: the scale is the larger magnitude of the two
/// operands. Exact equality short-circuits so 0 == 0 passes.
pub fn rel_close_tight(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Product of a sequence of positive factors. Falls back to summing logs when
/// the sequence is long enough for the running product to drift or overflow.
pub fn product_stable<I>(factors: I) -> f64
where
    I: IntoIterator<Item = f64>,
{
    let vals: Vec<f64> = factors.into_iter().collect();
    if vals.len() <= 30 {
        vals.iter().product()
    } else {
        vals.iter().map(|x| x.ln()).sum::<f64>().exp()
    }
}

/// Rising factorial x (x+1) ... (x+n-1).
pub fn rising(x: f64, n: u32) -> f64 {
    product_stable((0..n).map(|i| x + i as f64))
}

/// Multinomial coefficient n! / (alpha_1! ... alpha_d!) where n = |alpha|.
/// Computed as a product of binomials to stay in range for the window sizes
/// used here.
pub fn multinomial(alpha: &[u32]) -> f64 {
    let mut remaining: u32 = alpha.iter().sum();
    let mut out = 1.0;
    for &a in alpha {
        out *= binomial(remaining, a);
        remaining -= a;
    }
    out
}

/// Binomial coefficient as f64.
pub fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k.min(n));
    let mut out = 1.0;
    for i in 0..k {
        out = out * (n - i) as f64 / (i + 1) as f64;
    }
    out
}

/// Numerical rank and an orthonormal basis of the (right) null space of a
/// real matrix. Singular values at or below `rel_tol * sigma_max` count as
/// zero. A matrix with fewer rows than columns is padded with zero rows so
/// the full right-singular basis is available.
pub fn svd_nullspace(mat: &DMatrix<f64>, rel_tol: f64) -> (usize, Vec<DVector<f64>>) {
    let (rows, cols) = mat.shape();
    let work = if rows < cols {
        let mut padded = DMatrix::zeros(cols, cols);
        padded.view_mut((0, 0), (rows, cols)).copy_from(mat);
        padded
    } else {
        mat.clone()
    };
    let svd = work.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let threshold = rel_tol * sigma_max;
    let mut null = Vec::new();
    let mut rank = 0;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if sigma_max == 0.0 || s <= threshold {
            null.push(v_t.row(i).transpose());
        } else {
            rank += 1;
        }
    }
    (rank, null)
}

/// Numerical rank alone, same threshold convention as [`svd_nullspace`].
pub fn svd_rank(mat: &DMatrix<f64>, rel_tol: f64) -> usize {
    let svd = mat.clone().svd(false, false);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if sigma_max == 0.0 {
        return 0;
    }
    svd.singular_values
        .iter()
        .filter(|&&s| s > rel_tol * sigma_max)
        .count()
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn sym_min_eigenvalue(mat: &DMatrix<f64>) -> f64 {
    let eig = mat.clone().symmetric_eigen();
    eig.eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Spectral norm (largest absolute eigenvalue) of a symmetric matrix.
pub fn sym_spectral_norm(mat: &DMatrix<f64>) -> f64 {
    let eig = mat.clone().symmetric_eigen();
    eig.eigenvalues.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

/// Slope of the least-squares line through the given points.
pub fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multinomial_matches_pascal() {
        assert_eq!(multinomial(&[2, 1]) as i64, 3);
        assert_eq!(multinomial(&[2, 2]) as i64, 6);
        assert_eq!(multinomial(&[3, 0]) as i64, 1);
        assert_eq!(multinomial(&[1, 1, 1]) as i64, 6);
        assert_eq!(multinomial(&[4, 3]) as i64, 35);
    }

    #[test]
    fn stable_product_agrees_with_direct() {
        let vals: Vec<f64> = (1..40).map(|i| 1.0 + 1.0 / i as f64).collect();
        let direct: f64 = vals.iter().product();
        assert!(rel_close_tight(product_stable(vals), direct, 1e-12));
    }

    #[test]
    fn nullspace_of_wide_matrix_is_complete() {
        // 1 x 3 row [1, 1, 1]: rank 1, null space of dimension 2.
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]);
        let (rank, null) = svd_nullspace(&m, 1e-10);
        assert_eq!(rank, 1);
        assert_eq!(null.len(), 2);
        for v in &null {
            assert!((m.clone() * v).norm() < 1e-12);
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn slope_of_exact_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 - 2.0 * i as f64)).collect();
        assert!((least_squares_slope(&pts) + 2.0).abs() < 1e-12);
    }
}
