//! Dense helpers shared by the local weight engines.

use nalgebra::{DMatrix, DVector};

/// Maximum absolute column sum.
pub fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Hager–Higham estimate of ‖A⁻¹‖₁ from solves with A and Aᵀ.
///
/// `solve` and `solve_t` overwrite their argument with A⁻¹x and A⁻ᵀx. Returns
/// infinity if a solve produces non-finite values.
pub fn inverse_norm1_estimate<S, T>(n: usize, mut solve: S, mut solve_t: T) -> f64
where
    S: FnMut(&mut DVector<f64>),
    T: FnMut(&mut DVector<f64>),
{
    if n == 0 {
        return 0.0;
    }
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut est = 0.0;
    let mut last_j = usize::MAX;
    for _ in 0..5 {
        let mut y = x.clone();
        solve(&mut y);
        if !y.iter().all(|v| v.is_finite()) {
            return f64::INFINITY;
        }
        est = y.lp_norm(1);
        let mut z = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        solve_t(&mut z);
        let (j, zmax) = z.iter().enumerate().fold(
            (0, 0.0),
            |(bj, bv), (i, v)| {
                if v.abs() > bv {
                    (i, v.abs())
                } else {
                    (bj, bv)
                }
            },
        );
        if zmax <= z.dot(&x) || j == last_j {
            break;
        }
        last_j = j;
        x.fill(0.0);
        x[j] = 1.0;
    }
    // Alternating test vector guards against the classic counterexamples.
    let mut alt = DVector::from_fn(n, |i, _| {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        sign * (1.0 + i as f64 / (n.max(2) - 1) as f64)
    });
    solve(&mut alt);
    let alt_est = 2.0 * alt.lp_norm(1) / (3.0 * n as f64);
    if alt_est.is_finite() {
        est.max(alt_est)
    } else {
        f64::INFINITY
    }
}
