//! Eigenpairs of symmetric tridiagonal matrices: Sturm-sequence bisection for
//! eigenvalues and shifted inverse iteration for the leftmost eigenvector.
//!
//! `diag` holds the `j` diagonal entries and `off` the `j - 1` off-diagonal
//! entries. Zero off-diagonal entries (decoupled blocks) are allowed.

use nalgebra::DVector;

fn scale(diag: &[f64], off: &[f64]) -> f64 {
    let m = diag.iter().chain(off.iter()).fold(0.0_f64, |a, &b| a.max(b.abs()));
    m.max(f64::MIN_POSITIVE)
}

/// Number of eigenvalues strictly less than `x`.
pub fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let pivmin = f64::EPSILON * scale(diag, off) * 1e-3 + f64::MIN_POSITIVE;
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let b2 = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] };
        q = diag[i] - x - if i == 0 { 0.0 } else { b2 / q };
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn gershgorin(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let j = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..j {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < j { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let pad = f64::EPSILON * scale(diag, off) * (j as f64 + 2.0);
    (lo - pad, hi + pad)
}

/// Bracket `[lo, hi]` of the `k`-th smallest eigenvalue (0-based), with no
/// eigenvalue below `lo` other than the first `k`.
pub fn eigenvalue_bracket(diag: &[f64], off: &[f64], k: usize) -> (f64, f64) {
    assert!(k < diag.len(), "eigenvalue index out of range");
    let (mut lo, mut hi) = gershgorin(diag, off);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if hi - lo <= 2.0 * f64::EPSILON * (lo.abs().max(hi.abs())) {
            break;
        }
        if sturm_count(diag, off, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo, hi)
}

/// The `k`-th smallest eigenvalue (0-based).
pub fn kth_eigenvalue(diag: &[f64], off: &[f64], k: usize) -> f64 {
    let (lo, hi) = eigenvalue_bracket(diag, off, k);
    0.5 * (lo + hi)
}

/// Solves `(T - shift I) y = x` by `L D L^T`; `None` when a pivot is not
/// positive, i.e. the shift is not below the spectrum.
fn shifted_ldlt_solve(diag: &[f64], off: &[f64], shift: f64, x: &[f64]) -> Option<Vec<f64>> {
    let j = diag.len();
    let mut d = vec![0.0; j];
    let mut l = vec![0.0; j.saturating_sub(1)];
    d[0] = diag[0] - shift;
    if !(d[0] > 0.0) {
        return None;
    }
    for i in 0..j - 1 {
        l[i] = off[i] / d[i];
        d[i + 1] = diag[i + 1] - shift - l[i] * off[i];
        if !(d[i + 1] > 0.0) {
            return None;
        }
    }
    let mut z = x.to_vec();
    for i in 1..j {
        z[i] -= l[i - 1] * z[i - 1];
    }
    for i in 0..j {
        z[i] /= d[i];
    }
    for i in (0..j - 1).rev() {
        z[i] -= l[i] * z[i + 1];
    }
    Some(z)
}

/// Smallest eigenvalue and a unit eigenvector.
pub fn leftmost_eigenpair(diag: &[f64], off: &[f64]) -> (f64, DVector<f64>) {
    let j = diag.len();
    assert!(j > 0 && off.len() + 1 == j, "malformed tridiagonal matrix");
    if j == 1 {
        return (diag[0], DVector::from_element(1, 1.0));
    }
    let (lo, hi) = eigenvalue_bracket(diag, off, 0);
    let lambda = 0.5 * (lo + hi);
    let sc = scale(diag, off);

    let start: Vec<f64> = (0..j).map(|i| 1.0 + 0.5 * (1.7 * i as f64 + 0.3).sin()).collect();
    let mut gap = (4.0 * f64::EPSILON * sc).max(hi - lo);
    let mut best: Option<DVector<f64>> = None;
    for _ in 0..40 {
        let shift = lo - gap;
        let mut y = start.clone();
        let mut ok = true;
        for _ in 0..4 {
            match shifted_ldlt_solve(diag, off, shift, &y) {
                Some(z) => {
                    let nz = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if !(nz.is_finite() && nz > 0.0) {
                        ok = false;
                        break;
                    }
                    y = z.into_iter().map(|v| v / nz).collect();
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            best = Some(DVector::from_vec(y));
            break;
        }
        gap *= 10.0;
    }
    let vec = best.expect("inverse iteration failed for a symmetric tridiagonal matrix");
    (lambda, vec)
}

/// `T s - lambda s` for diagnostics.
pub fn residual(diag: &[f64], off: &[f64], lambda: f64, s: &DVector<f64>) -> DVector<f64> {
    let j = diag.len();
    DVector::from_fn(j, |i, _| {
        let mut v = (diag[i] - lambda) * s[i];
        if i > 0 {
            v += off[i - 1] * s[i - 1];
        }
        if i + 1 < j {
            v += off[i] * s[i + 1];
        }
        v
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn to_dense(diag: &[f64], off: &[f64]) -> DMatrix<f64> {
        let j = diag.len();
        let mut m = DMatrix::zeros(j, j);
        for i in 0..j {
            m[(i, i)] = diag[i];
            if i + 1 < j {
                m[(i, i + 1)] = off[i];
                m[(i + 1, i)] = off[i];
            }
        }
        m
    }

    #[test]
    fn two_by_two_antidiagonal() {
        let (l, s) = leftmost_eigenpair(&[0.0, 0.0], &[1.0]);
        assert!((l + 1.0).abs() < 1e-14);
        assert!((s[0] + s[1]).abs() < 1e-12);
    }

    #[test]
    fn decoupled_blocks() {
        let diag = [3.0, 1.0, -2.0, 5.0];
        let off = [0.5, 0.0, 0.25];
        let (l, s) = leftmost_eigenpair(&diag, &off);
        let oracle = crate::linalg::min_eigenvalue(&to_dense(&diag, &off)).unwrap();
        assert!((l - oracle).abs() < 1e-13);
        assert!(s[0].abs() < 1e-10 && s[1].abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn matches_dense_oracle(
            diag in prop::collection::vec(-10.0f64..10.0, 1..40),
            seed in prop::collection::vec(-5.0f64..5.0, 40),
        ) {
            let j = diag.len();
            let off: Vec<f64> = seed.into_iter().take(j - 1).collect();
            let dense = to_dense(&diag, &off);
            let (vals, _) = crate::linalg::sorted_eigen(&dense).unwrap();
            let (l, s) = leftmost_eigenpair(&diag, &off);
            let sc = 1.0 + vals.amax();
            prop_assert!((l - vals[0]).abs() <= 1e-12 * sc);
            prop_assert!((s.norm() - 1.0).abs() < 1e-12);
            prop_assert!(residual(&diag, &off, l, &s).norm() <= 1e-10 * sc);
            for k in 0..j {
                prop_assert!((kth_eigenvalue(&diag, &off, k) - vals[k]).abs() <= 1e-12 * sc);
            }
        }
    }
}
