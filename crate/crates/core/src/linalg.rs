//! Dense linear-algebra helpers: column spaces, ranks, least squares and
//! nonnegative least squares.

use nalgebra::{DMatrix, DVector};

use crate::scalar::Scalar;

/// Orthonormal basis (as columns) of the column space of `m`.
///
/// Singular values at or below `rel * σ_max` are discarded; a zero matrix has
/// an empty basis.
pub fn column_space<T: Scalar>(m: &DMatrix<T>, rel: T) -> DMatrix<T> {
    let rows = m.nrows();
    if m.ncols() == 0 || rows == 0 {
        return DMatrix::zeros(rows, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd
        .singular_values
        .iter()
        .copied()
        .fold(T::zero(), |a, b| a.max(b));
    if smax <= T::zero() {
        return DMatrix::zeros(rows, 0);
    }
    let cut = rel * smax;
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > cut)
        .map(|(i, _)| i)
        .collect();
    DMatrix::from_fn(rows, keep.len(), |r, c| u[(r, keep[c])])
}

/// Numerical rank with the same relative threshold as [`column_space`].
pub fn rank<T: Scalar>(m: &DMatrix<T>, rel: T) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().singular_values();
    let smax = sv.iter().copied().fold(T::zero(), |a, b| a.max(b));
    if smax <= T::zero() {
        return 0;
    }
    sv.iter().filter(|s| **s > rel * smax).count()
}

/// Largest distance of a column of `vectors` from the span of the orthonormal
/// columns of `basis`.
pub fn max_distance_to_span<T: Scalar>(vectors: &DMatrix<T>, basis: &DMatrix<T>) -> T {
    let mut worst = T::zero();
    for c in 0..vectors.ncols() {
        let v = vectors.column(c).into_owned();
        let r = if basis.ncols() == 0 {
            v.norm()
        } else {
            let coeffs = basis.transpose() * &v;
            (&v - basis * coeffs).norm()
        };
        worst = worst.max(r);
    }
    worst
}

/// Minimum-norm least-squares solution of `a x = b` via the SVD.
pub fn least_squares<T: Scalar>(a: &DMatrix<T>, b: &DVector<T>, rel: T) -> DVector<T> {
    if a.ncols() == 0 {
        return DVector::zeros(0);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd
        .singular_values
        .iter()
        .copied()
        .fold(T::zero(), |x, y| x.max(y));
    let eps = if smax > T::zero() {
        rel * smax
    } else {
        T::machine_epsilon()
    };
    svd.solve(b, eps)
        .expect("both singular vector sets computed")
}

/// Horizontal concatenation of equally tall matrices.
pub fn hstack<T: Scalar>(blocks: &[&DMatrix<T>]) -> DMatrix<T> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.view_mut((0, at), (rows, b.ncols())).copy_from(*b);
        at += b.ncols();
    }
    out
}

/// Lawson–Hanson nonnegative least squares: minimise `‖a x − b‖₂` over `x ≥ 0`.
///
/// Returns the minimiser and the residual norm.
pub fn nnls<T: Scalar>(a: &DMatrix<T>, b: &DVector<T>) -> (DVector<T>, T) {
    let n = a.ncols();
    let mut x = DVector::<T>::zeros(n);
    let mut passive = vec![false; n];
    let scale = a.norm().max(T::one()) * b.norm().max(T::one());
    let tol = T::lit(1e3) * T::machine_epsilon() * scale;
    let max_outer = 3 * n + 10;

    for _ in 0..max_outer {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].partial_cmp(&w[j]).unwrap_or(std::cmp::Ordering::Equal));
        let Some(t) = candidate else { break };
        passive[t] = true;

        loop {
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let sub = DMatrix::from_fn(a.nrows(), idx.len(), |r, c| a[(r, idx[c])]);
            let zp = least_squares(&sub, b, T::machine_epsilon() * T::lit(100.0));
            let mut z = DVector::<T>::zeros(n);
            for (k, &j) in idx.iter().enumerate() {
                z[j] = zp[k];
            }
            if idx.iter().all(|&j| z[j] > T::zero()) {
                x = z;
                break;
            }
            let mut alpha = T::one();
            for &j in &idx {
                if z[j] <= T::zero() {
                    let denom = x[j] - z[j];
                    if denom > T::zero() {
                        alpha = alpha.min(x[j] / denom);
                    }
                }
            }
            x = &x + (&z - &x) * alpha;
            for &j in &idx {
                if x[j] <= tol {
                    x[j] = T::zero();
                    passive[j] = false;
                }
            }
            if !passive.iter().any(|p| *p) {
                break;
            }
        }
    }
    let residual = (b - a * &x).norm();
    (x, residual)
}

/// Frobenius norm of `a · b`.
pub fn product_norm<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> T {
    (a * b).norm()
}
