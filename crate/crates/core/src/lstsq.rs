// SPDX-License-Identifier: Apache-2.0

//! Dense least squares via Householder QR with column pivoting.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Minimizes `||A x - b||` where `A` is given column-major as `columns`
/// (each of length `m`). Both inputs are consumed as scratch.
///
/// Pivoting picks the column with the largest remaining norm relative to its
/// original norm, so the rank decision does not depend on column units. A
/// column whose relative remaining norm falls below `10 * max(m, p) * eps`
/// makes the problem rank deficient.
pub(crate) fn solve<T: Scalar>(mut columns: Vec<Vec<T>>, mut rhs: Vec<T>) -> Result<Vec<T>> {
    let p = columns.len();
    let m = rhs.len();
    if m < p {
        return Err(Error::TooFewPoints { needed: p, got: m });
    }
    debug_assert!(columns.iter().all(|c| c.len() == m));

    let tol = T::epsilon() * T::from_usize_lossy(10 * m.max(p));
    let mut orig_norm: Vec<T> = columns.iter().map(|c| norm(c)).collect();
    let mut perm: Vec<usize> = (0..p).collect();

    for k in 0..p {
        let mut best = k;
        let mut best_rel = T::neg_infinity();
        for j in k..p {
            let rel = if orig_norm[j] > T::zero() {
                norm(&columns[j][k..]) / orig_norm[j]
            } else {
                T::zero()
            };
            if rel > best_rel {
                best_rel = rel;
                best = j;
            }
        }
        if !(best_rel > tol) {
            return Err(Error::RankDeficient);
        }
        columns.swap(k, best);
        orig_norm.swap(k, best);
        perm.swap(k, best);

        let (head, tail) = columns.split_at_mut(k + 1);
        let v = &mut head[k][k..];
        let alpha = {
            let nrm = norm(v);
            if v[0] > T::zero() {
                -nrm
            } else {
                nrm
            }
        };
        v[0] = v[0] - alpha;
        let vnorm2: T = v.iter().map(|&a| a * a).sum();
        if vnorm2 > T::zero() {
            let two = T::lit(2.0);
            for col in tail.iter_mut() {
                reflect(v, &mut col[k..], two / vnorm2);
            }
            reflect(v, &mut rhs[k..], two / vnorm2);
        }
        head[k][k] = alpha;
    }

    let mut x = vec![T::zero(); p];
    for k in (0..p).rev() {
        let mut acc = rhs[k];
        for j in k + 1..p {
            acc = acc - columns[j][k] * x[j];
        }
        x[k] = acc / columns[k][k];
    }
    let mut out = vec![T::zero(); p];
    for (k, &orig) in perm.iter().enumerate() {
        out[orig] = x[k];
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::RankDeficient);
    }
    Ok(out)
}

fn norm<T: Scalar>(v: &[T]) -> T {
    // scaled to avoid overflow on large coordinates
    let scale = v.iter().fold(T::zero(), |m, &a| m.max(a.abs()));
    if scale == T::zero() {
        return T::zero();
    }
    let s: T = v.iter().map(|&a| (a / scale) * (a / scale)).sum();
    scale * s.sqrt()
}

fn reflect<T: Scalar>(v: &[T], target: &mut [T], factor: T) {
    let w: T = v.iter().zip(target.iter()).map(|(&a, &b)| a * b).sum();
    let s = w * factor;
    for (t, &a) in target.iter_mut().zip(v) {
        *t = *t - s * a;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_system() {
        // [2 1; 1 3] x = [3; 5] -> x = (0.8, 1.4)
        let x = solve(vec![vec![2.0, 1.0], vec![1.0, 3.0]], vec![3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8f64).abs() < 1e-14);
        assert!((x[1] - 1.4f64).abs() < 1e-14);
    }

    #[test]
    fn overdetermined_line() {
        // y = 1 + 2t sampled exactly
        let t: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let ones = vec![1.0; 6];
        let y: Vec<f64> = t.iter().map(|t| 1.0 + 2.0 * t).collect();
        let x = solve(vec![ones, t], y).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn dependent_columns() {
        let a = vec![1.0, 2.0, 3.0];
        let b = vec![2.0, 4.0, 6.0];
        assert!(matches!(
            solve(vec![a, b], vec![1.0, 1.0, 1.0]),
            Err(Error::RankDeficient)
        ));
        assert!(matches!(
            solve(vec![vec![0.0f32; 3]], vec![1.0; 3]),
            Err(Error::RankDeficient)
        ));
    }
}
