// SPDX-License-Identifier: Apache-2.0

//! Eigenvalues of symmetric 3x3 matrices by cyclic Jacobi rotations.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Six upper-triangle entries of a symmetric 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HessianEstimate<T> {
    pub xx: T,
    pub xy: T,
    pub xz: T,
    pub yy: T,
    pub yz: T,
    pub zz: T,
}

impl<T: Scalar> HessianEstimate<T> {
    pub fn from_matrix(m: &[[T; 3]; 3]) -> Self {
        Self {
            xx: m[0][0],
            xy: m[0][1],
            xz: m[0][2],
            yy: m[1][1],
            yz: m[1][2],
            zz: m[2][2],
        }
    }

    pub fn to_matrix(&self) -> [[T; 3]; 3] {
        [
            [self.xx, self.xy, self.xz],
            [self.xy, self.yy, self.yz],
            [self.xz, self.yz, self.zz],
        ]
    }

    pub fn trace(&self) -> T {
        self.xx + self.yy + self.zz
    }

    pub fn determinant(&self) -> T {
        self.xx * (self.yy * self.zz - self.yz * self.yz) - self.xy * (self.xy * self.zz - self.yz * self.xz)
            + self.xz * (self.xy * self.yz - self.yy * self.xz)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.entries().iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn entries(&self) -> [T; 6] {
        [self.xx, self.xy, self.xz, self.yy, self.yz, self.zz]
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|v| v.is_finite())
    }
}

/// Eigenvalues ordered by ascending absolute value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenTriple<T> {
    pub values: [T; 3],
}

impl<T: Scalar> EigenTriple<T> {
    pub fn least(&self) -> T {
        self.values[0]
    }

    pub fn sum(&self) -> T {
        self.values[0] + self.values[1] + self.values[2]
    }

    pub fn product(&self) -> T {
        self.values[0] * self.values[1] * self.values[2]
    }
}

const MAX_SWEEPS: usize = 64;

/// Real eigenvalues of a symmetric matrix, sorted by `|lambda|`.
pub fn eigvals_sym3<T: Scalar>(h: &HessianEstimate<T>) -> EigenTriple<T> {
    let mut a = h.to_matrix();
    let scale = h.max_abs();
    if scale == T::zero() || !scale.is_finite() {
        return sorted([a[0][0], a[1][1], a[2][2]]);
    }
    // work on the scaled matrix so tiny or huge entries do not underflow
    for row in a.iter_mut() {
        for v in row.iter_mut() {
            *v = *v / scale;
        }
    }
    let eps = T::epsilon();
    for _ in 0..MAX_SWEEPS {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        let diag = a[0][0] * a[0][0] + a[1][1] * a[1][1] + a[2][2] * a[2][2];
        if off <= eps * eps * (diag + off) * T::lit(0.25) || off == T::zero() {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            rotate(&mut a, p, q);
        }
    }
    let d = [a[0][0] * scale, a[1][1] * scale, a[2][2] * scale];
    sorted(d)
}

/// Zeroes `a[p][q]` with a Jacobi rotation.
fn rotate<T: Scalar>(a: &mut [[T; 3]; 3], p: usize, q: usize) {
    let apq = a[p][q];
    if apq == T::zero() {
        return;
    }
    let theta = (a[q][q] - a[p][p]) / (T::lit(2.0) * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
    let c = T::one() / (t * t + T::one()).sqrt();
    let s = t * c;
    let tau = s / (T::one() + c);

    a[p][p] = a[p][p] - t * apq;
    a[q][q] = a[q][q] + t * apq;
    a[p][q] = T::zero();
    a[q][p] = T::zero();
    let r = 3 - p - q;
    let arp = a[r][p];
    let arq = a[r][q];
    let new_rp = arp - s * (arq + tau * arp);
    let new_rq = arq + s * (arp - tau * arq);
    a[r][p] = new_rp;
    a[p][r] = new_rp;
    a[r][q] = new_rq;
    a[q][r] = new_rq;
}

fn sorted<T: Scalar>(mut v: [T; 3]) -> EigenTriple<T> {
    v.sort_by(|a, b| {
        a.abs()
            .partial_cmp(&b.abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal))
    });
    EigenTriple { values: v }
}
