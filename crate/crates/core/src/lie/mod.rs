// SPDX-License-Identifier: Apache-2.0

//! Local information extraction: Gaussian-kernel estimates of the first-order
//! intensity of the nonground points, its gradient and its Hessian, reduced
//! per point to the eigen-ratio feature
//! `v = -ln(l1^2 / (l1^2 + l2^2 + l3^2))` with `|l1| <= |l2| <= |l3|`.
//!
//! Surface-like neighbourhoods (roofs, walls) have one near-zero curvature
//! direction and a large `v`; volumetric ones (tree crowns) stay near the
//! `ln 3` floor.

mod eigen;
mod grid;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{IndexSet, Point3, PointCloud};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use eigen::{eigvals_sym3, EigenTriple, HessianEstimate};
pub use grid::{build_grid_index, GridIndex};

/// Cap applied to `v` when the least eigenvalue vanishes.
pub const V_MAX: f64 = 50.0;
/// Below this squared-eigenvalue total the feature is undefined.
pub const MIN_EIGEN_ENERGY: f64 = 1e-30;
/// Default grid truncation, in bandwidths per axis.
pub const DEFAULT_TRUNCATION: f64 = 5.0;

/// Per-axis Gaussian kernel bandwidths in feet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidth<T> {
    pub hx: T,
    pub hy: T,
    pub hz: T,
}

impl<T: Scalar> Bandwidth<T> {
    /// Horizontal bandwidth shared by x and y, separate vertical bandwidth.
    pub fn new(horizontal: T, vertical: T) -> Result<Self> {
        Self::anisotropic(horizontal, horizontal, vertical)
    }

    /// Fully independent per-axis bandwidths.
    pub fn anisotropic(hx: T, hy: T, hz: T) -> Result<Self> {
        for (name, h) in [("hx", hx), ("hy", hy), ("hz", hz)] {
            if !(h > T::zero() && h.is_finite()) {
                return Err(Error::Config(format!("bandwidth {name} must be positive, got {h}")));
            }
        }
        Ok(Self { hx, hy, hz })
    }

    pub fn max(&self) -> T {
        self.hx.max(self.hy).max(self.hz)
    }
}

impl Default for Bandwidth<f64> {
    fn default() -> Self {
        Self {
            hx: 5.0,
            hy: 5.0,
            hz: 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SumMode {
    /// Every set member contributes.
    Exact,
    /// Members beyond the truncation ellipsoid are skipped via a spatial hash.
    #[default]
    Grid,
}

impl std::str::FromStr for SumMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "exact" => Ok(SumMode::Exact),
            "grid" => Ok(SumMode::Grid),
            other => Err(format!("unknown mode {other:?} (expected exact or grid)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LieFeature<T> {
    pub v: T,
    pub valid: bool,
}

/// Kernel constants derived from a bandwidth.
#[derive(Debug, Clone, Copy)]
struct Kernel<T> {
    norm: T,
    inv_h2: Point3<T>,
    h2: Point3<T>,
}

impl<T: Scalar> Kernel<T> {
    fn new(h: &Bandwidth<T>) -> Self {
        let two_pi = T::lit(std::f64::consts::TAU);
        Self {
            norm: T::one() / (two_pi * two_pi.sqrt() * h.hx * h.hy * h.hz),
            inv_h2: Point3::new(
                T::one() / (h.hx * h.hx),
                T::one() / (h.hy * h.hy),
                T::one() / (h.hz * h.hz),
            ),
            h2: Point3::new(h.hx * h.hx, h.hy * h.hy, h.hz * h.hz),
        }
    }

    /// Squared Mahalanobis length of a displacement.
    #[inline]
    fn quad(&self, d: &Point3<T>) -> T {
        d.x * d.x * self.inv_h2.x + d.y * d.y * self.inv_h2.y + d.z * d.z * self.inv_h2.z
    }

    #[inline]
    fn value_at(&self, q: T) -> T {
        self.norm * (-q * T::lit(0.5)).exp()
    }
}

/// Gaussian product kernel `K_h(delta)`.
pub fn kernel_value<T: Scalar>(delta: &Point3<T>, h: &Bandwidth<T>) -> T {
    let k = Kernel::new(h);
    k.value_at(k.quad(delta))
}

/// Kernel sums over a fixed point subset.
///
/// In grid mode contributions with `(dx/hx)^2 + (dy/hy)^2 + (dz/hz)^2 >
/// truncation^2` are dropped; the neglected weight per point is at most
/// `exp(-truncation^2 / 2)` of the peak.
pub struct KernelEstimator<'a, T> {
    cloud: &'a PointCloud<T>,
    set: &'a IndexSet,
    kernel: Kernel<T>,
    grid: Option<(GridIndex<T>, T, T)>,
}

impl<'a, T: Scalar> KernelEstimator<'a, T> {
    pub fn new(
        cloud: &'a PointCloud<T>,
        set: &'a IndexSet,
        h: &Bandwidth<T>,
        mode: SumMode,
        truncation: T,
    ) -> Result<Self> {
        set.validate(cloud.len())?;
        if set.is_empty() {
            return Err(Error::EmptyInput("kernel sum over an empty point set".into()));
        }
        let grid = match mode {
            SumMode::Exact => None,
            SumMode::Grid => {
                if !(truncation > T::zero() && truncation.is_finite()) {
                    return Err(Error::Config(format!("truncation must be positive, got {truncation}")));
                }
                let radius = truncation * h.max();
                Some((GridIndex::build(cloud, set, radius)?, radius, truncation * truncation))
            }
        };
        Ok(Self {
            cloud,
            set,
            kernel: Kernel::new(h),
            grid,
        })
    }

    /// Visits `(p_i - p, K_h(p_i - p))` for each contributing point in a
    /// fixed order.
    #[inline]
    fn for_each_term(&self, p: &Point3<T>, mut f: impl FnMut(Point3<T>, T)) {
        match &self.grid {
            None => {
                for i in self.set.iter() {
                    let d = self.cloud.position(i) - *p;
                    f(d, self.kernel.value_at(self.kernel.quad(&d)));
                }
            }
            Some((grid, radius, max_q)) => grid.for_each_candidate(p, *radius, |i| {
                let d = self.cloud.position(i) - *p;
                let q = self.kernel.quad(&d);
                if q <= *max_q {
                    f(d, self.kernel.value_at(q));
                }
            }),
        }
    }

    pub fn intensity(&self, p: &Point3<T>) -> T {
        let mut acc = T::zero();
        self.for_each_term(p, |_, k| acc = acc + k);
        acc
    }

    /// Analytic gradient of the intensity estimate with respect to `p`.
    pub fn gradient(&self, p: &Point3<T>) -> Point3<T> {
        let inv = self.kernel.inv_h2;
        let mut acc = Point3::default();
        self.for_each_term(p, |d, k| {
            acc = acc + Point3::new(d.x * inv.x, d.y * inv.y, d.z * inv.z) * k;
        });
        acc
    }

    /// Analytic Hessian of the intensity estimate.
    pub fn hessian(&self, p: &Point3<T>) -> HessianEstimate<T> {
        let Kernel { inv_h2: inv, h2, .. } = self.kernel;
        let mut h = HessianEstimate::default();
        self.for_each_term(p, |d, k| {
            let ux = d.x * inv.x;
            let uy = d.y * inv.y;
            let uz = d.z * inv.z;
            h.xx = h.xx + k * (d.x * d.x - h2.x) * inv.x * inv.x;
            h.yy = h.yy + k * (d.y * d.y - h2.y) * inv.y * inv.y;
            h.zz = h.zz + k * (d.z * d.z - h2.z) * inv.z * inv.z;
            h.xy = h.xy + k * ux * uy;
            h.xz = h.xz + k * ux * uz;
            h.yz = h.yz + k * uy * uz;
        });
        h
    }
}

pub fn estimate_intensity<T: Scalar>(
    cloud: &PointCloud<T>,
    set: &IndexSet,
    p: &Point3<T>,
    h: &Bandwidth<T>,
    mode: SumMode,
) -> Result<T> {
    let est = KernelEstimator::new(cloud, set, h, mode, T::lit(DEFAULT_TRUNCATION))?;
    Ok(est.intensity(p))
}

pub fn estimate_gradient<T: Scalar>(
    cloud: &PointCloud<T>,
    set: &IndexSet,
    p: &Point3<T>,
    h: &Bandwidth<T>,
) -> Result<Point3<T>> {
    let est = KernelEstimator::new(cloud, set, h, SumMode::Exact, T::lit(DEFAULT_TRUNCATION))?;
    Ok(est.gradient(p))
}

pub fn estimate_hessian<T: Scalar>(
    cloud: &PointCloud<T>,
    set: &IndexSet,
    p: &Point3<T>,
    h: &Bandwidth<T>,
    mode: SumMode,
) -> Result<HessianEstimate<T>> {
    let est = KernelEstimator::new(cloud, set, h, mode, T::lit(DEFAULT_TRUNCATION))?;
    Ok(est.hessian(p))
}

/// Eigen-ratio feature of one Hessian's spectrum.
pub fn feature_v<T: Scalar>(eigs: &EigenTriple<T>) -> LieFeature<T> {
    let [l1, l2, l3] = eigs.values;
    let energy = l1 * l1 + l2 * l2 + l3 * l3;
    if !(energy >= T::lit(MIN_EIGEN_ENERGY)) {
        return LieFeature {
            v: T::zero(),
            valid: false,
        };
    }
    let v_max = T::lit(V_MAX);
    let share = l1 * l1 / energy;
    let v = if share > T::zero() {
        (-share.ln()).min(v_max)
    } else {
        v_max
    };
    LieFeature { v, valid: true }
}

/// Features for every index in `nonground`, computed from kernel sums over
/// the nonground points themselves (each point included in its own sum).
/// Entries outside `nonground` are `None`.
pub fn compute_features<T: Scalar>(
    cloud: &PointCloud<T>,
    nonground: &IndexSet,
    h: &Bandwidth<T>,
    mode: SumMode,
    truncation: T,
) -> Result<Vec<Option<LieFeature<T>>>> {
    if nonground.is_empty() {
        return Err(Error::EmptyInput("no nonground points for feature extraction".into()));
    }
    let est = KernelEstimator::new(cloud, nonground, h, mode, truncation)?;
    let computed: Vec<LieFeature<T>> = nonground
        .as_slice()
        .par_iter()
        .map(|&i| {
            let hess = est.hessian(&cloud.position(i));
            feature_v(&eigvals_sym3(&hess))
        })
        .collect();
    let mut out = vec![None; cloud.len()];
    for (i, f) in nonground.iter().zip(computed) {
        out[i] = Some(f);
    }
    Ok(out)
}
