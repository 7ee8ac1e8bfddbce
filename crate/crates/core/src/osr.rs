// SPDX-License-Identifier: Apache-2.0

//! Ground filtering by one-sided regression.
//!
//! The ground is modelled as a central plane `z = b0 + b1 x + b2 y` plus
//! zero-mean Gaussian roughness of variance `phi`; nonground returns sit
//! strictly above it. Each iteration estimates `phi` from the nonpositive
//! residuals only, flags points whose residual exceeds `sqrt(2 phi ln n)`,
//! and refits the plane by least squares on the remaining points.

use serde::{Deserialize, Serialize};

use crate::cloud::{IndexSet, PointCloud};
use crate::error::{Error, Result};
use crate::lstsq;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlaneModel<T> {
    pub beta0: T,
    pub beta1: T,
    pub beta2: T,
}

impl<T: Scalar> PlaneModel<T> {
    pub fn new(beta0: T, beta1: T, beta2: T) -> Self {
        Self { beta0, beta1, beta2 }
    }

    #[inline]
    pub fn eval(&self, x: T, y: T) -> T {
        self.beta0 + self.beta1 * x + self.beta2 * y
    }

    pub fn as_array(&self) -> [T; 3] {
        [self.beta0, self.beta1, self.beta2]
    }

    /// Largest absolute coefficient difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        (self.beta0 - other.beta0)
            .abs()
            .max((self.beta1 - other.beta1).abs())
            .max((self.beta2 - other.beta2).abs())
    }

    pub fn is_finite(&self) -> bool {
        self.beta0.is_finite() && self.beta1.is_finite() && self.beta2.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OsrConfig {
    pub max_iter: usize,
    pub beta_tol: f64,
    pub min_ground: usize,
}

impl Default for OsrConfig {
    fn default() -> Self {
        Self {
            max_iter: 100,
            beta_tol: 1e-10,
            min_ground: 3,
        }
    }
}

impl OsrConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter < 1 {
            return Err(Error::Config("osr.max_iter must be >= 1".into()));
        }
        if !(self.beta_tol > 0.0 && self.beta_tol.is_finite()) {
            return Err(Error::Config("osr.beta_tol must be positive".into()));
        }
        if self.min_ground < 3 {
            return Err(Error::Config("osr.min_ground must be >= 3".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The nonground set repeated.
    SetFixpoint,
    /// Plane coefficients moved less than `beta_tol`.
    BetaTolerance,
    MaxIterations,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OsrIteration<T> {
    pub phi: T,
    pub nonground_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OsrFit<T> {
    pub plane: PlaneModel<T>,
    /// Estimated roughness variance; `sqrt(phi)` is the terrain unevenness.
    pub phi: T,
    pub nonground: IndexSet,
    pub iterations: usize,
    pub converged: bool,
    pub stop: StopReason,
    pub trace: Vec<OsrIteration<T>>,
}

impl<T: Scalar> OsrFit<T> {
    /// Per-point ground flags (`true` = ground).
    pub fn ground_mask(&self, n: usize) -> Vec<bool> {
        let mut mask = vec![true; n];
        for i in self.nonground.iter() {
            mask[i] = false;
        }
        mask
    }
}

/// Least-squares plane through the points of `set`.
///
/// The design `(1, x - mean_x, y - mean_y)` is solved by pivoted QR, so
/// coincident or collinear `(x, y)` layouts are reported instead of producing
/// a meaningless plane.
pub fn fit_ols<T: Scalar>(cloud: &PointCloud<T>, set: &IndexSet) -> Result<PlaneModel<T>> {
    set.validate(cloud.len())?;
    let m = set.len();
    if m < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: m });
    }
    let mf = T::from_usize_lossy(m);
    let (sx, sy) = set.iter().fold((T::zero(), T::zero()), |(sx, sy), i| {
        let p = cloud.position(i);
        (sx + p.x, sy + p.y)
    });
    let (cx, cy) = (sx / mf, sy / mf);

    let mut xs = Vec::with_capacity(m);
    let mut ys = Vec::with_capacity(m);
    let mut zs = Vec::with_capacity(m);
    for i in set.iter() {
        let p = cloud.position(i);
        xs.push(p.x - cx);
        ys.push(p.y - cy);
        zs.push(p.z);
    }
    let b = lstsq::solve(vec![vec![T::one(); m], xs, ys], zs)?;
    let plane = PlaneModel::new(b[0] - b[1] * cx - b[2] * cy, b[1], b[2]);
    if !plane.is_finite() {
        return Err(Error::RankDeficient);
    }
    Ok(plane)
}

/// `e_i = z_i - (b0 + b1 x_i + b2 y_i)` for every point, in index order.
pub fn residuals<T: Scalar>(plane: &PlaneModel<T>, cloud: &PointCloud<T>) -> Vec<T> {
    cloud.positions().map(|p| p.z - plane.eval(p.x, p.y)).collect()
}

/// One-sided variance: mean of the squared nonpositive residuals.
pub fn update_phi<T: Scalar>(residuals: &[T]) -> Result<T> {
    let (sum, count) = residuals
        .iter()
        .filter(|&&e| e <= T::zero())
        .fold((T::zero(), 0usize), |(s, c), &e| (s + e * e, c + 1));
    if count == 0 {
        return Err(Error::DegenerateGroundSet(
            "no nonpositive residuals to estimate the roughness variance".into(),
        ));
    }
    Ok(sum / T::from_usize_lossy(count))
}

/// Flagging threshold `sqrt(2 phi ln n)`.
pub fn outlier_threshold<T: Scalar>(phi: T, n: usize) -> T {
    (T::lit(2.0) * phi * T::from_usize_lossy(n.max(1)).ln()).sqrt()
}

/// Indices whose residual is strictly above `sqrt(2 phi ln n)`.
pub fn detect_outliers<T: Scalar>(residuals: &[T], phi: T, n: usize) -> IndexSet {
    let thr = outlier_threshold(phi, n);
    IndexSet::from_sorted_unchecked(
        residuals
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > thr)
            .map(|(i, _)| i)
            .collect(),
    )
}

/// Runs the one-sided regression from an all-ground start until the
/// nonground set repeats, the plane stops moving, or `max_iter` is reached.
///
/// `n` in the threshold is the size of the whole input cloud. Residuals
/// within a few ulps of the fitted plane are treated as exactly zero so that
/// noiseless planes reach the fixpoint instead of flagging rounding error.
pub fn run_osr<T: Scalar>(cloud: &PointCloud<T>, config: &OsrConfig) -> Result<OsrFit<T>> {
    config.validate()?;
    let n = cloud.len();
    if n < config.min_ground {
        return Err(Error::TooFewPoints {
            needed: config.min_ground,
            got: n,
        });
    }
    let beta_tol = T::lit(config.beta_tol);
    let mut prev_nonground = IndexSet::empty();
    let mut plane = fit_ols(cloud, &IndexSet::all(n))?;
    let mut trace = Vec::new();

    for t in 1..=config.max_iter {
        let (phi, nonground) = evaluate(cloud, &plane)?;
        trace.push(OsrIteration {
            phi,
            nonground_count: nonground.len(),
        });
        let ground_count = n - nonground.len();
        if ground_count < config.min_ground {
            return Err(Error::DegenerateGroundSet(format!(
                "only {ground_count} ground points left at iteration {t} (minimum {})",
                config.min_ground
            )));
        }
        let finish = |plane, phi, nonground, stop, trace| OsrFit {
            plane,
            phi,
            nonground,
            iterations: t,
            converged: stop != StopReason::MaxIterations,
            stop,
            trace,
        };
        if nonground == prev_nonground {
            return Ok(finish(plane, phi, nonground, StopReason::SetFixpoint, trace));
        }
        if t == config.max_iter {
            return Ok(finish(plane, phi, nonground, StopReason::MaxIterations, trace));
        }
        let next = fit_ols(cloud, &nonground.complement(n))?;
        if next.max_abs_diff(&plane) < beta_tol {
            let (phi, nonground) = evaluate(cloud, &next)?;
            if n - nonground.len() < config.min_ground {
                return Err(Error::DegenerateGroundSet(
                    "ground set collapsed at the final plane".into(),
                ));
            }
            return Ok(finish(next, phi, nonground, StopReason::BetaTolerance, trace));
        }
        plane = next;
        prev_nonground = nonground;
    }
    unreachable!("loop returns at max_iter")
}

fn evaluate<T: Scalar>(cloud: &PointCloud<T>, plane: &PlaneModel<T>) -> Result<(T, IndexSet)> {
    let mut e = residuals(plane, cloud);
    let scale = cloud.positions().fold(T::zero(), |m, p| {
        m.max(p.z.abs() + plane.beta0.abs() + (plane.beta1 * p.x).abs() + (plane.beta2 * p.y).abs())
    });
    let floor = T::lit(64.0) * T::epsilon() * scale;
    for r in e.iter_mut() {
        if r.abs() <= floor {
            *r = T::zero();
        }
    }
    let phi = update_phi(&e)?;
    Ok((phi, detect_outliers(&e, phi, cloud.len())))
}

/// Ordinary (two-sided) least squares over every point.
pub fn run_two_sided<T: Scalar>(cloud: &PointCloud<T>) -> Result<PlaneModel<T>> {
    fit_ols(cloud, &IndexSet::all(cloud.len()))
}

/// `sum_{i not in A} [ -ln(2 pi phi) - (z_i - eta_i)^2 / (2 phi) ]`, with the
/// log coefficient kept at 1. Diagnostic only; the iteration does not use it.
pub fn osr_objective<T: Scalar>(
    plane: &PlaneModel<T>,
    phi: T,
    cloud: &PointCloud<T>,
    nonground: &IndexSet,
) -> Result<T> {
    if !(phi > T::zero()) {
        return Err(Error::DomainError(format!("phi must be positive, got {phi}")));
    }
    nonground.validate(cloud.len())?;
    let log_term = (T::lit(std::f64::consts::TAU) * phi).ln();
    let two_phi = T::lit(2.0) * phi;
    Ok(nonground
        .complement(cloud.len())
        .iter()
        .map(|i| {
            let p = cloud.position(i);
            let r = p.z - plane.eval(p.x, p.y);
            -log_term - r * r / two_phi
        })
        .sum())
}
