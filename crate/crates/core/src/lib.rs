// SPDX-License-Identifier: Apache-2.0

//! Unsupervised detection of human-made objects in airborne point clouds.
//!
//! Three independent stages:
//!
//! 1. [`osr`] separates ground from nonground returns by one-sided regression
//!    against a central plane.
//! 2. [`lie`] estimates the Hessian of the nonground point intensity with a
//!    Gaussian kernel and reduces it to an eigen-ratio feature per point.
//! 3. [`cluster`] splits the features into trees and human-made objects with
//!    a Gaussian mixture (or k-means).
//!
//! [`synth`] generates labelled scenes for evaluation, [`ingest`] reads and
//! writes CSV and LAS, and [`pipeline`] wires everything together.
//!
//! The numeric stages are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the `f64` instantiation used by I/O and the pipeline.

// negated comparisons route NaN to the rejecting branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cloud;
pub mod cluster;
pub mod error;
pub mod ingest;
pub mod lie;
mod lstsq;
pub mod osr;
pub mod pipeline;
pub mod scalar;
pub mod synth;

pub use cloud::{AxisBounds, IndexSet, Label, Point3, PointCloud, PointRecord, TruthLabel};
pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Point = Point3<f64>;
pub type Cloud = PointCloud<f64>;
pub type Record = PointRecord<f64>;
pub type Plane = osr::PlaneModel<f64>;
pub type Fit = osr::OsrFit<f64>;
pub type Bandwidth = lie::Bandwidth<f64>;
pub type Hessian = lie::HessianEstimate<f64>;
