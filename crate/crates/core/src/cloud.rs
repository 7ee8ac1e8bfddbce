// SPDX-License-Identifier: Apache-2.0

//! Point cloud data model shared by every stage.
//!
//! A point's identity is its position in [`PointCloud::records`], fixed at
//! construction. Stages report their results as [`IndexSet`]s or per-index
//! arrays so they compose without copying coordinates.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Scalar> Point3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn norm_squared(&self) -> T {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn component_min(&self, other: &Self) -> Self {
        Self::new(self.x.min(other.x), self.y.min(other.y), self.z.min(other.z))
    }

    pub fn component_max(&self, other: &Self) -> Self {
        Self::new(self.x.max(other.x), self.y.max(other.y), self.z.max(other.z))
    }
}

impl<T: Scalar> Sub for Point3<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl<T: Scalar> Add for Point3<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl<T: Scalar> Mul<T> for Point3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Ground-truth class of a point (synthetic scenes, annotated exports).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TruthLabel {
    Ground,
    Tree,
    HumanMade,
}

/// Class assigned by the pipeline. `HumanMadeSub(k)` (k = 1, 2) appears only
/// when human-made points are split further by a three-component model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Ground,
    Tree,
    HumanMade,
    HumanMadeSub(u8),
}

impl Label {
    /// Collapses subclasses onto the three evaluation classes.
    pub fn collapse(self) -> TruthLabel {
        match self {
            Label::Ground => TruthLabel::Ground,
            Label::Tree => TruthLabel::Tree,
            Label::HumanMade | Label::HumanMadeSub(_) => TruthLabel::HumanMade,
        }
    }
}

impl From<TruthLabel> for Label {
    fn from(t: TruthLabel) -> Self {
        match t {
            TruthLabel::Ground => Label::Ground,
            TruthLabel::Tree => Label::Tree,
            TruthLabel::HumanMade => Label::HumanMade,
        }
    }
}

impl fmt::Display for TruthLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TruthLabel::Ground => "ground",
            TruthLabel::Tree => "tree",
            TruthLabel::HumanMade => "human",
        })
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Ground => f.write_str("ground"),
            Label::Tree => f.write_str("tree"),
            Label::HumanMade => f.write_str("human"),
            Label::HumanMadeSub(k) => write!(f, "human_{k}"),
        }
    }
}

impl FromStr for TruthLabel {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ground" => Ok(TruthLabel::Ground),
            "tree" => Ok(TruthLabel::Tree),
            "human" => Ok(TruthLabel::HumanMade),
            other => Err(format!("unknown truth label {other:?}")),
        }
    }
}

impl FromStr for Label {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim().to_ascii_lowercase();
        if let Some(k) = s.strip_prefix("human_") {
            return match k.parse::<u8>() {
                Ok(k @ 1..=2) => Ok(Label::HumanMadeSub(k)),
                _ => Err(format!("unknown class label {s:?}")),
            };
        }
        s.parse::<TruthLabel>()
            .map(Label::from)
            .map_err(|_| format!("unknown class label {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointRecord<T> {
    pub position: Point3<T>,
    pub intensity: Option<T>,
    pub truth_label: Option<TruthLabel>,
    pub predicted_label: Option<Label>,
}

impl<T: Scalar> PointRecord<T> {
    pub fn new(position: Point3<T>) -> Self {
        Self {
            position,
            intensity: None,
            truth_label: None,
            predicted_label: None,
        }
    }

    pub fn with_intensity(mut self, intensity: T) -> Self {
        self.intensity = Some(intensity);
        self
    }

    pub fn with_truth(mut self, label: TruthLabel) -> Self {
        self.truth_label = Some(label);
        self
    }

    fn validate(&self, index: usize) -> Result<()> {
        if !self.position.is_finite() {
            return Err(Error::NonFinite(format!("coordinates of point {index}")));
        }
        if let Some(i) = self.intensity {
            if !i.is_finite() || i < T::zero() {
                return Err(Error::NonFinite(format!(
                    "intensity of point {index} (must be finite and >= 0)"
                )));
            }
        }
        Ok(())
    }
}

/// Ordered point records plus the per-index stage outputs that travel with
/// them between commands: the ground mask and the feature column.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud<T> {
    records: Vec<PointRecord<T>>,
    ground: Option<Vec<bool>>,
    features: Option<Vec<Option<T>>>,
    origin: Option<Vec<usize>>,
}

impl<T: Scalar> PointCloud<T> {
    /// Builds a cloud, rejecting empty input and non-finite values.
    pub fn new(records: Vec<PointRecord<T>>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyInput("point cloud has no records".into()));
        }
        for (i, r) in records.iter().enumerate() {
            r.validate(i)?;
        }
        Ok(Self {
            records,
            ground: None,
            features: None,
            origin: None,
        })
    }

    pub fn from_positions(positions: impl IntoIterator<Item = Point3<T>>) -> Result<Self> {
        Self::new(positions.into_iter().map(PointRecord::new).collect())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Empty selections exist but no stage accepts them.
    pub fn is_usable(&self) -> bool {
        !self.records.is_empty()
    }

    pub fn records(&self) -> &[PointRecord<T>] {
        &self.records
    }

    pub fn record(&self, i: usize) -> &PointRecord<T> {
        &self.records[i]
    }

    pub fn position(&self, i: usize) -> Point3<T> {
        self.records[i].position
    }

    pub fn positions(&self) -> impl ExactSizeIterator<Item = Point3<T>> + '_ {
        self.records.iter().map(|r| r.position)
    }

    pub fn has_intensity(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.intensity.is_some())
    }

    pub fn has_truth(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.truth_label.is_some())
    }

    pub fn has_predicted(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.predicted_label.is_some())
    }

    /// Per-index ground flags (`true` = ground), if a filter has run.
    pub fn ground_mask(&self) -> Option<&[bool]> {
        self.ground.as_deref()
    }

    pub fn set_ground_mask(&mut self, mask: Vec<bool>) -> Result<()> {
        if mask.len() != self.len() {
            return Err(Error::InputMismatch(format!(
                "ground mask has {} entries for {} points",
                mask.len(),
                self.len()
            )));
        }
        self.ground = Some(mask);
        Ok(())
    }

    /// Nonground points according to the ground mask.
    pub fn nonground_set(&self) -> Option<IndexSet> {
        self.ground.as_ref().map(|mask| {
            IndexSet::from_sorted_unchecked(mask.iter().enumerate().filter(|(_, g)| !**g).map(|(i, _)| i).collect())
        })
    }

    pub fn features(&self) -> Option<&[Option<T>]> {
        self.features.as_deref()
    }

    pub fn set_features(&mut self, features: Vec<Option<T>>) -> Result<()> {
        if features.len() != self.len() {
            return Err(Error::InputMismatch(format!(
                "feature column has {} entries for {} points",
                features.len(),
                self.len()
            )));
        }
        if features.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature column".into()));
        }
        self.features = Some(features);
        Ok(())
    }

    pub fn set_predicted(&mut self, labels: &[Label]) -> Result<()> {
        if labels.len() != self.len() {
            return Err(Error::InputMismatch(format!(
                "{} labels for {} points",
                labels.len(),
                self.len()
            )));
        }
        for (r, l) in self.records.iter_mut().zip(labels) {
            r.predicted_label = Some(*l);
        }
        Ok(())
    }

    pub fn set_intensity(&mut self, values: &[T]) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::InputMismatch("intensity length".into()));
        }
        for (i, (r, v)) in self.records.iter_mut().zip(values).enumerate() {
            r.intensity = Some(*v);
            r.validate(i)?;
        }
        Ok(())
    }

    /// Original index of record `i` in the cloud this one was selected from.
    pub fn original_index(&self, i: usize) -> usize {
        self.origin.as_ref().map_or(i, |o| o[i])
    }

    /// Exact componentwise extremes of all positions.
    pub fn bounds(&self) -> Result<AxisBounds<T>> {
        let mut it = self.positions();
        let first = it
            .next()
            .ok_or_else(|| Error::EmptyInput("bounds of an empty cloud".into()))?;
        let (min, max) = it.fold((first, first), |(lo, hi), p| {
            (lo.component_min(&p), hi.component_max(&p))
        });
        Ok(AxisBounds { min, max })
    }

    /// Sub-cloud in index order. Per-index columns are carried along and each
    /// retained record remembers its index in `self`.
    pub fn select(&self, set: &IndexSet) -> Result<Self> {
        if let Some(&last) = set.as_slice().last() {
            if last >= self.len() {
                return Err(Error::IndexError {
                    index: last,
                    len: self.len(),
                });
            }
        }
        let idx = set.as_slice();
        Ok(Self {
            records: idx.iter().map(|&i| self.records[i].clone()).collect(),
            ground: self.ground.as_ref().map(|g| idx.iter().map(|&i| g[i]).collect()),
            features: self.features.as_ref().map(|f| idx.iter().map(|&i| f[i]).collect()),
            origin: Some(idx.iter().map(|&i| self.original_index(i)).collect()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisBounds<T> {
    pub min: Point3<T>,
    pub max: Point3<T>,
}

impl<T: Scalar> AxisBounds<T> {
    pub fn contains(&self, other: &Self) -> bool {
        self.min.x <= other.min.x
            && self.min.y <= other.min.y
            && self.min.z <= other.min.z
            && other.max.x <= self.max.x
            && other.max.y <= self.max.y
            && other.max.z <= self.max.z
    }
}

/// Sorted, duplicate-free point indices.
#[derive(Debug, Clone, PartialEq, Eq, Default, Hash)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn all(n: usize) -> Self {
        Self((0..n).collect())
    }

    /// Sorts and deduplicates.
    pub fn from_indices(indices: impl IntoIterator<Item = usize>) -> Self {
        let mut v: Vec<usize> = indices.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }

    pub(crate) fn from_sorted_unchecked(v: Vec<usize>) -> Self {
        debug_assert!(v.windows(2).all(|w| w[0] < w[1]));
        Self(v)
    }

    /// Checks every index against a cloud of `n` points.
    pub fn validate(&self, n: usize) -> Result<()> {
        match self.0.last() {
            Some(&last) if last >= n => Err(Error::IndexError { index: last, len: n }),
            _ => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    /// Indices of `0..n` not in the set.
    pub fn complement(&self, n: usize) -> Self {
        let mut out = Vec::with_capacity(n.saturating_sub(self.0.len()));
        let mut members = self.0.iter().peekable();
        for i in 0..n {
            if members.peek() == Some(&&i) {
                members.next();
            } else {
                out.push(i);
            }
        }
        Self(out)
    }

    pub fn to_mask(&self, n: usize) -> Vec<bool> {
        let mut mask = vec![false; n];
        for &i in &self.0 {
            mask[i] = true;
        }
        mask
    }
}

impl FromIterator<usize> for IndexSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        Self::from_indices(iter)
    }
}
