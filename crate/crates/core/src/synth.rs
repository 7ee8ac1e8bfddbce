// SPDX-License-Identifier: Apache-2.0

//! Labelled synthetic scenes: a rough planar terrain, volumetric tree crowns
//! and planar human-made surfaces.
//!
//! Ground returns follow `z = b0 + b1 x + b2 y + e` with `e ~ N(0, roughness^2)`.
//! Every nonground point is placed at a strictly positive offset above the
//! central plane at its own `(x, y)`. Generation is a pure function of the
//! spec.

use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cloud::{Point3, PointCloud, PointRecord, TruthLabel};
use crate::error::{Error, Result};
use crate::osr::PlaneModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub seed: u64,
    /// Lower-left corner of the region.
    #[serde(default)]
    pub origin: [f64; 2],
    /// Width and height of the region in feet.
    pub extent: [f64; 2],
    /// Ground returns per square foot.
    pub ground_density: f64,
    /// Central plane coefficients `(b0, b1, b2)`.
    pub plane: [f64; 3],
    /// Standard deviation of the terrain noise in feet.
    pub roughness: f64,
    #[serde(default)]
    pub trees: Vec<TreeSpec>,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    /// Gaussian measurement noise added to surface samples along z.
    #[serde(default = "default_surface_noise")]
    pub surface_noise: f64,
    #[serde(default)]
    pub intensity: IntensityModel,
}

fn default_surface_noise() -> f64 {
    0.05
}

/// Tree crown sampled uniformly inside an ellipsoid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeSpec {
    pub center: [f64; 2],
    pub crown_radius: f64,
    /// Lowest and highest crown offsets above the ground.
    pub height: [f64; 2],
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectKind {
    /// A single planar face over the footprint, optionally pitched.
    RoofPlane,
    /// Flat top plus vertical walls along every footprint edge.
    BoxShell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub kind: ObjectKind,
    /// Convex polygon, vertices in order.
    pub footprint: Vec<[f64; 2]>,
    /// Offset above ground of the roof at the footprint centroid, or of the
    /// wall bottoms for a box shell.
    pub elevation: f64,
    /// Wall height of a box shell.
    #[serde(default)]
    pub height: f64,
    /// Roof pitch `(dz/dx, dz/dy)` relative to the terrain.
    #[serde(default)]
    pub slope: [f64; 2],
    pub points: usize,
}

/// Normal distributions for the intensity mark, as `[mean, sd]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntensityModel {
    pub ground: [f64; 2],
    pub tree: [f64; 2],
    pub object: [f64; 2],
}

impl Default for IntensityModel {
    fn default() -> Self {
        Self {
            ground: [45.0, 10.0],
            tree: [30.0, 8.0],
            object: [60.0, 8.0],
        }
    }
}

impl SceneSpec {
    pub fn plane_model(&self) -> PlaneModel<f64> {
        PlaneModel::new(self.plane[0], self.plane[1], self.plane[2])
    }

    pub fn ground_count(&self) -> usize {
        (self.ground_density * self.extent[0] * self.extent[1]).round() as usize
    }

    pub fn total_points(&self) -> usize {
        self.ground_count()
            + self.trees.iter().map(|t| t.points).sum::<usize>()
            + self.objects.iter().map(|o| o.points).sum::<usize>()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.origin) || !finite(&self.plane) {
            return bad("origin and plane must be finite".into());
        }
        if !(self.extent[0] > 0.0 && self.extent[1] > 0.0 && finite(&self.extent)) {
            return bad("extent must have positive area".into());
        }
        if !(self.ground_density > 0.0 && self.ground_density.is_finite()) {
            return bad("ground_density must be positive".into());
        }
        if !(self.roughness >= 0.0 && self.roughness.is_finite()) {
            return bad("roughness must be >= 0".into());
        }
        if !(self.surface_noise >= 0.0 && self.surface_noise.is_finite()) {
            return bad("surface_noise must be >= 0".into());
        }
        for [m, s] in [self.intensity.ground, self.intensity.tree, self.intensity.object] {
            if !(m.is_finite() && s >= 0.0 && s.is_finite()) {
                return bad("intensity parameters must be finite with sd >= 0".into());
            }
        }
        for (k, t) in self.trees.iter().enumerate() {
            if !(t.crown_radius > 0.0 && finite(&t.center) && t.crown_radius.is_finite()) {
                return bad(format!("tree {k}: crown_radius must be positive"));
            }
            if !(t.height[0] > 0.0 && t.height[1] > t.height[0] && t.height[1].is_finite()) {
                return bad(format!("tree {k}: need 0 < height[0] < height[1]"));
            }
        }
        for (k, o) in self.objects.iter().enumerate() {
            if o.footprint.len() < 3 || !o.footprint.iter().all(|v| finite(v)) {
                return bad(format!("object {k}: footprint needs at least 3 finite vertices"));
            }
            if !is_convex(&o.footprint) {
                return bad(format!("object {k}: footprint must be a convex polygon"));
            }
            if !(o.elevation > 0.0 && o.elevation.is_finite() && finite(&o.slope)) {
                return bad(format!("object {k}: elevation must be positive"));
            }
            match o.kind {
                ObjectKind::RoofPlane => {
                    let c = centroid(&o.footprint);
                    let lowest = o
                        .footprint
                        .iter()
                        .map(|v| o.elevation + o.slope[0] * (v[0] - c[0]) + o.slope[1] * (v[1] - c[1]))
                        .fold(f64::INFINITY, f64::min);
                    if !(lowest > 0.0) {
                        return bad(format!("object {k}: pitched roof dips to the ground"));
                    }
                }
                ObjectKind::BoxShell => {
                    if !(o.height > 0.0 && o.height.is_finite()) {
                        return bad(format!("object {k}: box shell needs a positive height"));
                    }
                }
            }
        }
        Ok(())
    }
}

fn centroid(poly: &[[f64; 2]]) -> [f64; 2] {
    let n = poly.len() as f64;
    let (sx, sy) = poly.iter().fold((0.0, 0.0), |(a, b), v| (a + v[0], b + v[1]));
    [sx / n, sy / n]
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn is_convex(poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    let mut sign = 0.0f64;
    for i in 0..n {
        let c = cross(poly[i], poly[(i + 1) % n], poly[(i + 2) % n]);
        if c.abs() < 1e-12 {
            continue;
        }
        if sign == 0.0 {
            sign = c.signum();
        } else if c.signum() != sign {
            return false;
        }
    }
    sign != 0.0
}

/// Uniform sample from a convex polygon by area-weighted fan triangles.
struct PolygonSampler {
    anchor: [f64; 2],
    triangles: Vec<([f64; 2], [f64; 2])>,
    cumulative: Vec<f64>,
}

impl PolygonSampler {
    fn new(poly: &[[f64; 2]]) -> Self {
        let anchor = poly[0];
        let mut triangles = Vec::new();
        let mut cumulative = Vec::new();
        let mut total = 0.0;
        for w in poly[1..].windows(2) {
            total += cross(anchor, w[0], w[1]).abs() / 2.0;
            triangles.push((w[0], w[1]));
            cumulative.push(total);
        }
        Self {
            anchor,
            triangles,
            cumulative,
        }
    }

    fn area(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    fn sample(&self, rng: &mut impl Rng) -> [f64; 2] {
        let r = rng.random_range(0.0..self.area());
        let k = self
            .cumulative
            .partition_point(|&c| c <= r)
            .min(self.triangles.len() - 1);
        let (b, c) = self.triangles[k];
        let (mut u, mut v) = (rng.random::<f64>(), rng.random::<f64>());
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        let a = self.anchor;
        [
            a[0] + u * (b[0] - a[0]) + v * (c[0] - a[0]),
            a[1] + u * (b[1] - a[1]) + v * (c[1] - a[1]),
        ]
    }
}

/// Generates the labelled cloud: ground first, then trees, then objects,
/// each block in spec order.
pub fn generate(spec: &SceneSpec) -> Result<PointCloud<f64>> {
    spec.validate()?;
    if spec.total_points() == 0 {
        return Err(Error::EmptyInput("scene spec yields no points".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let plane = spec.plane_model();
    let terrain = Normal::new(0.0, spec.roughness).expect("validated roughness");
    let surface = Normal::new(0.0, spec.surface_noise).expect("validated noise");
    let mut out = Vec::with_capacity(spec.total_points());

    let [x0, y0] = spec.origin;
    let [w, h] = spec.extent;
    for _ in 0..spec.ground_count() {
        let x = x0 + rng.random::<f64>() * w;
        let y = y0 + rng.random::<f64>() * h;
        let z = plane.eval(x, y) + terrain.sample(&mut rng);
        out.push((Point3::new(x, y, z), TruthLabel::Ground));
    }

    for t in &spec.trees {
        let mid = 0.5 * (t.height[0] + t.height[1]);
        let semi = 0.5 * (t.height[1] - t.height[0]);
        for _ in 0..t.points {
            let [u, v, s] = unit_ball(&mut rng);
            let x = t.center[0] + t.crown_radius * u;
            let y = t.center[1] + t.crown_radius * v;
            let offset = mid + semi * s;
            out.push((Point3::new(x, y, plane.eval(x, y) + offset), TruthLabel::Tree));
        }
    }

    for o in &spec.objects {
        let sampler = PolygonSampler::new(&o.footprint);
        let noise = |rng: &mut ChaCha8Rng| {
            if spec.surface_noise > 0.0 {
                surface.sample(rng)
            } else {
                0.0
            }
        };
        match o.kind {
            ObjectKind::RoofPlane => {
                let c = centroid(&o.footprint);
                for _ in 0..o.points {
                    let [x, y] = sampler.sample(&mut rng);
                    let offset = o.elevation + o.slope[0] * (x - c[0]) + o.slope[1] * (y - c[1]);
                    let z = plane.eval(x, y) + offset + noise(&mut rng);
                    out.push((Point3::new(x, y, z), TruthLabel::HumanMade));
                }
            }
            ObjectKind::BoxShell => {
                let n = o.footprint.len();
                let top = sampler.area();
                let walls: Vec<f64> = (0..n)
                    .map(|i| {
                        let a = o.footprint[i];
                        let b = o.footprint[(i + 1) % n];
                        ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt() * o.height
                    })
                    .collect();
                let total = top + walls.iter().sum::<f64>();
                for _ in 0..o.points {
                    let mut r = rng.random_range(0.0..total);
                    let (x, y, offset) = if r < top {
                        let [x, y] = sampler.sample(&mut rng);
                        (x, y, o.elevation + o.height)
                    } else {
                        r -= top;
                        let mut k = 0;
                        while k + 1 < n && r >= walls[k] {
                            r -= walls[k];
                            k += 1;
                        }
                        let a = o.footprint[k];
                        let b = o.footprint[(k + 1) % n];
                        let t = rng.random::<f64>();
                        let s = rng.random::<f64>();
                        (
                            a[0] + t * (b[0] - a[0]),
                            a[1] + t * (b[1] - a[1]),
                            o.elevation + s * o.height,
                        )
                    };
                    let z = plane.eval(x, y) + offset + noise(&mut rng);
                    out.push((Point3::new(x, y, z), TruthLabel::HumanMade));
                }
            }
        }
    }

    let marks = spec.intensity;
    let mut records = Vec::with_capacity(out.len());
    for (p, label) in out {
        let [m, s] = match label {
            TruthLabel::Ground => marks.ground,
            TruthLabel::Tree => marks.tree,
            TruthLabel::HumanMade => marks.object,
        };
        let intensity = (m + s * rng.sample::<f64, _>(rand_distr::StandardNormal)).max(0.0);
        records.push(PointRecord::new(p).with_intensity(intensity).with_truth(label));
    }
    PointCloud::new(records)
}

fn unit_ball(rng: &mut impl Rng) -> [f64; 3] {
    loop {
        let p = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        if p[0] * p[0] + p[1] * p[1] + p[2] * p[2] <= 1.0 {
            return p;
        }
    }
}

/// Parameters for [`populate`]: object counts and size ranges. Objects are
/// spread over a jittered grid of equal cells, one object per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub seed: u64,
    pub origin: [f64; 2],
    pub extent: [f64; 2],
    pub ground_density: f64,
    pub plane: [f64; 3],
    pub roughness: f64,
    pub trees: usize,
    pub tree_points: usize,
    pub crown_radius: [f64; 2],
    pub crown_bottom: [f64; 2],
    pub crown_depth: [f64; 2],
    pub roofs: usize,
    pub roof_points: usize,
    pub roof_side: [f64; 2],
    pub roof_elevation: [f64; 2],
    pub roof_pitch: f64,
    pub boxes: usize,
    pub box_points: usize,
    pub box_side: [f64; 2],
    pub box_elevation: [f64; 2],
    pub box_height: [f64; 2],
}

impl Layout {
    pub fn new(seed: u64, extent: [f64; 2], ground_density: f64, plane: [f64; 3], roughness: f64) -> Self {
        Self {
            seed,
            origin: [0.0, 0.0],
            extent,
            ground_density,
            plane,
            roughness,
            trees: 0,
            tree_points: 300,
            crown_radius: [4.0, 5.0],
            crown_bottom: [3.0, 8.0],
            crown_depth: [8.0, 10.0],
            roofs: 0,
            roof_points: 500,
            roof_side: [26.0, 38.0],
            roof_elevation: [5.0, 28.0],
            roof_pitch: 0.3,
            boxes: 0,
            box_points: 200,
            box_side: [8.0, 16.0],
            box_elevation: [6.0, 8.0],
            box_height: [5.0, 9.0],
        }
    }
}

fn uniform(rng: &mut impl Rng, r: [f64; 2]) -> f64 {
    if r[1] > r[0] {
        rng.random_range(r[0]..r[1])
    } else {
        r[0]
    }
}

/// Uniform draw from the `k`-th of `of` equal slices of `r`.
fn stratum(rng: &mut impl Rng, r: [f64; 2], k: usize, of: usize) -> f64 {
    r[0] + (r[1] - r[0]) * (k as f64 + rng.random_range(0.0..1.0)) / of.max(1) as f64
}

/// Builds a scene spec by placing the layout's objects on shuffled grid
/// cells. Crown bottoms and roof elevations are stratified over their
/// ranges so every scene spans the full height band. Deterministic in
/// `layout.seed`.
pub fn populate(layout: &Layout) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(layout.seed ^ 0x5eed_1a70_u64);
    let count = layout.trees + layout.roofs + layout.boxes;
    let side = (count as f64).sqrt().ceil().max(1.0) as usize;
    let cw = layout.extent[0] / side as f64;
    let ch = layout.extent[1] / side as f64;
    let mut cells: Vec<(usize, usize)> = (0..side).flat_map(|i| (0..side).map(move |j| (i, j))).collect();
    cells.shuffle(&mut rng);
    let mut cells = cells.into_iter();
    let mut centre = |rng: &mut ChaCha8Rng, half: f64| {
        let (i, j) = cells.next().expect("enough cells");
        let slack_x = (0.5 * cw - half).max(0.0);
        let slack_y = (0.5 * ch - half).max(0.0);
        [
            layout.origin[0] + (i as f64 + 0.5) * cw + rng.random_range(-1.0..=1.0) * slack_x,
            layout.origin[1] + (j as f64 + 0.5) * ch + rng.random_range(-1.0..=1.0) * slack_y,
        ]
    };

    let mut trees = Vec::with_capacity(layout.trees);
    let mut tiers: Vec<usize> = (0..layout.trees).collect();
    tiers.shuffle(&mut rng);
    for k in tiers {
        let r = uniform(&mut rng, layout.crown_radius);
        let c = centre(&mut rng, r + 2.0);
        trees.push(TreeSpec {
            center: c,
            crown_radius: r,
            height: {
                let lo = stratum(&mut rng, layout.crown_bottom, k, layout.trees);
                [lo, lo + uniform(&mut rng, layout.crown_depth)]
            },
            points: layout.tree_points,
        });
    }
    let mut objects = Vec::with_capacity(layout.roofs + layout.boxes);
    let mut strata: Vec<usize> = (0..layout.roofs).collect();
    strata.shuffle(&mut rng);
    for k in strata {
        let a = uniform(&mut rng, layout.roof_side);
        let b = uniform(&mut rng, layout.roof_side);
        let c = centre(&mut rng, 0.5 * a.max(b) + 2.0);
        let elevation = stratum(&mut rng, layout.roof_elevation, k, layout.roofs);
        let pitch = rng.random_range(-1.0..=1.0) * layout.roof_pitch;
        // keep the lowest corner at least 3 ft above the terrain
        let max_pitch = ((elevation - 3.0) / (0.5 * a)).max(0.0);
        let slope = [pitch.clamp(-max_pitch, max_pitch), 0.0];
        objects.push(ObjectSpec {
            kind: ObjectKind::RoofPlane,
            footprint: rectangle(c, a, b),
            elevation,
            height: 0.0,
            slope,
            points: layout.roof_points,
        });
    }
    for _ in 0..layout.boxes {
        let a = uniform(&mut rng, layout.box_side);
        let b = uniform(&mut rng, layout.box_side);
        let c = centre(&mut rng, 0.5 * a.max(b) + 2.0);
        objects.push(ObjectSpec {
            kind: ObjectKind::BoxShell,
            footprint: rectangle(c, a, b),
            elevation: uniform(&mut rng, layout.box_elevation),
            height: uniform(&mut rng, layout.box_height),
            slope: [0.0, 0.0],
            points: layout.box_points,
        });
    }
    SceneSpec {
        seed: layout.seed,
        origin: layout.origin,
        extent: layout.extent,
        ground_density: layout.ground_density,
        plane: layout.plane,
        roughness: layout.roughness,
        trees,
        objects,
        surface_noise: default_surface_noise(),
        intensity: IntensityModel::default(),
    }
}

fn rectangle(c: [f64; 2], a: f64, b: f64) -> Vec<[f64; 2]> {
    vec![
        [c[0] - a / 2.0, c[1] - b / 2.0],
        [c[0] + a / 2.0, c[1] - b / 2.0],
        [c[0] + a / 2.0, c[1] + b / 2.0],
        [c[0] - a / 2.0, c[1] + b / 2.0],
    ]
}

/// Names accepted by [`scene_by_name`], in fixture order.
pub const DEFAULT_SCENE_NAMES: [&str; 4] = ["flat", "inclined", "lakeside-gradient", "flat-empty"];

/// Fixed test fixtures. These are synthetic stand-ins, not reproductions of
/// any surveyed region.
pub fn default_scenes() -> Vec<(String, SceneSpec)> {
    DEFAULT_SCENE_NAMES
        .iter()
        .map(|&n| (n.to_string(), scene_by_name(n).expect("known name")))
        .collect()
}

pub fn scene_by_name(name: &str) -> Option<SceneSpec> {
    let spec = match name {
        "flat" => {
            let mut l = Layout::new(11, [200.0, 200.0], 0.35, [650.0, 0.0, 0.0], 0.5);
            l.trees = 8;
            l.roofs = 5;
            l.roof_points = 480;
            l.boxes = 3;
            populate(&l)
        }
        // 14000 ground + 3000 tree + 3000 roof points
        "inclined" => {
            let mut l = Layout::new(7, [200.0, 200.0], 0.35, [600.0, 0.08, -0.05], 1.0);
            l.trees = 10;
            l.roofs = 6;
            populate(&l)
        }
        "lakeside-gradient" => {
            let mut l = Layout::new(23, [240.0, 180.0], 0.35, [480.0, 0.12, 0.05], 1.5);
            l.trees = 8;
            l.roofs = 4;
            l.roof_elevation = [10.0, 22.0];
            populate(&l)
        }
        "flat-empty" => populate(&Layout::new(3, [100.0, 100.0], 0.35, [600.0, 0.0, 0.0], 0.5)),
        _ => return None,
    };
    Some(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ground_only(seed: u64) -> SceneSpec {
        populate(&Layout::new(seed, [50.0, 40.0], 0.5, [10.0, 0.1, 0.2], 1.0))
    }

    #[test]
    fn ground_only_scene() {
        let c = generate(&ground_only(1)).unwrap();
        assert_eq!(c.len(), 1000);
        assert!(c.records().iter().all(|r| r.truth_label == Some(TruthLabel::Ground)));
    }

    #[test]
    fn deterministic() {
        let spec = scene_by_name("inclined").unwrap();
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        assert_ne!(generate(&ground_only(1)).unwrap(), generate(&ground_only(2)).unwrap());
    }

    #[test]
    fn empty_spec_is_rejected() {
        let mut spec = ground_only(1);
        spec.ground_density = 1e-9;
        assert!(matches!(generate(&spec), Err(Error::EmptyInput(_))));
        spec.ground_density = 0.0;
        assert!(matches!(generate(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_objects_are_rejected() {
        let mut spec = ground_only(1);
        spec.objects.push(ObjectSpec {
            kind: ObjectKind::RoofPlane,
            footprint: vec![[0.0, 0.0], [10.0, 10.0], [10.0, 0.0], [0.0, 10.0]],
            elevation: 5.0,
            height: 0.0,
            slope: [0.0, 0.0],
            points: 10,
        });
        assert!(generate(&spec).is_err());
        spec.objects[0].footprint = rectangle([5.0, 5.0], 10.0, 10.0);
        spec.objects[0].slope = [2.0, 0.0];
        assert!(generate(&spec).is_err());
        spec.objects[0].slope = [0.0, 0.0];
        assert!(generate(&spec).is_ok());
        spec.trees.push(TreeSpec {
            center: [0.0, 0.0],
            crown_radius: 3.0,
            height: [0.0, 5.0],
            points: 5,
        });
        assert!(generate(&spec).is_err());
    }

    #[test]
    fn default_fixture_contract() {
        for (name, spec) in default_scenes() {
            let c = generate(&spec).unwrap();
            let has = |l| c.records().iter().any(|r| r.truth_label == Some(l));
            if name == "flat-empty" {
                assert!(!has(TruthLabel::Tree) && !has(TruthLabel::HumanMade));
            } else {
                assert!(has(TruthLabel::Ground) && has(TruthLabel::Tree) && has(TruthLabel::HumanMade));
            }
        }
        let flat = scene_by_name("flat").unwrap();
        assert_eq!((flat.plane[1], flat.plane[2]), (0.0, 0.0));
        let inclined = scene_by_name("inclined").unwrap();
        assert!(inclined.plane[1].abs() + inclined.plane[2].abs() > 0.0);
        assert_eq!(generate(&inclined).unwrap().len(), 20_000);
        assert!(scene_by_name("nope").is_none());
    }

    #[test]
    fn nonground_sits_above_the_plane() {
        for (_, mut spec) in default_scenes() {
            spec.surface_noise = 0.0;
            let plane = spec.plane_model();
            let c = generate(&spec).unwrap();
            for r in c.records() {
                if r.truth_label != Some(TruthLabel::Ground) {
                    let p = r.position;
                    assert!(p.z - plane.eval(p.x, p.y) > 0.0);
                }
            }
        }
    }

    #[test]
    fn roof_samples_lie_on_their_face() {
        let mut spec = ground_only(4);
        spec.surface_noise = 0.0;
        spec.objects.push(ObjectSpec {
            kind: ObjectKind::RoofPlane,
            footprint: rectangle([20.0, 20.0], 12.0, 8.0),
            elevation: 15.0,
            height: 0.0,
            slope: [0.25, -0.1],
            points: 200,
        });
        let plane = spec.plane_model();
        let c = generate(&spec).unwrap();
        for r in c
            .records()
            .iter()
            .filter(|r| r.truth_label == Some(TruthLabel::HumanMade))
        {
            let p = r.position;
            let expect = plane.eval(p.x, p.y) + 15.0 + 0.25 * (p.x - 20.0) - 0.1 * (p.y - 20.0);
            assert!((p.z - expect).abs() < 1e-9);
            assert!((14.0..=26.0).contains(&p.x) && (16.0..=24.0).contains(&p.y));
        }
    }

    #[test]
    fn box_shell_samples_lie_on_faces() {
        let mut spec = ground_only(5);
        spec.surface_noise = 0.0;
        spec.plane = [0.0, 0.0, 0.0];
        spec.objects.push(ObjectSpec {
            kind: ObjectKind::BoxShell,
            footprint: rectangle([20.0, 20.0], 10.0, 6.0),
            elevation: 2.0,
            height: 4.0,
            slope: [0.0, 0.0],
            points: 400,
        });
        let c = generate(&spec).unwrap();
        for r in c
            .records()
            .iter()
            .filter(|r| r.truth_label == Some(TruthLabel::HumanMade))
        {
            let p = r.position;
            let on_top = (p.z - 6.0).abs() < 1e-12;
            let on_wall = [
                (p.x - 15.0).abs(),
                (p.x - 25.0).abs(),
                (p.y - 17.0).abs(),
                (p.y - 23.0).abs(),
            ]
            .iter()
            .any(|d| *d < 1e-9);
            assert!(on_top || on_wall, "{p:?}");
        }
    }
}
