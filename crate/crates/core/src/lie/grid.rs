// SPDX-License-Identifier: Apache-2.0

//! Uniform spatial hash over cubic cells.

use std::collections::HashMap;

use crate::cloud::{IndexSet, Point3, PointCloud};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Buckets the points of a set into cubes of edge `cell`. Immutable once built.
#[derive(Debug, Clone)]
pub struct GridIndex<T> {
    cell: T,
    origin: Point3<T>,
    cells: HashMap<[i64; 3], Vec<usize>>,
}

impl<T: Scalar> GridIndex<T> {
    pub fn build(cloud: &PointCloud<T>, set: &IndexSet, cell: T) -> Result<Self> {
        if !(cell > T::zero() && cell.is_finite()) {
            return Err(Error::DomainError(format!(
                "grid cell edge must be positive, got {cell}"
            )));
        }
        set.validate(cloud.len())?;
        let origin = set
            .iter()
            .map(|i| cloud.position(i))
            .reduce(|a, b| a.component_min(&b))
            .unwrap_or_default();
        let mut grid = Self {
            cell,
            origin,
            cells: HashMap::new(),
        };
        for i in set.iter() {
            let key = grid.key(&cloud.position(i));
            grid.cells.entry(key).or_default().push(i);
        }
        Ok(grid)
    }

    pub fn cell(&self) -> T {
        self.cell
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    fn key(&self, p: &Point3<T>) -> [i64; 3] {
        let k = |v: T, o: T| ((v - o) / self.cell).floor().to_i64().unwrap_or(i64::MAX);
        [k(p.x, self.origin.x), k(p.y, self.origin.y), k(p.z, self.origin.z)]
    }

    /// Calls `visit` on every indexed point in the cells overlapping the cube
    /// of half-width `radius` around `p`: a superset of the ball of radius
    /// `radius`. Visit order is fixed by cell offset, then index.
    pub fn for_each_candidate(&self, p: &Point3<T>, radius: T, mut visit: impl FnMut(usize)) {
        let reach = (radius / self.cell).ceil().to_i64().unwrap_or(1).max(0);
        let [cx, cy, cz] = self.key(p);
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                for dz in -reach..=reach {
                    if let Some(bucket) = self.cells.get(&[cx + dx, cy + dy, cz + dz]) {
                        for &i in bucket {
                            visit(i);
                        }
                    }
                }
            }
        }
    }

    pub fn query(&self, p: &Point3<T>, radius: T) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_candidate(p, radius, |i| out.push(i));
        out
    }
}

pub fn build_grid_index<T: Scalar>(cloud: &PointCloud<T>, set: &IndexSet, cell: T) -> Result<GridIndex<T>> {
    GridIndex::build(cloud, set, cell)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_point() {
        let c = PointCloud::from_positions([Point3::new(3.0, -2.0, 7.5)]).unwrap();
        let g = build_grid_index(&c, &IndexSet::all(1), 2.0).unwrap();
        assert_eq!(g.query(&Point3::new(3.0, -2.0, 7.5), 1.0), vec![0]);
        assert_eq!(g.query(&Point3::new(3.0, -2.0, 7.5), 0.0), vec![0]);
    }

    #[test]
    fn rejects_bad_cell() {
        let c = PointCloud::from_positions([Point3::new(0.0, 0.0, 0.0)]).unwrap();
        assert!(build_grid_index(&c, &IndexSet::all(1), 0.0).is_err());
    }

    #[test]
    fn query_covers_brute_force_ball() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = PointCloud::from_positions((0..10_000).map(|_| {
            Point3::new(
                rng.random_range(0.0..300.0),
                rng.random_range(0.0..300.0),
                rng.random_range(0.0..60.0),
            )
        }))
        .unwrap();
        let set = IndexSet::all(c.len());
        let g = build_grid_index(&c, &set, 12.0).unwrap();
        for _ in 0..100 {
            let p = Point3::new(
                rng.random_range(-10.0..310.0),
                rng.random_range(-10.0..310.0),
                rng.random_range(-10.0..70.0),
            );
            let r = rng.random_range(0.0..12.0);
            let mut got = g.query(&p, r);
            got.sort_unstable();
            for i in set.iter() {
                if (c.position(i) - p).norm_squared() <= r * r {
                    assert!(got.binary_search(&i).is_ok(), "missing {i}");
                }
            }
        }
    }

    #[test]
    fn only_indexes_the_set() {
        let c = PointCloud::from_positions((0..10).map(|i| Point3::new(i as f64, 0.0, 0.0))).unwrap();
        let g = build_grid_index(&c, &IndexSet::from_indices([2, 3]), 100.0).unwrap();
        let mut q = g.query(&Point3::new(0.0, 0.0, 0.0), 100.0);
        q.sort_unstable();
        assert_eq!(q, vec![2, 3]);
    }
}
