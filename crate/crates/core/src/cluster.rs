// SPDX-License-Identifier: Apache-2.0

//! Mixture clustering of the feature rows: Gaussian mixtures fit by EM, and
//! k-means as the alternative.
//!
//! Both fits run on the rows in a canonical (lexicographic) order and map the
//! result back, so permuting the input rows permutes the output identically.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::{IndexSet, Label, PointCloud};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major feature rows, each tagged with the cloud index it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    data: Vec<T>,
    dim: usize,
    index: Vec<usize>,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn new(data: Vec<T>, dim: usize, index: Vec<usize>) -> Result<Self> {
        if dim == 0 || data.len() != dim * index.len() {
            return Err(Error::InputMismatch(format!(
                "{} values do not form {} rows of width {dim}",
                data.len(),
                index.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix".into()));
        }
        Ok(Self { data, dim, index })
    }

    /// One column per slice, all of equal length; rows indexed `0..n`.
    pub fn from_columns(columns: &[Vec<T>]) -> Result<Self> {
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::InputMismatch("columns differ in length".into()));
        }
        let data = (0..n).flat_map(|i| columns.iter().map(move |c| c[i])).collect();
        Self::new(data, columns.len(), (0..n).collect())
    }

    pub fn rows(&self) -> usize {
        self.index.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn index(&self) -> &[usize] {
        &self.index
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows()).map(|i| self.row(i)[j]).collect()
    }

    fn permuted(&self, order: &[usize]) -> Self {
        Self {
            data: order.iter().flat_map(|&i| self.row(i).iter().copied()).collect(),
            dim: self.dim,
            index: order.iter().map(|&i| self.index[i]).collect(),
        }
    }

    /// Row order sorting the values lexicographically.
    fn canonical_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.rows()).collect();
        order.sort_by(|&a, &b| {
            self.row(a)
                .iter()
                .zip(self.row(b))
                .map(|(x, y)| x.partial_cmp(y).unwrap_or(Ordering::Equal))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        });
        order
    }

    /// Population (denominator n) mean and variance per column.
    fn moments(&self) -> (Vec<T>, Vec<T>) {
        let n = T::from_usize_lossy(self.rows().max(1));
        let mean: Vec<T> = (0..self.dim)
            .map(|j| (0..self.rows()).map(|i| self.row(i)[j]).sum::<T>() / n)
            .collect();
        let var = (0..self.dim)
            .map(|j| (0..self.rows()).map(|i| (self.row(i)[j] - mean[j]).powi(2)).sum::<T>() / n)
            .collect();
        (mean, var)
    }
}

/// Column transform applied by [`standardize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization<T> {
    /// Input columns kept, in order.
    pub kept: Vec<usize>,
    pub mean: Vec<T>,
    pub std: Vec<T>,
}

/// Centers each column and scales it to unit sample variance (denominator
/// n - 1). Constant columns are dropped.
pub fn standardize<T: Scalar>(features: &FeatureMatrix<T>) -> Result<(FeatureMatrix<T>, Standardization<T>)> {
    let n = features.rows();
    if n < 2 {
        return Err(Error::DegenerateFeatures(format!("{n} row(s) cannot be standardized")));
    }
    let nf = T::from_usize_lossy(n);
    let mut tr = Standardization {
        kept: Vec::new(),
        mean: Vec::new(),
        std: Vec::new(),
    };
    for j in 0..features.dim() {
        let col = features.column(j);
        let mean = col.iter().copied().sum::<T>() / nf;
        let var = col.iter().map(|v| (*v - mean).powi(2)).sum::<T>() / (nf - T::one());
        if var > T::zero() {
            tr.kept.push(j);
            tr.mean.push(mean);
            tr.std.push(var.sqrt());
        } else {
            log::warn!("dropping constant feature column {j}");
        }
    }
    if tr.kept.is_empty() {
        return Err(Error::DegenerateFeatures("every feature column is constant".into()));
    }
    let data = (0..n)
        .flat_map(|i| {
            let row = features.row(i);
            let tr = &tr;
            (0..tr.kept.len()).map(move |k| (row[tr.kept[k]] - tr.mean[k]) / tr.std[k])
        })
        .collect();
    let out = FeatureMatrix::new(data, tr.kept.len(), features.index().to_vec())?;
    Ok((out, tr))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmConfig {
    pub max_iter: usize,
    pub rel_tol: f64,
    /// Covariance eigenvalue floor as a fraction of the column variance.
    pub floor: f64,
    pub restarts: usize,
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            rel_tol: 1e-8,
            floor: 1e-6,
            restarts: 5,
        }
    }
}

impl GmmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 || self.restarts == 0 {
            return Err(Error::Config("gmm max_iter and restarts must be at least 1".into()));
        }
        if !(self.rel_tol >= 0.0 && self.floor > 0.0 && self.floor.is_finite()) {
            return Err(Error::Config("gmm rel_tol must be >= 0 and floor > 0".into()));
        }
        Ok(())
    }
}

/// Fitted mixture. Covariances are row-major `dim x dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel<T> {
    pub k: usize,
    pub dim: usize,
    pub weights: Vec<T>,
    pub means: Vec<Vec<T>>,
    pub covariances: Vec<Vec<T>>,
    /// Log-likelihood before each M-step of the winning restart.
    pub loglik: Vec<T>,
    pub converged: bool,
}

impl<T: Scalar> GmmModel<T> {
    pub fn final_loglik(&self) -> T {
        self.loglik.last().copied().unwrap_or(T::neg_infinity())
    }

    fn log_density(&self, c: usize, x: &[T]) -> T {
        let mu = &self.means[c];
        let s = &self.covariances[c];
        let two_pi = T::lit(std::f64::consts::TAU);
        match self.dim {
            1 => {
                let d = x[0] - mu[0];
                -T::lit(0.5) * (two_pi.ln() + s[0].ln() + d * d / s[0])
            }
            _ => {
                let (a, b, d) = (s[0], s[1], s[3]);
                let det = a * d - b * b;
                let (u, v) = (x[0] - mu[0], x[1] - mu[1]);
                let m = (d * u * u - T::lit(2.0) * b * u * v + a * v * v) / det;
                -T::lit(0.5) * (T::lit(2.0) * two_pi.ln() + det.ln() + m)
            }
        }
    }

    /// Per-component `ln pi_k + ln N(x)` for one row.
    fn joint(&self, x: &[T], out: &mut [T]) {
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.weights[c].ln() + self.log_density(c, x);
        }
    }
}

fn logsumexp<T: Scalar>(v: &[T]) -> T {
    let m = v.iter().copied().fold(T::neg_infinity(), T::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (*x - m).exp()).sum::<T>().ln()
}

/// Hard labels and responsibilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment<T> {
    pub labels: Vec<usize>,
    pub responsibilities: Vec<Vec<T>>,
}

fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Posterior responsibilities and the hard argmax (ties to the lowest
/// component).
pub fn predict<T: Scalar>(model: &GmmModel<T>, features: &FeatureMatrix<T>) -> Result<ClusterAssignment<T>> {
    if features.dim() != model.dim {
        return Err(Error::InputMismatch(format!(
            "model has dimension {}, features {}",
            model.dim,
            features.dim()
        )));
    }
    let mut buf = vec![T::zero(); model.k];
    let mut labels = Vec::with_capacity(features.rows());
    let mut resp = Vec::with_capacity(features.rows());
    for i in 0..features.rows() {
        model.joint(features.row(i), &mut buf);
        let z = logsumexp(&buf);
        let r: Vec<T> = buf.iter().map(|v| (*v - z).exp()).collect();
        labels.push(argmax(&r));
        resp.push(r);
    }
    Ok(ClusterAssignment {
        labels,
        responsibilities: resp,
    })
}

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| (*x - *y).powi(2)).sum()
}

/// k-means++ seeds: first row uniform, then proportional to squared
/// distance to the nearest seed chosen so far.
fn plus_plus<T: Scalar>(x: &FeatureMatrix<T>, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<T>> {
    let n = x.rows();
    let mut seeds = vec![x.row(rng.random_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), &seeds[0]).to_f64_lossy()).collect();
    while seeds.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (i, w) in d2.iter().enumerate() {
                if u < *w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        let s = x.row(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), &s).to_f64_lossy());
        }
        seeds.push(s);
    }
    seeds
}

/// Clamps the eigenvalues of a symmetric covariance from below.
fn floor_covariance<T: Scalar>(s: &mut [T], floor: T) {
    if s.len() == 1 {
        s[0] = s[0].max(floor);
        return;
    }
    let (a, b, d) = (s[0], s[1], s[3]);
    let mid = (a + d) * T::lit(0.5);
    let rad = (((a - d) * T::lit(0.5)).powi(2) + b * b).sqrt();
    let (l1, l2) = (mid + rad, mid - rad);
    if l2 >= floor {
        return;
    }
    // eigenvector of l1
    let (vx, vy) = if b != T::zero() {
        let (vx, vy) = (l1 - d, b);
        let nrm = (vx * vx + vy * vy).sqrt();
        (vx / nrm, vy / nrm)
    } else if a >= d {
        (T::one(), T::zero())
    } else {
        (T::zero(), T::one())
    };
    let (l1, l2) = (l1.max(floor), l2.max(floor));
    s[0] = l1 * vx * vx + l2 * vy * vy;
    s[1] = (l1 - l2) * vx * vy;
    s[2] = s[1];
    s[3] = l1 * vy * vy + l2 * vx * vx;
}

fn em_run<T: Scalar>(x: &FeatureMatrix<T>, k: usize, floor: T, cfg: &GmmConfig, rng: &mut ChaCha8Rng) -> GmmModel<T> {
    let (n, dim) = (x.rows(), x.dim());
    let (_, var) = x.moments();
    let start_cov: Vec<T> = (0..dim * dim)
        .map(|e| {
            if e % (dim + 1) == 0 {
                var[e / dim].max(floor)
            } else {
                T::zero()
            }
        })
        .collect();
    let mut model = GmmModel {
        k,
        dim,
        weights: vec![T::one() / T::from_usize_lossy(k); k],
        means: plus_plus(x, k, rng),
        covariances: vec![start_cov; k],
        loglik: Vec::new(),
        converged: false,
    };
    let rel_tol = T::lit(cfg.rel_tol);
    let mut resp = vec![T::zero(); n * k];
    let mut buf = vec![T::zero(); k];
    for _ in 0..cfg.max_iter {
        // E-step
        let mut ll = T::zero();
        for i in 0..n {
            model.joint(x.row(i), &mut buf);
            let z = logsumexp(&buf);
            ll = ll + z;
            for c in 0..k {
                resp[i * k + c] = (buf[c] - z).exp();
            }
        }
        if let Some(&prev) = model.loglik.last() {
            if (ll - prev).abs() <= rel_tol * ll.abs() {
                model.loglik.push(ll);
                model.converged = true;
                break;
            }
        }
        model.loglik.push(ll);
        // M-step
        for c in 0..k {
            let nk: T = (0..n).map(|i| resp[i * k + c]).sum();
            model.weights[c] = nk / T::from_usize_lossy(n);
            if nk <= T::zero() {
                continue;
            }
            let mu: Vec<T> = (0..dim)
                .map(|j| (0..n).map(|i| resp[i * k + c] * x.row(i)[j]).sum::<T>() / nk)
                .collect();
            let mut s = vec![T::zero(); dim * dim];
            for a in 0..dim {
                for b in a..dim {
                    let v = (0..n)
                        .map(|i| {
                            let r = x.row(i);
                            resp[i * k + c] * (r[a] - mu[a]) * (r[b] - mu[b])
                        })
                        .sum::<T>()
                        / nk;
                    s[a * dim + b] = v;
                    s[b * dim + a] = v;
                }
            }
            floor_covariance(&mut s, floor);
            model.means[c] = mu;
            model.covariances[c] = s;
        }
    }
    model
}

fn check_k<T: Scalar>(x: &FeatureMatrix<T>, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Config("cluster count must be at least 1".into()));
    }
    if x.rows() < k {
        return Err(Error::TooFewPoints {
            needed: k,
            got: x.rows(),
        });
    }
    Ok(())
}

/// Covariance floor: `floor` times the smallest column variance, or `floor`
/// itself when every column is constant.
fn floor_for<T: Scalar>(x: &FeatureMatrix<T>, floor: f64) -> T {
    let (_, var) = x.moments();
    let min = var
        .iter()
        .copied()
        .filter(|v| *v > T::zero())
        .fold(T::infinity(), T::min);
    let scale = if min.is_finite() { min } else { T::one() };
    T::lit(floor) * scale
}

/// EM for a `k`-component mixture, best of `restarts` k-means++ starts.
/// Only dimensions 1 and 2 are supported.
pub fn fit_gmm<T: Scalar>(features: &FeatureMatrix<T>, k: usize, seed: u64, cfg: &GmmConfig) -> Result<GmmModel<T>> {
    cfg.validate()?;
    check_k(features, k)?;
    if features.dim() > 2 {
        return Err(Error::Config(format!(
            "mixture fits support 1 or 2 columns, got {}",
            features.dim()
        )));
    }
    let x = features.permuted(&features.canonical_order());
    let floor = floor_for(&x, cfg.floor);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<GmmModel<T>> = None;
    for _ in 0..cfg.restarts {
        let m = em_run(&x, k, floor, cfg, &mut rng);
        if best.as_ref().is_none_or(|b| m.final_loglik() > b.final_loglik()) {
            best = Some(m);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KmeansConfig {
    pub max_iter: usize,
}

impl Default for KmeansConfig {
    fn default() -> Self {
        Self { max_iter: 300 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KmeansResult<T> {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<T>>,
    /// Within-cluster sum of squares after each assignment step.
    pub inertia: Vec<T>,
    pub converged: bool,
}

/// Lloyd iterations from k-means++ seeds until the assignment stops
/// changing. An emptied cluster keeps its previous centroid.
pub fn kmeans<T: Scalar>(
    features: &FeatureMatrix<T>,
    k: usize,
    seed: u64,
    cfg: &KmeansConfig,
) -> Result<KmeansResult<T>> {
    check_k(features, k)?;
    let order = features.canonical_order();
    let x = features.permuted(&order);
    let (n, dim) = (x.rows(), x.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus(&x, k, &mut rng);
    let mut labels = vec![usize::MAX; n];
    let mut inertia = Vec::new();
    let mut converged = false;
    for _ in 0..cfg.max_iter.max(1) {
        let mut changed = false;
        let mut wss = T::zero();
        for (i, l) in labels.iter_mut().enumerate() {
            let d: Vec<T> = centroids.iter().map(|c| -sq_dist(x.row(i), c)).collect();
            let best = argmax(&d);
            wss = wss - d[best];
            if *l != best {
                *l = best;
                changed = true;
            }
        }
        inertia.push(wss);
        if !changed {
            converged = true;
            break;
        }
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
            if members.is_empty() {
                continue;
            }
            let m = T::from_usize_lossy(members.len());
            *centroid = (0..dim)
                .map(|j| members.iter().map(|&i| x.row(i)[j]).sum::<T>() / m)
                .collect();
        }
    }
    let mut out = vec![0; n];
    for (pos, &orig) in order.iter().enumerate() {
        out[orig] = labels[pos];
    }
    Ok(KmeansResult {
        labels: out,
        centroids,
        inertia,
        converged,
    })
}

/// Semantic label per component, ordered by the mean of column `v_col`:
/// the lowest is Tree; for two components the other is HumanMade, for three
/// the others are HumanMadeSub(1) and HumanMadeSub(2). Equal means keep
/// component order.
pub fn label_mapping<T: Scalar>(means: &[Vec<T>], v_col: usize) -> Vec<Label> {
    let mut order: Vec<usize> = (0..means.len()).collect();
    order.sort_by(|&a, &b| {
        means[a][v_col]
            .partial_cmp(&means[b][v_col])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut out = vec![Label::Tree; means.len()];
    for (rank, &c) in order.iter().enumerate() {
        out[c] = match (means.len(), rank) {
            (_, 0) => Label::Tree,
            (2, _) => Label::HumanMade,
            (_, r) => Label::HumanMadeSub(r.min(u8::MAX as usize) as u8),
        };
    }
    out
}

/// Semantic label per feature row from a fitted model.
pub fn assign_labels<T: Scalar>(model: &GmmModel<T>, features: &FeatureMatrix<T>, v_col: usize) -> Result<Vec<Label>> {
    let map = label_mapping(&model.means, v_col);
    Ok(predict(model, features)?.labels.into_iter().map(|c| map[c]).collect())
}

/// Labels for every point of `nonground`: rows of `labeled` (cloud indices)
/// keep their label, the rest take the label of the nearest labeled point
/// (ties to the lower index).
pub fn fill_from_nearest<T: Scalar>(
    cloud: &PointCloud<T>,
    nonground: &IndexSet,
    labeled: &[(usize, Label)],
) -> Result<Vec<(usize, Label)>> {
    if labeled.is_empty() {
        return Err(Error::DegenerateFeatures(
            "no valid feature to inherit a label from".into(),
        ));
    }
    let mut sorted = labeled.to_vec();
    sorted.sort_by_key(|(i, _)| *i);
    let mut out = Vec::with_capacity(nonground.len());
    for i in nonground.iter() {
        if let Ok(k) = sorted.binary_search_by_key(&i, |(j, _)| *j) {
            out.push(sorted[k]);
            continue;
        }
        let p = cloud.position(i);
        let mut best = (T::infinity(), Label::Tree);
        for &(j, l) in &sorted {
            let d = (cloud.position(j) - p).norm_squared();
            if d < best.0 {
                best = (d, l);
            }
        }
        out.push((i, best.1));
    }
    Ok(out)
}
