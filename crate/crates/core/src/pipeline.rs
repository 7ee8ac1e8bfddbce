// SPDX-License-Identifier: Apache-2.0

//! Stage orchestration: filter, features, clustering and evaluation, each
//! usable on its own through the CSV column contract (`ground`, then `v`,
//! then `class`) or chained in memory by [`run_pipeline`].

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cloud::{IndexSet, Label, PointCloud, TruthLabel};
use crate::cluster::{
    self, fill_from_nearest, fit_gmm, kmeans, label_mapping, standardize, FeatureMatrix, GmmConfig, KmeansConfig,
};
use crate::error::{Error, Result};
use crate::ingest::{self, ColumnSet};
use crate::lie::{compute_features, Bandwidth, SumMode, DEFAULT_TRUNCATION};
use crate::osr::{run_osr, OsrConfig, StopReason};
use crate::synth::{self, SceneSpec};

pub const REPORT_VERSION: u32 = 1;

/// Exit status for errors: 2 for usage, configuration and unreadable input,
/// 3 for failures while a stage runs.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::Json(_)
        | Error::Io { .. }
        | Error::SchemaError(_)
        | Error::ParseError { .. }
        | Error::FormatError(_)
        | Error::UnsupportedFormat(_)
        | Error::EmptyInput(_)
        | Error::NonFinite(_)
        | Error::InputMismatch(_) => 2,
        _ => 3,
    }
}

/// A named default scene or a full spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SceneSource {
    Named(String),
    Spec(Box<SceneSpec>),
}

impl SceneSource {
    pub fn resolve(&self) -> Result<SceneSpec> {
        match self {
            SceneSource::Named(n) => synth::scene_by_name(n).ok_or_else(|| {
                Error::Config(format!(
                    "unknown scene {n:?}; known: {}",
                    synth::DEFAULT_SCENE_NAMES.join(", ")
                ))
            }),
            SceneSource::Spec(s) => Ok((**s).clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LieConfig {
    pub hx: f64,
    pub hy: f64,
    pub hz: f64,
    pub mode: SumMode,
    /// Grid-mode cutoff in bandwidth units.
    pub truncation: f64,
}

impl Default for LieConfig {
    fn default() -> Self {
        let h = Bandwidth::default();
        Self {
            hx: h.hx,
            hy: h.hy,
            hz: h.hz,
            mode: SumMode::Grid,
            truncation: DEFAULT_TRUNCATION,
        }
    }
}

impl LieConfig {
    pub fn bandwidth(&self) -> Result<Bandwidth<f64>> {
        Bandwidth::anisotropic(self.hx, self.hy, self.hz)
    }

    pub fn validate(&self) -> Result<()> {
        self.bandwidth()?;
        if !(self.truncation > 0.0 && self.truncation.is_finite()) {
            return Err(Error::Config("lie.truncation must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterMethod {
    #[default]
    Gmm,
    Kmeans,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub k: usize,
    pub use_intensity: bool,
    pub seed: u64,
    pub method: ClusterMethod,
    pub gmm: GmmConfig,
    pub kmeans: KmeansConfig,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            k: 2,
            use_intensity: false,
            seed: 0,
            method: ClusterMethod::Gmm,
            gmm: GmmConfig::default(),
            kmeans: KmeansConfig::default(),
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.k) {
            return Err(Error::Config(format!("cluster.k must be 2 or 3, got {}", self.k)));
        }
        self.gmm.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub scene: Option<SceneSource>,
    pub osr: OsrConfig,
    pub lie: LieConfig,
    pub cluster: ClusterConfig,
    pub output: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Stage configs only; where the points come from is checked by
    /// [`PipelineConfig::source`].
    pub fn validate(&self) -> Result<()> {
        self.osr.validate()?;
        self.lie.validate()?;
        self.cluster.validate()
    }

    /// Loads the points from whichever of `input` and `scene` is set.
    pub fn source(&self) -> Result<PointCloud<f64>> {
        match (&self.input, &self.scene) {
            (Some(p), None) => ingest::read_cloud(p),
            (None, Some(s)) => synth::generate(&s.resolve()?),
            (Some(_), Some(_)) => Err(Error::Config("set either input or scene, not both".into())),
            (None, None) => Err(Error::Config("no input: set input or scene".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OsrSummary {
    pub beta: [f64; 3],
    pub phi: f64,
    pub nonground_count: usize,
    pub iterations: usize,
    pub converged: bool,
    pub stop: StopReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

/// Linear-interpolation quantiles of a nonempty sample.
pub fn quantiles(values: &[f64]) -> Option<Quantiles> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let at = |q: f64| {
        let pos = q * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    Some(Quantiles {
        min: v[0],
        q25: at(0.25),
        median: at(0.5),
        q75: at(0.75),
        max: v[v.len() - 1],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub count: usize,
    pub valid: usize,
    pub invalid: usize,
    pub v: Option<Quantiles>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub method: ClusterMethod,
    pub k: usize,
    pub columns: Vec<String>,
    pub standardization: Option<cluster::Standardization<f64>>,
    pub weights: Option<Vec<f64>>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Option<Vec<Vec<f64>>>,
    pub loglik: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Semantic label of each component.
    pub label_mapping: Vec<Label>,
    /// Nonground points without a valid feature, labeled from a neighbor.
    pub inherited: usize,
}

const CLASSES: [TruthLabel; 3] = [TruthLabel::Ground, TruthLabel::Tree, TruthLabel::HumanMade];

fn class_index(t: TruthLabel) -> usize {
    CLASSES.iter().position(|c| *c == t).expect("known class")
}

/// Counts indexed `[predicted][truth]` over ground, tree, human.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionMatrix {
    pub fn from_labels(predicted: &[Label], truth: &[TruthLabel]) -> Result<Self> {
        if predicted.len() != truth.len() {
            return Err(Error::InputMismatch(format!(
                "{} predictions for {} truth labels",
                predicted.len(),
                truth.len()
            )));
        }
        let mut m = Self::default();
        for (p, t) in predicted.iter().zip(truth) {
            m.counts[class_index(p.collapse())][class_index(*t)] += 1;
        }
        Ok(m)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let diag: u64 = (0..3).map(|c| self.counts[c][c]).sum();
        diag as f64 / self.total().max(1) as f64
    }

    /// Share of points predicted as `c` that truly are `c`.
    pub fn precision(&self, c: TruthLabel) -> Option<f64> {
        let i = class_index(c);
        let row: u64 = self.counts[i].iter().sum();
        (row > 0).then(|| self.counts[i][i] as f64 / row as f64)
    }

    /// Share of points truly `c` that were predicted as `c`.
    pub fn recall(&self, c: TruthLabel) -> Option<f64> {
        let i = class_index(c);
        let col: u64 = (0..3).map(|r| self.counts[r][i]).sum();
        (col > 0).then(|| self.counts[i][i] as f64 / col as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub per_class: BTreeMap<String, ClassMetrics>,
}

impl Metrics {
    pub fn new(confusion: ConfusionMatrix) -> Self {
        let per_class = CLASSES
            .iter()
            .map(|c| {
                (
                    c.to_string(),
                    ClassMetrics {
                        precision: confusion.precision(*c),
                        recall: confusion.recall(*c),
                    },
                )
            })
            .collect();
        Self {
            confusion,
            accuracy: confusion.accuracy(),
            per_class,
        }
    }
}

/// Metrics for a cloud carrying both predicted and truth labels.
pub fn evaluate(cloud: &PointCloud<f64>) -> Result<Option<Metrics>> {
    if !(cloud.has_truth() && cloud.has_predicted()) {
        return Ok(None);
    }
    let pred: Vec<Label> = cloud
        .records()
        .iter()
        .map(|r| r.predicted_label.expect("checked"))
        .collect();
    let truth: Vec<TruthLabel> = cloud
        .records()
        .iter()
        .map(|r| r.truth_label.expect("checked"))
        .collect();
    Ok(Some(Metrics::new(ConfusionMatrix::from_labels(&pred, &truth)?)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageError {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StageParameters {
    pub osr: Option<OsrConfig>,
    pub lie: Option<LieConfig>,
    pub cluster: Option<ClusterConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub version: u32,
    pub command: String,
    pub n_points: usize,
    pub parameters: StageParameters,
    pub osr: Option<OsrSummary>,
    pub features: Option<FeatureSummary>,
    pub gmm: Option<ClusterSummary>,
    pub class_counts: Option<BTreeMap<String, usize>>,
    pub metrics: Option<Metrics>,
    /// Wall-clock milliseconds per stage.
    pub timings_ms: BTreeMap<String, f64>,
    pub error: Option<StageError>,
    pub notes: Vec<String>,
}

impl PipelineReport {
    pub fn new(command: &str, n_points: usize) -> Self {
        Self {
            version: REPORT_VERSION,
            command: command.into(),
            n_points,
            parameters: StageParameters::default(),
            osr: None,
            features: None,
            gmm: None,
            class_counts: None,
            metrics: None,
            timings_ms: BTreeMap::new(),
            error: None,
            notes: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json();
        text.push('\n');
        ingest::write_atomic(path, text.as_bytes())
    }

    fn fail(&mut self, stage: &str, err: &Error) {
        self.error = Some(StageError {
            stage: stage.into(),
            message: err.to_string(),
        });
    }

    fn time(&mut self, stage: &str, start: Instant) {
        self.timings_ms
            .insert(stage.into(), start.elapsed().as_secs_f64() * 1e3);
    }
}

fn count_classes(cloud: &PointCloud<f64>) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for r in cloud.records() {
        if let Some(l) = r.predicted_label {
            *m.entry(l.to_string()).or_insert(0) += 1;
        }
    }
    m
}

/// Ground filtering: sets the ground column from the OSR fit.
pub fn stage_filter(cloud: &mut PointCloud<f64>, cfg: &OsrConfig) -> Result<OsrSummary> {
    let fit = run_osr(cloud, cfg)?;
    cloud.set_ground_mask(fit.ground_mask(cloud.len()))?;
    Ok(OsrSummary {
        beta: fit.plane.as_array(),
        phi: fit.phi,
        nonground_count: fit.nonground.len(),
        iterations: fit.iterations,
        converged: fit.converged,
        stop: fit.stop,
    })
}

fn nonground_of(cloud: &PointCloud<f64>) -> Result<IndexSet> {
    cloud
        .nonground_set()
        .ok_or_else(|| Error::SchemaError("input has no ground column".into()))
}

/// Feature extraction over the rows with ground = 0. Invalid features are
/// stored as missing values.
pub fn stage_lie(cloud: &mut PointCloud<f64>, cfg: &LieConfig, notes: &mut Vec<String>) -> Result<FeatureSummary> {
    let nonground = nonground_of(cloud)?;
    if nonground.is_empty() {
        notes.push("no nonground points: feature extraction skipped".into());
        cloud.set_features(vec![None; cloud.len()])?;
        return Ok(FeatureSummary {
            count: 0,
            valid: 0,
            invalid: 0,
            v: None,
        });
    }
    let f = compute_features(cloud, &nonground, &cfg.bandwidth()?, cfg.mode, cfg.truncation)?;
    let column: Vec<Option<f64>> = f.iter().map(|x| x.filter(|x| x.valid).map(|x| x.v)).collect();
    let values: Vec<f64> = column.iter().flatten().copied().collect();
    cloud.set_features(column)?;
    Ok(FeatureSummary {
        count: nonground.len(),
        valid: values.len(),
        invalid: nonground.len() - values.len(),
        v: quantiles(&values),
    })
}

/// Clustering of the nonground rows with a feature; ground rows become
/// Ground and featureless nonground rows inherit from the nearest labeled
/// neighbor.
pub fn stage_cluster(
    cloud: &mut PointCloud<f64>,
    cfg: &ClusterConfig,
    notes: &mut Vec<String>,
) -> Result<Option<ClusterSummary>> {
    let nonground = nonground_of(cloud)?;
    let features = cloud
        .features()
        .ok_or_else(|| Error::SchemaError("input has no v column".into()))?
        .to_vec();
    if cfg.use_intensity && !cloud.has_intensity() {
        return Err(Error::SchemaError(
            "use_intensity is set but the input has no intensity column".into(),
        ));
    }
    let mut labels = vec![Label::Ground; cloud.len()];
    if nonground.is_empty() {
        notes.push("no nonground points: clustering skipped".into());
        cloud.set_predicted(&labels)?;
        return Ok(None);
    }
    let rows: Vec<usize> = nonground.iter().filter(|&i| features[i].is_some()).collect();
    let mut data = Vec::with_capacity(rows.len() * 2);
    for &i in &rows {
        data.push(features[i].expect("filtered"));
        if cfg.use_intensity {
            data.push(cloud.record(i).intensity.expect("checked"));
        }
    }
    let dim = if cfg.use_intensity { 2 } else { 1 };
    let raw = FeatureMatrix::new(data, dim, rows.clone())?;
    let (x, tr) = if cfg.use_intensity {
        let (x, tr) = standardize(&raw)?;
        (x, Some(tr))
    } else {
        (raw, None)
    };
    let all_names = ["v", "intensity"];
    let kept: Vec<usize> = tr.as_ref().map_or(vec![0], |t| t.kept.clone());
    let columns: Vec<String> = kept.iter().map(|&j| all_names[j].to_string()).collect();
    // with v dropped as constant every component ties and keeps its order
    let v_col = kept.iter().position(|&j| j == 0);

    let (component, summary_base) = match cfg.method {
        ClusterMethod::Gmm => {
            let m = fit_gmm(&x, cfg.k, cfg.seed, &cfg.gmm)?;
            let a = cluster::predict(&m, &x)?;
            let s = (
                Some(m.weights.clone()),
                m.means.clone(),
                Some(m.covariances.clone()),
                Some(m.final_loglik()),
                m.loglik.len(),
                m.converged,
            );
            (a.labels, s)
        }
        ClusterMethod::Kmeans => {
            let r = kmeans(&x, cfg.k, cfg.seed, &cfg.kmeans)?;
            let s = (None, r.centroids.clone(), None, None, r.inertia.len(), r.converged);
            (r.labels, s)
        }
    };
    let (weights, means, covariances, loglik, iterations, converged) = summary_base;
    let mapping = match v_col {
        Some(c) => label_mapping(&means, c),
        None => label_mapping(&vec![vec![0.0]; means.len()], 0),
    };
    let labeled: Vec<(usize, Label)> = rows.iter().zip(&component).map(|(&i, &c)| (i, mapping[c])).collect();
    let filled = fill_from_nearest(cloud, &nonground, &labeled)?;
    for (i, l) in filled {
        labels[i] = l;
    }
    cloud.set_predicted(&labels)?;
    Ok(Some(ClusterSummary {
        method: cfg.method,
        k: cfg.k,
        columns,
        standardization: tr,
        weights,
        means,
        covariances,
        loglik,
        iterations,
        converged,
        label_mapping: mapping,
        inherited: nonground.len() - rows.len(),
    }))
}

fn finish(cloud: &PointCloud<f64>, report: &mut PipelineReport) -> Result<()> {
    if cloud.has_predicted() {
        report.class_counts = Some(count_classes(cloud));
        report.metrics = evaluate(cloud)?;
    }
    Ok(())
}

/// All three stages in order. The report is returned even on failure, with
/// the failing stage recorded.
pub fn run_pipeline(cloud: &mut PointCloud<f64>, cfg: &PipelineConfig) -> (PipelineReport, Result<()>) {
    let mut report = PipelineReport::new("run", cloud.len());
    report.parameters = StageParameters {
        osr: Some(cfg.osr),
        lie: Some(cfg.lie.clone()),
        cluster: Some(cfg.cluster.clone()),
    };
    let t = Instant::now();
    match stage_filter(cloud, &cfg.osr) {
        Ok(s) => report.osr = Some(s),
        Err(e) => {
            report.fail("filter", &e);
            return (report, Err(e));
        }
    }
    report.time("filter", t);
    let t = Instant::now();
    match stage_lie(cloud, &cfg.lie, &mut report.notes) {
        Ok(s) => report.features = Some(s),
        Err(e) => {
            report.fail("lie", &e);
            return (report, Err(e));
        }
    }
    report.time("lie", t);
    let t = Instant::now();
    match stage_cluster(cloud, &cfg.cluster, &mut report.notes) {
        Ok(s) => report.gmm = s,
        Err(e) => {
            report.fail("cluster", &e);
            return (report, Err(e));
        }
    }
    report.time("cluster", t);
    if let Err(e) = finish(cloud, &mut report) {
        report.fail("eval", &e);
        return (report, Err(e));
    }
    (report, Ok(()))
}

/// Result of a command: exit status, optional report and a diagnostic.
#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub report: Option<PipelineReport>,
    pub message: Option<String>,
}

impl Outcome {
    fn ok(report: Option<PipelineReport>) -> Self {
        Self {
            code: 0,
            report,
            message: None,
        }
    }

    fn err(err: &Error, report: Option<PipelineReport>) -> Self {
        Self {
            code: exit_code(err),
            report,
            message: Some(err.to_string()),
        }
    }
}

fn write_outputs(cloud: &PointCloud<f64>, cfg: &PipelineConfig, report: &PipelineReport) -> Result<()> {
    if let Some(out) = &cfg.output {
        ingest::write_csv(cloud, out, ColumnSet::available(cloud))?;
    }
    if let Some(rp) = &cfg.report {
        report.write(rp)?;
    }
    Ok(())
}

fn stage_failure(err: Error, report: PipelineReport, cfg: &PipelineConfig) -> Outcome {
    if let Some(rp) = &cfg.report {
        if let Err(w) = report.write(rp) {
            log::error!("could not write report: {w}");
        }
    }
    Outcome::err(&err, Some(report))
}

/// Generates the configured scene and writes it as CSV.
pub fn cmd_synth(cfg: &PipelineConfig) -> Outcome {
    let result = (|| {
        let spec = cfg
            .scene
            .as_ref()
            .ok_or_else(|| Error::Config("synth needs a scene (name or spec)".into()))?
            .resolve()?;
        let out = cfg
            .output
            .as_ref()
            .ok_or_else(|| Error::Config("synth needs an output path".into()))?;
        let cloud = synth::generate(&spec)?;
        ingest::write_csv(&cloud, out, ColumnSet::available(&cloud))?;
        Ok(())
    })();
    match result {
        Ok(()) => Outcome::ok(None),
        Err(e) => Outcome::err(&e, None),
    }
}

fn load(cfg: &PipelineConfig) -> Result<PointCloud<f64>> {
    cfg.validate()?;
    cfg.source()
}

type Stage = fn(&mut PointCloud<f64>, &PipelineConfig, &mut PipelineReport) -> Result<()>;

fn run_stage(cfg: &PipelineConfig, command: &str, stage: Stage) -> Outcome {
    let mut cloud = match load(cfg) {
        Ok(c) => c,
        Err(e) => return Outcome::err(&e, None),
    };
    let mut report = PipelineReport::new(command, cloud.len());
    let t = Instant::now();
    if let Err(e) = stage(&mut cloud, cfg, &mut report) {
        if exit_code(&e) == 2 {
            return Outcome::err(&e, None);
        }
        report.fail(command, &e);
        return stage_failure(e, report, cfg);
    }
    report.time(command, t);
    if let Err(e) = finish(&cloud, &mut report).and_then(|_| write_outputs(&cloud, cfg, &report)) {
        return Outcome::err(&e, Some(report));
    }
    Outcome::ok(Some(report))
}

pub fn cmd_filter(cfg: &PipelineConfig) -> Outcome {
    run_stage(cfg, "filter", |cloud, cfg, report| {
        report.parameters.osr = Some(cfg.osr);
        report.osr = Some(stage_filter(cloud, &cfg.osr)?);
        Ok(())
    })
}

pub fn cmd_lie(cfg: &PipelineConfig) -> Outcome {
    run_stage(cfg, "lie", |cloud, cfg, report| {
        report.parameters.lie = Some(cfg.lie.clone());
        report.features = Some(stage_lie(cloud, &cfg.lie, &mut report.notes)?);
        Ok(())
    })
}

pub fn cmd_cluster(cfg: &PipelineConfig) -> Outcome {
    run_stage(cfg, "cluster", |cloud, cfg, report| {
        report.parameters.cluster = Some(cfg.cluster.clone());
        report.gmm = stage_cluster(cloud, &cfg.cluster, &mut report.notes)?;
        Ok(())
    })
}

pub fn cmd_run(cfg: &PipelineConfig) -> Outcome {
    let mut cloud = match load(cfg) {
        Ok(c) => c,
        Err(e) => return Outcome::err(&e, None),
    };
    let (report, result) = run_pipeline(&mut cloud, cfg);
    if let Err(e) = result {
        return stage_failure(e, report, cfg);
    }
    match write_outputs(&cloud, cfg, &report) {
        Ok(()) => Outcome::ok(Some(report)),
        Err(e) => Outcome::err(&e, Some(report)),
    }
}

/// Compares the `class` column of `predicted` with the `truth` column of
/// `truth` (or of `predicted` itself when no truth file is given).
pub fn cmd_eval(predicted: &Path, truth: Option<&Path>, report_path: Option<&Path>) -> Outcome {
    let result = (|| {
        let p = ingest::read_cloud(predicted)?;
        if !p.has_predicted() {
            return Err(Error::SchemaError(format!(
                "{} has no complete class column",
                predicted.display()
            )));
        }
        let t = match truth {
            Some(path) => ingest::read_cloud(path)?,
            None => p.clone(),
        };
        if !t.has_truth() {
            return Err(Error::SchemaError(
                "no complete truth column to evaluate against".into(),
            ));
        }
        let pred: Vec<Label> = p
            .records()
            .iter()
            .map(|r| r.predicted_label.expect("checked"))
            .collect();
        let tl: Vec<TruthLabel> = t.records().iter().map(|r| r.truth_label.expect("checked")).collect();
        let mut report = PipelineReport::new("eval", p.len());
        report.metrics = Some(Metrics::new(ConfusionMatrix::from_labels(&pred, &tl)?));
        report.class_counts = Some(count_classes(&p));
        if let Some(rp) = report_path {
            report.write(rp)?;
        }
        Ok(report)
    })();
    match result {
        Ok(r) => Outcome::ok(Some(r)),
        Err(e) => Outcome::err(&e, None),
    }
}
