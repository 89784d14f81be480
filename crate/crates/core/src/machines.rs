//! Classifier abstraction over super-label sets, shallow built-in machines and
//! entropy-minimizing orchestration.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SuperLabel};
use crate::error::{Error, Result};
use crate::rarity::{class_entropy_points, Metric};
use crate::rng::XorShift64;

pub const MACHINE_FORMAT_VERSION: u32 = 1;

/// Why a super-label set was rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelSetViolation {
    /// A class appears in more than one super.
    MutualExclusion { class: String, supers: Vec<String> },
    /// Classes not covered by any super.
    ClassCover { missing: Vec<String> },
    /// A super names a class that is not in C.
    UnknownClass { class: String, super_name: String },
    /// A super with no members.
    EmptySuper { super_name: String },
}

impl fmt::Display for LabelSetViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelSetViolation::MutualExclusion { class, supers } => write!(
                f,
                "mutual exclusion violated: class {class} appears in supers {supers:?}"
            ),
            LabelSetViolation::ClassCover { missing } => {
                write!(f, "class cover violated: classes {missing:?} not covered")
            }
            LabelSetViolation::UnknownClass { class, super_name } => {
                write!(f, "super {super_name} names unknown class {class}")
            }
            LabelSetViolation::EmptySuper { super_name } => {
                write!(f, "super {super_name} has no members")
            }
        }
    }
}

/// Checks mutual exclusion, class cover and the union rule.
pub fn validate_label_set(
    supers: &[SuperLabel],
    classes: &[String],
) -> std::result::Result<(), LabelSetViolation> {
    for s in supers {
        if s.members.is_empty() {
            return Err(LabelSetViolation::EmptySuper {
                super_name: s.name.clone(),
            });
        }
        for m in &s.members {
            if !classes.contains(m) {
                return Err(LabelSetViolation::UnknownClass {
                    class: m.clone(),
                    super_name: s.name.clone(),
                });
            }
        }
    }
    for c in classes {
        let owners: Vec<String> = supers
            .iter()
            .filter(|s| s.members.contains(c))
            .map(|s| s.name.clone())
            .collect();
        if owners.len() > 1 {
            return Err(LabelSetViolation::MutualExclusion {
                class: c.clone(),
                supers: owners,
            });
        }
    }
    let missing: Vec<String> = classes
        .iter()
        .filter(|c| !supers.iter().any(|s| s.members.contains(c)))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(LabelSetViolation::ClassCover { missing });
    }
    Ok(())
}

/// A fixed transform applied to inputs before the classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureMap {
    Identity,
    /// Per-dimension z-scoring fitted on training data.
    Standardize { mean: Vec<f64>, std: Vec<f64> },
    /// Coordinate subset, e.g. expert-designated embedding dimensions.
    SelectDims { dims: Vec<usize> },
    /// Fixed linear map y = R x.
    Projection { rows: Vec<Vec<f64>> },
}

impl FeatureMap {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            FeatureMap::Identity => x.to_vec(),
            FeatureMap::Standardize { mean, std } => x
                .iter()
                .zip(mean.iter().zip(std))
                .map(|(v, (m, s))| (v - m) / if *s > 0.0 { *s } else { 1.0 })
                .collect(),
            FeatureMap::SelectDims { dims } => dims.iter().map(|&d| x[d]).collect(),
            FeatureMap::Projection { rows } => rows
                .iter()
                .map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum())
                .collect(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FeatureMap::Identity => "identity",
            FeatureMap::Standardize { .. } => "standardize",
            FeatureMap::SelectDims { .. } => "select_dims",
            FeatureMap::Projection { .. } => "projection",
        }
    }
}

/// How to build the feature map at training time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMapSpec {
    Identity,
    Standardize,
    SelectDims(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MachineKind {
    Centroid,
    Logistic,
    SvmLinear,
}

impl MachineKind {
    pub fn name(&self) -> &'static str {
        match self {
            MachineKind::Centroid => "centroid",
            MachineKind::Logistic => "logistic",
            MachineKind::SvmLinear => "svm_linear",
        }
    }

    pub fn parse(s: &str) -> Result<MachineKind> {
        match s {
            "centroid" => Ok(MachineKind::Centroid),
            "logistic" => Ok(MachineKind::Logistic),
            "svm_linear" => Ok(MachineKind::SvmLinear),
            other => Err(Error::Config(format!("unknown machine kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MachineParams {
    /// Per-super class means, in label-set order.
    Centroid { centroids: Vec<Vec<f64>> },
    /// One weight row + bias per super (softmax for logistic, one-vs-rest for SVM).
    Linear { weights: Vec<Vec<f64>>, bias: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// L2 penalty for the SVM.
    pub lambda: f64,
    pub seed: u64,
    pub feature_map: FeatureMapSpec,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            epochs: 200,
            learning_rate: 0.1,
            lambda: 1e-3,
            seed: 0,
            feature_map: FeatureMapSpec::Identity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Machine {
    pub format_version: u32,
    pub kind: MachineKind,
    pub label_set: Vec<SuperLabel>,
    pub feature_map: FeatureMap,
    pub params: MachineParams,
    pub input_dim: usize,
    pub seed: u64,
    pub trained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub super_label: String,
    /// Sigmoid of the decision margin; monotone in the internal score.
    pub confidence: f64,
    pub score: f64,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn grouped_rows<'a>(ds: &'a Dataset, supers: &[SuperLabel]) -> Result<Vec<Vec<&'a [f64]>>> {
    let mut groups: Vec<Vec<&[f64]>> = vec![Vec::new(); supers.len()];
    for obs in &ds.observations {
        let label = obs.label.as_deref().ok_or_else(|| {
            Error::Training(format!("unlabeled observation {} in training data", obs.id))
        })?;
        let gi = supers
            .iter()
            .position(|s| s.name == label)
            .ok_or_else(|| Error::Training(format!("label {label} not in the label set")))?;
        groups[gi].push(obs.features.as_slice());
    }
    for (s, g) in supers.iter().zip(&groups) {
        if g.is_empty() {
            return Err(Error::Training(format!("super {} has no examples", s.name)));
        }
    }
    Ok(groups)
}

/// Trains a machine of the given kind on a relabeled dataset.
///
/// The dataset's classes are taken as the super-label names; each class
/// becomes a singleton super unless the caller relabeled beforehand.
pub fn train(kind: MachineKind, ds: &Dataset, cfg: &TrainConfig) -> Result<Machine> {
    if ds.classes.len() < 2 {
        return Err(Error::Training(format!(
            "need at least 2 supers to train, got {}",
            ds.classes.len()
        )));
    }
    for obs in &ds.observations {
        if obs.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Training(format!(
                "non-finite features in observation {}",
                obs.id
            )));
        }
    }
    let supers: Vec<SuperLabel> = ds
        .classes
        .iter()
        .map(|c| SuperLabel {
            name: c.clone(),
            members: vec![c.clone()],
        })
        .collect();

    let feature_map = fit_feature_map(&cfg.feature_map, ds);
    let mapped: Vec<Vec<f64>> = ds
        .observations
        .iter()
        .map(|o| feature_map.apply(&o.features))
        .collect();
    let mapped_ds = Dataset {
        observations: ds
            .observations
            .iter()
            .zip(&mapped)
            .map(|(o, f)| crate::data::Observation {
                id: o.id.clone(),
                domain_id: o.domain_id.clone(),
                label: o.label.clone(),
                features: f.clone(),
            })
            .collect(),
        classes: ds.classes.clone(),
        dim: mapped[0].len(),
    };

    let params = match kind {
        MachineKind::Centroid => train_centroid(&mapped_ds, &supers)?,
        MachineKind::Logistic => train_logistic(&mapped_ds, &supers, cfg)?,
        MachineKind::SvmLinear => train_svm(&mapped_ds, &supers, cfg)?,
    };

    Ok(Machine {
        format_version: MACHINE_FORMAT_VERSION,
        kind,
        label_set: supers,
        feature_map,
        params,
        input_dim: ds.dim,
        seed: cfg.seed,
        trained: true,
    })
}

fn fit_feature_map(spec: &FeatureMapSpec, ds: &Dataset) -> FeatureMap {
    match spec {
        FeatureMapSpec::Identity => FeatureMap::Identity,
        FeatureMapSpec::SelectDims(dims) => FeatureMap::SelectDims { dims: dims.clone() },
        FeatureMapSpec::Standardize => {
            let n = ds.len() as f64;
            let mut mean = vec![0.0; ds.dim];
            for o in &ds.observations {
                for (m, v) in mean.iter_mut().zip(&o.features) {
                    *m += v / n;
                }
            }
            let mut std = vec![0.0; ds.dim];
            for o in &ds.observations {
                for (s, (v, m)) in std.iter_mut().zip(o.features.iter().zip(&mean)) {
                    *s += (v - m) * (v - m) / n;
                }
            }
            for s in &mut std {
                *s = s.sqrt();
            }
            FeatureMap::Standardize { mean, std }
        }
    }
}

fn train_centroid(ds: &Dataset, supers: &[SuperLabel]) -> Result<MachineParams> {
    let groups = grouped_rows(ds, supers)?;
    let centroids = groups
        .iter()
        .map(|rows| {
            let mut c = vec![0.0; ds.dim];
            for r in rows {
                for (ci, v) in c.iter_mut().zip(*r) {
                    *ci += v;
                }
            }
            for ci in &mut c {
                *ci /= rows.len() as f64;
            }
            c
        })
        .collect();
    Ok(MachineParams::Centroid { centroids })
}

fn train_logistic(ds: &Dataset, supers: &[SuperLabel], cfg: &TrainConfig) -> Result<MachineParams> {
    let groups = grouped_rows(ds, supers)?; // validates coverage
    drop(groups);
    let s = supers.len();
    let d = ds.dim;
    let n = ds.len() as f64;
    let mut weights = vec![vec![0.0; d]; s];
    let mut bias = vec![0.0; s];
    let targets: Vec<usize> = ds
        .observations
        .iter()
        .map(|o| {
            supers
                .iter()
                .position(|sl| Some(sl.name.as_str()) == o.label.as_deref())
                .unwrap()
        })
        .collect();
    // full-batch gradient descent on the softmax cross-entropy
    for _ in 0..cfg.epochs {
        let mut gw = vec![vec![0.0; d]; s];
        let mut gb = vec![0.0; s];
        for (obs, &t) in ds.observations.iter().zip(&targets) {
            let logits: Vec<f64> = (0..s)
                .map(|j| {
                    bias[j]
                        + weights[j]
                            .iter()
                            .zip(&obs.features)
                            .map(|(w, x)| w * x)
                            .sum::<f64>()
                })
                .collect();
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            for j in 0..s {
                let p = exps[j] / z;
                let err = p - if j == t { 1.0 } else { 0.0 };
                for (g, x) in gw[j].iter_mut().zip(&obs.features) {
                    *g += err * x / n;
                }
                gb[j] += err / n;
            }
        }
        for j in 0..s {
            for (w, g) in weights[j].iter_mut().zip(&gw[j]) {
                *w -= cfg.learning_rate * g;
            }
            bias[j] -= cfg.learning_rate * gb[j];
        }
    }
    Ok(MachineParams::Linear { weights, bias })
}

fn train_svm(ds: &Dataset, supers: &[SuperLabel], cfg: &TrainConfig) -> Result<MachineParams> {
    let groups = grouped_rows(ds, supers)?;
    drop(groups);
    let s = supers.len();
    let d = ds.dim;
    let targets: Vec<usize> = ds
        .observations
        .iter()
        .map(|o| {
            supers
                .iter()
                .position(|sl| Some(sl.name.as_str()) == o.label.as_deref())
                .unwrap()
        })
        .collect();
    let mut weights = vec![vec![0.0; d]; s];
    let mut bias = vec![0.0; s];
    // one-vs-rest hinge loss + L2, deterministic subgradient descent with
    // seeded per-epoch shuffling
    for j in 0..s {
        let mut rng = XorShift64::new(cfg.seed ^ (j as u64).wrapping_mul(0x9E3779B97F4A7C15));
        let mut order: Vec<usize> = (0..ds.len()).collect();
        for epoch in 0..cfg.epochs {
            rng.shuffle(&mut order);
            let eta = cfg.learning_rate / (1.0 + epoch as f64 * 0.05);
            for &i in &order {
                let x = &ds.observations[i].features;
                let y = if targets[i] == j { 1.0 } else { -1.0 };
                let f: f64 = bias[j]
                    + weights[j].iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
                let shrink = 1.0 - eta * cfg.lambda;
                for w in &mut weights[j] {
                    *w *= shrink;
                }
                if y * f < 1.0 {
                    for (w, v) in weights[j].iter_mut().zip(x) {
                        *w += eta * y * v;
                    }
                    bias[j] += eta * y;
                }
            }
        }
    }
    Ok(MachineParams::Linear { weights, bias })
}

impl Machine {
    /// Per-super decision scores in label-set order.
    fn scores(&self, x: &[f64]) -> Vec<f64> {
        let z = self.feature_map.apply(x);
        match &self.params {
            MachineParams::Centroid { centroids } => centroids
                .iter()
                .map(|c| {
                    -c.iter()
                        .zip(&z)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect(),
            MachineParams::Linear { weights, bias } => weights
                .iter()
                .zip(bias)
                .map(|(w, b)| b + w.iter().zip(&z).map(|(a, v)| a * v).sum::<f64>())
                .collect(),
        }
    }

    pub fn predict(&self, features: &[f64]) -> Result<Prediction> {
        if !self.trained {
            return Err(Error::State("machine is not trained".into()));
        }
        if features.len() != self.input_dim {
            return Err(Error::Validation(format!(
                "dimension mismatch: machine expects {}, observation has {}",
                self.input_dim,
                features.len()
            )));
        }
        let scores = self.scores(features);
        let best = scores
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
            .unwrap()
            .0;
        let second = scores
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != best)
            .map(|(_, s)| *s)
            .fold(f64::NEG_INFINITY, f64::max);
        let margin = scores[best] - second;
        Ok(Prediction {
            super_label: self.label_set[best].name.clone(),
            confidence: sigmoid(margin),
            score: margin,
        })
    }

    /// The machine's entropy feature function: for linear machines this is the
    /// trained linear layer on top of the feature map; for centroid machines
    /// it is the feature map alone.
    pub fn entropy_features(&self, x: &[f64]) -> Vec<f64> {
        let z = self.feature_map.apply(x);
        match &self.params {
            MachineParams::Centroid { .. } => z,
            MachineParams::Linear { weights, bias } => weights
                .iter()
                .zip(bias)
                .map(|(w, b)| b + w.iter().zip(&z).map(|(a, v)| a * v).sum::<f64>())
                .collect(),
        }
    }

    /// Fraction of labeled observations the machine classifies correctly.
    pub fn accuracy(&self, ds: &Dataset) -> Result<f64> {
        let mut hits = 0usize;
        let mut total = 0usize;
        for obs in &ds.observations {
            let Some(label) = obs.label.as_deref() else {
                continue;
            };
            total += 1;
            if self.predict(&obs.features)?.super_label == label {
                hits += 1;
            }
        }
        if total == 0 {
            return Err(Error::Validation("no labeled observations to score".into()));
        }
        Ok(hits as f64 / total as f64)
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Validation(format!("serialize machine: {e}")))?;
        crate::write_atomic(path.as_ref(), text.as_bytes())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Machine> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|source| Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        })?;
        let m: Machine = serde_json::from_str(&text)
            .map_err(|e| Error::Format {
                row: 0,
                message: format!("machine file: {e}"),
            })?;
        if m.format_version != MACHINE_FORMAT_VERSION {
            return Err(Error::Format {
                row: 0,
                message: format!("unsupported machine format version {}", m.format_version),
            });
        }
        Ok(m)
    }
}

/// Entropy of rare class `c_r` in the machine's own feature space.
pub fn machine_entropy(
    m: &Machine,
    ds: &Dataset,
    c_r: &str,
    k: usize,
    metric: Metric,
) -> Result<f64> {
    if !ds.classes.iter().any(|c| c == c_r) {
        return Err(Error::Validation(format!("unknown rare class {c_r}")));
    }
    let idx = ds.class_indices(c_r);
    let mapped: Vec<Vec<f64>> = idx
        .iter()
        .map(|&i| m.entropy_features(&ds.observations[i].features))
        .collect();
    let rows: Vec<&[f64]> = mapped.iter().map(|v| v.as_slice()).collect();
    Ok(class_entropy_points(&rows, k, metric))
}

/// Picks the roster machine minimizing the rare-class entropy in its own
/// feature space. Ties break by roster order. Returns the winner's index and
/// the per-machine entropy table.
pub fn orchestrate(
    roster: &[Machine],
    ds: &Dataset,
    c_r: &str,
    k: usize,
    metric: Metric,
) -> Result<(usize, Vec<f64>)> {
    if roster.is_empty() {
        return Err(Error::Validation("empty machine roster".into()));
    }
    let names: HashSet<Vec<&str>> = roster
        .iter()
        .map(|m| m.label_set.iter().map(|s| s.name.as_str()).collect())
        .collect();
    if names.len() > 1 {
        return Err(Error::Validation(
            "roster machines have mixed label sets".into(),
        ));
    }
    let table: Vec<f64> = roster
        .iter()
        .map(|m| machine_entropy(m, ds, c_r, k, metric))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, t) in table.iter().enumerate() {
        if *t < table[best] {
            best = i;
        }
    }
    Ok((best, table))
}
