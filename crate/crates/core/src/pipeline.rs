//! Iterative rare-class staging, machine selection and the label-predictor
//! fusion rule.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{relabel, Dataset, SuperLabel};
use crate::error::{Error, Result};
use crate::machines::{
    self, FeatureMapSpec, Machine, MachineKind, Prediction, TrainConfig,
};
use crate::rarity::{self, Metric};
use crate::rng::XorShift64;

pub const MODEL_FORMAT_VERSION: u32 = 1;

pub const SUPER_OVERLAP: &str = "OVERLAP";
pub const SUPER_NOT_OVERLAP: &str = "NOT_OVERLAP";
pub const SUPER_RARE: &str = "RARE";
pub const SUPER_NONRARE: &str = "NONRARE";

fn default_k() -> usize {
    10
}
fn default_multiplier() -> f64 {
    1.0
}
fn default_t_c() -> f64 {
    0.9
}
fn default_max_stages() -> usize {
    4
}
fn default_dl_roster() -> Vec<MachineKind> {
    vec![
        MachineKind::Centroid,
        MachineKind::Logistic,
        MachineKind::SvmLinear,
    ]
}
fn default_k_roster() -> Vec<MachineKind> {
    vec![MachineKind::SvmLinear]
}
fn default_metric() -> Metric {
    Metric::Euclidean
}
fn default_epochs() -> usize {
    200
}
fn default_learning_rate() -> f64 {
    0.1
}
fn default_lambda() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_multiplier")]
    pub multiplier: f64,
    /// Knowledge-override confidence threshold; the override requires the
    /// knowledge machine's confidence to strictly exceed it.
    #[serde(default = "default_t_c")]
    pub t_c: f64,
    #[serde(default = "default_dl_roster")]
    pub dl_roster: Vec<MachineKind>,
    #[serde(default = "default_k_roster")]
    pub k_roster: Vec<MachineKind>,
    #[serde(default = "default_max_stages")]
    pub max_stages: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_metric")]
    pub metric: Metric,
    /// When set, knowledge-roster machines see only these embedding
    /// dimensions, standing in for an expert-designated feature space.
    #[serde(default)]
    pub knowledge_dims: Option<Vec<usize>>,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
}

impl Default for PipelineConfig {
    fn default() -> PipelineConfig {
        PipelineConfig {
            k: default_k(),
            multiplier: default_multiplier(),
            t_c: default_t_c(),
            dl_roster: default_dl_roster(),
            k_roster: default_k_roster(),
            max_stages: default_max_stages(),
            seed: 0,
            metric: default_metric(),
            knowledge_dims: None,
            epochs: default_epochs(),
            learning_rate: default_learning_rate(),
            lambda: default_lambda(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_c > 0.0 && self.t_c <= 1.0) {
            return Err(Error::Config(format!(
                "t_c must be in (0, 1], got {}",
                self.t_c
            )));
        }
        if self.max_stages == 0 {
            return Err(Error::Config("max_stages must be at least 1".into()));
        }
        if self.multiplier <= 0.0 {
            return Err(Error::Config("multiplier must be positive".into()));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.dl_roster.is_empty() {
            return Err(Error::Config("dl_roster must not be empty".into()));
        }
        Ok(())
    }

    fn train_config(&self, salt: u64, feature_map: FeatureMapSpec) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            lambda: self.lambda,
            seed: self.seed ^ salt,
            feature_map,
        }
    }
}

/// One peeled stage: the rare class, its overlap class and the two machines
/// chosen by entropy orchestration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagePlan {
    pub rare_class: String,
    pub overlap_class: String,
    pub dl_machine: Machine,
    pub k_machine: Machine,
    /// Per-roster-member rare-class entropies, roster order.
    pub dl_entropy_table: Vec<f64>,
    pub k_entropy_table: Vec<f64>,
    /// Cosine similarity of each candidate class to the rare class.
    pub similarities: Vec<(String, f64)>,
    /// Training accuracies, logged for inspection.
    pub dl_accuracy: f64,
    pub k_accuracy: f64,
}

/// A fitted staged model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagedModel {
    pub format_version: u32,
    pub config: PipelineConfig,
    pub stages: Vec<StagePlan>,
    /// Multiclass machine over the classes left after all stages; absent when
    /// a single class remains.
    pub residual_machine: Option<Machine>,
    pub residual_classes: Vec<String>,
    pub input_dim: usize,
    /// Original class set, for prediction-range checks.
    pub classes: Vec<String>,
}

/// Result of the three-branch label-predictor fusion rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FuseOutcome {
    /// Assign the stage's rare class.
    Rare,
    /// Assign the stage's overlap class.
    Overlap,
    /// Defer to later stages / the residual machine.
    NonRare,
}

/// Fusion of the overlap classifier's label with the knowledge prediction.
///
/// Override branch: an OVERLAP verdict is replaced by the rare class only if
/// the knowledge machine says RARE with confidence strictly above `t_c`.
pub fn fuse(dl_label: &str, eke: &Prediction, t_c: f64) -> FuseOutcome {
    if dl_label == SUPER_OVERLAP {
        if eke.super_label == SUPER_RARE && eke.confidence > t_c {
            FuseOutcome::Rare
        } else {
            FuseOutcome::Overlap
        }
    } else if eke.super_label == SUPER_RARE {
        FuseOutcome::Rare
    } else {
        FuseOutcome::NonRare
    }
}

/// Signalled when Definition-style rarity flags no class.
#[derive(Debug, Clone, PartialEq)]
pub enum StageOutcome {
    Planned(Box<StagePlan>),
    NoRareClass,
}

/// Plans one stage on the current working set.
pub fn plan_stage(ds: &Dataset, cfg: &PipelineConfig, stage_index: usize) -> Result<StageOutcome> {
    cfg.validate()?;
    if ds.classes.len() < 2 {
        return Err(Error::Validation(
            "need at least 2 classes to plan a stage".into(),
        ));
    }
    let profile = rarity::entropy_profile(ds, cfg.k, cfg.metric)?;
    let verdict = rarity::identify_rare(&profile, cfg.multiplier);
    let Some(rare_class) = verdict.rarest else {
        return Ok(StageOutcome::NoRareClass);
    };

    let (overlap_class, similarities) = if ds.classes.len() == 2 {
        // single other class is the overlap class by forced choice
        let other = ds
            .classes
            .iter()
            .find(|c| **c != rare_class)
            .unwrap()
            .clone();
        match rarity::find_overlap_class(ds, &rare_class) {
            Ok((_, sims)) => (other, sims),
            Err(_) => (other.clone(), vec![(other, f64::NAN)]),
        }
    } else {
        rarity::find_overlap_class(ds, &rare_class)?
    };

    let stage_salt = (stage_index as u64 + 1) << 8;

    // overlap-vs-rest roster, orchestrated by rare-class entropy
    let dl_supers = vec![
        SuperLabel {
            name: SUPER_OVERLAP.into(),
            members: vec![overlap_class.clone()],
        },
        SuperLabel {
            name: SUPER_NOT_OVERLAP.into(),
            members: ds
                .classes
                .iter()
                .filter(|c| **c != overlap_class)
                .cloned()
                .collect(),
        },
    ];
    let dl_ds = relabel(ds, &dl_supers)?;
    let dl_roster: Vec<Machine> = cfg
        .dl_roster
        .iter()
        .enumerate()
        .map(|(i, kind)| {
            machines::train(
                *kind,
                &dl_ds,
                &cfg.train_config(stage_salt | i as u64, FeatureMapSpec::Identity),
            )
        })
        .collect::<Result<_>>()?;
    let (dl_best, dl_entropy_table) =
        machines::orchestrate(&dl_roster, ds, &rare_class, cfg.k, cfg.metric)?;
    let dl_machine = dl_roster.into_iter().nth(dl_best).unwrap();
    let dl_accuracy = dl_machine.accuracy(&dl_ds)?;

    // rare-vs-rest within the non-overlap pool; for a 2-class working set the
    // pool holds only the rare class, so the overlap class stands in as the
    // NONRARE side
    let mut nonrare: Vec<String> = ds
        .classes
        .iter()
        .filter(|c| **c != rare_class && **c != overlap_class)
        .cloned()
        .collect();
    let k_pool = if nonrare.is_empty() {
        nonrare.push(overlap_class.clone());
        ds.clone()
    } else {
        let observations: Vec<_> = ds
            .observations
            .iter()
            .filter(|o| o.label.as_deref() != Some(overlap_class.as_str()))
            .cloned()
            .collect();
        Dataset {
            observations,
            classes: ds
                .classes
                .iter()
                .filter(|c| **c != overlap_class)
                .cloned()
                .collect(),
            dim: ds.dim,
        }
    };
    let k_supers = vec![
        SuperLabel {
            name: SUPER_RARE.into(),
            members: vec![rare_class.clone()],
        },
        SuperLabel {
            name: SUPER_NONRARE.into(),
            members: nonrare,
        },
    ];
    let k_ds = relabel(&k_pool, &k_supers)?;
    let k_feature_map = match &cfg.knowledge_dims {
        Some(dims) => FeatureMapSpec::SelectDims(dims.clone()),
        None => FeatureMapSpec::Identity,
    };
    // with no knowledge machines configured, fall back to the data-driven
    // roster on the rare-vs-rest task
    let k_kinds: &[MachineKind] = if cfg.k_roster.is_empty() {
        &cfg.dl_roster
    } else {
        &cfg.k_roster
    };
    let k_roster: Vec<Machine> = k_kinds
        .iter()
        .enumerate()
        .map(|(i, kind)| {
            machines::train(
                *kind,
                &k_ds,
                &cfg.train_config(stage_salt | (0x40 | i as u64), k_feature_map.clone()),
            )
        })
        .collect::<Result<_>>()?;
    let (k_best, k_entropy_table) =
        machines::orchestrate(&k_roster, &k_pool, &rare_class, cfg.k, cfg.metric)?;
    let k_machine = k_roster.into_iter().nth(k_best).unwrap();
    let k_accuracy = k_machine.accuracy(&k_ds)?;

    Ok(StageOutcome::Planned(Box::new(StagePlan {
        rare_class,
        overlap_class,
        dl_machine,
        k_machine,
        dl_entropy_table,
        k_entropy_table,
        similarities,
        dl_accuracy,
        k_accuracy,
    })))
}

fn holdout_split(ds: &Dataset, fraction: f64, seed: u64) -> (Dataset, Dataset) {
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut rng = XorShift64::new(seed ^ 0x401D);
    rng.shuffle(&mut order);
    let n_holdout = ((ds.len() as f64 * fraction) as usize).max(1);
    let holdout_set: std::collections::HashSet<usize> =
        order[..n_holdout].iter().copied().collect();
    let mut train = Vec::new();
    let mut holdout = Vec::new();
    for (i, obs) in ds.observations.iter().enumerate() {
        if holdout_set.contains(&i) {
            holdout.push(obs.clone());
        } else {
            train.push(obs.clone());
        }
    }
    (
        Dataset {
            observations: train,
            classes: ds.classes.clone(),
            dim: ds.dim,
        },
        Dataset {
            observations: holdout,
            classes: ds.classes.clone(),
            dim: ds.dim,
        },
    )
}

fn train_residual(ds: &Dataset, cfg: &PipelineConfig) -> Result<Machine> {
    // pick the roster member with the best accuracy on a seeded 20% holdout,
    // then refit it on all remaining data
    let (train_part, holdout) = holdout_split(ds, 0.2, cfg.seed);
    let mut best: Option<(usize, f64)> = None;
    for (i, kind) in cfg.dl_roster.iter().enumerate() {
        let covers_all = ds
            .classes
            .iter()
            .all(|c| !train_part.class_indices(c).is_empty());
        let acc = if covers_all {
            machines::train(
                *kind,
                &train_part,
                &cfg.train_config(0xE51D | (i as u64) << 4, FeatureMapSpec::Identity),
            )?
            .accuracy(&holdout)?
        } else {
            // tiny working sets: fall back to in-sample selection
            machines::train(
                *kind,
                ds,
                &cfg.train_config(0xE51D | (i as u64) << 4, FeatureMapSpec::Identity),
            )?
            .accuracy(ds)?
        };
        if best.map(|(_, b)| acc > b).unwrap_or(true) {
            best = Some((i, acc));
        }
    }
    let (chosen, _) = best.unwrap();
    machines::train(
        cfg.dl_roster[chosen],
        ds,
        &cfg.train_config(0xF1A1, FeatureMapSpec::Identity),
    )
}

/// Fits the full staged model: repeatedly plan a stage, remove the rare class
/// from the working set, and stop at `max_stages`, when no rare class is
/// flagged, or when fewer than 2 classes remain.
pub fn fit(ds: &Dataset, cfg: &PipelineConfig) -> Result<StagedModel> {
    cfg.validate()?;
    if ds.observations.iter().any(|o| o.label.is_none()) {
        return Err(Error::Validation(
            "fit requires a fully labeled dataset".into(),
        ));
    }
    let mut working = ds.clone();
    let mut stages: Vec<StagePlan> = Vec::new();
    while stages.len() < cfg.max_stages && working.classes.len() >= 2 {
        match plan_stage(&working, cfg, stages.len())? {
            StageOutcome::NoRareClass => break,
            StageOutcome::Planned(plan) => {
                let rare = plan.rare_class.clone();
                working = Dataset {
                    observations: working
                        .observations
                        .into_iter()
                        .filter(|o| o.label.as_deref() != Some(rare.as_str()))
                        .collect(),
                    classes: working
                        .classes
                        .into_iter()
                        .filter(|c| *c != rare)
                        .collect(),
                    dim: working.dim,
                };
                stages.push(*plan);
            }
        }
    }
    let residual_machine = if working.classes.len() >= 2 {
        Some(train_residual(&working, cfg)?)
    } else {
        None
    };
    Ok(StagedModel {
        format_version: MODEL_FORMAT_VERSION,
        config: cfg.clone(),
        stages,
        residual_machine,
        residual_classes: working.classes,
        input_dim: ds.dim,
        classes: ds.classes.clone(),
    })
}

impl StagedModel {
    /// Predicts the original-class label of one observation.
    pub fn predict_label(&self, features: &[f64]) -> Result<String> {
        self.predict_with(features, self.config.t_c, &mut 0)
    }

    /// Prediction with an explicit override threshold; increments
    /// `override_count` whenever the override branch fires.
    pub fn predict_with(
        &self,
        features: &[f64],
        t_c: f64,
        override_count: &mut usize,
    ) -> Result<String> {
        if features.len() != self.input_dim {
            return Err(Error::Validation(format!(
                "dimension mismatch: model expects {}, observation has {}",
                self.input_dim,
                features.len()
            )));
        }
        for stage in &self.stages {
            let dl = stage.dl_machine.predict(features)?;
            let eke = stage.k_machine.predict(features)?;
            if dl.super_label == SUPER_OVERLAP
                && eke.super_label == SUPER_RARE
                && eke.confidence > t_c
            {
                *override_count += 1;
            }
            match fuse(&dl.super_label, &eke, t_c) {
                FuseOutcome::Rare => return Ok(stage.rare_class.clone()),
                FuseOutcome::Overlap => return Ok(stage.overlap_class.clone()),
                FuseOutcome::NonRare => continue,
            }
        }
        match &self.residual_machine {
            Some(m) => Ok(m.predict(features)?.super_label),
            None => self
                .residual_classes
                .first()
                .cloned()
                .ok_or_else(|| Error::State("model has no residual classes".into())),
        }
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Validation(format!("serialize model: {e}")))?;
        crate::write_atomic(path.as_ref(), text.as_bytes())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<StagedModel> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|source| Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        })?;
        let m: StagedModel = serde_json::from_str(&text).map_err(|e| Error::Format {
            row: 0,
            message: format!("model file: {e}"),
        })?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Format {
                row: 0,
                message: format!("unsupported model format version {}", m.format_version),
            });
        }
        Ok(m)
    }
}
