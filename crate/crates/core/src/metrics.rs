//! Confusion-matrix metrics and the across-trial / aggregated-trial / ROC
//! evaluation harnesses.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::pipeline::{self, PipelineConfig, StagedModel};
use crate::rng::XorShift64;

/// Square confusion matrix over a fixed class list.
/// `counts[i][j]` = observations of true class `i` predicted as class `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(classes: &[String]) -> ConfusionMatrix {
        ConfusionMatrix {
            classes: classes.to_vec(),
            counts: vec![vec![0; classes.len()]; classes.len()],
        }
    }

    fn index(&self, class: &str) -> Result<usize> {
        self.classes
            .iter()
            .position(|c| c == class)
            .ok_or_else(|| Error::Validation(format!("class {class:?} not in matrix")))
    }

    pub fn record(&mut self, truth: &str, predicted: &str) -> Result<()> {
        let i = self.index(truth)?;
        let j = self.index(predicted)?;
        self.counts[i][j] += 1;
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }
}

/// Per-class scores; undefined ratios are reported as 0 with the
/// corresponding zero-division flag set so callers can tell "bad" from
/// "not measurable".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub class: String,
    pub precision: f64,
    pub sensitivity: f64,
    pub f1: f64,
    pub precision_undefined: bool,
    pub sensitivity_undefined: bool,
    pub f1_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub per_class: Vec<ClassScores>,
    /// Rare class of the model's first stage, when one exists.
    pub rare_class: Option<String>,
    pub rare_f1: Option<f64>,
    /// Rare-vs-rest positive predictive value (== rare-class precision).
    pub rare_ppv: Option<f64>,
    /// Rare-vs-rest negative predictive value.
    pub rare_npv: Option<f64>,
    /// Wall-clock evaluation time; in-memory only so that serialized reports
    /// are byte-identical across reruns of the same seed.
    #[serde(skip)]
    pub runtime_seconds: f64,
}

fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// Derives accuracy / precision / sensitivity / F1 from a confusion matrix.
pub fn score(confusion: &ConfusionMatrix, rare_class: Option<&str>) -> Result<EvalReport> {
    let n = confusion.total();
    if n == 0 {
        return Err(Error::Validation("empty confusion matrix".into()));
    }
    let m = confusion.classes.len();
    let correct: usize = (0..m).map(|i| confusion.counts[i][i]).sum();
    let mut per_class = Vec::with_capacity(m);
    for i in 0..m {
        let tp = confusion.counts[i][i];
        let pred_i: usize = (0..m).map(|r| confusion.counts[r][i]).sum();
        let true_i: usize = confusion.counts[i].iter().sum();
        let (precision, precision_undefined) = ratio(tp, pred_i);
        let (sensitivity, sensitivity_undefined) = ratio(tp, true_i);
        let f1_undefined = precision_undefined && sensitivity_undefined;
        let f1 = if f1_undefined || precision + sensitivity == 0.0 {
            0.0
        } else {
            2.0 * precision * sensitivity / (precision + sensitivity)
        };
        per_class.push(ClassScores {
            class: confusion.classes[i].clone(),
            precision,
            sensitivity,
            f1,
            precision_undefined,
            sensitivity_undefined,
            f1_undefined,
        });
    }
    let (rare_class, rare_f1, rare_ppv, rare_npv) = match rare_class {
        Some(rc) => {
            let i = confusion.index(rc)?;
            let tp = confusion.counts[i][i];
            let pred_rare: usize = (0..m).map(|r| confusion.counts[r][i]).sum();
            let true_rare: usize = confusion.counts[i].iter().sum();
            let pred_nonrare = n - pred_rare;
            // true negatives of the rare-vs-rest reduction
            let tn = n - pred_rare - true_rare + tp;
            let (ppv, _) = ratio(tp, pred_rare);
            let (npv, _) = ratio(tn, pred_nonrare);
            (
                Some(rc.to_string()),
                Some(per_class[i].f1),
                Some(ppv),
                Some(npv),
            )
        }
        None => (None, None, None, None),
    };
    Ok(EvalReport {
        confusion: confusion.clone(),
        accuracy: correct as f64 / n as f64,
        per_class,
        rare_class,
        rare_f1,
        rare_ppv,
        rare_npv,
        runtime_seconds: 0.0,
    })
}

/// Evaluates a fitted model on a labeled dataset.
pub fn report(model: &StagedModel, test: &Dataset) -> Result<EvalReport> {
    let start = Instant::now();
    let mut confusion = ConfusionMatrix::new(&model.classes);
    for obs in &test.observations {
        let Some(truth) = obs.label.as_deref() else {
            return Err(Error::Validation(format!(
                "observation {} is unlabeled; evaluation needs labels",
                obs.id
            )));
        };
        let predicted = model.predict_label(&obs.features)?;
        confusion.record(truth, &predicted)?;
    }
    let rare = model.stages.first().map(|s| s.rare_class.clone());
    let mut rep = score(&confusion, rare.as_deref())?;
    rep.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(rep)
}

/// Both directions of an across-trial (train on one domain, evaluate on the
/// other) plus the macro average of rare-class F1 across directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcrossTrial {
    pub forward: EvalReport,
    pub backward: EvalReport,
    /// Mean of the two directions' macro-averaged per-class F1.
    pub average_f1: f64,
}

fn macro_f1(rep: &EvalReport) -> f64 {
    let m = rep.per_class.len() as f64;
    rep.per_class.iter().map(|c| c.f1).sum::<f64>() / m
}

fn check_disjoint(a: &Dataset, b: &Dataset) -> Result<()> {
    let doms_a: std::collections::BTreeSet<&str> =
        a.observations.iter().map(|o| o.domain_id.as_str()).collect();
    let doms_b: std::collections::BTreeSet<&str> =
        b.observations.iter().map(|o| o.domain_id.as_str()).collect();
    if doms_a.intersection(&doms_b).next().is_some() {
        return Err(Error::Validation(
            "across-trial domains must be disjoint".into(),
        ));
    }
    Ok(())
}

/// Fits on `a`, evaluates on `b`, then the reverse. The two datasets must
/// come from disjoint domains.
pub fn across_trial(a: &Dataset, b: &Dataset, cfg: &PipelineConfig) -> Result<AcrossTrial> {
    check_disjoint(a, b)?;
    let forward = report(&pipeline::fit(a, cfg)?, b)?;
    let backward = report(&pipeline::fit(b, cfg)?, a)?;
    let average_f1 = (macro_f1(&forward) + macro_f1(&backward)) / 2.0;
    Ok(AcrossTrial {
        forward,
        backward,
        average_f1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedTrial {
    /// One report per (held-out fold, repeat), in evaluation order.
    pub fold_reports: Vec<EvalReport>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_macro_f1: f64,
    pub std_macro_f1: f64,
}

/// Splits `indices` (grouped per class) into `folds` stratified folds by
/// seeded shuffle + round-robin assignment.
fn stratified_folds(ds: &Dataset, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let mut assignment = vec![Vec::new(); folds];
    for (ci, class) in ds.classes.iter().enumerate() {
        let mut idx = ds.class_indices(class);
        if idx.len() < folds {
            return Err(Error::Validation(format!(
                "class {class:?} has {} observations, fewer than {folds} folds; \
                 stratification impossible",
                idx.len()
            )));
        }
        let mut rng = XorShift64::new(seed ^ 0x57A7 ^ ((ci as u64) << 20));
        rng.shuffle(&mut idx);
        for (k, i) in idx.into_iter().enumerate() {
            assignment[k % folds].push(i);
        }
    }
    Ok(assignment)
}

fn subset(ds: &Dataset, keep: impl Fn(usize) -> bool) -> Dataset {
    Dataset {
        observations: ds
            .observations
            .iter()
            .enumerate()
            .filter(|(i, _)| keep(*i))
            .map(|(_, o)| o.clone())
            .collect(),
        classes: ds.classes.clone(),
        dim: ds.dim,
    }
}

/// Aggregated trial: stratified k-fold cross-validation on the training
/// domain, each fitted model evaluated on the full held-out domain, repeated
/// `repeats` times with distinct fold shuffles. Deterministic in
/// `cfg.seed`.
pub fn aggregated_trial(
    train_domain: &Dataset,
    test_domain: &Dataset,
    cfg: &PipelineConfig,
    folds: usize,
    repeats: usize,
) -> Result<AggregatedTrial> {
    if folds < 2 {
        return Err(Error::Config(format!(
            "aggregated trial needs at least 2 folds, got {folds}"
        )));
    }
    if repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    check_disjoint(train_domain, test_domain)?;
    let mut fold_reports = Vec::with_capacity(folds * repeats);
    for r in 0..repeats {
        let fold_seed = cfg.seed ^ ((r as u64 + 1) << 40);
        let assignment = stratified_folds(train_domain, folds, fold_seed)?;
        for held in &assignment {
            let held: std::collections::HashSet<usize> = held.iter().copied().collect();
            let train_part = subset(train_domain, |i| !held.contains(&i));
            let model = pipeline::fit(&train_part, cfg)?;
            fold_reports.push(report(&model, test_domain)?);
        }
    }
    let n = fold_reports.len() as f64;
    let accs: Vec<f64> = fold_reports.iter().map(|r| r.accuracy).collect();
    let f1s: Vec<f64> = fold_reports.iter().map(macro_f1).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n;
    let std = |v: &[f64], m: f64| (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt();
    let mean_accuracy = mean(&accs);
    let mean_macro_f1 = mean(&f1s);
    Ok(AggregatedTrial {
        std_accuracy: std(&accs, mean_accuracy),
        std_macro_f1: std(&f1s, mean_macro_f1),
        mean_accuracy,
        mean_macro_f1,
        fold_reports,
    })
}

/// One operating point of the override-threshold sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub t_c: f64,
    /// Times the knowledge override replaced an overlap verdict.
    pub override_count: usize,
    /// Rare-vs-rest true/false positive rates; 0 when the denominator is 0.
    pub tpr: f64,
    pub fpr: f64,
    pub accuracy: f64,
}

/// Default threshold grid: 0.10, 0.15, ..., 0.95 (18 points).
pub fn default_threshold_grid() -> Vec<f64> {
    (2..=19).map(|i| i as f64 * 0.05).collect()
}

/// Sweeps the override confidence threshold of an already-fitted model over a
/// labeled test set, tracking the rare-vs-rest operating point of the first
/// stage.
pub fn roc_sweep(model: &StagedModel, test: &Dataset, grid: &[f64]) -> Result<Vec<RocPoint>> {
    let Some(rare) = model.stages.first().map(|s| s.rare_class.clone()) else {
        return Err(Error::State(
            "roc sweep needs a model with at least one stage".into(),
        ));
    };
    let mut points = Vec::with_capacity(grid.len());
    for &t_c in grid {
        if !(t_c > 0.0 && t_c <= 1.0) {
            return Err(Error::Config(format!("threshold {t_c} out of (0, 1]")));
        }
        let mut override_count = 0usize;
        let (mut tp, mut fp, mut fnn, mut tn) = (0usize, 0usize, 0usize, 0usize);
        let mut correct = 0usize;
        for obs in &test.observations {
            let Some(truth) = obs.label.as_deref() else {
                return Err(Error::Validation(format!(
                    "observation {} is unlabeled; roc sweep needs labels",
                    obs.id
                )));
            };
            let predicted = model.predict_with(&obs.features, t_c, &mut override_count)?;
            if predicted == truth {
                correct += 1;
            }
            match (truth == rare, predicted == rare) {
                (true, true) => tp += 1,
                (true, false) => fnn += 1,
                (false, true) => fp += 1,
                (false, false) => tn += 1,
            }
        }
        let (tpr, _) = ratio(tp, tp + fnn);
        let (fpr, _) = ratio(fp, fp + tn);
        points.push(RocPoint {
            t_c,
            override_count,
            tpr,
            fpr,
            accuracy: correct as f64 / test.len() as f64,
        });
    }
    Ok(points)
}
