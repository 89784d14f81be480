//! Class-wise entropy, rare-class identification and overlap-class discovery.
//!
//! Entropy of a class is the Shannon entropy of its normalized K-nearest-neighbor
//! densities; a class is rare when its entropy deviates from the per-class mean by
//! more than a multiple of the population standard deviation.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Distances below this are clamped so inverse-distance densities stay finite.
pub const DIST_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    Cosine,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Cosine => "cosine",
        }
    }

    pub fn parse(s: &str) -> Result<Metric> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "cosine" => Ok(Metric::Cosine),
            other => Err(Error::Config(format!("unknown metric {other:?}"))),
        }
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Metric::Cosine => {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                if na == 0.0 || nb == 0.0 {
                    // zero vectors carry no direction; treat as maximally distant
                    return 2.0;
                }
                1.0 - dot / (na * nb)
            }
        }
    }
}

/// Per-class entropy values plus their population statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyProfile {
    /// `(class, theta)` aligned with the dataset's class order.
    pub theta: Vec<(String, f64)>,
    pub theta_mean: f64,
    pub theta_std: f64,
    pub k: usize,
    pub metric: Metric,
}

impl EntropyProfile {
    pub fn theta_of(&self, class: &str) -> Option<f64> {
        self.theta
            .iter()
            .find(|(c, _)| c == class)
            .map(|(_, t)| *t)
    }
}

/// Outcome of the rarity test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RarityVerdict {
    pub rare_classes: Vec<String>,
    /// The single rarest class (largest deviation among rare classes), if any.
    pub rarest: Option<String>,
    pub multiplier: f64,
}

/// Inverse-distance density of one point within its class (points given as rows).
///
/// `i` indexes into `points`; the K nearest same-class neighbors are used,
/// with K capped at `|class| - 1` and near-zero distances clamped to [`DIST_EPS`].
pub fn knn_density_points(points: &[&[f64]], i: usize, k: usize, metric: Metric) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::DegenerateClass {
            class: String::new(),
        });
    }
    let mut dists: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(j, p)| (metric.distance(points[i], p), j))
        .collect();
    // index tiebreak keeps K-nearest selection deterministic
    dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let k = k.max(1).min(dists.len());
    let sum: f64 = dists[..k].iter().map(|(d, _)| 1.0 / d.max(DIST_EPS)).sum();
    Ok(sum / k as f64)
}

/// Density of the `i`-th observation of class `c` in the dataset.
pub fn knn_density(ds: &Dataset, c: &str, i: usize, k: usize, metric: Metric) -> Result<f64> {
    let idx = ds.class_indices(c);
    if idx.len() < 2 {
        return Err(Error::DegenerateClass { class: c.into() });
    }
    let points: Vec<&[f64]> = idx
        .iter()
        .map(|&j| ds.observations[j].features.as_slice())
        .collect();
    let local = idx
        .iter()
        .position(|&j| j == i)
        .ok_or_else(|| Error::Validation(format!("observation {i} is not labeled {c}")))?;
    knn_density_points(&points, local, k, metric)
}

/// Entropy of normalized densities over the given point rows.
pub fn class_entropy_points(points: &[&[f64]], k: usize, metric: Metric) -> f64 {
    if points.len() <= 1 {
        return 0.0;
    }
    let lambdas: Vec<f64> = (0..points.len())
        .map(|i| knn_density_points(points, i, k, metric).expect("|class| >= 2"))
        .collect();
    let total: f64 = lambdas.iter().sum();
    lambdas
        .iter()
        .map(|&l| {
            let g = l / total;
            if g > 0.0 {
                -g * g.log2()
            } else {
                0.0
            }
        })
        .sum()
}

/// Class entropy of class `c`; zero for singleton classes by convention.
pub fn class_entropy(ds: &Dataset, c: &str, k: usize, metric: Metric) -> f64 {
    let idx = ds.class_indices(c);
    let points: Vec<&[f64]> = idx
        .iter()
        .map(|&j| ds.observations[j].features.as_slice())
        .collect();
    class_entropy_points(&points, k, metric)
}

/// Per-class entropies with population mean and standard deviation.
pub fn entropy_profile(ds: &Dataset, k: usize, metric: Metric) -> Result<EntropyProfile> {
    if ds.classes.is_empty() {
        return Err(Error::Validation("dataset has no classes".into()));
    }
    let mut theta = Vec::with_capacity(ds.classes.len());
    for c in &ds.classes {
        if ds.class_indices(c).is_empty() {
            return Err(Error::Validation(format!("class {c} is empty")));
        }
        theta.push((c.clone(), class_entropy(ds, c, k, metric)));
    }
    let m = theta.len() as f64;
    let mean = theta.iter().map(|(_, t)| t).sum::<f64>() / m;
    // population statistics (divide by m)
    let var = theta.iter().map(|(_, t)| (t - mean) * (t - mean)).sum::<f64>() / m;
    Ok(EntropyProfile {
        theta,
        theta_mean: mean,
        theta_std: var.sqrt(),
        k,
        metric,
    })
}

/// Flags classes whose entropy deviates from the mean by more than `multiplier * sigma`.
pub fn identify_rare(profile: &EntropyProfile, multiplier: f64) -> RarityVerdict {
    // Relative guard so rounding in the σ computation cannot turn an exact
    // mathematical tie (e.g. a 2-class profile, where every deviation equals
    // σ) into a strict exceedance.
    let threshold = multiplier * profile.theta_std;
    let tol = 1e-9 * threshold.max(f64::MIN_POSITIVE);
    let rare_classes: Vec<String> = profile
        .theta
        .iter()
        .filter(|(_, t)| (t - profile.theta_mean).abs() > threshold + tol)
        .map(|(c, _)| c.clone())
        .collect();
    let rarest = rare_classes
        .iter()
        .max_by(|a, b| {
            let da = (profile.theta_of(a).unwrap() - profile.theta_mean).abs();
            let db = (profile.theta_of(b).unwrap() - profile.theta_mean).abs();
            da.partial_cmp(&db).unwrap()
        })
        .cloned();
    RarityVerdict {
        rare_classes,
        rarest,
        multiplier,
    }
}

/// Component-wise mean of the feature vectors of class `c`.
pub fn class_centroid(ds: &Dataset, c: &str) -> Result<Vec<f64>> {
    let idx = ds.class_indices(c);
    if idx.is_empty() {
        return Err(Error::Validation(format!("class {c} is empty")));
    }
    let mut mean = vec![0.0; ds.dim];
    for &i in &idx {
        for (m, v) in mean.iter_mut().zip(&ds.observations[i].features) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= idx.len() as f64;
    }
    Ok(mean)
}

fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Undefined(
            "cosine similarity undefined for a zero-norm centroid".into(),
        ));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok(dot / (na * nb))
}

/// Finds the overlap class: the non-rare class whose centroid is most
/// cosine-similar to the rare class's centroid. Ties break by class order.
pub fn find_overlap_class(ds: &Dataset, rare: &str) -> Result<(String, Vec<(String, f64)>)> {
    if ds.classes.len() < 2 {
        return Err(Error::Validation(
            "need at least 2 classes to find an overlap class".into(),
        ));
    }
    if !ds.classes.iter().any(|c| c == rare) {
        return Err(Error::Validation(format!("unknown rare class {rare}")));
    }
    let rare_centroid = class_centroid(ds, rare)?;
    let mut sims = Vec::new();
    for c in &ds.classes {
        if c == rare {
            continue;
        }
        let centroid = class_centroid(ds, c)?;
        sims.push((c.clone(), cosine_similarity(&rare_centroid, &centroid)?));
    }
    let best = sims
        .iter()
        .fold(None::<&(String, f64)>, |acc, s| match acc {
            Some(a) if a.1 >= s.1 => Some(a),
            _ => Some(s),
        })
        .unwrap()
        .0
        .clone();
    Ok((best, sims))
}
