//! Expert-knowledge machine for the SOZ case study: scene geometry and signal
//! primitives, the six atomic propositions, the kappa formula and the SVM-based
//! expert knowledge extractor.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Observation};
use crate::error::{Error, Result};
use crate::machines::{self, Machine, MachineKind, TrainConfig};

/// Pixels per voxel side; a voxel is the smallest activation unit.
pub const VOXEL_PIXELS: i64 = 3;

pub type Point = [f64; 2];
pub type Polygon = Vec<Point>;
pub type Voxel = (i64, i64);

/// A synthetic brain-slice scene: anatomy polygons in pixel coordinates,
/// activation voxels and a BOLD-like time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub width: i64,
    pub height: i64,
    pub brain: Polygon,
    pub gray: Vec<Polygon>,
    pub white: Vec<Polygon>,
    pub vascular: Vec<Polygon>,
    pub activation: Vec<Voxel>,
    pub bold: Vec<f64>,
}

/// On-disk scene: identical to [`Scene`] except `bold` may reference a
/// one-column CSV file (path resolved relative to the scene file).
#[derive(Debug, Deserialize)]
struct SceneFile {
    width: i64,
    height: i64,
    brain: Polygon,
    gray: Vec<Polygon>,
    white: Vec<Polygon>,
    vascular: Vec<Polygon>,
    activation: Vec<Voxel>,
    bold: BoldField,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum BoldField {
    Values(Vec<f64>),
    CsvPath(String),
}

impl Scene {
    pub fn load<P: AsRef<Path>>(path: P) -> Result<Scene> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let file: SceneFile = serde_json::from_str(&text).map_err(|e| Error::Format {
            row: 0,
            message: format!("scene file: {e}"),
        })?;
        let bold = match file.bold {
            BoldField::Values(v) => v,
            BoldField::CsvPath(rel) => {
                let csv_path = path.parent().unwrap_or(Path::new(".")).join(&rel);
                let text = std::fs::read_to_string(&csv_path).map_err(|source| Error::Io {
                    path: csv_path.display().to_string(),
                    source,
                })?;
                let mut values = Vec::new();
                for (i, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() {
                        continue;
                    }
                    values.push(line.parse::<f64>().map_err(|_| Error::Format {
                        row: i + 1,
                        message: format!("non-numeric BOLD sample {line:?}"),
                    })?);
                }
                values
            }
        };
        let scene = Scene {
            width: file.width,
            height: file.height,
            brain: file.brain,
            gray: file.gray,
            white: file.white,
            vascular: file.vascular,
            activation: file.activation,
            bold,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Validation(format!("serialize scene: {e}")))?;
        crate::write_atomic(path.as_ref(), text.as_bytes())
    }

    pub fn validate(&self) -> Result<()> {
        if self.width <= 0 || self.height <= 0 {
            return Err(Error::Validation("scene grid must be positive".into()));
        }
        for (name, polys) in [
            ("brain", std::slice::from_ref(&self.brain)),
            ("gray", self.gray.as_slice()),
            ("white", self.white.as_slice()),
            ("vascular", self.vascular.as_slice()),
        ] {
            for p in polys {
                if p.len() < 3 {
                    return Err(Error::Validation(format!(
                        "{name} polygon has fewer than 3 vertices"
                    )));
                }
                if !polygon_is_simple(p) {
                    return Err(Error::Validation(format!(
                        "{name} polygon is self-intersecting"
                    )));
                }
            }
        }
        let (vw, vh) = (self.width / VOXEL_PIXELS, self.height / VOXEL_PIXELS);
        for &(x, y) in &self.activation {
            if x < 0 || y < 0 || x >= vw || y >= vh {
                return Err(Error::Validation(format!(
                    "voxel ({x},{y}) outside the {vw}x{vh} voxel grid"
                )));
            }
        }
        if self.bold.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite BOLD sample".into()));
        }
        Ok(())
    }
}

fn segments_properly_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let orient = |p: Point, q: Point, r: Point| -> f64 {
        (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
    };
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// True when no two non-adjacent edges properly intersect.
pub fn polygon_is_simple(poly: &[Point]) -> bool {
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        for j in i + 1..n {
            // skip adjacent edges (shared vertex)
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let (c, d) = (poly[j], poly[(j + 1) % n]);
            if segments_properly_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// Signed winding count of `polygon` around `point`; nonzero means inside for
/// simple polygons.
pub fn winding_number(point: Point, polygon: &[Point]) -> Result<i64> {
    if polygon.len() < 3 {
        return Err(Error::Validation(
            "winding number needs a polygon with at least 3 vertices".into(),
        ));
    }
    let is_left = |a: Point, b: Point, p: Point| -> f64 {
        (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])
    };
    let mut wn = 0i64;
    let n = polygon.len();
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        if a[1] <= point[1] {
            if b[1] > point[1] && is_left(a, b, point) > 0.0 {
                wn += 1;
            }
        } else if b[1] <= point[1] && is_left(a, b, point) < 0.0 {
            wn -= 1;
        }
    }
    Ok(wn)
}

fn point_in_any(point: Point, polygons: &[Polygon]) -> bool {
    polygons
        .iter()
        .any(|p| winding_number(point, p).map(|w| w != 0).unwrap_or(false))
}

/// Pixel-center of the central pixel of a voxel's 3x3 block.
pub fn voxel_center(v: Voxel) -> Point {
    [
        (v.0 * VOXEL_PIXELS + 1) as f64 + 0.5,
        (v.1 * VOXEL_PIXELS + 1) as f64 + 0.5,
    ]
}

// ---------------------------------------------------------------------------
// Brain contour extraction
// ---------------------------------------------------------------------------

/// Sobel gradient magnitude, Otsu threshold, Moore-neighbor boundary trace.
pub fn extract_brain_contour(image: &[Vec<f64>]) -> Result<Polygon> {
    let h = image.len();
    let w = image.first().map(|r| r.len()).unwrap_or(0);
    if h < 3 || w < 3 {
        return Err(Error::Validation("image too small for contour".into()));
    }
    let mut mag = vec![vec![0.0f64; w]; h];
    let mut max_mag = 0.0f64;
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let gx = -image[y - 1][x - 1] + image[y - 1][x + 1]
                - 2.0 * image[y][x - 1]
                + 2.0 * image[y][x + 1]
                - image[y + 1][x - 1]
                + image[y + 1][x + 1];
            let gy = -image[y - 1][x - 1] - 2.0 * image[y - 1][x] - image[y - 1][x + 1]
                + image[y + 1][x - 1]
                + 2.0 * image[y + 1][x]
                + image[y + 1][x + 1];
            let m = (gx * gx + gy * gy).sqrt();
            mag[y][x] = m;
            max_mag = max_mag.max(m);
        }
    }
    // flat images leave O(eps) summation residue in the Sobel responses;
    // clamp anything below the worst-case rounding error of the 8-term sum
    let peak = image
        .iter()
        .flatten()
        .fold(0.0f64, |acc, &v| acc.max(v.abs()));
    let noise_floor = 64.0 * f64::EPSILON * peak.max(1.0);
    if max_mag <= noise_floor {
        return Err(Error::Undefined(
            "empty contour: zero gradient everywhere".into(),
        ));
    }
    let threshold = otsu_threshold(&mag, max_mag);
    let mask: Vec<Vec<bool>> = mag
        .iter()
        .map(|row| row.iter().map(|&m| m > threshold).collect())
        .collect();
    if !mask.iter().any(|r| r.iter().any(|&b| b)) {
        return Err(Error::Undefined("empty contour: no edge pixels".into()));
    }
    let contour = moore_trace(&mask);
    if contour.len() < 3 {
        return Err(Error::Undefined(
            "empty contour: boundary degenerate".into(),
        ));
    }
    Ok(contour
        .into_iter()
        .map(|(x, y)| [x as f64, y as f64])
        .collect())
}

fn otsu_threshold(mag: &[Vec<f64>], max_mag: f64) -> f64 {
    const BINS: usize = 256;
    let mut hist = [0usize; BINS];
    let mut total = 0usize;
    for row in mag {
        for &m in row {
            let b = ((m / max_mag) * (BINS - 1) as f64) as usize;
            hist[b.min(BINS - 1)] += 1;
            total += 1;
        }
    }
    let sum_all: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, &c)| i as f64 * c as f64)
        .sum();
    let mut best_between = -1.0f64;
    let mut best_bin = 0usize;
    let mut w0 = 0.0f64;
    let mut sum0 = 0.0f64;
    for (i, &c) in hist.iter().enumerate() {
        w0 += c as f64;
        if w0 == 0.0 {
            continue;
        }
        let w1 = total as f64 - w0;
        if w1 == 0.0 {
            break;
        }
        sum0 += i as f64 * c as f64;
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if between > best_between {
            best_between = between;
            best_bin = i;
        }
    }
    best_bin as f64 / (BINS - 1) as f64 * max_mag
}

/// Moore-neighbor tracing of the outer boundary of the first foreground blob.
fn moore_trace(mask: &[Vec<bool>]) -> Vec<(i64, i64)> {
    let h = mask.len() as i64;
    let w = mask[0].len() as i64;
    let at = |x: i64, y: i64| -> bool {
        x >= 0 && y >= 0 && x < w && y < h && mask[y as usize][x as usize]
    };
    // clockwise Moore neighborhood starting west (y grows downward)
    const NBR: [(i64, i64); 8] = [
        (-1, 0),
        (-1, -1),
        (0, -1),
        (1, -1),
        (1, 0),
        (1, 1),
        (0, 1),
        (-1, 1),
    ];
    let mut start = None;
    'scan: for y in 0..h {
        for x in 0..w {
            if at(x, y) {
                start = Some((x, y));
                break 'scan;
            }
        }
    }
    let Some(start) = start else {
        return Vec::new();
    };
    let mut contour = vec![start];
    let mut current = start;
    // backtrack is west of start, background by scan order
    let mut backtrack = (start.0 - 1, start.1);
    let initial = (current, backtrack);
    let cap = (w * h * 4) as usize;
    for _ in 0..cap {
        let from = (backtrack.0 - current.0, backtrack.1 - current.1);
        let from_idx = NBR.iter().position(|&d| d == from).unwrap_or(0);
        let mut next = None;
        let mut prev_checked = backtrack;
        for step in 1..=8 {
            let d = NBR[(from_idx + step) % 8];
            let cand = (current.0 + d.0, current.1 + d.1);
            if at(cand.0, cand.1) {
                next = Some((cand, prev_checked));
                break;
            }
            prev_checked = cand;
        }
        let Some((next, new_backtrack)) = next else {
            break; // isolated pixel
        };
        current = next;
        backtrack = new_backtrack;
        if (current, backtrack) == initial {
            break;
        }
        contour.push(current);
    }
    // drop the duplicated closing vertex when present
    if contour.len() > 1 && contour.first() == contour.last() {
        contour.pop();
    }
    contour
}

// ---------------------------------------------------------------------------
// Activation clustering
// ---------------------------------------------------------------------------

/// A connected activation cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub voxels: Vec<Voxel>,
}

fn chebyshev(a: Voxel, b: Voxel) -> i64 {
    (a.0 - b.0).abs().max((a.1 - b.1).abs())
}

/// DBSCAN over voxels with Chebyshev distance <= `eps` (8-neighborhood at
/// eps = 1). A point is core when its neighborhood including itself holds at
/// least `min_pts` points. Clusters smaller than `min_size` are discarded.
/// Clusters are returned in order of their first voxel's input index.
pub fn cluster_activation(
    voxels: &[Voxel],
    eps: i64,
    min_pts: usize,
    min_size: usize,
) -> Vec<Cluster> {
    // dedupe, preserving first-occurrence order
    let mut points: Vec<Voxel> = Vec::with_capacity(voxels.len());
    for &v in voxels {
        if !points.contains(&v) {
            points.push(v);
        }
    }
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| chebyshev(points[i], points[j]) <= eps)
                .collect()
        })
        .collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_pts).collect();

    let mut assignment: Vec<Option<usize>> = vec![None; n];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for seed in 0..n {
        if assignment[seed].is_some() || !core[seed] {
            continue;
        }
        let cid = clusters.len();
        let mut members = Vec::new();
        let mut queue = std::collections::VecDeque::new();
        assignment[seed] = Some(cid);
        queue.push_back(seed);
        while let Some(i) = queue.pop_front() {
            members.push(i);
            if !core[i] {
                continue; // border points do not expand
            }
            for &j in &neighbors[i] {
                if assignment[j].is_none() {
                    assignment[j] = Some(cid);
                    queue.push_back(j);
                }
            }
        }
        members.sort_unstable();
        clusters.push(members);
    }
    clusters.sort_by_key(|m| m[0]);
    clusters
        .into_iter()
        .filter(|m| m.len() >= min_size)
        .map(|m| Cluster {
            voxels: m.into_iter().map(|i| points[i]).collect(),
        })
        .collect()
}

/// Fraction of cluster voxel centers inside any polygon of `region`.
pub fn region_fraction(cluster: &Cluster, region: &[Polygon]) -> f64 {
    if cluster.voxels.is_empty() {
        return 0.0;
    }
    let inside = cluster
        .voxels
        .iter()
        .filter(|&&v| point_in_any(voxel_center(v), region))
        .count();
    inside as f64 / cluster.voxels.len() as f64
}

// ---------------------------------------------------------------------------
// Sparsity measures
// ---------------------------------------------------------------------------

/// Gini index of a nonnegative vector: 0 for constant input, (n-1)/n for a
/// one-hot vector. Invariant under permutation and positive scaling.
pub fn gini_index(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Undefined("gini of an empty vector".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let sum: f64 = sorted.iter().sum();
    if sum <= 0.0 {
        return Err(Error::Undefined("gini undefined for all-zero input".into()));
    }
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(k, a)| (2.0 * (k as f64 + 1.0) - n - 1.0) * a)
        .sum();
    Ok(weighted / (n * sum))
}

fn dft_magnitudes(signal: &[f64]) -> Vec<f64> {
    let n = signal.len();
    // bins 1..N/2, DC excluded
    (1..=n / 2)
        .map(|k| {
            let mut re = 0.0;
            let mut im = 0.0;
            for (t, &v) in signal.iter().enumerate() {
                let phase = -2.0 * std::f64::consts::PI * k as f64 * t as f64 / n as f64;
                re += v * phase.cos();
                im += v * phase.sin();
            }
            (re * re + im * im).sqrt()
        })
        .collect()
}

/// Gini of the DFT magnitude spectrum (DC excluded).
pub fn sine_sparsity(signal: &[f64]) -> Result<f64> {
    if signal.len() < 16 {
        return Err(Error::Validation(
            "sine sparsity needs at least 16 samples".into(),
        ));
    }
    gini_index(&dft_magnitudes(signal))
}

/// Full multilevel Haar detail coefficients (orthonormal), zero-padding to the
/// next power of two.
pub fn haar_details(signal: &[f64]) -> Vec<f64> {
    let mut n = 16usize;
    while n < signal.len() {
        n *= 2;
    }
    let mut approx: Vec<f64> = signal.to_vec();
    approx.resize(n, 0.0);
    let mut details = Vec::new();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    while approx.len() > 1 {
        let half = approx.len() / 2;
        let mut next = Vec::with_capacity(half);
        for i in 0..half {
            let a = approx[2 * i];
            let b = approx[2 * i + 1];
            next.push((a + b) * s);
            details.push((a - b) * s);
        }
        approx = next;
    }
    details
}

/// Gini of absolute Haar detail coefficients; the transient-adapted-basis
/// sparsity stand-in. Errors on signals whose details are all zero.
pub fn wavelet_sparsity(signal: &[f64]) -> Result<f64> {
    if signal.len() < 16 {
        return Err(Error::Validation(
            "wavelet sparsity needs at least 16 samples".into(),
        ));
    }
    let details: Vec<f64> = haar_details(signal).iter().map(|d| d.abs()).collect();
    gini_index(&details).map_err(|_| Error::Undefined("not sparse-assessable".into()))
}

// ---------------------------------------------------------------------------
// Propositions
// ---------------------------------------------------------------------------

/// Decision thresholds for the atomic propositions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// "Primarily in gray matter": gray fraction at least this.
    pub gray: f64,
    /// White-matter overlap floor.
    pub white: f64,
    /// Vascular overlap floor.
    pub vascular: f64,
    /// Sine-domain Gini threshold.
    pub sine: f64,
    /// Wavelet-domain Gini threshold.
    pub wavelet: f64,
    /// Clusters below this voxel count are disregarded as weak.
    pub min_cluster_size: usize,
    pub dbscan_eps: i64,
    pub dbscan_min_pts: usize,
}

impl Default for Thresholds {
    fn default() -> Thresholds {
        Thresholds {
            gray: 0.5,
            white: 0.1,
            vascular: 0.1,
            sine: 0.6,
            wavelet: 0.6,
            min_cluster_size: 135,
            dbscan_eps: 1,
            dbscan_min_pts: 2,
        }
    }
}

/// Boolean proposition valuations plus the continuous features behind them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropositionVector {
    pub p1: bool,
    pub ps: bool,
    pub pa: bool,
    pub pg: bool,
    pub pw: bool,
    pub pv: bool,
    pub cluster_count: usize,
    pub gray_fraction: f64,
    pub white_fraction: f64,
    pub vascular_fraction: f64,
    pub gini_sine: f64,
    pub gini_wavelet: f64,
}

impl PropositionVector {
    /// 0/1 boolean encoding followed by the raw continuous features.
    pub fn features(&self, boolean_only: bool) -> Vec<f64> {
        let b = |v: bool| if v { 1.0 } else { 0.0 };
        let mut f = vec![
            b(self.p1),
            b(self.ps),
            b(self.pa),
            b(self.pg),
            b(self.pw),
            b(self.pv),
        ];
        if !boolean_only {
            f.extend([
                self.cluster_count as f64,
                self.gray_fraction,
                self.white_fraction,
                self.vascular_fraction,
                self.gini_sine,
                self.gini_wavelet,
            ]);
        }
        f
    }
}

/// Evaluates the six atomic propositions on a scene.
pub fn evaluate_propositions(scene: &Scene, th: &Thresholds) -> Result<PropositionVector> {
    scene.validate()?;
    let clusters = cluster_activation(
        &scene.activation,
        th.dbscan_eps,
        th.dbscan_min_pts,
        th.min_cluster_size,
    );
    let cluster_count = clusters.len();

    let p1 = cluster_count == 1
        && clusters[0]
            .voxels
            .iter()
            .all(|&v| {
                winding_number(voxel_center(v), &scene.brain)
                    .map(|w| w != 0)
                    .unwrap_or(false)
            });

    let union = Cluster {
        voxels: clusters.iter().flat_map(|c| c.voxels.clone()).collect(),
    };
    let (gray_fraction, white_fraction, vascular_fraction) = if union.voxels.is_empty() {
        (0.0, 0.0, 0.0)
    } else {
        (
            region_fraction(&union, &scene.gray),
            region_fraction(&union, &scene.white),
            region_fraction(&union, &scene.vascular),
        )
    };

    // a scene without activation cannot satisfy the signal propositions
    let (gini_sine, gini_wavelet, ps, pa) = if scene.activation.is_empty() {
        (0.0, 0.0, false, false)
    } else {
        let gs = sine_sparsity(&scene.bold).unwrap_or(0.0);
        let gw = wavelet_sparsity(&scene.bold).unwrap_or(0.0);
        (gs, gw, gs >= th.sine, gw >= th.wavelet)
    };

    Ok(PropositionVector {
        p1,
        ps,
        pa,
        pg: gray_fraction >= th.gray,
        pw: white_fraction >= th.white,
        pv: vascular_fraction >= th.vascular,
        cluster_count,
        gray_fraction,
        white_fraction,
        vascular_fraction,
        gini_sine,
        gini_wavelet,
    })
}

/// The SOZ expert-knowledge formula:
/// p1 AND NOT ps AND pa AND (pg AND (NOT pw OR (pw AND pv))).
pub fn kappa_soz(pv: &PropositionVector) -> bool {
    pv.p1 && !pv.ps && pv.pa && (pv.pg && (!pv.pw || (pv.pw && pv.pv)))
}

/// The six atomic propositions, for ablation bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Proposition {
    P1,
    Ps,
    Pa,
    Pg,
    Pw,
    Pv,
}

impl Proposition {
    pub const ALL: [Proposition; 6] = [
        Proposition::P1,
        Proposition::Ps,
        Proposition::Pa,
        Proposition::Pg,
        Proposition::Pw,
        Proposition::Pv,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Proposition::P1 => "p1",
            Proposition::Ps => "ps",
            Proposition::Pa => "pa",
            Proposition::Pg => "pg",
            Proposition::Pw => "pw",
            Proposition::Pv => "pv",
        }
    }
}

/// The formula with one proposition's constraint removed: the dropped literal
/// is substituted with the value that makes its local clause vacuous.
pub fn kappa_soz_without(pv: &PropositionVector, drop: Proposition) -> bool {
    let mut pv = pv.clone();
    match drop {
        Proposition::P1 => pv.p1 = true,
        Proposition::Ps => pv.ps = false,
        Proposition::Pa => pv.pa = true,
        Proposition::Pg => pv.pg = true,
        Proposition::Pw => pv.pw = false,
        Proposition::Pv => pv.pv = true,
    }
    kappa_soz(&pv)
}

/// Trains the SVM-based expert knowledge extractor over proposition features.
///
/// Labels: `true` maps to super RARE, `false` to NONRARE.
pub fn train_eke(
    scenes: &[(Scene, bool)],
    thresholds: &Thresholds,
    cfg: &TrainConfig,
    boolean_only: bool,
) -> Result<Machine> {
    if scenes.is_empty() {
        return Err(Error::Training("no scenes to train the EKE on".into()));
    }
    let dim = if boolean_only { 6 } else { 12 };
    let observations: Vec<Observation> = scenes
        .iter()
        .enumerate()
        .map(|(i, (scene, rare))| {
            let pv = evaluate_propositions(scene, thresholds)?;
            Ok(Observation {
                id: format!("scene{i}"),
                domain_id: "eke".into(),
                label: Some(if *rare { "RARE".into() } else { "NONRARE".into() }),
                features: pv.features(boolean_only),
            })
        })
        .collect::<Result<_>>()?;
    let mut ds = Dataset::from_observations(observations, dim)?;
    // fixed super order regardless of scene order
    ds.classes = vec!["RARE".into(), "NONRARE".into()];
    if ds.observations.iter().all(|o| o.label.as_deref() == Some("RARE"))
        || ds
            .observations
            .iter()
            .all(|o| o.label.as_deref() == Some("NONRARE"))
    {
        return Err(Error::Training(
            "EKE training needs both rare and non-rare examples".into(),
        ));
    }
    machines::train(MachineKind::SvmLinear, &ds, cfg)
}
