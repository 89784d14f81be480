//! Rare-class single-domain-generalization toolkit.
//!
//! The crate covers the full pipeline: entropy-based rarity quantification
//! over embedded observations ([`rarity`]), shallow classifier machines with
//! entropy-minimizing orchestration ([`machines`]), an expert-knowledge
//! machine built from image/signal propositions ([`knowledge`]), the staged
//! train/predict pipeline with its knowledge-override fusion rule
//! ([`pipeline`]), evaluation harnesses ([`metrics`]), and deterministic
//! synthetic data generators ([`synthgen`]).

pub mod data;
pub mod error;
pub mod knowledge;
pub mod machines;
pub mod metrics;
pub mod pipeline;
pub mod rarity;
pub mod rng;
pub mod synthgen;

pub use data::{Dataset, Observation, SuperLabel};
pub use error::{Error, Result};
pub use machines::{FeatureMap, Machine, MachineKind, Prediction, TrainConfig};
pub use metrics::{AcrossTrial, AggregatedTrial, ConfusionMatrix, EvalReport, RocPoint};
pub use pipeline::{FuseOutcome, PipelineConfig, StagePlan, StagedModel};
pub use rarity::{EntropyProfile, Metric, RarityVerdict};
pub use rng::XorShift64;

use std::path::Path;

/// Writes `bytes` to `path` via a sibling temp file + rename so readers never
/// observe a half-written artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(d) => tempfile::NamedTempFile::new_in(d),
        None => tempfile::NamedTempFile::new_in("."),
    }
    .map_err(io_err)?;
    use std::io::Write;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}
