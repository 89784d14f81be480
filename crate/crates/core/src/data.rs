//! Observation/dataset types, embeddings CSV ingestion, partitioning.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single embedded observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub id: String,
    pub domain_id: String,
    /// `None` marks an unlabeled (test-only) observation.
    pub label: Option<String>,
    pub features: Vec<f64>,
}

/// A collection of observations sharing a class set and feature dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub observations: Vec<Observation>,
    /// Class names in order of first appearance; downstream iteration order.
    pub classes: Vec<String>,
    pub dim: usize,
}

/// A named union of whole classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperLabel {
    pub name: String,
    pub members: Vec<String>,
}

impl Dataset {
    /// Builds a dataset, inferring the class set from label first-appearance order.
    pub fn from_observations(observations: Vec<Observation>, dim: usize) -> Result<Dataset> {
        if observations.is_empty() {
            return Err(Error::Validation("dataset has no observations".into()));
        }
        let mut classes = Vec::new();
        for obs in &observations {
            if obs.features.len() != dim {
                return Err(Error::Validation(format!(
                    "observation {} has {} features, expected {}",
                    obs.id,
                    obs.features.len(),
                    dim
                )));
            }
            if obs.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "observation {} has non-finite features",
                    obs.id
                )));
            }
            if let Some(label) = &obs.label {
                if !classes.contains(label) {
                    classes.push(label.clone());
                }
            }
        }
        Ok(Dataset {
            observations,
            classes,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Indices of observations labeled with class `c`.
    pub fn class_indices(&self, c: &str) -> Vec<usize> {
        self.observations
            .iter()
            .enumerate()
            .filter(|(_, o)| o.label.as_deref() == Some(c))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Loads the embeddings CSV: header `id,domain,class,f0,...,f{d-1}`.
///
/// Unlabeled rows (empty class field) are rejected unless `allow_unlabeled`.
/// With `normalize`, each feature vector is L2-normalized on ingestion
/// (zero vectors are left untouched).
pub fn load_embeddings<P: AsRef<Path>>(
    path: P,
    allow_unlabeled: bool,
    normalize: bool,
) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut lines = std::io::BufReader::new(file).lines();

    let header = match lines.next() {
        Some(Ok(line)) => line,
        Some(Err(source)) => {
            return Err(Error::Io {
                path: path.display().to_string(),
                source,
            })
        }
        None => {
            return Err(Error::Format {
                row: 1,
                message: "empty file, expected header".into(),
            })
        }
    };
    let cols: Vec<&str> = header.trim_end_matches(['\r', '\n']).split(',').collect();
    if cols.len() < 4 || cols[0] != "id" || cols[1] != "domain" || cols[2] != "class" {
        return Err(Error::Format {
            row: 1,
            message: format!(
                "expected header id,domain,class,f0,... got {:?}",
                header.trim()
            ),
        });
    }
    for (i, c) in cols[3..].iter().enumerate() {
        let expected = format!("f{i}");
        if *c != expected {
            return Err(Error::Format {
                row: 1,
                message: format!("expected feature column {expected}, got {c}"),
            });
        }
    }
    let dim = cols.len() - 3;

    let mut seen_ids = HashSet::new();
    let mut observations = Vec::new();
    for (n, line) in lines.enumerate() {
        let row = n + 2; // 1-based, header is row 1
        let line = line.map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 3 {
            return Err(Error::Format {
                row,
                message: format!("expected {} columns, found {}", dim + 3, fields.len()),
            });
        }
        let id = fields[0].to_string();
        if !seen_ids.insert(id.clone()) {
            return Err(Error::Validation(format!("duplicate id \"{id}\"")));
        }
        let label = if fields[2].is_empty() {
            if !allow_unlabeled {
                return Err(Error::Validation(format!(
                    "unlabeled observation \"{id}\" at row {row}; unlabeled rows are only allowed in test sets"
                )));
            }
            None
        } else {
            Some(fields[2].to_string())
        };
        let mut features = Vec::with_capacity(dim);
        for f in &fields[3..] {
            let v: f64 = f.parse().map_err(|_| Error::Format {
                row,
                message: format!("non-numeric feature value {f:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Format {
                    row,
                    message: format!("non-finite feature value {f:?}"),
                });
            }
            features.push(v);
        }
        if normalize {
            let norm = features.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for v in &mut features {
                    *v /= norm;
                }
            }
        }
        observations.push(Observation {
            id,
            domain_id: fields[1].to_string(),
            label,
            features,
        });
    }
    Dataset::from_observations(observations, dim)
}

/// Writes a dataset back to the embeddings CSV format.
pub fn save_embeddings<P: AsRef<Path>>(ds: &Dataset, path: P) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    let io_err = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let mut header = String::from("id,domain,class");
    for i in 0..ds.dim {
        header.push_str(&format!(",f{i}"));
    }
    writeln!(w, "{header}").map_err(io_err)?;
    for obs in &ds.observations {
        let mut line = format!(
            "{},{},{}",
            obs.id,
            obs.domain_id,
            obs.label.as_deref().unwrap_or("")
        );
        for v in &obs.features {
            line.push(',');
            line.push_str(&v.to_string());
        }
        writeln!(w, "{line}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Partitions a dataset by domain id. The class set is copied to each part.
pub fn split_by_domain(ds: &Dataset) -> BTreeMap<String, Dataset> {
    let mut parts: BTreeMap<String, Vec<Observation>> = BTreeMap::new();
    for obs in &ds.observations {
        parts
            .entry(obs.domain_id.clone())
            .or_default()
            .push(obs.clone());
    }
    parts
        .into_iter()
        .map(|(domain, observations)| {
            (
                domain,
                Dataset {
                    observations,
                    classes: ds.classes.clone(),
                    dim: ds.dim,
                },
            )
        })
        .collect()
}

/// Replaces every observation's label with the unique super-label containing it.
///
/// `supers` must pass [`crate::machines::validate_label_set`] against `ds.classes`.
pub fn relabel(ds: &Dataset, supers: &[SuperLabel]) -> Result<Dataset> {
    crate::machines::validate_label_set(supers, &ds.classes)
        .map_err(|v| Error::Validation(v.to_string()))?;
    let mut class_to_super: HashMap<&str, &str> = HashMap::new();
    for s in supers {
        for m in &s.members {
            class_to_super.insert(m.as_str(), s.name.as_str());
        }
    }
    let observations = ds
        .observations
        .iter()
        .map(|obs| {
            let label = obs
                .label
                .as_deref()
                .map(|c| class_to_super[c].to_string());
            Observation {
                id: obs.id.clone(),
                domain_id: obs.domain_id.clone(),
                label,
                features: obs.features.clone(),
            }
        })
        .collect();
    Ok(Dataset {
        observations,
        classes: supers.iter().map(|s| s.name.clone()).collect(),
        dim: ds.dim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_three_row_file() {
        let f = write_temp(
            "id,domain,class,f0,f1\na,A,Noise,0.5,1.0\nb,A,RSN,1.5,-2.0\nc,B,Noise,0.25,3.0\n",
        );
        let ds = load_embeddings(f.path(), false, false).unwrap();
        assert_eq!(ds.dim, 2);
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.classes, vec!["Noise", "RSN"]);
    }

    #[test]
    fn wrong_column_count_cites_row() {
        let f = write_temp("id,domain,class,f0,f1\na,A,Noise,0.5,1.0,9.0\n");
        match load_embeddings(f.path(), false, false) {
            Err(Error::Format { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_id_names_offender() {
        let f = write_temp("id,domain,class,f0\na,A,X,1\na,A,X,2\n");
        match load_embeddings(f.path(), false, false) {
            Err(Error::Validation(msg)) => assert!(msg.contains("\"a\""), "{msg}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_feature_is_format_error() {
        let f = write_temp("id,domain,class,f0\na,A,X,abc\n");
        assert!(matches!(
            load_embeddings(f.path(), false, false),
            Err(Error::Format { row: 2, .. })
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_embeddings("/nonexistent/emb.csv", false, false),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn unlabeled_rejected_in_training_mode() {
        let f = write_temp("id,domain,class,f0\na,A,,1\n");
        assert!(load_embeddings(f.path(), false, false).is_err());
        let f = write_temp("id,domain,class,f0\na,A,,1\nb,A,X,2\n");
        let ds = load_embeddings(f.path(), true, false).unwrap();
        assert_eq!(ds.observations[0].label, None);
    }

    #[test]
    fn round_trip_is_identity() {
        let f = write_temp(
            "id,domain,class,f0,f1\na,A,Noise,0.5,1.0\nb,A,RSN,1.5,-2.0\nc,B,Noise,0.25,3.0\n",
        );
        let ds = load_embeddings(f.path(), false, false).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        save_embeddings(&ds, out.path()).unwrap();
        let ds2 = load_embeddings(out.path(), false, false).unwrap();
        assert_eq!(ds, ds2);
    }

    #[test]
    fn split_by_domain_partitions() {
        let f =
            write_temp("id,domain,class,f0\na,A,X,1\nb,A,X,2\nc,B,Y,3\n");
        let ds = load_embeddings(f.path(), false, false).unwrap();
        let parts = split_by_domain(&ds);
        assert_eq!(parts.len(), 2);
        assert_eq!(parts["A"].len(), 2);
        assert_eq!(parts["B"].len(), 1);
        assert_eq!(parts["B"].classes, ds.classes);
        let total: usize = parts.values().map(|d| d.len()).sum();
        assert_eq!(total, ds.len());
    }

    #[test]
    fn empty_domain_id_is_a_key() {
        let f = write_temp("id,domain,class,f0\na,,X,1\nb,A,X,2\n");
        let ds = load_embeddings(f.path(), false, false).unwrap();
        let parts = split_by_domain(&ds);
        assert!(parts.contains_key(""));
    }

    #[test]
    fn relabel_to_binary() {
        let f = write_temp(
            "id,domain,class,f0\na,A,Noise,1\nb,A,RSN,2\nc,A,SOZ,3\n",
        );
        let ds = load_embeddings(f.path(), false, false).unwrap();
        let supers = vec![
            SuperLabel {
                name: "NOISE".into(),
                members: vec!["Noise".into()],
            },
            SuperLabel {
                name: "NOTNOISE".into(),
                members: vec!["RSN".into(), "SOZ".into()],
            },
        ];
        let rl = relabel(&ds, &supers).unwrap();
        assert_eq!(rl.classes, vec!["NOISE", "NOTNOISE"]);
        assert_eq!(rl.observations[0].label.as_deref(), Some("NOISE"));
        assert_eq!(rl.observations[2].label.as_deref(), Some("NOTNOISE"));
        // features untouched
        assert_eq!(rl.observations[1].features, ds.observations[1].features);
        assert_eq!(rl.len(), ds.len());
    }

    #[test]
    fn relabel_missing_class_fails() {
        let f = write_temp(
            "id,domain,class,f0\na,A,Noise,1\nb,A,RSN,2\nc,A,SOZ,3\n",
        );
        let ds = load_embeddings(f.path(), false, false).unwrap();
        let supers = vec![SuperLabel {
            name: "X".into(),
            members: vec!["Noise".into()],
        }];
        assert!(relabel(&ds, &supers).is_err());
    }

    #[test]
    fn identity_supers_rename_only() {
        let f = write_temp("id,domain,class,f0\na,A,X,1\nb,A,Y,2\n");
        let ds = load_embeddings(f.path(), false, false).unwrap();
        let supers: Vec<SuperLabel> = ds
            .classes
            .iter()
            .map(|c| SuperLabel {
                name: c.clone(),
                members: vec![c.clone()],
            })
            .collect();
        let rl = relabel(&ds, &supers).unwrap();
        assert_eq!(rl, ds);
    }
}
