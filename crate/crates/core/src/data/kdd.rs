//! KDD-CUP 99 connection records.
//!
//! Each record has 41 feature columns followed by a label such as `normal.`
//! or `smurf.`. The 34 continuous columns are min-max rescaled and the 7
//! symbolic columns are one-hot encoded; both transforms are fit on one set of
//! records and can be replayed on another.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{ExposeError, Result};
use crate::scoring::Class;

pub const KDD_FEATURE_COLUMNS: usize = 41;

/// Zero-based positions of `protocol_type, service, flag, land, logged_in,
/// is_host_login, is_guest_login`.
pub const KDD_SYMBOLIC_COLUMNS: [usize; 7] = [1, 2, 3, 6, 11, 20, 21];

pub const KDD_CONTINUOUS_COUNT: usize = KDD_FEATURE_COLUMNS - KDD_SYMBOLIC_COLUMNS.len();

const SYMBOLIC_NAMES: [&str; 7] = [
    "protocol_type",
    "service",
    "flag",
    "land",
    "logged_in",
    "is_host_login",
    "is_guest_login",
];

#[derive(Debug, Clone, PartialEq)]
pub struct KddRecord {
    pub continuous: Vec<f64>,
    pub symbolic: Vec<String>,
    pub label: String,
}

impl KddRecord {
    /// Normal traffic is labelled `normal` (with or without the trailing dot).
    pub fn is_normal(&self) -> bool {
        self.label.trim_end_matches('.') == "normal"
    }
}

pub fn parse_kdd_line(line: &str, location: &str) -> Result<KddRecord> {
    let fields: Vec<&str> = line.trim().split(',').map(str::trim).collect();
    if fields.len() != KDD_FEATURE_COLUMNS + 1 {
        return Err(ExposeError::Parse {
            location: location.to_string(),
            message: format!("expected {} fields, found {}", KDD_FEATURE_COLUMNS + 1, fields.len()),
        });
    }
    let mut continuous = Vec::with_capacity(KDD_CONTINUOUS_COUNT);
    let mut symbolic = Vec::with_capacity(KDD_SYMBOLIC_COLUMNS.len());
    for (j, field) in fields[..KDD_FEATURE_COLUMNS].iter().enumerate() {
        if KDD_SYMBOLIC_COLUMNS.contains(&j) {
            symbolic.push((*field).to_string());
        } else {
            let v: f64 = field.parse().map_err(|_| ExposeError::Parse {
                location: format!("{location}, column {}", j + 1),
                message: format!("non-numeric value `{field}`"),
            })?;
            if !v.is_finite() {
                return Err(ExposeError::Parse {
                    location: format!("{location}, column {}", j + 1),
                    message: format!("non-finite value `{field}`"),
                });
            }
            continuous.push(v);
        }
    }
    Ok(KddRecord {
        continuous,
        symbolic,
        label: fields[KDD_FEATURE_COLUMNS].to_string(),
    })
}

pub fn read_kdd<R: BufRead>(reader: R, source: &str) -> Result<Vec<KddRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| ExposeError::io(source, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_kdd_line(&line, &format!("{source}:{}", i + 1))?);
    }
    Ok(out)
}

pub fn load_kdd(path: impl AsRef<Path>) -> Result<Vec<KddRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| ExposeError::io(path, e))?;
    read_kdd(BufReader::new(file), &path.display().to_string())
}

/// Fitted min-max ranges and category vocabularies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KddPreprocessor {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
    /// Sorted category values per symbolic column.
    pub vocabularies: Vec<Vec<String>>,
}

impl KddPreprocessor {
    pub fn fit(records: &[KddRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(ExposeError::input("no KDD records to fit"));
        }
        let mut mins = vec![f64::INFINITY; KDD_CONTINUOUS_COUNT];
        let mut maxs = vec![f64::NEG_INFINITY; KDD_CONTINUOUS_COUNT];
        let mut vocab: Vec<BTreeSet<&str>> = vec![BTreeSet::new(); KDD_SYMBOLIC_COLUMNS.len()];
        for rec in records {
            for (j, &v) in rec.continuous.iter().enumerate() {
                mins[j] = mins[j].min(v);
                maxs[j] = maxs[j].max(v);
            }
            for (j, s) in rec.symbolic.iter().enumerate() {
                vocab[j].insert(s.as_str());
            }
        }
        Ok(KddPreprocessor {
            mins,
            maxs,
            vocabularies: vocab
                .into_iter()
                .map(|set| set.into_iter().map(str::to_string).collect())
                .collect(),
        })
    }

    pub fn output_dim(&self) -> usize {
        KDD_CONTINUOUS_COUNT + self.vocabularies.iter().map(Vec::len).sum::<usize>()
    }

    /// Encodes records; labels become `1` for normal traffic and `0` otherwise.
    ///
    /// Continuous values outside the fitted range are not clipped. A column that
    /// was constant during fitting maps to 0.
    pub fn transform(&self, records: &[KddRecord], name: &str) -> Result<Dataset> {
        let d = self.output_dim();
        let mut features = Vec::with_capacity(records.len() * d);
        let mut labels = Vec::with_capacity(records.len());
        for (i, rec) in records.iter().enumerate() {
            for (j, &v) in rec.continuous.iter().enumerate() {
                let span = self.maxs[j] - self.mins[j];
                features.push(if span > 0.0 { (v - self.mins[j]) / span } else { 0.0 });
            }
            for (j, value) in rec.symbolic.iter().enumerate() {
                let vocab = &self.vocabularies[j];
                let hot = vocab.binary_search(value).map_err(|_| {
                    ExposeError::input(format!(
                        "record {}: unknown {} category `{value}` (known: {})",
                        i + 1,
                        SYMBOLIC_NAMES[j],
                        vocab.join(", ")
                    ))
                })?;
                features.extend((0..vocab.len()).map(|k| if k == hot { 1.0 } else { 0.0 }));
            }
            labels.push(if rec.is_normal() { Class::Normal.label() } else { Class::Anomaly.label() });
        }
        Dataset::new(
            features,
            d,
            Some(labels),
            name,
            format!("kdd:{name}; 34 continuous min-max, 7 symbolic one-hot; label 1 = normal"),
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).map_err(|e| ExposeError::input(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| ExposeError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ExposeError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| ExposeError::Parse {
            location: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// Fits the transform on `records` and applies it.
pub fn preprocess_kdd(records: &[KddRecord], name: &str) -> Result<(Dataset, KddPreprocessor)> {
    let pre = KddPreprocessor::fit(records)?;
    let data = pre.transform(records, name)?;
    Ok((data, pre))
}
