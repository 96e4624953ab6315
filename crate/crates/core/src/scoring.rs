//! EXPoSE scores `η(y) = ⟨φ̂(y), w⟩`, threshold calibration and classification.
//!
//! A high score means `y` is similar to the training distribution. Points
//! scoring at or above the threshold `τ` are classified as normal.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::embedding::ModelState;
use crate::error::{check_dim, ExposeError, Result};
use crate::kernel::RksFeatureMap;
use crate::linalg::dot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Class {
    Normal,
    Anomaly,
}

impl Class {
    /// Integer code used for binary label columns: 1 normal, 0 anomaly.
    pub fn label(self) -> i64 {
        match self {
            Class::Normal => 1,
            Class::Anomaly => 0,
        }
    }

    pub fn from_label(label: i64) -> Result<Self> {
        match label {
            1 => Ok(Class::Normal),
            0 => Ok(Class::Anomaly),
            other => Err(ExposeError::input(format!(
                "binary label must be 1 (normal) or 0 (anomaly), got {other}"
            ))),
        }
    }

    pub fn from_is_normal(normal: bool) -> Self {
        if normal {
            Class::Normal
        } else {
            Class::Anomaly
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Class::Normal => "normal",
            Class::Anomaly => "anomaly",
        })
    }
}

/// Converts a binary-labelled dataset's labels into classes.
pub fn classes_of(data: &Dataset) -> Result<Vec<Class>> {
    data.labels()
        .ok_or_else(|| ExposeError::input(format!("dataset `{}` has no labels", data.name)))?
        .iter()
        .map(|&l| Class::from_label(l))
        .collect()
}

pub fn score(w: &ModelState, map: &RksFeatureMap, y: &[f64]) -> Result<f64> {
    w.check_compatible(&map.fingerprint())?;
    let f = map.embed(y)?;
    Ok(dot(f.as_slice(), w.weights()))
}

/// Scores every row of `ys`, preserving row order.
pub fn score_batch(w: &ModelState, map: &RksFeatureMap, ys: &Dataset) -> Result<Vec<f64>> {
    w.check_compatible(&map.fingerprint())?;
    check_dim(map.input_dim(), ys.dim())?;
    (0..ys.n())
        .into_par_iter()
        .map_init(
            || vec![0.0; map.feature_dim()],
            |buf, i| {
                map.embed_into(ys.row(i), buf)?;
                Ok(dot(buf, w.weights()))
            },
        )
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCalibration {
    pub tau: f64,
    /// Mean held-out fold accuracy at `tau`.
    pub validation_accuracy: f64,
    pub method: String,
}

pub const CALIBRATION_FOLDS: usize = 5;

/// Picks `τ` by 5-fold cross-validation over candidate thresholds.
///
/// Candidates are the smallest score (everything normal), the midpoints
/// between consecutive distinct scores, and the float just above the largest
/// score (everything anomalous). Row `i` belongs to fold `i mod 5`. The
/// candidate with the highest mean fold accuracy wins; ties go to the larger
/// `τ`. When every score is identical this reduces to predicting the
/// majority class.
pub fn calibrate_threshold(scores: &[f64], classes: &[Class]) -> Result<ThresholdCalibration> {
    check_dim(scores.len(), classes.len())?;
    if scores.is_empty() {
        return Err(ExposeError::input("cannot calibrate on an empty score set"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(ExposeError::Numeric("scores contain non-finite values".into()));
    }
    let normals = classes.iter().filter(|&&c| c == Class::Normal).count();
    if normals == 0 || normals == classes.len() {
        return Err(ExposeError::input("threshold calibration needs both normal and anomaly examples"));
    }

    let folds = CALIBRATION_FOLDS.min(scores.len());
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut fold_size = vec![0usize; folds];
    let mut correct = vec![0i64; folds];
    for (i, &c) in classes.iter().enumerate() {
        fold_size[i % folds] += 1;
        if c == Class::Normal {
            correct[i % folds] += 1;
        }
    }
    let mean_accuracy = |correct: &[i64]| {
        correct
            .iter()
            .zip(&fold_size)
            .map(|(&c, &s)| c as f64 / s as f64)
            .sum::<f64>()
            / folds as f64
    };

    // Candidate 0: everything normal.
    let mut best_tau = scores[order[0]];
    let mut best_acc = mean_accuracy(&correct);
    let mut pos = 0;
    while pos < order.len() {
        let value = scores[order[pos]];
        // Move the whole group of tied scores below the threshold.
        while pos < order.len() && scores[order[pos]] == value {
            let i = order[pos];
            correct[i % folds] += match classes[i] {
                Class::Anomaly => 1,
                Class::Normal => -1,
            };
            pos += 1;
        }
        let tau = match order.get(pos) {
            Some(&next) => {
                let mid = value + (scores[next] - value) / 2.0;
                if mid > value {
                    mid
                } else {
                    scores[next]
                }
            }
            None => value.next_up(),
        };
        let acc = mean_accuracy(&correct);
        if acc >= best_acc - 1e-12 {
            best_acc = acc.max(best_acc);
            best_tau = tau;
        }
    }
    Ok(ThresholdCalibration {
        tau: best_tau,
        validation_accuracy: best_acc,
        method: format!("{folds}-fold cross-validation over score midpoints"),
    })
}

/// Boundary inclusive: `s == τ` is normal.
pub fn classify(s: f64, cal: &ThresholdCalibration) -> Class {
    Class::from_is_normal(s >= cal.tau)
}

/// Fraction of misclassified points.
pub fn classification_error(scores: &[f64], classes: &[Class], cal: &ThresholdCalibration) -> Result<f64> {
    check_dim(scores.len(), classes.len())?;
    if scores.is_empty() {
        return Err(ExposeError::input("no scores to evaluate"));
    }
    let wrong = scores
        .iter()
        .zip(classes)
        .filter(|(&s, &c)| classify(s, cal) != c)
        .count();
    Ok(wrong as f64 / scores.len() as f64)
}

/// Writes `index,score[,label][,prediction]`.
pub fn write_scores_csv(
    path: impl AsRef<Path>,
    scores: &[f64],
    labels: Option<&[i64]>,
    predictions: Option<&[Class]>,
) -> Result<()> {
    let path = path.as_ref();
    if let Some(l) = labels {
        check_dim(scores.len(), l.len())?;
    }
    if let Some(p) = predictions {
        check_dim(scores.len(), p.len())?;
    }
    let io_err = |e| ExposeError::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    let mut header = String::from("index,score");
    if labels.is_some() {
        header.push_str(",label");
    }
    if predictions.is_some() {
        header.push_str(",prediction");
    }
    writeln!(out, "{header}").map_err(io_err)?;
    for (i, s) in scores.iter().enumerate() {
        write!(out, "{i},{s}").map_err(io_err)?;
        if let Some(l) = labels {
            write!(out, ",{}", l[i]).map_err(io_err)?;
        }
        if let Some(p) = predictions {
            write!(out, ",{}", p[i]).map_err(io_err)?;
        }
        writeln!(out).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}
