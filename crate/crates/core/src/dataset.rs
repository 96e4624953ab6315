use serde::{Deserialize, Serialize};

use crate::error::{ExposeError, Result};

/// Row-major `n × d` sample matrix with optional integer labels.
///
/// Each row is one sample `x_i`; the empirical measure `P_n` puts mass `1/n`
/// on every row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<f64>,
    n: usize,
    d: usize,
    labels: Option<Vec<i64>>,
    pub name: String,
    pub provenance: String,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        d: usize,
        labels: Option<Vec<i64>>,
        name: impl Into<String>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        if d == 0 {
            return Err(ExposeError::input("dataset needs at least one feature column"));
        }
        if features.is_empty() {
            return Err(ExposeError::input("dataset is empty"));
        }
        if !features.len().is_multiple_of(d) {
            return Err(ExposeError::input(format!(
                "{} values do not form rows of width {d}",
                features.len()
            )));
        }
        let n = features.len() / d;
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(ExposeError::input(format!(
                "non-finite value in row {}, column {}",
                pos / d + 1,
                pos % d + 1
            )));
        }
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(ExposeError::input(format!(
                    "{} labels for {n} rows",
                    labels.len()
                )));
            }
        }
        Ok(Dataset {
            features,
            n,
            d,
            labels,
            name: name.into(),
            provenance: provenance.into(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Option<Vec<i64>>, name: impl Into<String>) -> Result<Self> {
        let d = rows.first().map(Vec::len).ok_or_else(|| ExposeError::input("dataset is empty"))?;
        if let Some(i) = rows.iter().position(|r| r.len() != d) {
            return Err(ExposeError::input(format!(
                "row {} has {} values, expected {d}",
                i + 1,
                rows[i].len()
            )));
        }
        Self::new(rows.concat(), d, labels, name, "in-memory")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.d)
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> Option<&[i64]> {
        self.labels.as_deref()
    }

    pub fn without_labels(mut self) -> Self {
        self.labels = None;
        self
    }

    /// New dataset made of the given rows, in the given order.
    pub fn select(&self, indices: &[usize], name: impl Into<String>) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            if i >= self.n {
                return Err(ExposeError::input(format!("row index {i} out of range for {} rows", self.n)));
            }
            features.extend_from_slice(self.row(i));
        }
        let labels = self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect());
        Self::new(features, self.d, labels, name, self.provenance.clone())
    }

    /// Stacks `other` below `self`. Labels survive only if both sides carry them.
    pub fn concat(&self, other: &Dataset) -> Result<Self> {
        crate::error::check_dim(self.d, other.d)?;
        let mut features = self.features.clone();
        features.extend_from_slice(&other.features);
        let labels = match (&self.labels, &other.labels) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        Self::new(
            features,
            self.d,
            labels,
            format!("{}+{}", self.name, other.name),
            format!("{}; {}", self.provenance, other.provenance),
        )
    }
}
