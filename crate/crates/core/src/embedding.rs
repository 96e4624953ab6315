//! Kernel mean embeddings, the EXPoSE objective and model persistence.
//!
//! The objective is `f(w) = ½⟨w, w⟩ − ⟨μ, w⟩`, minimised at `w* = μ`. With the
//! empirical embedding `μ_n` as the surrogate for `μ[P]`, the suboptimality
//! gap is exactly `½‖w − μ_n‖²`.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::dataset::Dataset;
use crate::error::{check_dim, ExposeError, Result};
use crate::kernel::{KernelSpec, MapFingerprint, RksFeatureMap, GENERATOR_ID};
use crate::linalg::{dist_sq, dot};

/// An iterate `w_t` (or the empirical embedding `μ[P_n]`) bound to the feature map
/// it lives in.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    weights: Vec<f64>,
    iteration: u64,
    fingerprint: MapFingerprint,
}

impl ModelState {
    /// The starting point `w_1 = 0`.
    pub fn zero(map: &RksFeatureMap) -> Self {
        ModelState {
            weights: vec![0.0; map.feature_dim()],
            iteration: 1,
            fingerprint: map.fingerprint(),
        }
    }

    pub fn from_parts(weights: Vec<f64>, iteration: u64, fingerprint: MapFingerprint) -> Result<Self> {
        check_dim(2 * fingerprint.expansions, weights.len())?;
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(ExposeError::Numeric("model weights contain non-finite values".into()));
        }
        Ok(ModelState {
            weights,
            iteration,
            fingerprint,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn fingerprint(&self) -> MapFingerprint {
        self.fingerprint
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub(crate) fn set_iteration(&mut self, t: u64) {
        self.iteration = t;
    }

    pub fn check_compatible(&self, other: &MapFingerprint) -> Result<()> {
        if self.fingerprint == *other {
            Ok(())
        } else {
            Err(ExposeError::FingerprintMismatch {
                expected: self.fingerprint.to_string(),
                found: other.to_string(),
            })
        }
    }
}

const LEAF_ROWS: usize = 64;

fn embed_sum(map: &RksFeatureMap, data: &Dataset, lo: usize, hi: usize) -> Result<Vec<f64>> {
    if hi - lo <= LEAF_ROWS {
        let mut acc = vec![0.0; map.feature_dim()];
        let mut buf = vec![0.0; map.feature_dim()];
        for i in lo..hi {
            map.embed_into(data.row(i), &mut buf)?;
            acc.iter_mut().zip(&buf).for_each(|(a, b)| *a += b);
        }
        return Ok(acc);
    }
    let mid = lo + (hi - lo) / 2;
    let (left, right) = rayon::join(|| embed_sum(map, data, lo, mid), || embed_sum(map, data, mid, hi));
    let mut left = left?;
    left.iter_mut().zip(right?).for_each(|(a, b)| *a += b);
    Ok(left)
}

/// `μ[P_n] = (1/n) Σ_i φ̂(x_i)`, summed pairwise over rows.
///
/// The split points depend only on `n`, so the result is bit-identical across
/// thread counts.
pub fn empirical_embedding(map: &RksFeatureMap, data: &Dataset) -> Result<ModelState> {
    check_dim(map.input_dim(), data.dim())?;
    let n = data.n();
    let mut weights = embed_sum(map, data, 0, n)?;
    let inv = 1.0 / n as f64;
    weights.iter_mut().for_each(|w| *w *= inv);
    Ok(ModelState {
        weights,
        iteration: n as u64,
        fingerprint: map.fingerprint(),
    })
}

/// `½⟨w, w⟩ − ⟨μ_n, w⟩`.
pub fn objective_value(w: &ModelState, mu_n: &ModelState) -> Result<f64> {
    w.check_compatible(&mu_n.fingerprint)?;
    Ok(0.5 * dot(&w.weights, &w.weights) - dot(&mu_n.weights, &w.weights))
}

/// `f(w) − f(μ_n)`, verified against the closed form `½‖w − μ_n‖²`.
pub fn objective_gap(w: &ModelState, mu_n: &ModelState) -> Result<f64> {
    let gap = objective_value(w, mu_n)? - objective_value(mu_n, mu_n)?;
    let closed = 0.5 * dist_sq(&w.weights, &mu_n.weights);
    if !gap.is_finite() || (gap - closed).abs() > 1e-9 {
        return Err(ExposeError::Numeric(format!(
            "objective gap {gap} disagrees with ½‖w − μ‖² = {closed}"
        )));
    }
    Ok(gap)
}

const MODEL_TAG: &str = "EXPOSE-MODEL";
pub const MODEL_FORMAT_VERSION: u32 = 1;

fn checksum(values: &[f64]) -> String {
    let mut hasher = Sha256::new();
    for v in values {
        hasher.update(v.to_le_bytes());
    }
    hasher.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Serialises a model in the self-describing binary layout:
///
/// ```text
/// EXPOSE-MODEL 1 d=<d> r=<r> bandwidth=<σ²> seed=<seed> t=<t> generator=<id> zrow=<hex> weights=<hex>\n
/// <2r little-endian f64 weights>
/// ```
///
/// `Z` itself is not stored; it is regenerated from the seed on load and its
/// first row is verified against `zrow`.
pub fn encode_model(w: &ModelState, map: &RksFeatureMap) -> Result<Vec<u8>> {
    if map.is_custom() {
        return Err(ExposeError::input(
            "feature maps built from explicit frequencies cannot be persisted; build from a seed",
        ));
    }
    w.check_compatible(&map.fingerprint())?;
    let header = format!(
        "{MODEL_TAG} {MODEL_FORMAT_VERSION} d={} r={} bandwidth={} seed={} t={} generator={GENERATOR_ID} zrow={} weights={}\n",
        map.input_dim(),
        map.expansions(),
        map.bandwidth(),
        map.seed(),
        w.iteration,
        checksum(map.frequency_row(0)),
        checksum(&w.weights),
    );
    let mut bytes = header.into_bytes();
    bytes.reserve(w.weights.len() * 8);
    for v in &w.weights {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    Ok(bytes)
}

pub fn save_model(w: &ModelState, map: &RksFeatureMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_model(w, map)?;
    fs::write(path, bytes).map_err(|e| ExposeError::io(path, e))
}

fn header_field<'a>(fields: &[(&'a str, &'a str)], key: &str) -> Result<&'a str> {
    fields
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| ExposeError::Parse {
            location: "model header".into(),
            message: format!("missing field `{key}`"),
        })
}

fn parse_field<T: std::str::FromStr>(fields: &[(&str, &str)], key: &str) -> Result<T> {
    let raw = header_field(fields, key)?;
    raw.parse().map_err(|_| ExposeError::Parse {
        location: "model header".into(),
        message: format!("field `{key}` has invalid value `{raw}`"),
    })
}

pub fn decode_model(bytes: &[u8]) -> Result<(ModelState, RksFeatureMap)> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| ExposeError::ModelTruncated("header line is incomplete".into()))?;
    let header = std::str::from_utf8(&bytes[..newline]).map_err(|_| ExposeError::Parse {
        location: "model header".into(),
        message: "header is not UTF-8".into(),
    })?;
    let mut tokens = header.split(' ');
    if tokens.next() != Some(MODEL_TAG) {
        return Err(ExposeError::Parse {
            location: "model header".into(),
            message: format!("not an EXPoSE model file (expected `{MODEL_TAG}` tag)"),
        });
    }
    let version = tokens.next().unwrap_or("");
    if version.parse::<u32>().ok() != Some(MODEL_FORMAT_VERSION) {
        return Err(ExposeError::ModelVersion {
            expected: MODEL_FORMAT_VERSION,
            found: version.to_string(),
        });
    }
    let fields: Vec<(&str, &str)> = tokens.filter_map(|t| t.split_once('=')).collect();
    let d: usize = parse_field(&fields, "d")?;
    let r: usize = parse_field(&fields, "r")?;
    let bandwidth: f64 = parse_field(&fields, "bandwidth")?;
    let seed: u64 = parse_field(&fields, "seed")?;
    let t: u64 = parse_field(&fields, "t")?;
    let generator = header_field(&fields, "generator")?;
    let zrow = header_field(&fields, "zrow")?;
    let wsum = header_field(&fields, "weights")?;
    if generator != GENERATOR_ID {
        return Err(ExposeError::Parse {
            location: "model header".into(),
            message: format!("model was written with generator `{generator}`, this build uses `{GENERATOR_ID}`"),
        });
    }

    let payload = &bytes[newline + 1..];
    if !payload.len().is_multiple_of(8) {
        return Err(ExposeError::ModelTruncated(format!(
            "weight payload of {} bytes is not a whole number of f64 values",
            payload.len()
        )));
    }
    let expected = 2 * r;
    if payload.len() / 8 != expected {
        return Err(ExposeError::ModelWeightCount {
            declared_r: r,
            expected,
            found: payload.len() / 8,
        });
    }
    let weights: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let computed = checksum(&weights);
    if computed != wsum {
        return Err(ExposeError::ModelChecksum {
            what: "weights",
            stored: wsum.to_string(),
            computed,
        });
    }

    let spec = KernelSpec::gaussian(bandwidth)?;
    let map = RksFeatureMap::build(&spec, d, r, seed)?;
    let computed = checksum(map.frequency_row(0));
    if computed != zrow {
        return Err(ExposeError::ModelChecksum {
            what: "regenerated frequency matrix",
            stored: zrow.to_string(),
            computed,
        });
    }
    let state = ModelState::from_parts(weights, t, map.fingerprint())?;
    Ok((state, map))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(ModelState, RksFeatureMap)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| ExposeError::io(path, e))?;
    decode_model(&bytes)
}
