//! Gaussian RBF kernel and its Random Kitchen Sinks feature map.
//!
//! The exact kernel is `k(x, y) = exp(-‖x - y‖² / (2σ²))`. By Bochner's theorem
//! it is the characteristic function of `N(0, σ⁻² I)`, so drawing the rows of a
//! frequency matrix `Z` from that distribution gives the unbiased estimate
//! `k(x, y) ≈ (1/r) Σ_j cos(z_jᵀ(x - y))`.
//!
//! The complex map `exp(iZx)/√r` is stored as the real vector
//! `[cos(Zx); sin(Zx)] / √r` of length `2r`, whose inner products equal the
//! real part of the complex ones. Every embedded point has unit norm, which
//! fixes the kernel bound `M = 1` for the whole pipeline.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, ExposeError, Result};
use crate::linalg::{dist_sq, dot};

/// Identity of the pseudo-random normal generator used for `Z`.
///
/// Written into model files; a file produced by a different generator is
/// rejected instead of silently producing a different feature map.
pub const GENERATOR_ID: &str = "chacha8-seed_from_u64+standard-normal-ziggurat/row-major";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelFamily {
    GaussianRbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    family: KernelFamily,
    bandwidth: f64,
}

impl KernelSpec {
    /// Gaussian RBF with `bandwidth` = σ².
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(ExposeError::input(format!(
                "bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        Ok(KernelSpec {
            family: KernelFamily::GaussianRbf,
            bandwidth,
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// `M` with `k(x, x) ≤ M²`.
    pub fn bound(&self) -> f64 {
        match self.family {
            KernelFamily::GaussianRbf => 1.0,
        }
    }
}

pub fn evaluate_kernel(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    check_dim(x.len(), y.len())?;
    match spec.family {
        KernelFamily::GaussianRbf => Ok((-dist_sq(x, y) / (2.0 * spec.bandwidth)).exp()),
    }
}

/// The parameters that regenerate a feature map bit-exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapFingerprint {
    pub seed: u64,
    pub expansions: usize,
    pub input_dim: usize,
    pub bandwidth: f64,
}

impl fmt::Display for MapFingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(seed={}, r={}, d={}, bandwidth={})",
            self.seed, self.expansions, self.input_dim, self.bandwidth
        )
    }
}

/// Embedded point `φ̂(x)`: cosine block followed by sine block, each scaled by `1/√r`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Frozen random projection `Z ∈ R^{r×d}` realising `φ̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct RksFeatureMap {
    /// Row-major, `expansions` rows of `input_dim` entries.
    frequencies: Vec<f64>,
    expansions: usize,
    input_dim: usize,
    bandwidth: f64,
    seed: u64,
    custom: bool,
}

impl RksFeatureMap {
    /// Draws every entry of `Z` independently from `N(0, 1/σ²)`.
    pub fn build(spec: &KernelSpec, input_dim: usize, expansions: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || expansions == 0 {
            return Err(ExposeError::input(format!(
                "feature map needs input_dim >= 1 and expansions >= 1, got d={input_dim}, r={expansions}"
            )));
        }
        let len = input_dim
            .checked_mul(expansions)
            .ok_or_else(|| ExposeError::input("feature map size overflows usize"))?;
        let scale = 1.0 / spec.bandwidth.sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frequencies = (0..len)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale
            })
            .collect();
        Ok(RksFeatureMap {
            frequencies,
            expansions,
            input_dim,
            bandwidth: spec.bandwidth,
            seed,
            custom: false,
        })
    }

    /// Wraps a caller-supplied frequency matrix (row-major, `expansions × input_dim`).
    ///
    /// Such a map cannot be regenerated from a seed and is refused by
    /// [`crate::embedding::save_model`].
    pub fn from_frequencies(
        frequencies: Vec<f64>,
        expansions: usize,
        input_dim: usize,
        bandwidth: f64,
    ) -> Result<Self> {
        if input_dim == 0 || expansions == 0 {
            return Err(ExposeError::input("feature map needs input_dim >= 1 and expansions >= 1"));
        }
        check_dim(expansions * input_dim, frequencies.len())?;
        if frequencies.iter().any(|z| !z.is_finite()) {
            return Err(ExposeError::input("frequency matrix contains non-finite entries"));
        }
        KernelSpec::gaussian(bandwidth)?;
        Ok(RksFeatureMap {
            frequencies,
            expansions,
            input_dim,
            bandwidth,
            seed: 0,
            custom: true,
        })
    }

    pub fn expansions(&self) -> usize {
        self.expansions
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Length of every [`FeatureVector`], `2r`.
    pub fn feature_dim(&self) -> usize {
        2 * self.expansions
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_custom(&self) -> bool {
        self.custom
    }

    pub fn kernel_spec(&self) -> KernelSpec {
        KernelSpec {
            family: KernelFamily::GaussianRbf,
            bandwidth: self.bandwidth,
        }
    }

    pub fn fingerprint(&self) -> MapFingerprint {
        MapFingerprint {
            seed: self.seed,
            expansions: self.expansions,
            input_dim: self.input_dim,
            bandwidth: self.bandwidth,
        }
    }

    /// Row-major frequency matrix.
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn frequency_row(&self, j: usize) -> &[f64] {
        &self.frequencies[j * self.input_dim..(j + 1) * self.input_dim]
    }

    pub fn embed(&self, x: &[f64]) -> Result<FeatureVector> {
        let mut out = vec![0.0; self.feature_dim()];
        self.embed_into(x, &mut out)?;
        Ok(FeatureVector(out))
    }

    /// Writes `φ̂(x)` into `out`, which must have length `2r`.
    pub fn embed_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.input_dim, x.len())?;
        check_dim(self.feature_dim(), out.len())?;
        let r = self.expansions;
        let scale = 1.0 / (r as f64).sqrt();
        let (cos_block, sin_block) = out.split_at_mut(r);
        for (j, row) in self.frequencies.chunks_exact(self.input_dim).enumerate() {
            let (s, c) = dot(row, x).sin_cos();
            cos_block[j] = c * scale;
            sin_block[j] = s * scale;
        }
        Ok(())
    }

    /// `⟨φ̂(x), φ̂(y)⟩`, the approximation of `k(x, y)`.
    pub fn approx_kernel(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let fx = self.embed(x)?;
        let fy = self.embed(y)?;
        Ok(dot(fx.as_slice(), fy.as_slice()))
    }
}
