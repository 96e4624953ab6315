use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ExposeError, Result};

/// How training rows are drawn from the empirical measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    /// i.i.d. uniform draws, as in the stochastic approximation analysis.
    #[default]
    WithReplacement,
    /// A single random pass: every row at most once.
    WithoutReplacement,
}

impl fmt::Display for SamplingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplingMode::WithReplacement => "with-replacement",
            SamplingMode::WithoutReplacement => "without-replacement",
        })
    }
}

impl FromStr for SamplingMode {
    type Err = ExposeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "with-replacement" => Ok(SamplingMode::WithReplacement),
            "without-replacement" => Ok(SamplingMode::WithoutReplacement),
            other => Err(ExposeError::input(format!("unknown sampling mode `{other}`"))),
        }
    }
}

/// Seeded row sampler over `[0, n)`.
///
/// Without replacement it runs Fisher–Yates lazily: each draw fixes one more
/// position of a uniformly random permutation.
#[derive(Debug, Clone)]
pub struct Sampler {
    mode: SamplingMode,
    rng: ChaCha8Rng,
    permutation: Vec<usize>,
    cursor: usize,
    n: usize,
}

impl Sampler {
    pub fn new(mode: SamplingMode, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(ExposeError::input("cannot sample from an empty dataset"));
        }
        let permutation = match mode {
            SamplingMode::WithReplacement => Vec::new(),
            SamplingMode::WithoutReplacement => (0..n).collect(),
        };
        Ok(Sampler {
            mode,
            rng: ChaCha8Rng::seed_from_u64(seed),
            permutation,
            cursor: 0,
            n,
        })
    }

    pub fn mode(&self) -> SamplingMode {
        self.mode
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Draws left before a without-replacement sampler is exhausted.
    pub fn remaining(&self) -> Option<usize> {
        match self.mode {
            SamplingMode::WithReplacement => None,
            SamplingMode::WithoutReplacement => Some(self.n - self.cursor),
        }
    }

    pub fn next_sample(&mut self) -> Result<usize> {
        match self.mode {
            SamplingMode::WithReplacement => Ok(self.rng.random_range(0..self.n)),
            SamplingMode::WithoutReplacement => {
                if self.cursor == self.n {
                    return Err(ExposeError::input(format!(
                        "without-replacement sampler exhausted after {} draws; use with-replacement sampling for longer runs",
                        self.n
                    )));
                }
                let j = self.rng.random_range(self.cursor..self.n);
                self.permutation.swap(self.cursor, j);
                let idx = self.permutation[self.cursor];
                self.cursor += 1;
                Ok(idx)
            }
        }
    }
}
