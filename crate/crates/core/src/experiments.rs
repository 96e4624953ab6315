//! Convergence diagnostics: how fast the stochastic iterate `w_t` approaches the
//! empirical embedding `μ[P_n]` and how its anomaly scores compare.
//!
//! Every repetition builds its own feature map, computes `μ[P_n]` once as the
//! stand-in for `w*`, and then runs SGD, emitting one [`DiagnosticsRecord`]
//! every `eval_every` steps. Repetitions run in parallel.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::embedding::{empirical_embedding, objective_gap, ModelState};
use crate::error::{check_dim, ExposeError, Result};
use crate::kernel::{KernelSpec, RksFeatureMap};
use crate::linalg::{dist, dot};
use crate::scoring::{calibrate_threshold, classes_of, classification_error, score_batch, Class};
use crate::sgd::{run_sgd_with, SgdConfig};

pub const DEFAULT_EVAL_EVERY: u64 = 200;
pub const DEFAULT_TEST_SIZE: usize = 10_000;
pub const DEFAULT_REPETITIONS: usize = 10;

/// Test sets are embedded once per repetition when they fit in this many bytes;
/// larger ones are re-embedded at every checkpoint.
const EMBED_CACHE_BYTES: usize = 256 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    /// Samples consumed; the record describes `w_{t+1}`.
    pub t: u64,
    pub objective_gap: f64,
    pub param_dist: f64,
    pub mean_score_dev: f64,
    pub err_sgd: f64,
    pub err_full: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub bandwidth: f64,
    pub expansions: usize,
    pub eval_every: u64,
    pub repetitions: usize,
    /// Base seed; per-repetition map and sampling seeds are derived from it.
    pub seed: u64,
    /// Step policy and stop rule. Its `seed` field is ignored.
    pub sgd: SgdConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        KernelSpec::gaussian(self.bandwidth)?;
        if self.expansions == 0 {
            return Err(ExposeError::input("expansions must be at least 1"));
        }
        if self.eval_every == 0 {
            return Err(ExposeError::input("eval_every must be at least 1"));
        }
        if self.repetitions == 0 {
            return Err(ExposeError::input("repetitions must be at least 1"));
        }
        self.sgd.validate()
    }

    /// `(map_seed, sample_seed)` for repetition `k`.
    pub fn repetition_seeds(&self, k: usize) -> (u64, u64) {
        (
            splitmix64(self.seed ^ splitmix64(2 * k as u64)),
            splitmix64(self.seed ^ splitmix64(2 * k as u64 + 1)),
        )
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSeries {
    pub repetition: usize,
    pub map_seed: u64,
    pub sample_seed: u64,
    pub records: Vec<DiagnosticsRecord>,
}

enum TestScorer {
    Cached(Vec<f64>),
    OnTheFly,
}

impl TestScorer {
    fn scores(&self, w: &ModelState, map: &RksFeatureMap, test: &Dataset) -> Result<Vec<f64>> {
        match self {
            TestScorer::Cached(feats) => Ok(feats
                .par_chunks_exact(map.feature_dim())
                .map(|f| dot(f, w.weights()))
                .collect()),
            TestScorer::OnTheFly => score_batch(w, map, test),
        }
    }
}

fn error_rate(scores: &[f64], classes: &[Class]) -> Result<f64> {
    let cal = calibrate_threshold(scores, classes)?;
    classification_error(scores, classes, &cal)
}

/// One repetition of the convergence experiment.
pub fn run_repetition(cfg: &ExperimentConfig, train: &Dataset, test: &Dataset, k: usize) -> Result<RunSeries> {
    cfg.validate()?;
    check_dim(train.dim(), test.dim())?;
    let classes = classes_of(test)?;
    let (map_seed, sample_seed) = cfg.repetition_seeds(k);
    let spec = KernelSpec::gaussian(cfg.bandwidth)?;
    let map = RksFeatureMap::build(&spec, train.dim(), cfg.expansions, map_seed)?;
    let mu = empirical_embedding(&map, train)?;

    let scorer = if test.n().saturating_mul(map.feature_dim()).saturating_mul(8) <= EMBED_CACHE_BYTES {
        let mut feats = vec![0.0; test.n() * map.feature_dim()];
        feats
            .par_chunks_exact_mut(map.feature_dim())
            .enumerate()
            .try_for_each(|(i, out)| map.embed_into(test.row(i), out))?;
        TestScorer::Cached(feats)
    } else {
        TestScorer::OnTheFly
    };
    let eta_n = scorer.scores(&mu, &map, test)?;
    let err_full = error_rate(&eta_n, &classes)?;

    let sgd = SgdConfig {
        seed: sample_seed,
        ..cfg.sgd
    };
    let mut records = Vec::new();
    run_sgd_with(&sgd, train, &map, |snap| {
        if snap.steps % cfg.eval_every != 0 {
            return Ok(());
        }
        let eta_t = scorer.scores(snap.state, &map, test)?;
        let mean_score_dev = eta_t.iter().zip(&eta_n).map(|(a, b)| (a - b).abs()).sum::<f64>() / eta_t.len() as f64;
        records.push(DiagnosticsRecord {
            t: snap.steps,
            objective_gap: objective_gap(snap.state, &mu)?,
            param_dist: dist(snap.state.weights(), mu.weights()),
            mean_score_dev,
            err_sgd: error_rate(&eta_t, &classes)?,
            err_full,
        });
        Ok(())
    })?;
    Ok(RunSeries {
        repetition: k,
        map_seed,
        sample_seed,
        records,
    })
}

/// All repetitions, in repetition order.
pub fn run_convergence_experiment(cfg: &ExperimentConfig, train: &Dataset, test: &Dataset) -> Result<Vec<RunSeries>> {
    cfg.validate()?;
    (0..cfg.repetitions)
        .into_par_iter()
        .map(|k| run_repetition(cfg, train, test, k))
        .collect()
}

/// Pointwise mean of each field over runs sharing one `t` grid.
pub fn aggregate_runs(series: &[Vec<DiagnosticsRecord>]) -> Result<Vec<DiagnosticsRecord>> {
    let first = series.first().ok_or_else(|| ExposeError::input("no runs to aggregate"))?;
    for (k, run) in series.iter().enumerate() {
        if run.len() != first.len() || run.iter().zip(first).any(|(a, b)| a.t != b.t) {
            return Err(ExposeError::input(format!(
                "run {k} has a different checkpoint grid than run 0"
            )));
        }
    }
    let r = series.len() as f64;
    Ok((0..first.len())
        .map(|i| {
            let mean = |f: fn(&DiagnosticsRecord) -> f64| series.iter().map(|s| f(&s[i])).sum::<f64>() / r;
            DiagnosticsRecord {
                t: first[i].t,
                objective_gap: mean(|d| d.objective_gap),
                param_dist: mean(|d| d.param_dist),
                mean_score_dev: mean(|d| d.mean_score_dev),
                err_sgd: mean(|d| d.err_sgd),
                err_full: mean(|d| d.err_full),
            }
        })
        .collect())
}

const CSV_COLUMNS: [&str; 6] = ["t", "objective_gap", "param_dist", "mean_score_dev", "err_sgd", "err_full"];

/// Writes one line per record. With `bounds_radius = Some(M)` two extra columns
/// carry `M²/t` and `M²/(2t)`.
pub fn write_diagnostics_csv(
    series: &[DiagnosticsRecord],
    path: impl AsRef<Path>,
    bounds_radius: Option<f64>,
) -> Result<()> {
    let path = path.as_ref();
    let io_err = |e| ExposeError::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    let mut header = CSV_COLUMNS.join(",");
    if bounds_radius.is_some() {
        header.push_str(",bound_param,bound_obj");
    }
    writeln!(out, "{header}").map_err(io_err)?;
    for r in series {
        write!(
            out,
            "{},{},{},{},{},{}",
            r.t, r.objective_gap, r.param_dist, r.mean_score_dev, r.err_sgd, r.err_full
        )
        .map_err(io_err)?;
        if let Some(m) = bounds_radius {
            let m2 = m * m;
            let t = r.t as f64;
            write!(out, ",{},{}", m2 / t, m2 / (2.0 * t)).map_err(io_err)?;
        }
        writeln!(out).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

pub fn read_diagnostics_csv(path: impl AsRef<Path>) -> Result<Vec<DiagnosticsRecord>> {
    let path = path.as_ref();
    let src = path.display().to_string();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| ExposeError::Parse {
        location: src.clone(),
        message: e.to_string(),
    })?;
    let headers = rdr.headers().map_err(|e| ExposeError::Parse {
        location: src.clone(),
        message: e.to_string(),
    })?;
    if headers.iter().take(CSV_COLUMNS.len()).ne(CSV_COLUMNS) {
        return Err(ExposeError::Parse {
            location: src,
            message: "unexpected diagnostics header".into(),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let location = format!("{src}:{}", i + 2);
        let rec = rec.map_err(|e| ExposeError::Parse {
            location: location.clone(),
            message: e.to_string(),
        })?;
        let num = |j: usize| -> Result<f64> {
            rec.get(j).and_then(|v| v.parse().ok()).ok_or_else(|| ExposeError::Parse {
                location: location.clone(),
                message: format!("bad value in column `{}`", CSV_COLUMNS[j]),
            })
        };
        let t = rec.get(0).and_then(|v| v.parse().ok()).ok_or_else(|| ExposeError::Parse {
            location: location.clone(),
            message: "bad iteration".into(),
        })?;
        out.push(DiagnosticsRecord {
            t,
            objective_gap: num(1)?,
            param_dist: num(2)?,
            mean_score_dev: num(3)?,
            err_sgd: num(4)?,
            err_full: num(5)?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub rows: usize,
    pub dim: usize,
    pub provenance: String,
}

impl From<&Dataset> for DatasetSummary {
    fn from(d: &Dataset) -> Self {
        DatasetSummary {
            name: d.name.clone(),
            rows: d.n(),
            dim: d.dim(),
            provenance: d.provenance.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSeeds {
    pub repetition: usize,
    pub map_seed: u64,
    pub sample_seed: u64,
}

/// Machine-readable record of how a diagnostics CSV was produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub iterations: u64,
    pub train: DatasetSummary,
    pub test: DatasetSummary,
    pub runs: Vec<RunSeeds>,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn new(cfg: &ExperimentConfig, train: &Dataset, test: &Dataset, runs: &[RunSeries], elapsed: Duration) -> Result<Self> {
        Ok(RunManifest {
            config: cfg.clone(),
            iterations: cfg.sgd.total_iterations()?,
            train: train.into(),
            test: test.into(),
            runs: runs
                .iter()
                .map(|r| RunSeeds {
                    repetition: r.repetition,
                    map_seed: r.map_seed,
                    sample_seed: r.sample_seed,
                })
                .collect(),
            wall_clock_seconds: elapsed.as_secs_f64(),
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).map_err(|e| ExposeError::input(e.to_string()))?;
        std::fs::write(path, json + "\n").map_err(|e| ExposeError::io(path, e))
    }
}
