use std::path::{Path, PathBuf};
use std::time::Instant;

use expose_core::data::{load_csv, load_idx, load_kdd, save_csv, CsvOptions, KddPreprocessor};
use expose_core::experiments::{RunManifest, RunSeries};
use expose_core::scoring::{classes_of, write_scores_csv};
use expose_core::{
    aggregate_runs, calibrate_threshold, classification_error, classify, empirical_embedding, iterations_for_accuracy,
    load_model, make_anomaly_split, run_convergence_experiment, run_sgd, save_model, score_batch,
    write_diagnostics_csv, AccuracyMode, Class, Dataset, ErrorKind, ExperimentConfig, ExposeError, KernelSpec,
    RksFeatureMap, SamplingMode, SgdConfig,
};

use crate::args::{
    Command, ConvergenceArgs, EpsilonMode, EvalArgs, FeaturesArgs, Format, InputArgs, KernelArgs, Method, Sampling,
    ScoreArgs, SgdArgs, TrainArgs,
};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_DATA: i32 = 4;
pub const EXIT_NUMERIC: i32 = 5;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(ExposeError),
}

impl From<ExposeError> for CliError {
    fn from(e: ExposeError) -> Self {
        CliError::Core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Io => EXIT_IO,
                ErrorKind::Data => EXIT_DATA,
                ErrorKind::Numeric => EXIT_NUMERIC,
            },
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Runs a parsed command and returns the process exit code.
pub fn execute(cmd: Command) -> i32 {
    let res = match cmd {
        Command::Features(a) => features(a),
        Command::Train(a) => train(a),
        Command::Score(a) => score(a),
        Command::Eval(a) => eval(a),
        Command::Convergence(a) => convergence(a),
    };
    match res {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn preprocessor_path(model: &Path) -> PathBuf {
    let mut s = model.as_os_str().to_owned();
    s.push(".kdd.json");
    PathBuf::from(s)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

enum Kdd<'a> {
    /// Fit the one-hot and scaling parameters on this input.
    Fit,
    /// Reuse parameters fitted on training data.
    Apply(&'a KddPreprocessor),
}

fn load_input(input: &InputArgs, kdd: Kdd<'_>) -> CliResult<(Dataset, Option<KddPreprocessor>)> {
    match input.format {
        Format::Csv => {
            if input.labels.is_some() {
                return Err(CliError::Usage("--labels applies to --format idx only".into()));
            }
            let opts = CsvOptions { has_labels: input.has_labels, has_header: input.header };
            Ok((load_csv(&input.data, opts)?, None))
        }
        Format::Idx => {
            let labels = input
                .labels
                .as_ref()
                .ok_or_else(|| CliError::Usage("--format idx requires --labels <PATH>".into()))?;
            Ok((load_idx(&input.data, labels)?, None))
        }
        Format::Kdd => {
            let records = load_kdd(&input.data)?;
            let name = input.data.display().to_string();
            match kdd {
                Kdd::Fit => {
                    let pre = KddPreprocessor::fit(&records)?;
                    let data = pre.transform(&records, &name)?;
                    Ok((data, Some(pre)))
                }
                Kdd::Apply(pre) => Ok((pre.transform(&records, &name)?, None)),
            }
        }
    }
}

fn sampling_mode(s: Option<Sampling>, default: SamplingMode) -> SamplingMode {
    match s {
        Some(Sampling::WithReplacement) => SamplingMode::WithReplacement,
        Some(Sampling::WithoutReplacement) => SamplingMode::WithoutReplacement,
        None => default,
    }
}

fn accuracy_mode(m: EpsilonMode) -> AccuracyMode {
    match m {
        EpsilonMode::Objective => AccuracyMode::Objective,
        EpsilonMode::Parameter => AccuracyMode::Parameter,
    }
}

/// Builds the step configuration and prints the derived horizon when it came from ε.
fn sgd_config(a: &SgdArgs, seed: u64, default_sampling: SamplingMode) -> CliResult<SgdConfig> {
    let cfg = match (a.iterations, a.epsilon) {
        (Some(t), None) => SgdConfig::with_iterations(t, seed),
        (None, Some(eps)) => {
            let t = iterations_for_accuracy(eps, a.radius, accuracy_mode(a.epsilon_mode))?;
            println!("T = {t}");
            SgdConfig::with_accuracy(eps, accuracy_mode(a.epsilon_mode), seed)
        }
        (None, None) => return Err(CliError::Usage("one of --iterations or --epsilon is required".into())),
        (Some(_), Some(_)) => return Err(CliError::Usage("--iterations and --epsilon are mutually exclusive".into())),
    };
    let cfg = cfg
        .theta(a.theta)
        .ball_radius(a.radius)
        .sampling(sampling_mode(a.sampling, default_sampling));
    cfg.validate()?;
    Ok(cfg)
}

fn build_map(k: &KernelArgs, d: usize) -> CliResult<RksFeatureMap> {
    Ok(RksFeatureMap::build(&KernelSpec::gaussian(k.bandwidth)?, d, k.expansions, k.seed)?)
}

fn features(a: FeaturesArgs) -> CliResult<()> {
    let (data, _) = load_input(&a.input, Kdd::Fit)?;
    let map = build_map(&a.kernel, data.dim())?;
    let dim = map.feature_dim();
    let mut out = vec![0.0; data.n() * dim];
    for (row, chunk) in data.rows().zip(out.chunks_exact_mut(dim)) {
        map.embed_into(row, chunk)?;
    }
    let embedded = Dataset::new(
        out,
        dim,
        data.labels().map(<[i64]>::to_vec),
        format!("{} (embedded)", data.name),
        format!("{}; {}", data.provenance, map.fingerprint()),
    )?;
    save_csv(&embedded, &a.output)?;
    println!("embedded {} rows into {} features ({})", data.n(), dim, map.fingerprint());
    Ok(())
}

fn train(a: TrainArgs) -> CliResult<()> {
    let (mut data, pre) = load_input(&a.input, Kdd::Fit)?;
    if let Some(label) = a.normal_label {
        let labels = data
            .labels()
            .ok_or_else(|| ExposeError::Input("--normal-label needs labelled input".into()))?;
        let keep: Vec<usize> = (0..data.n()).filter(|&i| labels[i] == label).collect();
        if keep.is_empty() {
            return Err(ExposeError::Input(format!("no rows carry label {label}")).into());
        }
        data = data.select(&keep, format!("{}[label {label}]", data.name))?;
    }
    let map = build_map(&a.kernel, data.dim())?;
    let model = match a.method {
        Method::Sgd => {
            let cfg = sgd_config(&a.sgd, a.kernel.seed, SamplingMode::WithReplacement)?;
            run_sgd(&cfg, &data, &map)?
        }
        Method::Full => {
            if a.sgd.iterations.is_some() || a.sgd.epsilon.is_some() {
                return Err(CliError::Usage("--iterations / --epsilon apply to --method sgd only".into()));
            }
            empirical_embedding(&map, &data)?
        }
    };
    save_model(&model, &map, &a.output)?;
    if let Some(pre) = pre {
        pre.save(preprocessor_path(&a.output))?;
    }
    println!(
        "trained on n = {} rows, d = {}, r = {}, t = {}; model written to {}",
        data.n(),
        data.dim(),
        map.expansions(),
        model.iteration(),
        a.output.display()
    );
    Ok(())
}

fn load_for_model(input: &InputArgs, model: &Path) -> CliResult<Dataset> {
    if input.format == Format::Kdd {
        let pre = KddPreprocessor::load(preprocessor_path(model))?;
        Ok(load_input(input, Kdd::Apply(&pre))?.0)
    } else {
        Ok(load_input(input, Kdd::Fit)?.0)
    }
}

fn score(a: ScoreArgs) -> CliResult<()> {
    let (model, map) = load_model(&a.model)?;
    let data = load_for_model(&a.input, &a.model)?;
    let scores = score_batch(&model, &map, &data)?;
    let predictions = a
        .threshold
        .map(|tau| scores.iter().map(|&s| Class::from_is_normal(s >= tau)).collect::<Vec<Class>>());
    write_scores_csv(&a.output, &scores, data.labels(), predictions.as_deref())?;
    println!("scored {} rows; wrote {}", scores.len(), a.output.display());
    Ok(())
}

fn eval(a: EvalArgs) -> CliResult<()> {
    let (model, map) = load_model(&a.model)?;
    let data = load_for_model(&a.input, &a.model)?;
    let classes = match a.normal_label {
        Some(label) => data
            .labels()
            .ok_or_else(|| ExposeError::Input("eval needs labelled input".into()))?
            .iter()
            .map(|&l| Class::from_is_normal(l == label))
            .collect(),
        None => classes_of(&data)?,
    };
    let scores = score_batch(&model, &map, &data)?;
    let cal = calibrate_threshold(&scores, &classes)?;
    let err = classification_error(&scores, &classes, &cal)?;
    println!("tau = {}", cal.tau);
    println!("cv_accuracy = {}", cal.validation_accuracy);
    println!("error = {err}");
    if let Some(out) = &a.output {
        let preds: Vec<Class> = scores.iter().map(|&s| classify(s, &cal)).collect();
        let labels: Vec<i64> = classes.iter().map(|c| c.label()).collect();
        write_scores_csv(out, &scores, Some(&labels), Some(&preds))?;
    }
    Ok(())
}

fn convergence(a: ConvergenceArgs) -> CliResult<()> {
    // One transform over the whole pool: attack traffic may use categories absent from normal rows.
    let (data, _) = load_input(&a.input, Kdd::Fit)?;
    let (train, test) = make_anomaly_split(&data, a.normal_label, a.test_size, a.kernel.seed)?;
    let sgd = sgd_config(&a.sgd, a.kernel.seed, SamplingMode::WithoutReplacement)?;
    let cfg = ExperimentConfig {
        bandwidth: a.kernel.bandwidth,
        expansions: a.kernel.expansions,
        eval_every: a.eval_every,
        repetitions: a.repetitions,
        seed: a.kernel.seed,
        sgd,
    };
    cfg.validate()?;
    let start = Instant::now();
    let runs = run_convergence_experiment(&cfg, &train, &test)?;
    let elapsed = start.elapsed();
    let series: Vec<_> = runs.iter().map(|r: &RunSeries| r.records.clone()).collect();
    let mean = aggregate_runs(&series)?;
    let bounds = a.include_bounds.then_some(a.sgd.radius);
    write_diagnostics_csv(&mean, &a.output, bounds)?;
    if a.per_run {
        for r in &runs {
            write_diagnostics_csv(&r.records, sibling(&a.output, &format!(".run{:02}.csv", r.repetition)), bounds)?;
        }
    }
    let manifest_path = sibling(&a.output, ".manifest.json");
    RunManifest::new(&cfg, &train, &test, &runs, elapsed)?.write(&manifest_path)?;
    if let Some(last) = mean.last() {
        println!(
            "{} repetitions, t = {}: gap {:.3e}, dist {:.3e}, score dev {:.3e}, err sgd {:.4}, err full {:.4}",
            runs.len(),
            last.t,
            last.objective_gap,
            last.param_dist,
            last.mean_score_dev,
            last.err_sgd,
            last.err_full
        );
    }
    println!("wrote {} and {}", a.output.display(), manifest_path.display());
    Ok(())
}
