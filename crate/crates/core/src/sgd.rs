//! Projected stochastic approximation of the kernel mean embedding.
//!
//! Starting from `w_1 = 0`, each step draws a training row `x_t`, forms the
//! stochastic gradient `w_t − φ̂(x_t)` and moves with step size `γ_t = θ/t`,
//! then projects back onto the ball `‖w‖ ≤ M`. With `θ = 1` the iterate is
//! exactly the running mean of the sampled feature vectors, so the projection
//! never activates and the cost per step is independent of the dataset size.

use serde::{Deserialize, Serialize};

use crate::data::{Sampler, SamplingMode};
use crate::dataset::Dataset;
use crate::embedding::ModelState;
use crate::error::{check_dim, ExposeError, Result};
use crate::kernel::{FeatureVector, RksFeatureMap};
use crate::linalg::norm;

/// Strong-convexity constant of the objective.
pub const STRONG_CONVEXITY: f64 = 1.0;
/// Lipschitz constant of the objective's gradient.
pub const GRADIENT_LIPSCHITZ: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccuracyMode {
    /// `E[f(w_T) − f(w*)] ≤ ε`.
    #[default]
    Objective,
    /// `E‖w_T − w*‖² ≤ ε²`.
    Parameter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopCriterion {
    Iterations(u64),
    Accuracy { epsilon: f64, mode: AccuracyMode },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    /// Step-size scale, `γ_t = θ/t`. Must exceed ½.
    pub theta: f64,
    /// Radius `M` of the feasible ball.
    pub ball_radius: f64,
    pub stop: StopCriterion,
    pub seed: u64,
    pub sampling: SamplingMode,
}

impl SgdConfig {
    /// `θ = 1`, `M = 1`, with-replacement sampling, `iterations` steps.
    pub fn with_iterations(iterations: u64, seed: u64) -> Self {
        SgdConfig {
            theta: 1.0,
            ball_radius: 1.0,
            stop: StopCriterion::Iterations(iterations),
            seed,
            sampling: SamplingMode::WithReplacement,
        }
    }

    pub fn with_accuracy(epsilon: f64, mode: AccuracyMode, seed: u64) -> Self {
        SgdConfig {
            stop: StopCriterion::Accuracy { epsilon, mode },
            ..Self::with_iterations(1, seed)
        }
    }

    pub fn sampling(mut self, sampling: SamplingMode) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn ball_radius(mut self, radius: f64) -> Self {
        self.ball_radius = radius;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta.is_finite() && self.theta > 0.5 / STRONG_CONVEXITY) {
            return Err(ExposeError::input(format!(
                "theta must exceed 1/2 for the O(1/t) rate, got {}",
                self.theta
            )));
        }
        if !(self.ball_radius.is_finite() && self.ball_radius > 0.0) {
            return Err(ExposeError::input(format!(
                "ball radius must be positive, got {}",
                self.ball_radius
            )));
        }
        match self.stop {
            StopCriterion::Iterations(0) => Err(ExposeError::input("iteration count must be at least 1")),
            StopCriterion::Accuracy { epsilon, .. } if !(epsilon.is_finite() && epsilon > 0.0) => {
                Err(ExposeError::input(format!("epsilon must be positive, got {epsilon}")))
            }
            _ => Ok(()),
        }
    }

    /// `T`, either configured directly or derived from `ε`.
    pub fn total_iterations(&self) -> Result<u64> {
        self.validate()?;
        match self.stop {
            StopCriterion::Iterations(t) => Ok(t),
            StopCriterion::Accuracy { epsilon, mode } => iterations_for_accuracy(epsilon, self.ball_radius, mode),
        }
    }
}

/// `w − φ̂(x)`, an unbiased estimate of `∇f(w) = w − μ`.
pub fn stochastic_gradient(w: &[f64], feat: &FeatureVector) -> Result<Vec<f64>> {
    check_dim(w.len(), feat.len())?;
    Ok(w.iter().zip(feat.as_slice()).map(|(a, b)| a - b).collect())
}

/// Rescales `w` onto the ball of radius `radius` if it lies outside.
/// Returns whether a rescale happened.
pub fn project_ball_in_place(w: &mut [f64], radius: f64) -> Result<bool> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(ExposeError::input(format!("ball radius must be positive, got {radius}")));
    }
    let len = norm(w);
    if !len.is_finite() {
        return Err(ExposeError::input("cannot project a non-finite vector"));
    }
    if len <= radius {
        return Ok(false);
    }
    let scale = radius / len;
    w.iter_mut().for_each(|v| *v *= scale);
    Ok(true)
}

/// Metric projection onto `{v : ‖v‖ ≤ radius}`: `w · min{1, radius/‖w‖}`.
pub fn project_ball(w: &[f64], radius: f64) -> Result<Vec<f64>> {
    let mut out = w.to_vec();
    project_ball_in_place(&mut out, radius)?;
    Ok(out)
}

/// One update `w ← Π((1 − θ/t)·w + (θ/t)·φ̂(x))` on raw feature values.
/// Returns whether the projection rescaled the iterate.
pub(crate) fn step_in_place(state: &mut ModelState, feat: &[f64], theta: f64, radius: f64) -> Result<bool> {
    let t = state.iteration();
    if t == 0 {
        return Err(ExposeError::input("iterates are numbered from t = 1"));
    }
    check_dim(state.weights().len(), feat.len())?;
    let gamma = theta / t as f64;
    let keep = 1.0 - gamma;
    state
        .weights_mut()
        .iter_mut()
        .zip(feat)
        .for_each(|(w, f)| *w = keep * *w + gamma * f);
    let projected = project_ball_in_place(state.weights_mut(), radius)?;
    state.set_iteration(t + 1);
    Ok(projected)
}

pub fn sgd_step(mut state: ModelState, feat: &FeatureVector, config: &SgdConfig) -> Result<ModelState> {
    config.validate()?;
    step_in_place(&mut state, feat.as_slice(), config.theta, config.ball_radius)?;
    Ok(state)
}

/// What the diagnostics hook sees after every step.
#[derive(Debug)]
pub struct StepSnapshot<'a> {
    /// Number of samples consumed so far (the state is `w_{steps+1}`).
    pub steps: u64,
    pub state: &'a ModelState,
    /// Row index drawn in this step.
    pub sample: usize,
    pub projected: bool,
}

pub fn run_sgd(config: &SgdConfig, data: &Dataset, map: &RksFeatureMap) -> Result<ModelState> {
    run_sgd_with(config, data, map, |_| Ok(()))
}

/// Runs the projected stochastic approximation for `config.total_iterations()`
/// steps and returns `w_{T+1}`, calling `hook` after every step.
pub fn run_sgd_with<F>(config: &SgdConfig, data: &Dataset, map: &RksFeatureMap, mut hook: F) -> Result<ModelState>
where
    F: FnMut(&StepSnapshot<'_>) -> Result<()>,
{
    let total = config.total_iterations()?;
    check_dim(map.input_dim(), data.dim())?;
    if config.sampling == SamplingMode::WithoutReplacement && total > data.n() as u64 {
        return Err(ExposeError::input(format!(
            "{total} iterations without replacement need at least {total} rows, dataset has {}",
            data.n()
        )));
    }
    let mut sampler = Sampler::new(config.sampling, data.n(), config.seed)?;
    let mut state = ModelState::zero(map);
    let mut feat = vec![0.0; map.feature_dim()];
    for step in 1..=total {
        let idx = sampler.next_sample()?;
        map.embed_into(data.row(idx), &mut feat)?;
        let projected = step_in_place(&mut state, &feat, config.theta, config.ball_radius)?;
        hook(&StepSnapshot {
            steps: step,
            state: &state,
            sample: idx,
            projected,
        })?;
    }
    Ok(state)
}

/// Absorbs floating-point fuzz so that e.g. `1/(2·0.005)` counts as exactly 100.
fn ceil_tolerant(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// Iterations that guarantee `ε`-accuracy in expectation, independent of `n`.
///
/// * objective: `⌈M²/(2ε)⌉`, from `E[f(w_t) − f(w*)] ≤ M²/(2t)`
/// * parameter: `⌈M²/ε²⌉`, from `E‖w_t − w*‖² ≤ M²/t`
pub fn iterations_for_accuracy(epsilon: f64, radius: f64, mode: AccuracyMode) -> Result<u64> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(ExposeError::input(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(ExposeError::input(format!("bound M must be positive, got {radius}")));
    }
    let m2 = radius * radius;
    let raw = match mode {
        AccuracyMode::Objective => m2 / (2.0 * epsilon),
        AccuracyMode::Parameter => m2 / (epsilon * epsilon),
    };
    let t = ceil_tolerant(raw).max(1.0);
    if t > u64::MAX as f64 {
        return Err(ExposeError::Numeric(format!("iteration count {raw} overflows")));
    }
    Ok(t as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalBounds {
    /// Bound on `E‖w_t − w*‖²`.
    pub param: f64,
    /// Bound on `E[f(w_t) − f(w*)]`.
    pub objective: f64,
    /// `Q(θ) = max{θ²M²/(2αθ − 1), ‖w_1 − w*‖²}` with `‖w_1 − w*‖² ≤ M²/α²`.
    pub q: f64,
}

pub fn theoretical_bounds(t: u64, radius: f64, theta: f64) -> Result<TheoreticalBounds> {
    if t == 0 {
        return Err(ExposeError::input("bounds are defined for t >= 1"));
    }
    let alpha = STRONG_CONVEXITY;
    if !(theta.is_finite() && theta > 0.5 / alpha) {
        return Err(ExposeError::input(format!("theta must exceed 1/2, got {theta}")));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(ExposeError::input(format!("bound M must be positive, got {radius}")));
    }
    let m2 = radius * radius;
    let q = (theta * theta * m2 / (2.0 * alpha * theta - 1.0)).max(m2 / (alpha * alpha));
    let t = t as f64;
    Ok(TheoreticalBounds {
        param: q / t,
        objective: 0.5 * GRADIENT_LIPSCHITZ * q / t,
        q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::empirical_embedding;
    use crate::kernel::KernelSpec;
    use crate::linalg::{dist, dot, norm_sq};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize, seed: u64) -> (RksFeatureMap, Dataset) {
        let map = RksFeatureMap::build(&KernelSpec::gaussian(1.5).unwrap(), 3, 40, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        (map, Dataset::from_rows(&rows, None, "rand").unwrap())
    }

    #[test]
    fn gradient_examples() {
        let (map, data) = setup(20, 1);
        let f = map.embed(data.row(0)).unwrap();
        assert!(stochastic_gradient(f.as_slice(), &f).unwrap().iter().all(|&g| g == 0.0));
        let g = stochastic_gradient(&vec![0.0; f.len()], &f).unwrap();
        assert!(g.iter().zip(f.as_slice()).all(|(a, b)| *a == -b));
        assert!(stochastic_gradient(&[0.0], &f).is_err());

        // averaging over the dataset gives w − μ_n
        let mu = empirical_embedding(&map, &data).unwrap();
        let w: Vec<f64> = (0..f.len()).map(|i| (i as f64 * 0.37).sin() * 0.1).collect();
        let mut avg = vec![0.0; w.len()];
        for row in data.rows() {
            let g = stochastic_gradient(&w, &map.embed(row).unwrap()).unwrap();
            avg.iter_mut().zip(&g).for_each(|(a, b)| *a += b / data.n() as f64);
        }
        for ((a, wi), mi) in avg.iter().zip(&w).zip(mu.weights()) {
            assert!((a - (wi - mi)).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_examples() {
        let w = [0.3, 0.4];
        assert_eq!(project_ball(&w, 1.0).unwrap(), w.to_vec());
        let w = [1.2, 1.6];
        let p = project_ball(&w, 1.0).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        assert!(project_ball(&[f64::NAN], 1.0).is_err());
        assert!(project_ball(&[1.0], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn projection_is_nonexpanding(
            u in prop::collection::vec(-3.0f64..3.0, 6),
            v in prop::collection::vec(-3.0f64..3.0, 6),
            radius in 0.1f64..2.0,
        ) {
            let pu = project_ball(&u, radius).unwrap();
            let pv = project_ball(&v, radius).unwrap();
            prop_assert!(norm(&pu) <= radius * (1.0 + 1e-12));
            prop_assert!(dist(&pu, &pv) <= dist(&u, &v) + 1e-12);
        }
    }

    #[test]
    fn first_steps_follow_closed_form() {
        let (map, data) = setup(2, 3);
        let cfg = SgdConfig::with_iterations(2, 0);
        let a = map.embed(data.row(0)).unwrap();
        let b = map.embed(data.row(1)).unwrap();
        let w1 = ModelState::zero(&map);
        let w2 = sgd_step(w1, &a, &cfg).unwrap();
        assert_eq!(w2.weights(), a.as_slice());
        assert_eq!(w2.iteration(), 2);
        let w3 = sgd_step(w2, &b, &cfg).unwrap();
        for ((w, x), y) in w3.weights().iter().zip(a.as_slice()).zip(b.as_slice()) {
            assert!((w - (x + y) / 2.0).abs() < 1e-15);
        }
        assert_eq!(w3.iteration(), 3);
    }

    #[test]
    fn step_rejects_bad_inputs() {
        let (map, data) = setup(1, 3);
        let f = map.embed(data.row(0)).unwrap();
        let bad = SgdConfig::with_iterations(1, 0).theta(0.5);
        assert!(sgd_step(ModelState::zero(&map), &f, &bad).is_err());
        let short = FeatureVector::clone(&f);
        let other = RksFeatureMap::build(&KernelSpec::gaussian(1.0).unwrap(), 3, 7, 0).unwrap();
        assert!(sgd_step(ModelState::zero(&other), &short, &SgdConfig::with_iterations(1, 0)).is_err());
    }

    #[test]
    fn running_mean_of_the_sampled_sequence() {
        let (map, data) = setup(50, 4);
        let cfg = SgdConfig::with_iterations(300, 21);
        let mut mean = vec![0.0; map.feature_dim()];
        let mut count = 0.0;
        let mut projections = 0;
        let w = run_sgd_with(&cfg, &data, &map, |snap| {
            let f = map.embed(data.row(snap.sample)).unwrap();
            count += 1.0;
            mean.iter_mut().zip(f.as_slice()).for_each(|(m, x)| *m += (x - *m) / count);
            projections += usize::from(snap.projected);
            assert!(norm(snap.state.weights()) <= 1.0 + 1e-12);
            Ok(())
        })
        .unwrap();
        assert_eq!(projections, 0);
        assert_eq!(w.iteration(), 301);
        for (a, b) in w.weights().iter().zip(&mean) {
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
        }
    }

    #[test]
    fn one_point_dataset_is_a_fixed_point() {
        let (map, data) = setup(1, 5);
        let f = map.embed(data.row(0)).unwrap();
        let cfg = SgdConfig::with_iterations(25, 0);
        run_sgd_with(&cfg, &data, &map, |snap| {
            for (a, b) in snap.state.weights().iter().zip(f.as_slice()) {
                assert!((a - b).abs() < 1e-14);
            }
            Ok(())
        })
        .unwrap();
    }

    #[test]
    fn full_pass_without_replacement_recovers_empirical_mean() {
        let (map, data) = setup(64, 6);
        let cfg = SgdConfig::with_iterations(64, 2).sampling(SamplingMode::WithoutReplacement);
        let w = run_sgd(&cfg, &data, &map).unwrap();
        let mu = empirical_embedding(&map, &data).unwrap();
        assert!(dist(w.weights(), mu.weights()) < 1e-10);

        let too_long = SgdConfig::with_iterations(65, 2).sampling(SamplingMode::WithoutReplacement);
        assert!(run_sgd(&too_long, &data, &map).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let (map, data) = setup(40, 7);
        let cfg = SgdConfig::with_iterations(100, 13);
        let a = run_sgd(&cfg, &data, &map).unwrap();
        let b = run_sgd(&cfg, &data, &map).unwrap();
        let bits = |m: &ModelState| m.weights().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let c = run_sgd(&SgdConfig::with_iterations(100, 14), &data, &map).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn large_theta_engages_projection_but_stays_in_ball() {
        let (map, data) = setup(30, 8);
        let cfg = SgdConfig::with_iterations(200, 1).theta(3.0).ball_radius(0.5);
        let mut projected = 0;
        let w = run_sgd_with(&cfg, &data, &map, |s| {
            projected += usize::from(s.projected);
            assert!(norm(s.state.weights()) <= 0.5 + 1e-12);
            Ok(())
        })
        .unwrap();
        assert!(projected > 0);
        assert!(norm(w.weights()) <= 0.5 + 1e-12);
    }

    #[test]
    fn accuracy_plug_ins() {
        assert_eq!(iterations_for_accuracy(0.005, 1.0, AccuracyMode::Objective).unwrap(), 100);
        assert_eq!(iterations_for_accuracy(0.1, 1.0, AccuracyMode::Parameter).unwrap(), 100);
        assert_eq!(iterations_for_accuracy(0.5, 1.0, AccuracyMode::Objective).unwrap(), 1);
        assert_eq!(iterations_for_accuracy(0.003, 1.0, AccuracyMode::Objective).unwrap(), 167);
        assert_eq!(iterations_for_accuracy(10.0, 1.0, AccuracyMode::Parameter).unwrap(), 1);
        assert!(iterations_for_accuracy(0.0, 1.0, AccuracyMode::Objective).is_err());
        assert!(iterations_for_accuracy(0.1, -1.0, AccuracyMode::Objective).is_err());
        let cfg = SgdConfig::with_accuracy(0.005, AccuracyMode::Objective, 0);
        assert_eq!(cfg.total_iterations().unwrap(), 100);
    }

    #[test]
    fn bound_examples() {
        let b = theoretical_bounds(1, 1.0, 1.0).unwrap();
        assert_eq!((b.param, b.objective, b.q), (1.0, 0.5, 1.0));
        let b = theoretical_bounds(100, 1.0, 1.0).unwrap();
        assert!((b.param - 0.01).abs() < 1e-15 && (b.objective - 0.005).abs() < 1e-15);
        let b = theoretical_bounds(1, 1.0, 2.0).unwrap();
        assert!((b.q - 4.0 / 3.0).abs() < 1e-15);
        assert!(theoretical_bounds(1, 1.0, 0.5).is_err());
        assert!(theoretical_bounds(0, 1.0, 1.0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SgdConfig::with_iterations(0, 0).validate().is_err());
        assert!(SgdConfig::with_iterations(5, 0).theta(0.4).validate().is_err());
        assert!(SgdConfig::with_iterations(5, 0).ball_radius(0.0).validate().is_err());
        assert!(SgdConfig::with_accuracy(-1.0, AccuracyMode::Parameter, 0).validate().is_err());
        assert!(SgdConfig::with_iterations(5, 0).theta(0.51).validate().is_ok());
    }

    #[test]
    fn gradient_norm_is_bounded_on_the_ball() {
        let (map, data) = setup(10, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for row in data.rows() {
            let f = map.embed(row).unwrap();
            let mut w: Vec<f64> = (0..f.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            project_ball_in_place(&mut w, 1.0).unwrap();
            let g = stochastic_gradient(&w, &f).unwrap();
            assert!(norm_sq(&g).sqrt() <= norm(&w) + 1.0 + 1e-12);
            assert!(dot(&g, &g) <= 4.0 + 1e-12);
        }
    }
}
