//! Four-agent MOEA/D configuration environment.
//!
//! One step is one generation. The joint action is (neighborhood size,
//! operator, F, adapt weights) in that environment order. The reward is the
//! triangle reward on the IGD of the population against the reference front.

use alloc::vec::Vec;

use rand::RngCore;

use super::indicators::{hypervolume, igd, mean_nearest_distance, non_dominated_ratio};
use super::reference::{column_max, reference_front};
use super::run::{Action, MoeadRun, RunSettings};
use super::{MoeadError, Problem, ProblemKind};
use crate::mmdp::{validate_joint_action, EnvError, SeqMmdpEnv, StepOutcome};

pub const N_FEATURES: usize = 22;
/// Hypervolume reference coordinate in normalized objective space.
pub const HV_REFERENCE: f64 = 2.0;
/// Window of the short-term feature statistics.
pub const RECENT_WINDOW: usize = 5;

/// Mean and population standard deviation (divide by the count).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, libm::sqrt(var))
}

/// Recorded HV, NDRatio and Dist values, one entry per observed generation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IndicatorHistory {
    pub hv: Vec<f64>,
    pub nd_ratio: Vec<f64>,
    pub dist: Vec<f64>,
}

impl IndicatorHistory {
    pub fn push(&mut self, hv: f64, nd_ratio: f64, dist: f64) {
        self.hv.push(hv);
        self.nd_ratio.push(nd_ratio);
        self.dist.push(dist);
    }

    pub fn len(&self) -> usize {
        self.hv.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hv.is_empty()
    }

    /// State vector in the row order of the feature table:
    /// `1/m, 1/D, t/T, N_stag/T`, the current indicators, their one-step
    /// changes, then mean/std over the last five and over all entries.
    pub fn features(&self, m: usize, d: usize, t: usize, horizon: usize, stagnation: usize) -> [f64; N_FEATURES] {
        assert!(!self.is_empty(), "features need at least one recorded generation");
        let series = [&self.hv, &self.nd_ratio, &self.dist];
        let mut out = [0.0; N_FEATURES];
        out[0] = 1.0 / m as f64;
        out[1] = 1.0 / d as f64;
        out[2] = t as f64 / horizon as f64;
        out[3] = stagnation as f64 / horizon as f64;
        for (k, s) in series.iter().enumerate() {
            let last = s.len() - 1;
            out[4 + k] = s[last];
            out[7 + k] = if last == 0 { 0.0 } else { s[last] - s[last - 1] };
            let recent = &s[s.len().saturating_sub(RECENT_WINDOW)..];
            let (mean5, std5) = mean_std(recent);
            out[10 + k] = mean5;
            out[13 + k] = std5;
            let (mean, std) = mean_std(s);
            out[16 + k] = mean;
            out[19 + k] = std;
        }
        out
    }
}

/// Progress-based reward: `½(p_new² − p²)` whenever the metric improves on
/// its running minimum, where `p = (f_0 − f)/f_0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleReward {
    initial: f64,
    best: f64,
    progress: f64,
}

impl TriangleReward {
    pub fn new(initial_metric: f64) -> Result<Self, EnvError> {
        if !initial_metric.is_finite() {
            return Err(EnvError::NonFinite("initial metric"));
        }
        if initial_metric <= 0.0 {
            return Err(EnvError::Degenerate("initial metric must be positive"));
        }
        Ok(Self {
            initial: initial_metric,
            best: initial_metric,
            progress: 0.0,
        })
    }

    /// Reward for a new metric value; also reports whether it improved.
    pub fn observe(&mut self, metric: f64) -> (f64, bool) {
        if metric < self.best {
            let p = (self.initial - metric) / self.initial;
            let r = 0.5 * (p * p - self.progress * self.progress);
            self.progress = p;
            self.best = metric;
            (r, true)
        } else {
            (0.0, false)
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn progress(&self) -> f64 {
        self.progress
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoeadEnvConfig {
    pub problem: ProblemKind,
    pub m: usize,
    pub d: usize,
    pub population: usize,
    pub horizon: usize,
}

impl Default for MoeadEnvConfig {
    fn default() -> Self {
        Self {
            problem: ProblemKind::Dtlz2,
            m: 3,
            d: 6,
            population: 100,
            horizon: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MoeadEnv {
    config: MoeadEnvConfig,
    problem: Problem,
    reference: Vec<Vec<f64>>,
    /// Per-objective maxima of the reference front, used to normalize.
    scale: Vec<f64>,
    run: Option<MoeadRun>,
    reward: Option<TriangleReward>,
    history: IndicatorHistory,
    stagnation: usize,
    metric: f64,
    t: usize,
}

impl MoeadEnv {
    pub fn new(config: MoeadEnvConfig) -> Result<Self, MoeadError> {
        if config.m > 3 {
            return Err(MoeadError::UnsupportedObjectives(config.m));
        }
        if config.horizon == 0 {
            return Err(MoeadError::Config("episode length must be positive"));
        }
        let problem = Problem::new(config.problem, config.m, config.d)?;
        let reference = reference_front(&problem);
        let scale = column_max(&reference);
        Ok(Self {
            config,
            problem,
            reference,
            scale,
            run: None,
            reward: None,
            history: IndicatorHistory::default(),
            stagnation: 0,
            metric: f64::NAN,
            t: 0,
        })
    }

    pub fn config(&self) -> &MoeadEnvConfig {
        &self.config
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn reference(&self) -> &[Vec<f64>] {
        &self.reference
    }

    pub fn run(&self) -> Option<&MoeadRun> {
        self.run.as_ref()
    }

    pub fn history(&self) -> &IndicatorHistory {
        &self.history
    }

    pub fn triangle(&self) -> Option<&TriangleReward> {
        self.reward.as_ref()
    }

    /// IGD of the current population.
    pub fn current_igd(&self) -> f64 {
        self.metric
    }

    pub fn generation(&self) -> usize {
        self.t
    }

    fn normalized(&self, objectives: &[Vec<f64>]) -> Vec<Vec<f64>> {
        objectives
            .iter()
            .map(|f| f.iter().zip(&self.scale).map(|(v, s)| v / s).collect())
            .collect()
    }

    /// Normalized hypervolume in `[0, 1]`, NDRatio and mean nearest-neighbor
    /// distance of a population, the last on normalized objectives.
    pub fn indicators(&self, objectives: &[Vec<f64>]) -> Result<(f64, f64, f64), MoeadError> {
        let norm = self.normalized(objectives);
        let reference = alloc::vec![HV_REFERENCE; self.config.m];
        let max_volume = libm::pow(HV_REFERENCE, self.config.m as f64);
        let hv = hypervolume(&norm, &reference)? / max_volume;
        Ok((hv, non_dominated_ratio(objectives), mean_nearest_distance(&norm)))
    }

    fn observe(&mut self) -> Result<Vec<f64>, EnvError> {
        let run = self.run.as_ref().ok_or(EnvError::NotReset)?;
        let objectives = run.objectives();
        self.metric = igd(&objectives, &self.reference).map_err(moead_to_env)?;
        let (hv, nd, dist) = self.indicators(&objectives).map_err(moead_to_env)?;
        self.history.push(hv, nd, dist);
        Ok(self.state())
    }

    fn state(&self) -> Vec<f64> {
        self.history
            .features(self.config.m, self.config.d, self.t, self.config.horizon, self.stagnation)
            .to_vec()
    }

    /// Starts an episode from an explicit run seed.
    pub fn reset_with_seed(&mut self, seed: u64) -> Result<Vec<f64>, EnvError> {
        let settings = RunSettings {
            population: self.config.population,
            ..RunSettings::default()
        };
        self.run = Some(MoeadRun::new(self.problem, settings, seed).map_err(moead_to_env)?);
        self.history = IndicatorHistory::default();
        self.stagnation = 0;
        self.t = 0;
        let state = self.observe()?;
        self.reward = Some(TriangleReward::new(self.metric)?);
        Ok(state)
    }
}

fn moead_to_env(e: MoeadError) -> EnvError {
    log::error!("MOEA/D run aborted: {e}");
    match e {
        MoeadError::NonFinite(what) => EnvError::NonFinite(what),
        MoeadError::Config(what) => EnvError::Config(what),
        _ => EnvError::Degenerate("MOEA/D run failed"),
    }
}

impl SeqMmdpEnv for MoeadEnv {
    fn action_sizes(&self) -> &[usize] {
        &Action::SIZES
    }

    fn state_dim(&self) -> usize {
        N_FEATURES
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Result<Vec<f64>, EnvError> {
        self.reset_with_seed(rng.next_u64())
    }

    fn step(&mut self, joint_action: &[usize]) -> Result<StepOutcome, EnvError> {
        if self.run.is_none() {
            return Err(EnvError::NotReset);
        }
        if self.t >= self.config.horizon {
            return Err(EnvError::StepAfterDone);
        }
        validate_joint_action(&Action::SIZES, joint_action)?;
        let action = Action::from_indices(joint_action).map_err(moead_to_env)?;
        let run = self.run.as_mut().expect("checked above");
        run.generation_step(&action).map_err(moead_to_env)?;
        self.t += 1;
        let objectives = run.objectives();
        let metric = igd(&objectives, &self.reference).map_err(moead_to_env)?;
        let triangle = self.reward.as_mut().ok_or(EnvError::NotReset)?;
        let (reward, improved) = triangle.observe(metric);
        self.stagnation = if improved { 0 } else { self.stagnation + 1 };
        let next_state = self.observe()?;
        Ok(StepOutcome {
            next_state,
            reward,
            done: self.t == self.config.horizon,
        })
    }

    fn episode_metric(&self) -> Option<f64> {
        self.run.as_ref().map(|_| self.metric)
    }
}
