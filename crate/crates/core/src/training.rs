//! Training and evaluation loops shared by all learners and environments.
//!
//! Every run derives independent random streams from one seed, so a
//! (configuration, seed) pair fully determines its trajectory.

use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::baselines::{Ace, Saql, Vdn};
use crate::learner::{AgentLayout, Hyperparams, LearnError, Learner, LearnerKind};
use crate::mmdp::{run_episode, EnvError, Policy, ReplayBuffer, SeqMmdpEnv, Transition};
use crate::sadn::Sadn;

/// Purposes of the per-run random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init = 0,
    Contexts = 1,
    Exploration = 2,
    Replay = 3,
    Evaluation = 4,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

pub fn build_learner(kind: LearnerKind, layout: AgentLayout, hp: Hyperparams, seed: u64) -> Box<dyn Learner> {
    let mut rng = stream(seed, Stream::Init);
    match kind {
        LearnerKind::Sadn => Box::new(Sadn::new(layout, hp, &mut rng)),
        LearnerKind::Vdn => Box::new(Vdn::new(layout, hp, &mut rng)),
        LearnerKind::Saql => Box::new(Saql::new(layout, hp, &mut rng)),
        LearnerKind::Ace => Box::new(Ace::new(layout, hp, &mut rng)),
    }
}

/// ε = 0 policy of a learner.
pub struct GreedyPolicy<'a>(pub &'a dyn Learner);

impl Policy for GreedyPolicy<'_> {
    fn act(&mut self, state: &[f64], _rng: &mut dyn RngCore) -> Vec<usize> {
        self.0.greedy_actions(state)
    }
}

/// What an evaluation episode reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Score {
    /// Undiscounted sum of rewards (higher is better).
    Return,
    /// The environment's final episode metric, e.g. IGD (lower is better).
    Metric,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("environment: {0}")]
    Env(#[from] EnvError),
    #[error("learner: {0}")]
    Learn(#[from] LearnError),
    #[error("environment reports no episode metric")]
    NoMetric,
}

/// Runs `episodes` episodes without learning or replay writes and returns
/// one score per episode.
pub fn evaluate<E, P>(env: &mut E, policy: &mut P, episodes: usize, score: Score, rng: &mut dyn RngCore) -> Result<Vec<f64>, TrainError>
where
    E: SeqMmdpEnv + ?Sized,
    P: Policy + ?Sized,
{
    (0..episodes)
        .map(|_| {
            let summary = run_episode(env, policy, rng, None)?;
            match score {
                Score::Return => Ok(summary.total_return),
                Score::Metric => summary.metric.ok_or(TrainError::NoMetric),
            }
        })
        .collect()
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, libm::sqrt(var))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    pub total_steps: u64,
    /// Evaluate every this many environment steps (0: only at start and end).
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub score: Score,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoint {
    pub step: u64,
    /// Training episodes finished before this evaluation.
    pub episodes: u64,
    pub scores: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainSummary {
    pub evals: Vec<EvalPoint>,
    pub episodes: u64,
    pub updates: u64,
    pub skipped_updates: u64,
}

impl TrainSummary {
    pub fn final_eval(&self) -> Option<&EvalPoint> {
        self.evals.last()
    }
}

/// Greedy evaluation on a fixed instance stream: every evaluation point of a
/// seed sees the same instances.
pub fn evaluate_learner<E: SeqMmdpEnv + ?Sized>(
    env: &mut E,
    learner: &dyn Learner,
    settings: &TrainSettings,
    step: u64,
    episodes: u64,
) -> Result<EvalPoint, TrainError> {
    let mut rng = stream(settings.seed, Stream::Evaluation);
    let scores = evaluate(env, &mut GreedyPolicy(learner), settings.eval_episodes, settings.score, &mut rng)?;
    let (mean, std) = mean_std(&scores);
    Ok(EvalPoint {
        step,
        episodes,
        scores,
        mean,
        std,
    })
}

/// ε-greedy training with one learner update per environment step once the
/// replay buffer holds `warmup` transitions. `on_eval` sees every
/// evaluation point as soon as it is computed.
pub fn train<E, F>(
    env: &mut E,
    eval_env: &mut E,
    learner: &mut dyn Learner,
    settings: &TrainSettings,
    mut on_eval: F,
) -> Result<TrainSummary, TrainError>
where
    E: SeqMmdpEnv + ?Sized,
    F: FnMut(&EvalPoint),
{
    let hp = *learner.hyperparams();
    let schedule = hp.epsilon_schedule(settings.total_steps);
    let mut contexts = stream(settings.seed, Stream::Contexts);
    let mut explore = stream(settings.seed, Stream::Exploration);
    let mut replay_rng = stream(settings.seed, Stream::Replay);
    let mut buffer = ReplayBuffer::new(hp.buffer_capacity);
    let mut summary = TrainSummary::default();
    let warmup = hp.warmup.max(hp.batch_size);

    let mut record = |summary: &mut TrainSummary, learner: &dyn Learner, step: u64| -> Result<(), TrainError> {
        let point = evaluate_learner(eval_env, learner, settings, step, summary.episodes)?;
        on_eval(&point);
        summary.evals.push(point);
        Ok(())
    };

    record(&mut summary, learner, 0)?;
    let mut state = env.reset(&mut contexts)?;
    for step in 1..=settings.total_steps {
        let action = learner.select_actions(&state, schedule.value(step - 1), &mut explore);
        let outcome = env.step(&action)?;
        let done = outcome.done;
        buffer.push(Transition {
            state,
            joint_action: action,
            reward: outcome.reward,
            next_state: outcome.next_state.clone(),
            done,
        });
        state = if done {
            summary.episodes += 1;
            env.reset(&mut contexts)?
        } else {
            outcome.next_state
        };
        if buffer.len() >= warmup {
            let batch = buffer.sample(hp.batch_size, &mut replay_rng).expect("buffer past warmup");
            match learner.update(&batch) {
                Ok(_) => summary.updates += 1,
                Err(LearnError::NonFinite(what)) => {
                    log::warn!("step {step}: skipped update, non-finite {what}");
                    summary.skipped_updates += 1;
                }
                Err(e) => return Err(e.into()),
            }
        }
        let at_interval = settings.eval_interval > 0 && step % settings.eval_interval == 0;
        if at_interval || step == settings.total_steps {
            record(&mut summary, learner, step)?;
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::AgentOrder;
    use crate::mmdp::ConstantEnv;
    use alloc::vec;

    fn settings(total: u64) -> TrainSettings {
        TrainSettings {
            total_steps: total,
            eval_interval: 50,
            eval_episodes: 2,
            score: Score::Return,
            seed: 11,
        }
    }

    #[test]
    fn zero_steps_evaluates_once() {
        let mut env = ConstantEnv::new(0.5, 10, 2, vec![2, 3]).unwrap();
        let mut eval_env = env.clone();
        let layout = AgentLayout::new(2, vec![2, 3], AgentOrder::identity(2)).unwrap();
        let mut learner = build_learner(LearnerKind::Sadn, layout, Hyperparams::default(), 1);
        let summary = train(&mut env, &mut eval_env, learner.as_mut(), &settings(0), |_| {}).unwrap();
        assert_eq!(summary.evals.len(), 1);
        assert_eq!(summary.evals[0].mean, 5.0);
        assert_eq!(summary.evals[0].std, 0.0);
    }

    #[test]
    fn training_is_deterministic_and_updates_after_warmup() {
        let hp = Hyperparams {
            warmup: 40,
            ..Hyperparams::default()
        };
        let run = |kind| {
            let mut env = ConstantEnv::new(1.0, 7, 1, vec![2, 2]).unwrap();
            let mut eval_env = env.clone();
            let layout = AgentLayout::new(1, vec![2, 2], AgentOrder::reversed(2)).unwrap();
            let mut learner = build_learner(kind, layout, hp, 5);
            let s = train(&mut env, &mut eval_env, learner.as_mut(), &settings(120), |_| {}).unwrap();
            (s, learner.networks())
        };
        for kind in LearnerKind::ALL {
            let (a, na) = run(kind);
            let (b, nb) = run(kind);
            assert_eq!(a, b);
            assert_eq!(na, nb);
            assert_eq!(a.updates, 120 - 40 + 1);
            assert_eq!(a.evals.iter().map(|e| e.step).collect::<Vec<_>>(), vec![0, 50, 100, 120]);
        }
    }
}
