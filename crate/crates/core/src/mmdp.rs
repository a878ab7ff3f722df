//! Contextual sequential multi-agent MDP contract, episode driver and replay.
//!
//! Environments always receive the full joint action in their own agent
//! indexing; the order in which agents *choose* is a property of the learner.
//! Each `reset` draws a fresh problem instance from the context distribution.

use alloc::vec::Vec;

use rand::seq::index;
use rand::{Rng, RngCore};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("step called after the episode finished; reset first")]
    StepAfterDone,
    #[error("step called before reset")]
    NotReset,
    #[error("joint action has {actual} entries, environment has {expected} agents")]
    Arity { expected: usize, actual: usize },
    #[error("agent {agent} chose action {action}, but only {size} actions exist")]
    InvalidAction { agent: usize, action: usize, size: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("degenerate instance: {0}")]
    Degenerate(&'static str),
    #[error("invalid environment configuration: {0}")]
    Config(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Environment side of a contextual sequential MMDP.
pub trait SeqMmdpEnv {
    fn action_sizes(&self) -> &[usize];

    fn state_dim(&self) -> usize;

    fn n_agents(&self) -> usize {
        self.action_sizes().len()
    }

    /// Samples a new instance from the context distribution and returns the
    /// initial state.
    fn reset(&mut self, rng: &mut dyn RngCore) -> Result<Vec<f64>, EnvError>;

    fn step(&mut self, joint_action: &[usize]) -> Result<StepOutcome, EnvError>;

    /// Task-specific quality of the finished episode (lower is better), if the
    /// environment has one. MOEA/D reports the final population's IGD.
    fn episode_metric(&self) -> Option<f64> {
        None
    }
}

pub fn validate_joint_action(action_sizes: &[usize], joint_action: &[usize]) -> Result<(), EnvError> {
    if joint_action.len() != action_sizes.len() {
        return Err(EnvError::Arity {
            expected: action_sizes.len(),
            actual: joint_action.len(),
        });
    }
    for (agent, (&action, &size)) in joint_action.iter().zip(action_sizes).enumerate() {
        if action >= size {
            return Err(EnvError::InvalidAction { agent, action, size });
        }
    }
    Ok(())
}

/// Chooses a joint action for a state.
pub trait Policy {
    fn act(&mut self, state: &[f64], rng: &mut dyn RngCore) -> Vec<usize>;
}

impl<F> Policy for F
where
    F: FnMut(&[f64], &mut dyn RngCore) -> Vec<usize>,
{
    fn act(&mut self, state: &[f64], rng: &mut dyn RngCore) -> Vec<usize> {
        self(state, rng)
    }
}

/// Uniform random joint actions.
#[derive(Debug, Clone)]
pub struct UniformPolicy {
    pub action_sizes: Vec<usize>,
}

impl Policy for UniformPolicy {
    fn act(&mut self, _state: &[f64], rng: &mut dyn RngCore) -> Vec<usize> {
        self.action_sizes.iter().map(|&n| rng.random_range(0..n)).collect()
    }
}

/// The same joint action at every step.
#[derive(Debug, Clone)]
pub struct FixedPolicy(pub Vec<usize>);

impl Policy for FixedPolicy {
    fn act(&mut self, _state: &[f64], _rng: &mut dyn RngCore) -> Vec<usize> {
        self.0.clone()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub joint_action: Vec<usize>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeSummary {
    pub rewards: Vec<f64>,
    pub actions: Vec<Vec<usize>>,
    pub total_return: f64,
    pub metric: Option<f64>,
}

impl EpisodeSummary {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Resets `env` and rolls `policy` until the episode ends.
///
/// Every transition is pushed to `buffer` when one is given. An out-of-range
/// action from the policy is reported before it reaches the environment.
pub fn run_episode<E, P>(
    env: &mut E,
    policy: &mut P,
    rng: &mut dyn RngCore,
    mut buffer: Option<&mut ReplayBuffer>,
) -> Result<EpisodeSummary, EnvError>
where
    E: SeqMmdpEnv + ?Sized,
    P: Policy + ?Sized,
{
    let mut state = env.reset(rng)?;
    let mut summary = EpisodeSummary::default();
    loop {
        let action = policy.act(&state, rng);
        validate_joint_action(env.action_sizes(), &action)?;
        let outcome = env.step(&action)?;
        summary.total_return += outcome.reward;
        summary.rewards.push(outcome.reward);
        if let Some(buf) = buffer.as_deref_mut() {
            buf.push(Transition {
                state: core::mem::take(&mut state),
                joint_action: action.clone(),
                reward: outcome.reward,
                next_state: outcome.next_state.clone(),
                done: outcome.done,
            });
        }
        summary.actions.push(action);
        state = outcome.next_state;
        if outcome.done {
            break;
        }
    }
    summary.metric = env.episode_metric();
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("replay buffer holds {have} transitions, batch needs {need}")]
pub struct Warmup {
    pub have: usize,
    pub need: usize,
}

/// Fixed-capacity ring of transitions with uniform batch sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            storage: Vec::new(),
            next: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn push(&mut self, transition: Transition) {
        if self.storage.len() < self.capacity {
            self.storage.push(transition);
        } else {
            self.storage[self.next] = transition;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.storage.iter()
    }

    /// `batch_size` distinct stored transitions, uniformly at random.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<&Transition>, Warmup> {
        if self.storage.len() < batch_size {
            return Err(Warmup {
                have: self.storage.len(),
                need: batch_size,
            });
        }
        Ok(index::sample(rng, self.storage.len(), batch_size)
            .into_iter()
            .map(|i| &self.storage[i])
            .collect())
    }
}

/// Constant reward for a fixed number of steps. The state is the elapsed
/// fraction of the episode followed by zeros.
#[derive(Debug, Clone)]
pub struct ConstantEnv {
    reward: f64,
    horizon: usize,
    state_dim: usize,
    action_sizes: Vec<usize>,
    t: Option<usize>,
}

impl ConstantEnv {
    pub fn new(reward: f64, horizon: usize, state_dim: usize, action_sizes: Vec<usize>) -> Result<Self, EnvError> {
        if horizon == 0 || state_dim == 0 || action_sizes.is_empty() || action_sizes.contains(&0) {
            return Err(EnvError::Config("constant env needs positive horizon, state and action sizes"));
        }
        if !reward.is_finite() {
            return Err(EnvError::NonFinite("reward"));
        }
        Ok(Self {
            reward,
            horizon,
            state_dim,
            action_sizes,
            t: None,
        })
    }

    fn state(&self, t: usize) -> Vec<f64> {
        let mut s = alloc::vec![0.0; self.state_dim];
        s[0] = t as f64 / self.horizon as f64;
        s
    }
}

impl SeqMmdpEnv for ConstantEnv {
    fn action_sizes(&self) -> &[usize] {
        &self.action_sizes
    }

    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn reset(&mut self, _rng: &mut dyn RngCore) -> Result<Vec<f64>, EnvError> {
        self.t = Some(0);
        Ok(self.state(0))
    }

    fn step(&mut self, joint_action: &[usize]) -> Result<StepOutcome, EnvError> {
        let t = self.t.ok_or(EnvError::NotReset)?;
        if t >= self.horizon {
            return Err(EnvError::StepAfterDone);
        }
        validate_joint_action(&self.action_sizes, joint_action)?;
        let t = t + 1;
        self.t = Some(t);
        Ok(StepOutcome {
            next_state: self.state(t),
            reward: self.reward,
            done: t == self.horizon,
        })
    }
}

/// One-step game with a single state `[1.0]` and a reward table over joint
/// actions, stored row-major in environment agent order.
#[derive(Debug, Clone)]
pub struct MatrixGame {
    action_sizes: Vec<usize>,
    rewards: Vec<f64>,
    running: bool,
}

impl MatrixGame {
    pub fn new(action_sizes: Vec<usize>, rewards: Vec<f64>) -> Result<Self, EnvError> {
        if action_sizes.is_empty() || action_sizes.contains(&0) {
            return Err(EnvError::Config("matrix game needs positive action counts"));
        }
        if rewards.len() != action_sizes.iter().product::<usize>() {
            return Err(EnvError::Config("reward table size must equal the joint action count"));
        }
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(EnvError::NonFinite("reward table"));
        }
        Ok(Self {
            action_sizes,
            rewards,
            running: false,
        })
    }

    pub fn reward(&self, joint_action: &[usize]) -> f64 {
        let index = joint_action
            .iter()
            .zip(&self.action_sizes)
            .fold(0, |acc, (&a, &n)| acc * n + a);
        self.rewards[index]
    }

    pub fn best_reward(&self) -> f64 {
        self.rewards.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl SeqMmdpEnv for MatrixGame {
    fn action_sizes(&self) -> &[usize] {
        &self.action_sizes
    }

    fn state_dim(&self) -> usize {
        1
    }

    fn reset(&mut self, _rng: &mut dyn RngCore) -> Result<Vec<f64>, EnvError> {
        self.running = true;
        Ok(alloc::vec![1.0])
    }

    fn step(&mut self, joint_action: &[usize]) -> Result<StepOutcome, EnvError> {
        if !self.running {
            return Err(EnvError::NotReset);
        }
        validate_joint_action(&self.action_sizes, joint_action)?;
        self.running = false;
        Ok(StepOutcome {
            next_state: alloc::vec![1.0],
            reward: self.reward(joint_action),
            done: true,
        })
    }
}
