//! Pieces shared by every value-based learner: hyperparameters, the
//! exploration schedule, agent ordering and the sequential input wiring.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, RngCore};
use thiserror::Error;

use crate::mmdp::Transition;
use crate::net::{AdamConfig, Mlp, NetError};

/// Hyperparameters shared by SADN and the value-based baselines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub gamma: f64,
    pub target_interval: u64,
    pub grad_clip: Option<f64>,
    pub buffer_capacity: usize,
    /// Stored transitions required before the first update.
    pub warmup: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of total training steps over which epsilon anneals.
    pub epsilon_fraction: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            hidden: 64,
            learning_rate: 1e-4,
            batch_size: 32,
            gamma: 0.99,
            target_interval: 200,
            grad_clip: Some(10.0),
            buffer_capacity: 50_000,
            warmup: 1_000,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_fraction: 0.1,
        }
    }
}

impl Hyperparams {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            max_grad_norm: self.grad_clip,
            ..AdamConfig::default()
        }
    }

    pub fn epsilon_schedule(&self, total_steps: u64) -> EpsilonSchedule {
        EpsilonSchedule {
            start: self.epsilon_start,
            end: self.epsilon_end,
            anneal_steps: self.epsilon_fraction * total_steps as f64,
        }
    }
}

/// Linear anneal from `start` to `end`, then constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub anneal_steps: f64,
}

impl EpsilonSchedule {
    pub fn value(&self, step: u64) -> f64 {
        let step = step as f64;
        if self.anneal_steps <= 0.0 || step >= self.anneal_steps {
            return self.end;
        }
        self.start + (self.end - self.start) * (step / self.anneal_steps)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OrderError {
    #[error("agent order has {actual} entries, expected {expected}")]
    Length { expected: usize, actual: usize },
    #[error("agent order is not a permutation of 0..{0}")]
    NotPermutation(usize),
}

/// Order in which agents choose: `slot(k)` is the environment agent index
/// acting k-th.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentOrder(Vec<usize>);

impl AgentOrder {
    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn reversed(n: usize) -> Self {
        Self((0..n).rev().collect())
    }

    pub fn from_permutation(perm: Vec<usize>, n: usize) -> Result<Self, OrderError> {
        if perm.len() != n {
            return Err(OrderError::Length {
                expected: n,
                actual: perm.len(),
            });
        }
        let mut seen = alloc::vec![false; n];
        for &p in &perm {
            if p >= n || seen[p] {
                return Err(OrderError::NotPermutation(n));
            }
            seen[p] = true;
        }
        Ok(Self(perm))
    }

    pub fn slot(&self, k: usize) -> usize {
        self.0[k]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Shapes of a learner's inputs and outputs.
///
/// Sequential networks for slot `k` see the state followed by one-hot codes
/// of the actions already chosen by slots `0..k`, in choosing order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentLayout {
    pub state_dim: usize,
    pub action_sizes: Vec<usize>,
    pub order: AgentOrder,
}

impl AgentLayout {
    pub fn new(state_dim: usize, action_sizes: Vec<usize>, order: AgentOrder) -> Result<Self, LearnError> {
        if state_dim == 0 || action_sizes.is_empty() || action_sizes.contains(&0) {
            return Err(LearnError::Shape(String::from(
                "state dimension and every action count must be positive",
            )));
        }
        if order.len() != action_sizes.len() {
            return Err(OrderError::Length {
                expected: action_sizes.len(),
                actual: order.len(),
            }
            .into());
        }
        Ok(Self {
            state_dim,
            action_sizes,
            order,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.action_sizes.len()
    }

    /// Number of actions available to the agent acting in slot `k`.
    pub fn slot_actions(&self, k: usize) -> usize {
        self.action_sizes[self.order.slot(k)]
    }

    pub fn sequential_input_dim(&self, k: usize) -> usize {
        self.state_dim + (0..k).map(|j| self.slot_actions(j)).sum::<usize>()
    }

    /// Writes `state ⊕ onehot(a_slot0) ⊕ … ⊕ onehot(a_slot(k-1))` into `buf`.
    /// `joint_action` is in environment indexing; only the first `k` slots
    /// are read.
    pub fn sequential_input(&self, k: usize, state: &[f64], joint_action: &[usize], buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend_from_slice(state);
        for j in 0..k {
            let agent = self.order.slot(j);
            let size = self.action_sizes[agent];
            let start = buf.len();
            buf.resize(start + size, 0.0);
            buf[start + joint_action[agent]] = 1.0;
        }
    }

    pub fn validate_transition(&self, t: &Transition) -> Result<(), LearnError> {
        if t.state.len() != self.state_dim || t.next_state.len() != self.state_dim {
            return Err(LearnError::Shape(alloc::format!(
                "transition state has {} entries, learner expects {}",
                t.state.len(),
                self.state_dim
            )));
        }
        crate::mmdp::validate_joint_action(&self.action_sizes, &t.joint_action)
            .map_err(|e| LearnError::Shape(alloc::format!("{e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LearnerKind {
    Sadn,
    Vdn,
    Saql,
    Ace,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 4] = [LearnerKind::Sadn, LearnerKind::Vdn, LearnerKind::Saql, LearnerKind::Ace];

    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::Sadn => "sadn",
            LearnerKind::Vdn => "vdn",
            LearnerKind::Saql => "saql",
            LearnerKind::Ace => "ace",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnError {
    #[error("non-finite {0}; batch skipped")]
    NonFinite(&'static str),
    #[error("shape error: {0}")]
    Shape(String),
    #[error(transparent)]
    Order(#[from] OrderError),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Losses from one update, in learner-specific order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UpdateReport {
    pub losses: Vec<f64>,
}

/// A network plus the role it plays inside its learner.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedNet {
    pub role: String,
    pub net: Mlp,
}

pub trait Learner {
    fn kind(&self) -> LearnerKind;

    fn layout(&self) -> &AgentLayout;

    fn hyperparams(&self) -> &Hyperparams;

    /// ε-greedy joint action in environment indexing.
    fn select_actions(&self, state: &[f64], epsilon: f64, rng: &mut dyn RngCore) -> Vec<usize>;

    fn greedy_actions(&self, state: &[f64]) -> Vec<usize> {
        // ε = 0 never consults the rng
        self.select_actions(state, 0.0, &mut NoRng)
    }

    fn update(&mut self, batch: &[&Transition]) -> Result<UpdateReport, LearnError>;

    fn update_count(&self) -> u64;

    /// Every network, trainable and target, in a fixed order.
    fn networks(&self) -> Vec<NamedNet>;

    /// Replaces every network; shapes and roles must match `networks()`.
    fn load_networks(&mut self, nets: Vec<NamedNet>) -> Result<(), LearnError>;
}

struct NoRng;

impl RngCore for NoRng {
    fn next_u32(&mut self) -> u32 {
        unreachable!("greedy selection drew a random number")
    }

    fn next_u64(&mut self) -> u64 {
        unreachable!("greedy selection drew a random number")
    }

    fn fill_bytes(&mut self, _dst: &mut [u8]) {
        unreachable!("greedy selection drew a random number")
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn max_value(values: &[f64]) -> f64 {
    values[argmax(values)]
}

/// Sequential ε-greedy selection. `scores(k, input)` returns the values the
/// slot-`k` agent maximizes given its sequential input.
pub(crate) fn sequential_select<F>(
    layout: &AgentLayout,
    state: &[f64],
    epsilon: f64,
    rng: &mut dyn RngCore,
    mut scores: F,
) -> Vec<usize>
where
    F: FnMut(usize, &[f64]) -> Vec<f64>,
{
    let n = layout.n_agents();
    let mut joint = alloc::vec![0usize; n];
    let mut input = Vec::with_capacity(layout.sequential_input_dim(n - 1));
    for k in 0..n {
        let agent = layout.order.slot(k);
        let explore = epsilon > 0.0 && rng.random::<f64>() < epsilon;
        joint[agent] = if explore {
            rng.random_range(0..layout.action_sizes[agent])
        } else {
            layout.sequential_input(k, state, &joint, &mut input);
            argmax(&scores(k, &input))
        };
    }
    joint
}

/// Checks replacement networks against the current ones and installs them.
pub(crate) fn replace_networks(current: &mut [&mut Mlp], roles: &[String], nets: Vec<NamedNet>) -> Result<(), LearnError> {
    if nets.len() != current.len() {
        return Err(LearnError::Shape(alloc::format!(
            "expected {} networks, got {}",
            current.len(),
            nets.len()
        )));
    }
    for ((slot, role), named) in current.iter().zip(roles).zip(&nets) {
        if &named.role != role {
            return Err(LearnError::Shape(alloc::format!(
                "network role `{}` where `{}` was expected",
                named.role,
                role
            )));
        }
        let n = &named.net;
        if n.input_dim() != slot.input_dim()
            || n.hidden_dim() != slot.hidden_dim()
            || n.output_dim() != slot.output_dim()
        {
            return Err(LearnError::Shape(alloc::format!(
                "network `{}` is {}x{}x{}, learner needs {}x{}x{}",
                role,
                n.input_dim(),
                n.hidden_dim(),
                n.output_dim(),
                slot.input_dim(),
                slot.hidden_dim(),
                slot.output_dim()
            )));
        }
    }
    for (slot, named) in current.iter_mut().zip(nets) {
        **slot = named.net;
    }
    Ok(())
}

pub(crate) fn check_batch(layout: &AgentLayout, batch: &[&Transition]) -> Result<(), LearnError> {
    if batch.is_empty() {
        return Err(LearnError::Shape(String::from("empty batch")));
    }
    batch.iter().try_for_each(|t| layout.validate_transition(t))
}
