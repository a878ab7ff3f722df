//! Value-based comparison learners: VDN, SAQL and ACE.
//!
//! VDN keeps one state-only Q network per agent and regresses their sum.
//! SAQL and ACE use the same sequential inputs as SADN (state plus one-hot
//! actions of earlier agents). SAQL trains every agent independently on the
//! team reward; ACE chains the agents inside a timestep, each one regressing
//! onto the best value its successor can reach.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::learner::{
    argmax, check_batch, max_value, replace_networks, sequential_select, AgentLayout, Hyperparams, LearnError,
    Learner, LearnerKind, NamedNet, UpdateReport,
};
use crate::mmdp::Transition;
use crate::net::{Activation, Adam, Mlp, Scratch};

/// Online networks, their target copies and one optimizer per network.
#[derive(Debug, Clone)]
struct QNets {
    online: Vec<Mlp>,
    target: Vec<Mlp>,
    opts: Vec<Adam>,
}

impl QNets {
    fn new<R: Rng + ?Sized>(shapes: &[(usize, usize)], hp: &Hyperparams, rng: &mut R) -> Self {
        let online: Vec<Mlp> = shapes
            .iter()
            .map(|&(input, output)| Mlp::random(input, hp.hidden, output, Activation::Relu, rng))
            .collect();
        Self::from_online(online, hp)
    }

    fn from_online(online: Vec<Mlp>, hp: &Hyperparams) -> Self {
        Self {
            target: online.clone(),
            opts: online.iter().map(|n| Adam::new(n.num_params(), hp.adam())).collect(),
            online,
        }
    }

    fn sync_targets(&mut self) {
        for (t, o) in self.target.iter_mut().zip(&self.online) {
            t.copy_from(o);
        }
    }

    fn named(&self, prefix: &str) -> Vec<NamedNet> {
        let online = self.online.iter().enumerate().map(|(k, net)| NamedNet {
            role: alloc::format!("{prefix}_{k}"),
            net: net.clone(),
        });
        let target = self.target.iter().enumerate().map(|(k, net)| NamedNet {
            role: alloc::format!("target_{prefix}_{k}"),
            net: net.clone(),
        });
        online.chain(target).collect()
    }

    fn load(&mut self, prefix: &str, nets: Vec<NamedNet>) -> Result<(), LearnError> {
        let roles: Vec<String> = self.named(prefix).into_iter().map(|n| n.role).collect();
        let mut slots: Vec<&mut Mlp> = self.online.iter_mut().chain(self.target.iter_mut()).collect();
        replace_networks(&mut slots, &roles, nets)
    }

    /// One Adam step on net `k` regressing `Q_k(input_b)[action_b]` onto
    /// `target_b`. Returns the mean squared error before the step.
    fn regress(&mut self, k: usize, inputs: &[Vec<f64>], actions: &[usize], targets: &[f64]) -> Result<f64, LearnError> {
        if targets.iter().any(|y| !y.is_finite()) {
            log::warn!("non-finite Q target, skipping batch");
            return Err(LearnError::NonFinite("Q target"));
        }
        let net = &self.online[k];
        let scale = 2.0 / inputs.len() as f64;
        let mut grads = vec![0.0; net.num_params()];
        let mut scratch = Scratch::default();
        let mut out_grad = vec![0.0; net.output_dim()];
        let mut loss = 0.0;
        for ((input, &a), &y) in inputs.iter().zip(actions).zip(targets) {
            let residual = net.run(input, &mut scratch)[a] - y;
            loss += residual * residual;
            out_grad.iter_mut().for_each(|g| *g = 0.0);
            out_grad[a] = scale * residual;
            net.accumulate_gradient(input, &mut scratch, &out_grad, &mut grads);
        }
        loss /= inputs.len() as f64;
        if !loss.is_finite() {
            return Err(LearnError::NonFinite("Q loss"));
        }
        self.opts[k].step(self.online[k].params_mut(), &mut grads)?;
        Ok(loss)
    }
}

fn bootstrap(t: &Transition, gamma: f64, next_value: f64) -> f64 {
    if t.done {
        t.reward
    } else {
        t.reward + gamma * next_value
    }
}

/// Additive joint value `Q(s, a) = Σ_i Q_i(s, a_i)`.
#[derive(Debug, Clone)]
pub struct Vdn {
    layout: AgentLayout,
    hp: Hyperparams,
    /// Indexed by environment agent.
    q: Vec<Mlp>,
    target_q: Vec<Mlp>,
    opt: Adam,
    updates: u64,
}

impl Vdn {
    pub fn new<R: Rng + ?Sized>(layout: AgentLayout, hp: Hyperparams, rng: &mut R) -> Self {
        let q: Vec<Mlp> = layout
            .action_sizes
            .iter()
            .map(|&n| Mlp::random(layout.state_dim, hp.hidden, n, Activation::Relu, rng))
            .collect();
        Self::from_nets(layout, hp, q)
    }

    pub fn from_nets(layout: AgentLayout, hp: Hyperparams, q: Vec<Mlp>) -> Self {
        assert_eq!(q.len(), layout.n_agents());
        for (net, &n) in q.iter().zip(&layout.action_sizes) {
            assert_eq!(net.input_dim(), layout.state_dim);
            assert_eq!(net.output_dim(), n);
        }
        Self {
            opt: Adam::new(q.iter().map(Mlp::num_params).sum(), hp.adam()),
            target_q: q.clone(),
            q,
            layout,
            hp,
            updates: 0,
        }
    }

    pub fn agent_values(&self, agent: usize, state: &[f64]) -> Vec<f64> {
        self.q[agent].forward(state).expect("state width")
    }

    pub fn joint_value(&self, state: &[f64], joint_action: &[usize]) -> f64 {
        joint_action
            .iter()
            .enumerate()
            .map(|(i, &a)| self.agent_values(i, state)[a])
            .sum()
    }

    /// `r + γ(1 − done)·Σ_i max Q_i^target(s', ·)` per transition.
    pub fn targets(&self, batch: &[&Transition]) -> Vec<f64> {
        let mut scratch = Scratch::default();
        batch
            .iter()
            .map(|t| {
                let next: f64 = if t.done {
                    0.0
                } else {
                    self.target_q
                        .iter()
                        .map(|net| max_value(net.run(&t.next_state, &mut scratch)))
                        .sum()
                };
                bootstrap(t, self.hp.gamma, next)
            })
            .collect()
    }
}

impl Learner for Vdn {
    fn kind(&self) -> LearnerKind {
        LearnerKind::Vdn
    }

    fn layout(&self) -> &AgentLayout {
        &self.layout
    }

    fn hyperparams(&self) -> &Hyperparams {
        &self.hp
    }

    fn select_actions(&self, state: &[f64], epsilon: f64, rng: &mut dyn RngCore) -> Vec<usize> {
        let mut scratch = Scratch::default();
        self.q
            .iter()
            .map(|net| {
                if epsilon > 0.0 && rng.random::<f64>() < epsilon {
                    rng.random_range(0..net.output_dim())
                } else {
                    argmax(net.run(state, &mut scratch))
                }
            })
            .collect()
    }

    fn update(&mut self, batch: &[&Transition]) -> Result<UpdateReport, LearnError> {
        check_batch(&self.layout, batch)?;
        let targets = self.targets(batch);
        if targets.iter().any(|y| !y.is_finite()) {
            log::warn!("non-finite VDN target, skipping batch");
            return Err(LearnError::NonFinite("VDN target"));
        }
        let n = self.layout.n_agents();
        let offsets: Vec<usize> = self
            .q
            .iter()
            .scan(0, |acc, net| {
                let s = *acc;
                *acc += net.num_params();
                Some(s)
            })
            .collect();
        let mut grads = vec![0.0; self.opt.first_moment().len()];
        let mut scratches = vec![Scratch::default(); n];
        let scale = 2.0 / batch.len() as f64;
        let mut loss = 0.0;
        for (t, y) in batch.iter().zip(&targets) {
            let mut sum = 0.0;
            for i in 0..n {
                sum += self.q[i].run(&t.state, &mut scratches[i])[t.joint_action[i]];
            }
            let residual = sum - y;
            loss += residual * residual;
            for i in 0..n {
                let mut out_grad = vec![0.0; self.layout.action_sizes[i]];
                out_grad[t.joint_action[i]] = scale * residual;
                let end = offsets[i] + self.q[i].num_params();
                self.q[i].accumulate_gradient(&t.state, &mut scratches[i], &out_grad, &mut grads[offsets[i]..end]);
            }
        }
        loss /= batch.len() as f64;
        if !loss.is_finite() {
            return Err(LearnError::NonFinite("VDN loss"));
        }
        self.opt
            .step_segments(self.q.iter_mut().map(|n| n.params_mut()), &mut grads)?;
        self.updates += 1;
        if self.updates % self.hp.target_interval == 0 {
            for (t, o) in self.target_q.iter_mut().zip(&self.q) {
                t.copy_from(o);
            }
        }
        Ok(UpdateReport { losses: vec![loss] })
    }

    fn update_count(&self) -> u64 {
        self.updates
    }

    fn networks(&self) -> Vec<NamedNet> {
        let online = self.q.iter().enumerate().map(|(i, net)| NamedNet {
            role: alloc::format!("q_{i}"),
            net: net.clone(),
        });
        let target = self.target_q.iter().enumerate().map(|(i, net)| NamedNet {
            role: alloc::format!("target_q_{i}"),
            net: net.clone(),
        });
        online.chain(target).collect()
    }

    fn load_networks(&mut self, nets: Vec<NamedNet>) -> Result<(), LearnError> {
        let roles: Vec<String> = self.networks().into_iter().map(|n| n.role).collect();
        let mut slots: Vec<&mut Mlp> = self.q.iter_mut().chain(self.target_q.iter_mut()).collect();
        replace_networks(&mut slots, &roles, nets)
    }
}

fn sequential_shapes(layout: &AgentLayout) -> Vec<(usize, usize)> {
    (0..layout.n_agents())
        .map(|k| (layout.sequential_input_dim(k), layout.slot_actions(k)))
        .collect()
}

fn check_sequential_nets(layout: &AgentLayout, nets: &[Mlp]) {
    assert_eq!(nets.len(), layout.n_agents());
    for (k, net) in nets.iter().enumerate() {
        assert_eq!(net.input_dim(), layout.sequential_input_dim(k));
        assert_eq!(net.output_dim(), layout.slot_actions(k));
    }
}

/// Independent sequential Q-learners: agent k sees earlier agents' actions
/// and learns from the team reward alone.
#[derive(Debug, Clone)]
pub struct Saql {
    layout: AgentLayout,
    hp: Hyperparams,
    nets: QNets,
    updates: u64,
}

impl Saql {
    pub fn new<R: Rng + ?Sized>(layout: AgentLayout, hp: Hyperparams, rng: &mut R) -> Self {
        let nets = QNets::new(&sequential_shapes(&layout), &hp, rng);
        Self {
            layout,
            hp,
            nets,
            updates: 0,
        }
    }

    /// Builds a learner around given networks (slot order); targets start equal.
    pub fn from_nets(layout: AgentLayout, hp: Hyperparams, nets: Vec<Mlp>) -> Self {
        check_sequential_nets(&layout, &nets);
        Self {
            nets: QNets::from_online(nets, &hp),
            layout,
            hp,
            updates: 0,
        }
    }

    pub fn q_net(&self, slot: usize) -> &Mlp {
        &self.nets.online[slot]
    }

    pub fn target_net(&self, slot: usize) -> &Mlp {
        &self.nets.target[slot]
    }

    /// Per-slot targets `r + γ(1 − done)·max Q_k^target(s' ⊕ â'_{<k}, ·)`
    /// where `â'` is the greedy joint action of the online nets at `s'`.
    pub fn targets(&self, batch: &[&Transition]) -> Vec<Vec<f64>> {
        let n = self.layout.n_agents();
        let mut scratch = Scratch::default();
        let mut input = Vec::new();
        let mut out = vec![Vec::with_capacity(batch.len()); n];
        for t in batch {
            if t.done {
                out.iter_mut().for_each(|col| col.push(t.reward));
                continue;
            }
            let greedy = self.greedy_actions(&t.next_state);
            for (k, col) in out.iter_mut().enumerate() {
                self.layout.sequential_input(k, &t.next_state, &greedy, &mut input);
                let next = max_value(self.nets.target[k].run(&input, &mut scratch));
                col.push(bootstrap(t, self.hp.gamma, next));
            }
        }
        out
    }
}

impl Learner for Saql {
    fn kind(&self) -> LearnerKind {
        LearnerKind::Saql
    }

    fn layout(&self) -> &AgentLayout {
        &self.layout
    }

    fn hyperparams(&self) -> &Hyperparams {
        &self.hp
    }

    fn select_actions(&self, state: &[f64], epsilon: f64, rng: &mut dyn RngCore) -> Vec<usize> {
        let mut scratch = Scratch::default();
        sequential_select(&self.layout, state, epsilon, rng, |k, input| {
            self.nets.online[k].run(input, &mut scratch).to_vec()
        })
    }

    fn update(&mut self, batch: &[&Transition]) -> Result<UpdateReport, LearnError> {
        check_batch(&self.layout, batch)?;
        let targets = self.targets(batch);
        if targets.iter().flatten().any(|y| !y.is_finite()) {
            log::warn!("non-finite SAQL target, skipping batch");
            return Err(LearnError::NonFinite("SAQL target"));
        }
        let mut losses = Vec::with_capacity(self.layout.n_agents());
        for k in 0..self.layout.n_agents() {
            let agent = self.layout.order.slot(k);
            let inputs: Vec<Vec<f64>> = batch
                .iter()
                .map(|t| {
                    let mut buf = Vec::new();
                    self.layout.sequential_input(k, &t.state, &t.joint_action, &mut buf);
                    buf
                })
                .collect();
            let actions: Vec<usize> = batch.iter().map(|t| t.joint_action[agent]).collect();
            losses.push(self.nets.regress(k, &inputs, &actions, &targets[k])?);
        }
        self.updates += 1;
        if self.updates % self.hp.target_interval == 0 {
            self.nets.sync_targets();
        }
        Ok(UpdateReport { losses })
    }

    fn update_count(&self) -> u64 {
        self.updates
    }

    fn networks(&self) -> Vec<NamedNet> {
        self.nets.named("q")
    }

    fn load_networks(&mut self, nets: Vec<NamedNet>) -> Result<(), LearnError> {
        self.nets.load("q", nets)
    }
}

/// Chained sequential Q-learning: within a timestep agent k regresses onto
/// the best value of agent k+1; the last agent bootstraps from the first
/// agent at the next state.
#[derive(Debug, Clone)]
pub struct Ace {
    layout: AgentLayout,
    hp: Hyperparams,
    nets: QNets,
    updates: u64,
}

impl Ace {
    pub fn new<R: Rng + ?Sized>(layout: AgentLayout, hp: Hyperparams, rng: &mut R) -> Self {
        let nets = QNets::new(&sequential_shapes(&layout), &hp, rng);
        Self {
            layout,
            hp,
            nets,
            updates: 0,
        }
    }

    pub fn from_nets(layout: AgentLayout, hp: Hyperparams, nets: Vec<Mlp>) -> Self {
        check_sequential_nets(&layout, &nets);
        Self {
            nets: QNets::from_online(nets, &hp),
            layout,
            hp,
            updates: 0,
        }
    }

    pub fn q_net(&self, slot: usize) -> &Mlp {
        &self.nets.online[slot]
    }

    /// Online values of slot `k` given the prefix taken from `joint_action`.
    pub fn slot_values(&self, k: usize, state: &[f64], joint_action: &[usize]) -> Vec<f64> {
        let mut input = Vec::new();
        self.layout.sequential_input(k, state, joint_action, &mut input);
        self.nets.online[k].forward(&input).expect("sequential input width")
    }

    /// Chain targets from the target networks, all computed before any
    /// regression: slot k < n−1 gets `max Q_{k+1}^target(s ⊕ a_{≤k}, ·)`,
    /// the last slot gets `r + γ(1 − done)·max Q_0^target(s', ·)`.
    pub fn targets(&self, batch: &[&Transition]) -> Vec<Vec<f64>> {
        let n = self.layout.n_agents();
        let mut scratch = Scratch::default();
        let mut input = Vec::new();
        let mut out = vec![Vec::with_capacity(batch.len()); n];
        for t in batch {
            for k in 0..n - 1 {
                self.layout.sequential_input(k + 1, &t.state, &t.joint_action, &mut input);
                out[k].push(max_value(self.nets.target[k + 1].run(&input, &mut scratch)));
            }
            let next = if t.done {
                0.0
            } else {
                max_value(self.nets.target[0].run(&t.next_state, &mut scratch))
            };
            out[n - 1].push(bootstrap(t, self.hp.gamma, next));
        }
        out
    }
}

impl Learner for Ace {
    fn kind(&self) -> LearnerKind {
        LearnerKind::Ace
    }

    fn layout(&self) -> &AgentLayout {
        &self.layout
    }

    fn hyperparams(&self) -> &Hyperparams {
        &self.hp
    }

    fn select_actions(&self, state: &[f64], epsilon: f64, rng: &mut dyn RngCore) -> Vec<usize> {
        let mut scratch = Scratch::default();
        sequential_select(&self.layout, state, epsilon, rng, |k, input| {
            self.nets.online[k].run(input, &mut scratch).to_vec()
        })
    }

    fn update(&mut self, batch: &[&Transition]) -> Result<UpdateReport, LearnError> {
        check_batch(&self.layout, batch)?;
        let targets = self.targets(batch);
        if targets.iter().flatten().any(|y| !y.is_finite()) {
            log::warn!("non-finite ACE target, skipping batch");
            return Err(LearnError::NonFinite("ACE target"));
        }
        let mut losses = Vec::with_capacity(self.layout.n_agents());
        for k in (0..self.layout.n_agents()).rev() {
            let agent = self.layout.order.slot(k);
            let inputs: Vec<Vec<f64>> = batch
                .iter()
                .map(|t| {
                    let mut buf = Vec::new();
                    self.layout.sequential_input(k, &t.state, &t.joint_action, &mut buf);
                    buf
                })
                .collect();
            let actions: Vec<usize> = batch.iter().map(|t| t.joint_action[agent]).collect();
            losses.push(self.nets.regress(k, &inputs, &actions, &targets[k])?);
        }
        losses.reverse();
        self.updates += 1;
        if self.updates % self.hp.target_interval == 0 {
            self.nets.sync_targets();
        }
        Ok(UpdateReport { losses })
    }

    fn update_count(&self) -> u64 {
        self.updates
    }

    fn networks(&self) -> Vec<NamedNet> {
        self.nets.named("q")
    }

    fn load_networks(&mut self, nets: Vec<NamedNet>) -> Result<(), LearnError> {
        self.nets.load("q", nets)
    }
}
