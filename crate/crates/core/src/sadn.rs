//! Sequential advantage decomposition learner.
//!
//! One advantage network per agent, fed the state and the one-hot actions of
//! every agent that chose before it, plus a state-value network with a lagged
//! target copy. The global advantage is the sum of the per-agent advantages
//! and is regressed onto the one-step TD error
//! `δ = r + γ·V_target(s')·(1 − done) − V(s)`. The value network descends
//! the same residual, `V(s) + Σ_i A_i − y`, so together they perform
//! Q-learning on `Q = V + Σ_i A_i`; since the greedy joint action has zero
//! advantage, `V(s)` tracks `max_a Q(s, a)`.
//!
//! Each advantage head reports `raw(a) − max_b raw(b)`, so the greedy action
//! of every agent has advantage exactly zero whatever the prefix. That makes
//! agent-by-agent greedy selection coincide with the argmax of
//! `V(s) + Σ_i A_i` over the full joint grid for any parameter values.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::learner::{
    argmax, check_batch, replace_networks, sequential_select, AgentLayout, Hyperparams, LearnError, Learner,
    LearnerKind, NamedNet, UpdateReport,
};
use crate::mmdp::Transition;
use crate::net::{Activation, Adam, Mlp, Scratch};

#[derive(Debug, Clone)]
pub struct Sadn {
    layout: AgentLayout,
    hp: Hyperparams,
    /// Indexed by choosing slot, not by environment agent.
    advantage_nets: Vec<Mlp>,
    value_net: Mlp,
    target_value_net: Mlp,
    advantage_opt: Adam,
    value_opt: Adam,
    updates: u64,
}

impl Sadn {
    pub fn new<R: Rng + ?Sized>(layout: AgentLayout, hp: Hyperparams, rng: &mut R) -> Self {
        let advantage_nets: Vec<Mlp> = (0..layout.n_agents())
            .map(|k| {
                Mlp::random(
                    layout.sequential_input_dim(k),
                    hp.hidden,
                    layout.slot_actions(k),
                    Activation::Relu,
                    rng,
                )
            })
            .collect();
        let value_net = Mlp::random(layout.state_dim, hp.hidden, 1, Activation::Relu, rng);
        Self::from_parts(layout, hp, advantage_nets, value_net)
    }

    /// Builds a learner around given networks (slot order). The target copy
    /// starts equal to `value_net`.
    pub fn from_parts(layout: AgentLayout, hp: Hyperparams, advantage_nets: Vec<Mlp>, value_net: Mlp) -> Self {
        assert_eq!(advantage_nets.len(), layout.n_agents());
        for (k, net) in advantage_nets.iter().enumerate() {
            assert_eq!(net.input_dim(), layout.sequential_input_dim(k));
            assert_eq!(net.output_dim(), layout.slot_actions(k));
        }
        assert_eq!(value_net.input_dim(), layout.state_dim);
        assert_eq!(value_net.output_dim(), 1);
        let n_adv: usize = advantage_nets.iter().map(Mlp::num_params).sum();
        Self {
            advantage_opt: Adam::new(n_adv, hp.adam()),
            value_opt: Adam::new(value_net.num_params(), hp.adam()),
            target_value_net: value_net.clone(),
            layout,
            hp,
            advantage_nets,
            value_net,
            updates: 0,
        }
    }

    pub fn advantage_net(&self, slot: usize) -> &Mlp {
        &self.advantage_nets[slot]
    }

    pub fn advantage_net_mut(&mut self, slot: usize) -> &mut Mlp {
        &mut self.advantage_nets[slot]
    }

    pub fn value_net(&self) -> &Mlp {
        &self.value_net
    }

    pub fn value_net_mut(&mut self) -> &mut Mlp {
        &mut self.value_net
    }

    pub fn target_value_net(&self) -> &Mlp {
        &self.target_value_net
    }

    /// Advantages of every action for slot `k`, given the actions already
    /// chosen by earlier slots (read from `joint_action`).
    pub fn slot_advantages(&self, k: usize, state: &[f64], joint_action: &[usize]) -> Vec<f64> {
        let mut input = Vec::new();
        self.layout.sequential_input(k, state, joint_action, &mut input);
        let mut raw = self.advantage_nets[k].forward(&input).expect("sequential input width");
        normalize(&mut raw);
        raw
    }

    /// `A(s, a) = Σ_i A_i(s, a_{1:i-1}, a_i)` in choosing order.
    pub fn global_advantage(&self, state: &[f64], joint_action: &[usize]) -> f64 {
        (0..self.layout.n_agents())
            .map(|k| self.slot_advantages(k, state, joint_action)[joint_action[self.layout.order.slot(k)]])
            .sum()
    }

    pub fn value(&self, state: &[f64]) -> f64 {
        self.value_net.forward(state).expect("state width")[0]
    }

    pub fn target_value(&self, state: &[f64]) -> f64 {
        self.target_value_net.forward(state).expect("state width")[0]
    }

    /// One-step TD errors for a batch. `V(s)` comes from the current value
    /// network, `V(s')` from the target copy.
    pub fn td_targets(&self, batch: &[&Transition]) -> Vec<f64> {
        let mut scratch = Scratch::default();
        batch
            .iter()
            .map(|t| {
                let v_next = if t.done {
                    0.0
                } else {
                    self.target_value_net.run(&t.next_state, &mut scratch)[0]
                };
                let v = self.value_net.run(&t.state, &mut scratch)[0];
                t.reward + self.hp.gamma * v_next - v
            })
            .collect()
    }

    /// Regresses the summed advantage onto fixed targets with one Adam step.
    /// Returns the loss before the step.
    ///
    /// All advantage networks share one residual and are differentiated in a
    /// single pass; no gradient flows from one network into another.
    pub fn advantage_step(&mut self, batch: &[&Transition], deltas: &[f64]) -> Result<f64, LearnError> {
        self.advantage_regression(batch, deltas).map(|(loss, _)| loss)
    }

    /// [`Self::advantage_step`], also returning each sample's `Σ_i A_i` as it
    /// was before the step.
    fn advantage_regression(&mut self, batch: &[&Transition], deltas: &[f64]) -> Result<(f64, Vec<f64>), LearnError> {
        assert_eq!(batch.len(), deltas.len());
        if deltas.iter().any(|d| !d.is_finite()) {
            log::warn!("non-finite TD error, skipping batch");
            return Err(LearnError::NonFinite("TD error"));
        }
        let n = self.layout.n_agents();
        let scale = 2.0 / batch.len() as f64;
        let offsets: Vec<usize> = self
            .advantage_nets
            .iter()
            .scan(0, |acc, net| {
                let start = *acc;
                *acc += net.num_params();
                Some(start)
            })
            .collect();
        let mut grads = vec![0.0; self.advantage_opt.first_moment().len()];
        let mut scratches = vec![Scratch::default(); n];
        let mut inputs: Vec<Vec<f64>> = vec![Vec::new(); n];
        let mut out_grad = Vec::new();
        let mut loss = 0.0;
        let mut sums = Vec::with_capacity(batch.len());

        for (t, &delta) in batch.iter().zip(deltas) {
            let mut sum = 0.0;
            let mut picks = Vec::with_capacity(n);
            for k in 0..n {
                self.layout.sequential_input(k, &t.state, &t.joint_action, &mut inputs[k]);
                let raw = self.advantage_nets[k].run(&inputs[k], &mut scratches[k]);
                let best = argmax(raw);
                let chosen = t.joint_action[self.layout.order.slot(k)];
                sum += raw[chosen] - raw[best];
                picks.push((chosen, best));
            }
            sums.push(sum);
            let residual = sum - delta;
            loss += residual * residual;
            let g = scale * residual;
            for (k, &(chosen, best)) in picks.iter().enumerate() {
                if chosen == best {
                    continue;
                }
                out_grad.clear();
                out_grad.resize(self.layout.slot_actions(k), 0.0);
                out_grad[chosen] += g;
                out_grad[best] -= g;
                let start = offsets[k];
                let end = start + self.advantage_nets[k].num_params();
                self.advantage_nets[k].accumulate_gradient(&inputs[k], &mut scratches[k], &out_grad, &mut grads[start..end]);
            }
        }
        loss /= batch.len() as f64;
        if !loss.is_finite() {
            return Err(LearnError::NonFinite("advantage loss"));
        }
        self.advantage_opt
            .step_segments(self.advantage_nets.iter_mut().map(|net| net.params_mut()), &mut grads)?;
        Ok((loss, sums))
    }

    /// Regresses `V(s) + Σ_i A_i(s, a)` onto `r + γ·V_target(s')·(1 − done)`
    /// with the advantages held fixed.
    fn value_step(&mut self, batch: &[&Transition], advantage_sums: &[f64]) -> Result<f64, LearnError> {
        let mut scratch = Scratch::default();
        let targets: Vec<f64> = batch
            .iter()
            .map(|t| {
                let v_next = if t.done {
                    0.0
                } else {
                    self.target_value_net.run(&t.next_state, &mut scratch)[0]
                };
                t.reward + self.hp.gamma * v_next
            })
            .collect();
        let scale = 2.0 / batch.len() as f64;
        let mut grads = vec![0.0; self.value_net.num_params()];
        let mut loss = 0.0;
        for ((t, y), a) in batch.iter().zip(&targets).zip(advantage_sums) {
            let residual = self.value_net.run(&t.state, &mut scratch)[0] + a - y;
            loss += residual * residual;
            self.value_net
                .accumulate_gradient(&t.state, &mut scratch, &[scale * residual], &mut grads);
        }
        loss /= batch.len() as f64;
        if !loss.is_finite() {
            return Err(LearnError::NonFinite("value loss"));
        }
        self.value_opt.step(self.value_net.params_mut(), &mut grads)?;
        Ok(loss)
    }
}

/// `raw(a) − max raw` in place.
fn normalize(raw: &mut [f64]) {
    let best = raw[argmax(raw)];
    raw.iter_mut().for_each(|v| *v -= best);
}

impl Learner for Sadn {
    fn kind(&self) -> LearnerKind {
        LearnerKind::Sadn
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
            self.advantage_nets[k].run(input, &mut scratch).to_vec()
        })
    }

    /// Advantage regression and value regression, one Adam step each. The
    /// TD errors and advantage sums are computed before either network moves.
    fn update(&mut self, batch: &[&Transition]) -> Result<UpdateReport, LearnError> {
        check_batch(&self.layout, batch)?;
        let deltas = self.td_targets(batch);
        let (advantage_loss, sums) = self.advantage_regression(batch, &deltas)?;
        let value_loss = self.value_step(batch, &sums)?;
        self.updates += 1;
        if self.updates % self.hp.target_interval == 0 {
            self.target_value_net.copy_from(&self.value_net);
        }
        Ok(UpdateReport {
            losses: vec![advantage_loss, value_loss],
        })
    }

    fn update_count(&self) -> u64 {
        self.updates
    }

    fn networks(&self) -> Vec<NamedNet> {
        let mut out: Vec<NamedNet> = self
            .advantage_nets
            .iter()
            .enumerate()
            .map(|(k, net)| NamedNet {
                role: alloc::format!("advantage_{k}"),
                net: net.clone(),
            })
            .collect();
        out.push(NamedNet {
            role: String::from("value"),
            net: self.value_net.clone(),
        });
        out.push(NamedNet {
            role: String::from("target_value"),
            net: self.target_value_net.clone(),
        });
        out
    }

    fn load_networks(&mut self, nets: Vec<NamedNet>) -> Result<(), LearnError> {
        let roles: Vec<String> = self.networks().into_iter().map(|n| n.role).collect();
        let mut slots: Vec<&mut Mlp> = self.advantage_nets.iter_mut().collect();
        slots.push(&mut self.value_net);
        slots.push(&mut self.target_value_net);
        replace_networks(&mut slots, &roles, nets)
    }
}
