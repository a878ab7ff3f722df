//! Reference computations shared by the integration tests. Everything here is
//! written against the raw parameter layout, not the library's forward pass.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use seqdac_core::learner::{AgentLayout, AgentOrder, Hyperparams};
use seqdac_core::net::{Activation, Mlp};
use seqdac_core::sadn::Sadn;

/// Forward pass from `w1 (hidden × in), b1, w2 (out × hidden), b2`.
pub fn forward(net: &Mlp, x: &[f64]) -> Vec<f64> {
    let (n_in, h, n_out) = (net.input_dim(), net.hidden_dim(), net.output_dim());
    assert_eq!(x.len(), n_in);
    let hidden: Vec<f64> = (0..h)
        .map(|j| {
            let z = net.b1()[j] + (0..n_in).map(|i| net.w1()[j * n_in + i] * x[i]).sum::<f64>();
            match net.activation() {
                Activation::Relu => z.max(0.0),
                Activation::Identity => z,
            }
        })
        .collect();
    (0..n_out)
        .map(|o| net.b2()[o] + (0..h).map(|j| net.w2()[o * h + j] * hidden[j]).sum::<f64>())
        .collect()
}

/// `state ⊕ onehot(a_order[0]) ⊕ … ⊕ onehot(a_order[k-1])`.
pub fn seq_input(state: &[f64], sizes: &[usize], order: &[usize], joint: &[usize], k: usize) -> Vec<f64> {
    let mut x = state.to_vec();
    for &agent in &order[..k] {
        let mut one_hot = vec![0.0; sizes[agent]];
        one_hot[joint[agent]] = 1.0;
        x.extend(one_hot);
    }
    x
}

/// Every joint action of the grid, in lexicographic order over `order`.
pub fn joint_grid(sizes: &[usize], order: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0; sizes.len()]];
    for &agent in order {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..sizes[agent]).map(move |a| {
                    let mut p = prefix.clone();
                    p[agent] = a;
                    p
                })
            })
            .collect();
    }
    out
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Random SADN: 2 or 3 agents with 2 to 4 actions each, a random agent
/// order and a 1 to 4 dimensional state. Returns `(net, sizes, order, state_dim)`.
pub fn random_sadn(rng: &mut ChaCha8Rng) -> (Sadn, Vec<usize>, Vec<usize>, usize) {
    let n = rng.random_range(2..=3);
    let sizes: Vec<usize> = (0..n).map(|_| rng.random_range(2..=4)).collect();
    let state_dim = rng.random_range(1..=4);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let layout = AgentLayout::new(
        state_dim,
        sizes.clone(),
        AgentOrder::from_permutation(order.clone(), n).unwrap(),
    )
    .unwrap();
    let hp = Hyperparams {
        hidden: 16,
        ..Hyperparams::default()
    };
    (Sadn::new(layout, hp, rng), sizes, order, state_dim)
}

/// `A_k` from the raw head: `raw(a) − max raw`.
pub fn oracle_advantage(sadn: &Sadn, sizes: &[usize], order: &[usize], state: &[f64], joint: &[usize], k: usize) -> f64 {
    let raw = forward(sadn.advantage_net(k), &seq_input(state, sizes, order, joint, k));
    let best = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    raw[joint[order[k]]] - best
}

pub fn oracle_q(sadn: &Sadn, sizes: &[usize], order: &[usize], state: &[f64], joint: &[usize]) -> f64 {
    forward(sadn.value_net(), state)[0]
        + (0..sizes.len())
            .map(|k| oracle_advantage(sadn, sizes, order, state, joint, k))
            .sum::<f64>()
}
