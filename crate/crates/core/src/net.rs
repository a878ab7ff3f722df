//! Fixed two-layer dense network used for every value and advantage function.
//!
//! Parameters live in one flat buffer laid out as
//! `[w1 (hidden x input), b1 (hidden), w2 (output x hidden), b2 (output)]`,
//! row-major. Gradients share that layout, which lets the optimizer and the
//! checkpoint codec treat a network as a plain `[f64]`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

/// Errors from network construction, evaluation, optimization and decoding.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("checkpoint truncated: needed {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("bad checkpoint magic")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u16),
    #[error("unknown activation tag {0}")]
    UnknownActivation(u8),
    #[error("checkpoint checksum mismatch")]
    ChecksumMismatch,
    #[error("checkpoint parameter count {actual} does not match dims (expected {expected})")]
    ParameterCount { expected: usize, actual: usize },
    #[error("{0} trailing bytes after checkpoint")]
    TrailingBytes(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    /// Linear hidden layer. Only useful for tests and closed-form checks.
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Identity => x,
        }
    }

    #[inline]
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Identity => 1,
        }
    }

    fn from_tag(tag: u8) -> Result<Self, NetError> {
        match tag {
            0 => Ok(Activation::Relu),
            1 => Ok(Activation::Identity),
            other => Err(NetError::UnknownActivation(other)),
        }
    }
}

/// Dense network `output = W2 · act(W1 · input + b1) + b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    input_dim: usize,
    hidden_dim: usize,
    output_dim: usize,
    activation: Activation,
    params: Vec<f64>,
}

/// Intermediate values of one forward pass, reused by the backward pass.
#[derive(Debug, Clone, Default)]
pub struct Scratch {
    pre: Vec<f64>,
    hidden: Vec<f64>,
    output: Vec<f64>,
    hidden_grad: Vec<f64>,
}

impl Scratch {
    pub fn output(&self) -> &[f64] {
        &self.output
    }
}

pub fn param_count(input_dim: usize, hidden_dim: usize, output_dim: usize) -> usize {
    hidden_dim * input_dim + hidden_dim + output_dim * hidden_dim + output_dim
}

impl Mlp {
    /// All-zero network. Panics if any dimension is zero.
    pub fn zeros(input_dim: usize, hidden_dim: usize, output_dim: usize, activation: Activation) -> Self {
        assert!(input_dim > 0 && hidden_dim > 0 && output_dim > 0, "network dimensions must be positive");
        Self {
            input_dim,
            hidden_dim,
            output_dim,
            activation,
            params: vec![0.0; param_count(input_dim, hidden_dim, output_dim)],
        }
    }

    /// Network with every parameter of a layer drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn random<R: Rng + ?Sized>(
        input_dim: usize,
        hidden_dim: usize,
        output_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let mut net = Self::zeros(input_dim, hidden_dim, output_dim, activation);
        let first = hidden_dim * input_dim + hidden_dim;
        let bound_1 = 1.0 / libm::sqrt(input_dim as f64);
        let bound_2 = 1.0 / libm::sqrt(hidden_dim as f64);
        for (idx, p) in net.params.iter_mut().enumerate() {
            let bound = if idx < first { bound_1 } else { bound_2 };
            *p = rng.random_range(-bound..=bound);
        }
        net
    }

    pub fn from_params(
        input_dim: usize,
        hidden_dim: usize,
        output_dim: usize,
        activation: Activation,
        params: Vec<f64>,
    ) -> Result<Self, NetError> {
        if input_dim == 0 || hidden_dim == 0 || output_dim == 0 {
            return Err(NetError::Dimension { expected: 1, actual: 0 });
        }
        let expected = param_count(input_dim, hidden_dim, output_dim);
        if params.len() != expected {
            return Err(NetError::ParameterCount {
                expected,
                actual: params.len(),
            });
        }
        Ok(Self {
            input_dim,
            hidden_dim,
            output_dim,
            activation,
            params,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden_dim * self.input_dim;
        let w2 = b1 + self.hidden_dim;
        let b2 = w2 + self.output_dim * self.hidden_dim;
        (b1, w2, b2)
    }

    pub fn w1(&self) -> &[f64] {
        &self.params[..self.offsets().0]
    }

    pub fn b1(&self) -> &[f64] {
        let (b1, w2, _) = self.offsets();
        &self.params[b1..w2]
    }

    pub fn w2(&self) -> &[f64] {
        let (_, w2, b2) = self.offsets();
        &self.params[w2..b2]
    }

    pub fn b2(&self) -> &[f64] {
        &self.params[self.offsets().2..]
    }

    pub fn b2_mut(&mut self) -> &mut [f64] {
        let start = self.offsets().2;
        &mut self.params[start..]
    }

    /// Copies another network's parameters into this one. Shapes must agree.
    pub fn copy_from(&mut self, other: &Mlp) {
        assert_eq!(self.params.len(), other.params.len());
        self.params.copy_from_slice(&other.params);
    }

    fn check_input(&self, input: &[f64]) -> Result<(), NetError> {
        if input.len() != self.input_dim {
            return Err(NetError::Dimension {
                expected: self.input_dim,
                actual: input.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NetError> {
        self.check_input(input)?;
        let mut scratch = Scratch::default();
        self.run(input, &mut scratch);
        Ok(scratch.output)
    }

    /// Forward pass into reusable buffers; returns the output slice.
    ///
    /// Panics if `input` does not have `input_dim` entries.
    pub fn run<'s>(&self, input: &[f64], scratch: &'s mut Scratch) -> &'s [f64] {
        assert_eq!(input.len(), self.input_dim, "network input dimension");
        let (b1_off, w2_off, b2_off) = self.offsets();
        let w1 = &self.params[..b1_off];
        let b1 = &self.params[b1_off..w2_off];
        let w2 = &self.params[w2_off..b2_off];
        let b2 = &self.params[b2_off..];

        scratch.pre.clear();
        scratch.hidden.clear();
        for (row, bias) in w1.chunks_exact(self.input_dim).zip(b1) {
            let mut acc = *bias;
            for (w, x) in row.iter().zip(input) {
                acc += w * x;
            }
            scratch.pre.push(acc);
            scratch.hidden.push(self.activation.apply(acc));
        }

        scratch.output.clear();
        for (row, bias) in w2.chunks_exact(self.hidden_dim).zip(b2) {
            let mut acc = *bias;
            for (w, h) in row.iter().zip(&scratch.hidden) {
                acc += w * h;
            }
            scratch.output.push(acc);
        }
        &scratch.output
    }

    /// Accumulates `d loss / d params` into `grads` given `d loss / d output`.
    ///
    /// `scratch` must hold the forward pass for the same `input`.
    pub fn accumulate_gradient(&self, input: &[f64], scratch: &mut Scratch, output_grad: &[f64], grads: &mut [f64]) {
        assert_eq!(output_grad.len(), self.output_dim, "output gradient dimension");
        assert_eq!(grads.len(), self.params.len(), "gradient buffer length");
        let (b1_off, w2_off, b2_off) = self.offsets();
        let w2 = &self.params[w2_off..b2_off];
        let h = self.hidden_dim;

        scratch.hidden_grad.clear();
        scratch.hidden_grad.resize(h, 0.0);
        {
            let (head, tail) = grads.split_at_mut(b2_off);
            let gw2 = &mut head[w2_off..];
            let gb2 = tail;
            for (o, &g) in output_grad.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                gb2[o] += g;
                let row = &w2[o * h..(o + 1) * h];
                let grow = &mut gw2[o * h..(o + 1) * h];
                for j in 0..h {
                    grow[j] += g * scratch.hidden[j];
                    scratch.hidden_grad[j] += g * row[j];
                }
            }
        }

        let n_in = self.input_dim;
        let (gw1, rest) = grads.split_at_mut(b1_off);
        let gb1 = &mut rest[..w2_off - b1_off];
        for j in 0..h {
            let d = scratch.hidden_grad[j] * self.activation.derivative(scratch.pre[j]);
            if d == 0.0 {
                continue;
            }
            gb1[j] += d;
            let grow = &mut gw1[j * n_in..(j + 1) * n_in];
            for (g, x) in grow.iter_mut().zip(input) {
                *g += d * x;
            }
        }
    }

    /// Gradient of `output_grad · output` with respect to every parameter.
    pub fn backward(&self, input: &[f64], output_grad: &[f64]) -> Result<Vec<f64>, NetError> {
        self.check_input(input)?;
        if output_grad.len() != self.output_dim {
            return Err(NetError::Dimension {
                expected: self.output_dim,
                actual: output_grad.len(),
            });
        }
        let mut scratch = Scratch::default();
        self.run(input, &mut scratch);
        let mut grads = vec![0.0; self.params.len()];
        self.accumulate_gradient(input, &mut scratch, output_grad, &mut grads);
        Ok(grads)
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        codec::encode(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NetError> {
        codec::decode(bytes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Global L2 norm the gradient is rescaled to before the moment update.
    pub max_grad_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_grad_norm: Some(10.0),
        }
    }
}

/// What one optimizer step did to the gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub grad_norm: f64,
    pub clipped: bool,
}

/// Adam with bias correction over a parameter group that may span several
/// networks. Gradients are passed concatenated in the same order as the
/// parameter segments.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    config: AdamConfig,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step_count: u64,
}

/// Rescales `grads` in place so its L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = libm::sqrt(grads.iter().map(|g| g * g).sum::<f64>());
    if norm > max_norm {
        let scale = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= scale);
    }
    norm
}

impl Adam {
    pub fn new(num_params: usize, config: AdamConfig) -> Self {
        Self {
            config,
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
            step_count: 0,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second_moment
    }

    pub fn step(&mut self, params: &mut [f64], grads: &mut [f64]) -> Result<StepReport, NetError> {
        self.step_segments(core::iter::once(params), grads)
    }

    /// One update over parameter segments whose concatenation matches `grads`.
    /// A non-finite gradient leaves parameters and optimizer state untouched.
    pub fn step_segments<'a, I>(&mut self, segments: I, grads: &mut [f64]) -> Result<StepReport, NetError>
    where
        I: IntoIterator<Item = &'a mut [f64]>,
    {
        if grads.len() != self.first_moment.len() {
            return Err(NetError::Dimension {
                expected: self.first_moment.len(),
                actual: grads.len(),
            });
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(NetError::NonFiniteGradient);
        }
        let (grad_norm, clipped) = match self.config.max_grad_norm {
            Some(max) => {
                let norm = clip_grad_norm(grads, max);
                (norm, norm > max)
            }
            None => (libm::sqrt(grads.iter().map(|g| g * g).sum::<f64>()), false),
        };

        self.step_count += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            ..
        } = self.config;
        let t = self.step_count as f64;
        let correction_1 = 1.0 - libm::pow(beta1, t);
        let correction_2 = 1.0 - libm::pow(beta2, t);

        let mut offset = 0;
        for segment in segments {
            let end = offset + segment.len();
            let (m, v, g) = (
                &mut self.first_moment[offset..end],
                &mut self.second_moment[offset..end],
                &grads[offset..end],
            );
            for i in 0..segment.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / correction_1;
                let v_hat = v[i] / correction_2;
                segment[i] -= learning_rate * m_hat / (libm::sqrt(v_hat) + epsilon);
            }
            offset = end;
        }
        debug_assert_eq!(offset, grads.len(), "parameter segments do not cover the gradient");
        Ok(StepReport { grad_norm, clipped })
    }
}

mod codec {
    use super::*;

    pub(super) const MAGIC: &[u8; 4] = b"SQNT";
    pub(super) const VERSION: u16 = 1;
    // magic, version, activation, reserved, three u32 dims, u64 count
    const HEADER_LEN: usize = 4 + 2 + 1 + 1 + 12 + 8;

    pub(super) fn encode(net: &Mlp) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + net.params.len() * 8 + 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(net.activation.tag());
        out.push(0);
        for dim in [net.input_dim, net.hidden_dim, net.output_dim] {
            out.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        out.extend_from_slice(&(net.params.len() as u64).to_le_bytes());
        for p in &net.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    fn need(bytes: &[u8], len: usize) -> Result<(), NetError> {
        if bytes.len() < len {
            Err(NetError::Truncated {
                needed: len,
                available: bytes.len(),
            })
        } else {
            Ok(())
        }
    }

    fn u32_at(bytes: &[u8], at: usize) -> usize {
        u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize
    }

    pub(super) fn decode(bytes: &[u8]) -> Result<Mlp, NetError> {
        need(bytes, HEADER_LEN)?;
        if &bytes[..4] != MAGIC {
            return Err(NetError::BadMagic);
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(NetError::UnsupportedVersion(version));
        }
        let activation = Activation::from_tag(bytes[6])?;
        let input_dim = u32_at(bytes, 8);
        let hidden_dim = u32_at(bytes, 12);
        let output_dim = u32_at(bytes, 16);
        let count = u64::from_le_bytes(bytes[20..28].try_into().unwrap()) as usize;
        let expected = param_count(input_dim, hidden_dim, output_dim);
        if count != expected {
            return Err(NetError::ParameterCount { expected, actual: count });
        }
        let body_end = HEADER_LEN + count * 8;
        need(bytes, body_end + 4)?;
        let stored = u32::from_le_bytes(bytes[body_end..body_end + 4].try_into().unwrap());
        if crc32fast::hash(&bytes[..body_end]) != stored {
            return Err(NetError::ChecksumMismatch);
        }
        if bytes.len() > body_end + 4 {
            return Err(NetError::TrailingBytes(bytes.len() - body_end - 4));
        }
        let params = bytes[HEADER_LEN..body_end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Mlp::from_params(input_dim, hidden_dim, output_dim, activation, params)
    }
}
