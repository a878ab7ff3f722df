//! Sigmoid approximation benchmarks and their sequential variants.
//!
//! Agent h picks a grid value `a_h = k / C_h` at every step and is rewarded
//! for tracking a sigmoid schedule. In the sequential variants the value of
//! agent h−1 rescales the slope agent h has to track, which couples agents
//! inside a timestep. An episode covers `t = 0, 1, …, T` (T+1 steps).

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::mmdp::{validate_joint_action, EnvError, SeqMmdpEnv, StepOutcome};

pub const SLOPE_RANGE: f64 = 100.0;

/// `1 / (1 + e^{−s(t − p)})`.
pub fn sig(t: f64, s: f64, p: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-s * (t - p)))
}

/// Slope multiplier of agent `h` given the value chosen by agent `h − 1`.
pub fn alpha(h: usize, prev_action_value: f64) -> f64 {
    if h == 0 {
        1.0
    } else if prev_action_value >= 0.5 {
        10.0
    } else {
        0.1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmoidVariant {
    Plain,
    Seq,
    SeqMask,
    /// The given number of agents starting at index ⌊H/2⌋ are overridden by
    /// uniformly random grid values every step.
    SeqRobust(usize),
}

impl SigmoidVariant {
    pub fn name(self) -> alloc::string::String {
        match self {
            Self::Plain => "sigmoid".into(),
            Self::Seq => "seq".into(),
            Self::SeqMask => "seq-mask".into(),
            Self::SeqRobust(n) => alloc::format!("seq-robust-{n}"),
        }
    }

    /// Inverse of [`name`](Self::name).
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sigmoid" | "plain" => Some(Self::Plain),
            "seq" => Some(Self::Seq),
            "seq-mask" => Some(Self::SeqMask),
            _ => name
                .strip_prefix("seq-robust-")
                .and_then(|n| n.parse().ok())
                .map(Self::SeqRobust),
        }
    }

    fn is_sequential(self) -> bool {
        !matches!(self, Self::Plain)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmoidConfig {
    pub variant: SigmoidVariant,
    /// Number of choices per agent; its length is the number of agents H.
    pub choices: Vec<usize>,
    pub horizon: usize,
}

impl SigmoidConfig {
    pub fn new(variant: SigmoidVariant, h: usize, c: usize, horizon: usize) -> Self {
        Self {
            variant,
            choices: vec![c; h],
            horizon,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.choices.len()
    }

    /// Agents whose submitted actions are replaced at random.
    pub fn random_indices(&self) -> core::ops::Range<usize> {
        match self.variant {
            SigmoidVariant::SeqRobust(n) => {
                let start = self.n_agents() / 2;
                start..(start + n).min(self.n_agents())
            }
            _ => 0..0,
        }
    }

    fn validate(&self) -> Result<(), EnvError> {
        if self.choices.is_empty() || self.choices.iter().any(|&c| c < 1) || self.horizon == 0 {
            return Err(EnvError::Config("sigmoid needs H ≥ 1, C_h ≥ 1 and T ≥ 1"));
        }
        if let SigmoidVariant::SeqRobust(n) = self.variant {
            if n == 0 || self.n_agents() / 2 + n > self.n_agents() {
                return Err(EnvError::Config("robust agent indices exceed H"));
            }
        }
        Ok(())
    }
}

/// One sampled task: a slope and an inflection point per agent.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmoidInstance {
    pub slopes: Vec<f64>,
    pub inflections: Vec<f64>,
}

impl SigmoidInstance {
    /// Draws `s ~ U(−100, 100)` and `p ~ N(T/2, sd = T/4)` per agent. The
    /// masked variant pins every slope to 1.
    pub fn sample<R: Rng + ?Sized>(config: &SigmoidConfig, rng: &mut R) -> Self {
        let h = config.n_agents();
        let t = config.horizon as f64;
        let normal = Normal::new(t / 2.0, t / 4.0).expect("positive spread");
        let slopes = (0..h)
            .map(|_| match config.variant {
                SigmoidVariant::SeqMask => 1.0,
                _ => rng.random_range(-SLOPE_RANGE..SLOPE_RANGE),
            })
            .collect();
        let inflections = (0..h).map(|_| normal.sample(rng)).collect();
        Self { slopes, inflections }
    }
}

/// Reward of one step for already realized grid values.
pub fn reward(variant: SigmoidVariant, instance: &SigmoidInstance, t: usize, values: &[f64]) -> f64 {
    let t = t as f64;
    let mut r = 1.0;
    for (h, &a) in values.iter().enumerate() {
        let (s, p) = (instance.slopes[h], instance.inflections[h]);
        let factor = if variant.is_sequential() {
            let prev = if h == 0 { 0.0 } else { values[h - 1] };
            let y = sig(t, alpha(h, prev) * s, p);
            1.0 - libm::fabs(y - a).min(libm::fabs(1.0 - y - a))
        } else {
            1.0 - libm::fabs(sig(t, s, p) - a)
        };
        r *= factor;
    }
    r
}

/// Benchmark environment. `reset` samples a new instance; the random
/// overrides of the robust variant use a stream seeded at reset.
#[derive(Debug, Clone)]
pub struct SigmoidEnv {
    config: SigmoidConfig,
    instance: Option<SigmoidInstance>,
    t: Option<usize>,
    noise: ChaCha8Rng,
    realized: Vec<usize>,
}

impl SigmoidEnv {
    pub fn new(config: SigmoidConfig) -> Result<Self, EnvError> {
        config.validate()?;
        Ok(Self {
            realized: vec![0; config.n_agents()],
            config,
            instance: None,
            t: None,
            noise: ChaCha8Rng::seed_from_u64(0),
        })
    }

    pub fn config(&self) -> &SigmoidConfig {
        &self.config
    }

    pub fn instance(&self) -> Option<&SigmoidInstance> {
        self.instance.as_ref()
    }

    /// Action indices the reward was computed from in the last step. They
    /// differ from the submitted ones only at the robust indices.
    pub fn realized_actions(&self) -> &[usize] {
        &self.realized
    }

    pub fn action_value(&self, agent: usize, index: usize) -> f64 {
        index as f64 / self.config.choices[agent] as f64
    }

    /// Observation at step `t` for the current instance.
    pub fn state_at(&self, t: usize) -> Vec<f64> {
        let tn = t as f64 / self.config.horizon as f64;
        match (self.config.variant, &self.instance) {
            (SigmoidVariant::SeqMask, _) | (_, None) => {
                let mut s = vec![0.0; self.state_dim()];
                s[self.state_dim() - 1] = tn;
                s
            }
            (_, Some(inst)) => {
                let horizon = self.config.horizon as f64;
                inst.slopes
                    .iter()
                    .map(|s| s / SLOPE_RANGE)
                    .chain(inst.inflections.iter().map(|p| p / horizon))
                    .chain(core::iter::once(tn))
                    .collect()
            }
        }
    }

    /// Reward for submitted action indices at step `t`, without randomization.
    pub fn reward_for(&self, t: usize, joint_action: &[usize]) -> f64 {
        let instance = self.instance.as_ref().expect("reset before scoring");
        let values: Vec<f64> = joint_action
            .iter()
            .enumerate()
            .map(|(h, &a)| self.action_value(h, a))
            .collect();
        reward(self.config.variant, instance, t, &values)
    }

    /// Current step index, if an episode is running.
    pub fn time(&self) -> Option<usize> {
        self.t
    }

    /// Starts an episode on a given instance instead of a sampled one.
    pub fn reset_with(&mut self, instance: SigmoidInstance, noise_seed: u64) -> Vec<f64> {
        assert_eq!(instance.slopes.len(), self.config.n_agents());
        assert_eq!(instance.inflections.len(), self.config.n_agents());
        self.instance = Some(instance);
        self.noise = ChaCha8Rng::seed_from_u64(noise_seed);
        self.t = Some(0);
        self.state_at(0)
    }
}

impl SeqMmdpEnv for SigmoidEnv {
    fn action_sizes(&self) -> &[usize] {
        &self.config.choices
    }

    fn state_dim(&self) -> usize {
        match self.config.variant {
            SigmoidVariant::SeqMask => 1,
            _ => 2 * self.config.n_agents() + 1,
        }
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Result<Vec<f64>, EnvError> {
        let instance = SigmoidInstance::sample(&self.config, rng);
        let seed = rng.next_u64();
        Ok(self.reset_with(instance, seed))
    }

    fn step(&mut self, joint_action: &[usize]) -> Result<StepOutcome, EnvError> {
        let t = self.t.ok_or(EnvError::NotReset)?;
        if t > self.config.horizon {
            return Err(EnvError::StepAfterDone);
        }
        validate_joint_action(&self.config.choices, joint_action)?;
        self.realized.copy_from_slice(joint_action);
        for h in self.config.random_indices() {
            self.realized[h] = self.noise.random_range(0..self.config.choices[h]);
        }
        let realized = self.realized.clone();
        let r = self.reward_for(t, &realized);
        if !r.is_finite() {
            return Err(EnvError::NonFinite("sigmoid reward"));
        }
        self.t = Some(t + 1);
        Ok(StepOutcome {
            next_state: self.state_at(t + 1),
            reward: r,
            done: t == self.config.horizon,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig_examples() {
        assert_eq!(sig(4.2, 37.0, 4.2), 0.5);
        assert_eq!(sig(9.0, 0.0, 3.0), 0.5);
        assert!((sig(6.0, 1.0, 5.0) - 0.731_058_578_630_004_9).abs() < 1e-15);
    }

    #[test]
    fn alpha_cases() {
        assert_eq!(alpha(0, 0.9), 1.0);
        assert_eq!(alpha(2, 0.5), 10.0);
        assert_eq!(alpha(1, 0.4), 0.1);
    }

    #[test]
    fn plain_reward_is_one_on_target() {
        let inst = SigmoidInstance {
            slopes: vec![2.0, -1.0],
            inflections: vec![3.0, 4.0],
        };
        let values = [sig(2.0, 2.0, 3.0), sig(2.0, -1.0, 4.0)];
        assert!((reward(SigmoidVariant::Plain, &inst, 2, &values) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn seq_single_agent_is_symmetric() {
        let inst = SigmoidInstance {
            slopes: vec![0.7],
            inflections: vec![4.0],
        };
        for k in 0..10 {
            let a = k as f64 / 10.0;
            let r1 = reward(SigmoidVariant::Seq, &inst, 6, &[a]);
            let r2 = reward(SigmoidVariant::Seq, &inst, 6, &[1.0 - a]);
            assert!((r1 - r2).abs() < 1e-15);
        }
    }

    #[test]
    fn seq_hand_example() {
        let inst = SigmoidInstance {
            slopes: vec![1.0, 1.0],
            inflections: vec![5.0, 5.0],
        };
        assert_eq!(reward(SigmoidVariant::Seq, &inst, 5, &[0.5, 0.5]), 1.0);
    }

    #[test]
    fn mask_state_and_dims() {
        let mut env = SigmoidEnv::new(SigmoidConfig::new(SigmoidVariant::SeqMask, 5, 10, 10)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        env.reset(&mut rng).unwrap();
        assert_eq!(env.instance().unwrap().slopes, vec![1.0; 5]);
        for _ in 0..3 {
            env.step(&[0; 5]).unwrap();
        }
        assert_eq!(env.state_at(3), vec![0.3]);
        let seq = SigmoidEnv::new(SigmoidConfig::new(SigmoidVariant::Seq, 2, 10, 10)).unwrap();
        assert_eq!(seq.state_dim(), 5);
    }

    #[test]
    fn episode_has_t_plus_one_steps() {
        let mut env = SigmoidEnv::new(SigmoidConfig::new(SigmoidVariant::Seq, 3, 10, 10)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        env.reset(&mut rng).unwrap();
        let mut steps = 0;
        loop {
            steps += 1;
            if env.step(&[1, 2, 3]).unwrap().done {
                break;
            }
        }
        assert_eq!(steps, 11);
        assert_eq!(env.step(&[0, 0, 0]), Err(EnvError::StepAfterDone));
    }

    #[test]
    fn robust_indices() {
        let one = SigmoidConfig::new(SigmoidVariant::SeqRobust(1), 5, 10, 10);
        assert_eq!(one.random_indices(), 2..3);
        let two = SigmoidConfig::new(SigmoidVariant::SeqRobust(2), 10, 10, 10);
        assert_eq!(two.random_indices(), 5..7);
        assert!(SigmoidEnv::new(SigmoidConfig::new(SigmoidVariant::SeqRobust(2), 2, 10, 10)).is_err());
    }

    #[test]
    fn variant_names_round_trip() {
        for v in [
            SigmoidVariant::Plain,
            SigmoidVariant::Seq,
            SigmoidVariant::SeqMask,
            SigmoidVariant::SeqRobust(2),
        ] {
            assert_eq!(SigmoidVariant::from_name(&v.name()), Some(v));
        }
    }
}
