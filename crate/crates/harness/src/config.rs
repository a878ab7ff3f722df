//! Flat `key = value` run configuration with `include` directives.
//!
//! Lines are processed in order; `#` starts a comment, later assignments
//! override earlier ones, and `include <path>` splices another file in place
//! (relative paths resolve against the including file).

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use seqdac_core::learner::{AgentOrder, Hyperparams, LearnerKind};
use seqdac_core::moead::env::MoeadEnvConfig;
use seqdac_core::moead::ProblemKind;
use seqdac_core::sigmoid::{SigmoidConfig, SigmoidVariant};

use crate::error::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub enum EnvSpec {
    Sigmoid(SigmoidConfig),
    Moead(MoeadEnvConfig),
    Constant {
        reward: f64,
        horizon: usize,
        state_dim: usize,
        actions: Vec<usize>,
    },
    Matrix {
        actions: Vec<usize>,
        rewards: Vec<f64>,
    },
}

impl EnvSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Sigmoid(_) => "sigmoid",
            Self::Moead(_) => "moead",
            Self::Constant { .. } => "constant",
            Self::Matrix { .. } => "matrix",
        }
    }

    /// Canonical key/value lines describing the environment.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![("env", self.kind().to_string())];
        match self {
            Self::Sigmoid(c) => {
                out.push(("variant", c.variant.name()));
                out.push(("H", c.choices.len().to_string()));
                out.push(("C", join(&c.choices)));
                out.push(("T", c.horizon.to_string()));
            }
            Self::Moead(c) => {
                out.push(("problem", c.problem.name().to_string()));
                out.push(("m", c.m.to_string()));
                out.push(("D", c.d.to_string()));
                out.push(("N", c.population.to_string()));
                out.push(("T_episode", c.horizon.to_string()));
            }
            Self::Constant {
                reward,
                horizon,
                state_dim,
                actions,
            } => {
                out.push(("reward", reward.to_string()));
                out.push(("T", horizon.to_string()));
                out.push(("state_dim", state_dim.to_string()));
                out.push(("actions", join(actions)));
            }
            Self::Matrix { actions, rewards } => {
                out.push(("actions", join(actions)));
                out.push(("rewards", join(rewards)));
            }
        }
        out
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// How agents are ordered for sequential selection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OrderSpec {
    Identity,
    Reverse,
    Permutation(Vec<usize>),
}

impl OrderSpec {
    pub fn resolve(&self, n: usize) -> Result<AgentOrder, HarnessError> {
        match self {
            Self::Identity => Ok(AgentOrder::identity(n)),
            Self::Reverse => Ok(AgentOrder::reversed(n)),
            Self::Permutation(p) => AgentOrder::from_permutation(p.clone(), n)
                .map_err(|e| HarnessError::Config(format!("agent_order: {e}"))),
        }
    }

    fn text(&self) -> String {
        match self {
            Self::Identity => "identity".into(),
            Self::Reverse => "reverse".into(),
            Self::Permutation(p) => join(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub learner: LearnerKind,
    pub env: EnvSpec,
    pub agent_order: OrderSpec,
    pub total_steps: u64,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub seeds: Vec<u64>,
    pub hyperparams: Hyperparams,
}

const HYPER_KEYS: [&str; 11] = [
    "hidden",
    "learning_rate",
    "batch_size",
    "gamma",
    "target_interval",
    "grad_clip",
    "buffer_capacity",
    "warmup",
    "epsilon_start",
    "epsilon_end",
    "epsilon_fraction",
];

const ENV_KEYS: [&str; 14] = [
    "env", "variant", "H", "C", "T", "problem", "m", "D", "N", "T_episode", "reward", "state_dim", "actions", "rewards",
];

const RUN_KEYS: [&str; 7] = [
    "learner",
    "agent_order",
    "total_steps",
    "eval_interval",
    "eval_episodes",
    "seeds",
    "seed",
];

/// Raw assignments after include expansion, keyed by name.
#[derive(Debug, Default, Clone)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let mut raw = Self::default();
        let mut stack = HashSet::new();
        raw.load(path, &mut stack)?;
        Ok(raw)
    }

    pub fn parse_str(text: &str) -> Result<Self, HarnessError> {
        let mut raw = Self::default();
        raw.apply_text(text, None, &mut HashSet::new())?;
        Ok(raw)
    }

    fn load(&mut self, path: &Path, stack: &mut HashSet<PathBuf>) -> Result<(), HarnessError> {
        let canonical = path
            .canonicalize()
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        if !stack.insert(canonical.clone()) {
            return Err(HarnessError::Config(format!("include cycle through {}", path.display())));
        }
        let text = std::fs::read_to_string(&canonical)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        self.apply_text(&text, Some(&canonical), stack)?;
        stack.remove(&canonical);
        Ok(())
    }

    fn apply_text(&mut self, text: &str, origin: Option<&Path>, stack: &mut HashSet<PathBuf>) -> Result<(), HarnessError> {
        let name = origin.map_or_else(|| "<config>".to_string(), |p| p.display().to_string());
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let located = |msg: String| HarnessError::Config(format!("{name}:{}: {msg}", no + 1));
            if let Some(rest) = line.strip_prefix("include") {
                if rest.starts_with(char::is_whitespace) {
                    let target = PathBuf::from(rest.trim());
                    let target = match origin.and_then(Path::parent) {
                        Some(dir) if target.is_relative() => dir.join(target),
                        _ => target,
                    };
                    self.load(&target, stack)?;
                    continue;
                }
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| located(format!("expected `key = value`, found `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !HYPER_KEYS.contains(&key) && !ENV_KEYS.contains(&key) && !RUN_KEYS.contains(&key) {
                return Err(located(format!("unknown key `{key}`")));
            }
            if value.is_empty() {
                return Err(located(format!("`{key}` has no value")));
            }
            self.values.insert(key.to_string(), value.to_string());
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.values.insert(key.to_string(), value.to_string());
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, HarnessError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| HarnessError::Config(format!("invalid value `{v}` for `{key}`: {e}")))
            })
            .transpose()
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, HarnessError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|item| {
                        item.trim()
                            .parse::<T>()
                            .map_err(|e| HarnessError::Config(format!("invalid entry `{item}` in `{key}`: {e}")))
                    })
                    .collect()
            })
            .transpose()
    }

    fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T, HarnessError>
    where
        T::Err: std::fmt::Display,
    {
        self.parse(key)?
            .ok_or_else(|| HarnessError::Config(format!("missing required key `{key}`")))
    }

    pub fn env_spec(&self) -> Result<EnvSpec, HarnessError> {
        let kind = self.get("env").unwrap_or("sigmoid");
        let spec = match kind {
            "sigmoid" => {
                let variant_name = self.get("variant").unwrap_or("seq-mask");
                let variant = SigmoidVariant::from_name(variant_name)
                    .ok_or_else(|| HarnessError::Config(format!("unknown sigmoid variant `{variant_name}`")))?;
                let h: usize = self.parse("H")?.unwrap_or(5);
                let choices = match self.list::<usize>("C")?.unwrap_or_else(|| vec![10]) {
                    c if c.len() == 1 => vec![c[0]; h],
                    c if c.len() == h => c,
                    c => {
                        return Err(HarnessError::Config(format!(
                            "`C` lists {} counts but H = {h}",
                            c.len()
                        )))
                    }
                };
                let horizon = self.parse("T")?.unwrap_or(10);
                let mut config = SigmoidConfig::new(variant, h, 10, horizon);
                config.choices = choices;
                if h == 0 || horizon == 0 || config.choices.contains(&0) {
                    return Err(HarnessError::Config("sigmoid needs H, T and every C positive".into()));
                }
                if let SigmoidVariant::SeqRobust(n) = variant {
                    if h / 2 + n > h {
                        return Err(HarnessError::Config(format!("seq-robust-{n} needs more than {h} agents")));
                    }
                }
                EnvSpec::Sigmoid(config)
            }
            "moead" => {
                let defaults = MoeadEnvConfig::default();
                let problem_name = self.get("problem").unwrap_or("dtlz2");
                let problem = ProblemKind::from_name(problem_name)
                    .ok_or_else(|| HarnessError::Config(format!("unknown problem `{problem_name}`")))?;
                EnvSpec::Moead(MoeadEnvConfig {
                    problem,
                    m: self.parse("m")?.unwrap_or(defaults.m),
                    d: self.parse("D")?.unwrap_or(defaults.d),
                    population: self.parse("N")?.unwrap_or(defaults.population),
                    horizon: self.parse("T_episode")?.unwrap_or(defaults.horizon),
                })
            }
            "constant" => EnvSpec::Constant {
                reward: self.require("reward")?,
                horizon: self.require("T")?,
                state_dim: self.parse("state_dim")?.unwrap_or(1),
                actions: self
                    .list("actions")?
                    .ok_or_else(|| HarnessError::Config("missing required key `actions`".into()))?,
            },
            "matrix" => EnvSpec::Matrix {
                actions: self
                    .list("actions")?
                    .ok_or_else(|| HarnessError::Config("missing required key `actions`".into()))?,
                rewards: self
                    .list("rewards")?
                    .ok_or_else(|| HarnessError::Config("missing required key `rewards`".into()))?,
            },
            other => return Err(HarnessError::Config(format!("unknown env `{other}`"))),
        };
        // construct once so that invalid shapes surface as configuration errors
        crate::envs::build(&spec).map_err(|e| HarnessError::Config(format!("invalid environment: {e}")))?;
        Ok(spec)
    }

    pub fn hyperparams(&self) -> Result<Hyperparams, HarnessError> {
        let d = Hyperparams::default();
        let grad_clip = match self.get("grad_clip") {
            None => d.grad_clip,
            Some("none") => None,
            Some(_) => Some(self.require::<f64>("grad_clip")?),
        };
        let hp = Hyperparams {
            hidden: self.parse("hidden")?.unwrap_or(d.hidden),
            learning_rate: self.parse("learning_rate")?.unwrap_or(d.learning_rate),
            batch_size: self.parse("batch_size")?.unwrap_or(d.batch_size),
            gamma: self.parse("gamma")?.unwrap_or(d.gamma),
            target_interval: self.parse("target_interval")?.unwrap_or(d.target_interval),
            grad_clip,
            buffer_capacity: self.parse("buffer_capacity")?.unwrap_or(d.buffer_capacity),
            warmup: self.parse("warmup")?.unwrap_or(d.warmup),
            epsilon_start: self.parse("epsilon_start")?.unwrap_or(d.epsilon_start),
            epsilon_end: self.parse("epsilon_end")?.unwrap_or(d.epsilon_end),
            epsilon_fraction: self.parse("epsilon_fraction")?.unwrap_or(d.epsilon_fraction),
        };
        let bad = |what: &str| Err(HarnessError::Config(format!("invalid hyperparameter: {what}")));
        if hp.hidden == 0 || hp.batch_size == 0 || hp.buffer_capacity == 0 || hp.target_interval == 0 {
            return bad("hidden, batch_size, buffer_capacity and target_interval must be positive");
        }
        if hp.batch_size > hp.buffer_capacity {
            return bad("batch_size exceeds buffer_capacity");
        }
        if !(hp.learning_rate > 0.0 && hp.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..=1.0).contains(&hp.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        for (name, v) in [
            ("epsilon_start", hp.epsilon_start),
            ("epsilon_end", hp.epsilon_end),
            ("epsilon_fraction", hp.epsilon_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        if hp.grad_clip.is_some_and(|c| !(c > 0.0)) {
            return bad("grad_clip must be positive or `none`");
        }
        Ok(hp)
    }

    pub fn run_config(&self) -> Result<RunConfig, HarnessError> {
        let learner_name = self.get("learner").unwrap_or("sadn");
        let learner = LearnerKind::from_name(learner_name)
            .ok_or_else(|| HarnessError::Config(format!("unknown learner `{learner_name}`")))?;
        let env = self.env_spec()?;
        let agent_order = match self.get("agent_order").unwrap_or("identity") {
            "identity" => OrderSpec::Identity,
            "reverse" | "reversed" => OrderSpec::Reverse,
            _ => OrderSpec::Permutation(self.list("agent_order")?.expect("key present")),
        };
        agent_order.resolve(crate::envs::build(&env).expect("validated").n_agents())?;
        let seeds = match (self.get("seeds"), self.get("seed")) {
            (Some(_), _) => parse_seeds(self.get("seeds").expect("present"))?,
            (None, Some(_)) => vec![self.require("seed")?],
            (None, None) => vec![0],
        };
        let eval_episodes = self.parse("eval_episodes")?.unwrap_or(10);
        if eval_episodes == 0 {
            return Err(HarnessError::Config("eval_episodes must be positive".into()));
        }
        Ok(RunConfig {
            learner,
            env,
            agent_order,
            total_steps: self.parse("total_steps")?.unwrap_or(0),
            eval_interval: self.parse("eval_interval")?.unwrap_or(0),
            eval_episodes,
            seeds,
            hyperparams: self.hyperparams()?,
        })
    }
}

/// `0,1,5` or a half-open range `0..6`.
fn parse_seeds(text: &str) -> Result<Vec<u64>, HarnessError> {
    let bad = |e: String| HarnessError::Config(format!("invalid seeds `{text}`: {e}"));
    let seeds: Vec<u64> = if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|e| bad(format!("{e}")))?;
        let b: u64 = b.trim().parse().map_err(|e| bad(format!("{e}")))?;
        (a..b).collect()
    } else {
        text.split(',')
            .map(|s| s.trim().parse().map_err(|e| bad(format!("{e}"))))
            .collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(bad("no seeds".into()));
    }
    let unique: HashSet<_> = seeds.iter().collect();
    if unique.len() != seeds.len() {
        return Err(bad("duplicate seed".into()));
    }
    Ok(seeds)
}

/// Every hyperparameter as `key, value`, in a fixed order.
pub fn hyper_entries(hp: &Hyperparams) -> Vec<(&'static str, String)> {
    vec![
        ("hidden", hp.hidden.to_string()),
        ("learning_rate", hp.learning_rate.to_string()),
        ("batch_size", hp.batch_size.to_string()),
        ("gamma", hp.gamma.to_string()),
        ("target_interval", hp.target_interval.to_string()),
        ("grad_clip", hp.grad_clip.map_or_else(|| "none".to_string(), |c| c.to_string())),
        ("buffer_capacity", hp.buffer_capacity.to_string()),
        ("warmup", hp.warmup.to_string()),
        ("epsilon_start", hp.epsilon_start.to_string()),
        ("epsilon_end", hp.epsilon_end.to_string()),
        ("epsilon_fraction", hp.epsilon_fraction.to_string()),
    ]
}

pub fn is_hyper_key(key: &str) -> bool {
    HYPER_KEYS.contains(&key)
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        RawConfig::from_file(path)?.run_config()
    }

    pub fn parse_str(text: &str) -> Result<Self, HarnessError> {
        RawConfig::parse_str(text)?.run_config()
    }

    /// Canonical, fully resolved configuration text. Parsing it yields an
    /// equal configuration.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("learner", self.learner.name().to_string());
        for (k, v) in self.env.entries() {
            line(k, v);
        }
        line("agent_order", self.agent_order.text());
        line("total_steps", self.total_steps.to_string());
        line("eval_interval", self.eval_interval.to_string());
        line("eval_episodes", self.eval_episodes.to_string());
        line("seeds", join(&self.seeds));
        for (k, v) in hyper_entries(&self.hyperparams) {
            line(k, v);
        }
        out
    }
}
