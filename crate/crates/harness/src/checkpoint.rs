//! Learner checkpoints: a text manifest plus one binary file per network.
//!
//! ```text
//! # schema=seqdac-checkpoint/1
//! learner = sadn
//! state_dim = 1
//! action_sizes = 10,10,10
//! agent_order = 0,1,2
//! hidden = 64
//! ...
//! net = advantage_0 advantage_0.net
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use seqdac_core::learner::{AgentLayout, AgentOrder, Learner, LearnerKind, NamedNet};
use seqdac_core::net::Mlp;
use seqdac_core::training::build_learner;

use crate::config::{hyper_entries, is_hyper_key, RawConfig};
use crate::error::HarnessError;

pub const MANIFEST: &str = "manifest.txt";
pub const SCHEMA: &str = "# schema=seqdac-checkpoint/1";

pub fn save(dir: &Path, learner: &dyn Learner) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir.display(), e))?;
    let layout = learner.layout();
    let mut manifest = String::new();
    let _ = writeln!(manifest, "{SCHEMA}");
    let _ = writeln!(manifest, "learner = {}", learner.kind().name());
    let _ = writeln!(manifest, "state_dim = {}", layout.state_dim);
    let _ = writeln!(manifest, "action_sizes = {}", join(&layout.action_sizes));
    let _ = writeln!(manifest, "agent_order = {}", join(layout.order.as_slice()));
    let _ = writeln!(manifest, "updates = {}", learner.update_count());
    for (k, v) in hyper_entries(learner.hyperparams()) {
        let _ = writeln!(manifest, "{k} = {v}");
    }
    for named in learner.networks() {
        let file = format!("{}.net", named.role);
        let path = dir.join(&file);
        fs::write(&path, named.net.to_bytes()).map_err(|e| HarnessError::io(path.display(), e))?;
        let _ = writeln!(manifest, "net = {} {file}", named.role);
    }
    let path = dir.join(MANIFEST);
    fs::write(&path, manifest).map_err(|e| HarnessError::io(path.display(), e))
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>, HarnessError> {
    value
        .split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|e| HarnessError::Config(format!("checkpoint `{key}`: {e}")))
        })
        .collect()
}

/// Rebuilds a learner with every network restored.
pub fn load(dir: &Path) -> Result<Box<dyn Learner>, HarnessError> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path)
        .map_err(|e| HarnessError::Config(format!("cannot read checkpoint {}: {e}", path.display())))?;
    let mut lines = text.lines();
    if lines.next() != Some(SCHEMA) {
        return Err(HarnessError::Config(format!("{} is not a {SCHEMA} manifest", path.display())));
    }
    let mut kind = None;
    let (mut state_dim, mut sizes, mut order) = (None, None, None);
    let mut hyper = String::new();
    let mut nets = Vec::new();
    for line in lines {
        let Some((key, value)) = line.split_once('=') else {
            return Err(HarnessError::Config(format!("malformed manifest line `{line}`")));
        };
        let (key, value) = (key.trim(), value.trim());
        match key {
            "learner" => {
                kind = Some(
                    LearnerKind::from_name(value)
                        .ok_or_else(|| HarnessError::Config(format!("unknown learner `{value}` in checkpoint")))?,
                )
            }
            "state_dim" => {
                state_dim = Some(
                    value
                        .parse::<usize>()
                        .map_err(|e| HarnessError::Config(format!("checkpoint state_dim: {e}")))?,
                )
            }
            "action_sizes" => sizes = Some(parse_list(key, value)?),
            "agent_order" => order = Some(parse_list(key, value)?),
            "updates" => {}
            "net" => {
                let (role, file) = value
                    .split_once(' ')
                    .ok_or_else(|| HarnessError::Config(format!("malformed net entry `{value}`")))?;
                let file_path = dir.join(file.trim());
                let bytes = fs::read(&file_path).map_err(|e| HarnessError::io(file_path.display(), e))?;
                let net = Mlp::from_bytes(&bytes)
                    .map_err(|e| HarnessError::Runtime(format!("{}: {e}", file_path.display())))?;
                nets.push(NamedNet {
                    role: role.to_string(),
                    net,
                });
            }
            k if is_hyper_key(k) => {
                let _ = writeln!(hyper, "{k} = {value}");
            }
            other => return Err(HarnessError::Config(format!("unknown manifest key `{other}`"))),
        }
    }
    let missing = |what: &str| HarnessError::Config(format!("checkpoint manifest lacks `{what}`"));
    let kind = kind.ok_or_else(|| missing("learner"))?;
    let sizes = sizes.ok_or_else(|| missing("action_sizes"))?;
    let n = sizes.len();
    let order = AgentOrder::from_permutation(order.ok_or_else(|| missing("agent_order"))?, n)
        .map_err(|e| HarnessError::Config(format!("checkpoint agent_order: {e}")))?;
    let layout = AgentLayout::new(state_dim.ok_or_else(|| missing("state_dim"))?, sizes, order)
        .map_err(|e| HarnessError::Config(format!("checkpoint layout: {e}")))?;
    let hp = RawConfig::parse_str(&hyper)?.hyperparams()?;
    let mut learner = build_learner(kind, layout, hp, 0);
    learner
        .load_networks(nets)
        .map_err(|e| HarnessError::Config(format!("checkpoint networks: {e}")))?;
    Ok(learner)
}
