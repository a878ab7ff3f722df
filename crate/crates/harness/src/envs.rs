//! Environment construction from a configuration.

use seqdac_core::mmdp::{ConstantEnv, MatrixGame, SeqMmdpEnv};
use seqdac_core::moead::env::MoeadEnv;
use seqdac_core::sigmoid::SigmoidEnv;
use seqdac_core::training::Score;

use crate::config::EnvSpec;

pub type BoxedEnv = Box<dyn SeqMmdpEnv + Send>;

pub fn build(spec: &EnvSpec) -> Result<BoxedEnv, String> {
    Ok(match spec {
        EnvSpec::Sigmoid(c) => Box::new(SigmoidEnv::new(c.clone()).map_err(|e| e.to_string())?),
        EnvSpec::Moead(c) => Box::new(MoeadEnv::new(c.clone()).map_err(|e| e.to_string())?),
        EnvSpec::Constant {
            reward,
            horizon,
            state_dim,
            actions,
        } => Box::new(ConstantEnv::new(*reward, *horizon, *state_dim, actions.clone()).map_err(|e| e.to_string())?),
        EnvSpec::Matrix { actions, rewards } => {
            Box::new(MatrixGame::new(actions.clone(), rewards.clone()).map_err(|e| e.to_string())?)
        }
    })
}

/// Evaluation score: IGD for MOEA/D (lower is better), return otherwise.
pub fn score(spec: &EnvSpec) -> Score {
    match spec {
        EnvSpec::Moead(_) => Score::Metric,
        _ => Score::Return,
    }
}

pub fn higher_is_better(spec: &EnvSpec) -> bool {
    score(spec) == Score::Return
}
