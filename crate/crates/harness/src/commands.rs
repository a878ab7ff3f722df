//! Subcommand implementations. Each returns the tables it wrote so that
//! callers and tests can inspect them without re-reading files.

use std::fs::{self, File};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use seqdac_core::learner::AgentLayout;
use seqdac_core::mmdp::{run_episode, SeqMmdpEnv, UniformPolicy};
use seqdac_core::moead::env::MoeadEnvConfig;
use seqdac_core::moead::reference::reference_front;
use seqdac_core::moead::{Problem, ProblemKind};
use seqdac_core::sigmoid::{SigmoidConfig, SigmoidVariant};
use seqdac_core::training::{build_learner, mean_std, stream, train, GreedyPolicy, Stream, TrainSettings};

use crate::checkpoint;
use crate::config::{EnvSpec, RunConfig};
use crate::envs::{self, BoxedEnv};
use crate::error::HarnessError;
use crate::table::Table;

pub const TRAIN_SCHEMA: &str = "seqdac-train/1";
pub const FINAL_SCHEMA: &str = "seqdac-final/1";
pub const EVAL_SCHEMA: &str = "seqdac-eval/1";
pub const TRAJECTORY_SCHEMA: &str = "seqdac-trajectory/1";
pub const COMPARE_SCHEMA: &str = "seqdac-compare/1";
pub const BENCH_SCHEMA: &str = "seqdac-bench/1";
pub const FRONT_SCHEMA: &str = "seqdac-front/1";
pub const CONFIG_SNAPSHOT: &str = "config.txt";

fn runtime(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Runtime(e.to_string())
}

fn build_env(spec: &EnvSpec) -> Result<BoxedEnv, HarnessError> {
    envs::build(spec).map_err(HarnessError::Config)
}

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed-{seed}"))
}

/// Final evaluation of one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedResult {
    pub seed: u64,
    pub step: u64,
    pub eval_mean: f64,
    pub eval_std: f64,
    pub episodes: u64,
    pub updates: u64,
    pub skipped_updates: u64,
}

/// Trains every seed of `config`, writing
/// `config.txt`, `final.csv` and per seed `seed-<s>/{train.csv, checkpoint/}`.
/// Seeds run on up to `jobs` threads; results do not depend on `jobs`.
pub fn cmd_train(config: &RunConfig, out: &Path, jobs: usize) -> Result<Vec<SeedResult>, HarnessError> {
    fs::create_dir_all(out).map_err(|e| HarnessError::io(out.display(), e))?;
    let snapshot = out.join(CONFIG_SNAPSHOT);
    fs::write(&snapshot, config.to_text()).map_err(|e| HarnessError::io(snapshot.display(), e))?;

    let jobs = jobs.max(1);
    let mut results = Vec::with_capacity(config.seeds.len());
    for chunk in config.seeds.chunks(jobs) {
        let outcomes: Vec<Result<SeedResult, HarnessError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|&seed| scope.spawn(move || train_seed(config, seed, &seed_dir(out, seed))))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(runtime("training thread panicked"))))
                .collect()
        });
        for outcome in outcomes {
            results.push(outcome?);
        }
    }

    let mut table = Table::new(
        FINAL_SCHEMA,
        &["seed", "step", "eval_mean", "eval_std", "episodes", "updates", "skipped_updates"],
    );
    for r in &results {
        table.push(vec![
            r.seed.to_string(),
            r.step.to_string(),
            r.eval_mean.to_string(),
            r.eval_std.to_string(),
            r.episodes.to_string(),
            r.updates.to_string(),
            r.skipped_updates.to_string(),
        ]);
    }
    table.write(&out.join("final.csv"))?;
    Ok(results)
}

pub fn layout_for(config: &RunConfig, env: &dyn SeqMmdpEnv) -> Result<AgentLayout, HarnessError> {
    let order = config.agent_order.resolve(env.n_agents())?;
    AgentLayout::new(env.state_dim(), env.action_sizes().to_vec(), order).map_err(|e| HarnessError::Config(e.to_string()))
}

pub fn train_seed(config: &RunConfig, seed: u64, dir: &Path) -> Result<SeedResult, HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir.display(), e))?;
    let mut env = build_env(&config.env)?;
    let mut eval_env = build_env(&config.env)?;
    let layout = layout_for(config, env.as_ref())?;
    let mut learner = build_learner(config.learner, layout, config.hyperparams, seed);
    let settings = TrainSettings {
        total_steps: config.total_steps,
        eval_interval: config.eval_interval,
        eval_episodes: config.eval_episodes,
        score: envs::score(&config.env),
        seed,
    };

    // rows are streamed so that long runs can be watched while training
    let csv_path = dir.join("train.csv");
    let mut file = File::create(&csv_path).map_err(|e| HarnessError::io(csv_path.display(), e))?;
    let mut io_error = writeln!(file, "# schema={TRAIN_SCHEMA}\nstep,eval_mean,eval_std,episodes").err();
    let summary = train(env.as_mut(), eval_env.as_mut(), learner.as_mut(), &settings, |p| {
        log::info!(
            "{} seed {seed}: step {} eval {:.6} ± {:.6}",
            config.learner,
            p.step,
            p.mean,
            p.std
        );
        if io_error.is_none() {
            io_error = writeln!(file, "{},{},{},{}", p.step, p.mean, p.std, p.episodes)
                .and_then(|_| file.flush())
                .err();
        }
    })
    .map_err(runtime)?;
    if let Some(e) = io_error {
        return Err(HarnessError::io(csv_path.display(), e));
    }
    checkpoint::save(&dir.join("checkpoint"), learner.as_ref())?;
    let last = summary.final_eval().expect("training always evaluates at step 0");
    Ok(SeedResult {
        seed,
        step: last.step,
        eval_mean: last.mean,
        eval_std: last.std,
        episodes: summary.episodes,
        updates: summary.updates,
        skipped_updates: summary.skipped_updates,
    })
}

/// Looks for the run configuration two levels above a checkpoint directory
/// (`<run>/seed-<s>/checkpoint`).
pub fn env_for_checkpoint(checkpoint_dir: &Path) -> Result<EnvSpec, HarnessError> {
    let snapshot = checkpoint_dir
        .parent()
        .and_then(Path::parent)
        .map(|run| run.join(CONFIG_SNAPSHOT))
        .filter(|p| p.is_file())
        .ok_or_else(|| {
            HarnessError::Config(format!(
                "no environment given and no {CONFIG_SNAPSHOT} found above {}",
                checkpoint_dir.display()
            ))
        })?;
    Ok(RunConfig::from_file(&snapshot)?.env)
}

/// Greedy evaluation of a checkpoint. Rows: one per episode, then `mean`
/// and `std` (population) rows.
pub fn cmd_eval(
    checkpoint_dir: &Path,
    spec: &EnvSpec,
    episodes: usize,
    seed: u64,
    trajectory: Option<&Path>,
) -> Result<Table, HarnessError> {
    if episodes == 0 {
        return Err(HarnessError::Config("episodes must be positive".into()));
    }
    let learner = checkpoint::load(checkpoint_dir)?;
    let mut env = build_env(spec)?;
    let layout = learner.layout();
    if layout.state_dim != env.state_dim() || layout.action_sizes != env.action_sizes() {
        return Err(HarnessError::Config(format!(
            "checkpoint expects state_dim {} with action sizes {:?}, environment has state_dim {} with action sizes {:?}",
            layout.state_dim,
            layout.action_sizes,
            env.state_dim(),
            env.action_sizes()
        )));
    }
    let mut rng = stream(seed, Stream::Evaluation);
    let mut table = Table::new(EVAL_SCHEMA, &["row", "episode", "return", "metric", "steps"]);
    let n = env.n_agents();
    let mut header = vec!["episode".to_string(), "step".to_string(), "reward".to_string()];
    header.extend((1..=n).map(|i| format!("a_{i}")));
    let mut traj = Table {
        schema: TRAJECTORY_SCHEMA.to_string(),
        header,
        rows: Vec::new(),
    };
    let (mut returns, mut metrics) = (Vec::new(), Vec::new());
    for episode in 0..episodes {
        let summary = run_episode(env.as_mut(), &mut GreedyPolicy(learner.as_ref()), &mut rng, None).map_err(runtime)?;
        for (t, (r, a)) in summary.rewards.iter().zip(&summary.actions).enumerate() {
            let mut row = vec![episode.to_string(), t.to_string(), r.to_string()];
            row.extend(a.iter().map(ToString::to_string));
            traj.rows.push(row);
        }
        table.push(vec![
            "episode".into(),
            episode.to_string(),
            summary.total_return.to_string(),
            summary.metric.map_or_else(String::new, |m| m.to_string()),
            summary.len().to_string(),
        ]);
        returns.push(summary.total_return);
        if let Some(m) = summary.metric {
            metrics.push(m);
        }
    }
    let (rm, rs) = mean_std(&returns);
    let (mm, ms) = if metrics.is_empty() {
        (String::new(), String::new())
    } else {
        let (m, s) = mean_std(&metrics);
        (m.to_string(), s.to_string())
    };
    table.push(vec!["mean".into(), String::new(), rm.to_string(), mm, String::new()]);
    table.push(vec!["std".into(), String::new(), rs.to_string(), ms, String::new()]);
    if let Some(path) = trajectory {
        traj.write(path)?;
    }
    Ok(table)
}

/// Summary of one training directory for comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub name: String,
    pub config: RunConfig,
    pub finals: Vec<f64>,
}

pub fn read_run(dir: &Path) -> Result<RunSummary, HarnessError> {
    let config = RunConfig::from_file(&dir.join(CONFIG_SNAPSHOT))?;
    let mut finals = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let path = seed_dir(dir, seed).join("train.csv");
        let table = Table::read(&path)?;
        let col = table
            .column("eval_mean")
            .ok_or_else(|| HarnessError::Runtime(format!("{}: no eval_mean column", path.display())))?;
        let last = table
            .rows
            .last()
            .ok_or_else(|| HarnessError::Runtime(format!("{}: no evaluation rows", path.display())))?;
        finals.push(
            last[col]
                .parse()
                .map_err(|e| HarnessError::Runtime(format!("{}: {e}", path.display())))?,
        );
    }
    let name = dir
        .file_name()
        .map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned());
    Ok(RunSummary { name, config, finals })
}

/// Standard competition ranks (ties share the best rank).
pub fn competition_ranks(values: &[f64], higher_is_better: bool) -> Vec<usize> {
    values
        .iter()
        .map(|v| {
            1 + values
                .iter()
                .filter(|w| if higher_is_better { *w > v } else { *w < v })
                .count()
        })
        .collect()
}

/// Mean and population std of final evaluation scores per run, ranked.
pub fn cmd_compare(dirs: &[PathBuf]) -> Result<Table, HarnessError> {
    if dirs.len() < 2 {
        return Err(HarnessError::Config("compare needs at least two run directories".into()));
    }
    let runs = dirs.iter().map(|d| read_run(d)).collect::<Result<Vec<_>, _>>()?;
    let env = &runs[0].config.env;
    for run in &runs[1..] {
        if run.config.env != *env {
            return Err(HarnessError::Config(format!(
                "runs `{}` and `{}` use different environments",
                runs[0].name, run.name
            )));
        }
    }
    let stats: Vec<(f64, f64)> = runs.iter().map(|r| mean_std(&r.finals)).collect();
    let means: Vec<f64> = stats.iter().map(|s| s.0).collect();
    let ranks = competition_ranks(&means, envs::higher_is_better(env));
    let score = if envs::higher_is_better(env) { "return" } else { "igd" };
    let mut table = Table::new(
        COMPARE_SCHEMA,
        &["run", "learner", "agent_order", "score", "seeds", "mean", "std", "rank"],
    );
    for ((run, (mean, std)), rank) in runs.iter().zip(&stats).zip(&ranks) {
        let order = layout_order_text(&run.config)?;
        table.push(vec![
            run.name.clone(),
            run.config.learner.name().to_string(),
            order,
            score.to_string(),
            run.finals.len().to_string(),
            mean.to_string(),
            std.to_string(),
            rank.to_string(),
        ]);
    }
    Ok(table)
}

fn layout_order_text(config: &RunConfig) -> Result<String, HarnessError> {
    let env = build_env(&config.env)?;
    let order = config.agent_order.resolve(env.n_agents())?;
    Ok(order
        .as_slice()
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(" "))
}

/// Environments exercised by `bench` when none is given.
pub fn default_bench_suite() -> Vec<(String, EnvSpec)> {
    let sig = |v: SigmoidVariant, h| EnvSpec::Sigmoid(SigmoidConfig::new(v, h, 10, 10));
    vec![
        ("sigmoid-5d".into(), sig(SigmoidVariant::Plain, 5)),
        ("seq-5d".into(), sig(SigmoidVariant::Seq, 5)),
        ("seq-mask-5d".into(), sig(SigmoidVariant::SeqMask, 5)),
        ("seq-mask-10d".into(), sig(SigmoidVariant::SeqMask, 10)),
        ("seq-robust-1-5d".into(), sig(SigmoidVariant::SeqRobust(1), 5)),
        ("moead-dtlz2".into(), EnvSpec::Moead(MoeadEnvConfig::default())),
    ]
}

/// Uniform-random rollouts: throughput and score per environment.
pub fn cmd_bench(suite: &[(String, EnvSpec)], episodes: usize, seed: u64) -> Result<Table, HarnessError> {
    if episodes == 0 {
        return Err(HarnessError::Config("episodes must be positive".into()));
    }
    let mut table = Table::new(
        BENCH_SCHEMA,
        &["env", "episodes", "steps", "mean_return", "std_return", "mean_metric", "us_per_step"],
    );
    for (name, spec) in suite {
        let mut env = build_env(spec)?;
        let mut policy = UniformPolicy {
            action_sizes: env.action_sizes().to_vec(),
        };
        let mut rng = stream(seed, Stream::Evaluation);
        let (mut returns, mut metrics, mut steps) = (Vec::new(), Vec::new(), 0usize);
        let start = Instant::now();
        for _ in 0..episodes {
            let ep = run_episode(env.as_mut(), &mut policy, &mut rng, None).map_err(runtime)?;
            steps += ep.len();
            returns.push(ep.total_return);
            metrics.extend(ep.metric);
        }
        let elapsed = start.elapsed().as_secs_f64();
        let (rm, rs) = mean_std(&returns);
        table.push(vec![
            name.clone(),
            episodes.to_string(),
            steps.to_string(),
            format!("{rm:.6}"),
            format!("{rs:.6}"),
            if metrics.is_empty() {
                String::new()
            } else {
                format!("{:.6}", mean_std(&metrics).0)
            },
            format!("{:.2}", 1e6 * elapsed / steps.max(1) as f64),
        ]);
    }
    Ok(table)
}

/// Reference fronts used for IGD, one CSV per problem, for `m` objectives.
pub fn front_tables(m: usize) -> Result<Vec<(String, Table)>, HarnessError> {
    ProblemKind::ALL
        .iter()
        .map(|&kind| {
            let d = if kind.is_wfg() { 2 * (m - 1) + 4 } else { m + 3 };
            let problem = Problem::new(kind, m, d).map_err(|e| HarnessError::Config(e.to_string()))?;
            let header: Vec<String> = (1..=m).map(|j| format!("f{j}")).collect();
            let rows = reference_front(&problem)
                .into_iter()
                .map(|f| f.iter().map(|v| v.to_string()).collect())
                .collect();
            Ok((
                format!("{}_m{m}.csv", kind.name()),
                Table {
                    schema: format!("{FRONT_SCHEMA} problem={} m={m}", kind.name()),
                    header,
                    rows,
                },
            ))
        })
        .collect()
}

pub fn cmd_fronts(out: &Path, m: usize) -> Result<Vec<PathBuf>, HarnessError> {
    if !(2..=3).contains(&m) {
        return Err(HarnessError::Config(format!("reference fronts are provided for m = 2 or 3, not {m}")));
    }
    fs::create_dir_all(out).map_err(|e| HarnessError::io(out.display(), e))?;
    let mut written = Vec::new();
    for (file, table) in front_tables(m)? {
        let path = out.join(file);
        table.write(&path)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_share_ties() {
        assert_eq!(competition_ranks(&[1.0, 3.0, 2.0], true), vec![3, 1, 2]);
        assert_eq!(competition_ranks(&[1.0, 3.0, 2.0], false), vec![1, 3, 2]);
        assert_eq!(competition_ranks(&[2.0, 2.0, 1.0], true), vec![1, 1, 3]);
    }
}
