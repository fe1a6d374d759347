//! Episode loop shared by the three agents, training traces and policy
//! checkpoints.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

use super::a3c::{run_a3c, A3cConfig, A3cModel};
use super::ppo::{PpoAgent, PpoConfig, RolloutStep};
use super::replay::Transition;
use super::td3::{Td3Agent, Td3Config};
use super::Algo;
use crate::env::{state_vector, ActionVector, EnvConfig, RunningNorm, SrEnv, StepResult};
use crate::error::{Error, Result};
use crate::network::{ChannelRealization, SystemConfig};
use crate::nn::checkpoint;
use crate::rng::{derive_seed, rng_from_seed, stream};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfigs {
    pub ppo: PpoConfig,
    pub td3: Td3Config,
    pub a3c: A3cConfig,
}

impl AgentConfigs {
    pub fn validate(&self) -> Result<()> {
        self.ppo.validate()?;
        self.td3.validate()?;
        self.a3c.validate()
    }
}

/// Per-episode means over steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub episode: usize,
    pub mean_reward: f64,
    pub min_rate: f64,
    pub satisfied_count: f64,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct EpisodeAccumulator {
    steps: usize,
    reward: f64,
    min_rate: f64,
    satisfied: f64,
}

impl EpisodeAccumulator {
    pub(crate) fn push(&mut self, res: &StepResult) {
        self.steps += 1;
        self.reward += res.reward;
        self.min_rate += res.info.rates.min_rate;
        self.satisfied += res.info.constraints.satisfied_count() as f64;
    }

    pub(crate) fn finish(&self, episode: usize) -> EpisodeRow {
        let n = self.steps.max(1) as f64;
        EpisodeRow {
            episode,
            mean_reward: self.reward / n,
            min_rate: self.min_rate / n,
            satisfied_count: self.satisfied / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub algo: String,
    pub seed: u64,
    pub config_hash: String,
    pub rows: Vec<EpisodeRow>,
}

impl TrainingTrace {
    pub const HEADER: [&'static str; 6] = [
        "episode",
        "mean_reward",
        "min_rate",
        "satisfied_count",
        "config_hash",
        "seed",
    ];

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.episode.to_string(),
                r.mean_reward.to_string(),
                r.min_rate.to_string(),
                r.satisfied_count.to_string(),
                self.config_hash.clone(),
                self.seed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Mean episode reward over the last `n` episodes.
    pub fn final_mean_reward(&self, n: usize) -> f64 {
        let tail = &self.rows[self.rows.len().saturating_sub(n)..];
        tail.iter().map(|r| r.mean_reward).sum::<f64>() / tail.len().max(1) as f64
    }

    /// Mean episode reward over the first `n` episodes.
    pub fn initial_mean_reward(&self, n: usize) -> f64 {
        let head = &self.rows[..n.min(self.rows.len())];
        head.iter().map(|r| r.mean_reward).sum::<f64>() / head.len().max(1) as f64
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "algo", rename_all = "lowercase")]
pub enum AgentState {
    Ppo(PpoAgent),
    Td3(Td3Agent),
    A3c(A3cModel),
}

/// Everything needed to replay a trained policy greedily.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyCheckpoint {
    pub seed: u64,
    pub episodes: usize,
    pub system: SystemConfig,
    pub env: EnvConfig,
    pub normalizer: RunningNorm,
    pub agent: AgentState,
}

const CHECKPOINT_KIND: &str = "policy";

impl PolicyCheckpoint {
    pub fn algo(&self) -> Algo {
        match self.agent {
            AgentState::Ppo(_) => Algo::Ppo,
            AgentState::Td3(_) => Algo::Td3,
            AgentState::A3c(_) => Algo::A3c,
        }
    }

    /// Deterministic action for an observation produced by the environment.
    pub fn greedy_action(&self, obs: &[f64]) -> Result<Vec<f64>> {
        match &self.agent {
            AgentState::Ppo(a) => a.actor.deterministic(obs),
            AgentState::Td3(a) => a.greedy(obs),
            AgentState::A3c(m) => m.actor.deterministic(obs),
        }
    }

    /// Greedy action for a channel realization, observed the way the
    /// training environment would observe it.
    pub fn act_on(&self, ch: &ChannelRealization) -> Result<ActionVector> {
        let raw = state_vector(ch);
        let obs = if self.env.normalize_obs {
            self.normalizer.apply(&raw)
        } else {
            raw
        };
        Ok(ActionVector(self.greedy_action(&obs)?))
    }

    /// Environment with the saved observation statistics, frozen.
    pub fn environment(&self) -> Result<SrEnv> {
        let mut env = SrEnv::new(self.system.clone(), self.env.clone())?;
        env.set_normalizer(self.normalizer.clone())?;
        env.freeze_normalizer(true);
        Ok(env)
    }

    /// Greedy rollouts on episodes `derive_seed(seed, EVAL, e)`.
    pub fn evaluate(&self, episodes: usize, seed: u64) -> Result<Vec<EpisodeRow>> {
        let mut env = self.environment()?;
        (0..episodes)
            .map(|e| {
                let mut obs = env.reset(derive_seed(seed, stream::EVAL, e as u64))?;
                let mut acc = EpisodeAccumulator::default();
                while !env.is_done() {
                    let res = env.step(&ActionVector(self.greedy_action(&obs.0)?))?;
                    acc.push(&res);
                    obs = res.next_state;
                }
                Ok(acc.finish(e))
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(path, CHECKPOINT_KIND, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        checkpoint::load(path, CHECKPOINT_KIND)
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Save a checkpoint every this many episodes (0 disables).
    pub checkpoint_every: usize,
    pub checkpoint_path: Option<PathBuf>,
    pub config_hash: String,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub trace: TrainingTrace,
    pub checkpoint: PolicyCheckpoint,
    /// Reason training stopped early on a non-finite value.
    pub aborted: Option<String>,
}

enum Learner {
    Ppo(PpoAgent),
    Td3(Td3Agent),
}

impl Learner {
    fn state(&self) -> AgentState {
        match self {
            Learner::Ppo(a) => AgentState::Ppo(a.clone()),
            Learner::Td3(a) => AgentState::Td3(a.clone()),
        }
    }

    fn run_episode(&mut self, env: &mut SrEnv, episode_seed: u64) -> Result<EpisodeAccumulator> {
        let mut state = env.reset(episode_seed)?;
        let mut acc = EpisodeAccumulator::default();
        let mut rollout = Vec::new();
        while !env.is_done() {
            match self {
                Learner::Ppo(agent) => {
                    let smp = agent.act(&state.0)?;
                    let res = env.step(&ActionVector(smp.action))?;
                    acc.push(&res);
                    rollout.push(RolloutStep {
                        state: std::mem::take(&mut state.0),
                        pre_tanh: smp.pre_tanh,
                        log_prob_old: smp.log_prob,
                        reward: res.reward * agent.cfg.reward_scale,
                        next_state: res.next_state.0.clone(),
                        done: res.done,
                    });
                    state = res.next_state;
                }
                Learner::Td3(agent) => {
                    let action = agent.act(&state.0)?;
                    let res = env.step(&ActionVector(action.clone()))?;
                    acc.push(&res);
                    agent.observe(Transition {
                        state: std::mem::take(&mut state.0),
                        action,
                        reward: res.reward * agent.cfg.reward_scale,
                        next_state: res.next_state.0.clone(),
                        done: res.done,
                    })?;
                    state = res.next_state;
                }
            }
        }
        if let Learner::Ppo(agent) = self {
            agent.update(&rollout)?;
        }
        Ok(acc)
    }
}

fn checkpoint_of(
    sys: &SystemConfig,
    env_cfg: &EnvConfig,
    seed: u64,
    episodes: usize,
    normalizer: RunningNorm,
    agent: AgentState,
) -> PolicyCheckpoint {
    PolicyCheckpoint {
        seed,
        episodes,
        system: sys.clone(),
        env: env_cfg.clone(),
        normalizer,
        agent,
    }
}

/// Trains `algo` for `episodes` episodes. Episode `e` resets the environment
/// from `derive_seed(seed, EPISODE, e)`, so every algorithm and the random
/// policy see the same placements and fading.
pub fn train(
    algo: Algo,
    sys: &SystemConfig,
    env_cfg: &EnvConfig,
    agents: &AgentConfigs,
    episodes: usize,
    seed: u64,
    opts: &TrainOptions,
) -> Result<TrainOutcome> {
    let save_due = |done: usize| opts.checkpoint_every > 0 && done % opts.checkpoint_every == 0;
    let trace = |rows| TrainingTrace {
        algo: algo.to_string(),
        seed,
        config_hash: opts.config_hash.clone(),
        rows,
    };

    if algo == Algo::A3c {
        let hook = |model: &A3cModel, norm: &RunningNorm, done: usize| -> Result<()> {
            if let (true, Some(path)) = (save_due(done), &opts.checkpoint_path) {
                checkpoint_of(sys, env_cfg, seed, done, norm.clone(), AgentState::A3c(model.clone())).save(path)?;
            }
            Ok(())
        };
        let run = run_a3c(sys, env_cfg, &agents.a3c, episodes, seed, Some(&hook))?;
        let done = run.rows.len();
        let cp = checkpoint_of(sys, env_cfg, seed, done, run.normalizer, AgentState::A3c(run.model));
        if let Some(path) = &opts.checkpoint_path {
            cp.save(path)?;
        }
        return Ok(TrainOutcome {
            trace: trace(run.rows),
            checkpoint: cp,
            aborted: run.aborted,
        });
    }

    let mut env = SrEnv::new(sys.clone(), env_cfg.clone())?;
    let (sdim, adim) = (env.state_dim(), env.action_dim());
    let init_seed = derive_seed(seed, stream::INIT, 0);
    let noise_seed = derive_seed(seed, stream::AGENT, 0);
    let mut learner = match algo {
        Algo::Ppo => Learner::Ppo(PpoAgent::new(agents.ppo.clone(), sdim, adim, init_seed, noise_seed)?),
        Algo::Td3 => Learner::Td3(Td3Agent::new(agents.td3.clone(), sdim, adim, init_seed, noise_seed)?),
        Algo::A3c => unreachable!("handled above"),
    };

    let mut rows = Vec::with_capacity(episodes);
    let mut aborted = None;
    for e in 0..episodes {
        match learner.run_episode(&mut env, derive_seed(seed, stream::EPISODE, e as u64)) {
            Ok(acc) => rows.push(acc.finish(e)),
            // The optimizers reject non-finite gradients before touching the
            // parameters, so the agent still holds its last good weights.
            Err(Error::NonFinite(m)) => {
                aborted = Some(format!("episode {e}: {m}"));
                break;
            }
            Err(err) => return Err(err),
        }
        if let (true, Some(path)) = (save_due(e + 1), &opts.checkpoint_path) {
            checkpoint_of(sys, env_cfg, seed, e + 1, env.normalizer().clone(), learner.state()).save(path)?;
        }
    }
    let cp = checkpoint_of(
        sys,
        env_cfg,
        seed,
        rows.len(),
        env.normalizer().clone(),
        learner.state(),
    );
    if let Some(path) = &opts.checkpoint_path {
        cp.save(path)?;
    }
    Ok(TrainOutcome {
        trace: trace(rows),
        checkpoint: cp,
        aborted,
    })
}

/// Trace of a uniformly random policy on the same episodes as [`train`].
pub fn random_policy_trace(
    sys: &SystemConfig,
    env_cfg: &EnvConfig,
    episodes: usize,
    seed: u64,
    config_hash: &str,
) -> Result<TrainingTrace> {
    let mut env = SrEnv::new(sys.clone(), env_cfg.clone())?;
    let mut rng = rng_from_seed(derive_seed(seed, stream::RANDOM_POLICY, 0));
    let dim = env.action_dim();
    let mut rows = Vec::with_capacity(episodes);
    for e in 0..episodes {
        env.reset(derive_seed(seed, stream::EPISODE, e as u64))?;
        let mut acc = EpisodeAccumulator::default();
        while !env.is_done() {
            let a: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
            acc.push(&env.step(&ActionVector(a))?);
        }
        rows.push(acc.finish(e));
    }
    Ok(TrainingTrace {
        algo: "random".into(),
        seed,
        config_hash: config_hash.into(),
        rows,
    })
}
