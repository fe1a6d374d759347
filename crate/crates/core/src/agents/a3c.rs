//! A3C: worker threads with private environments roll out `k`-step segments
//! using snapshots of the global actor and critic, then push summed gradients
//! to the global store under a mutex.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use std::sync::Mutex;

use super::stack;
use super::train::{EpisodeAccumulator, EpisodeRow};
use crate::env::{ActionVector, EnvConfig, RunningNorm, SrEnv};
use crate::error::{Error, Result};
use crate::network::SystemConfig;
use crate::nn::{Activation, GaussianPolicy, Mlp, Optimizer, OptimizerKind, Parameters};
use crate::rng::{derive_seed, rng_from_seed, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct A3cConfig {
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    /// Segment length `k`.
    pub k_steps: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub discount: f64,
    pub entropy_coef: f64,
    pub workers: usize,
    /// Stored for parity with the other agents; A3C has no target networks.
    pub target_update: f64,
    pub optimizer: OptimizerKind,
    pub reward_scale: f64,
    pub max_grad_norm: f64,
    pub init_log_std: f64,
}

impl Default for A3cConfig {
    fn default() -> Self {
        Self {
            actor_hidden: vec![128, 128],
            critic_hidden: vec![128, 128],
            k_steps: 64,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            discount: 0.99,
            entropy_coef: 0.01,
            workers: 3,
            target_update: 0.0005,
            optimizer: OptimizerKind::Sgd,
            reward_scale: 0.01,
            max_grad_norm: 1.0,
            init_log_std: -0.5,
        }
    }
}

impl A3cConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("a3c: {m}")));
        if self.workers == 0 || self.k_steps == 0 {
            return bad("workers and k_steps must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return bad("discount must lie in [0, 1]");
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0 && self.reward_scale > 0.0 && self.max_grad_norm > 0.0) {
            return bad("learning rates, reward_scale and max_grad_norm must be positive");
        }
        if !(self.entropy_coef >= 0.0) {
            return bad("entropy_coef must be >= 0");
        }
        if self.actor_hidden.is_empty() || self.critic_hidden.is_empty() {
            return bad("hidden layer lists must not be empty");
        }
        Ok(())
    }
}

/// Discounted return of a `k`-step segment plus the bootstrap value.
pub fn a3c_kstep_return(rewards: &[f64], bootstrap: f64, discount: f64) -> f64 {
    a3c_kstep_returns(rewards, bootstrap, discount)
        .first()
        .copied()
        .unwrap_or(bootstrap)
}

/// Returns for every position of a segment, accumulated backwards.
pub fn a3c_kstep_returns(rewards: &[f64], bootstrap: f64, discount: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = bootstrap;
    for (k, r) in rewards.iter().enumerate().rev() {
        acc = r + discount * acc;
        out[k] = acc;
    }
    out
}

/// One worker step; `reward` is already scaled.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentStep {
    pub state: Vec<f64>,
    pub pre_tanh: Vec<f64>,
    pub reward: f64,
}

/// Global parameters and optimizer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A3cModel {
    pub cfg: A3cConfig,
    pub actor: GaussianPolicy,
    pub critic: Mlp,
    pub actor_opt: Optimizer,
    pub critic_opt: Optimizer,
    pub updates: u64,
}

fn sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut s = vec![input];
    s.extend_from_slice(hidden);
    s.push(output);
    s
}

impl A3cModel {
    pub fn new(cfg: A3cConfig, state_dim: usize, action_dim: usize, init_seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut init = rng_from_seed(init_seed);
        let actor = GaussianPolicy::new(
            &sizes(state_dim, &cfg.actor_hidden, action_dim),
            cfg.init_log_std,
            &mut init,
        )?;
        let critic = Mlp::new(
            &sizes(state_dim, &cfg.critic_hidden, 1),
            Activation::Identity,
            &mut init,
        )?;
        Ok(Self {
            actor_opt: Optimizer::new(cfg.optimizer, cfg.actor_lr)?,
            critic_opt: Optimizer::new(cfg.optimizer, cfg.critic_lr)?,
            actor,
            critic,
            cfg,
            updates: 0,
        })
    }

    /// Gradients of one segment, summed over its steps, for descent on
    /// `-(log pi(a|s) A + beta H)` (actor) and `(R - V(s))^2` (critic).
    pub fn segment_gradients(
        cfg: &A3cConfig,
        actor: &GaussianPolicy,
        critic: &Mlp,
        steps: &[SegmentStep],
        bootstrap: f64,
    ) -> Result<(GaussianPolicy, Mlp)> {
        let rewards: Vec<f64> = steps.iter().map(|s| s.reward).collect();
        let returns = a3c_kstep_returns(&rewards, bootstrap, cfg.discount);
        let states = stack(steps.iter().map(|s| s.state.as_slice()), critic.input_dim());

        let v_cache = critic.forward_batch(states.view())?;
        let v = v_cache.output();
        let up = Array2::from_shape_fn((steps.len(), 1), |(k, _)| 2.0 * (v[[k, 0]] - returns[k]));
        let (critic_grad, _) = critic.backward(&v_cache, up.view())?;

        let m_cache = actor.mean_batch(states.view())?;
        let means = m_cache.output();
        let dim = actor.action_dim();
        let mut d_mean = Array2::<f64>::zeros((steps.len(), dim));
        let mut d_log_std = Array1::<f64>::zeros(dim);
        for (k, step) in steps.iter().enumerate() {
            let advantage = returns[k] - v[[k, 0]];
            let mean = means.row(k).to_vec();
            let (dm, dl) = actor.log_prob_grads(&mean, &step.pre_tanh);
            for d in 0..dim {
                d_mean[[k, d]] = -advantage * dm[d];
                d_log_std[d] -= advantage * dl[d];
            }
        }
        for (g, l) in d_log_std.iter_mut().zip(&actor.log_std) {
            if (crate::nn::policy::LOG_STD_MIN..=crate::nn::policy::LOG_STD_MAX).contains(l) {
                *g -= cfg.entropy_coef * steps.len() as f64;
            }
        }
        let actor_grad = actor.backward(&m_cache, &d_mean, d_log_std)?;
        Ok((actor_grad, critic_grad))
    }

    /// Applies worker gradients to the global parameters.
    pub fn apply(&mut self, mut actor_grad: GaussianPolicy, mut critic_grad: Mlp) -> Result<()> {
        actor_grad.clip_norm(self.cfg.max_grad_norm);
        critic_grad.clip_norm(self.cfg.max_grad_norm);
        if !(actor_grad.is_finite() && critic_grad.is_finite()) {
            return Err(Error::NonFinite("a3c gradient".into()));
        }
        self.actor_opt.step(&mut self.actor, &actor_grad)?;
        self.actor.clamp_log_std();
        self.critic_opt.step(&mut self.critic, &critic_grad)?;
        self.updates += 1;
        Ok(())
    }
}

struct Shared {
    model: A3cModel,
    next_episode: usize,
    finished: usize,
    rows: Vec<Option<EpisodeRow>>,
    /// Latest observation statistics of worker 0.
    norm: RunningNorm,
    failure: Option<Error>,
}

/// Hook invoked under the global lock after each finished episode with the
/// worker-0 observation statistics and the number of finished episodes.
pub type EpisodeHook<'a> = dyn Fn(&A3cModel, &RunningNorm, usize) -> Result<()> + Sync + 'a;

pub struct A3cRun {
    pub model: A3cModel,
    pub rows: Vec<EpisodeRow>,
    /// Observation statistics of worker 0.
    pub normalizer: RunningNorm,
    /// Set when training stopped on a non-finite value.
    pub aborted: Option<String>,
}

/// Runs `episodes` episodes spread over the configured workers. Episode `e`
/// always resets its environment from `derive_seed(seed, EPISODE, e)`; with
/// one worker the whole run is deterministic.
pub fn run_a3c(
    sys: &SystemConfig,
    env_cfg: &EnvConfig,
    cfg: &A3cConfig,
    episodes: usize,
    seed: u64,
    hook: Option<&EpisodeHook<'_>>,
) -> Result<A3cRun> {
    let probe = SrEnv::new(sys.clone(), env_cfg.clone())?;
    let model = A3cModel::new(
        cfg.clone(),
        probe.state_dim(),
        probe.action_dim(),
        derive_seed(seed, stream::INIT, 0),
    )?;
    let shared = Mutex::new(Shared {
        model,
        next_episode: 0,
        finished: 0,
        rows: vec![None; episodes],
        norm: probe.normalizer().clone(),
        failure: None,
    });

    let norms: Vec<Result<RunningNorm>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..cfg.workers)
            .map(|w| {
                let shared = &shared;
                scope.spawn(move || worker(sys, env_cfg, cfg, episodes, seed, w, shared, hook))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or(Err(Error::Protocol("a3c worker panicked"))))
            .collect()
    });

    let shared = shared
        .into_inner()
        .map_err(|_| Error::Protocol("a3c global store poisoned"))?;
    let mut norms = norms.into_iter();
    let normalizer = norms.next().expect("at least one worker")?;
    for other in norms {
        other?;
    }
    let aborted = match shared.failure {
        Some(Error::NonFinite(m)) => Some(m),
        Some(e) => return Err(e),
        None => None,
    };
    Ok(A3cRun {
        model: shared.model,
        rows: shared.rows.into_iter().flatten().collect(),
        normalizer,
        aborted,
    })
}

#[allow(clippy::too_many_arguments)]
fn worker(
    sys: &SystemConfig,
    env_cfg: &EnvConfig,
    cfg: &A3cConfig,
    episodes: usize,
    seed: u64,
    id: usize,
    shared: &Mutex<Shared>,
    hook: Option<&EpisodeHook<'_>>,
) -> Result<RunningNorm> {
    let lock = || shared.lock().map_err(|_| Error::Protocol("a3c global store poisoned"));
    let mut env = SrEnv::new(sys.clone(), env_cfg.clone())?;
    let mut rng = rng_from_seed(derive_seed(seed, stream::AGENT, id as u64));

    let result = (|| -> Result<()> {
        loop {
            let episode = {
                let mut g = lock()?;
                if g.failure.is_some() || g.next_episode >= episodes {
                    return Ok(());
                }
                g.next_episode += 1;
                g.next_episode - 1
            };
            let mut state = env.reset(derive_seed(seed, stream::EPISODE, episode as u64))?;
            let mut acc = EpisodeAccumulator::default();
            let mut done = false;
            while !done {
                let (actor, critic) = {
                    let g = lock()?;
                    (g.model.actor.clone(), g.model.critic.clone())
                };
                let mut segment = Vec::with_capacity(cfg.k_steps);
                while segment.len() < cfg.k_steps && !done {
                    let smp = actor.sample(&state.0, &mut rng)?;
                    let res = env.step(&ActionVector(smp.action))?;
                    acc.push(&res);
                    segment.push(SegmentStep {
                        state: std::mem::take(&mut state.0),
                        pre_tanh: smp.pre_tanh,
                        reward: res.reward * cfg.reward_scale,
                    });
                    state = res.next_state;
                    done = res.done;
                }
                let bootstrap = if done { 0.0 } else { critic.forward(&state.0)?[0] };
                let (ga, gc) = A3cModel::segment_gradients(cfg, &actor, &critic, &segment, bootstrap)?;
                lock()?.model.apply(ga, gc)?;
            }
            let mut g = lock()?;
            g.rows[episode] = Some(acc.finish(episode));
            g.finished += 1;
            if id == 0 {
                g.norm = env.normalizer().clone();
            }
            if let Some(h) = hook {
                h(&g.model, &g.norm, g.finished)?;
            }
        }
    })();

    if let Err(e) = result {
        if let Ok(mut g) = shared.lock() {
            if g.failure.is_none() {
                g.failure = Some(e);
            }
        }
    }
    Ok(env.normalizer().clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kstep_return_hand_values() {
        assert_relative_eq!(a3c_kstep_return(&[1.0, 1.0], 10.0, 0.9), 10.0, epsilon = 1e-12);
        assert_relative_eq!(a3c_kstep_return(&[1.0, 1.0], 0.0, 0.9), 1.9, epsilon = 1e-12);
        assert_eq!(a3c_kstep_return(&[0.7], 5.0, 0.0), 0.7);
        assert_eq!(a3c_kstep_returns(&[1.0, 2.0], 0.0, 1.0), vec![3.0, 2.0]);
    }

    fn tiny_model(entropy: f64) -> A3cModel {
        let cfg = A3cConfig {
            actor_hidden: vec![6],
            critic_hidden: vec![6],
            entropy_coef: entropy,
            ..A3cConfig::default()
        };
        A3cModel::new(cfg, 2, 2, 3).unwrap()
    }

    fn steps() -> Vec<SegmentStep> {
        vec![
            SegmentStep {
                state: vec![0.1, 0.2],
                pre_tanh: vec![0.3, -0.1],
                reward: 1.0,
            },
            SegmentStep {
                state: vec![-0.4, 0.5],
                pre_tanh: vec![-0.2, 0.6],
                reward: 0.5,
            },
        ]
    }

    #[test]
    fn zero_advantage_leaves_only_entropy() {
        let mut m = tiny_model(0.01);
        // A critic that outputs exactly the returns makes every advantage zero.
        m.critic = Mlp::zeros(&[2, 6, 1], Activation::Identity).unwrap();
        let s = vec![SegmentStep {
            state: vec![0.0, 0.0],
            pre_tanh: vec![0.5, 0.5],
            reward: 0.0,
        }];
        let (ga, _) = A3cModel::segment_gradients(&m.cfg, &m.actor, &m.critic, &s, 0.0).unwrap();
        assert_eq!(ga.mean.l2_norm(), 0.0);
        assert_eq!(ga.log_std.to_vec(), vec![-0.01, -0.01]);
    }

    #[test]
    fn entropy_free_gradient_is_pure_policy_gradient() {
        let m = tiny_model(0.0);
        let (ga, _) = A3cModel::segment_gradients(&m.cfg, &m.actor, &m.critic, &steps(), 0.3).unwrap();
        let returns = a3c_kstep_returns(&[1.0, 0.5], 0.3, m.cfg.discount);
        let mut expect = [0.0, 0.0];
        for (k, s) in steps().iter().enumerate() {
            let v = m.critic.forward(&s.state).unwrap()[0];
            let mean = m.actor.mean_of(&s.state).unwrap();
            let (_, dl) = m.actor.log_prob_grads(&mean, &s.pre_tanh);
            for d in 0..2 {
                expect[d] -= (returns[k] - v) * dl[d];
            }
        }
        assert_relative_eq!(ga.log_std[0], expect[0], epsilon = 1e-12);
        assert_relative_eq!(ga.log_std[1], expect[1], epsilon = 1e-12);
    }

    #[test]
    fn single_worker_is_deterministic() {
        let sys = SystemConfig::default().with_dims(2, 2, 1);
        let env = EnvConfig {
            episode_len: 5,
            ..EnvConfig::default()
        };
        let cfg = A3cConfig {
            actor_hidden: vec![8],
            critic_hidden: vec![8],
            workers: 1,
            k_steps: 3,
            ..A3cConfig::default()
        };
        let a = run_a3c(&sys, &env, &cfg, 4, 9, None).unwrap();
        let b = run_a3c(&sys, &env, &cfg, 4, 9, None).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.rows.len(), 4);
        assert_eq!(a.model.updates, 8);
    }

    #[test]
    fn several_workers_cover_every_episode() {
        let sys = SystemConfig::default().with_dims(1, 2, 1);
        let env = EnvConfig {
            episode_len: 4,
            ..EnvConfig::default()
        };
        let cfg = A3cConfig {
            actor_hidden: vec![4],
            critic_hidden: vec![4],
            workers: 3,
            k_steps: 2,
            ..A3cConfig::default()
        };
        let run = run_a3c(&sys, &env, &cfg, 7, 1, None).unwrap();
        let eps: Vec<usize> = run.rows.iter().map(|r| r.episode).collect();
        assert_eq!(eps, (0..7).collect::<Vec<_>>());
        assert_eq!(run.model.updates, 14);
    }
}
