//! Clipped-surrogate PPO with a state-value critic.
//!
//! Each update consumes one rollout: advantages and critic targets are formed
//! with the frozen critic, then several epochs of shuffled minibatches update
//! the actor and critic, after which the frozen copies are refreshed.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::stack;
use crate::error::{Error, Result};
use crate::nn::{Activation, GaussianPolicy, Mlp, Optimizer, OptimizerKind, Parameters, PolicySample};
use crate::rng::{rng_from_seed, SimRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub batch_size: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub discount: f64,
    pub entropy_coef: f64,
    /// Stored for parity with the other agents; the frozen copies are
    /// refreshed wholesale after every update.
    pub target_update: f64,
    pub clip_epsilon: f64,
    pub epochs: usize,
    pub optimizer: OptimizerKind,
    pub reward_scale: f64,
    pub max_grad_norm: f64,
    pub init_log_std: f64,
    pub normalize_advantage: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            actor_hidden: vec![128, 128],
            critic_hidden: vec![128, 128],
            batch_size: 32,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            discount: 0.99,
            entropy_coef: 0.01,
            target_update: 0.0005,
            clip_epsilon: 0.2,
            epochs: 4,
            optimizer: OptimizerKind::Sgd,
            reward_scale: 0.01,
            max_grad_norm: 1.0,
            init_log_std: -0.5,
            normalize_advantage: true,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("ppo: {m}")));
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return bad("clip_epsilon must lie in (0, 1)");
        }
        if !(0.0..1.0).contains(&self.discount) {
            return bad("discount must lie in [0, 1)");
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return bad("batch_size and epochs must be >= 1");
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(self.entropy_coef >= 0.0 && self.reward_scale > 0.0 && self.max_grad_norm > 0.0) {
            return bad("entropy_coef >= 0, reward_scale > 0 and max_grad_norm > 0 required");
        }
        if self.actor_hidden.is_empty() || self.critic_hidden.is_empty() {
            return bad("hidden layer lists must not be empty");
        }
        Ok(())
    }
}

/// One on-policy step. `reward` is already scaled.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutStep {
    pub state: Vec<f64>,
    pub pre_tanh: Vec<f64>,
    pub log_prob_old: f64,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// `r + lambda V(s') - V(s)`, without the bootstrap at terminal steps.
pub fn ppo_advantage(reward: f64, discount: f64, v_next: f64, v: f64, done: bool) -> f64 {
    ppo_target(reward, discount, v_next, done) - v
}

/// Critic target `r + lambda V(s')`.
pub fn ppo_target(reward: f64, discount: f64, v_next: f64, done: bool) -> f64 {
    if done {
        reward
    } else {
        reward + discount * v_next
    }
}

/// Clipped surrogate `min(rho A, clip(rho, 1 - eps, 1 + eps) A)` and its
/// derivative with respect to `rho`.
pub fn ppo_surrogate(ratio: f64, advantage: f64, eps: f64) -> (f64, f64) {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * advantage;
    if unclipped <= clipped {
        (unclipped, advantage)
    } else {
        (clipped, 0.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PpoStats {
    pub updates: u64,
    pub dropped_ratios: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PpoAgent {
    pub cfg: PpoConfig,
    pub actor: GaussianPolicy,
    pub critic: Mlp,
    pub actor_old: GaussianPolicy,
    pub critic_old: Mlp,
    pub actor_opt: Optimizer,
    pub critic_opt: Optimizer,
    pub stats: PpoStats,
    #[serde(skip, default = "default_rng")]
    rng: SimRng,
}

fn default_rng() -> SimRng {
    rng_from_seed(0)
}

fn sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut s = vec![input];
    s.extend_from_slice(hidden);
    s.push(output);
    s
}

impl PpoAgent {
    pub fn new(cfg: PpoConfig, state_dim: usize, action_dim: usize, init_seed: u64, noise_seed: u64) -> Result<Self> {
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
            actor_old: actor.clone(),
            critic_old: critic.clone(),
            actor_opt: Optimizer::new(cfg.optimizer, cfg.actor_lr)?,
            critic_opt: Optimizer::new(cfg.optimizer, cfg.critic_lr)?,
            actor,
            critic,
            cfg,
            stats: PpoStats::default(),
            rng: rng_from_seed(noise_seed),
        })
    }

    pub fn act(&mut self, state: &[f64]) -> Result<PolicySample> {
        self.actor_old.sample(state, &mut self.rng)
    }

    /// One full update on a completed rollout.
    pub fn update(&mut self, rollout: &[RolloutStep]) -> Result<()> {
        if rollout.is_empty() {
            return Ok(());
        }
        let sdim = self.critic.input_dim();
        let states = stack(rollout.iter().map(|t| t.state.as_slice()), sdim);
        let next_states = stack(rollout.iter().map(|t| t.next_state.as_slice()), sdim);
        let v = self.critic_old.predict_batch(states.view())?;
        let v_next = self.critic_old.predict_batch(next_states.view())?;
        let targets: Vec<f64> = rollout
            .iter()
            .enumerate()
            .map(|(k, t)| ppo_target(t.reward, self.cfg.discount, v_next[[k, 0]], t.done))
            .collect();
        let mut adv: Vec<f64> = targets.iter().enumerate().map(|(k, y)| y - v[[k, 0]]).collect();
        if self.cfg.normalize_advantage && adv.len() > 1 {
            let n = adv.len() as f64;
            let mean = adv.iter().sum::<f64>() / n;
            let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
            adv.iter_mut().for_each(|a| *a = (*a - mean) / (std + 1e-8));
        }

        let mut order: Vec<usize> = (0..rollout.len()).collect();
        for _ in 0..self.cfg.epochs {
            order.shuffle(&mut self.rng);
            for batch in order.chunks(self.cfg.batch_size) {
                self.actor_step(rollout, &states, &adv, batch)?;
                self.critic_step(&states, &targets, batch)?;
            }
        }
        self.actor_old.copy_from(&self.actor);
        self.critic_old.copy_from(&self.critic);
        self.stats.updates += 1;
        Ok(())
    }

    fn actor_step(
        &mut self,
        rollout: &[RolloutStep],
        states: &Array2<f64>,
        adv: &[f64],
        batch: &[usize],
    ) -> Result<()> {
        let x = states.select(ndarray::Axis(0), batch);
        let cache = self.actor.mean_batch(x.view())?;
        let means = cache.output();
        let q = batch.len() as f64;
        let dim = self.actor.action_dim();
        let mut d_mean = Array2::<f64>::zeros((batch.len(), dim));
        let mut d_log_std = Array1::<f64>::zeros(dim);
        for (row, &k) in batch.iter().enumerate() {
            let step = &rollout[k];
            let mean = means.row(row).to_vec();
            let ratio = (self.actor.gaussian_log_prob(&mean, &step.pre_tanh)
                - (step.log_prob_old + jacobian(&step.pre_tanh)))
            .exp();
            if !ratio.is_finite() {
                self.stats.dropped_ratios += 1;
                continue;
            }
            let (_, d_ratio) = ppo_surrogate(ratio, adv[k], self.cfg.clip_epsilon);
            if d_ratio == 0.0 {
                continue;
            }
            let (dm, dl) = self.actor.log_prob_grads(&mean, &step.pre_tanh);
            // Descent on the negated surrogate mean.
            let w = -d_ratio * ratio / q;
            for d in 0..dim {
                d_mean[[row, d]] = w * dm[d];
                d_log_std[d] += w * dl[d];
            }
        }
        let in_range = |l: f64| (crate::nn::policy::LOG_STD_MIN..=crate::nn::policy::LOG_STD_MAX).contains(&l);
        for (g, l) in d_log_std.iter_mut().zip(&self.actor.log_std) {
            if in_range(*l) {
                *g -= self.cfg.entropy_coef;
            }
        }
        let mut grads = self.actor.backward(&cache, &d_mean, d_log_std)?;
        grads.clip_norm(self.cfg.max_grad_norm);
        self.actor_opt.step(&mut self.actor, &grads)?;
        self.actor.clamp_log_std();
        Ok(())
    }

    pub fn critic_step(&mut self, states: &Array2<f64>, targets: &[f64], batch: &[usize]) -> Result<()> {
        let x = states.select(ndarray::Axis(0), batch);
        let cache = self.critic.forward_batch(x.view())?;
        let q = batch.len() as f64;
        let up = Array2::from_shape_fn((batch.len(), 1), |(row, _)| {
            2.0 * (cache.output()[[row, 0]] - targets[batch[row]]) / q
        });
        let (mut grads, _) = self.critic.backward(&cache, up.view())?;
        grads.clip_norm(self.cfg.max_grad_norm);
        self.critic_opt.step(&mut self.critic, &grads)
    }
}

/// `sum log(1 - tanh(u)^2)`: the squashing term stored inside sampled log-probs.
fn jacobian(u: &[f64]) -> f64 {
    u.iter().map(|&x| crate::nn::policy::log_one_minus_tanh_sq(x)).sum()
}
