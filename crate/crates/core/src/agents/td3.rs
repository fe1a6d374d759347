//! TD3: deterministic actor, twin critics on `(s, a)`, target smoothing,
//! delayed actor updates and soft target tracking.

use ndarray::{s, Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::replay::{ReplayBuffer, Transition};
use super::stack;
use crate::error::{Error, Result};
use crate::nn::{Activation, Mlp, Optimizer, OptimizerKind, Parameters};
use crate::rng::{rng_from_seed, SimRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Td3Config {
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub batch_size: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub discount: f64,
    /// Soft-update rate of the target networks.
    pub target_update: f64,
    pub policy_delay: u64,
    pub target_noise: f64,
    pub target_noise_clip: f64,
    pub exploration_noise: f64,
    pub buffer_capacity: usize,
    /// Uniform-random actions before learning starts.
    pub warmup_steps: usize,
    /// Environment steps per gradient update.
    pub update_every: usize,
    pub optimizer: OptimizerKind,
    pub reward_scale: f64,
    pub max_grad_norm: f64,
}

impl Default for Td3Config {
    fn default() -> Self {
        Self {
            actor_hidden: vec![400, 300],
            critic_hidden: vec![400, 300],
            batch_size: 64,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            discount: 0.99,
            target_update: 0.0005,
            policy_delay: 2,
            target_noise: 0.2,
            target_noise_clip: 0.5,
            exploration_noise: 0.1,
            buffer_capacity: 100_000,
            warmup_steps: 1000,
            update_every: 1,
            optimizer: OptimizerKind::Sgd,
            reward_scale: 0.01,
            max_grad_norm: 1.0,
        }
    }
}

impl Td3Config {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("td3: {m}")));
        if self.buffer_capacity <= self.batch_size || self.batch_size == 0 {
            return bad("buffer_capacity must exceed batch_size >= 1");
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return bad("discount must lie in (0, 1]");
        }
        if !(self.target_update > 0.0 && self.target_update < 1.0) {
            return bad("target_update must lie in (0, 1)");
        }
        if self.policy_delay == 0 || self.update_every == 0 {
            return bad("policy_delay and update_every must be >= 1");
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0 && self.reward_scale > 0.0 && self.max_grad_norm > 0.0) {
            return bad("learning rates, reward_scale and max_grad_norm must be positive");
        }
        if !(self.target_noise >= 0.0 && self.target_noise_clip >= 0.0 && self.exploration_noise >= 0.0) {
            return bad("noise scales must be >= 0");
        }
        if self.actor_hidden.is_empty() || self.critic_hidden.is_empty() {
            return bad("hidden layer lists must not be empty");
        }
        Ok(())
    }
}

/// `r + gamma min(q1, q2)`, without the bootstrap at terminal steps.
pub fn td3_target(reward: f64, discount: f64, q1: f64, q2: f64, done: bool) -> f64 {
    if done {
        reward
    } else {
        reward + discount * q1.min(q2)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Td3Agent {
    pub cfg: Td3Config,
    pub actor: Mlp,
    pub actor_target: Mlp,
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
    pub actor_opt: Optimizer,
    pub q1_opt: Optimizer,
    pub q2_opt: Optimizer,
    /// Critic updates performed so far.
    pub updates: u64,
    pub actor_updates: u64,
    pub steps_seen: u64,
    #[serde(skip, default = "default_buffer")]
    pub buffer: ReplayBuffer,
    #[serde(skip, default = "default_rng")]
    rng: SimRng,
}

fn default_buffer() -> ReplayBuffer {
    ReplayBuffer::new(1)
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

impl Td3Agent {
    pub fn new(cfg: Td3Config, state_dim: usize, action_dim: usize, init_seed: u64, noise_seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut init = rng_from_seed(init_seed);
        let actor = Mlp::new(
            &sizes(state_dim, &cfg.actor_hidden, action_dim),
            Activation::Tanh,
            &mut init,
        )?;
        let critic_sizes = sizes(state_dim + action_dim, &cfg.critic_hidden, 1);
        let q1 = Mlp::new(&critic_sizes, Activation::Identity, &mut init)?;
        let q2 = Mlp::new(&critic_sizes, Activation::Identity, &mut init)?;
        Ok(Self {
            actor_target: actor.clone(),
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            actor_opt: Optimizer::new(cfg.optimizer, cfg.actor_lr)?,
            q1_opt: Optimizer::new(cfg.optimizer, cfg.critic_lr)?,
            q2_opt: Optimizer::new(cfg.optimizer, cfg.critic_lr)?,
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            actor,
            q1,
            q2,
            cfg,
            updates: 0,
            actor_updates: 0,
            steps_seen: 0,
            rng: rng_from_seed(noise_seed),
        })
    }

    pub fn state_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.actor.output_dim()
    }

    pub fn greedy(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.actor.forward(state)
    }

    /// Exploration action: uniform during warmup, otherwise the actor plus
    /// clipped Gaussian noise.
    pub fn act(&mut self, state: &[f64]) -> Result<Vec<f64>> {
        if (self.steps_seen as usize) < self.cfg.warmup_steps {
            return Ok((0..self.action_dim())
                .map(|_| self.rng.random_range(-1.0..=1.0))
                .collect());
        }
        let mut a = self.actor.forward(state)?;
        for v in &mut a {
            *v = (*v + self.cfg.exploration_noise * self.rng.sample::<f64, _>(StandardNormal)).clamp(-1.0, 1.0);
        }
        Ok(a)
    }

    /// Stores a transition (reward already scaled) and runs an update when due.
    pub fn observe(&mut self, t: Transition) -> Result<()> {
        self.buffer.push(t);
        self.steps_seen += 1;
        let ready = self.buffer.len() >= self.cfg.batch_size && (self.steps_seen as usize) >= self.cfg.warmup_steps;
        if ready && self.steps_seen % self.cfg.update_every as u64 == 0 {
            self.update()?;
        }
        Ok(())
    }

    fn concat(states: &Array2<f64>, actions: &Array2<f64>) -> Array2<f64> {
        ndarray::concatenate(Axis(1), &[states.view(), actions.view()]).expect("same batch size")
    }

    /// Smoothed target actions `clip(mu'(s') + clip(noise), -1, 1)`.
    fn smoothed_targets(&mut self, next: &Array2<f64>) -> Result<Array2<f64>> {
        let mut a = self.actor_target.predict_batch(next.view())?;
        let (sigma, c) = (self.cfg.target_noise, self.cfg.target_noise_clip);
        for v in a.iter_mut() {
            let eps = (sigma * self.rng.sample::<f64, _>(StandardNormal)).clamp(-c, c);
            *v = (*v + eps).clamp(-1.0, 1.0);
        }
        Ok(a)
    }

    /// Critic regression targets for a batch.
    pub fn targets(&mut self, batch: &[&Transition]) -> Result<Vec<f64>> {
        let sdim = self.state_dim();
        let next = stack(batch.iter().map(|t| t.next_state.as_slice()), sdim);
        let a_next = self.smoothed_targets(&next)?;
        let x = Self::concat(&next, &a_next);
        let q1 = self.q1_target.predict_batch(x.view())?;
        let q2 = self.q2_target.predict_batch(x.view())?;
        Ok(batch
            .iter()
            .enumerate()
            .map(|(k, t)| td3_target(t.reward, self.cfg.discount, q1[[k, 0]], q2[[k, 0]], t.done))
            .collect())
    }

    fn critic_grad(net: &Mlp, x: &Array2<f64>, y: &[f64]) -> Result<Mlp> {
        let cache = net.forward_batch(x.view())?;
        let q = y.len() as f64;
        let up = Array2::from_shape_fn((y.len(), 1), |(k, _)| 2.0 * (cache.output()[[k, 0]] - y[k]) / q);
        Ok(net.backward(&cache, up.view())?.0)
    }

    /// One critic update and, every `policy_delay` calls, one actor update
    /// followed by soft target updates.
    pub fn update(&mut self) -> Result<()> {
        let batch: Vec<Transition> = self
            .buffer
            .sample(self.cfg.batch_size, &mut self.rng)
            .into_iter()
            .cloned()
            .collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let y = self.targets(&refs)?;
        let (sdim, adim) = (self.state_dim(), self.action_dim());
        let states = stack(batch.iter().map(|t| t.state.as_slice()), sdim);
        let actions = stack(batch.iter().map(|t| t.action.as_slice()), adim);
        let x = Self::concat(&states, &actions);

        let mut g1 = Self::critic_grad(&self.q1, &x, &y)?;
        let mut g2 = Self::critic_grad(&self.q2, &x, &y)?;
        g1.clip_norm(self.cfg.max_grad_norm);
        g2.clip_norm(self.cfg.max_grad_norm);
        self.q1_opt.step(&mut self.q1, &g1)?;
        self.q2_opt.step(&mut self.q2, &g2)?;
        self.updates += 1;

        if self.updates % self.cfg.policy_delay == 0 {
            self.actor_step(&states)?;
            self.actor_updates += 1;
            let rho = self.cfg.target_update;
            self.actor_target.soft_update(&self.actor, rho);
            self.q1_target.soft_update(&self.q1, rho);
            self.q2_target.soft_update(&self.q2, rho);
        }
        Ok(())
    }

    /// Gradient ascent on `mean q1(s, mu(s))`.
    fn actor_step(&mut self, states: &Array2<f64>) -> Result<()> {
        let n = states.nrows();
        let sdim = self.state_dim();
        let actor_cache = self.actor.forward_batch(states.view())?;
        let x = Self::concat(states, actor_cache.output());
        let q_cache = self.q1.forward_batch(x.view())?;
        let up = Array2::from_elem((n, 1), -1.0 / n as f64);
        let (_, dx) = self.q1.backward(&q_cache, up.view())?;
        let d_action = dx.slice(s![.., sdim..]).to_owned();
        let (mut grads, _) = self.actor.backward(&actor_cache, d_action.view())?;
        grads.clip_norm(self.cfg.max_grad_norm);
        self.actor_opt.step(&mut self.actor, &grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small() -> Td3Config {
        Td3Config {
            actor_hidden: vec![16],
            critic_hidden: vec![16],
            batch_size: 8,
            buffer_capacity: 1000,
            warmup_steps: 0,
            ..Td3Config::default()
        }
    }

    #[test]
    fn target_hand_values() {
        assert_relative_eq!(td3_target(1.0, 0.99, 2.0, 3.0, false), 2.98, epsilon = 1e-12);
        assert_eq!(
            td3_target(1.0, 0.99, 2.5, 2.5, false),
            td3_target(1.0, 0.99, 2.5, 9.0, false)
        );
        assert_eq!(td3_target(1.0, 0.99, 2.0, 3.0, true), 1.0);
    }

    fn fill(agent: &mut Td3Agent, n: usize) {
        let mut rng = rng_from_seed(5);
        for _ in 0..n {
            let s: Vec<f64> = (0..agent.state_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a: Vec<f64> = (0..agent.action_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            agent.buffer.push(Transition {
                reward: a[0],
                state: s.clone(),
                action: a,
                next_state: s,
                done: false,
            });
        }
    }

    #[test]
    fn policy_delay_counter() {
        let mut agent = Td3Agent::new(small(), 3, 2, 1, 2).unwrap();
        fill(&mut agent, 50);
        let mut actor_changed = Vec::new();
        for _ in 0..6 {
            let before = agent.actor.clone();
            agent.update().unwrap();
            actor_changed.push(agent.actor != before);
        }
        assert_eq!(actor_changed, vec![false, true, false, true, false, true]);
        assert_eq!(agent.actor_updates, 3);
    }

    #[test]
    fn soft_update_rate() {
        let mut agent = Td3Agent::new(small(), 3, 2, 1, 2).unwrap();
        fill(&mut agent, 50);
        let target_before = agent.q1_target.clone();
        agent.update().unwrap();
        agent.update().unwrap();
        let w_t = target_before.layers[0].w[[0, 0]];
        let w_o = agent.q1.layers[0].w[[0, 0]];
        assert_relative_eq!(
            agent.q1_target.layers[0].w[[0, 0]],
            0.9995 * w_t + 0.0005 * w_o,
            epsilon = 1e-15
        );
    }

    #[test]
    fn targets_never_exceed_single_critic_bound() {
        let mut agent = Td3Agent::new(small(), 3, 2, 7, 8).unwrap();
        fill(&mut agent, 40);
        let batch: Vec<Transition> = agent
            .buffer
            .sample(20, &mut rng_from_seed(3))
            .into_iter()
            .cloned()
            .collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let mut probe = agent.clone();
        let y = agent.targets(&refs).unwrap();
        // Re-draw the same smoothed actions and bound by either critic alone.
        let next = stack(batch.iter().map(|t| t.next_state.as_slice()), 3);
        let a = probe.smoothed_targets(&next).unwrap();
        let x = Td3Agent::concat(&next, &a);
        let q1 = probe.q1_target.predict_batch(x.view()).unwrap();
        let q2 = probe.q2_target.predict_batch(x.view()).unwrap();
        let r_max = batch.iter().map(|t| t.reward).fold(f64::NEG_INFINITY, f64::max);
        let q_max = q1.iter().chain(q2.iter()).copied().fold(f64::NEG_INFINITY, f64::max);
        for v in y {
            assert!(v <= r_max + 0.99 * q_max + 1e-12);
        }
    }

    #[test]
    fn learns_rewarded_component() {
        let cfg = Td3Config {
            actor_lr: 1e-3,
            optimizer: OptimizerKind::Adam,
            ..small()
        };
        let mut agent = Td3Agent::new(cfg, 3, 2, 3, 4).unwrap();
        let s = vec![0.1, -0.2, 0.3];
        let before = agent.greedy(&s).unwrap()[0];
        for _ in 0..1500 {
            let a = agent.act(&s).unwrap();
            agent
                .observe(Transition {
                    state: s.clone(),
                    reward: a[0],
                    action: a,
                    next_state: s.clone(),
                    done: true,
                })
                .unwrap();
        }
        let after = agent.greedy(&s).unwrap()[0];
        assert!(after > before + 0.3, "{before} -> {after}");
    }
}
