//! Episodic environment over the rate problem.
//!
//! The state is the flattened channel realization; the action is a vector in
//! `[-1, 1]^D` that decodes to a full [`DecisionVariables`] point. Placement is
//! drawn once per episode and fading is redrawn on every step.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Error, Result};
use crate::network::{draw_realization, ChannelRealization, Placement, SystemConfig};
use crate::problem::{assess, assess_derived, objective, reward, ConstraintReport, RewardMode};
use crate::rates::{DecisionVariables, RateReport};
use crate::ris::{RisCoefficients, RisMode};
use crate::rng::{derive_seed, stream};

/// Where the reward's rate comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateTargetMode {
    /// The decoded action's `R`, checked against the target constraints.
    #[default]
    Literal,
    /// The achieved min-rate replaces `R` before constraints are checked.
    Derived,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub episode_len: usize,
    pub reward: RewardMode,
    pub rate_target: RateTargetMode,
    pub ris_mode: RisMode,
    pub normalize_obs: bool,
    /// Clip applied to standardized observations.
    pub obs_clip: f64,
    /// Fixed cap for decoding `R`; `None` uses the per-realization envelope.
    pub rate_cap_bps: Option<f64>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            episode_len: 200,
            reward: RewardMode::Literal,
            rate_target: RateTargetMode::Literal,
            ris_mode: RisMode::Active,
            normalize_obs: true,
            obs_clip: 10.0,
            rate_cap_bps: None,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episode_len == 0 {
            return Err(Error::Config("episode_len must be >= 1".into()));
        }
        if !(self.obs_clip > 0.0) {
            return Err(Error::Config("obs_clip must be > 0".into()));
        }
        if let Some(cap) = self.rate_cap_bps {
            if !(cap.is_finite() && cap >= 0.0) {
                return Err(Error::Config("rate_cap_bps must be finite and >= 0".into()));
            }
        }
        if let RewardMode::Penalty { cost } = self.reward {
            if !cost.is_finite() {
                return Err(Error::Config("penalty cost must be finite".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionVector(pub Vec<f64>);

/// Offsets of each decision block inside an action vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionLayout {
    pub n: usize,
    pub m: usize,
    pub i: usize,
}

impl ActionLayout {
    pub fn new(cfg: &SystemConfig) -> Self {
        Self {
            n: cfg.n_bs_antennas,
            m: cfg.n_ris_elements,
            i: cfg.n_pairs,
        }
    }

    pub fn rate(&self) -> usize {
        0
    }
    pub fn eta(&self) -> usize {
        1
    }
    pub fn tau(&self) -> usize {
        1 + self.i
    }
    pub fn power(&self) -> usize {
        1 + 2 * self.i
    }
    pub fn w1(&self) -> usize {
        1 + 3 * self.i
    }
    pub fn w2(&self) -> usize {
        self.w1() + 2 * self.n * self.i
    }
    pub fn beta_t(&self) -> usize {
        self.w2() + 2 * self.n * self.i
    }
    pub fn beta_r(&self) -> usize {
        self.beta_t() + self.m
    }
    pub fn theta_t(&self) -> usize {
        self.beta_r() + self.m
    }
    pub fn theta_r(&self) -> usize {
        self.theta_t() + self.m
    }
    pub fn dim(&self) -> usize {
        1 + 3 * self.i + 4 * self.n * self.i + 4 * self.m
    }
}

pub fn action_dim(cfg: &SystemConfig) -> usize {
    ActionLayout::new(cfg).dim()
}

pub fn state_dim(cfg: &SystemConfig) -> usize {
    let (n, m, i) = (cfg.n_bs_antennas, cfg.n_ris_elements, cfg.n_pairs);
    2 * (3 * n * i + m * n + 2 * i * m)
}

/// Flattens `h1, g1, h2, h3, g2r, g2t`; each block contributes its real parts
/// (row-major) followed by its imaginary parts.
pub fn state_vector(ch: &ChannelRealization) -> Vec<f64> {
    let mut out = Vec::new();
    for block in ch.blocks() {
        out.extend(block.iter().map(|z| z.re));
        out.extend(block.iter().map(|z| z.im));
    }
    out
}

/// Upper envelope on any achievable rate for one realization, used to scale
/// the `R` action component.
pub fn rate_cap(ch: &ChannelRealization, cfg: &SystemConfig, ris_mode: RisMode) -> f64 {
    let beta_max = match ris_mode {
        RisMode::Active => cfg.active_cap.max_beta(cfg.p_asris_watts),
        RisMode::Passive => 1.0,
    };
    let sq = |v: ndarray::ArrayView1<Complex64>| v.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let h2_fro = ch.h2.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut g_max: f64 = 0.0;
    for i in 0..ch.n_pairs() {
        let phase1 = sq(ch.g1.column(i)) * sq(ch.h1.column(i));
        let through = beta_max.sqrt() * h2_fro;
        let reflect = (sq(ch.h3.column(i)).sqrt() + through * sq(ch.g2r.row(i)).sqrt()).powi(2);
        let transmit = (through * sq(ch.g2t.row(i)).sqrt()).powi(2);
        g_max = g_max.max(phase1).max(reflect).max(transmit);
    }
    let sigma_min = cfg.noise_bs_watts.min(cfg.noise_sue_watts).max(f64::MIN_POSITIVE);
    let k = cfg.symbols_per_bd_symbol as f64;
    let b = cfg.bandwidth_hz;
    b * (1.0 + k * cfg.p_bs_max_watts * g_max / (b * sigma_min)).log2()
}

fn unit(a: f64) -> f64 {
    (a.clamp(-1.0, 1.0) + 1.0) / 2.0
}

fn decode_beamformers(a: &[f64], n: usize, users: usize) -> Array2<Complex64> {
    let mut w = Array2::<Complex64>::zeros((n, users));
    for u in 0..users {
        let block = &a[2 * n * u..2 * n * (u + 1)];
        let col: Vec<Complex64> = (0..n)
            .map(|k| Complex64::new(block[k].clamp(-1.0, 1.0), block[n + k].clamp(-1.0, 1.0)))
            .collect();
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for (k, z) in col.into_iter().enumerate() {
            w[[k, u]] = if norm > 0.0 {
                z / norm
            } else if k == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
    }
    w
}

/// Maps an action in `[-1, 1]^D` (out-of-range entries are clipped) to a
/// decision point. `rate_cap` scales the `R` component.
pub fn decode_action(
    a: &ActionVector,
    cfg: &SystemConfig,
    ris_mode: RisMode,
    rate_cap: f64,
) -> Result<DecisionVariables> {
    let lay = ActionLayout::new(cfg);
    let a = &a.0;
    if a.len() != lay.dim() {
        return Err(Error::Shape {
            what: "action",
            expected: lay.dim(),
            got: a.len(),
        });
    }
    if let Some(bad) = a.iter().find(|v| v.is_nan()) {
        return Err(Error::NonFinite(format!("action component {bad}")));
    }
    let (n, m, users) = (lay.n, lay.m, lay.i);
    let seg = |start: usize, len: usize| &a[start..start + len];
    let units = |start: usize, len: usize| seg(start, len).iter().map(|&v| unit(v)).collect::<Vec<_>>();

    let beta_t_raw = units(lay.beta_t(), m);
    let (beta_t, beta_r) = match ris_mode {
        RisMode::Active => {
            let cap = cfg.active_cap.max_beta(cfg.p_asris_watts);
            (
                beta_t_raw.iter().map(|b| b * cap).collect(),
                units(lay.beta_r(), m).iter().map(|b| b * cap).collect(),
            )
        }
        RisMode::Passive => {
            let beta_r = beta_t_raw.iter().map(|b| 1.0 - b).collect();
            (beta_t_raw, beta_r)
        }
    };
    let phase = |start: usize| units(start, m).iter().map(|u| 2.0 * PI * u).collect::<Vec<_>>();

    Ok(DecisionVariables {
        rate_target: unit(a[lay.rate()]) * rate_cap,
        eta: units(lay.eta(), users),
        tau: units(lay.tau(), users),
        power: units(lay.power(), users)
            .iter()
            .map(|p| p * cfg.p_bs_max_watts)
            .collect(),
        w1: decode_beamformers(seg(lay.w1(), 2 * n * users), n, users),
        w2: decode_beamformers(seg(lay.w2(), 2 * n * users), n, users),
        ris: RisCoefficients {
            beta_t,
            beta_r,
            theta_t: phase(lay.theta_t()),
            theta_r: phase(lay.theta_r()),
            mode: ris_mode,
        },
    })
}

/// Inverse of [`decode_action`] for in-range decision points.
pub fn encode_action(dv: &DecisionVariables, cfg: &SystemConfig, rate_cap: f64) -> Result<ActionVector> {
    dv.check_dims(cfg)?;
    let lay = ActionLayout::new(cfg);
    let to_action = |u: f64| (2.0 * u - 1.0).clamp(-1.0, 1.0);
    let mut a = Vec::with_capacity(lay.dim());
    a.push(if rate_cap > 0.0 {
        to_action(dv.rate_target / rate_cap)
    } else {
        -1.0
    });
    a.extend(dv.eta.iter().map(|&v| to_action(v)));
    a.extend(dv.tau.iter().map(|&v| to_action(v)));
    a.extend(dv.power.iter().map(|&p| to_action(p / cfg.p_bs_max_watts)));
    for w in [&dv.w1, &dv.w2] {
        for u in 0..lay.i {
            a.extend(w.column(u).iter().map(|z| z.re.clamp(-1.0, 1.0)));
            a.extend(w.column(u).iter().map(|z| z.im.clamp(-1.0, 1.0)));
        }
    }
    let cap = match dv.ris.mode {
        RisMode::Active => cfg.active_cap.max_beta(cfg.p_asris_watts),
        RisMode::Passive => 1.0,
    };
    a.extend(dv.ris.beta_t.iter().map(|&b| to_action(b / cap)));
    a.extend(dv.ris.beta_r.iter().map(|&b| match dv.ris.mode {
        RisMode::Active => to_action(b / cap),
        RisMode::Passive => 0.0,
    }));
    a.extend(dv.ris.theta_t.iter().map(|&t| to_action(t / (2.0 * PI))));
    a.extend(dv.ris.theta_r.iter().map(|&t| to_action(t / (2.0 * PI))));
    Ok(ActionVector(a))
}

/// Per-component running mean and variance with clipping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningNorm {
    pub count: u64,
    pub mean: Vec<f64>,
    pub m2: Vec<f64>,
    pub clip: f64,
    pub frozen: bool,
}

impl RunningNorm {
    pub fn new(dim: usize, clip: f64) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
            clip,
            frozen: false,
        }
    }

    pub fn update(&mut self, x: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for ((mean, m2), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let delta = v - *mean;
            *mean += delta / n;
            *m2 += delta * (v - *mean);
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.m2))
            .map(|(&v, (&mean, &m2))| {
                let var = if self.count > 0 { m2 / self.count as f64 } else { 0.0 };
                if var > 0.0 {
                    ((v - mean) / var.sqrt()).clamp(-self.clip, self.clip)
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Updates the statistics (unless frozen) and standardizes `x`.
    pub fn observe(&mut self, x: &[f64]) -> Vec<f64> {
        if !self.frozen {
            self.update(x);
        }
        self.apply(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub decision: DecisionVariables,
    pub rates: RateReport,
    pub constraints: ConstraintReport,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_state: State,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Decision point, rates, constraints and reward of one action on one realization.
pub fn evaluate_action(
    a: &ActionVector,
    ch: &ChannelRealization,
    sys: &SystemConfig,
    env: &EnvConfig,
) -> Result<(f64, StepInfo)> {
    let cap = env.rate_cap_bps.unwrap_or_else(|| rate_cap(ch, sys, env.ris_mode));
    let mut dv = decode_action(a, sys, env.ris_mode, cap)?;
    let (rates, constraints) = match env.rate_target {
        RateTargetMode::Literal => assess(ch, &dv, sys)?,
        RateTargetMode::Derived => assess_derived(ch, &mut dv, sys)?,
    };
    let r_t = match env.rate_target {
        RateTargetMode::Literal => dv.rate_target,
        RateTargetMode::Derived => objective(&rates),
    };
    let value = reward(r_t, &constraints, env.reward);
    if !value.is_finite() {
        return Err(Error::NonFinite(format!("reward {value}")));
    }
    let objective = objective(&rates);
    Ok((
        value,
        StepInfo {
            decision: dv,
            rates,
            constraints,
            objective,
        },
    ))
}

pub struct SrEnv {
    sys: SystemConfig,
    cfg: EnvConfig,
    episode_seed: u64,
    placement: Option<Placement>,
    channels: Option<ChannelRealization>,
    steps: usize,
    norm: RunningNorm,
}

impl SrEnv {
    pub fn new(sys: SystemConfig, cfg: EnvConfig) -> Result<Self> {
        sys.validate()?;
        cfg.validate()?;
        let norm = RunningNorm::new(state_dim(&sys), cfg.obs_clip);
        Ok(Self {
            sys,
            cfg,
            episode_seed: 0,
            placement: None,
            channels: None,
            steps: 0,
            norm,
        })
    }

    pub fn system(&self) -> &SystemConfig {
        &self.sys
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn state_dim(&self) -> usize {
        state_dim(&self.sys)
    }

    pub fn action_dim(&self) -> usize {
        action_dim(&self.sys)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn channels(&self) -> Option<&ChannelRealization> {
        self.channels.as_ref()
    }

    pub fn placement(&self) -> Option<&Placement> {
        self.placement.as_ref()
    }

    pub fn normalizer(&self) -> &RunningNorm {
        &self.norm
    }

    pub fn set_normalizer(&mut self, norm: RunningNorm) -> Result<()> {
        if norm.mean.len() != self.state_dim() {
            return Err(Error::Shape {
                what: "normalizer",
                expected: self.state_dim(),
                got: norm.mean.len(),
            });
        }
        self.norm = norm;
        Ok(())
    }

    /// Stops (or resumes) updating the observation statistics.
    pub fn freeze_normalizer(&mut self, frozen: bool) {
        self.norm.frozen = frozen;
    }

    fn observe(&mut self, ch: &ChannelRealization) -> State {
        let raw = state_vector(ch);
        if self.cfg.normalize_obs {
            State(self.norm.observe(&raw))
        } else {
            State(raw)
        }
    }

    fn draw(&self, step: usize) -> Result<ChannelRealization> {
        let placement = self.placement.as_ref().ok_or(Error::Protocol("step before reset"))?;
        draw_realization(
            &self.sys,
            placement,
            derive_seed(self.episode_seed, stream::FADING, step as u64),
        )
    }

    /// Starts an episode: new placement and first fading draw from `seed`.
    pub fn reset(&mut self, seed: u64) -> Result<State> {
        self.episode_seed = seed;
        self.placement = Some(Placement::random(&self.sys, derive_seed(seed, stream::PLACEMENT, 0))?);
        self.steps = 0;
        let ch = self.draw(0)?;
        let state = self.observe(&ch);
        self.channels = Some(ch);
        Ok(state)
    }

    pub fn is_done(&self) -> bool {
        self.steps >= self.cfg.episode_len
    }

    pub fn step(&mut self, a: &ActionVector) -> Result<StepResult> {
        let ch = self.channels.as_ref().ok_or(Error::Protocol("step before reset"))?;
        if self.is_done() {
            return Err(Error::Protocol("step after episode end"));
        }
        let (reward, info) = evaluate_action(a, ch, &self.sys, &self.cfg)?;
        self.steps += 1;
        let next = self.draw(self.steps)?;
        let next_state = self.observe(&next);
        self.channels = Some(next);
        Ok(StepResult {
            next_state,
            reward,
            done: self.is_done(),
            info,
        })
    }
}

/// Header of the per-step trace CSV.
pub fn step_trace_header() -> Vec<String> {
    let mut h = vec!["step".to_string(), "reward".into(), "min_rate".into()];
    h.extend(
        crate::problem::Constraint::ALL
            .iter()
            .map(|c| format!("{}_ok", c.label())),
    );
    h
}

pub fn step_trace_record(step: usize, result: &StepResult) -> Vec<String> {
    let mut r = vec![
        step.to_string(),
        result.reward.to_string(),
        result.info.rates.min_rate.to_string(),
    ];
    r.extend(result.info.constraints.flags.iter().map(|&f| u8::from(f).to_string()));
    r
}

/// Writes a per-step trace (step, reward, min_rate, 11 flags) as CSV.
pub fn write_step_trace<W: Write>(out: W, results: &[StepResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(step_trace_header())?;
    for (k, r) in results.iter().enumerate() {
        w.write_record(step_trace_record(k, r))?;
    }
    w.flush()?;
    Ok(())
}
