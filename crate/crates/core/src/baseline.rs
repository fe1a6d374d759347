//! Non-learning baselines: uniform random search over actions and an
//! exhaustive grid oracle for the single-antenna, single-element, single-user
//! network.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::path::Path;

use crate::config::RunConfig;
use crate::env::{evaluate_action, ActionVector, EnvConfig, RateTargetMode};
use crate::error::{Error, Result};
use crate::network::{draw_realization, ChannelRealization, Placement, SystemConfig};
use crate::problem::assess_derived;
use crate::rates::{DecisionVariables, RateReport};
use crate::ris::{RisCoefficients, RisMode};
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::sweep::channel_seed;

/// Default cap on the number of grid points the oracle will visit.
pub const DEFAULT_GRID_CAP: u64 = 10_000_000;

/// Placement and first fading draw for `seed`, as an episode reset would make them.
pub fn sample_channel(sys: &SystemConfig, seed: u64) -> Result<ChannelRealization> {
    let placement = Placement::random(sys, derive_seed(seed, stream::PLACEMENT, 0))?;
    draw_realization(sys, &placement, derive_seed(seed, stream::FADING, 0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub action: ActionVector,
    pub decision: DecisionVariables,
    pub rates: RateReport,
    /// Minimum rate, which is also the rate target.
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    /// Best feasible sample; ties keep the earliest.
    pub best: Option<Candidate>,
    pub evaluated: usize,
    pub feasible: usize,
}

impl SearchOutcome {
    pub fn best_objective(&self) -> Option<f64> {
        self.best.as_ref().map(|c| c.objective)
    }
}

/// Draws `budget` uniform actions from `derive_seed(seed, SEARCH, 0)` and keeps
/// the best one meeting every constraint, with the rate target set to the
/// achieved minimum rate.
pub fn random_search(
    ch: &ChannelRealization,
    sys: &SystemConfig,
    ris_mode: RisMode,
    budget: usize,
    seed: u64,
) -> Result<SearchOutcome> {
    if budget == 0 {
        return Err(Error::Config("random search budget must be at least 1".into()));
    }
    let env = EnvConfig {
        rate_target: RateTargetMode::Derived,
        ris_mode,
        ..EnvConfig::default()
    };
    let dim = crate::env::action_dim(sys);
    let mut rng = rng_from_seed(derive_seed(seed, stream::SEARCH, 0));
    let mut out = SearchOutcome {
        best: None,
        evaluated: 0,
        feasible: 0,
    };
    for _ in 0..budget {
        let a = ActionVector((0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect());
        let (_, info) = evaluate_action(&a, ch, sys, &env)?;
        out.evaluated += 1;
        if !info.constraints.all_satisfied() {
            continue;
        }
        out.feasible += 1;
        if out.best_objective().is_none_or(|b| info.objective > b) {
            out.best = Some(Candidate {
                action: a,
                decision: info.decision,
                rates: info.rates,
                objective: info.objective,
            });
        }
    }
    Ok(out)
}

/// Values taken by one decision variable in the oracle grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Axis {
    Fixed {
        value: f64,
    },
    /// `steps` evenly spaced values from `lo` to `hi` inclusive.
    Span {
        lo: f64,
        hi: f64,
        steps: usize,
    },
    Levels {
        values: Vec<f64>,
    },
}

impl Axis {
    pub fn fixed(value: f64) -> Self {
        Axis::Fixed { value }
    }

    pub fn span(lo: f64, hi: f64, steps: usize) -> Self {
        Axis::Span { lo, hi, steps }
    }

    pub fn levels(values: Vec<f64>) -> Self {
        Axis::Levels { values }
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match self {
            Axis::Fixed { value } => vec![*value],
            Axis::Span { lo, hi, steps } => match steps {
                0 => return Err(Error::Config("grid span needs at least one step".into())),
                1 => vec![*lo],
                s => (0..*s).map(|k| lo + (hi - lo) * k as f64 / (*s - 1) as f64).collect(),
            },
            Axis::Levels { values } => values.clone(),
        };
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config(format!("grid axis {self:?} must hold finite values")));
        }
        Ok(v)
    }

    fn len(&self) -> u128 {
        match self {
            Axis::Fixed { .. } => 1,
            Axis::Span { steps, .. } => *steps as u128,
            Axis::Levels { values } => values.len() as u128,
        }
    }
}

/// Discretized decision space for the scalar network. In passive mode the
/// `beta_r` axis is ignored and `beta_r = 1 - beta_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub eta: Axis,
    pub tau: Axis,
    pub power: Axis,
    pub beta_t: Axis,
    pub beta_r: Axis,
    pub theta_t: Axis,
    pub theta_r: Axis,
    pub mode: RisMode,
    pub cap: u64,
}

/// `k * 2 pi / steps` for `k < steps`; doubling `steps` refines the grid.
fn phase_axis(steps: usize) -> Axis {
    Axis::levels(
        (0..steps.max(1))
            .map(|k| TAU * k as f64 / steps.max(1) as f64)
            .collect(),
    )
}

impl GridSpec {
    /// Every variable on `steps` points over its full range.
    pub fn uniform(sys: &SystemConfig, mode: RisMode, steps: usize) -> Self {
        let beta_hi = match mode {
            RisMode::Active => sys.active_cap.max_beta(sys.p_asris_watts),
            RisMode::Passive => 1.0,
        };
        Self {
            eta: Axis::span(0.0, 1.0, steps),
            tau: Axis::span(0.0, 1.0, steps),
            power: Axis::span(0.0, sys.p_bs_max_watts, steps),
            beta_t: Axis::span(0.0, beta_hi, steps),
            beta_r: Axis::span(0.0, beta_hi, steps),
            theta_t: phase_axis(steps),
            theta_r: phase_axis(steps),
            mode,
            cap: DEFAULT_GRID_CAP,
        }
    }

    pub fn points(&self) -> u128 {
        let beta_r = match self.mode {
            RisMode::Active => self.beta_r.len(),
            RisMode::Passive => 1,
        };
        self.eta.len()
            * self.tau.len()
            * self.power.len()
            * self.beta_t.len()
            * beta_r
            * self.theta_t.len()
            * self.theta_r.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutcome {
    /// Best feasible grid point; ties keep the first in iteration order.
    pub best: Option<DecisionVariables>,
    pub min_rate: Option<f64>,
    pub evaluated: u64,
    pub feasible: u64,
}

impl OracleOutcome {
    pub fn is_feasible(&self) -> bool {
        self.best.is_some()
    }
}

/// Exhaustive search of `spec` on one realization of the scalar network.
pub fn grid_oracle(ch: &ChannelRealization, sys: &SystemConfig, spec: &GridSpec) -> Result<OracleOutcome> {
    if (sys.n_bs_antennas, sys.n_ris_elements, sys.n_pairs) != (1, 1, 1) {
        return Err(Error::Config("the grid oracle only supports N = M = I = 1".into()));
    }
    ch.check_dims(sys)?;
    let points = spec.points();
    if points > spec.cap as u128 {
        return Err(Error::GridTooLarge { points, cap: spec.cap });
    }
    let eta = spec.eta.values()?;
    let tau = spec.tau.values()?;
    let power = spec.power.values()?;
    let beta_t = spec.beta_t.values()?;
    let beta_r = match spec.mode {
        RisMode::Active => spec.beta_r.values()?,
        RisMode::Passive => vec![f64::NAN],
    };
    let theta_t = spec.theta_t.values()?;
    let theta_r = spec.theta_r.values()?;

    let one = Array2::from_elem((1, 1), Complex64::new(1.0, 0.0));
    let mut dv = DecisionVariables {
        rate_target: 0.0,
        eta: vec![0.0],
        tau: vec![0.0],
        power: vec![0.0],
        w1: one.clone(),
        w2: one,
        ris: RisCoefficients {
            beta_t: vec![0.0],
            beta_r: vec![0.0],
            theta_t: vec![0.0],
            theta_r: vec![0.0],
            mode: spec.mode,
        },
    };
    let mut out = OracleOutcome {
        best: None,
        min_rate: None,
        evaluated: 0,
        feasible: 0,
    };
    for &e in &eta {
        dv.eta[0] = e;
        for &t in &tau {
            dv.tau[0] = t;
            for &p in &power {
                dv.power[0] = p;
                for &bt in &beta_t {
                    dv.ris.beta_t[0] = bt;
                    for &br in &beta_r {
                        dv.ris.beta_r[0] = if spec.mode == RisMode::Passive { 1.0 - bt } else { br };
                        for &tt in &theta_t {
                            dv.ris.theta_t[0] = tt;
                            for &tr in &theta_r {
                                dv.ris.theta_r[0] = tr;
                                let (rates, report) = assess_derived(ch, &mut dv, sys)?;
                                out.evaluated += 1;
                                if !report.all_satisfied() {
                                    continue;
                                }
                                out.feasible += 1;
                                if out.min_rate.is_none_or(|b| rates.min_rate > b) {
                                    out.min_rate = Some(rates.min_rate);
                                    out.best = Some(dv.clone());
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

pub const BASELINE_FILE: &str = "baseline.csv";
pub const BASELINE_HEADER: [&str; 9] = [
    "seed",
    "channel",
    "mode",
    "budget",
    "best_min_rate",
    "best_sum_rate",
    "feasible_samples",
    "evaluated",
    "config_hash",
];

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRow {
    pub seed: u64,
    pub channel: usize,
    pub mode: RisMode,
    pub budget: usize,
    /// `None` when no sample met every constraint.
    pub best_min_rate: Option<f64>,
    pub best_sum_rate: Option<f64>,
    pub feasible: usize,
    pub evaluated: usize,
}

/// Random search on `run.baseline.channels` channels per seed, drawn and
/// searched with the same streams as a random-search sweep.
pub fn run_baseline(run: &RunConfig, budget: usize, seeds: &[u64]) -> Result<Vec<BaselineRow>> {
    let jobs: Vec<(u64, usize)> = seeds
        .iter()
        .flat_map(|&s| (0..run.baseline.channels).map(move |c| (s, c)))
        .collect();
    jobs.par_iter()
        .map(|&(seed, c)| {
            let ch = sample_channel(&run.system, channel_seed(seed, c))?;
            let mode = run.env.ris_mode;
            let out = random_search(
                &ch,
                &run.system,
                mode,
                budget,
                derive_seed(seed, stream::SEARCH, c as u64),
            )?;
            Ok(BaselineRow {
                seed,
                channel: c,
                mode,
                budget,
                best_min_rate: out.best.as_ref().map(|b| b.objective),
                best_sum_rate: out.best.as_ref().map(|b| b.rates.sum_rate()),
                feasible: out.feasible,
                evaluated: out.evaluated,
            })
        })
        .collect()
}

pub fn write_baseline(rows: &[BaselineRow], config_hash: &str, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(BASELINE_HEADER)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.seed.to_string(),
            r.channel.to_string(),
            r.mode.as_str().to_string(),
            r.budget.to_string(),
            opt(r.best_min_rate),
            opt(r.best_sum_rate),
            r.feasible.to_string(),
            r.evaluated.to_string(),
            config_hash.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
