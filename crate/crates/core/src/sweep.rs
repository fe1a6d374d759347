//! Parameter sweeps: one system variable over a grid of values, per seed and
//! per surface mode, scored by the best feasible min-rate averaged over
//! random channels.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

use crate::agents::{train, Algo, TrainOptions};
use crate::baseline::{random_search, sample_channel};
use crate::config::RunConfig;
use crate::env::{evaluate_action, EnvConfig, RateTargetMode};
use crate::error::{Error, Result};
use crate::network::SystemConfig;
use crate::ris::RisMode;
use crate::rng::{derive_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    PBsMaxWatts,
    PAsrisWatts,
    HarvestThresholdJoules,
    NRisElements,
    NBsAntennas,
}

impl SweepVariable {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepVariable::PBsMaxWatts => "p_bs_max_watts",
            SweepVariable::PAsrisWatts => "p_asris_watts",
            SweepVariable::HarvestThresholdJoules => "harvest_threshold_joules",
            SweepVariable::NRisElements => "n_ris_elements",
            SweepVariable::NBsAntennas => "n_bs_antennas",
        }
    }

    fn is_count(&self) -> bool {
        matches!(self, SweepVariable::NRisElements | SweepVariable::NBsAntennas)
    }

    /// `base` with this variable set to `value`.
    pub fn apply(&self, base: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let mut sys = base.clone();
        if self.is_count() && (value < 1.0 || value.fract() != 0.0) {
            return Err(Error::Config(format!(
                "{} needs positive integers, got {value}",
                self.as_str()
            )));
        }
        match self {
            SweepVariable::PBsMaxWatts => sys.p_bs_max_watts = value,
            SweepVariable::PAsrisWatts => sys.p_asris_watts = value,
            SweepVariable::HarvestThresholdJoules => sys.harvest_threshold_joules = value,
            SweepVariable::NRisElements => sys.n_ris_elements = value as usize,
            SweepVariable::NBsAntennas => sys.n_bs_antennas = value as usize,
        }
        sys.validate()?;
        Ok(sys)
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How each sweep point is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMethod {
    #[default]
    Random,
    Ppo,
    Td3,
    A3c,
}

impl SweepMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepMethod::Random => "random",
            SweepMethod::Ppo => "ppo",
            SweepMethod::Td3 => "td3",
            SweepMethod::A3c => "a3c",
        }
    }

    fn algo(&self) -> Option<Algo> {
        match self {
            SweepMethod::Random => None,
            SweepMethod::Ppo => Some(Algo::Ppo),
            SweepMethod::Td3 => Some(Algo::Td3),
            SweepMethod::A3c => Some(Algo::A3c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub method: SweepMethod,
    /// Surface modes run with shared seeds.
    pub series: Vec<RisMode>,
    /// Random channels per (point, seed).
    pub channels: usize,
    /// Random-search samples per channel.
    pub budget: usize,
    /// Training episodes for learned methods; defaults to the train section.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub episodes: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            variable: SweepVariable::PBsMaxWatts,
            values: vec![4.0, 8.0, 16.0, 32.0],
            method: SweepMethod::Random,
            series: vec![RisMode::Active],
            channels: 100,
            budget: 1000,
            episodes: None,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self, base: &SystemConfig) -> Result<()> {
        if self.values.is_empty() || self.series.is_empty() {
            return Err(Error::Config("sweep needs at least one value and one series".into()));
        }
        if self.channels == 0 || self.budget == 0 {
            return Err(Error::Config("sweep channels and budget must be >= 1".into()));
        }
        for &v in &self.values {
            self.variable.apply(base, v)?;
        }
        Ok(())
    }
}

/// Metrics on one channel; an infeasible channel scores zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelScore {
    pub min_rate: f64,
    pub sum_rate: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointRecord {
    pub variable: SweepVariable,
    pub value: f64,
    pub series: RisMode,
    pub method: SweepMethod,
    pub seed: u64,
    pub min_rate: f64,
    pub sum_rate: f64,
    pub feasible_fraction: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub variable: SweepVariable,
    pub value: f64,
    pub series: RisMode,
    pub method: SweepMethod,
    pub seeds: Vec<u64>,
    pub failures: usize,
    pub mean_min_rate: f64,
    pub std_min_rate: f64,
    pub mean_sum_rate: f64,
    pub std_sum_rate: f64,
    pub mean_feasible_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub config_hash: String,
    pub points: Vec<PointRecord>,
    pub summary: Vec<SummaryRow>,
}

/// Channel `c` of a sweep point is drawn from `derive_seed(seed, EVAL, c)`,
/// so both surface modes see the same channels.
pub fn channel_seed(seed: u64, c: usize) -> u64 {
    derive_seed(seed, stream::EVAL, c as u64)
}

/// Mean of per-channel scores: (min_rate, sum_rate, feasible fraction).
pub fn mean_scores(scores: &[ChannelScore]) -> (f64, f64, f64) {
    let n = scores.len().max(1) as f64;
    let (mut m, mut s, mut f) = (0.0, 0.0, 0.0);
    for c in scores {
        m += c.min_rate;
        s += c.sum_rate;
        f += if c.feasible { 1.0 } else { 0.0 };
    }
    (m / n, s / n, f / n)
}

fn random_scores(
    sys: &SystemConfig,
    mode: RisMode,
    seed: u64,
    channels: usize,
    budget: usize,
) -> Result<Vec<ChannelScore>> {
    (0..channels)
        .map(|c| {
            let ch = sample_channel(sys, channel_seed(seed, c))?;
            let out = random_search(&ch, sys, mode, budget, derive_seed(seed, stream::SEARCH, c as u64))?;
            Ok(match out.best {
                Some(best) => ChannelScore {
                    min_rate: best.objective,
                    sum_rate: best.rates.sum_rate(),
                    feasible: true,
                },
                None => ChannelScore {
                    min_rate: 0.0,
                    sum_rate: 0.0,
                    feasible: false,
                },
            })
        })
        .collect()
}

fn learned_scores(
    algo: Algo,
    run: &RunConfig,
    sys: &SystemConfig,
    mode: RisMode,
    seed: u64,
    sweep: &SweepConfig,
    paper_scale: bool,
) -> Result<Vec<ChannelScore>> {
    let env = EnvConfig {
        ris_mode: mode,
        ..run.env.clone()
    };
    let episodes = sweep.episodes.unwrap_or_else(|| run.episodes(paper_scale));
    let out = train(algo, sys, &env, &run.agents(), episodes, seed, &TrainOptions::default())?;
    let eval_env = EnvConfig {
        rate_target: RateTargetMode::Derived,
        ..env
    };
    (0..sweep.channels)
        .map(|c| {
            let ch = sample_channel(sys, channel_seed(seed, c))?;
            let a = out.checkpoint.act_on(&ch)?;
            let (_, info) = evaluate_action(&a, &ch, sys, &eval_env)?;
            let feasible = info.constraints.all_satisfied();
            Ok(ChannelScore {
                min_rate: if feasible { info.objective } else { 0.0 },
                sum_rate: if feasible { info.rates.sum_rate() } else { 0.0 },
                feasible,
            })
        })
        .collect()
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn summarize(points: &[PointRecord], sweep: &SweepConfig) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &value in &sweep.values {
        for &series in &sweep.series {
            let group: Vec<&PointRecord> = points
                .iter()
                .filter(|p| p.value == value && p.series == series)
                .collect();
            let ok: Vec<&&PointRecord> = group.iter().filter(|p| p.error.is_none()).collect();
            let (mean_min_rate, std_min_rate) = mean_std(&ok.iter().map(|p| p.min_rate).collect::<Vec<_>>());
            let (mean_sum_rate, std_sum_rate) = mean_std(&ok.iter().map(|p| p.sum_rate).collect::<Vec<_>>());
            let (mean_feasible_fraction, _) = mean_std(&ok.iter().map(|p| p.feasible_fraction).collect::<Vec<_>>());
            rows.push(SummaryRow {
                variable: sweep.variable,
                value,
                series,
                method: sweep.method,
                seeds: group.iter().map(|p| p.seed).collect(),
                failures: group.len() - ok.len(),
                mean_min_rate,
                std_min_rate,
                mean_sum_rate,
                std_sum_rate,
                mean_feasible_fraction,
            });
        }
    }
    rows
}

/// Runs every (value, series, seed) point in parallel. A failing point is
/// recorded with its error and the sweep carries on.
pub fn run_sweep(run: &RunConfig, paper_scale: bool) -> Result<SweepOutcome> {
    let sweep = run
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("config has no [sweep] section".into()))?;
    run.validate()?;
    let tasks: Vec<(f64, RisMode, u64)> = sweep
        .values
        .iter()
        .flat_map(|&v| {
            sweep
                .series
                .iter()
                .flat_map(move |&s| run.seeds.iter().map(move |&seed| (v, s, seed)))
        })
        .collect();
    let points = tasks
        .par_iter()
        .map(|&(value, series, seed)| {
            let scores = sweep
                .variable
                .apply(&run.system, value)
                .and_then(|sys| match sweep.method.algo() {
                    None => random_scores(&sys, series, seed, sweep.channels, sweep.budget),
                    Some(algo) => learned_scores(algo, run, &sys, series, seed, sweep, paper_scale),
                });
            let (min_rate, sum_rate, feasible_fraction, error) = match scores {
                Ok(s) => {
                    let (m, r, f) = mean_scores(&s);
                    (m, r, f, None)
                }
                Err(e) => (f64::NAN, f64::NAN, f64::NAN, Some(e.to_string())),
            };
            PointRecord {
                variable: sweep.variable,
                value,
                series,
                method: sweep.method,
                seed,
                min_rate,
                sum_rate,
                feasible_fraction,
                error,
            }
        })
        .collect::<Vec<_>>();
    Ok(SweepOutcome {
        config_hash: run.hash()?,
        summary: summarize(&points, sweep),
        points,
    })
}

pub const POINTS_FILE: &str = "points.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const POINTS_HEADER: [&str; 10] = [
    "variable",
    "value",
    "series",
    "method",
    "seed",
    "min_rate",
    "sum_rate",
    "feasible_fraction",
    "error",
    "config_hash",
];
pub const SUMMARY_HEADER: [&str; 13] = [
    "variable",
    "value",
    "series",
    "method",
    "n_seeds",
    "failures",
    "mean_min_rate",
    "std_min_rate",
    "mean_sum_rate",
    "std_sum_rate",
    "mean_feasible_fraction",
    "seed",
    "config_hash",
];

impl SweepOutcome {
    /// Writes `points.csv` and `summary.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join(POINTS_FILE))?;
        w.write_record(POINTS_HEADER)?;
        for p in &self.points {
            w.write_record([
                p.variable.to_string(),
                p.value.to_string(),
                p.series.as_str().to_string(),
                p.method.as_str().to_string(),
                p.seed.to_string(),
                p.min_rate.to_string(),
                p.sum_rate.to_string(),
                p.feasible_fraction.to_string(),
                p.error.clone().unwrap_or_default(),
                self.config_hash.clone(),
            ])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join(SUMMARY_FILE))?;
        w.write_record(SUMMARY_HEADER)?;
        for r in &self.summary {
            let seeds: Vec<String> = r.seeds.iter().map(u64::to_string).collect();
            w.write_record([
                r.variable.to_string(),
                r.value.to_string(),
                r.series.as_str().to_string(),
                r.method.as_str().to_string(),
                r.seeds.len().to_string(),
                r.failures.to_string(),
                r.mean_min_rate.to_string(),
                r.std_min_rate.to_string(),
                r.mean_sum_rate.to_string(),
                r.std_sum_rate.to_string(),
                r.mean_feasible_fraction.to_string(),
                seeds.join(";"),
                self.config_hash.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
