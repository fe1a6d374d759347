//! Constraint system, max-min objective and reward of the rate problem.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{ChannelRealization, SystemConfig};
use crate::rates::{rate_report, DecisionVariables, RateReport};

/// Relative tolerance on the SINR-form rate-target checks.
pub const SINR_RTOL: f64 = 1e-9;

pub const N_CONSTRAINTS: usize = 11;

/// The eleven constraints, in the fixed order used by flags, slacks and logs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constraint {
    /// Passive split `beta_t + beta_r = 1`.
    PassiveSplit,
    /// Active amplitude cap.
    ActiveCap,
    /// Phase range `[0, 2 pi]`.
    PhaseRange,
    /// `0 <= P_i <= p_BS`.
    PowerCap,
    /// `0 <= eta_i <= 1`.
    EtaRange,
    /// `0 <= tau_i <= 1`.
    TauRange,
    /// Harvested energy at least the SBD threshold.
    EnergyHarvest,
    /// Phase-1 rates non-increasing along the SIC order.
    Phase1SicOrder,
    /// Phase-2 rates non-increasing along the SIC order, both sides.
    Phase2SicOrder,
    /// Phase-1 SINR supports the target rate.
    Phase1Target,
    /// Phase-2 SINRs support the target rate, both sides.
    Phase2Target,
}

impl Constraint {
    pub const ALL: [Constraint; N_CONSTRAINTS] = [
        Constraint::PassiveSplit,
        Constraint::ActiveCap,
        Constraint::PhaseRange,
        Constraint::PowerCap,
        Constraint::EtaRange,
        Constraint::TauRange,
        Constraint::EnergyHarvest,
        Constraint::Phase1SicOrder,
        Constraint::Phase2SicOrder,
        Constraint::Phase1Target,
        Constraint::Phase2Target,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Short label `C1` .. `C11`.
    pub fn label(self) -> &'static str {
        ["C1", "C2", "C3", "C4", "C5", "C6", "C7", "C8", "C9", "C10", "C11"][self.index()]
    }

    pub fn describe(self) -> &'static str {
        match self {
            Constraint::PassiveSplit => "passive split beta_t + beta_r = 1",
            Constraint::ActiveCap => "active amplitude cap",
            Constraint::PhaseRange => "phase in [0, 2pi]",
            Constraint::PowerCap => "0 <= P_i <= p_BS",
            Constraint::EtaRange => "0 <= eta_i <= 1",
            Constraint::TauRange => "0 <= tau_i <= 1",
            Constraint::EnergyHarvest => "harvested energy >= threshold",
            Constraint::Phase1SicOrder => "phase-1 SIC rate ordering",
            Constraint::Phase2SicOrder => "phase-2 SIC rate ordering",
            Constraint::Phase1Target => "phase-1 rate >= R",
            Constraint::Phase2Target => "phase-2 rates >= R",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub flags: [bool; N_CONSTRAINTS],
    pub slacks: [f64; N_CONSTRAINTS],
}

impl ConstraintReport {
    pub fn from_slacks(slacks: [f64; N_CONSTRAINTS]) -> Self {
        Self {
            flags: slacks.map(|s| s >= 0.0),
            slacks,
        }
    }

    pub fn flag(&self, c: Constraint) -> bool {
        self.flags[c.index()]
    }

    pub fn slack(&self, c: Constraint) -> f64 {
        self.slacks[c.index()]
    }

    pub fn satisfied_count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn violated_count(&self) -> usize {
        N_CONSTRAINTS - self.satisfied_count()
    }

    pub fn all_satisfied(&self) -> bool {
        self.flags.iter().all(|&f| f)
    }

    /// Column names of the flat CSV record: eleven flags then eleven slacks.
    pub fn csv_header() -> Vec<String> {
        let flags = Constraint::ALL.iter().map(|c| format!("{}_ok", c.label()));
        let slacks = Constraint::ALL.iter().map(|c| format!("{}_slack", c.label()));
        flags.chain(slacks).collect()
    }

    pub fn csv_record(&self) -> Vec<String> {
        let flags = self.flags.iter().map(|&f| u8::from(f).to_string());
        let slacks = self.slacks.iter().map(|s| s.to_string());
        flags.chain(slacks).collect()
    }
}

/// Minimum that propagates NaN and returns `empty` for no items.
fn strict_min(values: impl IntoIterator<Item = f64>, empty: f64) -> f64 {
    let mut out: Option<f64> = None;
    for v in values {
        if v.is_nan() {
            return f64::NAN;
        }
        out = Some(out.map_or(v, |o| o.min(v)));
    }
    out.unwrap_or(empty)
}

fn range_slack(values: &[f64], hi: f64) -> f64 {
    strict_min(values.iter().map(|&v| v.min(hi - v)), 0.0)
}

/// Energy harvested by SBD `i` during phase 2.
pub fn harvested_energy(ch: &ChannelRealization, dv: &DecisionVariables, cfg: &SystemConfig, i: usize) -> Result<f64> {
    ch.check_dims(cfg)?;
    dv.check_dims(cfg)?;
    if i >= cfg.n_pairs {
        return Err(Error::Shape {
            what: "user index",
            expected: cfg.n_pairs,
            got: i,
        });
    }
    let hw: num_complex::Complex64 = ch
        .h1
        .column(i)
        .iter()
        .zip(dv.w1.column(i).iter())
        .map(|(h, w)| h.conj() * w)
        .sum();
    Ok(cfg.energy_conversion_efficiency * dv.power[i] * (1.0 - dv.eta[i]) * (1.0 - dv.tau[i]) * hw.norm_sqr())
}

/// Smallest gap between consecutive rates along a SIC order.
fn ordering_slack(rates: &[f64], order: &[usize]) -> f64 {
    strict_min(order.windows(2).map(|p| rates[p[0]] - rates[p[1]]), 0.0)
}

/// SINR needed to carry `rate` over `fraction` of the bandwidth-time,
/// i.e. `2^(rate / fraction) - 1`.
fn required_sinr(rate: f64, fraction: f64) -> f64 {
    if rate <= 0.0 {
        0.0
    } else if fraction <= 0.0 {
        f64::INFINITY
    } else {
        (rate / fraction * std::f64::consts::LN_2).exp_m1()
    }
}

fn target_slack(sinr: f64, required: f64) -> f64 {
    if required.is_infinite() {
        return f64::NEG_INFINITY;
    }
    sinr - required * (1.0 - SINR_RTOL)
}

pub fn evaluate_constraints(
    ch: &ChannelRealization,
    dv: &DecisionVariables,
    cfg: &SystemConfig,
    rates: &RateReport,
) -> Result<ConstraintReport> {
    ch.check_dims(cfg)?;
    dv.check_dims(cfg)?;
    let users = cfg.n_pairs;
    let ris = dv.ris.validate(cfg);
    let b = cfg.bandwidth_hz;
    let k = cfg.symbols_per_bd_symbol as f64;
    let r = dv.rate_target;

    let energy = strict_min(
        (0..users)
            .map(|i| harvested_energy(ch, dv, cfg, i).map(|e| e - cfg.harvest_threshold_joules))
            .collect::<Result<Vec<_>>>()?,
        0.0,
    );

    let phase1_target = strict_min(
        (0..users).map(|i| target_slack(rates.sinr1[i], required_sinr(k * r, b * dv.tau[i]))),
        0.0,
    );
    let phase2_target = strict_min(
        (0..users).flat_map(|i| {
            let need = required_sinr(r, b * (1.0 - dv.tau[i]));
            [target_slack(rates.sinr2r[i], need), target_slack(rates.sinr2t[i], need)]
        }),
        0.0,
    );

    let mut slacks = [0.0; N_CONSTRAINTS];
    slacks[Constraint::PassiveSplit.index()] = ris.passive_split_slack;
    slacks[Constraint::ActiveCap.index()] = ris.active_cap_slack;
    slacks[Constraint::PhaseRange.index()] = ris.phase_range_slack;
    slacks[Constraint::PowerCap.index()] = range_slack(&dv.power, cfg.p_bs_max_watts);
    slacks[Constraint::EtaRange.index()] = range_slack(&dv.eta, 1.0);
    slacks[Constraint::TauRange.index()] = range_slack(&dv.tau, 1.0);
    slacks[Constraint::EnergyHarvest.index()] = energy;
    slacks[Constraint::Phase1SicOrder.index()] = ordering_slack(&rates.r1, &rates.order1);
    slacks[Constraint::Phase2SicOrder.index()] = strict_min(
        [
            ordering_slack(&rates.r2r, &rates.order2r),
            ordering_slack(&rates.r2t, &rates.order2t),
        ],
        0.0,
    );
    slacks[Constraint::Phase1Target.index()] = phase1_target;
    slacks[Constraint::Phase2Target.index()] = phase2_target;
    Ok(ConstraintReport::from_slacks(slacks))
}

/// Max-min objective: the smallest of all `3I` rates.
pub fn objective(rates: &RateReport) -> f64 {
    strict_min(rates.r1.iter().chain(&rates.r2r).chain(&rates.r2t).copied(), 0.0)
}

/// Rates and constraints in one pass.
pub fn assess(
    ch: &ChannelRealization,
    dv: &DecisionVariables,
    cfg: &SystemConfig,
) -> Result<(RateReport, ConstraintReport)> {
    let rates = rate_report(ch, dv, cfg)?;
    let report = evaluate_constraints(ch, dv, cfg, &rates)?;
    Ok((rates, report))
}

/// Like [`assess`], with the rate target first set to the achieved minimum rate.
pub fn assess_derived(
    ch: &ChannelRealization,
    dv: &mut DecisionVariables,
    cfg: &SystemConfig,
) -> Result<(RateReport, ConstraintReport)> {
    let rates = rate_report(ch, dv, cfg)?;
    dv.rate_target = objective(&rates);
    let report = evaluate_constraints(ch, dv, cfg, &rates)?;
    Ok((rates, report))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RewardMode {
    /// `R_t` plus `R_t` for every satisfied constraint.
    #[default]
    Literal,
    /// `R_t` minus `cost` per violated constraint.
    Penalty { cost: f64 },
}

pub fn reward(objective_value: f64, report: &ConstraintReport, mode: RewardMode) -> f64 {
    match mode {
        RewardMode::Literal => objective_value * (1 + report.satisfied_count()) as f64,
        RewardMode::Penalty { cost } => objective_value - cost * report.violated_count() as f64,
    }
}
