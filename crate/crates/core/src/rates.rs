//! Achievable rates of the two-phase backscatter relay.
//!
//! Phase 1: the BS illuminates every SBD with beamformer `w1_i` and power
//! `P_i`; the SBDs backscatter with coefficient `eta_i` and the BS decodes
//! them with MRC and SIC. Phase 2: the BS forwards each SBD's data with
//! beamformer `w2_i` to a reflect-side SUE (direct link plus ASRIS reflection)
//! and a transmit-side SUE (ASRIS transmission only).
//!
//! SIC ordering everywhere uses the realized effective strength of each
//! user's own signal: users ranked earlier are decoded first and every user
//! sees the users ranked before it as interference.

use ndarray::{Array2, ArrayView1};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{ChannelRealization, SystemConfig};
use crate::ris::{RisCoefficients, Side};

/// One candidate solution of the max-min problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionVariables {
    /// Common rate target R in bit/s/Hz.
    pub rate_target: f64,
    /// Backscatter coefficients, one per SBD.
    pub eta: Vec<f64>,
    /// Phase-1 time fractions.
    pub tau: Vec<f64>,
    /// BS transmit power per user, watts.
    pub power: Vec<f64>,
    /// Phase-1 beamformers, one unit-norm column per user (N x I).
    pub w1: Array2<Complex64>,
    /// Phase-2 beamformers, one unit-norm column per user (N x I).
    pub w2: Array2<Complex64>,
    pub ris: RisCoefficients,
}

impl DecisionVariables {
    pub fn n_pairs(&self) -> usize {
        self.eta.len()
    }

    pub fn check_dims(&self, cfg: &SystemConfig) -> Result<()> {
        let i = cfg.n_pairs;
        for (what, len) in [
            ("eta", self.eta.len()),
            ("tau", self.tau.len()),
            ("power", self.power.len()),
        ] {
            if len != i {
                return Err(Error::Shape {
                    what,
                    expected: i,
                    got: len,
                });
            }
        }
        for (what, w) in [("w1", &self.w1), ("w2", &self.w2)] {
            if w.dim() != (cfg.n_bs_antennas, i) {
                return Err(Error::Shape {
                    what,
                    expected: cfg.n_bs_antennas * i,
                    got: w.len(),
                });
            }
        }
        for (what, len) in [
            ("beta_t", self.ris.beta_t.len()),
            ("beta_r", self.ris.beta_r.len()),
            ("theta_t", self.ris.theta_t.len()),
            ("theta_r", self.ris.theta_r.len()),
        ] {
            if len != cfg.n_ris_elements {
                return Err(Error::Shape {
                    what,
                    expected: cfg.n_ris_elements,
                    got: len,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkRate {
    pub rate: f64,
    pub sinr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub r1: Vec<f64>,
    pub r2r: Vec<f64>,
    pub r2t: Vec<f64>,
    pub sinr1: Vec<f64>,
    pub sinr2r: Vec<f64>,
    pub sinr2t: Vec<f64>,
    /// SIC decoding order per phase, strongest first.
    pub order1: Vec<usize>,
    pub order2r: Vec<usize>,
    pub order2t: Vec<usize>,
    pub min_rate: f64,
}

impl RateReport {
    pub fn sum_rate(&self) -> f64 {
        self.r1.iter().chain(&self.r2r).chain(&self.r2t).sum()
    }
}

/// `log2(1 + x)`, accurate for tiny `x`.
pub fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / std::f64::consts::LN_2
}

/// Maximal-ratio receive combiner `g / |g|`.
pub fn mrc_vector(g: &[Complex64]) -> Result<Vec<Complex64>> {
    let norm = g.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::DegenerateChannel("MRC needs a nonzero, finite channel vector"));
    }
    Ok(g.iter().map(|z| z / norm).collect())
}

/// Indices sorted by descending gain; equal gains keep ascending index order.
pub fn sic_order(gains: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]));
    order
}

/// Users decoded before `user` under `order`, i.e. its interference set.
pub fn interference_set(order: &[usize], user: usize) -> &[usize] {
    let pos = order
        .iter()
        .position(|&u| u == user)
        .expect("user missing from SIC order");
    &order[..pos]
}

/// `h^H w`.
fn hermitian_dot(h: ArrayView1<Complex64>, w: ArrayView1<Complex64>) -> Complex64 {
    h.iter().zip(w.iter()).map(|(a, b)| a.conj() * b).sum()
}

fn check_inputs(ch: &ChannelRealization, dv: &DecisionVariables, cfg: &SystemConfig) -> Result<()> {
    ch.check_dims(cfg)?;
    dv.check_dims(cfg)
}

fn check_user(cfg: &SystemConfig, i: usize) -> Result<()> {
    if i >= cfg.n_pairs {
        return Err(Error::Shape {
            what: "user index",
            expected: cfg.n_pairs,
            got: i,
        });
    }
    Ok(())
}

/// `P_j eta_j |g_1j|^2 |h_1j^H w_1j|^2` for every SBD.
fn phase1_strengths(ch: &ChannelRealization, dv: &DecisionVariables) -> Vec<f64> {
    (0..dv.n_pairs())
        .map(|j| {
            let g_norm2: f64 = ch.g1.column(j).iter().map(|z| z.norm_sqr()).sum();
            let hw = hermitian_dot(ch.h1.column(j), dv.w1.column(j)).norm_sqr();
            dv.power[j] * dv.eta[j] * g_norm2 * hw
        })
        .collect()
}

fn phase1_link(strengths: &[f64], order: &[usize], cfg: &SystemConfig, dv: &DecisionVariables, i: usize) -> LinkRate {
    let k = cfg.symbols_per_bd_symbol as f64;
    let b = cfg.bandwidth_hz;
    let interference: f64 = interference_set(order, i).iter().map(|&j| strengths[j]).sum();
    let sinr = k * strengths[i] / (interference + b * cfg.noise_bs_watts);
    LinkRate {
        rate: b * dv.tau[i] / k * log2_1p(sinr),
        sinr,
    }
}

/// Phase-2 effective channels for one side of the surface.
struct Phase2Channels {
    /// `c[[i, j]]`: user i's end-to-end channel applied to beamformer j.
    combined: Array2<Complex64>,
    /// `|(sum_j g_2j) Theta|^2`, the amplified ASRIS noise gain.
    noise_gain: f64,
}

fn phase2_channels(ch: &ChannelRealization, dv: &DecisionVariables, side: Side) -> Phase2Channels {
    let (n, m, users) = (ch.n_bs_antennas(), ch.n_ris_elements(), dv.n_pairs());
    let diag = dv.ris.diagonal(side);
    let g2 = match side {
        Side::Reflect => &ch.g2r,
        Side::Transmit => &ch.g2t,
    };

    // Row i: g_2i Theta h2 (+ h_3i^H on the reflect side).
    let mut rows = Array2::<Complex64>::zeros((users, n));
    for i in 0..users {
        for e in 0..m {
            let coef = g2[[i, e]] * diag[e];
            if coef == Complex64::new(0.0, 0.0) {
                continue;
            }
            for a in 0..n {
                rows[[i, a]] += coef * ch.h2[[e, a]];
            }
        }
        if side == Side::Reflect {
            for a in 0..n {
                rows[[i, a]] += ch.h3[[a, i]].conj();
            }
        }
    }
    let combined = rows.dot(&dv.w2);

    let noise_gain = (0..m)
        .map(|e| {
            let summed: Complex64 = (0..users).map(|j| g2[[j, e]]).sum();
            (summed * diag[e]).norm_sqr()
        })
        .sum();
    Phase2Channels { combined, noise_gain }
}

fn phase2_strengths(p2: &Phase2Channels, dv: &DecisionVariables) -> Vec<f64> {
    (0..dv.n_pairs())
        .map(|j| dv.power[j] * p2.combined[[j, j]].norm_sqr())
        .collect()
}

fn phase2_link(p2: &Phase2Channels, order: &[usize], cfg: &SystemConfig, dv: &DecisionVariables, i: usize) -> LinkRate {
    let b = cfg.bandwidth_hz;
    let signal = dv.power[i] * p2.combined[[i, i]].norm_sqr();
    let interference: f64 = interference_set(order, i)
        .iter()
        .map(|&j| dv.power[j] * p2.combined[[i, j]].norm_sqr())
        .sum();
    let noise = b * (p2.noise_gain * cfg.noise_asris_watts + cfg.noise_sue_watts);
    let sinr = signal / (interference + noise);
    LinkRate {
        rate: b * (1.0 - dv.tau[i]) * log2_1p(sinr),
        sinr,
    }
}

/// Rate of SBD `i` decoded at the BS in phase 1.
pub fn rate_phase1(ch: &ChannelRealization, dv: &DecisionVariables, cfg: &SystemConfig, i: usize) -> Result<LinkRate> {
    check_inputs(ch, dv, cfg)?;
    check_user(cfg, i)?;
    let strengths = phase1_strengths(ch, dv);
    Ok(phase1_link(&strengths, &sic_order(&strengths), cfg, dv, i))
}

/// Rate of the reflect-side SUE `i` in phase 2.
pub fn rate_phase2_reflect(
    ch: &ChannelRealization,
    dv: &DecisionVariables,
    cfg: &SystemConfig,
    i: usize,
) -> Result<LinkRate> {
    check_inputs(ch, dv, cfg)?;
    check_user(cfg, i)?;
    let p2 = phase2_channels(ch, dv, Side::Reflect);
    let order = sic_order(&phase2_strengths(&p2, dv));
    Ok(phase2_link(&p2, &order, cfg, dv, i))
}

/// Rate of the transmit-side SUE `i` in phase 2 (reachable only through the ASRIS).
pub fn rate_phase2_transmit(
    ch: &ChannelRealization,
    dv: &DecisionVariables,
    cfg: &SystemConfig,
    i: usize,
) -> Result<LinkRate> {
    check_inputs(ch, dv, cfg)?;
    check_user(cfg, i)?;
    let p2 = phase2_channels(ch, dv, Side::Transmit);
    let order = sic_order(&phase2_strengths(&p2, dv));
    Ok(phase2_link(&p2, &order, cfg, dv, i))
}

/// All `3I` rates with one consistent SIC order per phase.
pub fn rate_report(ch: &ChannelRealization, dv: &DecisionVariables, cfg: &SystemConfig) -> Result<RateReport> {
    check_inputs(ch, dv, cfg)?;
    let users = cfg.n_pairs;

    let s1 = phase1_strengths(ch, dv);
    let order1 = sic_order(&s1);
    let links1: Vec<LinkRate> = (0..users).map(|i| phase1_link(&s1, &order1, cfg, dv, i)).collect();

    let pr = phase2_channels(ch, dv, Side::Reflect);
    let order2r = sic_order(&phase2_strengths(&pr, dv));
    let links2r: Vec<LinkRate> = (0..users).map(|i| phase2_link(&pr, &order2r, cfg, dv, i)).collect();

    let pt = phase2_channels(ch, dv, Side::Transmit);
    let order2t = sic_order(&phase2_strengths(&pt, dv));
    let links2t: Vec<LinkRate> = (0..users).map(|i| phase2_link(&pt, &order2t, cfg, dv, i)).collect();

    let split = |links: &[LinkRate]| -> (Vec<f64>, Vec<f64>) {
        (
            links.iter().map(|l| l.rate).collect(),
            links.iter().map(|l| l.sinr).collect(),
        )
    };
    let (r1, sinr1) = split(&links1);
    let (r2r, sinr2r) = split(&links2r);
    let (r2t, sinr2t) = split(&links2t);
    let min_rate = r1.iter().chain(&r2r).chain(&r2t).copied().fold(f64::INFINITY, f64::min);

    Ok(RateReport {
        r1,
        r2r,
        r2t,
        sinr1,
        sinr2r,
        sinr2t,
        order1,
        order2r,
        order2t,
        min_rate,
    })
}
