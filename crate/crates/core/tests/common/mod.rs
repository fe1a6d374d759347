//! Independent reference implementations for the integration tests.
//!
//! Everything here works from raw channel entries with plain loops, without
//! calling the library's rate or constraint code.
#![allow(dead_code)]

use asris_core::baseline::sample_channel;
use asris_core::rates::DecisionVariables;
use asris_core::{ChannelRealization, RisCoefficients, RisMode, SystemConfig};
use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::TAU;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn scalar_channel(h1: f64, g1: f64, h2: f64, h3: f64, g2r: f64, g2t: f64) -> ChannelRealization {
    let one = |v: f64| Array2::from_elem((1, 1), c(v, 0.0));
    ChannelRealization {
        h1: one(h1),
        g1: one(g1),
        h2: one(h2),
        h3: one(h3),
        g2r: one(g2r),
        g2t: one(g2t),
        seed: 0,
    }
}

pub fn scalar_dv(p: f64, eta: f64, tau: f64, beta_t: f64, beta_r: f64, mode: RisMode) -> DecisionVariables {
    DecisionVariables {
        rate_target: 0.0,
        eta: vec![eta],
        tau: vec![tau],
        power: vec![p],
        w1: Array2::from_elem((1, 1), c(1.0, 0.0)),
        w2: Array2::from_elem((1, 1), c(1.0, 0.0)),
        ris: RisCoefficients {
            beta_t: vec![beta_t],
            beta_r: vec![beta_r],
            theta_t: vec![0.0],
            theta_r: vec![0.0],
            mode,
        },
    }
}

/// Unit-variance circularly symmetric entries.
pub fn gaussian_matrix<R: Rng>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> Array2<Complex64> {
    Array2::from_shape_fn((rows, cols), |_| {
        let (a, b): (f64, f64) = (rng.random(), rng.random());
        let r = (-2.0 * (1.0 - a).ln()).sqrt() * scale / 2f64.sqrt();
        Complex64::from_polar(r, TAU * b)
    })
}

/// Columns scaled to unit norm.
pub fn unit_columns<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<Complex64> {
    let mut w = gaussian_matrix(rows, cols, 1.0, rng);
    for mut col in w.columns_mut() {
        let n = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        col.mapv_inplace(|z| z / n);
    }
    w
}

pub fn uniform<R: Rng>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

pub fn log_uniform<R: Rng>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    (lo.ln() + (hi.ln() - lo.ln()) * rng.random::<f64>()).exp()
}

fn norm_sqr(v: impl Iterator<Item = Complex64>) -> f64 {
    v.map(|z| z.norm_sqr()).sum()
}

/// `sum_k conj(a_k) b_k`.
fn inner(a: impl Iterator<Item = Complex64>, b: impl Iterator<Item = Complex64>) -> Complex64 {
    a.zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Whether user `j` is decoded before user `i`: stronger, or equally strong
/// with the lower index.
pub fn decoded_before(strength: &[f64], j: usize, i: usize) -> bool {
    j != i && (strength[j] > strength[i] || (strength[j] == strength[i] && j < i))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRates {
    pub r1: Vec<f64>,
    pub r2r: Vec<f64>,
    pub r2t: Vec<f64>,
    pub s1: Vec<f64>,
    pub s2r: Vec<f64>,
    pub s2t: Vec<f64>,
}

impl OracleRates {
    pub fn min_rate(&self) -> f64 {
        self.r1
            .iter()
            .chain(&self.r2r)
            .chain(&self.r2t)
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// `combined[i][j]`: user i's end-to-end phase-2 channel times beamformer j.
fn phase2(ch: &ChannelRealization, dv: &DecisionVariables, reflect: bool) -> (Vec<Vec<Complex64>>, f64) {
    let (n, m, users) = (ch.h1.nrows(), ch.h2.nrows(), ch.h1.ncols());
    let (beta, theta, g2) = if reflect {
        (&dv.ris.beta_r, &dv.ris.theta_r, &ch.g2r)
    } else {
        (&dv.ris.beta_t, &dv.ris.theta_t, &ch.g2t)
    };
    let gain = |e: usize| c(0.0, theta[e]).exp() * beta[e].max(0.0).sqrt();
    let mut combined = vec![vec![c(0.0, 0.0); users]; users];
    for (i, row) in combined.iter_mut().enumerate() {
        for (j, out) in row.iter_mut().enumerate() {
            for a in 0..n {
                let mut h = c(0.0, 0.0);
                for e in 0..m {
                    h += g2[[i, e]] * gain(e) * ch.h2[[e, a]];
                }
                if reflect {
                    h += ch.h3[[a, i]].conj();
                }
                *out += h * dv.w2[[a, j]];
            }
        }
    }
    let mut noise_gain = 0.0;
    for e in 0..m {
        let mut s = c(0.0, 0.0);
        for j in 0..users {
            s += g2[[j, e]];
        }
        noise_gain += (s * gain(e)).norm_sqr();
    }
    (combined, noise_gain)
}

/// Rates and SIC strengths recomputed from scratch.
pub fn oracle_rates(ch: &ChannelRealization, dv: &DecisionVariables, sys: &SystemConfig) -> OracleRates {
    let users = sys.n_pairs;
    let b = sys.bandwidth_hz;
    let k = sys.symbols_per_bd_symbol as f64;

    let s1: Vec<f64> = (0..users)
        .map(|j| {
            let g = norm_sqr(ch.g1.column(j).iter().copied());
            let hw = inner(ch.h1.column(j).iter().copied(), dv.w1.column(j).iter().copied()).norm_sqr();
            dv.power[j] * dv.eta[j] * g * hw
        })
        .collect();
    let r1 = (0..users)
        .map(|i| {
            let interference: f64 = (0..users).filter(|&j| decoded_before(&s1, j, i)).map(|j| s1[j]).sum();
            let sinr = k * s1[i] / (interference + b * sys.noise_bs_watts);
            b * dv.tau[i] / k * sinr.ln_1p() / std::f64::consts::LN_2
        })
        .collect();

    let side = |reflect: bool| -> (Vec<f64>, Vec<f64>) {
        let (combined, noise_gain) = phase2(ch, dv, reflect);
        let s: Vec<f64> = (0..users).map(|j| dv.power[j] * combined[j][j].norm_sqr()).collect();
        let noise = b * (noise_gain * sys.noise_asris_watts + sys.noise_sue_watts);
        let r = (0..users)
            .map(|i| {
                let interference: f64 = (0..users)
                    .filter(|&j| decoded_before(&s, j, i))
                    .map(|j| dv.power[j] * combined[i][j].norm_sqr())
                    .sum();
                let sinr = dv.power[i] * combined[i][i].norm_sqr() / (interference + noise);
                b * (1.0 - dv.tau[i]) * sinr.ln_1p() / std::f64::consts::LN_2
            })
            .collect();
        (r, s)
    };
    let (r2r, s2r) = side(true);
    let (r2t, s2t) = side(false);
    OracleRates {
        r1,
        r2r,
        r2t,
        s1,
        s2r,
        s2t,
    }
}

pub fn oracle_energy(ch: &ChannelRealization, dv: &DecisionVariables, sys: &SystemConfig, i: usize) -> f64 {
    let hw = inner(ch.h1.column(i).iter().copied(), dv.w1.column(i).iter().copied()).norm_sqr();
    sys.energy_conversion_efficiency * dv.power[i] * (1.0 - dv.eta[i]) * (1.0 - dv.tau[i]) * hw
}

/// Every stronger user has at least the rate of every weaker one.
fn sic_ordered(rates: &[f64], strength: &[f64]) -> bool {
    (0..rates.len()).all(|i| (0..rates.len()).all(|j| !decoded_before(strength, j, i) || rates[j] >= rates[i]))
}

fn within(v: f64, lo: f64, hi: f64) -> bool {
    lo <= v && v <= hi
}

/// The eleven constraints in rate form, C1 .. C11.
pub fn oracle_flags(ch: &ChannelRealization, dv: &DecisionVariables, sys: &SystemConfig) -> [bool; 11] {
    let ris = &dv.ris;
    let m = ris.beta_t.len();
    let users = sys.n_pairs;
    let rates = oracle_rates(ch, dv, sys);
    let r = dv.rate_target;

    let passive_split =
        ris.mode == RisMode::Active || (0..m).all(|e| (ris.beta_t[e] + ris.beta_r[e] - 1.0).abs() <= 1e-12);
    let active_cap = ris.mode == RisMode::Passive
        || ris
            .beta_t
            .iter()
            .chain(&ris.beta_r)
            .all(|&b| b <= sys.p_asris_watts / 2.0);
    let phase_range = ris.theta_t.iter().chain(&ris.theta_r).all(|&t| within(t, 0.0, TAU));
    let power = dv.power.iter().all(|&p| within(p, 0.0, sys.p_bs_max_watts));
    let eta = dv.eta.iter().all(|&v| within(v, 0.0, 1.0));
    let tau = dv.tau.iter().all(|&v| within(v, 0.0, 1.0));
    let energy = (0..users).all(|i| oracle_energy(ch, dv, sys, i) >= sys.harvest_threshold_joules);
    let sic1 = sic_ordered(&rates.r1, &rates.s1);
    let sic2 = sic_ordered(&rates.r2r, &rates.s2r) && sic_ordered(&rates.r2t, &rates.s2t);
    let target1 = (0..users).all(|i| r <= rates.r1[i]);
    let target2 = (0..users).all(|i| r <= rates.r2r[i] && r <= rates.r2t[i]);
    [
        passive_split,
        active_cap,
        phase_range,
        power,
        eta,
        tau,
        energy,
        sic1,
        sic2,
        target1,
        target2,
    ]
}

/// Decision variables drawn inside their ranges.
pub fn random_dv<R: Rng>(sys: &SystemConfig, mode: RisMode, rng: &mut R) -> DecisionVariables {
    let (n, m, i) = (sys.n_bs_antennas, sys.n_ris_elements, sys.n_pairs);
    let beta_hi = sys.p_asris_watts / 2.0;
    let beta_t: Vec<f64> = (0..m)
        .map(|_| match mode {
            RisMode::Active => uniform(0.0, beta_hi, rng),
            RisMode::Passive => rng.random(),
        })
        .collect();
    let beta_r = match mode {
        RisMode::Active => (0..m).map(|_| uniform(0.0, beta_hi, rng)).collect(),
        RisMode::Passive => beta_t.iter().map(|b| 1.0 - b).collect(),
    };
    DecisionVariables {
        rate_target: 0.0,
        eta: (0..i).map(|_| rng.random()).collect(),
        tau: (0..i).map(|_| rng.random()).collect(),
        power: (0..i).map(|_| uniform(0.0, sys.p_bs_max_watts, rng)).collect(),
        w1: unit_columns(n, i, rng),
        w2: unit_columns(n, i, rng),
        ris: RisCoefficients {
            beta_t,
            beta_r,
            theta_t: (0..m).map(|_| uniform(0.0, TAU, rng)).collect(),
            theta_r: (0..m).map(|_| uniform(0.0, TAU, rng)).collect(),
            mode,
        },
    }
}

/// Channels with unit-scale entries, so phase-2 SINRs are of order one.
pub fn unit_channel<R: Rng>(sys: &SystemConfig, rng: &mut R) -> ChannelRealization {
    let (n, m, i) = (sys.n_bs_antennas, sys.n_ris_elements, sys.n_pairs);
    ChannelRealization {
        h1: gaussian_matrix(n, i, 1.0, rng),
        g1: gaussian_matrix(n, i, 1.0, rng),
        h2: gaussian_matrix(m, n, 1.0, rng),
        h3: gaussian_matrix(n, i, 1.0, rng),
        g2r: gaussian_matrix(i, m, 1.0, rng),
        g2t: gaussian_matrix(i, m, 1.0, rng),
        seed: 0,
    }
}

/// Unit bandwidth and noise so both phases have moderate SINRs.
pub fn unit_system(n: usize, m: usize, i: usize) -> SystemConfig {
    SystemConfig {
        bandwidth_hz: 1.0,
        noise_bs_watts: 1.0,
        noise_asris_watts: 0.5,
        noise_sue_watts: 0.5,
        ..SystemConfig::default().with_dims(n, m, i)
    }
}

/// A random point around and outside the feasible box.
pub fn random_point<R: Rng>(
    rng: &mut R,
    dims: (usize, usize, usize),
) -> asris_core::Result<(SystemConfig, ChannelRealization, DecisionVariables)> {
    let (n, m, i) = dims;
    let mut sys = SystemConfig::default().with_dims(n, m, i);
    sys.harvest_threshold_joules = log_uniform(1e-16, 1e-10, rng);
    let ch = sample_channel(&sys, rng.random())?;
    let mode = if rng.random_bool(0.5) {
        RisMode::Active
    } else {
        RisMode::Passive
    };
    let unit = |rng: &mut R| {
        let r = rng.random::<f64>();
        if r < 0.05 {
            0.0
        } else if r < 0.1 {
            1.0
        } else {
            uniform(-0.05, 1.05, rng)
        }
    };
    let (beta_t, beta_r): (Vec<f64>, Vec<f64>) = match mode {
        RisMode::Active => (0..m)
            .map(|_| {
                (
                    uniform(0.0, 0.55, rng) * sys.p_asris_watts,
                    uniform(0.0, 0.55, rng) * sys.p_asris_watts,
                )
            })
            .unzip(),
        RisMode::Passive => (0..m)
            .map(|_| {
                let t = uniform(0.0, 1.0, rng);
                let drift = if rng.random_bool(0.1) { 1e-9 } else { 0.0 };
                (t, 1.0 - t + drift)
            })
            .unzip(),
    };
    let theta = |rng: &mut R| (0..m).map(|_| uniform(0.0, 1.02 * TAU, rng)).collect::<Vec<_>>();
    let dv = DecisionVariables {
        rate_target: log_uniform(1e-12, 10.0, rng),
        eta: (0..i).map(|_| unit(rng)).collect(),
        tau: (0..i).map(|_| unit(rng)).collect(),
        power: (0..i).map(|_| uniform(-0.02, 1.05, rng) * sys.p_bs_max_watts).collect(),
        w1: unit_columns(n, i, rng),
        w2: unit_columns(n, i, rng),
        ris: RisCoefficients {
            beta_t,
            beta_r,
            theta_t: theta(rng),
            theta_r: theta(rng),
            mode,
        },
    };
    Ok((sys, ch, dv))
}
