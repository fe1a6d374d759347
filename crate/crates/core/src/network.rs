//! Network geometry, link budgets and random channel realizations.
//!
//! Links touching the base station directly (BS to SBD, SBD to BS, BS to
//! reflect-side SUE) are Rayleigh faded. Links touching the ASRIS (BS to
//! ASRIS, ASRIS to either SUE group) are Rician with a line-of-sight part
//! built from half-wavelength uniform linear array steering vectors.
//!
//! Geometry is 2-D. The BS sits at the origin with its array along the y
//! axis. The ASRIS sits on the positive x axis and its surface is the
//! vertical line `x = asris.x`; reflect-side SUEs share the BS half-plane,
//! transmit-side SUEs lie beyond the surface.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ris::ActiveCapReading;
use crate::rng::{derive_seed, rng_from_seed, stream, SimRng};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Minimum user distance from the BS and from the ASRIS.
pub const MIN_LINK_DISTANCE_M: f64 = 1.0;

/// Physical and dimensional parameters of the symbiotic radio network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SystemConfigFile")]
pub struct SystemConfig {
    /// N, BS antennas.
    pub n_bs_antennas: usize,
    /// M, ASRIS elements.
    pub n_ris_elements: usize,
    /// I, number of SBD / reflect-SUE / transmit-SUE triples.
    pub n_pairs: usize,
    /// K, BS symbols per backscatter symbol.
    pub symbols_per_bd_symbol: usize,
    pub bandwidth_hz: f64,
    pub noise_bs_watts: f64,
    pub noise_asris_watts: f64,
    pub noise_sue_watts: f64,
    pub p_bs_max_watts: f64,
    pub p_asris_watts: f64,
    /// Γ in [0, 1].
    pub energy_conversion_efficiency: f64,
    /// ε_SBD, harvested-energy requirement per SBD.
    pub harvest_threshold_joules: f64,
    pub carrier_hz: f64,
    pub path_loss_exponent: f64,
    pub rician_k: f64,
    pub bs_antenna_gain: f64,
    pub ris_element_gain: f64,
    pub d_bs_sbd_m: f64,
    pub d_bs_sue_max_m: f64,
    pub d_bs_asris_max_m: f64,
    /// How the active amplitude cap is read; see [`ActiveCapReading`].
    pub active_cap: ActiveCapReading,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let noise = dbm_to_watts(-120.0);
        Self {
            n_bs_antennas: 8,
            n_ris_elements: 16,
            n_pairs: 3,
            symbols_per_bd_symbol: 100,
            bandwidth_hz: 1.0,
            noise_bs_watts: noise,
            noise_asris_watts: noise,
            noise_sue_watts: noise,
            p_bs_max_watts: 20.0,
            p_asris_watts: 10.0,
            energy_conversion_efficiency: 0.8,
            harvest_threshold_joules: 1e-6,
            carrier_hz: 28e9,
            path_loss_exponent: 3.0,
            rician_k: 10.0,
            bs_antenna_gain: 16.0,
            ris_element_gain: 8.0,
            d_bs_sbd_m: 200.0,
            d_bs_sue_max_m: 100.0,
            d_bs_asris_max_m: 300.0,
            active_cap: ActiveCapReading::Linear,
        }
    }
}

impl SystemConfig {
    /// Smallest network, used by the grid oracle and the rate hand-checks.
    pub fn scalar() -> Self {
        Self {
            n_bs_antennas: 1,
            n_ris_elements: 1,
            n_pairs: 1,
            ..Self::default()
        }
    }

    pub fn with_dims(mut self, n: usize, m: usize, i: usize) -> Self {
        self.n_bs_antennas = n;
        self.n_ris_elements = m;
        self.n_pairs = i;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_bs_antennas", self.n_bs_antennas),
            ("n_ris_elements", self.n_ris_elements),
            ("n_pairs", self.n_pairs),
            ("symbols_per_bd_symbol", self.symbols_per_bd_symbol),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        let positive = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("noise_bs_watts", self.noise_bs_watts),
            ("noise_asris_watts", self.noise_asris_watts),
            ("noise_sue_watts", self.noise_sue_watts),
            ("p_bs_max_watts", self.p_bs_max_watts),
            ("p_asris_watts", self.p_asris_watts),
            ("carrier_hz", self.carrier_hz),
            ("bs_antenna_gain", self.bs_antenna_gain),
            ("ris_element_gain", self.ris_element_gain),
            ("d_bs_sbd_m", self.d_bs_sbd_m),
            ("d_bs_sue_max_m", self.d_bs_sue_max_m),
            ("d_bs_asris_max_m", self.d_bs_asris_max_m),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        let gamma = self.energy_conversion_efficiency;
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::Config(format!(
                "energy_conversion_efficiency must lie in [0, 1], got {gamma}"
            )));
        }
        let nonneg = [
            ("harvest_threshold_joules", self.harvest_threshold_joules),
            ("path_loss_exponent", self.path_loss_exponent),
            ("rician_k", self.rician_k),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.d_bs_sue_max_m <= 2.0 * MIN_LINK_DISTANCE_M {
            return Err(Error::Config("d_bs_sue_max_m is too small to place users".into()));
        }
        Ok(())
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }
}

/// On-disk form of [`SystemConfig`]. Every field is optional and falls back
/// to the default; noise powers may be given in watts or dBm.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemConfigFile {
    n_bs_antennas: Option<usize>,
    n_ris_elements: Option<usize>,
    n_pairs: Option<usize>,
    symbols_per_bd_symbol: Option<usize>,
    bandwidth_hz: Option<f64>,
    noise_dbm: Option<f64>,
    noise_bs_watts: Option<f64>,
    noise_bs_dbm: Option<f64>,
    noise_asris_watts: Option<f64>,
    noise_asris_dbm: Option<f64>,
    noise_sue_watts: Option<f64>,
    noise_sue_dbm: Option<f64>,
    p_bs_max_watts: Option<f64>,
    p_asris_watts: Option<f64>,
    energy_conversion_efficiency: Option<f64>,
    harvest_threshold_joules: Option<f64>,
    carrier_hz: Option<f64>,
    path_loss_exponent: Option<f64>,
    rician_k: Option<f64>,
    bs_antenna_gain: Option<f64>,
    ris_element_gain: Option<f64>,
    d_bs_sbd_m: Option<f64>,
    d_bs_sue_max_m: Option<f64>,
    d_bs_asris_max_m: Option<f64>,
    active_cap: Option<ActiveCapReading>,
}

fn pick_noise(
    name: &str,
    watts: Option<f64>,
    dbm: Option<f64>,
    shared_dbm: Option<f64>,
    default: f64,
) -> std::result::Result<f64, String> {
    match (watts, dbm) {
        (Some(_), Some(_)) => Err(format!("give only one of {name}_watts and {name}_dbm")),
        (Some(w), None) => Ok(w),
        (None, Some(d)) => Ok(dbm_to_watts(d)),
        (None, None) => Ok(shared_dbm.map(dbm_to_watts).unwrap_or(default)),
    }
}

impl TryFrom<SystemConfigFile> for SystemConfig {
    type Error = String;

    fn try_from(f: SystemConfigFile) -> std::result::Result<Self, String> {
        let d = SystemConfig::default();
        let cfg = SystemConfig {
            n_bs_antennas: f.n_bs_antennas.unwrap_or(d.n_bs_antennas),
            n_ris_elements: f.n_ris_elements.unwrap_or(d.n_ris_elements),
            n_pairs: f.n_pairs.unwrap_or(d.n_pairs),
            symbols_per_bd_symbol: f.symbols_per_bd_symbol.unwrap_or(d.symbols_per_bd_symbol),
            bandwidth_hz: f.bandwidth_hz.unwrap_or(d.bandwidth_hz),
            noise_bs_watts: pick_noise(
                "noise_bs",
                f.noise_bs_watts,
                f.noise_bs_dbm,
                f.noise_dbm,
                d.noise_bs_watts,
            )?,
            noise_asris_watts: pick_noise(
                "noise_asris",
                f.noise_asris_watts,
                f.noise_asris_dbm,
                f.noise_dbm,
                d.noise_asris_watts,
            )?,
            noise_sue_watts: pick_noise(
                "noise_sue",
                f.noise_sue_watts,
                f.noise_sue_dbm,
                f.noise_dbm,
                d.noise_sue_watts,
            )?,
            p_bs_max_watts: f.p_bs_max_watts.unwrap_or(d.p_bs_max_watts),
            p_asris_watts: f.p_asris_watts.unwrap_or(d.p_asris_watts),
            energy_conversion_efficiency: f.energy_conversion_efficiency.unwrap_or(d.energy_conversion_efficiency),
            harvest_threshold_joules: f.harvest_threshold_joules.unwrap_or(d.harvest_threshold_joules),
            carrier_hz: f.carrier_hz.unwrap_or(d.carrier_hz),
            path_loss_exponent: f.path_loss_exponent.unwrap_or(d.path_loss_exponent),
            rician_k: f.rician_k.unwrap_or(d.rician_k),
            bs_antenna_gain: f.bs_antenna_gain.unwrap_or(d.bs_antenna_gain),
            ris_element_gain: f.ris_element_gain.unwrap_or(d.ris_element_gain),
            d_bs_sbd_m: f.d_bs_sbd_m.unwrap_or(d.d_bs_sbd_m),
            d_bs_sue_max_m: f.d_bs_sue_max_m.unwrap_or(d.d_bs_sue_max_m),
            d_bs_asris_max_m: f.d_bs_asris_max_m.unwrap_or(d.d_bs_asris_max_m),
            active_cap: f.active_cap.unwrap_or(d.active_cap),
        };
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Free-space reference loss at 1 m times `d^-alpha`. Antenna gains are
/// applied when links are assembled, not here.
pub fn path_loss(distance_m: f64, cfg: &SystemConfig) -> Result<f64> {
    if !(distance_m > 0.0) || !distance_m.is_finite() {
        return Err(Error::Domain(format!(
            "path loss needs a positive distance, got {distance_m}"
        )));
    }
    let pl0 = (cfg.wavelength_m() / (4.0 * PI)).powi(2);
    Ok(pl0 * distance_m.powf(-cfg.path_loss_exponent))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Node positions in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub bs: Point,
    pub asris: Point,
    pub sbd: Vec<Point>,
    pub sue_reflect: Vec<Point>,
    pub sue_transmit: Vec<Point>,
}

impl Placement {
    /// Random placement: SBDs on the `d_bs_sbd_m` ring at uniform angles,
    /// the ASRIS on the positive x axis, SUEs uniform over their half of the
    /// `d_bs_sue_max_m` disc.
    pub fn random(cfg: &SystemConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = rng_from_seed(derive_seed(seed, stream::PLACEMENT, 0));
        let reach = cfg.d_bs_sue_max_m.min(cfg.d_bs_asris_max_m);
        let asris = Point {
            x: reach * rng.random_range(0.5..0.9),
            y: 0.0,
        };

        let sbd = (0..cfg.n_pairs)
            .map(|_| {
                let phi = rng.random_range(0.0..2.0 * PI);
                Point {
                    x: cfg.d_bs_sbd_m * phi.cos(),
                    y: cfg.d_bs_sbd_m * phi.sin(),
                }
            })
            .collect();

        let mut sample_side = |beyond: bool| -> Point {
            loop {
                let r = cfg.d_bs_sue_max_m * rng.random::<f64>().sqrt();
                let phi = rng.random_range(0.0..2.0 * PI);
                let p = Point {
                    x: r * phi.cos(),
                    y: r * phi.sin(),
                };
                let side_ok = if beyond { p.x > asris.x } else { p.x < asris.x };
                if side_ok
                    && p.distance(&Point::ORIGIN) >= MIN_LINK_DISTANCE_M
                    && p.distance(&asris) >= MIN_LINK_DISTANCE_M
                {
                    return p;
                }
            }
        };
        let sue_reflect = (0..cfg.n_pairs).map(|_| sample_side(false)).collect();
        let sue_transmit = (0..cfg.n_pairs).map(|_| sample_side(true)).collect();

        Ok(Self {
            bs: Point::ORIGIN,
            asris,
            sbd,
            sue_reflect,
            sue_transmit,
        })
    }

    pub fn n_pairs(&self) -> usize {
        self.sbd.len()
    }

    fn check(&self, cfg: &SystemConfig) -> Result<()> {
        for (what, len) in [
            ("placement.sbd", self.sbd.len()),
            ("placement.sue_reflect", self.sue_reflect.len()),
            ("placement.sue_transmit", self.sue_transmit.len()),
        ] {
            if len != cfg.n_pairs {
                return Err(Error::Shape {
                    what,
                    expected: cfg.n_pairs,
                    got: len,
                });
            }
        }
        Ok(())
    }
}

/// One draw of every channel in the network.
///
/// Storage follows the receive/transmit orientation used by the rate
/// formulas: `h1`, `g1`, `h3` hold one N-vector per user column, `h2` is the
/// M×N BS-to-ASRIS matrix that multiplies a BS beamformer directly, and
/// `g2r`/`g2t` hold one M-vector per user row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub h1: Array2<Complex64>,
    pub g1: Array2<Complex64>,
    pub h2: Array2<Complex64>,
    pub h3: Array2<Complex64>,
    pub g2r: Array2<Complex64>,
    pub g2t: Array2<Complex64>,
    pub seed: u64,
}

impl ChannelRealization {
    pub fn n_bs_antennas(&self) -> usize {
        self.h1.nrows()
    }

    pub fn n_ris_elements(&self) -> usize {
        self.h2.nrows()
    }

    pub fn n_pairs(&self) -> usize {
        self.h1.ncols()
    }

    pub fn check_dims(&self, cfg: &SystemConfig) -> Result<()> {
        let (n, m, i) = (cfg.n_bs_antennas, cfg.n_ris_elements, cfg.n_pairs);
        let blocks: [(&'static str, &Array2<Complex64>, (usize, usize)); 6] = [
            ("channel h1", &self.h1, (n, i)),
            ("channel g1", &self.g1, (n, i)),
            ("channel h2", &self.h2, (m, n)),
            ("channel h3", &self.h3, (n, i)),
            ("channel g2r", &self.g2r, (i, m)),
            ("channel g2t", &self.g2t, (i, m)),
        ];
        for (what, arr, (r, c)) in blocks {
            if arr.dim() != (r, c) {
                return Err(Error::Shape {
                    what,
                    expected: r * c,
                    got: arr.len(),
                });
            }
        }
        Ok(())
    }

    /// Blocks in canonical order: h1, g1, h2, h3, g2r, g2t.
    pub fn blocks(&self) -> [&Array2<Complex64>; 6] {
        [&self.h1, &self.g1, &self.h2, &self.h3, &self.g2r, &self.g2t]
    }
}

/// Mean power (path loss times antenna gains) of every link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkBudget {
    /// BS to SBD_i (also used for SBD_i back to BS).
    pub bs_sbd: Vec<f64>,
    pub bs_asris: f64,
    pub bs_sue_reflect: Vec<f64>,
    pub asris_sue_reflect: Vec<f64>,
    pub asris_sue_transmit: Vec<f64>,
}

impl LinkBudget {
    pub fn new(cfg: &SystemConfig, placement: &Placement) -> Result<Self> {
        placement.check(cfg)?;
        let g_bs = cfg.bs_antenna_gain;
        let g_ris = cfg.ris_element_gain;
        let per_user = |pts: &[Point], from: &Point, gain: f64| -> Result<Vec<f64>> {
            pts.iter()
                .map(|p| Ok(path_loss(p.distance(from), cfg)? * gain))
                .collect()
        };
        Ok(Self {
            bs_sbd: per_user(&placement.sbd, &placement.bs, g_bs)?,
            bs_asris: path_loss(placement.bs.distance(&placement.asris), cfg)? * g_bs * g_ris,
            bs_sue_reflect: per_user(&placement.sue_reflect, &placement.bs, g_bs)?,
            asris_sue_reflect: per_user(&placement.sue_reflect, &placement.asris, g_ris)?,
            asris_sue_transmit: per_user(&placement.sue_transmit, &placement.asris, g_ris)?,
        })
    }
}

/// Half-wavelength ULA response `exp(j*pi*k*u)` for direction cosine `u`.
pub fn steering_vector(len: usize, direction_cosine: f64) -> Vec<Complex64> {
    (0..len)
        .map(|k| Complex64::from_polar(1.0, PI * k as f64 * direction_cosine))
        .collect()
}

/// Lateral direction cosine of `to` seen from `from`, for arrays laid out
/// along the y axis.
fn direction_cosine(from: &Point, to: &Point) -> f64 {
    let d = from.distance(to);
    if d == 0.0 {
        0.0
    } else {
        (to.y - from.y) / d
    }
}

/// Unit-modulus line-of-sight parts of the Rician links.
#[derive(Debug, Clone, PartialEq)]
pub struct LosComponents {
    pub h2: Array2<Complex64>,
    pub g2r: Array2<Complex64>,
    pub g2t: Array2<Complex64>,
}

pub fn los_components(cfg: &SystemConfig, placement: &Placement) -> Result<LosComponents> {
    placement.check(cfg)?;
    let (n, m, i) = (cfg.n_bs_antennas, cfg.n_ris_elements, cfg.n_pairs);
    let a_bs = steering_vector(n, direction_cosine(&placement.bs, &placement.asris));
    let a_ris_in = steering_vector(m, direction_cosine(&placement.asris, &placement.bs));
    let h2 = Array2::from_shape_fn((m, n), |(r, c)| a_ris_in[r] * a_bs[c].conj());

    let user_rows = |users: &[Point]| {
        let rows: Vec<Vec<Complex64>> = users
            .iter()
            .map(|u| steering_vector(m, direction_cosine(&placement.asris, u)))
            .collect();
        Array2::from_shape_fn((i, m), |(r, c)| rows[r][c].conj())
    };
    Ok(LosComponents {
        h2,
        g2r: user_rows(&placement.sue_reflect),
        g2t: user_rows(&placement.sue_transmit),
    })
}

fn cn_sample(rng: &mut SimRng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws every channel for `placement`. A pure function of its inputs.
pub fn draw_realization(cfg: &SystemConfig, placement: &Placement, seed: u64) -> Result<ChannelRealization> {
    cfg.validate()?;
    let budget = LinkBudget::new(cfg, placement)?;
    let los = los_components(cfg, placement)?;
    let (n, m, i) = (cfg.n_bs_antennas, cfg.n_ris_elements, cfg.n_pairs);
    let mut rng = rng_from_seed(derive_seed(seed, stream::FADING, 0));

    let k = cfg.rician_k;
    let los_amp = (k / (k + 1.0)).sqrt();
    let nlos_amp = (1.0 / (k + 1.0)).sqrt();

    let rayleigh_cols = |power: &[f64], rng: &mut SimRng| {
        let mut out = Array2::zeros((n, i));
        for r in 0..n {
            for c in 0..i {
                out[[r, c]] = cn_sample(rng) * power[c].sqrt();
            }
        }
        out
    };
    let h1 = rayleigh_cols(&budget.bs_sbd, &mut rng);
    let g1 = rayleigh_cols(&budget.bs_sbd, &mut rng);

    let mut h2 = Array2::zeros((m, n));
    let amp = budget.bs_asris.sqrt();
    for r in 0..m {
        for c in 0..n {
            h2[[r, c]] = (los.h2[[r, c]] * los_amp + cn_sample(&mut rng) * nlos_amp) * amp;
        }
    }

    let h3 = rayleigh_cols(&budget.bs_sue_reflect, &mut rng);

    let rician_rows = |los: &Array2<Complex64>, power: &[f64], rng: &mut SimRng| {
        let mut out = Array2::zeros((i, m));
        for r in 0..i {
            let amp = power[r].sqrt();
            for c in 0..m {
                out[[r, c]] = (los[[r, c]] * los_amp + cn_sample(rng) * nlos_amp) * amp;
            }
        }
        out
    };
    let g2r = rician_rows(&los.g2r, &budget.asris_sue_reflect, &mut rng);
    let g2t = rician_rows(&los.g2t, &budget.asris_sue_transmit, &mut rng);

    Ok(ChannelRealization {
        h1,
        g1,
        h2,
        h3,
        g2r,
        g2t,
        seed,
    })
}
