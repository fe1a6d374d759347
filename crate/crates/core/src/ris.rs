//! STAR-RIS transmission/reflection coefficients.
//!
//! `beta` is a power gain: element `m` scales its incident signal by
//! `sqrt(beta_m) * exp(j * theta_m)`, so passive energy conservation reads
//! `beta_t + beta_r = 1` exactly.

use std::f64::consts::TAU;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::SystemConfig;

/// Tolerance on `beta_t + beta_r = 1` for passive surfaces.
pub const PASSIVE_SPLIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RisMode {
    Active,
    Passive,
}

impl RisMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RisMode::Active => "active",
            RisMode::Passive => "passive",
        }
    }
}

impl std::fmt::Display for RisMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Transmit,
    Reflect,
}

/// Reading of the active amplitude cap.
///
/// `Linear` bounds the power gain itself, `beta <= p_asris / 2`, which is the
/// reading under which the equal-split protocol sits exactly on the cap.
/// `Squared` bounds `beta^2 <= p_asris / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActiveCapReading {
    Linear,
    Squared,
}

impl ActiveCapReading {
    /// Largest power gain allowed on one side of one element.
    pub fn max_beta(&self, p_asris: f64) -> f64 {
        match self {
            ActiveCapReading::Linear => p_asris / 2.0,
            ActiveCapReading::Squared => (p_asris / 2.0).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RisCoefficients {
    pub beta_t: Vec<f64>,
    pub beta_r: Vec<f64>,
    pub theta_t: Vec<f64>,
    pub theta_r: Vec<f64>,
    pub mode: RisMode,
}

/// Outcome of checking the surface constraints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RisFlags {
    /// `beta_t + beta_r = 1` per element; vacuously true for active surfaces.
    pub passive_split: bool,
    /// Amplitude cap per element and side; vacuously true for passive surfaces.
    pub active_cap: bool,
    /// `0 <= theta <= 2 pi` for every element and side.
    pub phase_range: bool,
    pub passive_split_slack: f64,
    pub active_cap_slack: f64,
    pub phase_range_slack: f64,
}

impl RisCoefficients {
    pub fn len(&self) -> usize {
        self.beta_t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta_t.is_empty()
    }

    /// Equal energy splitting: every element gets `beta = p_asris / 2` on both sides.
    pub fn equal_energy_split(cfg: &SystemConfig, theta_t: Vec<f64>, theta_r: Vec<f64>) -> Result<Self> {
        Self::check_phase_vectors(cfg, &theta_t, &theta_r)?;
        let beta = vec![cfg.p_asris_watts / 2.0; cfg.n_ris_elements];
        Ok(Self {
            beta_t: beta.clone(),
            beta_r: beta,
            theta_t,
            theta_r,
            mode: RisMode::Active,
        })
    }

    /// Passive counterpart of the equal split: half the incident power per side.
    pub fn passive_equal_split(cfg: &SystemConfig, theta_t: Vec<f64>, theta_r: Vec<f64>) -> Result<Self> {
        Self::check_phase_vectors(cfg, &theta_t, &theta_r)?;
        let beta = vec![0.5; cfg.n_ris_elements];
        Ok(Self {
            beta_t: beta.clone(),
            beta_r: beta,
            theta_t,
            theta_r,
            mode: RisMode::Passive,
        })
    }

    fn check_phase_vectors(cfg: &SystemConfig, theta_t: &[f64], theta_r: &[f64]) -> Result<()> {
        for (what, v) in [("theta_t", theta_t), ("theta_r", theta_r)] {
            if v.len() != cfg.n_ris_elements {
                return Err(Error::Shape {
                    what,
                    expected: cfg.n_ris_elements,
                    got: v.len(),
                });
            }
            if let Some(bad) = v.iter().find(|t| !(0.0..=TAU).contains(*t)) {
                return Err(Error::InvalidRis(format!("{what} entry {bad} outside [0, 2pi]")));
            }
        }
        Ok(())
    }

    fn coefficient_vectors(&self, side: Side) -> (&[f64], &[f64]) {
        match side {
            Side::Transmit => (&self.beta_t, &self.theta_t),
            Side::Reflect => (&self.beta_r, &self.theta_r),
        }
    }

    /// Diagonal of the beamforming matrix, `sqrt(beta_m) * exp(j theta_m)`.
    /// No validation; negative gains are treated as zero.
    pub fn diagonal(&self, side: Side) -> Vec<Complex64> {
        let (beta, theta) = self.coefficient_vectors(side);
        beta.iter()
            .zip(theta)
            .map(|(&b, &t)| Complex64::from_polar(b.max(0.0).sqrt(), t))
            .collect()
    }

    /// Checks the configuration-free invariants: matching lengths, finite
    /// non-negative gains, phases in `[0, 2 pi]` and the passive split.
    pub fn check_structure(&self) -> Result<()> {
        let m = self.beta_t.len();
        for (what, v) in [
            ("beta_r", &self.beta_r),
            ("theta_t", &self.theta_t),
            ("theta_r", &self.theta_r),
        ] {
            if v.len() != m {
                return Err(Error::Shape {
                    what,
                    expected: m,
                    got: v.len(),
                });
            }
        }
        let mut violations = Vec::new();
        if self
            .beta_t
            .iter()
            .chain(&self.beta_r)
            .any(|b| !(b.is_finite() && *b >= 0.0))
        {
            violations.push("amplitude gains must be finite and >= 0");
        }
        if self
            .theta_t
            .iter()
            .chain(&self.theta_r)
            .any(|t| !(0.0..=TAU).contains(t))
        {
            violations.push("phases must lie in [0, 2pi]");
        }
        if self.mode == RisMode::Passive && passive_split_deviation(self) > PASSIVE_SPLIT_TOL {
            violations.push("passive elements must satisfy beta_t + beta_r = 1");
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidRis(violations.join("; ")))
        }
    }

    /// Dense `M x M` diagonal beamforming matrix for one side.
    pub fn beamforming_matrix(&self, side: Side) -> Result<Array2<Complex64>> {
        self.check_structure()?;
        Ok(Array2::from_diag(&ndarray::Array1::from(self.diagonal(side))))
    }

    /// Mode-aware check of the passive split, the active cap and the phase range.
    pub fn validate(&self, cfg: &SystemConfig) -> RisFlags {
        let passive_split_slack = match self.mode {
            RisMode::Passive => PASSIVE_SPLIT_TOL - passive_split_deviation(self),
            RisMode::Active => 0.0,
        };
        let active_cap_slack = match self.mode {
            RisMode::Active => {
                let cap = cfg.p_asris_watts / 2.0;
                self.beta_t
                    .iter()
                    .chain(&self.beta_r)
                    .map(|&b| match cfg.active_cap {
                        ActiveCapReading::Linear => cap - b,
                        ActiveCapReading::Squared => cap - b * b,
                    })
                    .fold(f64::INFINITY, f64::min)
            }
            RisMode::Passive => 0.0,
        };
        let phase_range_slack = self
            .theta_t
            .iter()
            .chain(&self.theta_r)
            .map(|&t| t.min(TAU - t))
            .fold(f64::INFINITY, f64::min);
        // An empty surface has nothing to violate.
        let finite_or_zero = |s: f64| if s == f64::INFINITY { 0.0 } else { s };
        let active_cap_slack = finite_or_zero(active_cap_slack);
        let phase_range_slack = finite_or_zero(phase_range_slack);
        RisFlags {
            passive_split: passive_split_slack >= 0.0,
            active_cap: active_cap_slack >= 0.0,
            phase_range: phase_range_slack >= 0.0,
            passive_split_slack,
            active_cap_slack,
            phase_range_slack,
        }
    }
}

fn passive_split_deviation(c: &RisCoefficients) -> f64 {
    c.beta_t
        .iter()
        .zip(&c.beta_r)
        .map(|(t, r)| (t + r - 1.0).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn coeffs(beta: Vec<f64>, theta: Vec<f64>, mode: RisMode) -> RisCoefficients {
        RisCoefficients {
            beta_t: beta.clone(),
            beta_r: beta,
            theta_t: theta.clone(),
            theta_r: theta,
            mode,
        }
    }

    fn close(a: Complex64, b: Complex64) {
        assert!((a - b).norm() < 1e-12, "{a} != {b}");
    }

    #[test]
    fn beamforming_matrix_hand_values() {
        let one = coeffs(vec![1.0], vec![0.0], RisMode::Active);
        let m = one.beamforming_matrix(Side::Transmit).unwrap();
        close(m[[0, 0]], Complex64::new(1.0, 0.0));

        let four = coeffs(vec![4.0], vec![PI], RisMode::Active);
        let m = four.beamforming_matrix(Side::Reflect).unwrap();
        close(m[[0, 0]], Complex64::new(-2.0, 0.0));

        let two = coeffs(vec![1.0, 1.0], vec![FRAC_PI_2, 0.0], RisMode::Active);
        let m = two.beamforming_matrix(Side::Transmit).unwrap();
        close(m[[0, 0]], Complex64::new(0.0, 1.0));
        close(m[[1, 1]], Complex64::new(1.0, 0.0));
        close(m[[0, 1]], Complex64::new(0.0, 0.0));
        close(m[[1, 0]], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn beamforming_matrix_rejects_invalid() {
        let bad_phase = coeffs(vec![1.0], vec![7.0], RisMode::Active);
        assert!(matches!(
            bad_phase.beamforming_matrix(Side::Transmit),
            Err(Error::InvalidRis(_))
        ));
        let bad_split = RisCoefficients {
            beta_t: vec![0.4],
            beta_r: vec![0.4],
            theta_t: vec![0.0],
            theta_r: vec![0.0],
            mode: RisMode::Passive,
        };
        let err = bad_split.beamforming_matrix(Side::Reflect).unwrap_err();
        assert!(err.to_string().contains("beta_t + beta_r = 1"));
        let negative = coeffs(vec![-1.0], vec![0.0], RisMode::Active);
        assert!(negative.beamforming_matrix(Side::Reflect).is_err());
    }

    #[test]
    fn equal_split_values() {
        let cfg = SystemConfig::default().with_dims(1, 3, 1);
        let z = vec![0.0; 3];
        let c = RisCoefficients::equal_energy_split(&cfg, z.clone(), z.clone()).unwrap();
        assert!(c.beta_t.iter().chain(&c.beta_r).all(|&b| b == 5.0));
        assert_eq!(c.mode, RisMode::Active);

        let cfg2 = SystemConfig {
            p_asris_watts: 2.0,
            ..cfg.clone()
        };
        let c = RisCoefficients::equal_energy_split(&cfg2, z.clone(), z.clone()).unwrap();
        assert!(c.beta_t.iter().all(|&b| b == 1.0));
        assert!(c.validate(&cfg2).active_cap);

        let p = RisCoefficients::passive_equal_split(&cfg, z.clone(), z.clone()).unwrap();
        let flags = p.validate(&cfg);
        assert!(flags.passive_split && flags.phase_range);
        assert!(RisCoefficients::equal_energy_split(&cfg, vec![0.0; 2], z).is_err());
    }

    #[test]
    fn validate_flags() {
        let cfg = SystemConfig::default().with_dims(1, 1, 1);
        let passive = RisCoefficients {
            beta_t: vec![0.3],
            beta_r: vec![0.7],
            theta_t: vec![PI],
            theta_r: vec![PI],
            mode: RisMode::Passive,
        };
        let f = passive.validate(&cfg);
        assert!(f.passive_split && f.active_cap && f.phase_range);

        let active = coeffs(vec![6.0], vec![1.0], RisMode::Active);
        let f = active.validate(&cfg);
        assert!(!f.active_cap);
        assert_relative_eq!(f.active_cap_slack, -1.0);
        assert!(f.passive_split);

        let wrapped = coeffs(vec![1.0], vec![7.0], RisMode::Active);
        let f = wrapped.validate(&cfg);
        assert!(!f.phase_range);
        assert!(f.phase_range_slack < 0.0);
    }

    #[test]
    fn squared_cap_reading() {
        let cfg = SystemConfig {
            active_cap: ActiveCapReading::Squared,
            ..SystemConfig::default().with_dims(1, 1, 1)
        };
        // p/2 = 5: beta = 2 passes (4 <= 5), beta = 3 fails (9 > 5).
        assert!(coeffs(vec![2.0], vec![0.0], RisMode::Active).validate(&cfg).active_cap);
        assert!(!coeffs(vec![3.0], vec![0.0], RisMode::Active).validate(&cfg).active_cap);
        assert_relative_eq!(cfg.active_cap.max_beta(10.0), 5f64.sqrt());
    }
}
