mod common;

use std::f64::consts::TAU;

use asris_core::env::{action_dim, decode_action, encode_action, EnvConfig, SrEnv};
use asris_core::problem::Constraint;
use asris_core::rng::rng_from_seed;
use asris_core::{ActionVector, RisCoefficients, RisMode, Side, SystemConfig};
use common::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn power(ris: &RisCoefficients, side: Side, s: &[Complex64]) -> f64 {
    let m = ris.beamforming_matrix(side).unwrap();
    let s = ndarray::Array1::from(s.to_vec());
    m.dot(&s).iter().map(Complex64::norm_sqr).sum()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn passive_surface_conserves_energy(seed in any::<u64>(), m in 1usize..32) {
        let mut rng = rng_from_seed(seed);
        let beta_t: Vec<f64> = (0..m).map(|_| uniform(0.0, 1.0, &mut rng)).collect();
        let ris = RisCoefficients {
            beta_r: beta_t.iter().map(|b| 1.0 - b).collect(),
            beta_t,
            theta_t: (0..m).map(|_| uniform(0.0, TAU, &mut rng)).collect(),
            theta_r: (0..m).map(|_| uniform(0.0, TAU, &mut rng)).collect(),
            mode: RisMode::Passive,
        };
        let s: Vec<Complex64> = gaussian_matrix(m, 1, 3.0, &mut rng).iter().copied().collect();
        let input: f64 = s.iter().map(Complex64::norm_sqr).sum();
        let total = power(&ris, Side::Transmit, &s) + power(&ris, Side::Reflect, &s);
        prop_assert!((total - input).abs() <= 1e-12 * input.max(1.0));
    }

    #[test]
    fn equal_split_amplifies_each_side(seed in any::<u64>(), m in 1usize..16, p in 0.5f64..40.0) {
        let mut rng = rng_from_seed(seed);
        let sys = SystemConfig { p_asris_watts: p, ..SystemConfig::default().with_dims(2, m, 1) };
        let theta = |rng: &mut _| (0..m).map(|_| uniform(0.0, TAU, rng)).collect::<Vec<_>>();
        let ris = RisCoefficients::equal_energy_split(&sys, theta(&mut rng), theta(&mut rng)).unwrap();
        let s: Vec<Complex64> = gaussian_matrix(m, 1, 1.0, &mut rng).iter().copied().collect();
        let input: f64 = s.iter().map(Complex64::norm_sqr).sum();
        for side in [Side::Transmit, Side::Reflect] {
            let out = power(&ris, side, &s);
            prop_assert!((out - p / 2.0 * input).abs() <= 1e-12 * out.max(1.0));
        }
    }

    #[test]
    fn any_action_decodes_inside_the_box(seed in any::<u64>(), n in 1usize..4, m in 1usize..6, i in 1usize..4, passive in any::<bool>(), spread in 0.5f64..5.0) {
        let mut rng = rng_from_seed(seed);
        let sys = SystemConfig::default().with_dims(n, m, i);
        let mode = if passive { RisMode::Passive } else { RisMode::Active };
        let a = ActionVector((0..action_dim(&sys)).map(|_| uniform(-spread, spread, &mut rng)).collect());
        let dv = decode_action(&a, &sys, mode, 3.0).unwrap();
        let flags = oracle_flags(&unit_channel(&sys, &mut rng), &dv, &sys);
        for c in [Constraint::PassiveSplit, Constraint::ActiveCap, Constraint::PhaseRange, Constraint::PowerCap, Constraint::EtaRange, Constraint::TauRange] {
            prop_assert!(flags[c.index()], "{} violated", c.label());
        }
        prop_assert!((0.0..=3.0).contains(&dv.rate_target));

        let again = decode_action(&encode_action(&dv, &sys, 3.0).unwrap(), &sys, mode, 3.0).unwrap();
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(1.0));
        prop_assert!(close(&again.eta, &dv.eta) && close(&again.tau, &dv.tau) && close(&again.power, &dv.power));
        prop_assert!(close(&again.ris.beta_t, &dv.ris.beta_t) && close(&again.ris.beta_r, &dv.ris.beta_r));
        prop_assert!(close(&again.ris.theta_t, &dv.ris.theta_t) && close(&again.ris.theta_r, &dv.ris.theta_r));
        prop_assert!((again.rate_target - dv.rate_target).abs() <= 1e-12);
        for (x, y) in again.w1.iter().chain(again.w2.iter()).zip(dv.w1.iter().chain(dv.w2.iter())) {
            prop_assert!((x - y).norm() <= 1e-12);
        }
    }
}

#[test]
fn episodes_end_after_their_length() {
    let sys = SystemConfig::default().with_dims(2, 2, 1);
    let mut env = SrEnv::new(
        sys,
        EnvConfig {
            episode_len: 7,
            ..EnvConfig::default()
        },
    )
    .unwrap();
    let s = env.reset(3).unwrap();
    assert_eq!(s.0.len(), env.state_dim());
    let a = ActionVector(vec![0.1; env.action_dim()]);
    for t in 0..7 {
        let r = env.step(&a).unwrap();
        assert_eq!(r.done, t == 6);
        assert!(r.reward.is_finite());
        assert!(r.info.constraints.satisfied_count() <= 11);
    }
    assert!(env.step(&a).is_err());
}
