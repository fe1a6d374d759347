//! Fixed inputs shared by the benchmarks.

use asris_core::baseline::sample_channel;
use asris_core::env::{action_dim, decode_action};
use asris_core::{ActionVector, ChannelRealization, DecisionVariables, RisMode, SystemConfig};

/// A default-sized network with one channel draw and a deterministic in-range point.
pub fn fixture(n: usize, m: usize, i: usize) -> (SystemConfig, ChannelRealization, DecisionVariables) {
    let sys = SystemConfig::default().with_dims(n, m, i);
    let ch = sample_channel(&sys, 1).expect("channel");
    let a = ActionVector((0..action_dim(&sys)).map(|k| ((k as f64) * 0.37).sin()).collect());
    let dv = decode_action(&a, &sys, RisMode::Active, 1.0).expect("decode");
    (sys, ch, dv)
}
