//! PPO, TD3 and A3C over the rate environment.

pub mod a3c;
pub mod ppo;
pub mod replay;
pub mod td3;
pub mod train;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::Error;

pub use a3c::{A3cConfig, A3cModel};
pub use ppo::{PpoAgent, PpoConfig};
pub use td3::{Td3Agent, Td3Config};
pub use train::{
    random_policy_trace, train, AgentConfigs, AgentState, EpisodeRow, PolicyCheckpoint, TrainOptions, TrainOutcome,
    TrainingTrace,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Ppo,
    Td3,
    A3c,
}

impl Algo {
    pub const ALL: [Algo; 3] = [Algo::Ppo, Algo::Td3, Algo::A3c];

    pub fn as_str(&self) -> &'static str {
        match self {
            Algo::Ppo => "ppo",
            Algo::Td3 => "td3",
            Algo::A3c => "a3c",
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "ppo" => Ok(Algo::Ppo),
            "td3" => Ok(Algo::Td3),
            "a3c" => Ok(Algo::A3c),
            other => Err(Error::Parse {
                what: "algorithm".into(),
                message: format!("unknown algorithm {other:?} (expected ppo, td3 or a3c)"),
            }),
        }
    }
}

/// Stacks equally long rows into a matrix.
pub(crate) fn stack<'a, I>(rows: I, width: usize) -> Array2<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut data = Vec::new();
    let mut n = 0;
    for r in rows {
        debug_assert_eq!(r.len(), width);
        data.extend_from_slice(r);
        n += 1;
    }
    Array2::from_shape_vec((n, width), data).expect("rows have equal width")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algo_names() {
        for a in Algo::ALL {
            assert_eq!(a.as_str().parse::<Algo>().unwrap(), a);
        }
        assert!("dqn".parse::<Algo>().is_err());
        assert_eq!("TD3".parse::<Algo>().unwrap(), Algo::Td3);
    }
}
