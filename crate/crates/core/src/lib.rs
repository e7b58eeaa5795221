//! Contest-design laboratory.
//!
//! * [`contest`]: two-player Tullock contests, closed-form equilibria and
//!   grid oracles.
//! * [`darts`]: 501 legs and best-of-k contests.
//! * [`dgp`]: synthetic knockout tournaments with planted effects, producing
//!   a panel of [`dgp::ContestRecord`]s.
//! * [`learners`]: regression forests, conditional densities and kernel
//!   smoothing.
//! * [`estimators`]: fixed-effects OLS with clustered errors, doubly-robust
//!   dose-response curves and 2SLS.
//! * [`pipeline`]: scenario configuration, exhibit reproduction and the
//!   acceptance checks.

pub mod contest;
pub mod darts;
pub mod dgp;
pub mod error;
pub mod estimators;
pub mod learners;
pub mod pipeline;
pub mod rng;
pub mod table;

pub use error::{Error, Result};

use serde::{Deserialize, Serialize};

/// The two seats in a contest: the lower-ability and the higher-ability
/// contestant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Contestant {
    Low,
    High,
}

impl Contestant {
    pub fn other(self) -> Self {
        match self {
            Contestant::Low => Contestant::High,
            Contestant::High => Contestant::Low,
        }
    }

    pub(crate) fn index(self) -> usize {
        match self {
            Contestant::Low => 0,
            Contestant::High => 1,
        }
    }
}
