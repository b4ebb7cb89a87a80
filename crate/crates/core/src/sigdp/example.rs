//! Ten-state example: observations drawn uniformly from `[0, 10]^2`
//! (NumPy `random.seed(1234)`), a five-step horizon, and golden tables
//! printed to two decimals.

use serde::{Deserialize, Serialize};

use super::{derive_policy, DeterministicPolicy, FiniteSignatureMdp, REWARD_MATCH_TOLERANCE};
use crate::error::Result;

pub const HORIZON: usize = 5;

/// Full-precision draws.
pub const SEEDED_OBSERVATIONS: [[f64; 2]; 10] = [
    [1.9151945037889229, 6.221087710398319],
    [4.377277390071145, 7.853585837137692],
    [7.799758081188035, 2.7259260528264164],
    [2.764642551430967, 8.018721775350192],
    [9.581393536837052, 8.759326347420947],
    [3.5781726995786665, 5.009951255234587],
    [6.834629351721363, 7.127020269829002],
    [3.7025075479039495, 5.611961860656249],
    [5.030831653078097, 0.1376844959068224],
    [7.728266216123741, 8.826411906361166],
];

/// The same draws rounded to two decimals.
pub const ROUNDED_OBSERVATIONS: [[f64; 2]; 10] = [
    [1.92, 6.22],
    [4.38, 7.85],
    [7.80, 2.73],
    [2.76, 8.02],
    [9.58, 8.76],
    [3.58, 5.01],
    [6.83, 7.13],
    [3.70, 5.61],
    [5.03, 0.14],
    [7.73, 8.83],
];

/// Coefficient `(1,2)` of the observation-path S-table, rows `t = 0..=5`.
pub const GOLDEN_SIGNATURE_TABLE: [[f64; 10]; 6] = [
    [-7.17, -6.10, -20.00, -2.27, 37.55, -5.14, -4.34, -0.38, -14.38, -5.23],
    [-15.79, -1.80, -19.32, -9.84, 11.84, -6.23, 16.11, -2.67, -13.05, 3.04],
    [2.03, -3.43, -14.11, -14.15, 20.73, 1.33, 3.79, -3.43, -12.84, -3.43],
    [-0.54, -2.67, 12.21, -6.65, -2.02, -4.18, 6.40, 3.04, -7.66, -1.80],
    [9.73, 1.63, -4.82, -13.32, 2.24, -3.54, -1.81, -0.76, -9.48, 6.47],
    [0.0; 10],
];

/// Value table for reward `o1 + o2` and discount 1, rows `t = 0..=5`.
pub const GOLDEN_VALUE_TABLE: [[f64; 10]; 6] = [
    [62.20, 63.97, 54.20, 50.76, 49.03, 56.39, 43.20, 66.89, 61.75, 59.65],
    [53.61, 54.65, 40.23, 32.42, 43.86, 45.61, 35.07, 50.33, 51.22, 47.41],
    [43.09, 38.10, 21.89, 24.28, 35.27, 31.65, 29.90, 38.10, 40.44, 38.10],
    [32.30, 25.87, 13.76, 19.11, 24.75, 13.30, 21.31, 28.79, 26.50, 21.55],
    [18.34, 16.55, 8.60, 10.53, 13.96, 5.17, 10.78, 12.23, 8.14, 9.31],
    [0.0; 10],
];

/// Tolerance for comparisons against two-decimal golden values.
pub const TABLE_TOLERANCE: f64 = 0.01;

/// Chen-optimality setup (0-based): branch at state 8 at time 2, candidate
/// successors 1, 2 and 3.
pub const CHEN_BRANCH_STATE: usize = 7;
pub const CHEN_TIME: usize = 2;
pub const CHEN_CANDIDATES: [usize; 3] = [0, 1, 2];
pub const GOLDEN_CHEN_COST: f64 = 0.85;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationSource {
    #[default]
    Seeded,
    Rounded,
}

pub fn observations(source: ObservationSource) -> &'static [[f64; 2]; 10] {
    match source {
        ObservationSource::Seeded => &SEEDED_OBSERVATIONS,
        ObservationSource::Rounded => &ROUNDED_OBSERVATIONS,
    }
}

pub fn mdp(source: ObservationSource) -> FiniteSignatureMdp {
    FiniteSignatureMdp::new(observations(source).iter().map(|o| o.to_vec()).collect(), HORIZON)
        .expect("embedded example is well formed")
}

/// The policy is not given directly; with discount 1 the last non-terminal
/// value row is `r(pi(x))`, and the rewards are distinct, so matching that row
/// against the rewards recovers it.
pub fn policy(source: ObservationSource) -> Result<DeterministicPolicy> {
    derive_policy(&mdp(source).rewards(), &GOLDEN_VALUE_TABLE[HORIZON - 1], REWARD_MATCH_TOLERANCE)
}
