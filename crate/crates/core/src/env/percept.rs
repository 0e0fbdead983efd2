use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// An action symbol. Binary experiments use `0` and `1`; the lock
/// environments alias `0 = up`, `1 = down`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Action(pub u8);

impl Action {
    pub const UP: Action = Action(0);
    pub const DOWN: Action = Action(1);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An observation symbol. The empty observation alphabet is the single unit
/// symbol `Observation(0)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Observation(pub u16);

impl Observation {
    pub const UNIT: Observation = Observation(0);
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewardError {
    #[error("reward {num}/{den} outside [0, 1]")]
    OutOfRange { num: u64, den: u64 },
    #[error("reward denominator is zero")]
    ZeroDenominator,
    #[error("cannot parse reward {0:?}")]
    Parse(String),
}

/// An exact rational reward in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Reward(Ratio<u64>);

impl Reward {
    pub const ZERO: Reward = Reward(Ratio::new_raw(0, 1));
    pub const HALF: Reward = Reward(Ratio::new_raw(1, 2));
    pub const ONE: Reward = Reward(Ratio::new_raw(1, 1));

    pub fn new(num: u64, den: u64) -> Result<Self, RewardError> {
        if den == 0 {
            return Err(RewardError::ZeroDenominator);
        }
        if num > den {
            return Err(RewardError::OutOfRange { num, den });
        }
        Ok(Reward(Ratio::new(num, den)))
    }

    pub fn from_ratio(r: Ratio<u64>) -> Result<Self, RewardError> {
        Reward::new(*r.numer(), *r.denom())
    }

    pub fn ratio(self) -> Ratio<u64> {
        self.0
    }

    pub fn numer(self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(self) -> u64 {
        *self.0.denom()
    }

    pub fn to_f64(self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }
}

impl fmt::Display for Reward {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

impl From<Reward> for String {
    fn from(r: Reward) -> String {
        r.to_string()
    }
}

impl TryFrom<String> for Reward {
    type Error = RewardError;

    fn try_from(s: String) -> Result<Self, RewardError> {
        s.parse()
    }
}

impl FromStr for Reward {
    type Err = RewardError;

    /// Accepts `num/den` or a bare integer (`0`, `1`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |x: &str| x.trim().parse::<u64>().map_err(|_| RewardError::Parse(s.to_string()));
        match s.split_once('/') {
            Some((n, d)) => Reward::new(parse(n)?, parse(d)?),
            None => Reward::new(parse(s)?, 1),
        }
    }
}

/// Observation/reward pair returned after each action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Percept {
    pub observation: Observation,
    pub reward: Reward,
}

impl Percept {
    pub fn new(observation: Observation, reward: Reward) -> Self {
        Percept { observation, reward }
    }

    /// Percept with the unit observation.
    pub fn reward(reward: Reward) -> Self {
        Percept { observation: Observation::UNIT, reward }
    }
}
