//! Discount functions, tail masses, effective horizons and truncated values.
//!
//! Time indices are 1-based: `weight(1)` is the first discount weight. All
//! normalized quantities (`γ_{t+j} / Γ_t`, `Γ_s / Γ_t`) are computed from
//! per-kind closed forms so they stay accurate long after the raw tail mass
//! of a geometric discount has underflowed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiscountError {
    #[error("time index must be at least 1")]
    ZeroIndex,
    #[error("invalid discount parameter: {0}")]
    InvalidParameter(String),
    #[error("tail mass is zero at t = {t} (fixed horizon {horizon})")]
    ZeroTail { t: u64, horizon: u64 },
    #[error("probability {0} outside [0, 1)")]
    InvalidProbability(f64),
    #[error("reward {value} at offset {offset} outside [0, 1]")]
    RewardOutOfRange { offset: usize, value: f64 },
    #[error("reward sequence is empty")]
    EmptyRewards,
    #[error("effective horizon search did not terminate (t = {t}, p = {p})")]
    HorizonOverflow { t: u64, p: f64 },
}

/// Closed-form continuation of a tabular discount past its explicit prefix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TabularTail {
    /// `γ_{m+j} = first · ratio^(j-1)` for `j ≥ 1`.
    Geometric { first: f64, ratio: f64 },
    /// `γ_k = scale / (k (k+1))` for `k > m`.
    Quadratic { scale: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Discount {
    /// `γ_k = gamma^k`.
    Geometric { gamma: f64 },
    /// `γ_k = 1 / (k (k+1))`, so `Γ_t = 1/t`.
    Quadratic,
    /// `γ_k = 1` for `k ≤ horizon`, else 0.
    FixedHorizon { horizon: u64 },
    /// Explicit weights `γ_1..γ_m` followed by a closed-form tail.
    Tabular { weights: Vec<f64>, tail: TabularTail },
}

/// A value computed over a finite reward window, with a guaranteed bound on
/// how far any infinite continuation can move it (upwards).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedValue {
    pub value: f64,
    pub error_bound: f64,
}

impl TruncatedValue {
    /// Upper end of the interval holding the exact value.
    pub fn upper(&self) -> f64 {
        self.value + self.error_bound
    }
}

fn pow(base: f64, exp: u64) -> f64 {
    match i32::try_from(exp) {
        Ok(e) => base.powi(e),
        Err(_) => base.powf(exp as f64),
    }
}

impl Discount {
    pub fn geometric(gamma: f64) -> Result<Self, DiscountError> {
        let d = Discount::Geometric { gamma };
        d.validate()?;
        Ok(d)
    }

    pub fn fixed_horizon(horizon: u64) -> Result<Self, DiscountError> {
        let d = Discount::FixedHorizon { horizon };
        d.validate()?;
        Ok(d)
    }

    pub fn tabular(weights: Vec<f64>, tail: TabularTail) -> Result<Self, DiscountError> {
        let d = Discount::Tabular { weights, tail };
        d.validate()?;
        Ok(d)
    }

    /// Checks the parameters describe a regular discount (nonnegative
    /// weights, positive finite tails).
    pub fn validate(&self) -> Result<(), DiscountError> {
        let bad = |msg: String| Err(DiscountError::InvalidParameter(msg));
        match self {
            Discount::Geometric { gamma } => {
                if !(*gamma > 0.0 && *gamma < 1.0) {
                    return bad(format!("geometric rate {gamma} not in (0, 1)"));
                }
            }
            Discount::Quadratic => {}
            Discount::FixedHorizon { horizon } => {
                if *horizon == 0 {
                    return bad("fixed horizon must be positive".into());
                }
            }
            Discount::Tabular { weights, tail } => {
                if let Some((i, w)) = weights
                    .iter()
                    .enumerate()
                    .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
                {
                    return bad(format!("tabular weight {} = {w} is not a nonnegative number", i + 1));
                }
                match tail {
                    TabularTail::Geometric { first, ratio } => {
                        if !(*first > 0.0 && first.is_finite()) {
                            return bad(format!("geometric tail first weight {first} must be positive"));
                        }
                        if !(*ratio > 0.0 && *ratio < 1.0) {
                            return bad(format!("geometric tail ratio {ratio} not in (0, 1)"));
                        }
                    }
                    TabularTail::Quadratic { scale } => {
                        if !(*scale > 0.0 && scale.is_finite()) {
                            return bad(format!("quadratic tail scale {scale} must be positive"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn check_time(&self, t: u64) -> Result<(), DiscountError> {
        if t == 0 {
            return Err(DiscountError::ZeroIndex);
        }
        if let Discount::FixedHorizon { horizon } = self {
            if t > *horizon {
                return Err(DiscountError::ZeroTail { t, horizon: *horizon });
            }
        }
        Ok(())
    }

    /// `γ_k`.
    pub fn weight(&self, k: u64) -> Result<f64, DiscountError> {
        if k == 0 {
            return Err(DiscountError::ZeroIndex);
        }
        Ok(self.raw_weight(k))
    }

    fn raw_weight(&self, k: u64) -> f64 {
        match self {
            Discount::Geometric { gamma } => pow(*gamma, k),
            Discount::Quadratic => 1.0 / (k as f64 * (k as f64 + 1.0)),
            Discount::FixedHorizon { horizon } => {
                if k <= *horizon {
                    1.0
                } else {
                    0.0
                }
            }
            Discount::Tabular { weights, tail } => {
                let m = weights.len() as u64;
                if k <= m {
                    weights[(k - 1) as usize]
                } else {
                    match tail {
                        TabularTail::Geometric { first, ratio } => first * pow(*ratio, k - m - 1),
                        TabularTail::Quadratic { scale } => scale / (k as f64 * (k as f64 + 1.0)),
                    }
                }
            }
        }
    }

    /// `Γ_t = Σ_{i ≥ t} γ_i`. For geometric discounts this underflows to 0
    /// once `γ^t` leaves the f64 range; the normalized helpers do not.
    pub fn tail_mass(&self, t: u64) -> Result<f64, DiscountError> {
        self.check_time(t)?;
        Ok(self.raw_tail(t))
    }

    fn raw_tail(&self, t: u64) -> f64 {
        match self {
            Discount::Geometric { gamma } => pow(*gamma, t) / (1.0 - gamma),
            Discount::Quadratic => 1.0 / t as f64,
            Discount::FixedHorizon { horizon } => horizon.saturating_sub(t - 1) as f64,
            Discount::Tabular { weights, .. } => {
                let m = weights.len() as u64;
                if t <= m {
                    let prefix: f64 = weights[(t - 1) as usize..].iter().sum();
                    prefix + self.tabular_tail_from(m + 1)
                } else {
                    self.tabular_tail_from(t)
                }
            }
        }
    }

    // Σ_{k ≥ t} of the closed-form tail, for t > m.
    fn tabular_tail_from(&self, t: u64) -> f64 {
        let Discount::Tabular { weights, tail } = self else {
            unreachable!("tabular helper on non-tabular discount")
        };
        let m = weights.len() as u64;
        match tail {
            TabularTail::Geometric { first, ratio } => first * pow(*ratio, t - m - 1) / (1.0 - ratio),
            TabularTail::Quadratic { scale } => scale / t as f64,
        }
    }

    /// `Γ_s / Γ_t` for `s ≥ t`.
    pub fn tail_ratio(&self, t: u64, s: u64) -> Result<f64, DiscountError> {
        if t == 0 {
            return Err(DiscountError::ZeroIndex);
        }
        self.check_time(t)?;
        debug_assert!(s >= t);
        Ok(self.raw_tail_ratio(t, s))
    }

    fn raw_tail_ratio(&self, t: u64, s: u64) -> f64 {
        match self {
            Discount::Geometric { gamma } => pow(*gamma, s - t),
            Discount::Quadratic => t as f64 / s as f64,
            Discount::FixedHorizon { horizon } => {
                horizon.saturating_sub(s - 1) as f64 / (horizon - t + 1) as f64
            }
            Discount::Tabular { weights, tail } => {
                let m = weights.len() as u64;
                if t > m {
                    match tail {
                        TabularTail::Geometric { ratio, .. } => pow(*ratio, s - t),
                        TabularTail::Quadratic { .. } => t as f64 / s as f64,
                    }
                } else {
                    self.raw_tail(s) / self.raw_tail(t)
                }
            }
        }
    }

    /// `γ_{t+j} / Γ_t`: the weight of the reward `j` steps after `t` in a
    /// value normalized at `t`.
    pub fn relative_weight(&self, t: u64, j: u64) -> Result<f64, DiscountError> {
        self.check_time(t)?;
        Ok(self.raw_relative_weight(t, j))
    }

    fn raw_relative_weight(&self, t: u64, j: u64) -> f64 {
        match self {
            Discount::Geometric { gamma } => (1.0 - gamma) * pow(*gamma, j),
            Discount::Quadratic => {
                let k = (t + j) as f64;
                t as f64 / (k * (k + 1.0))
            }
            Discount::FixedHorizon { horizon } => {
                if t + j <= *horizon {
                    1.0 / (horizon - t + 1) as f64
                } else {
                    0.0
                }
            }
            Discount::Tabular { weights, tail } => {
                let m = weights.len() as u64;
                if t > m {
                    match tail {
                        TabularTail::Geometric { ratio, .. } => (1.0 - ratio) * pow(*ratio, j),
                        TabularTail::Quadratic { .. } => {
                            let k = (t + j) as f64;
                            t as f64 / (k * (k + 1.0))
                        }
                    }
                } else {
                    self.raw_weight(t + j) / self.raw_tail(t)
                }
            }
        }
    }

    /// Normalized mass of the window `[t, t+h]`: `(1/Γ_t) Σ_{k=t}^{t+h} γ_k`.
    pub fn window_mass(&self, t: u64, h: u64) -> Result<f64, DiscountError> {
        self.check_time(t)?;
        Ok(self.raw_window_mass(t, h))
    }

    fn raw_window_mass(&self, t: u64, h: u64) -> f64 {
        1.0 - self.raw_tail_ratio(t, t.saturating_add(h).saturating_add(1))
    }

    /// The effective horizon `H_t(p)`: least `h` whose window mass strictly
    /// exceeds `p`.
    pub fn effective_horizon(&self, t: u64, p: f64) -> Result<u64, DiscountError> {
        self.check_time(t)?;
        if !(0.0..1.0).contains(&p) {
            return Err(DiscountError::InvalidProbability(p));
        }
        let exceeds = |h: u64| self.raw_window_mass(t, h) > p;
        if exceeds(0) {
            return Ok(0);
        }
        // invariant: !exceeds(lo) && exceeds(hi)
        let mut lo = 0u64;
        let mut hi = 1u64;
        while !exceeds(hi) {
            lo = hi;
            hi = hi
                .checked_mul(2)
                .filter(|h| *h < u64::MAX / 4)
                .ok_or(DiscountError::HorizonOverflow { t, p })?;
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if exceeds(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// Value of the rewards at steps `t, t+1, …, t+len-1`, normalized at `t`,
    /// with a zero-filled tail.
    pub fn truncated_value(&self, t: u64, rewards: &[f64]) -> Result<TruncatedValue, DiscountError> {
        self.check_time(t)?;
        if rewards.is_empty() {
            return Err(DiscountError::EmptyRewards);
        }
        if let Some((offset, &value)) = rewards
            .iter()
            .enumerate()
            .find(|(_, r)| !(0.0..=1.0).contains(*r))
        {
            return Err(DiscountError::RewardOutOfRange { offset, value });
        }
        let value: f64 = rewards
            .iter()
            .enumerate()
            .map(|(j, r)| self.raw_relative_weight(t, j as u64) * r)
            .sum();
        let covered = self.raw_window_mass(t, rewards.len() as u64 - 1);
        Ok(TruncatedValue {
            value: value.clamp(0.0, 1.0),
            error_bound: (1.0 - covered).clamp(0.0, 1.0),
        })
    }

    /// Relative weights `γ_{t+j}/Γ_t` for `j = 0..=h`.
    pub fn window_weights(&self, t: u64, h: u64) -> Result<Vec<f64>, DiscountError> {
        self.check_time(t)?;
        Ok((0..=h).map(|j| self.raw_relative_weight(t, j)).collect())
    }

    /// Short human-readable label, e.g. `geometric(0.5)`.
    /// True when the normalized window weights `γ_{t+j}/Γ_t` do not depend
    /// on `t`.
    pub fn is_time_invariant(&self) -> bool {
        matches!(self, Discount::Geometric { .. })
    }

    pub fn label(&self) -> String {
        match self {
            Discount::Geometric { gamma } => format!("geometric({gamma})"),
            Discount::Quadratic => "quadratic".into(),
            Discount::FixedHorizon { horizon } => format!("fixed-horizon({horizon})"),
            Discount::Tabular { weights, .. } => format!("tabular({} weights)", weights.len()),
        }
    }
}

impl std::str::FromStr for Discount {
    type Err = DiscountError;

    /// Parses the compact command-line form: `geometric:0.5`, `quadratic`,
    /// `fixed-horizon:10`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let param = |name: &str| {
            arg.ok_or_else(|| DiscountError::InvalidParameter(format!("{kind} needs a {name}")))
        };
        let d = match kind {
            "geometric" => Discount::Geometric {
                gamma: param("rate")?
                    .parse()
                    .map_err(|_| DiscountError::InvalidParameter(format!("bad rate in {s:?}")))?,
            },
            "quadratic" => Discount::Quadratic,
            "fixed-horizon" => Discount::FixedHorizon {
                horizon: param("horizon")?
                    .parse()
                    .map_err(|_| DiscountError::InvalidParameter(format!("bad horizon in {s:?}")))?,
            },
            other => {
                return Err(DiscountError::InvalidParameter(format!(
                    "unknown discount kind {other:?} (tabular discounts need a config file)"
                )))
            }
        };
        d.validate()?;
        Ok(d)
    }
}
