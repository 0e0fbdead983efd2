//! Regret traces: per-step gaps `V*_μ - V^π_μ`, their running Cesàro
//! averages, and the CSV format they are stored in.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discount::{Discount, DiscountError};
use crate::env::{cursor_at, Action, Environment, EnvError, History, Reward};
use crate::planner::{PlanError, Planner};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("trace row {row}: {message}")]
    Row { row: usize, message: String },
    #[error(transparent)]
    Environment(#[from] EnvError),
    #[error(transparent)]
    Discount(#[from] DiscountError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

/// What the agent did at each step of a run, alongside the history.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunRecord {
    pub history: History,
    pub exploring: Vec<bool>,
    pub model_index: Vec<usize>,
}

impl RunRecord {
    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: u64,
    #[serde(with = "bit")]
    pub exploring: bool,
    pub model_index: usize,
    #[serde(with = "action")]
    pub action: Action,
    pub reward_num: u64,
    pub reward_den: u64,
    pub gap: Option<f64>,
    pub avg_gap: Option<f64>,
}

mod bit {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(b: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(*b as u8)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(D::Error::custom(format!("expected 0 or 1, got {other}"))),
        }
    }
}

mod action {
    use crate::env::Action;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(a: &Action, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(a.0)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Action, D::Error> {
        u8::deserialize(d).map(Action)
    }
}

impl TraceRecord {
    pub fn reward(&self) -> Option<Reward> {
        Reward::new(self.reward_num, self.reward_den).ok()
    }
}

/// Running means: the `k`-th output is the mean of the first `k` inputs.
pub fn cesaro(series: &[f64]) -> Vec<f64> {
    let mut sum = 0.0;
    series
        .iter()
        .enumerate()
        .map(|(k, x)| {
            sum += x;
            sum / (k + 1) as f64
        })
        .collect()
}

/// Smallest `T` with `i_t = i_N` for all `t ≥ T`. `None` (not settled) if
/// the final index first appears at the last step of a run longer than one.
pub fn settling_time(model_index: &[usize]) -> Option<u64> {
    let last = *model_index.last()?;
    let start = model_index.iter().rposition(|&i| i != last).map_or(0, |p| p + 1);
    if model_index.len() > 1 && start + 1 == model_index.len() {
        None
    } else {
        Some(start as u64 + 1)
    }
}

/// Gaps at the sampled steps `t = 1, 1 + stride, …` of a run against the
/// true environment.
#[derive(Debug, Clone, PartialEq)]
pub struct GapSeries {
    /// `(t, gap)`; `gap` is `None` when the step is not evaluable.
    pub samples: Vec<(u64, Option<f64>)>,
    /// Sampled steps whose optimal value exceeded the planner budget.
    pub budget_exhausted: u64,
}

/// `gap_t = optimal_value(μ, h_{<t}, ε/2) - V̂_t`, where `V̂_t` is the
/// truncated value of the realized rewards over `H_t(1 - ε/2)` steps. A
/// sampled `t` is evaluable iff `t + H_t(1 - ε/2) ≤ N`.
pub fn gap_series(
    true_env: &(impl Environment + ?Sized),
    history: &History,
    gap_tolerance: f64,
    discount: &Discount,
    stride: u64,
    planner: &Planner,
) -> Result<GapSeries, TraceError> {
    assert!(stride >= 1, "stride is positive");
    let half = gap_tolerance / 2.0;
    let n = history.len() as u64;
    let rewards: Vec<f64> = history.rewards().map(Reward::to_f64).collect();
    let cache_values = discount.is_time_invariant() && true_env.time_homogeneous();
    let mut values: HashMap<u64, f64> = HashMap::new();
    let mut cursor = cursor_at(true_env, History::new().view())?;
    let mut samples = Vec::new();
    let mut budget_exhausted = 0;
    for t in 1..=n {
        let k = (t - 1) as usize;
        if (t - 1) % stride == 0 {
            let h = discount.effective_horizon(t, 1.0 - half)?;
            let gap = if t.checked_add(h).is_some_and(|end| end <= n) {
                let prefix = &history.steps()[..k];
                let key = if cache_values { cursor.fingerprint(history.prefix(k)) } else { None };
                let optimal = match key.and_then(|f| values.get(&f)) {
                    Some(&v) => Ok(v),
                    None => planner
                        .optimal_plan_from(true_env, cursor.as_ref(), prefix, half, discount)
                        .map(|p| p.value.value),
                };
                match optimal {
                    Ok(v) => {
                        if let Some(f) = key {
                            values.insert(f, v);
                        }
                        let realized = discount.truncated_value(t, &rewards[k..=k + h as usize])?;
                        Some(v - realized.value)
                    }
                    Err(PlanError::BudgetExceeded { .. }) => {
                        budget_exhausted += 1;
                        None
                    }
                    Err(e) => return Err(e.into()),
                }
            } else {
                None
            };
            samples.push((t, gap));
        }
        let step = history.steps()[k];
        cursor.advance(history.prefix(k), step.action)?;
    }
    Ok(GapSeries { samples, budget_exhausted })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub records: Vec<TraceRecord>,
    pub gap_tolerance: f64,
    pub stride: u64,
    pub steps: u64,
    pub settling_time: Option<u64>,
    pub budget_exhausted: u64,
}

impl RegretTrace {
    pub fn new(run: &RunRecord, gaps: &GapSeries, gap_tolerance: f64, stride: u64) -> Self {
        let mut sum = 0.0;
        let mut count = 0u64;
        let records = gaps
            .samples
            .iter()
            .map(|&(t, gap)| {
                let k = (t - 1) as usize;
                let step = run.history.steps()[k];
                let avg_gap = gap.map(|g| {
                    sum += g;
                    count += 1;
                    sum / count as f64
                });
                TraceRecord {
                    t,
                    exploring: run.exploring[k],
                    model_index: run.model_index[k],
                    action: step.action,
                    reward_num: step.percept.reward.numer(),
                    reward_den: step.percept.reward.denom(),
                    gap,
                    avg_gap,
                }
            })
            .collect();
        RegretTrace {
            records,
            gap_tolerance,
            stride,
            steps: run.len() as u64,
            settling_time: settling_time(&run.model_index),
            budget_exhausted: gaps.budget_exhausted,
        }
    }

    pub fn evaluated(&self) -> impl Iterator<Item = (u64, f64, f64)> + '_ {
        self.records.iter().filter_map(|r| Some((r.t, r.gap?, r.avg_gap?)))
    }

    pub fn evaluable_count(&self) -> usize {
        self.evaluated().count()
    }

    /// Evaluable sampled steps over all sampled steps.
    pub fn evaluable_fraction(&self) -> f64 {
        if self.records.is_empty() {
            0.0
        } else {
            self.evaluable_count() as f64 / self.records.len() as f64
        }
    }

    pub fn final_average(&self) -> Option<f64> {
        self.evaluated().last().map(|(_, _, avg)| avg)
    }

    /// Running average at the last evaluable step `≤ t`.
    pub fn average_at(&self, t: u64) -> Option<f64> {
        self.evaluated().take_while(|&(s, _, _)| s <= t).last().map(|(_, _, avg)| avg)
    }

    /// `(t, running average)` at `t = 10, 100, …` up to the last evaluable
    /// step, followed by the last evaluable step itself.
    pub fn decade_averages(&self) -> Vec<(u64, f64)> {
        let Some((last, _, final_avg)) = self.evaluated().last() else {
            return Vec::new();
        };
        let mut out = Vec::new();
        let mut t = 10u64;
        while t < last {
            if let Some(avg) = self.average_at(t) {
                out.push((t, avg));
            }
            t = t.saturating_mul(10);
        }
        out.push((last, final_avg));
        out
    }

    /// Largest gap over evaluable steps in `[t_last / 10, t_last]`, a
    /// finite-run stand-in for the limit superior of the gaps.
    pub fn final_decade_max_gap(&self) -> Option<f64> {
        let (last, _, _) = self.evaluated().last()?;
        self.evaluated()
            .filter(|&(t, _, _)| t >= last / 10)
            .map(|(_, g, _)| g)
            .fold(None, |m: Option<f64>, g| Some(m.map_or(g, |m| m.max(g))))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), TraceError> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String, TraceError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

pub fn read_trace_csv<R: Read>(reader: R) -> Result<Vec<TraceRecord>, TraceError> {
    let mut r = csv::Reader::from_reader(reader);
    let expected = ["t", "exploring", "model_index", "action", "reward_num", "reward_den", "gap", "avg_gap"];
    let headers = r.headers()?.clone();
    if headers.iter().ne(expected.iter().copied()) {
        return Err(TraceError::Row { row: 0, message: format!("unexpected header {headers:?}") });
    }
    let mut out = Vec::new();
    for (row, rec) in r.deserialize().enumerate() {
        let rec: TraceRecord = rec?;
        if rec.reward().is_none() {
            return Err(TraceError::Row {
                row: row + 1,
                message: format!("reward {}/{} outside [0, 1]", rec.reward_num, rec.reward_den),
            });
        }
        out.push(rec);
    }
    Ok(out)
}
