use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("schedule needs at least two knots")]
    TooFewKnots,
    #[error("schedule knots must be strictly increasing and start at 0")]
    KnotOrder,
    #[error("schedule.{field} has {len} values for {n} intervals")]
    Length { field: &'static str, len: usize, n: usize },
    #[error("schedule.{field}[{index}] = {value} is outside [0, 1]")]
    OutOfRange { field: &'static str, index: usize, value: f64 },
}

/// Piecewise-constant feed controls on `[knots[k], knots[k+1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleFile", into = "ScheduleFile")]
pub struct ControlSchedule {
    knots: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    u3: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleFile {
    pub knots_h: Vec<f64>,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u3: Option<Vec<f64>>,
}

impl TryFrom<ScheduleFile> for ControlSchedule {
    type Error = ScheduleError;

    fn try_from(f: ScheduleFile) -> Result<Self, Self::Error> {
        ControlSchedule::new(f.knots_h, f.u1, f.u2, f.u3)
    }
}

impl From<ControlSchedule> for ScheduleFile {
    fn from(s: ControlSchedule) -> Self {
        ScheduleFile { knots_h: s.knots, u1: s.u1, u2: s.u2, u3: s.u3 }
    }
}

fn check_values(field: &'static str, v: &[f64], n: usize) -> Result<(), ScheduleError> {
    if v.len() != n {
        return Err(ScheduleError::Length { field, len: v.len(), n });
    }
    match v.iter().position(|x| !(0.0..=1.0).contains(x)) {
        Some(index) => Err(ScheduleError::OutOfRange { field, index, value: v[index] }),
        None => Ok(()),
    }
}

impl ControlSchedule {
    pub fn new(knots: Vec<f64>, u1: Vec<f64>, u2: Vec<f64>, u3: Option<Vec<f64>>) -> Result<Self, ScheduleError> {
        if knots.len() < 2 {
            return Err(ScheduleError::TooFewKnots);
        }
        if knots[0] != 0.0 || knots.windows(2).any(|w| !(w[1] > w[0])) || knots.iter().any(|t| !t.is_finite()) {
            return Err(ScheduleError::KnotOrder);
        }
        let n = knots.len() - 1;
        check_values("u1", &u1, n)?;
        check_values("u2", &u2, n)?;
        if let Some(u3) = &u3 {
            check_values("u3", u3, n)?;
        }
        Ok(Self { knots, u1, u2, u3 })
    }

    /// `n` equal intervals on `[0, t_f]` with constant values.
    pub fn uniform(t_f: f64, n: usize, u1: f64, u2: f64) -> Result<Self, ScheduleError> {
        let knots = (0..=n).map(|k| t_f * k as f64 / n as f64).collect();
        Self::new(knots, vec![u1; n], vec![u2; n], None)
    }

    /// Equal intervals carrying the given per-interval values.
    pub fn from_values(t_f: f64, u1: Vec<f64>, u2: Vec<f64>) -> Result<Self, ScheduleError> {
        let n = u1.len();
        let knots = (0..=n).map(|k| t_f * k as f64 / n as f64).collect();
        Self::new(knots, u1, u2, None)
    }

    pub fn with_u3(mut self, u3: Vec<f64>) -> Result<Self, ScheduleError> {
        check_values("u3", &u3, self.intervals())?;
        self.u3 = Some(u3);
        Ok(self)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn intervals(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn u1(&self) -> &[f64] {
        &self.u1
    }

    pub fn u2(&self) -> &[f64] {
        &self.u2
    }

    pub fn u3(&self) -> Option<&[f64]> {
        self.u3.as_deref()
    }

    pub fn t_final(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    /// Interval containing `t`, right-continuous; times past the end map to
    /// the last interval.
    pub fn interval_at(&self, t: f64) -> usize {
        let k = self.knots.partition_point(|&s| s <= t);
        k.saturating_sub(1).min(self.intervals() - 1)
    }

    pub fn at(&self, t: f64) -> [f64; 2] {
        let k = self.interval_at(t);
        [self.u1[k], self.u2[k]]
    }

    pub fn u3_at(&self, t: f64) -> Option<f64> {
        self.u3.as_ref().map(|u3| u3[self.interval_at(t)])
    }

    /// Exact `∫ (u1 + u2) dt` over the schedule span.
    pub fn total_feed(&self) -> f64 {
        self.knots
            .windows(2)
            .zip(self.u1.iter().zip(&self.u2))
            .map(|(w, (a, b))| (w[1] - w[0]) * (a + b))
            .sum()
    }

    /// Copy with `u1`, `u2` replaced.
    pub fn with_feeds(&self, u1: Vec<f64>, u2: Vec<f64>) -> Result<Self, ScheduleError> {
        Self::new(self.knots.clone(), u1, u2, self.u3.clone())
    }
}
