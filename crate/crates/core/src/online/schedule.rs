use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScheduleKind {
    /// `η_j = 1 / (a·j + b)`.
    Online1,
    /// `η_j = b / j^a`, `0.5 < a ≤ 1`.
    Online2,
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleKind::Online1 => f.write_str("online1"),
            ScheduleKind::Online2 => f.write_str("online2"),
        }
    }
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "online1" => Ok(ScheduleKind::Online1),
            "online2" => Ok(ScheduleKind::Online2),
            other => Err(Error::InvalidParameter(format!(
                "unknown schedule {other:?} (expected online1 or online2)"
            ))),
        }
    }
}

/// Step-size rule satisfying `0 < η_j < 1`, `Σ η_j = ∞`, `Σ η_j² < ∞`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSchedule {
    kind: ScheduleKind,
    a: f64,
    b: f64,
}

impl StepSchedule {
    pub fn new(kind: ScheduleKind, a: f64, b: f64) -> Result<Self> {
        match kind {
            ScheduleKind::Online1 => Self::online1(a, b),
            ScheduleKind::Online2 => Self::online2(a, b),
        }
    }

    /// Requires `a > 0`, `b > 0` and a first step `1/(a+b) < 1`.
    pub fn online1(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "online1 needs a > 0 and b > 0, got a={a}, b={b}"
            )));
        }
        if !(a + b > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "online1 needs a + b > 1 so that the first step is below 1, got a={a}, b={b}"
            )));
        }
        Ok(Self {
            kind: ScheduleKind::Online1,
            a,
            b,
        })
    }

    /// Requires `0.5 < a ≤ 1` and `0 < b < 1`. `a = 1` is accepted as the
    /// boundary of the family.
    pub fn online2(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.5 && a <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "online2 needs 0.5 < a < 1 (a = 1 allowed as boundary), got a={a}"
            )));
        }
        if !(b > 0.0 && b < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "online2 needs 0 < b < 1, got b={b}"
            )));
        }
        Ok(Self {
            kind: ScheduleKind::Online2,
            a,
            b,
        })
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// `a = 1` for online2 sits on the edge of the admissible range.
    pub fn is_boundary(&self) -> bool {
        self.kind == ScheduleKind::Online2 && self.a == 1.0
    }

    /// Step size for iteration `j ≥ 1`.
    pub fn eta(&self, j: u64) -> f64 {
        assert!(j >= 1, "iterations are counted from 1");
        let j = j as f64;
        match self.kind {
            ScheduleKind::Online1 => 1.0 / (self.a * j + self.b),
            ScheduleKind::Online2 => self.b / j.powf(self.a),
        }
    }

    /// Upper bound on `Σ_{j≥1} η_j²` from `η_1² + ∫_1^∞ η(x)² dx`.
    pub fn squared_sum_bound(&self) -> f64 {
        let first = self.eta(1).powi(2);
        match self.kind {
            ScheduleKind::Online1 => first + 1.0 / (self.a * (self.a + self.b)),
            ScheduleKind::Online2 => first + self.b * self.b / (2.0 * self.a - 1.0),
        }
    }
}
