use crate::error::{Error, Result};
use crate::model::{Cube, StatTensor};

/// Growing boxes `K_t = [ε_t, 1 - ε_t]^{m×k×k}` with `ε_t = 2^-(t + e0)`.
///
/// Their union is the open cube `(0, 1)^{m×k×k}`. A candidate state outside
/// the current box is replaced by the reset point and the counter advances.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionFamily {
    first_exponent: i32,
    counter: u32,
    reset_point: StatTensor,
}

impl ProjectionFamily {
    /// `first_exponent` fixes `ε_0 = 2^-first_exponent`; it must be at least 2
    /// so that `K_0` is non-degenerate. The reset point must lie in `K_0`.
    pub fn new(first_exponent: i32, reset_point: StatTensor) -> Result<Self> {
        if !(2..=1000).contains(&first_exponent) {
            return Err(Error::InvalidParameter(format!(
                "box exponent must be in 2..=1000, got {first_exponent}"
            )));
        }
        let family = Self {
            first_exponent,
            counter: 0,
            reset_point,
        };
        if !family.contains_at(family.reset_point.cube(), 0) {
            return Err(Error::InvalidParameter(format!(
                "reset point is outside K_0 = [{e}, {f}]",
                e = family.epsilon(0),
                f = 1.0 - family.epsilon(0)
            )));
        }
        Ok(family)
    }

    pub fn first_exponent(&self) -> i32 {
        self.first_exponent
    }

    pub fn counter(&self) -> u32 {
        self.counter
    }

    pub fn reset_point(&self) -> &StatTensor {
        &self.reset_point
    }

    /// Box margin `ε_t`.
    pub fn epsilon(&self, t: u32) -> f64 {
        2f64.powi(-(self.first_exponent + t as i32))
    }

    fn contains_at(&self, candidate: &Cube, t: u32) -> bool {
        let lo = self.epsilon(t);
        let hi = 1.0 - lo;
        candidate
            .as_slice()
            .iter()
            .all(|&v| v >= lo && v <= hi && v > 0.0 && v < 1.0)
    }

    /// Whether `candidate` lies in the current box `K_t`.
    pub fn contains(&self, candidate: &Cube) -> bool {
        self.contains_at(candidate, self.counter)
    }

    /// Accepts `candidate` if it lies in `K_t`; otherwise returns the reset
    /// point and increments `t`. The flag reports whether a reset happened.
    pub fn project(&mut self, candidate: Cube) -> (StatTensor, bool) {
        if self.contains(&candidate) {
            (StatTensor::from_cube_unchecked(candidate), false)
        } else {
            self.counter += 1;
            (self.reset_point.clone(), true)
        }
    }
}
