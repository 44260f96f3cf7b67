//! Brute-force reference computations in exact arithmetic.
//!
//! Every `f64` is a dyadic rational `mantissa · 2^exponent`, so products and
//! sums of confusion entries are computed without rounding. These routines
//! share no code with the log-domain implementation they check.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::model::{ConfusionTensor, LabelSet, Vote};

pub const MAX_POSTERIOR_VOTES: usize = 12;
pub const MAX_ASSIGNMENTS: usize = 6561;

/// Exact `mantissa · 2^exponent`.
#[derive(Clone, Debug, PartialEq)]
struct Dyadic {
    mantissa: BigInt,
    exponent: i64,
}

impl Dyadic {
    fn one() -> Self {
        Self {
            mantissa: BigInt::one(),
            exponent: 0,
        }
    }

    fn zero() -> Self {
        Self {
            mantissa: BigInt::zero(),
            exponent: 0,
        }
    }

    fn from_f64(x: f64) -> Self {
        assert!(x.is_finite() && x >= 0.0, "expected a finite non-negative value");
        if x == 0.0 {
            return Self::zero();
        }
        let bits = x.to_bits();
        let raw_exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mantissa, exponent) = if raw_exp == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), raw_exp - 1075)
        };
        Self {
            mantissa: BigInt::from(mantissa),
            exponent,
        }
    }

    fn mul(&self, other: &Dyadic) -> Dyadic {
        Dyadic {
            mantissa: &self.mantissa * &other.mantissa,
            exponent: self.exponent + other.exponent,
        }
    }

    fn add(&self, other: &Dyadic) -> Dyadic {
        if self.mantissa.is_zero() {
            return other.clone();
        }
        if other.mantissa.is_zero() {
            return self.clone();
        }
        let exponent = self.exponent.min(other.exponent);
        let a = &self.mantissa << (self.exponent - exponent) as usize;
        let b = &other.mantissa << (other.exponent - exponent) as usize;
        Dyadic {
            mantissa: a + b,
            exponent,
        }
    }

    fn to_rational(&self) -> BigRational {
        let two = BigInt::from(2);
        if self.exponent >= 0 {
            BigRational::from_integer(&self.mantissa * num_traits::pow(two, self.exponent as usize))
        } else {
            BigRational::new(
                self.mantissa.clone(),
                num_traits::pow(two, (-self.exponent) as usize),
            )
        }
    }

    /// Natural log, accurate to a few ulps.
    fn ln(&self) -> f64 {
        assert!(!self.mantissa.is_zero());
        let bits = self.mantissa.bits() as i64;
        let shift = (bits - 60).max(0);
        let top = (&self.mantissa >> shift as usize).to_f64().unwrap();
        // scale into [0.5, 1) so the two terms do not cancel
        let top_bits = bits.min(60);
        let fraction = top * 2f64.powi(-(top_bits as i32));
        fraction.ln() + (top_bits + shift + self.exponent) as f64 * std::f64::consts::LN_2
    }
}

/// Exact class products `Π_votes c(i, l, g)` for every class `l`.
fn class_products(confusion: &ConfusionTensor, votes: &[Vote]) -> Vec<Dyadic> {
    (0..confusion.classes())
        .map(|l| {
            votes.iter().fold(Dyadic::one(), |acc, v| {
                acc.mul(&Dyadic::from_f64(confusion.get(v.worker, l, v.class)))
            })
        })
        .collect()
}

/// Exact posterior ratios for one item.
pub fn brute_posterior_exact(confusion: &ConfusionTensor, votes: &[Vote]) -> Result<Vec<BigRational>> {
    if votes.len() > MAX_POSTERIOR_VOTES {
        return Err(Error::InvalidParameter(format!(
            "brute-force posterior limited to {MAX_POSTERIOR_VOTES} votes, got {}",
            votes.len()
        )));
    }
    let products = class_products(confusion, votes);
    let total = products.iter().fold(Dyadic::zero(), |acc, p| acc.add(p)).to_rational();
    Ok(products.iter().map(|p| p.to_rational() / &total).collect())
}

/// Posterior for one item from the linear-domain product formula, rounded
/// once at the end.
pub fn brute_posterior(confusion: &ConfusionTensor, votes: &[Vote]) -> Result<Vec<f64>> {
    Ok(brute_posterior_exact(confusion, votes)?
        .iter()
        .map(|r| r.to_f64().expect("probability fits in f64"))
        .collect())
}

/// `log Σ_{y ∈ [k]^n} Π_j Π_i c(i, y_j, z_ij)` by literal enumeration.
pub fn brute_marginal(confusion: &ConfusionTensor, labels: &LabelSet) -> Result<f64> {
    let (n, k) = (labels.num_items(), labels.num_classes());
    let assignments = (k as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if assignments > MAX_ASSIGNMENTS as u128 {
        return Err(Error::InvalidParameter(format!(
            "enumeration of {k}^{n} assignments exceeds {MAX_ASSIGNMENTS}"
        )));
    }
    let mut y = vec![0usize; n];
    let mut total = Dyadic::zero();
    loop {
        let mut term = Dyadic::one();
        for o in labels.observations() {
            term = term.mul(&Dyadic::from_f64(confusion.get(o.worker, y[o.item], o.class)));
        }
        total = total.add(&term);

        // odometer over [k]^n
        let mut pos = 0;
        loop {
            if pos == n {
                return Ok(total.ln());
            }
            y[pos] += 1;
            if y[pos] < k {
                break;
            }
            y[pos] = 0;
            pos += 1;
        }
    }
}
