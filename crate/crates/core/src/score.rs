//! Exact rational scores.
//!
//! Every score, weight and ratio in the engine is an arbitrary-precision
//! fraction kept in lowest terms, so ties are detected exactly and results do
//! not depend on evaluation order.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Sub};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An exact non-floating rational number.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Score(BigRational);

impl Score {
    pub fn zero() -> Self {
        Score(BigRational::zero())
    }

    pub fn one() -> Self {
        Score(BigRational::one())
    }

    pub fn from_integer(value: u64) -> Self {
        Score(BigRational::from_integer(BigInt::from(value)))
    }

    /// `numerator / denominator`, reduced. Panics if `denominator` is zero.
    pub fn ratio(numerator: u64, denominator: u64) -> Self {
        assert!(denominator != 0, "zero denominator");
        Score(BigRational::new(
            BigInt::from(numerator),
            BigInt::from(denominator),
        ))
    }

    /// The harmonic voter weight `1 / (1 + satisfaction)`.
    pub fn harmonic_weight(satisfaction: u32) -> Self {
        Score::ratio(1, u64::from(satisfaction) + 1)
    }

    /// Builds a score from decimal numerator/denominator strings.
    pub fn parse_parts(numerator: &str, denominator: &str) -> Option<Self> {
        let num: BigInt = numerator.parse().ok()?;
        let den: BigInt = denominator.parse().ok()?;
        if !den.is_positive() {
            return None;
        }
        Some(Score(BigRational::new(num, den)))
    }

    pub fn numerator(&self) -> &BigInt {
        self.0.numer()
    }

    /// Always positive.
    pub fn denominator(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Lossy conversion, for display only.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn as_rational(&self) -> &BigRational {
        &self.0
    }

    pub fn into_rational(self) -> BigRational {
        self.0
    }

    pub fn from_rational(value: BigRational) -> Self {
        Score(value)
    }

    /// Magnitude of the numerator as an unsigned integer.
    pub fn numerator_magnitude(&self) -> BigUint {
        self.0.numer().magnitude().clone()
    }
}

/// `n/d` in lowest terms, or just `n` for integers.
impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            return write!(f, "{}", self.0.numer());
        }
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl From<u64> for Score {
    fn from(value: u64) -> Self {
        Score::from_integer(value)
    }
}

impl Add for Score {
    type Output = Score;
    fn add(self, rhs: Score) -> Score {
        Score(self.0 + rhs.0)
    }
}

impl<'a> Add<&'a Score> for Score {
    type Output = Score;
    fn add(self, rhs: &'a Score) -> Score {
        Score(self.0 + &rhs.0)
    }
}

impl AddAssign<&Score> for Score {
    fn add_assign(&mut self, rhs: &Score) {
        self.0 += &rhs.0;
    }
}

impl AddAssign for Score {
    fn add_assign(&mut self, rhs: Score) {
        self.0 += rhs.0;
    }
}

impl Sub for Score {
    type Output = Score;
    fn sub(self, rhs: Score) -> Score {
        Score(self.0 - rhs.0)
    }
}

impl<'a> Sub<&'a Score> for &'a Score {
    type Output = Score;
    fn sub(self, rhs: &'a Score) -> Score {
        Score(&self.0 - &rhs.0)
    }
}

impl Mul for Score {
    type Output = Score;
    fn mul(self, rhs: Score) -> Score {
        Score(self.0 * rhs.0)
    }
}

impl Div for Score {
    type Output = Score;
    /// Panics on division by zero.
    fn div(self, rhs: Score) -> Score {
        Score(self.0 / rhs.0)
    }
}

impl Sum for Score {
    fn sum<I: Iterator<Item = Score>>(iter: I) -> Score {
        iter.fold(Score::zero(), |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a Score> for Score {
    fn sum<I: Iterator<Item = &'a Score>>(iter: I) -> Score {
        iter.fold(Score::zero(), |acc, x| acc + x)
    }
}

/// Wire form: `{"num": "3", "den": "2"}`. Both parts are decimal strings so
/// that arbitrarily large values survive any JSON reader.
#[derive(Serialize, Deserialize)]
struct ScoreParts {
    num: String,
    den: String,
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        ScoreParts {
            num: self.0.numer().to_string(),
            den: self.0.denom().to_string(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Score {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let parts = ScoreParts::deserialize(deserializer)?;
        Score::parse_parts(&parts.num, &parts.den)
            .ok_or_else(|| serde::de::Error::custom("invalid score fraction"))
    }
}
