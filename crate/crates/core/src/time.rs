//! Integer microsecond time.
//!
//! Every duration and instant in the crate is a whole number of microseconds.
//! Scenario files and the rule language write times in milliseconds with at
//! most three decimal places, which maps onto microseconds exactly, so the
//! response-time fixed point and the scheduler never round.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Sub};

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A duration or an instant on the simulation clock, in microseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Micros(pub u64);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TimeError {
    #[error("time value `{0}` is negative")]
    Negative(String),
    #[error("time value `{0}` has more than three decimal places of milliseconds")]
    TooPrecise(String),
    #[error("`{0}` is not a time value")]
    Malformed(String),
}

impl Micros {
    pub const ZERO: Micros = Micros(0);

    pub const fn from_us(us: u64) -> Self {
        Micros(us)
    }

    pub const fn from_ms(ms: u64) -> Self {
        Micros(ms * 1000)
    }

    pub const fn as_us(self) -> u64 {
        self.0
    }

    pub fn as_ms_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    /// Converts a millisecond value with up to three decimals.
    pub fn from_ms_f64(ms: f64) -> Result<Self, TimeError> {
        if !ms.is_finite() {
            return Err(TimeError::Malformed(ms.to_string()));
        }
        if ms < 0.0 {
            return Err(TimeError::Negative(ms.to_string()));
        }
        let us = ms * 1000.0;
        let rounded = us.round();
        if (us - rounded).abs() > 1e-6 * us.abs().max(1.0) {
            return Err(TimeError::TooPrecise(ms.to_string()));
        }
        Ok(Micros(rounded as u64))
    }

    /// Parses a decimal millisecond literal such as `"43.47"` exactly.
    pub fn parse_ms(text: &str) -> Result<Self, TimeError> {
        let t = text.trim();
        if t.starts_with('-') {
            return Err(TimeError::Negative(t.to_string()));
        }
        let (int_part, frac_part) = match t.split_once('.') {
            Some((i, f)) => (i, f),
            None => (t, ""),
        };
        let digits = |s: &str| s.chars().all(|c| c.is_ascii_digit());
        if int_part.is_empty() && frac_part.is_empty() || !digits(int_part) || !digits(frac_part)
        {
            return Err(TimeError::Malformed(t.to_string()));
        }
        if frac_part.trim_end_matches('0').len() > 3 {
            return Err(TimeError::TooPrecise(t.to_string()));
        }
        let whole: u64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| TimeError::Malformed(t.to_string()))?
        };
        let mut frac = 0u64;
        for (i, c) in frac_part.chars().take(3).enumerate() {
            frac += u64::from(c as u8 - b'0') * 10u64.pow(2 - i as u32);
        }
        whole
            .checked_mul(1000)
            .and_then(|w| w.checked_add(frac))
            .map(Micros)
            .ok_or_else(|| TimeError::Malformed(t.to_string()))
    }

    pub fn saturating_sub(self, other: Micros) -> Micros {
        Micros(self.0.saturating_sub(other.0))
    }

    /// `ceil(self / other)`; `other` must be non-zero.
    pub fn div_ceil(self, other: Micros) -> u64 {
        self.0.div_ceil(other.0)
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl Add for Micros {
    type Output = Micros;
    fn add(self, rhs: Micros) -> Micros {
        Micros(self.0 + rhs.0)
    }
}

impl AddAssign for Micros {
    fn add_assign(&mut self, rhs: Micros) {
        self.0 += rhs.0;
    }
}

impl Sub for Micros {
    type Output = Micros;
    fn sub(self, rhs: Micros) -> Micros {
        Micros(self.0 - rhs.0)
    }
}

impl Mul<u64> for Micros {
    type Output = Micros;
    fn mul(self, rhs: u64) -> Micros {
        Micros(self.0 * rhs)
    }
}

impl Sum for Micros {
    fn sum<I: Iterator<Item = Micros>>(iter: I) -> Micros {
        iter.fold(Micros::ZERO, Add::add)
    }
}

/// Formats as milliseconds without trailing zeros: `1000us` is `1`, `1500us` is `1.5`.
impl fmt::Display for Micros {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let whole = self.0 / 1000;
        let frac = self.0 % 1000;
        if frac == 0 {
            write!(f, "{whole}")
        } else {
            let s = format!("{frac:03}");
            write!(f, "{whole}.{}", s.trim_end_matches('0'))
        }
    }
}

/// Serialized as a millisecond number; deserialized from an integer, float or
/// decimal string of milliseconds.
impl Serialize for Micros {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_multiple_of(1000) {
            s.serialize_u64(self.0 / 1000)
        } else {
            s.serialize_f64(self.as_ms_f64())
        }
    }
}

impl<'de> Deserialize<'de> for Micros {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct MsVisitor;
        impl Visitor<'_> for MsVisitor {
            type Value = Micros;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a non-negative number of milliseconds")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Micros, E> {
                v.checked_mul(1000)
                    .map(Micros)
                    .ok_or_else(|| E::custom("time value overflows"))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Micros, E> {
                if v < 0 {
                    return Err(E::custom(TimeError::Negative(v.to_string())));
                }
                self.visit_u64(v as u64)
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Micros, E> {
                Micros::from_ms_f64(v).map_err(E::custom)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Micros, E> {
                Micros::parse_ms(v).map_err(E::custom)
            }
        }
        d.deserialize_any(MsVisitor)
    }
}

pub fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Least common multiple of the given periods, `None` on overflow or empty input.
pub fn hyperperiod<I: IntoIterator<Item = Micros>>(periods: I) -> Option<Micros> {
    let mut acc: Option<u64> = None;
    for p in periods {
        let p = p.0;
        if p == 0 {
            return None;
        }
        acc = Some(match acc {
            None => p,
            Some(a) => (a / gcd(a, p)).checked_mul(p)?,
        });
    }
    acc.map(Micros)
}
