//! Exact point arithmetic on a half-point grid.

use std::fmt;
use std::ops::{Add, AddAssign, Sub};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// A score stored as an integer number of half points.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Points(i64);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PointsError {
    #[error("{0} is not a multiple of 0.5")]
    NotHalfPoint(f64),
    #[error("points must be finite")]
    NotFinite,
    #[error("invalid number {0:?}")]
    Parse(String),
}

impl Points {
    pub const ZERO: Points = Points(0);

    pub const fn from_half_points(half: i64) -> Self {
        Points(half)
    }

    pub const fn whole(points: i64) -> Self {
        Points(points * 2)
    }

    pub const fn half_points(self) -> i64 {
        self.0
    }

    pub fn from_f64(value: f64) -> Result<Self, PointsError> {
        if !value.is_finite() {
            return Err(PointsError::NotFinite);
        }
        let doubled = value * 2.0;
        if doubled.fract() != 0.0 || doubled.abs() > (i64::MAX / 4) as f64 {
            return Err(PointsError::NotHalfPoint(value));
        }
        Ok(Points(doubled as i64))
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn clamp_to(self, max: Points) -> Points {
        Points(self.0.clamp(0, max.0.max(0)))
    }
}

impl fmt::Display for Points {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        if abs % 2 == 0 {
            write!(f, "{sign}{}", abs / 2)
        } else {
            write!(f, "{sign}{}.5", abs / 2)
        }
    }
}

impl FromStr for Points {
    type Err = PointsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let value: f64 = s.trim().parse().map_err(|_| PointsError::Parse(s.to_string()))?;
        Points::from_f64(value)
    }
}

impl Add for Points {
    type Output = Points;
    fn add(self, rhs: Points) -> Points {
        Points(self.0 + rhs.0)
    }
}

impl AddAssign for Points {
    fn add_assign(&mut self, rhs: Points) {
        self.0 += rhs.0;
    }
}

impl Sub for Points {
    type Output = Points;
    fn sub(self, rhs: Points) -> Points {
        Points(self.0 - rhs.0)
    }
}

impl std::iter::Sum for Points {
    fn sum<I: Iterator<Item = Points>>(iter: I) -> Self {
        iter.fold(Points::ZERO, Add::add)
    }
}

impl Serialize for Points {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.0 % 2 == 0 {
            serializer.serialize_i64(self.0 / 2)
        } else {
            serializer.serialize_f64(self.as_f64())
        }
    }
}

impl<'de> Deserialize<'de> for Points {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = f64::deserialize(deserializer)?;
        Points::from_f64(value).map_err(serde::de::Error::custom)
    }
}
