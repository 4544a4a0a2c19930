//! Distance semantics for selection.
//!
//! Every distance accumulates in `f64`, strictly in ascending feature index,
//! with no reassociation, so results are bit-reproducible and exactly
//! symmetric.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// `Σ (a_i - b_i)^2`. Orders points identically to [`Metric::L2`].
    #[default]
    #[serde(rename = "sqeuclidean")]
    SquaredL2,
    #[serde(rename = "euclidean")]
    L2,
    /// `1 - a·b / (‖a‖ ‖b‖)`, clamped to `[0, 2]`.
    Cosine,
}

impl Metric {
    pub const NAMES: [&'static str; 3] = ["sqeuclidean", "euclidean", "cosine"];

    pub fn name(self) -> &'static str {
        match self {
            Metric::SquaredL2 => "sqeuclidean",
            Metric::L2 => "euclidean",
            Metric::Cosine => "cosine",
        }
    }

    /// Distance without dimension or zero-vector checks. Callers validate once
    /// per matrix and then use this in hot loops.
    #[inline]
    pub fn eval_unchecked<T: Scalar>(self, a: &[T], b: &[T]) -> f64 {
        match self {
            Metric::SquaredL2 => squared_l2(a, b),
            Metric::L2 => squared_l2(a, b).sqrt(),
            Metric::Cosine => {
                let mut dot = 0.0f64;
                let mut aa = 0.0f64;
                let mut bb = 0.0f64;
                for (x, y) in a.iter().zip(b) {
                    let (x, y) = (x.widen(), y.widen());
                    dot += x * y;
                    aa += x * x;
                    bb += y * y;
                }
                // sqrt(aa * bb) is exactly aa when a == b, so self-distance is 0.
                let sim = dot / (aa * bb).sqrt();
                (1.0 - sim).clamp(0.0, 2.0)
            }
        }
    }

    /// Validated distance between two vectors.
    pub fn distance<T: Scalar>(self, a: &[T], b: &[T]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                found: b.len(),
            });
        }
        if self == Metric::Cosine {
            if is_zero(a) {
                return Err(Error::ZeroVector(0));
            }
            if is_zero(b) {
                return Err(Error::ZeroVector(1));
            }
        }
        Ok(self.eval_unchecked(a, b))
    }

    /// Checks that every row of a matrix is admissible for this metric.
    pub fn validate_rows<'a, T: Scalar>(self, rows: impl Iterator<Item = &'a [T]>) -> Result<()> {
        if self == Metric::Cosine {
            for (i, r) in rows.enumerate() {
                if is_zero(r) {
                    return Err(Error::ZeroVector(i));
                }
            }
        }
        Ok(())
    }
}

#[inline]
fn squared_l2<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        // (x - y)^2 == (y - x)^2 bitwise, which makes the metric symmetric.
        let diff = x.widen() - y.widen();
        acc += diff * diff;
    }
    acc
}

fn is_zero<T: Scalar>(v: &[T]) -> bool {
    v.iter().all(|x| x.is_zero())
}

/// Free-function form of [`Metric::distance`].
pub fn distance<T: Scalar>(a: &[T], b: &[T], metric: Metric) -> Result<f64> {
    metric.distance(a, b)
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqeuclidean" => Ok(Metric::SquaredL2),
            "euclidean" => Ok(Metric::L2),
            "cosine" => Ok(Metric::Cosine),
            other => Err(Error::InvalidConfig(format!(
                "unknown metric {other:?}; expected one of {}",
                Metric::NAMES.join(", ")
            ))),
        }
    }
}
