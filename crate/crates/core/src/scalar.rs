//! Storage scalar abstraction.
//!
//! Embeddings and model parameters are stored as a [`Scalar`] (`f32` by
//! default, `f64` where extra headroom is wanted, e.g. gradient checking).
//! All reductions (dot products, distances, activations) accumulate in `f64`
//! regardless of the storage type.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point storage type: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Widen to the accumulation type.
    fn widen(self) -> f64;
    /// Narrow an accumulated value back to storage (round to nearest).
    fn narrow(v: f64) -> Self;
}

impl Scalar for f32 {
    #[inline]
    fn widen(self) -> f64 {
        self as f64
    }
    #[inline]
    fn narrow(v: f64) -> Self {
        v as f32
    }
}

impl Scalar for f64 {
    #[inline]
    fn widen(self) -> f64 {
        self
    }
    #[inline]
    fn narrow(v: f64) -> Self {
        v
    }
}
