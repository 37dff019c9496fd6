use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, NumAssign};

/// Scalar type the numerical core is generic over.
pub trait Real:
    Float + FloatConst + NumAssign + Debug + Display + Default + Sum + Send + Sync + 'static
{
}

impl<T> Real for T where
    T: Float + FloatConst + NumAssign + Debug + Display + Default + Sum + Send + Sync + 'static
{
}

/// Converts an `f64` constant into `T`.
#[inline]
pub(crate) fn lit<T: Real>(x: f64) -> T {
    T::from(x).expect("constant representable in scalar type")
}

/// Converts an integer into `T` (rounding for types narrower than the integer).
#[inline]
pub(crate) fn from_u64<T: Real>(n: u64) -> T {
    T::from(n).expect("integer representable in scalar type")
}

#[inline]
pub(crate) fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct KahanSum<T> {
    sum: T,
    comp: T,
}

impl<T: Real> KahanSum<T> {
    pub(crate) fn new() -> Self {
        Self {
            sum: T::zero(),
            comp: T::zero(),
        }
    }

    pub(crate) fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> T {
        self.sum + self.comp
    }
}
