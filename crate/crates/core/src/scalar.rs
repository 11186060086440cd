//! Scalar abstraction for the numeric parts of the crate.
//!
//! Simulation state (counts, party ids, rounds) is integral. Everything that is
//! genuinely real-valued — belief vectors, estimators, pmf arithmetic, parameter
//! formulas — is written against [`Real`] so it can run in `f32` for cheap
//! sweeps or `f64` for oracle-grade work.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_count(x: u64) -> Self {
        Self::from_u64(x).expect("count representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Neumaier compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum<T> {
    sum: T,
    comp: T,
}

impl<T: Real> KahanSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            comp: T::zero(),
        }
    }

    #[inline]
    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> T {
        self.sum + self.comp
    }
}

impl<T: Real> FromIterator<T> for KahanSum<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_recovers_small_terms() {
        let mut naive = 1.0f64;
        let mut acc = KahanSum::new();
        acc.add(1.0f64);
        for _ in 0..10_000 {
            naive += 1e-16;
            acc.add(1e-16);
        }
        assert_eq!(naive, 1.0);
        assert!((acc.total() - (1.0 + 1e-12)).abs() < 1e-15);
    }

    #[test]
    fn lit_roundtrips_in_both_widths() {
        assert_eq!(<f32 as Real>::lit(0.5), 0.5f32);
        assert_eq!(<f64 as Real>::from_count(7), 7.0);
    }
}
