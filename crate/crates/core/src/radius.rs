//! Radii in the unit disk carried together with `ε = 1 - r` and
//! `u = log(1/(1 - r))`, so that points extremely close to the boundary keep
//! their precision (including radii whose `ε` underflows).

use crate::error::{Error, Result};
use crate::real::{lit, Real};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Radius<T> {
    r: T,
    eps: T,
    u: T,
}

impl<T: Real> Radius<T> {
    /// `0 <= r < 1`.
    pub fn from_r(r: T) -> Result<Self> {
        if !(r >= T::zero() && r < T::one()) {
            return Err(Error::Domain(format!("radius {r} outside [0, 1)")));
        }
        Ok(Self {
            r,
            eps: T::one() - r,
            u: -(-r).ln_1p(),
        })
    }

    /// `0 < ε <= 1`, with `r = 1 - ε`.
    pub fn from_eps(eps: T) -> Result<Self> {
        if !(eps > T::zero() && eps <= T::one()) {
            return Err(Error::Domain(format!("boundary distance {eps} outside (0, 1]")));
        }
        Ok(Self {
            r: T::one() - eps,
            eps,
            u: -eps.ln(),
        })
    }

    /// `u = log(1/(1 - r)) >= 0`. Accepts radii whose `ε` is below the
    /// smallest representable number.
    pub fn from_u(u: T) -> Result<Self> {
        if !(u >= T::zero() && u.is_finite()) {
            return Err(Error::Domain(format!("log-distance {u} must be finite and >= 0")));
        }
        let eps = (-u).exp();
        Ok(Self {
            r: -(-u).exp_m1(),
            eps,
            u,
        })
    }

    pub fn r(&self) -> T {
        self.r
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    pub fn u(&self) -> T {
        self.u
    }

    pub fn ln_r(&self) -> T {
        if self.r < lit(0.5) {
            self.r.ln()
        } else {
            (-(-self.u).exp()).ln_1p()
        }
    }

    /// `log(r^n)` given `ln_n = log n`, stable for huge `n` and `r` near 1.
    pub fn ln_pow(&self, ln_n: T) -> T {
        let x = (-self.u).exp();
        if x < lit(1e-5) {
            // -log(1-x)/x = 1 + x/2 + x^2/3 + ...
            let series = T::one() + x * (lit::<T>(0.5) + x / lit(3.0));
            -(ln_n - self.u).exp() * series
        } else {
            ln_n.exp() * self.ln_r()
        }
    }

    /// `r^n`.
    pub fn pow(&self, n: u64) -> T {
        if n == 0 {
            return T::one();
        }
        self.ln_pow(crate::real::from_u64::<T>(n).ln()).exp()
    }
}
