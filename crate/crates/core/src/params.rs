use crate::error::{Error, Result};
use crate::real::Real;

/// Dimension n and fractional order s of the equation du/dt + (-Lap)^s u = 0.
///
/// Invariants: n in {1,2,3}, s in (0,1]. Construction is the only way to get
/// a value, so holders may rely on them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FracParams<T: Real> {
    n: u32,
    s: T,
}

impl<T: Real> FracParams<T> {
    pub fn new(n: u32, s: T) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(Error::BadParams(format!("dimension n={n} outside 1..=3")));
        }
        if !(s > T::zero() && s <= T::one()) || !s.is_finite() {
            return Err(Error::BadParams(format!(
                "order s={} outside (0, 1]",
                s.as_f64()
            )));
        }
        Ok(FracParams { n, s })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn s(&self) -> T {
        self.s
    }

    /// n as a scalar.
    pub fn nf(&self) -> T {
        T::of_usize(self.n as usize)
    }

    pub fn two_s(&self) -> T {
        self.s + self.s
    }

    /// 1/(2s), the similarity exponent.
    pub fn inv_2s(&self) -> T {
        (self.two_s()).recip()
    }

    /// Space scale t^{1/2s} of the kernel at time t.
    pub fn scale(&self, t: T) -> T {
        t.powf(self.inv_2s())
    }

    /// Amplitude decay t^{-n/2s} of the kernel at time t.
    pub fn amplitude(&self, t: T) -> T {
        t.powf(-self.nf() * self.inv_2s())
    }

    /// Surface area of the unit sphere in R^n (2, 2*pi, 4*pi for n=1,2,3).
    pub fn sphere_area(&self) -> T {
        let two = T::of(2.0);
        match self.n {
            1 => two,
            2 => two * T::PI(),
            _ => two * two * T::PI(),
        }
    }
}
