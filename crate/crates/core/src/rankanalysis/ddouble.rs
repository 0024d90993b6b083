use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// An unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`, giving about
/// 106 bits of significand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub const ZERO: DoubleDouble = DoubleDouble { hi: 0.0, lo: 0.0 };
    pub const ONE: DoubleDouble = DoubleDouble { hi: 1.0, lo: 0.0 };

    pub fn from_f64(x: f64) -> Self {
        DoubleDouble { hi: x, lo: 0.0 }
    }

    /// 1 / x correct to double-double precision.
    pub fn recip(x: f64) -> Self {
        let hi = 1.0 / x;
        // exact residual of the first approximation
        let r = (-x).mul_add(hi, 1.0);
        let (hi, lo) = quick_two_sum(hi, r / x);
        DoubleDouble { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    /// `1 - self`.
    pub fn one_minus(self) -> Self {
        DoubleDouble::ONE - self
    }

    pub fn powi(self, n: u32) -> Self {
        let mut acc = DoubleDouble::ONE;
        let mut base = self;
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            n >>= 1;
        }
        acc
    }
}

impl Add for DoubleDouble {
    type Output = DoubleDouble;
    fn add(self, rhs: DoubleDouble) -> DoubleDouble {
        let (s, e) = two_sum(self.hi, rhs.hi);
        let (t, f) = two_sum(self.lo, rhs.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        DoubleDouble { hi, lo }
    }
}

impl Neg for DoubleDouble {
    type Output = DoubleDouble;
    fn neg(self) -> DoubleDouble {
        DoubleDouble {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for DoubleDouble {
    type Output = DoubleDouble;
    fn sub(self, rhs: DoubleDouble) -> DoubleDouble {
        self + -rhs
    }
}

impl Mul for DoubleDouble {
    type Output = DoubleDouble;
    fn mul(self, rhs: DoubleDouble) -> DoubleDouble {
        let (p, e) = two_prod(self.hi, rhs.hi);
        let e = e + (self.hi * rhs.lo + self.lo * rhs.hi);
        let (hi, lo) = quick_two_sum(p, e);
        DoubleDouble { hi, lo }
    }
}

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi)? {
            Ordering::Equal => self.lo.partial_cmp(&other.lo),
            o => Some(o),
        }
    }
}

impl fmt::Display for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {:e}", self.hi, self.lo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn resolves_below_f64_epsilon() {
        let tiny = DoubleDouble::from_f64(2f64.powi(-80));
        let x = DoubleDouble::ONE - tiny;
        assert_eq!(x.to_f64(), 1.0);
        assert!(x < DoubleDouble::ONE);
        assert_eq!(x.one_minus(), tiny);
        assert!(DoubleDouble::ONE - x.one_minus() == x);
    }

    #[test]
    fn recip_of_three() {
        let r = DoubleDouble::recip(3.0);
        let back = r * DoubleDouble::from_f64(3.0);
        assert!((back - DoubleDouble::ONE).to_f64().abs() < 1e-31);
    }

    #[test]
    fn powers_of_two_are_exact() {
        let half = DoubleDouble::recip(2.0);
        assert_eq!(half.powi(100).to_f64(), 2f64.powi(-100));
        assert_eq!(half.powi(0), DoubleDouble::ONE);
    }

    proptest! {
        #[test]
        fn sum_and_product_are_exact_for_two_doubles(a in -1e6f64..1e6, b in -1e6f64..1e6) {
            let s = DoubleDouble::from_f64(a) + DoubleDouble::from_f64(b);
            prop_assert_eq!(two_sum(a, b), (s.hi, s.lo));
            let p = DoubleDouble::from_f64(a) * DoubleDouble::from_f64(b);
            // the error term of a product of doubles is itself a double
            prop_assert_eq!(p.hi, a * b);
            prop_assert_eq!(p.lo, a.mul_add(b, -(a * b)));
        }
    }
}
