//! Double-double arithmetic: an unevaluated sum `hi + lo` of two `f64`s
//! giving roughly 106 significant bits.
//!
//! Used as a reference scalar for finite-difference checks, where `f64`
//! round-off in `L(θ+ε) − L(θ−ε)` would otherwise dominate. `+ − × ÷`,
//! `sqrt`, `exp`, `ln`, `tanh`, `sinh`, `cosh`, `powi` are accurate to a few
//! units in 2⁻¹⁰⁴; trigonometric and other rarely needed functions fall back
//! to `f64` precision.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::num::{FpCategory, ParseFloatError};
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, RemAssign, Sub, SubAssign};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, Num, NumCast, One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::Scalar;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

const LN2: DoubleDouble = DoubleDouble {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub const fn from_f64(v: f64) -> Self {
        Self { hi: v, lo: 0.0 }
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn lo(self) -> f64 {
        self.lo
    }

    fn renorm(hi: f64, lo: f64) -> Self {
        if !hi.is_finite() {
            return Self { hi, lo: 0.0 };
        }
        let (hi, lo) = quick_two_sum(hi, lo);
        Self { hi, lo }
    }

    /// Exact multiplication by `2^k`.
    fn ldexp(self, k: i32) -> Self {
        // split so that neither factor overflows on its own
        let half = k / 2;
        let a = 2f64.powi(half);
        let b = 2f64.powi(k - half);
        Self {
            hi: self.hi * a * b,
            lo: self.lo * a * b,
        }
    }

    fn exp_dd(self) -> Self {
        if self.hi.is_nan() {
            return self;
        }
        if self.hi > 709.79 {
            return Self::from_f64(f64::INFINITY);
        }
        if self.hi < -745.2 {
            return Self::zero();
        }
        if self.is_zero() {
            return Self::one();
        }
        let k = (self.hi / LN2.hi).round();
        let r = (self - LN2 * Self::from_f64(k)).ldexp(-9);
        // expm1(r) by Taylor series; |r| < 7e-4 so 12 terms are plenty
        let mut s = r;
        let mut term = r;
        for n in 2..=14 {
            term = term * r / Self::from_f64(n as f64);
            s += term;
            if term.hi.abs() < 1e-36 {
                break;
            }
        }
        // (1 + s)^(2^9) via s ← 2s + s²
        for _ in 0..9 {
            s = s.ldexp(1) + s * s;
        }
        (s + Self::one()).ldexp(k as i32)
    }

    fn ln_dd(self) -> Self {
        if self.hi.is_nan() || self.hi < 0.0 {
            return Self::nan();
        }
        if self.hi == 0.0 {
            return Self::from_f64(f64::NEG_INFINITY);
        }
        if self.hi.is_infinite() {
            return self;
        }
        // one Newton step on exp(x) = a doubles the f64 estimate's precision
        let x = Self::from_f64(self.hi.ln());
        x + self * (-x).exp_dd() - Self::one()
    }
}

impl From<f64> for DoubleDouble {
    fn from(v: f64) -> Self {
        Self::from_f64(v)
    }
}

impl Add for DoubleDouble {
    type Output = Self;

    fn add(self, b: Self) -> Self {
        let (s, e) = two_sum(self.hi, b.hi);
        if !s.is_finite() {
            return Self { hi: s, lo: 0.0 };
        }
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        Self::renorm(s, e + f)
    }
}

impl Neg for DoubleDouble {
    type Output = Self;

    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;

    fn sub(self, b: Self) -> Self {
        self + (-b)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;

    fn mul(self, b: Self) -> Self {
        let (p, e) = two_prod(self.hi, b.hi);
        if !p.is_finite() {
            return Self { hi: p, lo: 0.0 };
        }
        Self::renorm(p, e + (self.hi * b.lo + self.lo * b.hi))
    }
}

impl Div for DoubleDouble {
    type Output = Self;

    fn div(self, b: Self) -> Self {
        let q1 = self.hi / b.hi;
        if !q1.is_finite() || q1 == 0.0 && self.hi == 0.0 {
            return Self { hi: q1, lo: 0.0 };
        }
        let r = self - b * Self::from_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b * Self::from_f64(q2);
        let q3 = r.hi / b.hi;
        let (q1, q2) = quick_two_sum(q1, q2);
        Self { hi: q1, lo: q2 } + Self::from_f64(q3)
    }
}

impl Rem for DoubleDouble {
    type Output = Self;

    fn rem(self, b: Self) -> Self {
        self - (self / b).trunc() * b
    }
}

macro_rules! assign_ops {
    ($($tr:ident $m:ident $op:tt),*) => {$(
        impl $tr for DoubleDouble {
            fn $m(&mut self, b: Self) {
                *self = *self $op b;
            }
        }
    )*};
}
assign_ops!(AddAssign add_assign +, SubAssign sub_assign -, MulAssign mul_assign *, DivAssign div_assign /, RemAssign rem_assign %);

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi)? {
            Ordering::Equal => self.lo.partial_cmp(&other.lo),
            o => Some(o),
        }
    }
}

impl Zero for DoubleDouble {
    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn is_zero(&self) -> bool {
        self.hi == 0.0
    }
}

impl One for DoubleDouble {
    fn one() -> Self {
        Self::from_f64(1.0)
    }
}

impl Num for DoubleDouble {
    type FromStrRadixErr = <f64 as Num>::FromStrRadixErr;

    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        f64::from_str_radix(s, radix).map(Self::from_f64)
    }
}

impl ToPrimitive for DoubleDouble {
    fn to_i64(&self) -> Option<i64> {
        self.trunc().hi.to_i64()
    }

    fn to_u64(&self) -> Option<u64> {
        self.trunc().hi.to_u64()
    }

    fn to_f64(&self) -> Option<f64> {
        Some(self.hi + self.lo)
    }
}

impl FromPrimitive for DoubleDouble {
    fn from_i64(n: i64) -> Option<Self> {
        let hi = n as f64;
        let lo = (n as i128 - hi as i128) as f64;
        Some(Self::renorm(hi, lo))
    }

    fn from_u64(n: u64) -> Option<Self> {
        let hi = n as f64;
        let lo = (n as i128 - hi as i128) as f64;
        Some(Self::renorm(hi, lo))
    }

    fn from_f64(v: f64) -> Option<Self> {
        Some(Self::from_f64(v))
    }
}

impl NumCast for DoubleDouble {
    fn from<N: ToPrimitive>(n: N) -> Option<Self> {
        n.to_f64().map(Self::from_f64)
    }
}

impl Sum for DoubleDouble {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::zero(), |a, b| a + b)
    }
}

/// Displays the value rounded to `f64`.
impl fmt::Display for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&(self.hi + self.lo), f)
    }
}

/// Parses at `f64` precision.
impl FromStr for DoubleDouble {
    type Err = ParseFloatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(Self::from_f64)
    }
}

/// Applies an `f64` function to the leading component.
fn via_f64(x: DoubleDouble, f: impl Fn(f64) -> f64) -> DoubleDouble {
    DoubleDouble::from_f64(f(x.hi + x.lo))
}

impl Float for DoubleDouble {
    fn nan() -> Self {
        Self::from_f64(f64::NAN)
    }
    fn infinity() -> Self {
        Self::from_f64(f64::INFINITY)
    }
    fn neg_infinity() -> Self {
        Self::from_f64(f64::NEG_INFINITY)
    }
    fn neg_zero() -> Self {
        Self::from_f64(-0.0)
    }
    fn min_value() -> Self {
        Self::from_f64(f64::MIN)
    }
    fn min_positive_value() -> Self {
        Self::from_f64(f64::MIN_POSITIVE)
    }
    fn epsilon() -> Self {
        Self::from_f64(2f64.powi(-104))
    }
    fn max_value() -> Self {
        Self::from_f64(f64::MAX)
    }
    fn is_nan(self) -> bool {
        self.hi.is_nan()
    }
    fn is_infinite(self) -> bool {
        self.hi.is_infinite()
    }
    fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }
    fn is_normal(self) -> bool {
        self.hi.is_normal()
    }
    fn classify(self) -> FpCategory {
        self.hi.classify()
    }
    fn floor(self) -> Self {
        let h = self.hi.floor();
        if h == self.hi {
            Self::renorm(h, self.lo.floor())
        } else {
            Self::from_f64(h)
        }
    }
    fn ceil(self) -> Self {
        -(-self).floor()
    }
    fn round(self) -> Self {
        if self.hi < 0.0 {
            -(-self).round()
        } else {
            (self + Self::from_f64(0.5)).floor()
        }
    }
    fn trunc(self) -> Self {
        if self.hi < 0.0 {
            self.ceil()
        } else {
            self.floor()
        }
    }
    fn fract(self) -> Self {
        self - self.trunc()
    }
    fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }
    fn signum(self) -> Self {
        Self::from_f64(self.hi.signum())
    }
    fn is_sign_positive(self) -> bool {
        self.hi.is_sign_positive()
    }
    fn is_sign_negative(self) -> bool {
        self.hi.is_sign_negative()
    }
    fn mul_add(self, a: Self, b: Self) -> Self {
        self * a + b
    }
    fn recip(self) -> Self {
        Self::one() / self
    }
    fn powi(self, n: i32) -> Self {
        let mut base = self;
        let mut k = n.unsigned_abs();
        let mut acc = Self::one();
        while k > 0 {
            if k & 1 == 1 {
                acc *= base;
            }
            base *= base;
            k >>= 1;
        }
        if n < 0 {
            acc.recip()
        } else {
            acc
        }
    }
    fn powf(self, n: Self) -> Self {
        if n.fract().is_zero() && n.abs().hi < i32::MAX as f64 {
            return self.powi(n.hi as i32);
        }
        (n * self.ln()).exp()
    }
    fn sqrt(self) -> Self {
        if self.hi <= 0.0 || !self.hi.is_finite() {
            return Self::from_f64(self.hi.sqrt());
        }
        let q = Self::from_f64(self.hi.sqrt());
        q + (self - q * q) / q.ldexp(1)
    }
    fn exp(self) -> Self {
        self.exp_dd()
    }
    fn exp2(self) -> Self {
        (self * LN2).exp()
    }
    fn ln(self) -> Self {
        self.ln_dd()
    }
    fn log(self, base: Self) -> Self {
        self.ln() / base.ln()
    }
    fn log2(self) -> Self {
        self.ln() / LN2
    }
    fn log10(self) -> Self {
        self.ln() / Self::from_f64(10.0).ln()
    }
    fn max(self, other: Self) -> Self {
        if self.is_nan() || other > self {
            other
        } else {
            self
        }
    }
    fn min(self, other: Self) -> Self {
        if self.is_nan() || other < self {
            other
        } else {
            self
        }
    }
    fn abs_sub(self, other: Self) -> Self {
        (self - other).max(Self::zero())
    }
    fn cbrt(self) -> Self {
        via_f64(self, f64::cbrt)
    }
    fn hypot(self, other: Self) -> Self {
        (self * self + other * other).sqrt()
    }
    fn sin(self) -> Self {
        via_f64(self, f64::sin)
    }
    fn cos(self) -> Self {
        via_f64(self, f64::cos)
    }
    fn tan(self) -> Self {
        via_f64(self, f64::tan)
    }
    fn asin(self) -> Self {
        via_f64(self, f64::asin)
    }
    fn acos(self) -> Self {
        via_f64(self, f64::acos)
    }
    fn atan(self) -> Self {
        via_f64(self, f64::atan)
    }
    fn atan2(self, other: Self) -> Self {
        Self::from_f64((self.hi + self.lo).atan2(other.hi + other.lo))
    }
    fn sin_cos(self) -> (Self, Self) {
        (self.sin(), self.cos())
    }
    fn exp_m1(self) -> Self {
        self.exp() - Self::one()
    }
    fn ln_1p(self) -> Self {
        (self + Self::one()).ln()
    }
    fn sinh(self) -> Self {
        let e = self.exp();
        (e - e.recip()).ldexp(-1)
    }
    fn cosh(self) -> Self {
        let e = self.exp();
        (e + e.recip()).ldexp(-1)
    }
    fn tanh(self) -> Self {
        if self.hi.is_nan() {
            return self;
        }
        if self.hi.abs() > 40.0 {
            return Self::from_f64(self.hi.signum());
        }
        let e = self.ldexp(1).exp();
        (e - Self::one()) / (e + Self::one())
    }
    fn asinh(self) -> Self {
        via_f64(self, f64::asinh)
    }
    fn acosh(self) -> Self {
        via_f64(self, f64::acosh)
    }
    fn atanh(self) -> Self {
        via_f64(self, f64::atanh)
    }
    fn integer_decode(self) -> (u64, i16, i8) {
        self.hi.integer_decode()
    }
}

impl Scalar for DoubleDouble {}

#[cfg(test)]
mod tests {
    use super::*;

    type D = DoubleDouble;

    fn close(a: D, hi: f64, lo: f64, tol: f64) {
        let err = (a - D { hi, lo }).abs().hi;
        assert!(err <= tol * hi.abs().max(1.0), "{a:?} vs {hi} + {lo}: {err:e}");
    }

    #[test]
    fn arithmetic_keeps_low_bits() {
        let a = D::from_f64(1.0) + D::from_f64(1e-20);
        assert_eq!(a.hi(), 1.0);
        assert_eq!(a.lo(), 1e-20);
        assert_eq!((a - D::from_f64(1.0)).hi(), 1e-20);
        let third = D::from_f64(1.0) / D::from_f64(3.0);
        close(third * D::from_f64(3.0), 1.0, 0.0, 1e-31);
        let x = D::from_f64(2.0).sqrt();
        close(x * x, 2.0, 0.0, 1e-31);
    }

    #[test]
    fn transcendental_reference_values() {
        // e and ln 2 to double-double precision
        close(D::one().exp(), std::f64::consts::E, 1.445_646_891_729_250_2e-16, 1e-30);
        close(D::from_f64(2.0).ln(), LN2.hi, LN2.lo, 1e-30);
        // exp(ln(x)) and ln(exp(x)) round-trip
        for x in [1e-8, 0.3, 1.0, 7.5, 123.456, 650.0] {
            let d = D::from_f64(x);
            close(d.ln().exp(), x, 0.0, 1e-29);
            close(d.exp().ln(), x, 0.0, 1e-29);
            close((-d).exp() * d.exp(), 1.0, 0.0, 1e-29);
        }
        // tanh(0.5), split into f64 parts with an arbitrary-precision reference
        close(D::from_f64(0.5).tanh(), 0.462_117_157_260_009_74, 2.191_660_323_826_092_8e-17, 1e-29);
    }

    #[test]
    fn agrees_with_f64_to_f64_precision() {
        for x in [-30.0, -3.0, -0.1, 0.0, 0.25, 2.0, 15.0] {
            let d = D::from_f64(x);
            assert!((d.exp().hi() - x.exp()).abs() <= 2e-16 * x.exp());
            assert!((d.tanh().hi() - x.tanh()).abs() <= 2e-16);
            if x > 0.0 {
                assert!((d.ln().hi() - x.ln()).abs() <= 2e-16 * x.ln().abs().max(1e-300));
            }
        }
    }

    #[test]
    fn edge_cases() {
        assert_eq!(D::from_f64(1000.0).exp().hi(), f64::INFINITY);
        assert_eq!(D::from_f64(-1000.0).exp().hi(), 0.0);
        assert!(D::from_f64(-1.0).ln().is_nan());
        assert_eq!(D::from_f64(0.0).ln().hi(), f64::NEG_INFINITY);
        assert_eq!(D::from_f64(100.0).tanh().hi(), 1.0);
        assert!(D::nan().max(D::one()) == D::one());
        assert_eq!(D::from_f64(2.5).floor().hi(), 2.0);
        assert_eq!(D::from_f64(-2.5).trunc().hi(), -2.0);
        assert_eq!(D::from_f64(3.0).powi(-2), D::one() / D::from_f64(9.0));
        assert_eq!(<D as Scalar>::lit(0.1).as_f64(), 0.1);
        assert!(D::from_f64(1.0) < D::from_f64(1.0) + D::from_f64(1e-30));
    }
}
