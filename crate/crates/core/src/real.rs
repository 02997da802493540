//! Scalar abstraction shared by the double-precision and extended-precision
//! series paths.
//!
//! [`Real`] is implemented for `f64` (fast path used inside the phase search)
//! and for [`Big`], a thin wrapper over an arbitrary-precision binary float
//! whose significand size travels with the value.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::fmt;

use astro_float::{BigFloat, Consts, RoundingMode, Sign};

/// Smallest significand accepted for extended-precision work.
pub const MIN_PRECISION_BITS: u32 = 64;

/// Default significand size for certification.
pub const DEFAULT_PRECISION_BITS: u32 = 512;

const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("constant cache"));
}

/// Minimal real-number interface needed by the series engine.
pub trait Real: Clone + fmt::Debug + Send + Sync + 'static {
    /// Working significand size in bits.
    fn precision(&self) -> u32;
    fn from_f64_prec(x: f64, bits: u32) -> Self;
    fn from_ratio_prec(num: i64, den: i64, bits: u32) -> Self;
    fn pi_prec(bits: u32) -> Self;
    fn to_f64(&self) -> f64;
    /// `log2(|x|)`, `-inf` for zero.
    fn log2_abs(&self) -> f64;

    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn div(&self, rhs: &Self) -> Self;
    fn neg(&self) -> Self;
    fn abs(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn acos(&self) -> Self;
    fn is_zero(&self) -> bool;
    fn cmp_value(&self, rhs: &Self) -> Ordering;

    /// `self += a * b`
    fn add_mul(&mut self, a: &Self, b: &Self) {
        *self = self.add(&a.mul(b));
    }

    fn zero_like(&self) -> Self {
        Self::from_f64_prec(0.0, self.precision())
    }

    fn mul_f64(&self, x: f64) -> Self {
        self.mul(&Self::from_f64_prec(x, self.precision()))
    }

    fn is_negative(&self) -> bool {
        self.cmp_value(&self.zero_like()) == Ordering::Less
    }
}

impl Real for f64 {
    fn precision(&self) -> u32 {
        53
    }
    fn from_f64_prec(x: f64, _bits: u32) -> Self {
        x
    }
    fn from_ratio_prec(num: i64, den: i64, _bits: u32) -> Self {
        num as f64 / den as f64
    }
    fn pi_prec(_bits: u32) -> Self {
        std::f64::consts::PI
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn log2_abs(&self) -> f64 {
        self.abs().log2()
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn div(&self, rhs: &Self) -> Self {
        self / rhs
    }
    fn neg(&self) -> Self {
        -self
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn acos(&self) -> Self {
        f64::acos(*self)
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn cmp_value(&self, rhs: &Self) -> Ordering {
        self.partial_cmp(rhs).unwrap_or(Ordering::Equal)
    }
    fn add_mul(&mut self, a: &Self, b: &Self) {
        *self = a.mul_add(*b, *self);
    }
}

/// Extended-precision binary float.
#[derive(Clone)]
pub struct Big {
    value: BigFloat,
    bits: u32,
}

impl Big {
    pub fn new(x: f64, bits: u32) -> Self {
        Self::from_f64_prec(x, bits)
    }

    fn wrap(value: BigFloat, bits: u32) -> Self {
        Big { value, bits }
    }

    fn p(&self, rhs: &Self) -> u32 {
        self.bits.max(rhs.bits)
    }

    pub fn inner(&self) -> &BigFloat {
        &self.value
    }

    /// Decimal rendering with `digits` significant digits.
    pub fn to_decimal(&self, digits: usize) -> String {
        if self.value.is_zero() {
            return "0".to_string();
        }
        let x = self.to_f64();
        if digits <= 16 || !x.is_finite() {
            return format!("{:.*e}", digits.saturating_sub(1), x);
        }
        let s = CONSTS.with(|c| {
            self.value
                .format(astro_float::Radix::Dec, RM, &mut c.borrow_mut())
                .unwrap_or_default()
        });
        s
    }
}

impl fmt::Debug for Big {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Big({:e}, {} bits)", self.to_f64(), self.bits)
    }
}

impl fmt::Display for Big {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e}", self.to_f64())
    }
}

impl Real for Big {
    fn precision(&self) -> u32 {
        self.bits
    }
    fn from_f64_prec(x: f64, bits: u32) -> Self {
        Big::wrap(BigFloat::from_f64(x, bits as usize), bits)
    }
    fn from_ratio_prec(num: i64, den: i64, bits: u32) -> Self {
        let p = bits as usize;
        let n = BigFloat::from_i64(num, p);
        let d = BigFloat::from_i64(den, p);
        Big::wrap(n.div(&d, p, RM), bits)
    }
    fn pi_prec(bits: u32) -> Self {
        let v = CONSTS.with(|c| c.borrow_mut().pi(bits as usize, RM));
        Big::wrap(v, bits)
    }
    fn to_f64(&self) -> f64 {
        if self.value.is_zero() {
            return 0.0;
        }
        if self.value.is_nan() {
            return f64::NAN;
        }
        if self.value.is_inf_pos() {
            return f64::INFINITY;
        }
        if self.value.is_inf_neg() {
            return f64::NEG_INFINITY;
        }
        let Some((words, _, sign, exp, _)) = self.value.as_raw_parts() else {
            return f64::NAN;
        };
        // value = 0.m * 2^exp with the most significant word last
        let top = *words.last().unwrap_or(&0) as f64;
        let next = if words.len() >= 2 {
            words[words.len() - 2] as f64
        } else {
            0.0
        };
        let frac = (top + next * 2f64.powi(-64)) * 2f64.powi(-64);
        let mag = ldexp(frac, exp);
        if sign == Sign::Neg {
            -mag
        } else {
            mag
        }
    }
    fn log2_abs(&self) -> f64 {
        if self.value.is_zero() {
            return f64::NEG_INFINITY;
        }
        let Some((words, _, _, exp, _)) = self.value.as_raw_parts() else {
            return f64::NAN;
        };
        let top = *words.last().unwrap_or(&1) as f64;
        (top * 2f64.powi(-64)).log2() + exp as f64
    }
    fn add(&self, rhs: &Self) -> Self {
        let p = self.p(rhs);
        Big::wrap(self.value.add(&rhs.value, p as usize, RM), p)
    }
    fn sub(&self, rhs: &Self) -> Self {
        let p = self.p(rhs);
        Big::wrap(self.value.sub(&rhs.value, p as usize, RM), p)
    }
    fn mul(&self, rhs: &Self) -> Self {
        let p = self.p(rhs);
        Big::wrap(self.value.mul(&rhs.value, p as usize, RM), p)
    }
    fn div(&self, rhs: &Self) -> Self {
        let p = self.p(rhs);
        Big::wrap(self.value.div(&rhs.value, p as usize, RM), p)
    }
    fn neg(&self) -> Self {
        Big::wrap(self.value.neg(), self.bits)
    }
    fn abs(&self) -> Self {
        Big::wrap(self.value.abs(), self.bits)
    }
    fn sqrt(&self) -> Self {
        Big::wrap(self.value.sqrt(self.bits as usize, RM), self.bits)
    }
    fn sin(&self) -> Self {
        let v = CONSTS.with(|c| self.value.sin(self.bits as usize, RM, &mut c.borrow_mut()));
        Big::wrap(v, self.bits)
    }
    fn cos(&self) -> Self {
        let v = CONSTS.with(|c| self.value.cos(self.bits as usize, RM, &mut c.borrow_mut()));
        Big::wrap(v, self.bits)
    }
    fn acos(&self) -> Self {
        let v = CONSTS.with(|c| self.value.acos(self.bits as usize, RM, &mut c.borrow_mut()));
        Big::wrap(v, self.bits)
    }
    fn is_zero(&self) -> bool {
        self.value.is_zero()
    }
    fn cmp_value(&self, rhs: &Self) -> Ordering {
        match self.value.cmp(&rhs.value) {
            Some(x) if x < 0 => Ordering::Less,
            Some(x) if x > 0 => Ordering::Greater,
            _ => Ordering::Equal,
        }
    }
}

fn ldexp(x: f64, e: i32) -> f64 {
    // split the scaling so intermediate powers stay representable
    if e > 1000 {
        ldexp(x * 2f64.powi(1000), e - 1000)
    } else if e < -1000 {
        ldexp(x * 2f64.powi(-1000), e + 1000)
    } else {
        x * 2f64.powi(e)
    }
}
