//! Angles that can be re-evaluated at any working precision.
//!
//! Family phases are integer combinations of a few transcendental constants
//! such as `arccos(-1/4)`. Rounding them to `f64` once would leave residues of
//! order 1e-16 in coefficients that must cancel exactly, so an [`Angle`] keeps
//! the symbolic part (rational multiples of `pi` and of `arccos(r)` for
//! rational `r`) separate from an unstructured `f64` remainder.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_rational::Rational64;

use crate::real::Real;

#[derive(Clone, PartialEq, Default)]
pub struct Angle {
    pi: Rational64,
    /// `(argument, coefficient)` pairs, sorted by argument, coefficients nonzero.
    acos: Vec<(Rational64, Rational64)>,
    rad: f64,
}

fn r(n: i64, d: i64) -> Rational64 {
    Rational64::new(n, d)
}

fn ratio_f64(x: Rational64) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

impl Angle {
    pub fn zero() -> Self {
        Angle::default()
    }

    /// `num/den * pi`
    pub fn pi_frac(num: i64, den: i64) -> Self {
        Angle {
            pi: r(num, den),
            ..Angle::default()
        }
    }

    pub fn pi() -> Self {
        Angle::pi_frac(1, 1)
    }

    /// `arccos(num/den)`, with the rational arguments whose arccosine is a
    /// rational multiple of pi folded into the pi term.
    pub fn acos_ratio(num: i64, den: i64) -> Self {
        let arg = r(num, den);
        assert!(
            arg >= r(-1, 1) && arg <= r(1, 1),
            "arccos argument out of range"
        );
        let special = [
            (r(1, 1), r(0, 1)),
            (r(1, 2), r(1, 3)),
            (r(0, 1), r(1, 2)),
            (r(-1, 2), r(2, 3)),
            (r(-1, 1), r(1, 1)),
        ];
        for (a, p) in special {
            if a == arg {
                return Angle {
                    pi: p,
                    ..Angle::default()
                };
            }
        }
        Angle {
            pi: r(0, 1),
            acos: vec![(arg, r(1, 1))],
            rad: 0.0,
        }
    }

    /// Unstructured angle in radians.
    pub fn radians(x: f64) -> Self {
        Angle {
            rad: x,
            ..Angle::default()
        }
    }

    pub fn degrees(x: f64) -> Self {
        Angle::radians(x.to_radians())
    }

    /// True when the angle carries no `f64` remainder.
    pub fn is_exact(&self) -> bool {
        self.rad == 0.0
    }

    /// `Some(q)` when the angle is exactly `q π`.
    pub fn as_pi_multiple(&self) -> Option<Rational64> {
        (self.rad == 0.0 && self.acos.is_empty()).then_some(self.pi)
    }

    pub fn pi_coefficient(&self) -> Rational64 {
        self.pi
    }

    /// Coefficient of `arccos(num/den)` in the symbolic part.
    pub fn acos_coefficient(&self, num: i64, den: i64) -> Rational64 {
        let arg = r(num, den);
        self.acos
            .iter()
            .find(|(a, _)| *a == arg)
            .map(|(_, c)| *c)
            .unwrap_or_else(|| r(0, 1))
    }

    pub fn value(&self) -> f64 {
        let mut v = ratio_f64(self.pi) * PI + self.rad;
        for (arg, c) in &self.acos {
            v += ratio_f64(*c) * ratio_f64(*arg).acos();
        }
        v
    }

    pub fn to_degrees(&self) -> f64 {
        match self.as_pi_multiple() {
            Some(q) => ratio_f64(q * r(180, 1)),
            None => self.value().to_degrees(),
        }
    }

    /// Evaluates the angle with `bits` of significand.
    pub fn eval<T: Real>(&self, bits: u32) -> T {
        let frac = |q: Rational64| T::from_ratio_prec(*q.numer(), *q.denom(), bits);
        let mut v = T::pi_prec(bits).mul(&frac(self.pi));
        for (arg, c) in &self.acos {
            let a = frac(*arg).acos();
            v = v.add(&a.mul(&frac(*c)));
        }
        if self.rad != 0.0 {
            v = v.add(&T::from_f64_prec(self.rad, bits));
        }
        v
    }

    pub fn scale(&self, k: Rational64) -> Self {
        if k == r(0, 1) {
            return Angle::zero();
        }
        Angle {
            pi: self.pi * k,
            acos: self.acos.iter().map(|(a, c)| (*a, *c * k)).collect(),
            rad: self.rad * ratio_f64(k),
        }
    }

    /// Same angle shifted by a multiple of `2 pi` into `[0, 2 pi)`.
    pub fn reduced(&self) -> Self {
        let v = self.value();
        let turns = (v / (2.0 * PI)).floor();
        if turns == 0.0 {
            return self.clone();
        }
        let mut out = self.clone();
        out.pi -= r(2 * turns as i64, 1);
        if out.value() < 0.0 {
            // floor landed on a boundary through rounding
            out.pi += r(2, 1);
        }
        out
    }

    /// Test for `self == 2 pi k` with integer `k`: exact for symbolic angles,
    /// within 1e-12 rad once a floating part is involved (angles read from
    /// files or found numerically).
    pub fn is_multiple_of_two_pi(&self) -> bool {
        if self.rad != 0.0 {
            let v = self.value();
            return (v - 2.0 * PI * (v / (2.0 * PI)).round()).abs() < 1e-12;
        }
        self.acos.is_empty() && self.pi.is_integer() && self.pi.numer() % 2 == 0
    }

    /// Equality modulo `2 pi`, see [`Angle::is_multiple_of_two_pi`].
    pub fn congruent(&self, other: &Angle) -> bool {
        (self - other).is_multiple_of_two_pi()
    }

    fn combine(&self, other: &Angle, sign: i64) -> Angle {
        let s = r(sign, 1);
        let mut acos = self.acos.clone();
        for (arg, c) in &other.acos {
            match acos.iter_mut().find(|(a, _)| a == arg) {
                Some(slot) => slot.1 += *c * s,
                None => acos.push((*arg, *c * s)),
            }
        }
        acos.retain(|(_, c)| *c != r(0, 1));
        acos.sort_by_key(|a| a.0);
        Angle {
            pi: self.pi + other.pi * s,
            acos,
            rad: self.rad + sign as f64 * other.rad,
        }
    }
}

impl Add for &Angle {
    type Output = Angle;
    fn add(self, rhs: &Angle) -> Angle {
        self.combine(rhs, 1)
    }
}

impl Add for Angle {
    type Output = Angle;
    fn add(self, rhs: Angle) -> Angle {
        self.combine(&rhs, 1)
    }
}

impl Sub for &Angle {
    type Output = Angle;
    fn sub(self, rhs: &Angle) -> Angle {
        self.combine(rhs, -1)
    }
}

impl Sub for Angle {
    type Output = Angle;
    fn sub(self, rhs: Angle) -> Angle {
        self.combine(&rhs, -1)
    }
}

impl Neg for &Angle {
    type Output = Angle;
    fn neg(self) -> Angle {
        self.scale(r(-1, 1))
    }
}

impl Neg for Angle {
    type Output = Angle;
    fn neg(self) -> Angle {
        self.scale(r(-1, 1))
    }
}

impl Mul<i64> for &Angle {
    type Output = Angle;
    fn mul(self, k: i64) -> Angle {
        self.scale(r(k, 1))
    }
}

impl Mul<i64> for Angle {
    type Output = Angle;
    fn mul(self, k: i64) -> Angle {
        self.scale(r(k, 1))
    }
}

impl fmt::Debug for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.pi != r(0, 1) {
            parts.push(format!("{}pi", self.pi));
        }
        for (a, c) in &self.acos {
            parts.push(format!("{c}acos({a})"));
        }
        if self.rad != 0.0 || parts.is_empty() {
            parts.push(format!("{}", self.rad));
        }
        write!(f, "{}", parts.join(" + "))
    }
}
