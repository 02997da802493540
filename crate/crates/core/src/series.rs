//! Truncated power series in the pulse-strength error and the series form of
//! composite-pulse propagators.
//!
//! Propagators are held in Cayley–Klein form `[[α, -β̄], [β, ᾱ]]` with `α`, `β`
//! complex series. A pulse contributes `α = cos a`, `β = -i sin a e^{iφ}` with
//! `a = (1+ε)θ/2`, so one step of a composition multiplies the running product
//! by two real series and two phase constants.

use std::cmp::Ordering;
use std::fmt;

use crate::angle::Angle;
use crate::error::{Error, Result};
use crate::real::{Big, Real, MIN_PRECISION_BITS};
use crate::su2::{Pulse, PulseSequence, Rotor};

/// Truncated series `Σ_{k=0}^{N} c_k ε^k`.
#[derive(Clone)]
pub struct EpsSeries<T: Real = Big> {
    coeffs: Vec<T>,
    bits: u32,
    /// log2 of the largest coefficient magnitude met while building the series.
    scale_log2: f64,
}

impl<T: Real> EpsSeries<T> {
    pub fn zero(order: usize, bits: u32) -> Self {
        EpsSeries {
            coeffs: vec![T::from_f64_prec(0.0, bits); order + 1],
            bits,
            scale_log2: f64::NEG_INFINITY,
        }
    }

    pub fn constant(c: T, order: usize) -> Self {
        let bits = c.precision();
        let mut s = EpsSeries::zero(order, bits);
        s.scale_log2 = c.log2_abs();
        s.coeffs[0] = c;
        s
    }

    pub fn from_coeffs(coeffs: Vec<T>, bits: u32) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidInput("series needs at least one coefficient".into()));
        }
        let scale_log2 = max_log2(&coeffs);
        Ok(EpsSeries {
            coeffs,
            bits,
            scale_log2,
        })
    }

    /// Truncation order `N`.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn precision_bits(&self) -> u32 {
        self.bits
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> &T {
        &self.coeffs[k]
    }

    pub fn coeffs_f64(&self) -> Vec<f64> {
        self.coeffs.iter().map(Real::to_f64).collect()
    }

    /// Tolerance below which a coefficient is treated as cancelled:
    /// `2^{-bits/2}` times the largest intermediate magnitude (at least 1).
    pub fn zero_tol(&self) -> f64 {
        let s = self.scale_log2.max(0.0);
        (s - self.bits as f64 / 2.0).exp2()
    }

    pub(crate) fn note_scale(&mut self, log2: f64) {
        self.scale_log2 = self.scale_log2.max(log2);
    }

    pub fn scale_log2(&self) -> f64 {
        self.scale_log2
    }

    pub fn add(&self, o: &Self) -> Self {
        let coeffs: Vec<T> = self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| a.add(b)).collect();
        self.derived(coeffs, o)
    }

    pub fn sub(&self, o: &Self) -> Self {
        let coeffs: Vec<T> = self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| a.sub(b)).collect();
        self.derived(coeffs, o)
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        out.coeffs = self.coeffs.iter().map(Real::neg).collect();
        out
    }

    pub fn scale(&self, k: &T) -> Self {
        let mut out = self.clone();
        out.coeffs = self.coeffs.iter().map(|c| c.mul(k)).collect();
        out.note_scale(max_log2(&out.coeffs));
        out
    }

    /// Product truncated at the common order.
    pub fn mul(&self, o: &Self) -> Self {
        let coeffs = trunc_mul(&self.coeffs, &o.coeffs);
        self.derived(coeffs, o)
    }

    fn derived(&self, coeffs: Vec<T>, o: &Self) -> Self {
        let mut out = EpsSeries {
            scale_log2: self.scale_log2.max(o.scale_log2),
            bits: self.bits.max(o.bits),
            coeffs,
        };
        out.note_scale(max_log2(&out.coeffs));
        out
    }

    /// Series square root; requires a positive constant term.
    pub fn sqrt(&self) -> Result<Self> {
        let s = &self.coeffs;
        if s[0].is_negative() || s[0].is_zero() {
            return Err(Error::Precision(format!(
                "series square root needs a positive constant term, got {:e}",
                s[0].to_f64()
            )));
        }
        let r0 = s[0].sqrt();
        let two_r0 = r0.add(&r0);
        let mut r = Vec::with_capacity(s.len());
        r.push(r0);
        for k in 1..s.len() {
            let mut acc = s[k].clone();
            for i in 1..k {
                acc = acc.sub(&r[i].mul(&r[k - i]));
            }
            r.push(acc.div(&two_r0));
        }
        let mut out = self.clone();
        out.note_scale(max_log2(&r));
        out.coeffs = r;
        Ok(out)
    }

    /// Horner evaluation in double precision.
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c.to_f64())
    }
}

impl<T: Real> fmt::Debug for EpsSeries<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EpsSeries")
            .field("order", &self.order())
            .field("bits", &self.bits)
            .field("coeffs", &self.coeffs_f64())
            .finish()
    }
}

fn max_log2<T: Real>(v: &[T]) -> f64 {
    v.iter().map(Real::log2_abs).fold(f64::NEG_INFINITY, f64::max)
}

fn trunc_mul<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    let n = a.len().min(b.len());
    let zero = a[0].zero_like();
    let mut out = vec![zero; n];
    for (i, ai) in a.iter().take(n).enumerate() {
        if ai.is_zero() {
            continue;
        }
        for (j, bj) in b.iter().take(n - i).enumerate() {
            out[i + j].add_mul(ai, bj);
        }
    }
    out
}

/// Complex series as a pair of real series.
#[derive(Clone, Debug)]
pub struct ComplexSeries<T: Real = Big> {
    pub re: EpsSeries<T>,
    pub im: EpsSeries<T>,
}

impl<T: Real> ComplexSeries<T> {
    /// `self * (cr + i ci)` for a constant.
    fn mul_const(&self, cr: &T, ci: &T) -> Self {
        ComplexSeries {
            re: self.re.scale(cr).sub(&self.im.scale(ci)),
            im: self.re.scale(ci).add(&self.im.scale(cr)),
        }
    }

    /// `real_series * self`
    fn mul_real(&self, r: &EpsSeries<T>) -> Self {
        ComplexSeries {
            re: r.mul(&self.re),
            im: r.mul(&self.im),
        }
    }

    fn add(&self, o: &Self) -> Self {
        ComplexSeries {
            re: self.re.add(&o.re),
            im: self.im.add(&o.im),
        }
    }

    fn sub(&self, o: &Self) -> Self {
        ComplexSeries {
            re: self.re.sub(&o.re),
            im: self.im.sub(&o.im),
        }
    }

    fn conj(&self) -> Self {
        ComplexSeries {
            re: self.re.clone(),
            im: self.im.neg(),
        }
    }

    fn mul(&self, o: &Self) -> Self {
        ComplexSeries {
            re: self.re.mul(&o.re).sub(&self.im.mul(&o.im)),
            im: self.re.mul(&o.im).add(&self.im.mul(&o.re)),
        }
    }
}

/// Series-valued SU(2) propagator `[[α, -β̄], [β, ᾱ]]`.
#[derive(Clone, Debug)]
pub struct RotorSeries<T: Real = Big> {
    pub alpha: ComplexSeries<T>,
    pub beta: ComplexSeries<T>,
}

impl<T: Real> RotorSeries<T> {
    pub fn identity(order: usize, bits: u32) -> Self {
        let one = T::from_f64_prec(1.0, bits);
        let z = EpsSeries::zero(order, bits);
        RotorSeries {
            alpha: ComplexSeries {
                re: EpsSeries::constant(one, order),
                im: z.clone(),
            },
            beta: ComplexSeries { re: z.clone(), im: z },
        }
    }

    pub fn order(&self) -> usize {
        self.alpha.re.order()
    }

    /// `self · rhs` (apply `rhs` first).
    pub fn mul(&self, rhs: &Self) -> Self {
        let (a1, b1, a2, b2) = (&self.alpha, &self.beta, &rhs.alpha, &rhs.beta);
        RotorSeries {
            alpha: a1.mul(a2).sub(&b1.conj().mul(b2)),
            beta: b1.mul(a2).add(&a1.conj().mul(b2)),
        }
    }

    /// Determinant `|α|^2 + |β|^2` as a series.
    pub fn det(&self) -> EpsSeries<T> {
        let a = &self.alpha;
        let b = &self.beta;
        a.re.mul(&a.re)
            .add(&a.im.mul(&a.im))
            .add(&b.re.mul(&b.re))
            .add(&b.im.mul(&b.im))
    }

    /// Constant term as a double-precision rotor.
    pub fn constant_rotor(&self) -> Rotor {
        let c = |s: &EpsSeries<T>| s.coeff(0).to_f64();
        Rotor::new(c(&self.alpha.re), c(&self.beta.im), -c(&self.beta.re), c(&self.alpha.im))
    }

    /// `Re tr(V U†) / 2` against a constant target, as a real series.
    pub fn overlap(&self, target: &ConstRotor<T>) -> EpsSeries<T> {
        // Re(α_V ᾱ_U + β_V β̄_U)
        let t = target;
        self.alpha
            .re
            .scale(&t.alpha_re)
            .add(&self.alpha.im.scale(&t.alpha_im))
            .add(&self.beta.re.scale(&t.beta_re))
            .add(&self.beta.im.scale(&t.beta_im))
    }

    /// Quaternion components `(w, x, y, z)` of `V U†` for a constant `U`,
    /// sign-fixed so the constant term of `w` is nonnegative.
    pub fn relative_to(&self, u: &ConstRotor<T>) -> [EpsSeries<T>; 4] {
        // V = (Re α, Im β, -Re β, Im α); U† negates the vector part
        let (vw, vx, vy, vz) = (&self.alpha.re, &self.beta.im, self.beta.re.neg(), &self.alpha.im);
        let (uw, ux, uy, uz) = (&u.alpha_re, u.beta_im.neg(), u.beta_re.clone(), u.alpha_im.neg());
        let w = vw.scale(uw).sub(&vx.scale(&ux)).sub(&vy.scale(&uy)).sub(&vz.scale(&uz));
        let x = vw.scale(&ux).add(&vx.scale(uw)).sub(&vy.scale(&uz).sub(&vz.scale(&uy)));
        let y = vw.scale(&uy).add(&vy.scale(uw)).sub(&vz.scale(&ux).sub(&vx.scale(&uz)));
        let z = vw.scale(&uz).add(&vz.scale(uw)).sub(&vx.scale(&uy).sub(&vy.scale(&ux)));
        if w.coeff(0).is_negative() {
            [w.neg(), x.neg(), y.neg(), z.neg()]
        } else {
            [w, x, y, z]
        }
    }

    fn max_scale(&self) -> f64 {
        [&self.alpha.re, &self.alpha.im, &self.beta.re, &self.beta.im]
            .iter()
            .map(|s| s.scale_log2)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Target propagator in Cayley–Klein form at working precision.
#[derive(Clone, Debug)]
pub struct ConstRotor<T: Real = Big> {
    pub alpha_re: T,
    pub alpha_im: T,
    pub beta_re: T,
    pub beta_im: T,
}

/// Gate a sequence is compared against.
#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    /// The error-free propagator of this pulse.
    Pulse(Pulse),
    Identity,
}

impl From<Pulse> for Target {
    fn from(p: Pulse) -> Self {
        Target::Pulse(p)
    }
}

impl Target {
    /// Ideal `π_0`.
    pub fn pi_x() -> Self {
        Target::Pulse(Pulse::pi(Angle::zero()))
    }

    pub fn to_const<T: Real>(&self, bits: u32) -> ConstRotor<T> {
        match self {
            Target::Identity => ConstRotor {
                alpha_re: T::from_f64_prec(1.0, bits),
                alpha_im: T::from_f64_prec(0.0, bits),
                beta_re: T::from_f64_prec(0.0, bits),
                beta_im: T::from_f64_prec(0.0, bits),
            },
            Target::Pulse(p) => {
                let half = p.theta().eval::<T>(bits).mul(&T::from_ratio_prec(1, 2, bits));
                let phi = p.phi().eval::<T>(bits);
                let (c, s) = (half.cos(), half.sin());
                ConstRotor {
                    alpha_re: c,
                    alpha_im: T::from_f64_prec(0.0, bits),
                    beta_re: s.mul(&phi.sin()),
                    beta_im: s.mul(&phi.cos()).neg(),
                }
            }
        }
    }

    pub fn rotor(&self) -> Rotor {
        match self {
            Target::Identity => Rotor::IDENTITY,
            Target::Pulse(p) => crate::su2::ideal_target(p.theta_rad(), p.phi_rad()),
        }
    }
}

/// Lowest non-vanishing order of an infidelity series.
#[derive(Clone, Debug)]
pub struct LeadingTerm<T: Real = Big> {
    pub order: usize,
    pub coefficient: T,
    pub numerical_value: f64,
}

fn check_args(order: usize, bits: u32) -> Result<()> {
    if order < 1 {
        return Err(Error::InvalidInput("series order must be at least 1".into()));
    }
    if bits < MIN_PRECISION_BITS {
        return Err(Error::Precision(format!(
            "{bits} bits requested, at least {MIN_PRECISION_BITS} required"
        )));
    }
    Ok(())
}

/// Real series `cos(A + hδ)` and `sin(A + hδ)` in `δ`.
fn cos_sin_series<T: Real>(a: &T, h: &T, order: usize, bits: u32) -> (EpsSeries<T>, EpsSeries<T>) {
    let (ca, sa) = (a.cos(), a.sin());
    let mut c = Vec::with_capacity(order + 1);
    let mut s = Vec::with_capacity(order + 1);
    let mut t = T::from_f64_prec(1.0, bits);
    for k in 0..=order {
        if k > 0 {
            t = t.mul(h).div(&T::from_f64_prec(k as f64, bits));
        }
        // derivatives of cos cycle cos, -sin, -cos, sin
        let (ck, sk) = match k % 4 {
            0 => (ca.clone(), sa.clone()),
            1 => (sa.neg(), ca.clone()),
            2 => (ca.neg(), sa.neg()),
            _ => (sa.clone(), ca.neg()),
        };
        c.push(t.mul(&ck));
        s.push(t.mul(&sk));
    }
    let cs = EpsSeries::from_coeffs(c, bits).expect("nonempty");
    let ss = EpsSeries::from_coeffs(s, bits).expect("nonempty");
    (cs, ss)
}

struct PulseFactors<T: Real> {
    cos: EpsSeries<T>,
    sin: EpsSeries<T>,
    /// `e = sin φ - i cos φ`, so that `β = sin(a) e`.
    e_re: T,
    e_im: T,
}

fn pulse_factors<T: Real>(theta: &T, phi: &T, center: &T, order: usize, bits: u32) -> PulseFactors<T> {
    let one = T::from_f64_prec(1.0, bits);
    let half = T::from_ratio_prec(1, 2, bits);
    let h = theta.mul(&half);
    let a = h.mul(&one.add(center));
    let (cos, sin) = cos_sin_series(&a, &h, order, bits);
    PulseFactors {
        cos,
        sin,
        e_re: phi.sin(),
        e_im: phi.cos().neg(),
    }
}

fn eval_pulses<T: Real>(seq: &PulseSequence, bits: u32) -> Vec<(T, T)> {
    seq.pulses()
        .iter()
        .map(|p| (p.theta().eval::<T>(bits), p.phi().eval::<T>(bits)))
        .collect()
}

pub(crate) fn series_rotor_about<T: Real>(p: &Pulse, center: &T, order: usize, bits: u32) -> RotorSeries<T> {
    let f = pulse_factors(&p.theta().eval::<T>(bits), &p.phi().eval::<T>(bits), center, order, bits);
    let zero = EpsSeries::zero(order, bits);
    RotorSeries {
        alpha: ComplexSeries {
            re: f.cos,
            im: zero,
        },
        beta: ComplexSeries {
            re: f.sin.scale(&f.e_re),
            im: f.sin.scale(&f.e_im),
        },
    }
}

/// Ordered product of pulse series about `ε = center`, first pulse rightmost.
/// Pulses are `(θ, φ)` pairs already evaluated at working precision.
pub(crate) fn compose_raw<T: Real>(pulses: &[(T, T)], center: &T, order: usize, bits: u32) -> RotorSeries<T> {
    let mut acc = RotorSeries::identity(order, bits);
    for (theta, phi) in pulses {
        let f = pulse_factors(theta, phi, center, order, bits);
        // P·A with P = [[C, -S ē], [S e, C]]:
        //   α = C α_A - S ē β_A,  β = S e α_A + C β_A
        let eb = acc.beta.mul_const(&f.e_re, &f.e_im.neg());
        let ea = acc.alpha.mul_const(&f.e_re, &f.e_im);
        acc = RotorSeries {
            alpha: acc.alpha.mul_real(&f.cos).sub(&eb.mul_real(&f.sin)),
            beta: ea.mul_real(&f.sin).add(&acc.beta.mul_real(&f.cos)),
        };
    }
    acc
}

pub(crate) fn series_compose_about<T: Real>(
    seq: &PulseSequence,
    center: &T,
    order: usize,
    bits: u32,
) -> RotorSeries<T> {
    compose_raw(&eval_pulses::<T>(seq, bits), center, order, bits)
}

/// Series propagator of one pulse in `ε` (no off-resonance).
pub fn series_rotor(p: &Pulse, order: usize, bits: u32) -> Result<RotorSeries<Big>> {
    check_args(order, bits)?;
    Ok(series_rotor_about(p, &Big::new(0.0, bits), order, bits))
}

/// Series propagator of a sequence in `ε`.
pub fn series_compose(seq: &PulseSequence, order: usize, bits: u32) -> Result<RotorSeries<Big>> {
    check_args(order, bits)?;
    Ok(series_compose_about(seq, &Big::new(0.0, bits), order, bits))
}

/// Infidelity `1 - |tr(V U†)|/2` as a series in `ε`.
pub fn infidelity_series(seq: &PulseSequence, target: &Target, order: usize, bits: u32) -> Result<EpsSeries<Big>> {
    infidelity_series_about(seq, target, 0.0, order, bits)
}

/// Infidelity as a series in `δ = ε - center`.
pub fn infidelity_series_about(
    seq: &PulseSequence,
    target: &Target,
    center: f64,
    order: usize,
    bits: u32,
) -> Result<EpsSeries<Big>> {
    check_args(order, bits)?;
    if !center.is_finite() || center < -1.0 {
        return Err(Error::InvalidInput(format!("expansion center {center} must be finite and at least -1")));
    }
    infidelity_generic(seq, target, &Big::new(center, bits), order, bits)
}

/// Double-precision variant used inside optimizers.
pub fn infidelity_series_f64(seq: &PulseSequence, target: &Target, center: f64, order: usize) -> Result<EpsSeries<f64>> {
    if order < 1 {
        return Err(Error::InvalidInput("series order must be at least 1".into()));
    }
    infidelity_generic(seq, target, &center, order, 53)
}

pub(crate) fn infidelity_generic<T: Real>(
    seq: &PulseSequence,
    target: &Target,
    center: &T,
    order: usize,
    bits: u32,
) -> Result<EpsSeries<T>> {
    let v = series_compose_about(seq, center, order, bits);
    infidelity_from_rotor(&v, target, bits)
}

/// Infidelity series of an already composed propagator.
pub(crate) fn infidelity_from_rotor<T: Real>(v: &RotorSeries<T>, target: &Target, bits: u32) -> Result<EpsSeries<T>> {
    let scale = v.max_scale();
    let z = v.overlap(&target.to_const::<T>(bits));
    // |z| is analytic only where z does not vanish; there it is ±z. The
    // constant term is a product of unit-bounded factors, so its rounding
    // error does not grow with the higher-order scale.
    if z.coeff(0).to_f64().abs() <= (-(bits as f64) / 2.0).exp2() {
        return Err(Error::Unsupported(
            "overlap with the target vanishes at the expansion point; the fidelity is not analytic there".into(),
        ));
    }
    let mut out = if z.coeff(0).is_negative() { z } else { z.neg() };
    let one = T::from_f64_prec(1.0, bits);
    out.coeffs[0] = one.add(&out.coeffs[0]);
    out.note_scale(scale);
    Ok(out)
}

/// Lowest order whose coefficient clears `zero_tol`.
///
/// A coefficient within `[zero_tol, 10 zero_tol]` cannot be classified and
/// yields [`Error::Ambiguous`]; a series with no coefficient above tolerance
/// yields [`Error::PerfectToOrder`].
pub fn leading_term<T: Real>(s: &EpsSeries<T>, zero_tol: f64) -> Result<LeadingTerm<T>> {
    for (k, c) in s.coeffs.iter().enumerate() {
        let mag = c.to_f64().abs();
        if mag > 10.0 * zero_tol {
            return Ok(LeadingTerm {
                order: k,
                coefficient: c.clone(),
                numerical_value: c.to_f64(),
            });
        }
        if mag > zero_tol {
            return Err(Error::Ambiguous {
                order: k,
                magnitude: mag,
                tol: zero_tol,
            });
        }
    }
    Err(Error::PerfectToOrder { order: s.order() })
}

/// Default truncation order for an expected leading order.
pub fn default_order(expected_leading: usize) -> usize {
    2 * expected_leading + 4
}

/// Compares two series coefficient by coefficient against a tolerance.
pub fn series_agree<T: Real>(a: &EpsSeries<T>, b: &EpsSeries<T>, tol: f64) -> bool {
    a.order() == b.order()
        && a.coeffs
            .iter()
            .zip(&b.coeffs)
            .all(|(x, y)| x.sub(y).to_f64().abs() <= tol)
}

/// Ordering helper for coefficient magnitudes.
pub fn cmp_abs<T: Real>(a: &T, b: &T) -> Ordering {
    a.abs().cmp_value(&b.abs())
}
