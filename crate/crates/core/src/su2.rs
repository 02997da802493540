//! Exact SU(2) propagators for pulses with pulse-strength and off-resonance
//! errors, and the propagator fidelity.
//!
//! A [`Rotor`] `(w, x, y, z)` stands for the matrix `w I + i (x σx + y σy + z σz)`,
//! so an ideal rotation by `a` about the unit axis `n` is
//! `(cos(a/2), -sin(a/2) n)`. With this convention a pulse of angle `a` about
//! `n` rotates Bloch vectors right-handedly: a `π/2` pulse about `x` takes
//! `+z` to `-y`.

use std::f64::consts::PI;
use std::ops::Mul;

use crate::angle::Angle;
use crate::error::{invalid, Result};

/// Drift in `|q|^2 - 1` beyond which composition renormalizes.
pub const NORM_DRIFT_TOL: f64 = 1e-12;

/// One rotation element: nominal angle `theta` about the in-plane axis at
/// azimuth `phi`.
#[derive(Clone, Debug, PartialEq)]
pub struct Pulse {
    theta: Angle,
    phi: Angle,
}

impl Pulse {
    /// Builds a pulse; `theta` must be positive and `phi` is stored reduced to
    /// `[0, 2π)`.
    pub fn new(theta: Angle, phi: Angle) -> Result<Self> {
        let t = theta.value();
        if !t.is_finite() || t <= 0.0 {
            return Err(invalid(format!("pulse angle must be positive, got {t}")));
        }
        if !phi.value().is_finite() {
            return Err(invalid("pulse phase must be finite"));
        }
        Ok(Pulse {
            theta,
            phi: phi.reduced(),
        })
    }

    /// A `π` pulse with the given phase.
    pub fn pi(phi: Angle) -> Self {
        Pulse::new(Angle::pi(), phi).expect("pi pulse is valid")
    }

    pub fn from_radians(theta: f64, phi: f64) -> Result<Self> {
        Pulse::new(Angle::radians(theta), Angle::radians(phi))
    }

    pub fn from_degrees(theta: f64, phi: f64) -> Result<Self> {
        Pulse::new(Angle::degrees(theta), Angle::degrees(phi))
    }

    pub fn theta(&self) -> &Angle {
        &self.theta
    }

    pub fn phi(&self) -> &Angle {
        &self.phi
    }

    pub fn theta_rad(&self) -> f64 {
        self.theta.value()
    }

    pub fn phi_rad(&self) -> f64 {
        self.phi.value()
    }

    pub fn is_pi(&self) -> bool {
        self.theta == Angle::pi()
    }

    /// Same angle, phase negated.
    pub fn negated(&self) -> Pulse {
        Pulse {
            theta: self.theta.clone(),
            phi: (-&self.phi).reduced(),
        }
    }

    /// Exact equality of angle and phase (phase modulo `2π`).
    pub fn same_as(&self, other: &Pulse) -> bool {
        self.theta == other.theta && self.phi.congruent(&other.phi)
    }
}

/// Systematic error values at which a propagator is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ErrorParams {
    pub epsilon: f64,
    pub f: f64,
}

impl ErrorParams {
    pub fn new(epsilon: f64, f: f64) -> Result<Self> {
        let e = ErrorParams { epsilon, f };
        e.validate()?;
        Ok(e)
    }

    pub fn strength(epsilon: f64) -> Result<Self> {
        ErrorParams::new(epsilon, 0.0)
    }

    pub fn ideal() -> Self {
        ErrorParams::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.epsilon.is_finite() || !self.f.is_finite() {
            return Err(invalid("error parameters must be finite"));
        }
        if self.epsilon <= -1.0 {
            return Err(invalid(format!(
                "pulse-strength error must exceed -1, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Unit quaternion for an SU(2) propagator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotor {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Rotor {
    pub const IDENTITY: Rotor = Rotor {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Rotor { w, x, y, z }
    }

    /// Rotation by `angle` about `axis` (normalized here).
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Self {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let (s, c) = (angle / 2.0).sin_cos();
        Rotor {
            w: c,
            x: -s * axis[0] / n,
            y: -s * axis[1] / n,
            z: -s * axis[2] / n,
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm_sqr().sqrt();
        Rotor::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    /// Hermitian adjoint (inverse for unit rotors).
    pub fn adjoint(&self) -> Self {
        Rotor::new(self.w, -self.x, -self.y, -self.z)
    }

    /// Four-dimensional inner product, equal to `Re tr(A B†) / 2`.
    pub fn dot(&self, other: &Rotor) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Matrix entries `[[a, b], [c, d]]` as `(re, im)` pairs.
    pub fn matrix(&self) -> [[(f64, f64); 2]; 2] {
        [
            [(self.w, self.z), (self.y, self.x)],
            [(-self.y, self.x), (self.w, -self.z)],
        ]
    }
}

impl Mul for Rotor {
    type Output = Rotor;

    /// Matrix product `self · rhs` (apply `rhs` first).
    fn mul(self, b: Rotor) -> Rotor {
        let a = self;
        Rotor {
            w: a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            x: a.w * b.x + b.w * a.x - (a.y * b.z - a.z * b.y),
            y: a.w * b.y + b.w * a.y - (a.z * b.x - a.x * b.z),
            z: a.w * b.z + b.w * a.z - (a.x * b.y - a.y * b.x),
        }
    }
}

/// Ordered list of pulses; time runs from the first to the last element.
#[derive(Clone, Debug, PartialEq)]
pub struct PulseSequence {
    pulses: Vec<Pulse>,
    pub label: String,
}

impl PulseSequence {
    pub fn new(pulses: Vec<Pulse>, label: impl Into<String>) -> Result<Self> {
        if pulses.is_empty() {
            return Err(invalid("pulse sequence must be nonempty"));
        }
        Ok(PulseSequence {
            pulses,
            label: label.into(),
        })
    }

    /// Sequence of `π` pulses with the given phases.
    pub fn from_pi_phases(phases: &[Angle], label: impl Into<String>) -> Result<Self> {
        PulseSequence::new(phases.iter().cloned().map(Pulse::pi).collect(), label)
    }

    pub fn single(p: Pulse) -> Self {
        PulseSequence {
            pulses: vec![p],
            label: String::new(),
        }
    }

    pub fn pulses(&self) -> &[Pulse] {
        &self.pulses
    }

    pub fn len(&self) -> usize {
        self.pulses.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Phase list (time order).
    pub fn phases(&self) -> Vec<Angle> {
        self.pulses.iter().map(|p| p.phi.clone()).collect()
    }

    /// All elements are `π` pulses and `φ_{m+1-i} ≡ -φ_i (mod 2π)`.
    pub fn is_antisymmetric(&self) -> bool {
        let m = self.pulses.len();
        self.pulses.iter().all(Pulse::is_pi)
            && (0..m).all(|i| (&self.pulses[i].phi + &self.pulses[m - 1 - i].phi).is_multiple_of_two_pi())
    }

    /// The sequence equals its time reversal.
    pub fn is_symmetric(&self) -> bool {
        let m = self.pulses.len();
        (0..m / 2).all(|i| self.pulses[i].same_as(&self.pulses[m - 1 - i]))
    }

    /// Sum of nominal rotation angles.
    pub fn total_angle(&self) -> f64 {
        self.pulses.iter().map(Pulse::theta_rad).sum()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

/// Propagator `exp(-iθ[(1+ε)(σx cosφ + σy sinφ) + f σz]/2)`.
pub fn rotor_from_pulse(p: &Pulse, e: ErrorParams) -> Result<Rotor> {
    e.validate()?;
    Ok(rotor_unchecked(p.theta_rad(), p.phi_rad(), e))
}

pub(crate) fn rotor_unchecked(theta: f64, phi: f64, e: ErrorParams) -> Rotor {
    let s = 1.0 + e.epsilon;
    let (sp, cp) = phi.sin_cos();
    let axis = [s * cp, s * sp, e.f];
    let scale = (s * s + e.f * e.f).sqrt();
    let angle = theta * scale;
    let (sh, ch) = (angle / 2.0).sin_cos();
    Rotor {
        w: ch,
        x: -sh * axis[0] / scale,
        y: -sh * axis[1] / scale,
        z: -sh * axis[2] / scale,
    }
}

/// Ordered product of the per-pulse propagators, first pulse rightmost.
pub fn compose(seq: &PulseSequence, e: ErrorParams) -> Result<Rotor> {
    e.validate()?;
    Ok(compose_unchecked(seq, e))
}

pub(crate) fn compose_unchecked(seq: &PulseSequence, e: ErrorParams) -> Rotor {
    let mut acc = Rotor::IDENTITY;
    for p in &seq.pulses {
        acc = rotor_unchecked(p.theta_rad(), p.phi_rad(), e) * acc;
        if (acc.norm_sqr() - 1.0).abs() > NORM_DRIFT_TOL {
            acc = acc.normalized();
        }
    }
    acc
}

/// Propagator fidelity `|tr(V U†)| / 2`.
pub fn fidelity(v: &Rotor, u: &Rotor) -> f64 {
    v.dot(u).abs().min(1.0)
}

/// `1 - fidelity`, evaluated without cancellation for nearly perfect
/// propagators.
pub fn infidelity(v: &Rotor, u: &Rotor) -> f64 {
    let d = *v * u.adjoint();
    let vec2 = d.x * d.x + d.y * d.y + d.z * d.z;
    let n2 = d.norm_sqr();
    // 1 - |w|/|d| for a possibly slightly denormalized d
    vec2 / (n2 + d.w.abs() * n2.sqrt())
}

/// The error-free propagator of a `theta_phi` pulse.
pub fn ideal_target(theta: f64, phi: f64) -> Rotor {
    rotor_unchecked(theta, phi, ErrorParams::ideal())
}

/// Rotates a Bloch (magnetization) vector by the propagator, `ρ → V ρ V†`.
pub fn bloch_apply(v: &Rotor, m: [f64; 3]) -> [f64; 3] {
    // standard rotation quaternion (w, u) has u = -(x, y, z)
    let u = [-v.x, -v.y, -v.z];
    let t = cross(u, m).map(|c| 2.0 * c);
    let ut = cross(u, t);
    [
        m[0] + v.w * t[0] + ut[0],
        m[1] + v.w * t[1] + ut[1],
        m[2] + v.w * t[2] + ut[2],
    ]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Reduces a phase in radians to `[0, 2π)`.
pub fn reduce_phase(phi: f64) -> f64 {
    phi.rem_euclid(2.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn close_up_to_sign(a: Rotor, b: Rotor, tol: f64) -> bool {
        let d1 = (a.w - b.w).abs() + (a.x - b.x).abs() + (a.y - b.y).abs() + (a.z - b.z).abs();
        let d2 = (a.w + b.w).abs() + (a.x + b.x).abs() + (a.y + b.y).abs() + (a.z + b.z).abs();
        d1.min(d2) < tol
    }

    /// Direct 2x2 complex exponential of `-i (a·σ)/2` via the matrix series,
    /// independent of the closed form used above.
    fn matrix_exp_oracle(h: [f64; 3]) -> [[(f64, f64); 2]; 2] {
        // generator G = -i/2 (hx σx + hy σy + hz σz)
        let g = [
            [(0.0, -h[2] / 2.0), (-h[1] / 2.0, -h[0] / 2.0)],
            [(h[1] / 2.0, -h[0] / 2.0), (0.0, h[2] / 2.0)],
        ];
        let cm = |a: (f64, f64), b: (f64, f64)| (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0);
        let mut term = [[(1.0, 0.0), (0.0, 0.0)], [(0.0, 0.0), (1.0, 0.0)]];
        let mut sum = term;
        for k in 1..60 {
            let mut next = [[(0.0, 0.0); 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    for l in 0..2 {
                        let p = cm(term[i][l], g[l][j]);
                        next[i][j].0 += p.0 / k as f64;
                        next[i][j].1 += p.1 / k as f64;
                    }
                }
            }
            term = next;
            for i in 0..2 {
                for j in 0..2 {
                    sum[i][j].0 += term[i][j].0;
                    sum[i][j].1 += term[i][j].1;
                }
            }
        }
        sum
    }

    #[test]
    fn ideal_pi_pulse() {
        let r = rotor_from_pulse(&Pulse::from_radians(PI, 0.0).unwrap(), ErrorParams::ideal()).unwrap();
        assert!(close_up_to_sign(r, Rotor::new(0.0, -1.0, 0.0, 0.0), 1e-15));
    }

    #[test]
    fn strength_error_scales_angle() {
        let e = ErrorParams::strength(0.2).unwrap();
        let r = rotor_from_pulse(&Pulse::from_radians(PI, 0.0).unwrap(), e).unwrap();
        assert!(close_up_to_sign(r, Rotor::from_axis_angle([1.0, 0.0, 0.0], 1.2 * PI), 1e-15));
    }

    #[test]
    fn matches_matrix_exponential() {
        for &(th, ph, eps, f) in &[(PI, 0.0, 0.0, 0.1), (2.1, 0.7, -0.3, 0.4), (PI / 2.0, 4.0, 0.25, -0.2)] {
            let e = ErrorParams::new(eps, f).unwrap();
            let r = rotor_from_pulse(&Pulse::from_radians(th, ph).unwrap(), e).unwrap();
            let h = [th * (1.0 + eps) * ph.cos(), th * (1.0 + eps) * ph.sin(), th * f];
            let m = matrix_exp_oracle(h);
            let got = r.matrix();
            for i in 0..2 {
                for j in 0..2 {
                    assert_abs_diff_eq!(got[i][j].0, m[i][j].0, epsilon = 1e-13);
                    assert_abs_diff_eq!(got[i][j].1, m[i][j].1, epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn off_resonance_fidelity_value() {
        // oracle: Rodrigues rotation about the tilted axis, angle pi*sqrt(1+f^2)
        let f = 0.1f64;
        let a = PI * (1.0 + f * f).sqrt();
        let n = [1.0 / (1.0 + f * f).sqrt(), 0.0, f / (1.0 + f * f).sqrt()];
        let v = Rotor::new((a / 2.0).cos(), -(a / 2.0).sin() * n[0], 0.0, -(a / 2.0).sin() * n[2]);
        let got = rotor_from_pulse(&Pulse::from_radians(PI, 0.0).unwrap(), ErrorParams::new(0.0, f).unwrap()).unwrap();
        let fid = fidelity(&got, &ideal_target(PI, 0.0));
        assert_abs_diff_eq!(fid, fidelity(&v, &ideal_target(PI, 0.0)), epsilon = 1e-15);
        assert_abs_diff_eq!(fid, 0.9950067, epsilon = 5e-8);
    }

    #[test]
    fn naive_pulse_strength_fidelity() {
        let v = rotor_from_pulse(&Pulse::from_radians(PI, 0.0).unwrap(), ErrorParams::strength(0.2).unwrap()).unwrap();
        let u = ideal_target(PI, 0.0);
        assert_abs_diff_eq!(fidelity(&v, &u), (0.1 * PI).cos(), epsilon = 1e-15);
        assert_abs_diff_eq!(fidelity(&v, &u), 0.9510565, epsilon = 5e-8);
        // trace route through the explicit matrices
        let (mv, mu) = (v.matrix(), u.matrix());
        let mut tr = (0.0, 0.0);
        for i in 0..2 {
            for j in 0..2 {
                // V_ij * conj(U_ij) summed = tr(V U†)
                tr.0 += mv[i][j].0 * mu[i][j].0 + mv[i][j].1 * mu[i][j].1;
                tr.1 += mv[i][j].1 * mu[i][j].0 - mv[i][j].0 * mu[i][j].1;
            }
        }
        assert_abs_diff_eq!((tr.0 * tr.0 + tr.1 * tr.1).sqrt() / 2.0, fidelity(&v, &u), epsilon = 1e-15);
    }

    #[test]
    fn ideal_targets() {
        assert!(close_up_to_sign(ideal_target(PI / 2.0, 0.0), Rotor::new((PI / 4.0).cos(), -(PI / 4.0).sin(), 0.0, 0.0), 1e-15));
        let full = ideal_target(2.0 * PI, 1.3);
        assert!(close_up_to_sign(full, Rotor::new(-1.0, 0.0, 0.0, 0.0), 1e-15));
        assert_abs_diff_eq!(fidelity(&full, &Rotor::IDENTITY), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn bloch_conventions() {
        let m = [0.3, -0.4, 0.5];
        assert_eq!(bloch_apply(&Rotor::IDENTITY, m), m);
        let out = bloch_apply(&ideal_target(PI / 2.0, 0.0), [0.0, 0.0, 1.0]);
        assert_abs_diff_eq!(out[1], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out[2], 0.0, epsilon = 1e-15);
        let out = bloch_apply(&ideal_target(PI, 0.0), [0.0, 1.0, 0.0]);
        assert_abs_diff_eq!(out[1], -1.0, epsilon = 1e-15);
        let out = bloch_apply(&ideal_target(PI, 0.0), [0.0, 0.0, 1.0]);
        assert_abs_diff_eq!(out[2], -1.0, epsilon = 1e-15);
    }

    #[test]
    fn composition_order() {
        // x then y: compose([pi/2_x, pi/2_y]) applied to z
        let seq = PulseSequence::new(
            vec![Pulse::from_radians(PI / 2.0, 0.0).unwrap(), Pulse::from_radians(PI / 2.0, PI / 2.0).unwrap()],
            "",
        )
        .unwrap();
        let v = compose(&seq, ErrorParams::ideal()).unwrap();
        // z -> -y (about x), then -y is on the y axis so unchanged
        let out = bloch_apply(&v, [0.0, 0.0, 1.0]);
        assert_abs_diff_eq!(out[1], -1.0, epsilon = 1e-15);
        let single = PulseSequence::single(Pulse::from_radians(1.1, 0.4).unwrap());
        let e = ErrorParams::new(0.1, 0.05).unwrap();
        assert_eq!(compose(&single, e).unwrap(), rotor_from_pulse(&single.pulses()[0], e).unwrap());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ErrorParams::new(-1.0, 0.0).is_err());
        assert!(ErrorParams::new(0.0, f64::NAN).is_err());
        assert!(Pulse::from_radians(0.0, 0.0).is_err());
        assert!(Pulse::from_radians(f64::INFINITY, 0.0).is_err());
        assert!(PulseSequence::new(vec![], "x").is_err());
        let p = Pulse::from_radians(PI, 0.0).unwrap();
        assert!(rotor_from_pulse(&p, ErrorParams { epsilon: -2.0, f: 0.0 }).is_err());
    }

    #[test]
    fn phase_stored_reduced() {
        let p = Pulse::from_radians(PI, -0.5).unwrap();
        assert!((p.phi_rad() - (2.0 * PI - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn infidelity_agrees_with_fidelity() {
        let v = rotor_from_pulse(&Pulse::from_radians(PI, 0.3).unwrap(), ErrorParams::new(0.05, 0.02).unwrap()).unwrap();
        let u = ideal_target(PI, 0.0);
        assert_abs_diff_eq!(infidelity(&v, &u), 1.0 - fidelity(&v, &u), epsilon = 1e-15);
    }
}
