//! Analytic composite-pulse families, pattern iteration and words, the BB1,
//! NB1 and PB1 forms, W_n assembly, and the symmetric/antisymmetric rewrites.
//!
//! Words are read outside-in: the leftmost letter is the outermost pattern,
//! so `"GF"` is the G pattern applied around F1 and `"FGF"` is F applied to
//! GF.

use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;

use crate::angle::Angle;
use crate::error::{invalid, Error, Result};
use crate::su2::{Pulse, PulseSequence};

/// Closed-form constants of the families.
pub struct FamilyConstants;

impl FamilyConstants {
    /// `arccos(-1/4)`, the F step.
    pub fn phi() -> Angle {
        Angle::acos_ratio(-1, 4)
    }

    /// `π/4`, the G step.
    pub fn gamma() -> Angle {
        Angle::pi_frac(1, 4)
    }

    /// `arccos(-1/4)`, the N step.
    pub fn nu() -> Angle {
        Angle::acos_ratio(-1, 4)
    }

    /// `arccos(-1/8)`, the P step.
    pub fn psi_p() -> Angle {
        Angle::acos_ratio(-1, 8)
    }

    /// Alias of [`FamilyConstants::nu`].
    pub fn psi_nb() -> Angle {
        Self::nu()
    }

    /// BB1 phase `arccos(-θ/4π)` for `0 < θ ≤ 4π`. Exact when `θ` is a
    /// rational multiple of `π`.
    pub fn beta(theta: &Angle) -> Result<Angle> {
        let t = theta.value();
        if !(t > 0.0 && t <= 4.0 * std::f64::consts::PI + 1e-12) {
            return Err(invalid(format!("BB1 needs 0 < theta <= 4 pi, got {t}")));
        }
        if let Some(q) = theta.as_pi_multiple() {
            let arg = -q / 4;
            return Ok(Angle::acos_ratio(*arg.numer(), *arg.denom()));
        }
        Ok(Angle::radians((-t / (4.0 * std::f64::consts::PI)).clamp(-1.0, 1.0).acos()))
    }
}

/// The four named phase patterns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    F,
    G,
    N,
    P,
}

impl Family {
    pub fn pattern(self) -> PhasePattern {
        let (name, unit, mult): (&str, Angle, &[i64]) = match self {
            Family::F => ("F", FamilyConstants::phi(), &[-3, -1, 0, 1, 3]),
            Family::G => ("G", FamilyConstants::gamma(), &[1, -2, 0, 2, -1]),
            Family::N => ("N", FamilyConstants::nu(), &[1, -1, 0, 1, -1]),
            Family::P => ("P", FamilyConstants::psi_p(), &[-1, -1, 1, 1, 0, -1, -1, 1, 1]),
        };
        let offsets = mult.iter().map(|&k| &unit * k).collect();
        PhasePattern::new(name, offsets).expect("built-in patterns are antisymmetric")
    }

    /// The step constant in which the family's phases are listed.
    pub fn unit(self) -> Angle {
        match self {
            Family::F => FamilyConstants::phi(),
            Family::G => FamilyConstants::gamma(),
            Family::N => FamilyConstants::nu(),
            Family::P => FamilyConstants::psi_p(),
        }
    }

    pub fn letter(self) -> char {
        match self {
            Family::F => 'F',
            Family::G => 'G',
            Family::N => 'N',
            Family::P => 'P',
        }
    }

    pub fn from_letter(c: char) -> Result<Self> {
        match c.to_ascii_uppercase() {
            'F' => Ok(Family::F),
            'G' => Ok(Family::G),
            'N' => Ok(Family::N),
            'P' => Ok(Family::P),
            other => Err(invalid(format!("unknown family letter {other:?}"))),
        }
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut it = s.trim().chars();
        match (it.next(), it.next()) {
            (Some(c), None) => Family::from_letter(c),
            _ => Err(invalid(format!("unknown family {s:?}"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Offsets `b_i` and alternating signs `s_i = (-1)^{i+1}` of one pattern.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePattern {
    pub name: String,
    offsets: Vec<Angle>,
    signs: Vec<i64>,
}

impl PhasePattern {
    /// Custom pattern; offsets must be odd in number and antisymmetric.
    pub fn new(name: impl Into<String>, offsets: Vec<Angle>) -> Result<Self> {
        if offsets.len().is_multiple_of(2) {
            return Err(invalid("pattern needs an odd number of offsets"));
        }
        if !is_antisymmetric_list(&offsets) {
            return Err(invalid("pattern offsets must satisfy b_{m+1-i} = -b_i"));
        }
        let signs = (0..offsets.len()).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        Ok(PhasePattern {
            name: name.into(),
            offsets,
            signs,
        })
    }

    pub fn offsets(&self) -> &[Angle] {
        &self.offsets
    }

    pub fn signs(&self) -> &[i64] {
        &self.signs
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }
}

/// `φ_{m+1-i} + φ_i ≡ 0 (mod 2π)` for every `i`, tested exactly.
pub fn is_antisymmetric_list(phases: &[Angle]) -> bool {
    let m = phases.len();
    (0..m).all(|i| (&phases[i] + &phases[m - 1 - i]).is_multiple_of_two_pi())
}

/// Block `i` of the output is `b_i + s_i · inner`, element-wise.
pub fn iterate_pattern(pattern: &PhasePattern, inner: &[Angle]) -> Result<Vec<Angle>> {
    if inner.is_empty() || !is_antisymmetric_list(inner) {
        return Err(invalid("inner phase list must be nonempty and antisymmetric"));
    }
    let mut out = Vec::with_capacity(pattern.len() * inner.len());
    for (b, &s) in pattern.offsets.iter().zip(&pattern.signs) {
        for p in inner {
            out.push((b + &(p * s)).reduced());
        }
    }
    Ok(out)
}

/// `n`-th member of a family: `5^n` (F, G, N) or `9^n` (P) `π` pulses.
pub fn family_sequence(family: Family, n: u32) -> PulseSequence {
    let pattern = family.pattern();
    let mut phases = vec![Angle::zero()];
    for _ in 0..n {
        phases = iterate_pattern(&pattern, &phases).expect("family lists stay antisymmetric");
    }
    PulseSequence::from_pi_phases(&phases, format!("{family}{n}")).expect("nonempty")
}

/// Applies the patterns of `word` from the rightmost letter outwards,
/// starting from a single `π_0`. Digits after a letter repeat it, so `"F2G"`
/// equals `"FFG"` and `"F0"` is a single `π_0`.
pub fn compose_word(word: &str) -> Result<PulseSequence> {
    let letters = expand_word(word)?;
    let mut phases = vec![Angle::zero()];
    for fam in letters.iter().rev() {
        phases = iterate_pattern(&fam.pattern(), &phases)?;
    }
    PulseSequence::from_pi_phases(&phases, word.trim().to_string())
}

fn expand_word(word: &str) -> Result<Vec<Family>> {
    let w = word.trim();
    if w.is_empty() {
        return Err(invalid("empty pattern word"));
    }
    let mut out: Vec<Family> = Vec::new();
    let mut chars = w.chars().peekable();
    while let Some(c) = chars.next() {
        let fam = Family::from_letter(c)?;
        let mut digits = String::new();
        while let Some(d) = chars.peek().filter(|d| d.is_ascii_digit()) {
            digits.push(*d);
            chars.next();
        }
        let count: usize = if digits.is_empty() {
            1
        } else {
            digits.parse().map_err(|_| invalid(format!("bad repeat count in {w:?}")))?
        };
        out.extend(std::iter::repeat_n(fam, count));
    }
    // "F0" is the bare pulse
    Ok(out)
}

/// `π_β 2π_{3β} π_β θ_0` with `β = arccos(-θ/4π)`.
pub fn bb1(theta: &Angle) -> Result<PulseSequence> {
    let beta = FamilyConstants::beta(theta)?;
    PulseSequence::new(
        vec![
            Pulse::pi(beta.clone()),
            Pulse::new(Angle::pi_frac(2, 1), &beta * 3)?,
            Pulse::pi(beta),
            Pulse::new(theta.clone(), Angle::zero())?,
        ],
        "BB1",
    )
}

/// `π_ν 2π_{-ν} π_ν π_0`.
pub fn nb1() -> PulseSequence {
    let nu = FamilyConstants::nu();
    PulseSequence::new(
        vec![
            Pulse::pi(nu.clone()),
            Pulse::new(Angle::pi_frac(2, 1), -&nu).expect("valid"),
            Pulse::pi(nu),
            Pulse::pi(Angle::zero()),
        ],
        "NB1",
    )
    .expect("nonempty")
}

/// `2π_ψ 4π_{-ψ} 2π_ψ π_0`.
pub fn pb1() -> PulseSequence {
    let psi = FamilyConstants::psi_p();
    PulseSequence::new(
        vec![
            Pulse::new(Angle::pi_frac(2, 1), psi.clone()).expect("valid"),
            Pulse::new(Angle::pi_frac(4, 1), -&psi).expect("valid"),
            Pulse::new(Angle::pi_frac(2, 1), psi).expect("valid"),
            Pulse::pi(Angle::zero()),
        ],
        "PB1",
    )
    .expect("nonempty")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymmetrizeMode {
    /// Front half moved to the back with phases negated; all `π` pulses.
    Shift,
    /// As `Shift`, with the central pulse split into two halves at either end.
    Full,
}

impl FromStr for SymmetrizeMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "shift" => Ok(SymmetrizeMode::Shift),
            "full" => Ok(SymmetrizeMode::Full),
            _ => Err(invalid(format!("unknown symmetrize mode {s:?}"))),
        }
    }
}

/// Rewrites an odd-length antisymmetric `π` train into a time-symmetric form
/// with the same infidelity in `ε`.
pub fn symmetrize(seq: &PulseSequence, mode: SymmetrizeMode) -> Result<PulseSequence> {
    if !seq.is_antisymmetric() || seq.len().is_multiple_of(2) {
        return Err(invalid("symmetrize needs an odd-length antisymmetric pi-pulse sequence"));
    }
    let k = seq.len() / 2;
    let p = seq.pulses();
    let center = p[k].phi().clone();
    let tail: Vec<Pulse> = p[k + 1..]
        .iter()
        .cloned()
        .chain(p[..k].iter().map(Pulse::negated))
        .collect();
    let pulses = match mode {
        SymmetrizeMode::Shift => std::iter::once(Pulse::pi(center)).chain(tail).collect(),
        SymmetrizeMode::Full => {
            let half = Pulse::new(Angle::pi_frac(1, 2), center)?;
            std::iter::once(half.clone()).chain(tail).chain(std::iter::once(half)).collect()
        }
    };
    PulseSequence::new(pulses, format!("{}-sym", seq.label))
}

/// Converts a palindromic correction of `nπ` pulses plus a `π_0` main pulse
/// (at either end) into an antisymmetric `π` train.
pub fn antisymmetrize(seq: &PulseSequence) -> Result<PulseSequence> {
    let p = seq.pulses();
    if p.len() < 2 {
        return Err(invalid("antisymmetrize needs a correction and a main pulse"));
    }
    let is_main = |q: &Pulse| q.phi().is_multiple_of_two_pi();
    let (main, corr) = if is_main(&p[p.len() - 1]) {
        (&p[p.len() - 1], &p[..p.len() - 1])
    } else if is_main(&p[0]) {
        (&p[0], &p[1..])
    } else {
        return Err(invalid("no zero-phase main pulse at either end"));
    };
    if !main.is_pi() {
        return Err(Error::Unsupported(
            "the reordering identity holds only for a pi main pulse".into(),
        ));
    }
    let mut split = Vec::new();
    for q in corr {
        let c = q.theta().as_pi_multiple().unwrap_or_default();
        if !c.is_integer() || *c.numer() < 1 {
            return Err(Error::Unsupported("correction pulses must be whole multiples of pi".into()));
        }
        for _ in 0..*c.numer() {
            split.push(q.phi().clone());
        }
    }
    let m = split.len();
    if m % 2 != 0 || (0..m / 2).any(|i| !split[i].congruent(&split[m - 1 - i])) {
        return Err(invalid("correction is not a palindrome of pi pulses"));
    }
    let q = &split[..m / 2];
    let phases: Vec<Angle> = q
        .iter()
        .rev()
        .map(|a| (-a).reduced())
        .chain(std::iter::once(Angle::zero()))
        .chain(q.iter().cloned())
        .collect();
    PulseSequence::from_pi_phases(&phases, format!("{}-anti", seq.label))
}

/// Where the nominal `θ_0` pulse sits relative to a W_n correction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Placement {
    /// `θ_0` first in time.
    Front,
    /// `θ_0` last in time.
    #[default]
    Back,
    /// `θ/2` before and after the correction.
    Center,
}

impl FromStr for Placement {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "front" => Ok(Placement::Front),
            "back" => Ok(Placement::Back),
            "center" | "centre" => Ok(Placement::Center),
            _ => Err(invalid(format!("unknown placement {s:?}"))),
        }
    }
}

/// Palindromic phase list `φ_1 … φ_2n φ_2n … φ_1` of a W_n correction.
pub fn wn_correction_phases(phases: &[Angle]) -> Result<Vec<Angle>> {
    if phases.is_empty() || !phases.len().is_multiple_of(2) {
        return Err(invalid(format!(
            "W_n needs an even, nonzero number of phases, got {}",
            phases.len()
        )));
    }
    Ok(phases.iter().chain(phases.iter().rev()).cloned().collect())
}

/// `4n` `π` pulses in palindromic phase order plus `θ_0` at `placement`.
pub fn wn_assemble(theta: &Angle, phases: &[Angle], placement: Placement) -> Result<PulseSequence> {
    let corr: Vec<Pulse> = wn_correction_phases(phases)?.into_iter().map(Pulse::pi).collect();
    let n = phases.len() / 2;
    let pulses = match placement {
        Placement::Front => std::iter::once(Pulse::new(theta.clone(), Angle::zero())?).chain(corr).collect(),
        Placement::Back => corr.into_iter().chain(std::iter::once(Pulse::new(theta.clone(), Angle::zero())?)).collect(),
        Placement::Center => {
            let half = Pulse::new(theta.scale(Rational64::new(1, 2)), Angle::zero())?;
            std::iter::once(half.clone()).chain(corr).chain(std::iter::once(half)).collect()
        }
    };
    PulseSequence::new(pulses, format!("W{n}"))
}

/// Same as [`wn_assemble`] with phases in degrees.
pub fn wn_assemble_degrees(theta_deg: f64, phases_deg: &[f64], placement: Placement) -> Result<PulseSequence> {
    let theta = angle_from_degrees(theta_deg);
    let phases: Vec<Angle> = phases_deg.iter().map(|&d| angle_from_degrees(d)).collect();
    wn_assemble(&theta, &phases, placement)
}

/// Degrees to an [`Angle`]. Values with at most four decimals, such as
/// `45` or `97.2`, become exact multiples of π.
pub fn angle_from_degrees(deg: f64) -> Angle {
    if deg.is_finite() && deg.abs() < 1e9 {
        let mut scale = 1i64;
        for _ in 0..=4 {
            let x = deg * scale as f64;
            if (x - x.round()).abs() <= 1e-9 * x.abs().max(1.0) {
                return Angle::pi_frac(x.round() as i64, 180 * scale);
            }
            scale *= 10;
        }
    }
    Angle::degrees(deg)
}

/// Antisymmetric 5-pulse relative of G1, `{a, b, 0, -b, -a}`, with fidelity
/// exactly 1 at `ε = ±eps0`. Found by continuation from G1 at `eps0 = 0.5`.
pub fn g1_variant(eps0: f64) -> Result<PulseSequence> {
    if !(eps0 > 0.0 && eps0 <= 0.8) {
        return Err(invalid(format!("eps0 must lie in (0, 0.8], got {eps0}")));
    }
    let gamma = std::f64::consts::FRAC_PI_4;
    if eps0 == 0.5 {
        return Ok(family_sequence(Family::G, 1).with_label("G1(0.5)"));
    }
    let mut x = [gamma, -2.0 * gamma];
    let steps = ((eps0 - 0.5).abs() / 0.02).ceil().max(1.0) as usize;
    for s in 1..=steps {
        let e = 0.5 + (eps0 - 0.5) * s as f64 / steps as f64;
        x = crate::lsq::solve_residuals(|p| g1_residual(p, e), &x, 1e-12, 200)
            .map_err(|_| Error::Infeasible(format!("no G1 relative found at eps0 = {e}")))?
            .x
            .try_into()
            .expect("two phases");
    }
    let res = g1_residual(&x, eps0);
    if res.iter().map(|r| r * r).sum::<f64>().sqrt() > 1e-12 {
        return Err(Error::Infeasible(format!("no G1 relative found at eps0 = {eps0}")));
    }
    let ph = [x[0], x[1], 0.0, -x[1], -x[0]].map(Angle::radians);
    PulseSequence::from_pi_phases(&ph, format!("G1({eps0})"))
}

fn g1_residual(p: &[f64], eps: f64) -> Vec<f64> {
    let ph = [p[0], p[1], 0.0, -p[1], -p[0]].map(Angle::radians);
    let seq = PulseSequence::from_pi_phases(&ph, "").expect("nonempty");
    let v = crate::su2::compose_unchecked(&seq, crate::su2::ErrorParams { epsilon: eps, f: 0.0 });
    let d = v * crate::su2::ideal_target(std::f64::consts::PI, 0.0).adjoint();
    let s = if d.w < 0.0 { -1.0 } else { 1.0 };
    vec![s * d.x, s * d.y, s * d.z]
}

/// Phases as multiples of `unit` when every phase is one (mod 2π), with each
/// multiple chosen closest to zero.
pub fn phase_multiples(seq: &PulseSequence, unit: &Angle) -> Option<Vec<Rational64>> {
    let zero = Rational64::from_integer(0);
    seq.pulses()
        .iter()
        .map(|p| {
            let phi = p.phi();
            let k = if let Some((arg, c)) = unit_acos(unit) {
                phi.acos_coefficient(*arg.numer(), *arg.denom()) / c
            } else if unit.pi_coefficient() != zero {
                let raw = phi.pi_coefficient() / unit.pi_coefficient();
                // multiples of the unit that span 2π
                let turn = Rational64::from_integer(2) / unit.pi_coefficient();
                let mut k = raw;
                while k > turn / 2 {
                    k -= turn;
                }
                while k <= -turn / 2 {
                    k += turn;
                }
                k
            } else {
                return None;
            };
            phi.congruent(&unit.scale(k)).then_some(k)
        })
        .collect()
}

fn unit_acos(unit: &Angle) -> Option<(Rational64, Rational64)> {
    [(-1i64, 4i64), (-1, 8)].iter().find_map(|&(n, d)| {
        let c = unit.acos_coefficient(n, d);
        (c != Rational64::from_integer(0)).then(|| (Rational64::new(n, d), c))
    })
}
