//! Forward model of excitation and nutation experiments on an ensemble of
//! spins with a spread of RF field strengths, with optional narrowband
//! selection by a double spin echo.
//!
//! A spin whose nutation frequency is `ν` sees a pulse-strength error
//! `ν/ν₀ - 1`. Pulse-length and field-strength errors combine
//! multiplicatively. Component widths are full widths at half maximum.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::su2::{bloch_apply, compose_unchecked, ErrorParams, PulseSequence};

/// Quadrature points per Gaussian component.
pub const DEFAULT_QUADRATURE: usize = 257;
/// Half-range of the quadrature grid, in component widths.
pub const GRID_HALF_WIDTHS: f64 = 5.0;
/// Largest change between the base and refined quadrature still treated as
/// converged.
pub const CONVERGENCE_TOL: f64 = 1e-6;
pub const NOMINAL_KHZ: f64 = 25.0;
/// Default weight of the broad low-field component relative to the narrow one.
pub const DEFAULT_BROAD_WEIGHT: f64 = 0.3;

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub weight: f64,
    pub center_khz: f64,
    /// Full width at half maximum.
    pub width_khz: f64,
}

impl GaussianComponent {
    pub fn sigma(&self) -> f64 {
        self.width_khz / FWHM_PER_SIGMA
    }

    fn density(&self, nu: f64) -> f64 {
        let s = self.sigma();
        let z = (nu - self.center_khz) / s;
        (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
    }

    /// Trapezoid nodes and weights over `center ± 5 width`, clipped to
    /// positive frequencies and normalized to unit mass.
    fn nodes(&self, points: usize) -> Vec<(f64, f64)> {
        let lo = (self.center_khz - GRID_HALF_WIDTHS * self.width_khz).max(0.0);
        let hi = self.center_khz + GRID_HALF_WIDTHS * self.width_khz;
        let h = (hi - lo) / (points - 1) as f64;
        let mut out: Vec<(f64, f64)> = (0..points)
            .map(|i| {
                let nu = lo + h * i as f64;
                let end = if i == 0 || i + 1 == points { 0.5 } else { 1.0 };
                (nu, end * h * self.density(nu))
            })
            .collect();
        let mass: f64 = out.iter().map(|(_, w)| w).sum();
        for node in &mut out {
            node.1 /= mass;
        }
        out
    }
}

/// Mixture of Gaussians over nutation frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct B1Distribution {
    pub components: Vec<GaussianComponent>,
    #[serde(default = "nominal_default")]
    pub nominal_khz: f64,
}

fn nominal_default() -> f64 {
    NOMINAL_KHZ
}

impl B1Distribution {
    pub fn new(components: Vec<GaussianComponent>, nominal_khz: f64) -> Result<Self> {
        let d = B1Distribution {
            components,
            nominal_khz,
        };
        d.validate()?;
        Ok(d)
    }

    /// 25 kHz centre, 2.5 kHz width.
    pub fn narrow() -> Self {
        B1Distribution {
            components: vec![GaussianComponent {
                weight: 1.0,
                center_khz: 25.0,
                width_khz: 2.5,
            }],
            nominal_khz: NOMINAL_KHZ,
        }
    }

    /// Narrow component plus a broad one at 20 kHz, 10 kHz wide.
    pub fn two_component(broad_weight: f64) -> Self {
        let mut d = Self::narrow();
        d.components.push(GaussianComponent {
            weight: broad_weight,
            center_khz: 20.0,
            width_khz: 10.0,
        });
        d
    }

    /// Single component of negligible width at `nu` kHz.
    pub fn delta(nu: f64) -> Self {
        B1Distribution {
            components: vec![GaussianComponent {
                weight: 1.0,
                center_khz: nu,
                width_khz: 1e-9,
            }],
            nominal_khz: NOMINAL_KHZ,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(invalid("distribution needs at least one component"));
        }
        if !(self.nominal_khz > 0.0 && self.nominal_khz.is_finite()) {
            return Err(invalid("nominal frequency must be positive"));
        }
        for c in &self.components {
            if !(c.weight > 0.0 && c.width_khz > 0.0 && c.center_khz > 0.0)
                || !(c.weight.is_finite() && c.width_khz.is_finite() && c.center_khz.is_finite())
            {
                return Err(invalid(format!("bad distribution component {c:?}")));
            }
        }
        Ok(())
    }

    /// Strength error `ν/ν₀ - 1` of a frequency.
    pub fn eps_b1(&self, nu: f64) -> f64 {
        nu / self.nominal_khz - 1.0
    }

    /// Quadrature `(ν, weight)` with weights summing to one.
    pub fn quadrature(&self, points: usize) -> Vec<(f64, f64)> {
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        self.components
            .iter()
            .flat_map(|c| {
                c.nodes(points)
                    .into_iter()
                    .map(move |(nu, w)| (nu, w * c.weight / total))
            })
            .collect()
    }
}

/// Excitation observable: the `-y` component after the sequence acts on
/// `+z` with strength error `eps` and off-resonance `f`.
pub fn signal(seq: &PulseSequence, eps: f64, f: f64) -> f64 {
    let v = compose_unchecked(seq, ErrorParams { epsilon: eps, f });
    -bloch_apply(&v, [0.0, 0.0, 1.0])[1]
}

/// Net strength error from a length error and a field error.
pub fn effective_eps(eps_len: f64, eps_b1: f64) -> f64 {
    (1.0 + eps_len) * (1.0 + eps_b1) - 1.0
}

/// Fraction of spins passing `echo_count` echoes built on `filter`:
/// `((1 - m_z)/2)^echo_count` with `m_z` the z component after the filter.
pub fn dpfgse_weight(filter: &PulseSequence, eps_b1: f64, echo_count: u32) -> f64 {
    if eps_b1 <= -1.0 {
        return 0.0;
    }
    let v = compose_unchecked(filter, ErrorParams { epsilon: eps_b1, f: 0.0 });
    let mz = bloch_apply(&v, [0.0, 0.0, 1.0])[2];
    ((1.0 - mz) / 2.0).clamp(0.0, 1.0).powi(echo_count as i32)
}

/// Optional echo filter.
#[derive(Clone, Debug)]
pub struct Filter {
    pub sequence: PulseSequence,
    pub echo_count: u32,
}

impl Filter {
    pub fn new(sequence: PulseSequence) -> Self {
        Filter {
            sequence,
            echo_count: 2,
        }
    }

    fn weight(&self, eps_b1: f64) -> f64 {
        dpfgse_weight(&self.sequence, eps_b1, self.echo_count)
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub sequence: PulseSequence,
    pub eps_len: Vec<f64>,
    pub distribution: B1Distribution,
    pub filter: Option<Filter>,
    pub quadrature: usize,
}

impl ExperimentConfig {
    pub fn new(sequence: PulseSequence, eps_len: Vec<f64>, distribution: B1Distribution) -> Self {
        ExperimentConfig {
            sequence,
            eps_len,
            distribution,
            filter: None,
            quadrature: DEFAULT_QUADRATURE,
        }
    }

    pub fn with_filter(mut self, filter: Filter) -> Self {
        self.filter = Some(filter);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.distribution.validate()?;
        if self.quadrature < 64 {
            return Err(invalid("quadrature needs at least 64 points"));
        }
        if self.eps_len.iter().any(|e| !e.is_finite() || *e <= -1.0) {
            return Err(invalid("length errors must be finite and above -1"));
        }
        Ok(())
    }
}

/// Ensemble average with its quadrature check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsembleValue {
    pub value: f64,
    /// `|refined - base|` between the base and doubled quadrature.
    pub refinement_change: f64,
    /// Refinement changed the value by more than [`CONVERGENCE_TOL`].
    pub warning: bool,
}

/// Weighted mean of `g(ν)` over the surviving population at one quadrature.
fn filtered_mean(dist: &B1Distribution, filter: Option<&Filter>, points: usize, g: impl Fn(f64) -> f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (nu, w) in dist.quadrature(points) {
        let pass = filter.map_or(1.0, |f| f.weight(dist.eps_b1(nu)));
        num += w * pass * g(nu);
        den += w * pass;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn with_refinement(dist: &B1Distribution, filter: Option<&Filter>, points: usize, g: impl Fn(f64) -> f64) -> EnsembleValue {
    let base = filtered_mean(dist, filter, points, &g);
    let fine = filtered_mean(dist, filter, 2 * points - 1, &g);
    let change = (fine - base).abs();
    EnsembleValue {
        value: fine,
        refinement_change: change,
        warning: change > CONVERGENCE_TOL,
    }
}

/// Mean excitation signal over the (filtered) ensemble at one length error.
pub fn ensemble_signal(config: &ExperimentConfig, eps_len: f64) -> Result<EnsembleValue> {
    config.validate()?;
    let d = &config.distribution;
    Ok(with_refinement(d, config.filter.as_ref(), config.quadrature, |nu| {
        let e = effective_eps(eps_len, d.eps_b1(nu));
        if e <= -1.0 {
            0.0
        } else {
            signal(&config.sequence, e, 0.0)
        }
    }))
}

/// [`ensemble_signal`] over the configured grid, in parallel.
pub fn ensemble_curve(config: &ExperimentConfig) -> Result<Vec<EnsembleValue>> {
    config.validate()?;
    config.eps_len.par_iter().map(|&e| ensemble_signal(config, e)).collect()
}

/// `signal(+0.4) - signal(-0.4)`.
pub fn lean(config: &ExperimentConfig) -> Result<f64> {
    Ok(ensemble_signal(config, 0.4)?.value - ensemble_signal(config, -0.4)?.value)
}

/// Nutation signal `sin(2π ν t)` averaged over the filtered ensemble, for
/// durations in microseconds.
pub fn nutation_curve(
    durations_us: &[f64],
    dist: &B1Distribution,
    filter: Option<&Filter>,
    quadrature: usize,
) -> Result<Vec<EnsembleValue>> {
    dist.validate()?;
    if quadrature < 64 {
        return Err(invalid("quadrature needs at least 64 points"));
    }
    Ok(durations_us
        .par_iter()
        .map(|&t| {
            with_refinement(dist, filter, quadrature, |nu| {
                (2.0 * std::f64::consts::PI * nu * t * 1e-3).sin()
            })
        })
        .collect())
}

/// Relative residual `Σ(y - A m)² / Σ y²` of the best amplitude fit of
/// `model` to `data`.
pub fn amplitude_fit_residual(data: &[f64], model: &[f64]) -> f64 {
    let ym: f64 = data.iter().zip(model).map(|(y, m)| y * m).sum();
    let mm: f64 = model.iter().map(|m| m * m).sum();
    let yy: f64 = data.iter().map(|y| y * y).sum();
    let a = if mm > 0.0 { ym / mm } else { 0.0 };
    let rss: f64 = data.iter().zip(model).map(|(y, m)| (y - a * m).powi(2)).sum();
    rss / yy
}

/// Durations `0, 1, …, 127` µs.
pub fn default_durations() -> Vec<f64> {
    (0..128).map(f64::from).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{family_sequence, Family};
    use crate::su2::Pulse;
    use std::f64::consts::PI;

    fn naive90() -> PulseSequence {
        PulseSequence::single(Pulse::from_degrees(90.0, 0.0).unwrap())
    }

    #[test]
    fn naive_signal_closed_form() {
        for e in [-0.6, -0.1, 0.0, 0.3, 0.8] {
            assert!((signal(&naive90(), e, 0.0) - ((1.0 + e) * PI / 2.0).sin()).abs() < 1e-14);
        }
        assert!((signal(&naive90(), 0.0, 0.0) - 1.0).abs() < 1e-15);
        assert!(signal(&naive90(), 1.0, 0.0).abs() < 1e-15);
    }

    #[test]
    fn combined_errors() {
        assert_eq!(effective_eps(0.0, 0.25), 0.25);
        assert_eq!(effective_eps(0.25, 0.0), 0.25);
        assert!((effective_eps(0.1, -0.2) + 0.12).abs() < 1e-15);
    }

    #[test]
    fn filter_weights() {
        let pi = PulseSequence::single(Pulse::from_degrees(180.0, 0.0).unwrap());
        assert!((dpfgse_weight(&pi, 0.0, 2) - 1.0).abs() < 1e-15);
        let n2 = family_sequence(Family::N, 2);
        assert!((dpfgse_weight(&n2, 0.0, 2) - 1.0).abs() < 1e-12);
        assert!(dpfgse_weight(&n2, 0.3, 2) < 0.05 && dpfgse_weight(&n2, -0.3, 2) < 0.05);
        let f2 = family_sequence(Family::F, 2);
        for e in [-0.4, -0.2, 0.2, 0.4] {
            assert!(dpfgse_weight(&f2, e, 2) > 0.99);
        }
        let w1 = dpfgse_weight(&n2, 0.17, 1);
        assert!((dpfgse_weight(&n2, 0.17, 2) - w1 * w1).abs() < 1e-15);
    }

    #[test]
    fn delta_distribution_is_pointwise() {
        let cfg = ExperimentConfig::new(naive90(), vec![], B1Distribution::delta(25.0));
        for e in [-0.3, 0.2] {
            let v = ensemble_signal(&cfg, e).unwrap();
            assert!((v.value - signal(&naive90(), e, 0.0)).abs() < 1e-6);
        }
        let nut = nutation_curve(&[10.0], &B1Distribution::delta(25.0), None, 257).unwrap();
        assert!((nut[0].value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn quadrature_mass_is_one() {
        let q = B1Distribution::two_component(0.3).quadrature(257);
        let m: f64 = q.iter().map(|(_, w)| w).sum();
        assert!((m - 1.0).abs() < 1e-12);
        assert!(q.iter().all(|(nu, _)| *nu >= 0.0));
    }

    #[test]
    fn validation() {
        let mut d = B1Distribution::narrow();
        d.components[0].width_khz = 0.0;
        assert!(d.validate().is_err());
        let mut cfg = ExperimentConfig::new(naive90(), vec![0.0], B1Distribution::narrow());
        cfg.quadrature = 10;
        assert!(ensemble_signal(&cfg, 0.0).is_err());
    }
}
