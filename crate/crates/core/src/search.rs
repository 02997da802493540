//! Multi-start search for W_n correction phases and high-precision
//! certification of the solutions.
//!
//! The objective is `Σ_{k=1}^{2n} c_{2k}²` over the even infidelity
//! coefficients. Local minimization works on the error vector of `V U†`
//! instead (coefficients of `ε^1 … ε^{2n}`), whose zeros are exactly the
//! zeros of the objective and which is smooth where the objective is flat.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angle::Angle;
use crate::error::{invalid, Error, Result};
use crate::families::{angle_from_degrees, wn_assemble, wn_correction_phases, Placement};
use crate::lsq::{gauss_newton, levenberg_marquardt};
use crate::real::{Big, Real};
use crate::series::{compose_raw, infidelity_from_rotor, infidelity_series_f64, leading_term, LeadingTerm, Target};
use crate::su2::Pulse;

pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_TOL: f64 = 1e-18;
/// Phase agreement, in degrees, below which two solutions are one class.
pub const DEDUP_DEGREES: f64 = 0.5;
pub const CERTIFY_BITS: u32 = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchProblem {
    pub n: usize,
    pub theta_degrees: f64,
    pub starts: usize,
    pub seed: u64,
    pub tol: f64,
    #[serde(default = "default_placement")]
    pub placement: String,
}

fn default_placement() -> String {
    "center".into()
}

impl SearchProblem {
    /// Problem with the default seed, tolerance and a start budget that
    /// grows with `n`.
    pub fn new(n: usize, theta_degrees: f64) -> Self {
        SearchProblem {
            n,
            theta_degrees,
            starts: default_starts(n),
            seed: DEFAULT_SEED,
            tol: DEFAULT_TOL,
            placement: default_placement(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(invalid("W_n level must be at least 1"));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(invalid("tolerance must be positive"));
        }
        if !(self.theta_degrees > 0.0 && self.theta_degrees.is_finite()) {
            return Err(invalid("target angle must be positive"));
        }
        if self.starts == 0 {
            return Err(invalid("at least one start is required"));
        }
        self.placement.parse::<Placement>()?;
        Ok(())
    }

    pub fn theta(&self) -> Angle {
        angle_from_degrees(self.theta_degrees)
    }

    fn target(&self) -> Target {
        Target::Pulse(Pulse::new(self.theta(), Angle::zero()).expect("validated"))
    }
}

/// Default number of random starts for level `n`.
pub fn default_starts(n: usize) -> usize {
    match n {
        1 => 100,
        2 => 1000,
        _ => 20_000,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSolution {
    /// `2n` phases in degrees, in `[0, 360)`, with `φ_1 < 180`.
    pub phases_degrees: Vec<f64>,
    pub objective_value: f64,
    pub certified_order: Option<usize>,
    pub residual_coefficient: Option<f64>,
    /// Number of starts that landed in this class.
    pub hits: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SearchReport {
    pub problem: SearchProblem,
    pub solutions: Vec<SearchSolution>,
    /// Converged minima that failed certification.
    pub demoted: Vec<SearchSolution>,
    pub best_objective: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

fn assemble(theta: &Angle, phases_rad: &[f64], placement: Placement) -> crate::su2::PulseSequence {
    let ph: Vec<Angle> = phases_rad.iter().map(|&p| Angle::radians(p)).collect();
    wn_assemble(theta, &ph, placement).expect("even phase count")
}

/// `Σ_{k=1}^{2n} c_{2k}²` at double precision with truncation order `4n+2`.
pub fn objective(phases_rad: &[f64], theta: &Angle, n: usize) -> f64 {
    objective_with(phases_rad, theta, n, Placement::Center)
}

pub fn objective_with(phases_rad: &[f64], theta: &Angle, n: usize, placement: Placement) -> f64 {
    assert_eq!(phases_rad.len(), 2 * n, "W_n takes 2n phases");
    let seq = assemble(theta, phases_rad, placement);
    let target = Target::Pulse(Pulse::new(theta.clone(), Angle::zero()).expect("positive"));
    let s = infidelity_series_f64(&seq, &target, 0.0, 4 * n + 2).expect("valid order");
    (1..=2 * n).map(|k| s.coeff(2 * k).powi(2)).sum()
}

/// `(θ, φ)` pairs of the assembled sequence at working precision.
fn raw_pulses<T: Real>(theta: &T, phases: &[T], placement: Placement, bits: u32) -> Vec<(T, T)> {
    let pi = T::pi_prec(bits);
    let zero = T::from_f64_prec(0.0, bits);
    let corr = phases.iter().chain(phases.iter().rev()).map(|p| (pi.clone(), p.clone()));
    match placement {
        Placement::Front => std::iter::once((theta.clone(), zero)).chain(corr).collect(),
        Placement::Back => corr.chain(std::iter::once((theta.clone(), zero))).collect(),
        Placement::Center => {
            let half = (theta.mul(&T::from_ratio_prec(1, 2, bits)), zero);
            std::iter::once(half.clone()).chain(corr).chain(std::iter::once(half)).collect()
        }
    }
}

/// Coefficients of `ε^1 … ε^{2n}` of the vector part of `V U†`.
fn error_residuals<T: Real>(theta: &T, phases: &[T], target: &Target, placement: Placement, bits: u32) -> Vec<T> {
    let n = phases.len() / 2;
    let pulses = raw_pulses(theta, phases, placement, bits);
    let v = compose_raw(&pulses, &T::from_f64_prec(0.0, bits), 2 * n, bits);
    let [_, x, y, z] = v.relative_to(&target.to_const::<T>(bits));
    (1..=2 * n)
        .flat_map(|k| [x.coeff(k).clone(), y.coeff(k).clone(), z.coeff(k).clone()])
        .collect()
}

/// Allocation-free double-precision residuals for the search loop. Mirrors
/// `error_residuals::<f64>` with fixed-size coefficient arrays.
mod fast {
    pub const MAX_TERMS: usize = 32;

    type Ser = [f64; MAX_TERMS];

    #[derive(Clone, Copy)]
    struct Factors {
        cos: Ser,
        sin: Ser,
    }

    fn factors(theta: f64, order: usize) -> Factors {
        let h = theta / 2.0;
        let (ca, sa) = (h.cos(), h.sin());
        let mut f = Factors {
            cos: [0.0; MAX_TERMS],
            sin: [0.0; MAX_TERMS],
        };
        let mut t = 1.0;
        for k in 0..=order {
            if k > 0 {
                t *= h / k as f64;
            }
            let (ck, sk) = match k % 4 {
                0 => (ca, sa),
                1 => (-sa, ca),
                2 => (-ca, -sa),
                _ => (sa, -ca),
            };
            f.cos[k] = t * ck;
            f.sin[k] = t * sk;
        }
        f
    }

    /// `out = a·x - b·y` truncated at `order`.
    #[inline]
    fn mul_sub(a: &Ser, x: &Ser, b: &Ser, y: &Ser, order: usize) -> Ser {
        let mut out = [0.0; MAX_TERMS];
        for k in 0..=order {
            let mut acc = 0.0;
            for i in 0..=k {
                acc += a[i] * x[k - i] - b[i] * y[k - i];
            }
            out[k] = acc;
        }
        out
    }

    #[inline]
    fn mul_add(a: &Ser, x: &Ser, b: &Ser, y: &Ser, order: usize) -> Ser {
        let mut out = [0.0; MAX_TERMS];
        for k in 0..=order {
            let mut acc = 0.0;
            for i in 0..=k {
                acc += a[i] * x[k - i] + b[i] * y[k - i];
            }
            out[k] = acc;
        }
        out
    }

    pub struct Evaluator {
        order: usize,
        main: Factors,
        half: Factors,
        pi: Factors,
        /// Target `(w, x, y, z)`.
        u: [f64; 4],
        placement: super::Placement,
    }

    impl Evaluator {
        pub fn new(theta: f64, target_phi: f64, order: usize, placement: super::Placement) -> Self {
            assert!(order < MAX_TERMS, "order too high for the fast path");
            let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
            Evaluator {
                order,
                main: factors(theta, order),
                half: factors(theta / 2.0, order),
                pi: factors(std::f64::consts::PI, order),
                u: [c, -s * target_phi.cos(), -s * target_phi.sin(), 0.0],
                placement,
            }
        }

        /// Residuals into `out` (length `3·order`).
        pub fn residuals(&self, phases: &[f64], out: &mut [f64]) {
            let o = self.order;
            let mut ar = [0.0; MAX_TERMS];
            let mut ai = [0.0; MAX_TERMS];
            let mut br = [0.0; MAX_TERMS];
            let mut bi = [0.0; MAX_TERMS];
            ar[0] = 1.0;
            let mut apply = |f: &Factors, phi: f64| {
                let (er, ei) = (phi.sin(), -phi.cos());
                // ē β and e α
                let mut ebr = [0.0; MAX_TERMS];
                let mut ebi = [0.0; MAX_TERMS];
                let mut ear = [0.0; MAX_TERMS];
                let mut eai = [0.0; MAX_TERMS];
                for k in 0..=o {
                    ebr[k] = br[k] * er + bi[k] * ei;
                    ebi[k] = bi[k] * er - br[k] * ei;
                    ear[k] = ar[k] * er - ai[k] * ei;
                    eai[k] = ar[k] * ei + ai[k] * er;
                }
                let nar = mul_sub(&f.cos, &ar, &f.sin, &ebr, o);
                let nai = mul_sub(&f.cos, &ai, &f.sin, &ebi, o);
                let nbr = mul_add(&f.sin, &ear, &f.cos, &br, o);
                let nbi = mul_add(&f.sin, &eai, &f.cos, &bi, o);
                ar = nar;
                ai = nai;
                br = nbr;
                bi = nbi;
            };
            use super::Placement::*;
            match self.placement {
                Front => apply(&self.main, 0.0),
                Center => apply(&self.half, 0.0),
                Back => {}
            }
            for &p in phases.iter().chain(phases.iter().rev()) {
                apply(&self.pi, p);
            }
            match self.placement {
                Back => apply(&self.main, 0.0),
                Center => apply(&self.half, 0.0),
                Front => {}
            }
            let [uw, ux, uy, uz] = self.u;
            // V = (Re α, Im β, -Re β, Im α), multiplied by U† = (uw, -u)
            let (ux, uy, uz) = (-ux, -uy, -uz);
            let w0 = ar[0] * uw - bi[0] * ux + br[0] * uy - ai[0] * uz;
            let sign = if w0 < 0.0 { -1.0 } else { 1.0 };
            for k in 1..=o {
                let (vw, vx, vy, vz) = (ar[k], bi[k], -br[k], ai[k]);
                let x = vw * ux + vx * uw - (vy * uz - vz * uy);
                let y = vw * uy + vy * uw - (vz * ux - vx * uz);
                let z = vw * uz + vz * uw - (vx * uy - vy * ux);
                out[3 * (k - 1)] = sign * x;
                out[3 * (k - 1) + 1] = sign * y;
                out[3 * (k - 1) + 2] = sign * z;
            }
        }
    }
}

fn local_minimize(theta: f64, x0: &[f64], target: &Target, placement: Placement) -> Vec<f64> {
    let order = x0.len();
    let phi = match target {
        Target::Pulse(p) if order < fast::MAX_TERMS && p.theta_rad() == theta => p.phi_rad(),
        _ => {
            let f = |p: &[f64]| error_residuals::<f64>(&theta, p, target, placement, 53);
            return levenberg_marquardt(f, x0, 1e-30, 300).x;
        }
    };
    let ev = fast::Evaluator::new(theta, phi, order, placement);
    let f = |p: &[f64]| {
        let mut r = vec![0.0; 3 * order];
        ev.residuals(p, &mut r);
        r
    };
    levenberg_marquardt(f, x0, 1e-30, 300).x
}

/// Local minimization from given phases (degrees); returns canonical phases
/// in degrees and the objective there.
pub fn refine_phases(theta_degrees: f64, phases_degrees: &[f64], placement: Placement) -> Result<(Vec<f64>, f64)> {
    if phases_degrees.is_empty() || !phases_degrees.len().is_multiple_of(2) {
        return Err(invalid("W_n takes an even, nonzero number of phases"));
    }
    let theta = angle_from_degrees(theta_degrees);
    let target = Target::Pulse(Pulse::new(theta.clone(), Angle::zero())?);
    let x0: Vec<f64> = phases_degrees.iter().map(|d| d.to_radians()).collect();
    let x = local_minimize(theta.value(), &x0, &target, placement);
    let obj = objective_with(&x, &theta, x.len() / 2, placement);
    Ok((canonical_degrees(&x), obj))
}

fn canonical_degrees(phases_rad: &[f64]) -> Vec<f64> {
    let deg: Vec<f64> = phases_rad.iter().map(|p| p.to_degrees().rem_euclid(360.0)).collect();
    let neg: Vec<f64> = deg.iter().map(|d| (360.0 - d).rem_euclid(360.0)).collect();
    // representative of the negation class with φ_1 in [0, 180)
    let pick = if deg[0] < 180.0 { deg } else { neg };
    pick.into_iter().map(|d| if d >= 360.0 - 1e-12 { 0.0 } else { d }).collect()
}

fn circ_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Largest per-phase circular distance between two phase lists, minimized
/// over the negation symmetry.
pub fn class_distance(a: &[f64], b: &[f64]) -> f64 {
    let direct = a.iter().zip(b).map(|(x, y)| circ_diff(*x, *y)).fold(0.0, f64::max);
    let negated = a.iter().zip(b).map(|(x, y)| circ_diff(-x, *y)).fold(0.0, f64::max);
    direct.min(negated)
}

/// Per-start generator, independent of scheduling.
fn start_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Multi-start search; solution classes sorted by their first phase.
pub fn search(problem: &SearchProblem) -> Result<SearchReport> {
    problem.validate()?;
    let placement: Placement = problem.placement.parse()?;
    let theta = problem.theta();
    let theta_f = theta.value();
    let target = problem.target();
    let m = 2 * problem.n;

    let minima: Vec<(Vec<f64>, f64)> = (0..problem.starts)
        .into_par_iter()
        .map(|i| {
            let mut rng = start_rng(problem.seed, i);
            let x0: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
            let x = local_minimize(theta_f, &x0, &target, placement);
            let obj = objective_with(&x, &theta, problem.n, placement);
            (x, obj)
        })
        .collect();

    let best_objective = minima.iter().map(|(_, o)| *o).fold(f64::INFINITY, f64::min);
    let mut classes: Vec<(Vec<f64>, Vec<f64>, f64, usize)> = Vec::new();
    for (x, obj) in minima.into_iter().filter(|(_, o)| *o < problem.tol) {
        let deg = canonical_degrees(&x);
        match classes.iter_mut().find(|c| class_distance(&c.0, &deg) < DEDUP_DEGREES) {
            Some(c) => {
                c.3 += 1;
                if obj < c.2 {
                    (c.0, c.1, c.2) = (deg, x, obj);
                }
            }
            None => classes.push((deg, x, obj, 1)),
        }
    }
    classes.sort_by(|a, b| a.0[0].total_cmp(&b.0[0]));

    let mut solutions = Vec::new();
    let mut demoted = Vec::new();
    for (deg, _, obj, hits) in classes {
        let mut sol = SearchSolution {
            phases_degrees: deg,
            objective_value: obj,
            certified_order: None,
            residual_coefficient: None,
            hits,
        };
        match certify_with(&sol, problem.theta_degrees, placement, CERTIFY_BITS) {
            Ok(lt) if lt.order >= 4 * problem.n + 2 => {
                sol.certified_order = Some(lt.order);
                sol.residual_coefficient = Some(lt.numerical_value);
                solutions.push(sol);
            }
            Ok(lt) => {
                sol.certified_order = Some(lt.order);
                sol.residual_coefficient = Some(lt.numerical_value);
                demoted.push(sol);
            }
            Err(_) => demoted.push(sol),
        }
    }
    Ok(SearchReport {
        problem: problem.clone(),
        solutions,
        demoted,
        best_objective,
        wall_time_s: None,
    })
}

/// Like [`search`], but an empty result is an error carrying the best
/// objective reached.
pub fn search_nonempty(problem: &SearchProblem) -> Result<SearchReport> {
    let report = search(problem)?;
    if report.solutions.is_empty() {
        return Err(Error::SearchExhausted {
            best_objective: report.best_objective,
        });
    }
    Ok(report)
}

/// Refines the phases at `bits` precision and returns the leading term of the
/// infidelity of the assembled pulse.
pub fn certify(solution: &SearchSolution, theta_degrees: f64, bits: u32) -> Result<LeadingTerm> {
    certify_with(solution, theta_degrees, Placement::Center, bits)
}

pub fn certify_with(solution: &SearchSolution, theta_degrees: f64, placement: Placement, bits: u32) -> Result<LeadingTerm> {
    let phases: Vec<Big> = solution
        .phases_degrees
        .iter()
        .map(|d| Big::new(d.to_radians(), bits))
        .collect();
    let (polished, theta) = polish(&phases, theta_degrees, placement, bits)?;
    let n = phases.len() / 2;
    let target = Target::Pulse(Pulse::new(angle_from_degrees(theta_degrees), Angle::zero())?);
    let order = 4 * n + 6;
    let pulses = raw_pulses(&theta, &polished, placement, bits);
    let v = compose_raw(&pulses, &Big::new(0.0, bits), order, bits);
    let s = infidelity_from_rotor(&v, &target, bits)?;
    leading_term(&s, s.zero_tol())
}

/// Gauss–Newton on the error-vector residuals at `bits` precision.
pub fn polish(phases: &[Big], theta_degrees: f64, placement: Placement, bits: u32) -> Result<(Vec<Big>, Big)> {
    if phases.is_empty() || !phases.len().is_multiple_of(2) {
        return Err(invalid("W_n takes an even, nonzero number of phases"));
    }
    let theta_a = angle_from_degrees(theta_degrees);
    let theta: Big = theta_a.eval(bits);
    let target = Target::Pulse(Pulse::new(theta_a, Angle::zero())?);
    let h = Big::new((-(bits as f64) / 3.0).exp2(), bits);
    let f = |p: &[Big]| error_residuals(&theta, p, &target, placement, bits);
    let (x, norm) = gauss_newton(f, phases, &h, 40);
    if norm.is_nan() || norm >= 1e-6 {
        return Err(Error::NonConvergence(format!("phase polish stalled at residual {norm:e}")));
    }
    Ok((x, theta))
}

/// Assembled W_n sequence of a solution.
pub fn solution_sequence(solution: &SearchSolution, theta_degrees: f64, placement: Placement) -> Result<crate::su2::PulseSequence> {
    let phases: Vec<Angle> = solution.phases_degrees.iter().map(|&d| Angle::degrees(d)).collect();
    let _ = wn_correction_phases(&phases)?;
    wn_assemble(&angle_from_degrees(theta_degrees), &phases, placement)
}
