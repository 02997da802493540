//! Fidelity scans over the error plane, contour extraction, perfect-point
//! location and the off-resonance sensitivity at zero strength error.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::real::{Big, Real};
use crate::series::{infidelity_generic, leading_term, Target};
use crate::su2::{compose_unchecked, fidelity, infidelity, ErrorParams, PulseSequence};

/// Contour levels drawn by default.
pub const DEFAULT_LEVELS: [f64; 3] = [0.9, 0.99, 0.999];
/// Infidelity bound a perfect point must meet at 256 bits.
pub const PERFECT_BOUND: f64 = 1e-20;
pub const PERFECT_BITS: u32 = 256;

/// Inclusive range `start:stop:step`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Range {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 || stop < start {
            return Err(invalid(format!("bad range {start}:{stop}:{step}")));
        }
        Ok(Range { start, stop, step })
    }

    /// Single point.
    pub fn point(x: f64) -> Self {
        Range {
            start: x,
            stop: x,
            step: 1.0,
        }
    }

    /// Grid values. When `start` is a whole number of steps the values are
    /// `k·step`, or `k/m` when `step = 1/m`, which keeps decimal grids like
    /// `0.2` and `-0.85` free of drift.
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        let k0 = (self.start / self.step).round();
        let m = (1.0 / self.step).round();
        if (self.start / self.step - k0).abs() < 1e-9 {
            if m >= 1.0 && (1.0 / self.step - m).abs() < 1e-9 {
                (0..=n).map(|i| (k0 + i as f64) / m).collect()
            } else {
                (0..=n).map(|i| (k0 + i as f64) * self.step).collect()
            }
        } else {
            (0..=n).map(|i| self.start + i as f64 * self.step).collect()
        }
    }
}

impl std::str::FromStr for Range {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| invalid(format!("bad number {t:?} in range {s:?}")));
        match parts.as_slice() {
            [a] => Ok(Range::point(num(a)?)),
            [a, b, c] => Range::new(num(a)?, num(b)?, num(c)?),
            _ => Err(invalid(format!("range must be A:B:STEP, got {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanPoint {
    pub epsilon: f64,
    pub f: f64,
    pub fidelity: f64,
    pub infidelity: f64,
}

fn point(seq: &PulseSequence, u: &crate::su2::Rotor, eps: f64, f: f64) -> ScanPoint {
    let v = compose_unchecked(seq, ErrorParams { epsilon: eps, f });
    ScanPoint {
        epsilon: eps,
        f,
        fidelity: fidelity(&v, u),
        infidelity: infidelity(&v, u),
    }
}

fn check_eps(eps: &[f64]) -> Result<()> {
    if eps.iter().any(|e| *e <= -1.0) {
        return Err(invalid("strength errors must exceed -1"));
    }
    Ok(())
}

/// Fidelity along `ε` at fixed off-resonance `f`.
pub fn scan1d(seq: &PulseSequence, target: &Target, eps: &Range, f: f64) -> Result<Vec<ScanPoint>> {
    let grid = eps.values();
    check_eps(&grid)?;
    let u = target.rotor();
    Ok(grid.par_iter().map(|&e| point(seq, &u, e, f)).collect())
}

/// Fidelity on an `ε × f` grid.
#[derive(Clone, Debug, Serialize)]
pub struct Grid2d {
    pub eps: Vec<f64>,
    pub f: Vec<f64>,
    /// `fidelity[j][i]` at `(eps[i], f[j])`.
    pub fidelity: Vec<Vec<f64>>,
}

pub fn scan2d(seq: &PulseSequence, target: &Target, eps: &Range, f: &Range) -> Result<Grid2d> {
    let (ev, fv) = (eps.values(), f.values());
    check_eps(&ev)?;
    let u = target.rotor();
    let fidelity = fv
        .par_iter()
        .map(|&ff| ev.iter().map(|&e| point(seq, &u, e, ff).fidelity).collect())
        .collect();
    Ok(Grid2d { eps: ev, f: fv, fidelity })
}

/// One contour polyline; closed when the first and last vertices coincide.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Contour {
    pub level: f64,
    pub points: Vec<(f64, f64)>,
}

/// Grid edge: `(i, j, vertical)` starts at node `(i, j)`.
type EdgeId = (usize, usize, bool);

/// Marching squares on the grid; segments are joined into polylines.
pub fn contours(grid: &Grid2d, level: f64) -> Vec<Contour> {
    let (nx, ny) = (grid.eps.len(), grid.f.len());
    if nx < 2 || ny < 2 {
        return Vec::new();
    }
    let v = |i: usize, j: usize| grid.fidelity[j][i];
    let above = |i: usize, j: usize| v(i, j) >= level;
    let vertex = |e: EdgeId| -> (f64, f64) {
        let (i, j, vert) = e;
        let (i2, j2) = if vert { (i, j + 1) } else { (i + 1, j) };
        let (a, b) = (v(i, j), v(i2, j2));
        let t = if b != a { ((level - a) / (b - a)).clamp(0.0, 1.0) } else { 0.5 };
        (
            grid.eps[i] + t * (grid.eps[i2] - grid.eps[i]),
            grid.f[j] + t * (grid.f[j2] - grid.f[j]),
        )
    };

    let mut segs: Vec<(EdgeId, EdgeId)> = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            // corners counter-clockwise from (i, j)
            let bits = (above(i, j) as u8) | (above(i + 1, j) as u8) << 1 | (above(i + 1, j + 1) as u8) << 2 | (above(i, j + 1) as u8) << 3;
            let bottom = (i, j, false);
            let right = (i + 1, j, true);
            let top = (i, j + 1, false);
            let left = (i, j, true);
            let centre_above = (v(i, j) + v(i + 1, j) + v(i + 1, j + 1) + v(i, j + 1)) / 4.0 >= level;
            match bits {
                0 | 15 => {}
                1 | 14 => segs.push((left, bottom)),
                2 | 13 => segs.push((bottom, right)),
                3 | 12 => segs.push((left, right)),
                4 | 11 => segs.push((right, top)),
                6 | 9 => segs.push((bottom, top)),
                7 | 8 => segs.push((left, top)),
                5 => {
                    if centre_above {
                        segs.push((left, top));
                        segs.push((bottom, right));
                    } else {
                        segs.push((left, bottom));
                        segs.push((right, top));
                    }
                }
                10 => {
                    if centre_above {
                        segs.push((left, bottom));
                        segs.push((right, top));
                    } else {
                        segs.push((left, top));
                        segs.push((bottom, right));
                    }
                }
                _ => unreachable!(),
            }
        }
    }

    let mut adj: HashMap<EdgeId, Vec<usize>> = HashMap::new();
    for (k, (a, b)) in segs.iter().enumerate() {
        adj.entry(*a).or_default().push(k);
        adj.entry(*b).or_default().push(k);
    }
    let mut used = vec![false; segs.len()];
    let mut out = Vec::new();
    let walk = |start_seg: usize, from: EdgeId, used: &mut Vec<bool>| -> Vec<(f64, f64)> {
        let mut pts = vec![vertex(from)];
        let (mut seg, mut at) = (start_seg, from);
        loop {
            used[seg] = true;
            let (a, b) = segs[seg];
            let next = if a == at { b } else { a };
            pts.push(vertex(next));
            at = next;
            match adj[&at].iter().find(|&&s| !used[s]) {
                Some(&s) => seg = s,
                None => break,
            }
        }
        pts
    };
    // open lines start at edges touched by a single segment; sort for
    // deterministic output
    let mut ends: Vec<EdgeId> = adj.iter().filter(|(_, s)| s.len() == 1).map(|(e, _)| *e).collect();
    ends.sort();
    for e in ends {
        let s = adj[&e][0];
        if !used[s] {
            out.push(Contour {
                level,
                points: walk(s, e, &mut used),
            });
        }
    }
    for s in 0..segs.len() {
        if !used[s] {
            let start = segs[s].0;
            out.push(Contour {
                level,
                points: walk(s, start, &mut used),
            });
        }
    }
    out
}

/// Bilinear interpolation of the grid fidelity at `(eps, f)`.
pub fn interpolate(grid: &Grid2d, eps: f64, f: f64) -> f64 {
    let locate = |axis: &[f64], x: f64| -> (usize, f64) {
        let n = axis.len();
        let mut k = axis.partition_point(|a| *a <= x).saturating_sub(1).min(n - 2);
        if n < 2 {
            k = 0;
        }
        let t = ((x - axis[k]) / (axis[k + 1] - axis[k])).clamp(0.0, 1.0);
        (k, t)
    };
    let (i, s) = locate(&grid.eps, eps);
    let (j, t) = locate(&grid.f, f);
    let g = &grid.fidelity;
    (1.0 - s) * (1.0 - t) * g[j][i] + s * (1.0 - t) * g[j][i + 1] + s * t * g[j + 1][i + 1] + (1.0 - s) * t * g[j + 1][i]
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerfectPoint {
    pub epsilon: f64,
    /// Local infidelity order, `None` when no coefficient cleared tolerance
    /// through the expansion order.
    pub order: Option<usize>,
    /// Infidelity at the located point, evaluated at 256 bits.
    pub infidelity: f64,
    pub verified: bool,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct PerfectPointReport {
    pub verified: Vec<PerfectPoint>,
    pub near_perfect: Vec<PerfectPoint>,
}

#[derive(Clone, Copy, Debug)]
pub struct PerfectPointOptions {
    pub range: (f64, f64),
    pub coarse_step: f64,
    /// Expansion order used to read off the local order.
    pub order: usize,
    pub bits: u32,
    /// Coarse minima above this infidelity are not refined.
    pub candidate_bound: f64,
}

impl Default for PerfectPointOptions {
    fn default() -> Self {
        PerfectPointOptions {
            range: (-0.99, 0.99),
            coarse_step: 1e-3,
            order: 24,
            bits: PERFECT_BITS,
            candidate_bound: 1e-2,
        }
    }
}

/// Locates `ε` values where the fidelity reaches one.
pub fn perfect_points(seq: &PulseSequence, target: &Target, opts: &PerfectPointOptions) -> Result<PerfectPointReport> {
    let (lo, hi) = opts.range;
    if !(lo > -1.0 && hi > lo) {
        return Err(invalid(format!("bad search range {lo}..{hi}")));
    }
    let coarse = scan1d(seq, target, &Range::new(lo, hi, opts.coarse_step)?, 0.0)?;
    let cands = coarse_candidates(&coarse, opts.candidate_bound);
    let refined: Vec<PerfectPoint> = cands
        .par_iter()
        .map(|&c| refine_point(seq, target, c, opts))
        .collect::<Result<Vec<_>>>()?;

    let mut report = PerfectPointReport::default();
    let mut all: Vec<PerfectPoint> = Vec::new();
    for p in refined {
        if p.epsilon < lo - opts.coarse_step || p.epsilon > hi + opts.coarse_step {
            continue;
        }
        if all.iter().any(|q| (q.epsilon - p.epsilon).abs() < 1e-7) {
            continue;
        }
        all.push(p);
    }
    all.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
    for p in all {
        if p.verified {
            report.verified.push(p);
        } else {
            report.near_perfect.push(p);
        }
    }
    Ok(report)
}

/// Local minima of the coarse infidelity; runs of values at the rounding
/// floor collapse to their midpoint.
fn coarse_candidates(scan: &[ScanPoint], bound: f64) -> Vec<f64> {
    let floor = 1e-14;
    let n = scan.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let v = scan[i].infidelity;
        if v < floor {
            let start = i;
            while i + 1 < n && scan[i + 1].infidelity < floor {
                i += 1;
            }
            out.push((scan[start].epsilon + scan[i].epsilon) / 2.0);
        } else if v < bound {
            let left = i == 0 || scan[i - 1].infidelity >= v;
            let right = i + 1 == n || scan[i + 1].infidelity > v;
            if left && right {
                out.push(scan[i].epsilon);
            }
        }
        i += 1;
    }
    out
}

fn series_about(seq: &PulseSequence, target: &Target, c: &Big, order: usize, bits: u32) -> Result<crate::series::EpsSeries<Big>> {
    infidelity_generic(seq, target, c, order, bits)
}

/// Locates the zero near `start` and reads off its local order.
///
/// A zero of multiplicity `m` is only resolvable to about `2^(-bits/m)` from
/// the infidelity itself, which leaves spurious low-order terms in the local
/// expansion. The multiplicity is estimated while the iterate is still far
/// enough away for `a0, a1, a2` to be accurate, and the location is finished
/// by Newton on the `(m-1)`-th derivative, whose zero is simple.
fn refine_point(seq: &PulseSequence, target: &Target, start: f64, opts: &PerfectPointOptions) -> Result<PerfectPoint> {
    let bits = opts.bits;
    let fine = (-(bits as f64) * 0.9).exp2();
    let clamp = |step: Big| {
        let sf = step.to_f64();
        (if sf.abs() > 0.05 { Big::new(0.05f64.copysign(sf), bits) } else { step }, sf.abs())
    };
    let mut c = Big::new(start, bits);
    let mut mult: Option<f64> = None;

    // step on I/I', which converges for any multiplicity; near a zero of
    // multiplicity m, a1^2 / (a1^2 - 2 a0 a2) -> m
    for _ in 0..60 {
        let s = series_about(seq, target, &c, 2, bits)?;
        let (a0, a1, a2) = (s.coeff(0), s.coeff(1), s.coeff(2));
        let noise = s.scale_log2().max(0.0) - bits as f64;
        if a0.log2_abs() < noise + 32.0 {
            break;
        }
        let den = a1.mul(a1).sub(&a0.mul(a2).mul_f64(2.0));
        if den.is_zero() {
            break;
        }
        if a0.log2_abs() > noise + 96.0 {
            mult = Some(a1.mul(a1).div(&den).to_f64());
        }
        let (step, size) = clamp(a0.mul(a1).div(&den).neg());
        c = c.add(&step);
        if size < fine {
            break;
        }
    }

    let s = series_about(seq, target, &c, opts.order, bits)?;
    let m = match mult {
        Some(m) if m.is_finite() && m > 0.0 => ((m / 2.0).round().max(1.0) as usize) * 2,
        // already at the rounding floor
        _ => floor_multiplicity(&s, bits),
    };
    let mut best = (c.clone(), s.coeff(0).abs());
    if m > 2 && m <= opts.order {
        for _ in 0..40 {
            let t = series_about(seq, target, &c, m, bits)?;
            let (lo, hi) = (t.coeff(m - 1), t.coeff(m));
            if hi.is_zero() {
                break;
            }
            let (step, size) = clamp(lo.div(&hi.mul_f64(m as f64)).neg());
            if size > 1e-2 {
                break;
            }
            c = c.add(&step);
            if size < fine {
                break;
            }
        }
        // both values may sit at the rounding floor, where comparing them
        // says nothing; only fall back when the new point is clearly worse
        let t = series_about(seq, target, &c, 0, bits)?;
        let a0 = t.coeff(0).abs();
        let floor = t.scale_log2().max(0.0) - bits as f64 + 40.0;
        if a0.log2_abs() <= floor.max(best.1.log2_abs() + 16.0) {
            best = (c, a0);
        }
    }
    let c = best.0;

    let s = series_about(seq, target, &c, opts.order, bits)?;
    let inf = s.coeff(0).to_f64();
    let order = match leading_term(&s, s.zero_tol()) {
        Ok(lt) => Some(lt.order),
        Err(Error::PerfectToOrder { .. }) => None,
        Err(Error::Ambiguous { order, .. }) => Some(order),
        Err(e) => return Err(e),
    };
    Ok(PerfectPoint {
        epsilon: c.to_f64() + 0.0,
        order,
        infidelity: inf.abs(),
        verified: inf.abs() < PERFECT_BOUND,
    })
}

/// Multiplicity when `a0` is already lost in rounding. The lowest surviving
/// term `a_k` is either the true order, or a remnant `C(m,k) A (-d)^(m-k)` of
/// a zero at a tiny offset `d`, recognisable by `|a_k / a_{k+1}|` being of
/// order `d`. In the second case the ratio of consecutive quotients fixes `m`.
fn floor_multiplicity(s: &crate::series::EpsSeries<Big>, bits: u32) -> usize {
    let noise = s.scale_log2().max(0.0) - bits as f64 + 40.0;
    let n = s.order();
    let Some(k) = (0..=n).find(|&k| s.coeff(k).log2_abs() > noise) else {
        return 2;
    };
    let exact = (k + k % 2).max(2);
    if k + 2 > n || s.coeff(k + 1).is_zero() || s.coeff(k + 2).is_zero() {
        return exact;
    }
    let u = s.coeff(k).div(s.coeff(k + 1)).to_f64();
    if u.abs() > 1e-6 {
        return exact;
    }
    let v = s.coeff(k + 1).div(s.coeff(k + 2)).to_f64();
    let rho = v / u * (k + 1) as f64 / (k + 2) as f64;
    let m = k as f64 + rho / (rho - 1.0);
    if m.is_finite() && m > k as f64 {
        ((m / 2.0).round() as usize * 2).min(n)
    } else {
        exact
    }
}

/// Local infidelity order at `ε = center` (exact center).
pub fn local_order(seq: &PulseSequence, target: &Target, center: f64, order: usize, bits: u32) -> Result<usize> {
    let s = series_about(seq, target, &Big::new(center, bits), order, bits)?;
    Ok(leading_term(&s, s.zero_tol())?.order)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FSensitivity {
    /// Coefficient `k` in `I ≈ k f²` at `ε = 0`.
    pub coefficient: f64,
    /// Same coefficient for a single error-free-target pulse.
    pub simple_coefficient: f64,
    pub ratio: f64,
    /// `|I(h) - I(-h)|` at the smallest step used.
    pub odd_difference: f64,
}

fn kappa(seq: &PulseSequence, u: &crate::su2::Rotor, h: f64) -> (f64, f64) {
    let ip = infidelity(&compose_unchecked(seq, ErrorParams { epsilon: 0.0, f: h }), u);
    let im = infidelity(&compose_unchecked(seq, ErrorParams { epsilon: 0.0, f: -h }), u);
    ((ip + im) / (2.0 * h * h), (ip - im).abs())
}

/// Richardson-extrapolated second difference in `f` at `ε = 0`.
pub fn f_quadratic_coefficient(seq: &PulseSequence, target: &Target) -> Result<(f64, f64)> {
    let u = target.rotor();
    let i0 = infidelity(&compose_unchecked(seq, ErrorParams::ideal()), &u);
    if i0 > 1e-12 {
        return Err(invalid(format!(
            "{} does not implement the target without errors (infidelity {i0:e})",
            seq.label
        )));
    }
    let mut h = 1e-3;
    let mut prev_row: Vec<f64> = Vec::new();
    let mut odd = 0.0;
    for level in 0..8 {
        let (k, o) = kappa(seq, &u, h);
        odd = o;
        let mut row = vec![k];
        for m in 1..=level {
            let p = 4f64.powi(m as i32);
            let r = (p * row[m - 1] - prev_row[m - 1]) / (p - 1.0);
            row.push(r);
        }
        if level >= 2 {
            let (a, b) = (row[level], prev_row[level - 1]);
            if (a - b).abs() <= 1e-9 * a.abs().max(1e-12) {
                return Ok((a, odd));
            }
        }
        prev_row = row;
        h /= 2.0;
    }
    let last = *prev_row.last().expect("nonempty");
    Err(Error::NonConvergence(format!("f extrapolation did not settle (last {last}, odd part {odd:e})")))
}

/// Off-resonance sensitivity and its ratio to a single pulse of the target.
pub fn fsens(seq: &PulseSequence, target: &Target) -> Result<FSensitivity> {
    let simple = match target {
        Target::Pulse(p) => PulseSequence::single(p.clone()),
        Target::Identity => return Err(invalid("off-resonance ratio needs a pulse target")),
    };
    let (coefficient, odd_difference) = f_quadratic_coefficient(seq, target)?;
    let (simple_coefficient, _) = f_quadratic_coefficient(&simple, target)?;
    Ok(FSensitivity {
        coefficient,
        simple_coefficient,
        ratio: coefficient / simple_coefficient,
        odd_difference,
    })
}
