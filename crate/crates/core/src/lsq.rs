//! Small dense nonlinear least squares: Levenberg–Marquardt in double
//! precision and a Gauss–Newton polish at any [`Real`] precision.

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Clone, Debug)]
pub struct LsqResult {
    pub x: Vec<f64>,
    /// `Σ r_i²` at `x`.
    pub cost: f64,
    pub iterations: usize,
}

/// Solves the square or overdetermined system `A x = b` by Gaussian
/// elimination with partial pivoting. `a` is row-major `n × n`.
#[allow(clippy::needless_range_loop)]
pub fn solve_dense<T: Real>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().cmp_value(&a[j][col].abs()))?;
        if a[piv][col].is_zero() {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col].div(&a[col][col]);
            if f.is_zero() {
                continue;
            }
            for k in col..n {
                let t = f.mul(&a[col][k]);
                a[row][k] = a[row][k].sub(&t);
            }
            let t = f.mul(&b[col]);
            b[row] = b[row].sub(&t);
        }
    }
    let mut x = b.clone();
    for row in (0..n).rev() {
        let mut s = b[row].clone();
        for k in row + 1..n {
            s = s.sub(&a[row][k].mul(&x[k]));
        }
        x[row] = s.div(&a[row][row]);
    }
    Some(x)
}

fn sumsq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn jacobian(f: &impl Fn(&[f64]) -> Vec<f64>, x: &[f64], r0: &[f64]) -> Vec<Vec<f64>> {
    // central differences, one column per parameter
    let h = 1e-7;
    let mut cols = Vec::with_capacity(x.len());
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        xp[j] = x[j] + h;
        let rp = f(&xp);
        xp[j] = x[j] - h;
        let rm = f(&xp);
        xp[j] = x[j];
        cols.push((0..r0.len()).map(|i| (rp[i] - rm[i]) / (2.0 * h)).collect::<Vec<f64>>());
    }
    cols
}

/// Levenberg–Marquardt on residuals `f(x)` from `x0`. Stops when the cost
/// falls below `tol` or the step stalls; reports the final point either way.
pub fn levenberg_marquardt(
    f: impl Fn(&[f64]) -> Vec<f64>,
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> LsqResult {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = f(&x);
    let mut cost = sumsq(&r);
    let mut lambda = 1e-3;
    let mut it = 0;
    while it < max_iter && cost > tol {
        it += 1;
        let j = jacobian(&f, &x, &r);
        let mut jtj = vec![vec![0.0; n]; n];
        let mut jtr = vec![0.0; n];
        for a in 0..n {
            for b in 0..n {
                jtj[a][b] = j[a].iter().zip(&j[b]).map(|(p, q)| p * q).sum();
            }
            jtr[a] = j[a].iter().zip(&r).map(|(p, q)| p * q).sum();
        }
        let mut improved = false;
        for _ in 0..12 {
            let mut m = jtj.clone();
            for (d, row) in m.iter_mut().enumerate() {
                row[d] += lambda * (jtj[d][d] + 1e-12);
            }
            let rhs: Vec<f64> = jtr.iter().map(|v| -v).collect();
            let Some(step) = solve_dense(m, rhs) else {
                lambda *= 10.0;
                continue;
            };
            let xn: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
            let rn = f(&xn);
            let cn = sumsq(&rn);
            if cn < cost {
                let small = step.iter().all(|s| s.abs() < 1e-15 * (1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()))));
                x = xn;
                r = rn;
                cost = cn;
                lambda = (lambda / 3.0).max(1e-12);
                improved = !small;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    LsqResult { x, cost, iterations: it }
}

/// Drives the residuals to zero; fails unless the final residual norm is at
/// most `accept_norm`.
pub fn solve_residuals(
    f: impl Fn(&[f64]) -> Vec<f64>,
    x0: &[f64],
    accept_norm: f64,
    max_iter: usize,
) -> Result<LsqResult> {
    let out = levenberg_marquardt(f, x0, 0.0, max_iter);
    if out.cost.sqrt() > accept_norm {
        return Err(Error::NonConvergence(format!("residual cost {:e} after {} steps", out.cost, out.iterations)));
    }
    Ok(out)
}

/// Gauss–Newton at the precision of `x0` with a forward-difference Jacobian
/// of step `h`. Returns the iterate with the smallest residual norm.
pub fn gauss_newton<T: Real>(f: impl Fn(&[T]) -> Vec<T>, x0: &[T], h: &T, iters: usize) -> (Vec<T>, f64) {
    let n = x0.len();
    let norm = |r: &[T]| r.iter().map(|v| v.to_f64().powi(2)).sum::<f64>().sqrt();
    let mut x = x0.to_vec();
    let mut r = f(&x);
    let mut best = (x.clone(), norm(&r));
    for _ in 0..iters {
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            let mut xp = x.clone();
            xp[j] = xp[j].add(h);
            let rp = f(&xp);
            cols.push(rp.iter().zip(&r).map(|(a, b)| a.sub(b).div(h)).collect::<Vec<T>>());
        }
        let zero = x[0].zero_like();
        let mut jtj = vec![vec![zero.clone(); n]; n];
        let mut rhs = vec![zero.clone(); n];
        for a in 0..n {
            for b in 0..n {
                let mut s = zero.clone();
                for (p, q) in cols[a].iter().zip(&cols[b]) {
                    s.add_mul(p, q);
                }
                jtj[a][b] = s;
            }
            let mut s = zero.clone();
            for (p, q) in cols[a].iter().zip(&r) {
                s.add_mul(p, q);
            }
            rhs[a] = s.neg();
        }
        let Some(step) = solve_dense(jtj, rhs) else { break };
        x = x.iter().zip(&step).map(|(a, b)| a.add(b)).collect();
        r = f(&x);
        let nr = norm(&r);
        if nr < best.1 {
            best = (x.clone(), nr);
        } else {
            break;
        }
        if nr == 0.0 {
            break;
        }
    }
    best
}
