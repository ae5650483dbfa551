//! Bracketing scalar root finders.
//!
//! Both finders require a sign change on the initial bracket and never
//! step outside it. On exhaustion of the iteration budget they return
//! [`Error::ConvergenceFailure`] instead of a best guess, unless the
//! bracket has already shrunk below [`ACCEPT_REL_WIDTH`].

use crate::error::{Error, Result};

/// Relative bracket width accepted as converged when the iteration budget
/// runs out.
pub const ACCEPT_REL_WIDTH: f64 = 1e-14;

pub const DEFAULT_MAX_ITER: usize = 400;

fn same_sign(a: f64, b: f64) -> bool {
    (a > 0.0 && b > 0.0) || (a < 0.0 && b < 0.0)
}

/// Bisection until the bracket endpoints are adjacent floats.
///
/// Brackets with `0 < lo` spanning more than a factor of four are split
/// geometrically, so roots near zero are found to full relative precision.
/// Returns the endpoint with the smaller residual magnitude.
pub fn bisect<F>(mut f: F, lo: f64, hi: f64, max_iter: usize, stage: &'static str) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.is_nan() || f_hi.is_nan() || same_sign(f_lo, f_hi) {
        return Err(Error::NoBracket { stage });
    }
    for _ in 0..max_iter {
        let mid = if lo > 0.0 && hi > 4.0 * lo {
            crate::math::sqrt(lo) * crate::math::sqrt(hi)
        } else {
            lo + 0.5 * (hi - lo)
        };
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.is_nan() {
            return Err(Error::ConvergenceFailure {
                stage,
                iterations: 0,
                residual: f_mid,
            });
        }
        if same_sign(f_mid, f_lo) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    let width = hi - lo;
    let scale = lo.abs().max(hi.abs());
    let adjacent = lo + 0.5 * width <= lo || lo + 0.5 * width >= hi;
    if !adjacent && width > ACCEPT_REL_WIDTH * scale {
        return Err(Error::ConvergenceFailure {
            stage,
            iterations: max_iter,
            residual: f_lo.abs().min(f_hi.abs()),
        });
    }
    Ok(if f_lo.abs() <= f_hi.abs() { lo } else { hi })
}

/// Brent's method (inverse quadratic interpolation safeguarded by
/// bisection). `xtol` is an absolute tolerance on the root.
pub fn brent<F>(mut f: F, lo: f64, hi: f64, xtol: f64, max_iter: usize, stage: &'static str) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut a = lo;
    let mut b = hi;
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.is_nan() || fb.is_nan() || same_sign(fa, fb) {
        return Err(Error::NoBracket { stage });
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if same_sign(fb, fc) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol {
            d
        } else if m > 0.0 {
            tol
        } else {
            -tol
        };
        fb = f(b);
        if fb.is_nan() {
            return Err(Error::ConvergenceFailure {
                stage,
                iterations: 0,
                residual: fb,
            });
        }
    }
    Err(Error::ConvergenceFailure {
        stage,
        iterations: max_iter,
        residual: fb.abs(),
    })
}

/// Widens a bracket around `x0` for a nonincreasing `f`, stepping toward
/// the sign change with a step that doubles each time. Callers work on log
/// scales, so a few dozen steps cover the whole `f64` range.
pub fn expand_bracket_decreasing<F>(
    mut f: F,
    x0: f64,
    mut step: f64,
    max_steps: usize,
    stage: &'static str,
) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let f0 = f(x0);
    if f0.is_nan() {
        return Err(Error::NoBracket { stage });
    }
    if f0 == 0.0 {
        return Ok((x0, x0));
    }
    let dir = if f0 > 0.0 { 1.0 } else { -1.0 };
    let mut x = x0;
    for _ in 0..max_steps {
        let next = x + dir * step;
        let fx = f(next);
        if fx.is_nan() {
            break;
        }
        if !same_sign(fx, f0) {
            return Ok(if dir > 0.0 { (x, next) } else { (next, x) });
        }
        x = next;
        step *= 2.0;
    }
    Err(Error::NoBracket { stage })
}
