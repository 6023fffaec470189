//! Bracketed root finders.

use crate::error::{Error, Result};

/// Newton's method safeguarded by a sign-change bracket `[lo, hi]`.
///
/// `f` returns the residual and its derivative. Iterates falling outside the
/// bracket, or failing to shrink the residual fast enough, are replaced by a
/// bisection step. Stops when the step drops below `x_tol`.
pub fn safeguarded_newton<F>(f: F, mut lo: f64, mut hi: f64, x0: f64, x_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> (f64, f64),
{
    let (flo, _) = f(lo);
    let (fhi, _) = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NoBracket(format!(
            "no sign change on [{lo}, {hi}] ({flo:e}, {fhi:e})"
        )));
    }
    // Orient so that f(lo) < 0 < f(hi).
    let increasing = flo < 0.0;
    let mut x = x0.clamp(lo, hi);
    let mut last_step = hi - lo;
    for _ in 0..200 {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if (fx < 0.0) == increasing {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / dfx;
        let step_ok = dfx != 0.0
            && newton.is_finite()
            && newton > lo
            && newton < hi
            && (newton - x).abs() < 0.5 * last_step.abs();
        let next = if step_ok { newton } else { 0.5 * (lo + hi) };
        last_step = next - x;
        x = next;
        if last_step.abs() <= x_tol || hi - lo <= x_tol {
            return Ok(x);
        }
    }
    Err(Error::Numerical("safeguarded Newton iteration did not converge".into()))
}

/// Brent's method on a bracket with a sign change.
pub fn brent<F>(f: F, a: f64, b: f64, x_tol: f64, max_iter: usize) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let (mut a, mut b) = (a, b);
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoBracket(format!("no sign change on [{a}, {b}]")));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
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
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * x_tol;
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
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b)?;
    }
    Err(Error::Numerical("Brent iteration limit reached".into()))
}
