//! Scalar root finding on a bracket.

/// Illinois-modified regula falsi on a sign-changing bracket `[a, b]`.
///
/// Stops when `|f| <= ftol` or the bracket is narrower than `xtol`. Returns
/// `None` when `f(a)` and `f(b)` have the same strict sign.
pub fn illinois<F>(mut f: F, mut a: f64, mut b: f64, xtol: f64, ftol: f64) -> Option<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return None;
    }
    let mut side = 0i8;
    let mut c = a;
    for _ in 0..200 {
        let prev = c;
        c = (a * fb - b * fa) / (fb - fa);
        if !(c > a.min(b) && c < a.max(b)) {
            c = 0.5 * (a + b);
        }
        if c == prev {
            return Some(c);
        }
        let fc = f(c);
        if fc.abs() <= ftol || (b - a).abs() <= xtol {
            return Some(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    Some(c)
}

/// Bisection to bracket a root followed by secant polishing.
///
/// `a` and `b` must bracket a sign change; the bisection phase shrinks the
/// bracket to `1e-3` of its width, after which Illinois steps finish.
pub fn bisect_then_secant<F>(mut f: F, a: f64, b: f64, xtol: f64) -> Option<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return None;
    }
    let width = (b - a).abs();
    while (b - a).abs() > 1e-3 * width {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return Some(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    illinois(f, a, b, xtol, 0.0)
}
