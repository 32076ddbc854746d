//! Small numerical helpers: derivatives, bracketing, Newton iteration.

use num_complex::Complex64 as C64;

/// Derivative of a complex function of `z` along the real direction, by
/// Richardson-extrapolated central differences.
///
/// For functions analytic at `z` this is the complex derivative.
pub fn derivative<F>(mut f: F, z: C64, h0: f64) -> C64
where
    F: FnMut(C64) -> C64,
{
    const LEVELS: usize = 5;
    let mut table = [[C64::new(0.0, 0.0); LEVELS]; LEVELS];
    let mut h = h0;
    let mut best = C64::new(f64::NAN, 0.0);
    let mut best_err = f64::INFINITY;
    for i in 0..LEVELS {
        table[i][0] = (f(z + h) - f(z - h)) / (2.0 * h);
        let mut fac = 4.0;
        for j in 1..=i {
            table[i][j] = table[i][j - 1] + (table[i][j - 1] - table[i - 1][j - 1]) / (fac - 1.0);
            fac *= 4.0;
            let err = (table[i][j] - table[i][j - 1])
                .norm()
                .max((table[i][j] - table[i - 1][j - 1]).norm());
            if err <= best_err {
                best_err = err;
                best = table[i][j];
            }
        }
        h *= 0.5;
    }
    if best.re.is_nan() {
        table[0][0]
    } else {
        best
    }
}

/// Bisection on a sign change of `f` in `[a, b]`.
pub fn bisect<F>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Option<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut fa = f(a);
    let fb = f(b);
    if !(fa.is_finite() && fb.is_finite()) || fa * fb > 0.0 {
        return None;
    }
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if b - a <= tol || m <= a || m >= b {
            return Some(m);
        }
        let fm = f(m);
        if !fm.is_finite() {
            return None;
        }
        if fm == 0.0 {
            return Some(m);
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    Some(0.5 * (a + b))
}

/// Golden-section search for a maximum of a unimodal `f` on `[a, b]`.
pub fn golden_max<F>(mut f: F, mut a: f64, mut b: f64, tol: f64, max_iter: usize) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..max_iter {
        if (b - a).abs() <= tol {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Newton iteration on an analytic `f`, deflated by previously found roots.
///
/// Returns `None` if the iteration leaves `accept` or fails to converge.
pub fn newton_deflated<F, A>(mut f: F, z0: C64, known: &[C64], tol: f64, accept: A) -> Option<C64>
where
    F: FnMut(C64) -> C64,
    A: Fn(C64) -> bool,
{
    let mut z = z0;
    for _ in 0..100 {
        let fz = f(z);
        if !fz.re.is_finite() || !fz.im.is_finite() {
            return None;
        }
        if fz.norm() == 0.0 {
            return accept(z).then_some(z);
        }
        let h = 1e-3 * z.norm().max(1e-3);
        let dfz = derivative(&mut f, z, h);
        // g = f / prod(z - r);  g'/g = f'/f - sum 1/(z - r)
        let mut corr = C64::new(0.0, 0.0);
        for r in known {
            corr += 1.0 / (z - r);
        }
        let ratio = dfz / fz - corr;
        if ratio.norm() == 0.0 || !ratio.re.is_finite() {
            return None;
        }
        let step = 1.0 / ratio;
        let step = if step.norm() > 0.5 {
            step * (0.5 / step.norm())
        } else {
            step
        };
        z -= step;
        if !accept(z) {
            return None;
        }
        if step.norm() <= tol * z.norm().max(1.0) {
            return Some(z);
        }
    }
    None
}
