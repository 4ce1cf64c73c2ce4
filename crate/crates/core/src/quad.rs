//! Small adaptive-Simpson quadrature used for the decoding-region integrals.

/// Result of an adaptive integration: value and an error estimate.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Quadrature {
    pub value: f64,
    pub error: f64,
}

fn simpson(f: &mut dyn FnMut(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
}

fn adapt(
    f: &mut dyn FnMut(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    whole: f64,
    m: f64,
    fm: f64,
    tol: f64,
    depth: u32,
) -> Quadrature {
    let (left, lm, flm) = simpson(f, a, fa, m, fm);
    let (right, rm, frm) = simpson(f, m, fm, b, fb);
    let delta = left + right - whole;
    if depth == 0 {
        return Quadrature {
            value: left + right,
            error: delta.abs(),
        };
    }
    if delta.abs() <= 15.0 * tol {
        return Quadrature {
            value: left + right + delta / 15.0,
            error: delta.abs() / 15.0,
        };
    }
    let l = adapt(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1);
    let r = adapt(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1);
    Quadrature {
        value: l.value + r.value,
        error: l.error + r.error,
    }
}

/// Integrate `f` over `[a, b]` to absolute tolerance `tol`.
pub(crate) fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> Quadrature {
    if b <= a {
        return Quadrature { value: 0.0, error: 0.0 };
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(&mut f, a, fa, b, fb);
    adapt(&mut f, a, fa, b, fb, whole, m, fm, tol, 48)
}
