//! Scalar bracketed root finding (Brent's method).

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 300;

/// Root of `f` on `[lo, hi]`, located to a bracket no wider than `tol`.
///
/// Inverse-quadratic and secant steps are used when they stay safely inside
/// the current bracket, bisection otherwise, so convergence is guaranteed
/// for any continuous `f` with a sign change. The returned point always lies
/// in `[lo, hi]`.
pub fn bracketed_root<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    try_bracketed_root(|t| Ok(f(t)), lo, hi, tol)
}

/// [`bracketed_root`] for fallible functions; the first error aborts the
/// search.
pub fn try_bracketed_root<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if tol.is_nan() || tol <= 0.0 || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "bracketed_root needs finite bracket and tol > 0 (got [{lo}, {hi}], tol {tol})"
        )));
    }
    let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let flo = f(lo)?;
    let fhi = f(hi)?;
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.is_nan() || fhi.is_nan() || flo.signum() == fhi.signum() {
        return Err(Error::NoSignChange { lo, hi, flo, fhi });
    }

    let (mut a, mut b, mut c) = (lo, hi, lo);
    let (mut fa, mut fb, mut fc) = (flo, fhi, flo);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..MAX_ITERATIONS {
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
        let tol1 = (0.5 * tol).max(2.0 * f64::EPSILON * b.abs());
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b.clamp(lo, hi));
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 {
            d
        } else if xm > 0.0 {
            tol1
        } else {
            -tol1
        };
        b = b.clamp(lo, hi);
        fb = f(b)?;
        if fb.is_nan() {
            return Err(Error::NonFinite("root-finding objective".into()));
        }
    }
    Err(Error::NoConvergence {
        method: "Brent",
        iterations: MAX_ITERATIONS,
        residual: fb.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn linear_root() {
        let r = bracketed_root(|t| t - 0.5, 0.0, 1.0, 1e-12).unwrap();
        assert!((r - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sqrt_two() {
        let r = bracketed_root(|t| t * t - 2.0, 1.0, 2.0, 1e-13).unwrap();
        assert!((r - std::f64::consts::SQRT_2).abs() < 1e-13);
    }

    #[test]
    fn no_sign_change_is_an_error() {
        let err = bracketed_root(|t| t * t + 1.0, -1.0, 1.0, 1e-12).unwrap_err();
        assert!(matches!(err, Error::NoSignChange { .. }));
    }

    #[test]
    fn endpoint_roots_and_reversed_bracket() {
        assert_eq!(bracketed_root(|t| t, 0.0, 1.0, 1e-9).unwrap(), 0.0);
        let r = bracketed_root(|t| t - 0.25, 1.0, 0.0, 1e-12).unwrap();
        assert!((r - 0.25).abs() < 1e-12);
    }

    #[test]
    fn discontinuous_step_still_brackets() {
        let r = bracketed_root(|t| if t < 0.3 { -1.0 } else { 1.0 }, 0.0, 1.0, 1e-10).unwrap();
        assert!((r - 0.3).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn result_inside_bracket(root in -5.0f64..5.0, w1 in 0.01f64..4.0, w2 in 0.01f64..4.0, k in 1u32..4) {
            let lo = root - w1;
            let hi = root + w2;
            let f = |t: f64| (t - root).powi(2 * k as i32 - 1) + 0.1 * (t - root);
            let r = bracketed_root(f, lo, hi, 1e-11).unwrap();
            prop_assert!(r >= lo && r <= hi);
            prop_assert!((r - root).abs() < 1e-9);
        }
    }
}
