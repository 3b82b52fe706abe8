//! Independent oracles: adaptive Dormand–Prince integration of the switched
//! system and a truncated Taylor series for the matrix exponential. Neither
//! shares code with the exact-flow implementation under test.

#![allow(dead_code)]

use dcdc_core::model::{Control, ConverterSpec, Stage};
use dcdc_core::numerics::Matrix;

pub fn taylor_exp(a: &Matrix, t: f64, terms: usize) -> Matrix {
    let n = a.rows();
    let at = a.scale(t);
    let mut term = Matrix::identity(n);
    let mut sum = Matrix::identity(n);
    for k in 1..terms {
        term = term.matmul(&at).unwrap().scale(1.0 / k as f64);
        sum = &sum + &term;
    }
    sum
}

fn field(a: &Matrix, b: &[f64], x: &[f64]) -> Vec<f64> {
    let ax = a.mul_vec(x);
    ax.iter().zip(b).map(|(p, q)| p + q).collect()
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn lin(x: &[f64], h: f64, ks: &[(&[f64], f64)]) -> Vec<f64> {
    let mut out = x.to_vec();
    for (k, c) in ks {
        for (o, v) in out.iter_mut().zip(k.iter()) {
            *o += h * c * v;
        }
    }
    out
}

/// One Dormand–Prince 5(4) step; returns (x_new, error estimate).
fn dp_step(a: &Matrix, b: &[f64], x: &[f64], h: f64) -> (Vec<f64>, f64) {
    let k1 = field(a, b, x);
    let k2 = field(a, b, &lin(x, h, &[(&k1, A21)]));
    let k3 = field(a, b, &lin(x, h, &[(&k1, A31), (&k2, A32)]));
    let k4 = field(a, b, &lin(x, h, &[(&k1, A41), (&k2, A42), (&k3, A43)]));
    let k5 = field(
        a,
        b,
        &lin(x, h, &[(&k1, A51), (&k2, A52), (&k3, A53), (&k4, A54)]),
    );
    let k6 = field(
        a,
        b,
        &lin(
            x,
            h,
            &[(&k1, A61), (&k2, A62), (&k3, A63), (&k4, A64), (&k5, A65)],
        ),
    );
    let y = lin(
        x,
        h,
        &[(&k1, B1), (&k3, B3), (&k4, B4), (&k5, B5), (&k6, B6)],
    );
    let k7 = field(a, b, &y);
    let err = lin(
        &vec![0.0; x.len()],
        h,
        &[
            (&k1, E1),
            (&k3, E3),
            (&k4, E4),
            (&k5, E5),
            (&k6, E6),
            (&k7, E7),
        ],
    );
    let scale = |i: usize| 1.0 + x[i].abs().max(y[i].abs());
    let e = (0..x.len())
        .map(|i| (err[i] / scale(i)).abs())
        .fold(0.0, f64::max);
    (y, e)
}

/// Adaptive integration of `ẋ = A x + b` over `[0, t]`. After every accepted
/// step `stop(τ, x)` may end the run early; the step is then returned as
/// (τ_prev, x_prev, τ, x) so the caller can localize an event.
pub fn rk_integrate<F>(
    a: &Matrix,
    b: &[f64],
    x0: &[f64],
    t: f64,
    tol: f64,
    mut stop: F,
) -> (f64, Vec<f64>, f64, Vec<f64>)
where
    F: FnMut(f64, &[f64]) -> bool,
{
    let mut tau = 0.0;
    let mut x = x0.to_vec();
    if t == 0.0 {
        return (0.0, x.clone(), 0.0, x);
    }
    let mut h = t / 100.0;
    loop {
        let h_try = h.min(t - tau);
        let (y, e) = dp_step(a, b, &x, h_try);
        if e <= tol {
            let tau_new = if h_try == t - tau { t } else { tau + h_try };
            let prev = (tau, x.clone());
            tau = tau_new;
            x = y;
            if stop(tau, &x) || tau >= t {
                return (prev.0, prev.1, tau, x);
            }
        }
        let factor = if e == 0.0 {
            5.0
        } else {
            (0.9 * (tol / e).powf(0.2)).clamp(0.2, 5.0)
        };
        h = h_try * factor;
    }
}

pub fn rk_flow(a: &Matrix, b: &[f64], x0: &[f64], t: f64, tol: f64) -> Vec<f64> {
    rk_integrate(a, b, x0, t, tol, |_, _| false).3
}

/// One switching cycle of the converter from `x0`, integrated numerically.
/// Returns (d, x(T)).
pub fn rk_cycle(spec: &ConverterSpec, x0: &[f64], tol: f64) -> (f64, Vec<f64>) {
    let t = spec.period();
    let (a1, b1) = (spec.a(Stage::S1), spec.forcing(Stage::S1));
    let (a2, b2) = (spec.a(Stage::S2), spec.forcing(Stage::S2));
    let u = spec.u().to_vec();
    let (d, x_d) = match spec.control() {
        Control::DiscreteDuty(dc) => {
            let d = dc.duration(x0, t);
            (d, rk_flow(a1, &b1, x0, d, tol))
        }
        Control::Ramp(rc) => {
            let g = |tau: f64, x: &[f64]| rc.feedback(x, &u) - rc.ramp.value_in_cycle(tau);
            if rc.feedback(x0, &u) < rc.ramp.v_low {
                (0.0, x0.to_vec())
            } else {
                let (t0, xa, t1, xb) = rk_integrate(a1, &b1, x0, t, tol, |tau, x| g(tau, x) < 0.0);
                if g(t1, &xb) >= 0.0 {
                    (t, xb)
                } else {
                    // Bisect the event inside the last accepted step.
                    let (mut lo, mut hi) = (0.0, t1 - t0);
                    while hi - lo > 1e-16 * t {
                        let mid = 0.5 * (lo + hi);
                        let xm = rk_flow(a1, &b1, &xa, mid, tol);
                        if g(t0 + mid, &xm) < 0.0 {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    let d = t0 + hi;
                    (d, rk_flow(a1, &b1, &xa, hi, tol))
                }
            }
        }
    };
    (d, rk_flow(a2, &b2, &x_d, t - d, tol))
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num = a
        .iter()
        .zip(b)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max);
    let den = a.iter().chain(b).map(|v| v.abs()).fold(0.0, f64::max);
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

pub fn mat_rel_diff(a: &Matrix, b: &Matrix) -> f64 {
    rel_diff(a.as_slice(), b.as_slice())
}
