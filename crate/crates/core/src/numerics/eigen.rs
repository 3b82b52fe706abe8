//! Eigenvalues of small dense real matrices.
//!
//! Balancing, reduction to upper Hessenberg form by stabilized elementary
//! similarity transforms, then the Francis double-shift QR iteration. Only
//! eigenvalues are produced.

#![allow(clippy::needless_range_loop)]

use num_complex::Complex64;

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// A (possibly complex) eigenvalue.
pub type ComplexEig = Complex64;

/// Largest matrix order accepted by [`eigenvalues`].
pub const MAX_ORDER: usize = 8;

const MAX_ITERATIONS_PER_ROOT: usize = 60;

/// All eigenvalues of `a`, counted with multiplicity.
///
/// The result is sorted by decreasing modulus (ties broken by real part, then
/// imaginary part, both decreasing) and complex pairs are exact conjugates.
pub fn eigenvalues(a: &Matrix) -> Result<Vec<ComplexEig>> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "eigenvalues of non-square {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    if a.rows() > MAX_ORDER {
        return Err(Error::Unsupported(format!(
            "eigenvalues of order {} (limit {MAX_ORDER})",
            a.rows()
        )));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite("eigenvalue input".into()));
    }
    let n = a.rows();
    let mut h: Vec<Vec<f64>> = a.to_rows();
    balance(&mut h);
    to_hessenberg(&mut h);
    let mut eig = hessenberg_qr(&mut h)?;
    debug_assert_eq!(eig.len(), n);
    sort_spectrum(&mut eig);
    Ok(eig)
}

pub fn spectral_radius(eig: &[ComplexEig]) -> f64 {
    eig.iter().map(|e| e.norm()).fold(0.0, f64::max)
}

fn sort_spectrum(eig: &mut [ComplexEig]) {
    eig.sort_by(|a, b| {
        b.norm()
            .total_cmp(&a.norm())
            .then(b.re.total_cmp(&a.re))
            .then(b.im.total_cmp(&a.im))
    });
}

fn balance(a: &mut [Vec<f64>]) {
    const RADIX: f64 = 2.0;
    let sqrdx = RADIX * RADIX;
    let n = a.len();
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0_f64;
            let mut c = 0.0_f64;
            for j in 0..n {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let s = c + r;
                let mut f = 1.0_f64;
                let mut g = r / RADIX;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let ginv = 1.0 / f;
                    for j in 0..n {
                        a[i][j] *= ginv;
                    }
                    for row in a.iter_mut() {
                        row[i] *= f;
                    }
                }
            }
        }
    }
}

fn to_hessenberg(a: &mut [Vec<f64>]) {
    let n = a.len();
    for m in 1..n.saturating_sub(1) {
        let mut x = 0.0_f64;
        let mut piv = m;
        for j in m..n {
            if a[j][m - 1].abs() > x.abs() {
                x = a[j][m - 1];
                piv = j;
            }
        }
        if piv != m {
            for j in (m - 1)..n {
                let tmp = a[piv][j];
                a[piv][j] = a[m][j];
                a[m][j] = tmp;
            }
            for row in a.iter_mut() {
                row.swap(piv, m);
            }
        }
        if x != 0.0 {
            for i in (m + 1)..n {
                let mut y = a[i][m - 1];
                if y != 0.0 {
                    y /= x;
                    a[i][m - 1] = 0.0;
                    for j in m..n {
                        a[i][j] -= y * a[m][j];
                    }
                    for row in a.iter_mut() {
                        row[m] += y * row[i];
                    }
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..i.saturating_sub(1) {
            a[i][j] = 0.0;
        }
    }
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

fn hessenberg_qr(a: &mut [Vec<f64>]) -> Result<Vec<ComplexEig>> {
    let n = a.len();
    let mut wri = vec![Complex64::new(0.0, 0.0); n];
    if n == 0 {
        return Ok(wri);
    }
    let eps = f64::EPSILON;
    let mut anorm = 0.0_f64;
    for (i, row) in a.iter().enumerate() {
        for v in row.iter().skip(i.saturating_sub(1)) {
            anorm += v.abs();
        }
    }
    let mut nn = n as isize - 1;
    let mut t = 0.0_f64;
    let (mut p, mut q, mut r): (f64, f64, f64);
    let (mut x, mut y, mut z): (f64, f64, f64);
    let mut w: f64;
    while nn >= 0 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l > 0 {
                let lu = l as usize;
                let mut s = a[lu - 1][lu - 1].abs() + a[lu][lu].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[lu][lu - 1].abs() <= eps * s {
                    a[lu][lu - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            let nu = nn as usize;
            x = a[nu][nu];
            if l == nn {
                wri[nu] = Complex64::new(x + t, 0.0);
                nn -= 1;
            } else {
                y = a[nu - 1][nu - 1];
                w = a[nu][nu - 1] * a[nu - 1][nu];
                if l == nn - 1 {
                    p = 0.5 * (y - x);
                    q = p * p + w;
                    z = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        z = p + sign(z, p);
                        wri[nu - 1] = Complex64::new(x + z, 0.0);
                        wri[nu] = wri[nu - 1];
                        if z != 0.0 {
                            wri[nu] = Complex64::new(x - w / z, 0.0);
                        }
                    } else {
                        wri[nu] = Complex64::new(x + p, -z);
                        wri[nu - 1] = wri[nu].conj();
                    }
                    nn -= 2;
                } else {
                    if its == MAX_ITERATIONS_PER_ROOT {
                        return Err(Error::NoConvergence {
                            method: "Hessenberg QR",
                            iterations: its,
                            residual: a[nu][nu - 1].abs(),
                        });
                    }
                    if its == 10 || its == 20 || its == 40 {
                        // Exceptional shift.
                        t += x;
                        for (i, row) in a.iter_mut().enumerate().take(nu + 1) {
                            row[i] -= x;
                        }
                        let s = a[nu][nu - 1].abs() + a[nu - 1][nu - 2].abs();
                        x = 0.75 * s;
                        y = x;
                        w = -0.4375 * s * s;
                    }
                    its += 1;
                    let lu = l as usize;
                    let mut m = nu - 2;
                    loop {
                        z = a[m][m];
                        let rr = x - z;
                        let ss = y - z;
                        p = (rr * ss - w) / a[m + 1][m] + a[m][m + 1];
                        q = a[m + 1][m + 1] - z - rr - ss;
                        r = a[m + 2][m + 1];
                        let s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == lu {
                            break;
                        }
                        let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                        let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                        if u <= eps * v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in m..(nu - 1) {
                        a[i + 2][i] = 0.0;
                        if i != m {
                            a[i + 2][i - 1] = 0.0;
                        }
                    }
                    let mut k = m;
                    while k < nu {
                        if k != m {
                            p = a[k][k - 1];
                            q = a[k + 1][k - 1];
                            r = 0.0;
                            if k + 1 != nu {
                                r = a[k + 2][k - 1];
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != 0.0 {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let s = sign((p * p + q * q + r * r).sqrt(), p);
                        if s != 0.0 {
                            if k == m {
                                if l as usize != m {
                                    a[k][k - 1] = -a[k][k - 1];
                                }
                            } else {
                                a[k][k - 1] = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nu {
                                p = a[k][j] + q * a[k + 1][j];
                                if k + 1 != nu {
                                    p += r * a[k + 2][j];
                                    a[k + 2][j] -= p * z;
                                }
                                a[k + 1][j] -= p * y;
                                a[k][j] -= p * x;
                            }
                            let mmin = if nu < k + 3 { nu } else { k + 3 };
                            for row in a.iter_mut().take(mmin + 1).skip(lu) {
                                p = x * row[k] + y * row[k + 1];
                                if k + 1 != nu {
                                    p += z * row[k + 2];
                                    row[k + 2] -= p * r;
                                }
                                row[k + 1] -= p * q;
                                row[k] -= p;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if l + 1 >= nn {
                break;
            }
        }
    }
    Ok(wri)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_spectrum(got: &[ComplexEig], want: &[(f64, f64)], tol: f64) {
        assert_eq!(got.len(), want.len());
        let mut used = vec![false; want.len()];
        for g in got {
            let k = want
                .iter()
                .enumerate()
                .filter(|(i, _)| !used[*i])
                .min_by(|a, b| {
                    let da = (g - Complex64::new(a.1 .0, a.1 .1)).norm();
                    let db = (g - Complex64::new(b.1 .0, b.1 .1)).norm();
                    da.total_cmp(&db)
                })
                .unwrap()
                .0;
            used[k] = true;
            let d = (g - Complex64::new(want[k].0, want[k].1)).norm();
            assert!(d < tol, "eigenvalue {g} vs {:?}: {d}", want[k]);
        }
    }

    #[test]
    fn identity_3() {
        let e = eigenvalues(&Matrix::identity(3)).unwrap();
        assert_spectrum(&e, &[(1.0, 0.0); 3], 1e-14);
    }

    #[test]
    fn rotation_generator() {
        let e = eigenvalues(&Matrix::from_rows(&[[0.0, -1.0], [1.0, 0.0]])).unwrap();
        assert_spectrum(&e, &[(0.0, 1.0), (0.0, -1.0)], 1e-14);
        assert_eq!(e[0], e[1].conj());
    }

    #[test]
    fn companion_of_reported_neimark_spectrum() {
        // (λ - 0.8799)((λ - 0.8797)² + 0.4474²) expanded
        let r: f64 = 0.8799;
        let (a, b): (f64, f64) = (0.8797, 0.4474);
        let s = 2.0 * a;
        let p = a * a + b * b;
        let c2 = -(r + s);
        let c1 = r * s + p;
        let c0 = -r * p;
        let comp = Matrix::from_rows(&[[-c2, -c1, -c0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        let e = eigenvalues(&comp).unwrap();
        assert_spectrum(&e, &[(r, 0.0), (a, b), (a, -b)], 1e-9);

        // λ³ − 2.6395λ² + 2.5256λ − 0.85977, roots from an independent
        // polynomial solver (numpy.roots).
        let comp =
            Matrix::from_rows(&[[2.6395, -2.5256, 0.85977], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        let e = eigenvalues(&comp).unwrap();
        assert_spectrum(
            &e,
            &[
                (0.88024488, 0.4508663),
                (0.88024488, -0.4508663),
                (0.87901023, 0.0),
            ],
            1e-7,
        );
    }

    #[test]
    fn larger_upper_triangular_and_defective() {
        let mut m = Matrix::zeros(6, 6);
        for i in 0..6 {
            m[(i, i)] = i as f64 - 2.5;
            if i + 1 < 6 {
                m[(i, i + 1)] = 3.0;
            }
        }
        let e = eigenvalues(&m).unwrap();
        let want: Vec<(f64, f64)> = (0..6).map(|i| (i as f64 - 2.5, 0.0)).collect();
        assert_spectrum(&e, &want, 1e-10);
    }

    #[test]
    fn rejects_large_and_rectangular() {
        assert!(eigenvalues(&Matrix::identity(9)).is_err());
        assert!(eigenvalues(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn sorted_by_modulus() {
        let e = eigenvalues(&Matrix::diag(&[0.1, -3.0, 2.0])).unwrap();
        assert!((e[0].re + 3.0).abs() < 1e-15);
        assert!((e[2].re - 0.1).abs() < 1e-15);
        assert!((spectral_radius(&e) - 3.0).abs() < 1e-15);
    }
}
