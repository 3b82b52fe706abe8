//! Damped Newton iteration for small nonlinear systems.

use super::matrix::{Matrix, Vector};
use crate::error::{Error, Result};

/// Largest system size accepted by [`newton_solve`].
pub const MAX_UNKNOWNS: usize = 8;

/// How the Newton iteration obtains Jacobians.
/// Callback returning the Jacobian at a point.
pub type JacobianFn<'a> = Box<dyn FnMut(&[f64]) -> Result<Matrix> + 'a>;

pub enum JacobianSource<'a> {
    /// Central differences with per-component step `rel_step * (1 + |z_i|)`.
    FiniteDifference { rel_step: f64 },
    /// Caller-provided Jacobian.
    Analytic(JacobianFn<'a>),
}

impl Default for JacobianSource<'_> {
    fn default() -> Self {
        JacobianSource::FiniteDifference { rel_step: 1e-7 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions {
    /// Convergence threshold on ‖F(z)‖∞.
    pub tol: f64,
    pub max_iter: usize,
    /// Step halvings tried per iteration before giving up on decrease.
    pub max_halvings: usize,
    /// Jacobians with a condition estimate above this are rejected.
    pub singular_condition: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-10,
            max_iter: 50,
            max_halvings: 20,
            singular_condition: 1e12,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub z: Vector,
    /// ‖F(z)‖∞ at the returned point.
    pub residual: f64,
    pub iterations: usize,
    /// Condition estimate of the last Jacobian factorized (NaN when the
    /// initial point already satisfied the tolerance).
    pub condition: f64,
}

/// Finite-difference Jacobian of `f` at `z` (central where both sides
/// evaluate, one-sided otherwise).
pub fn fd_jacobian<F>(f: &mut F, z: &[f64], fz: &Vector, rel_step: f64) -> Result<Matrix>
where
    F: FnMut(&[f64]) -> Result<Vector>,
{
    let m = fz.dim();
    let n = z.len();
    let mut jac = Matrix::zeros(m, n);
    let mut zp = z.to_vec();
    for j in 0..n {
        let h = rel_step * (1.0 + z[j].abs());
        zp[j] = z[j] + h;
        let fp = f(&zp);
        zp[j] = z[j] - h;
        let fm = f(&zp);
        zp[j] = z[j];
        let (col, denom) = match (fp, fm) {
            (Ok(p), Ok(mn)) => (&p - &mn, 2.0 * h),
            (Ok(p), Err(_)) => (&p - fz, h),
            (Err(_), Ok(mn)) => (fz - &mn, h),
            (Err(e), Err(_)) => return Err(e),
        };
        for i in 0..m {
            jac[(i, j)] = col[i] / denom;
        }
    }
    Ok(jac)
}

/// Solves `F(z) = 0` from `z0` by Newton's method with step halving.
///
/// A step is accepted once it satisfies the Armijo-type test
/// `‖F(z + λΔ)‖₂ ≤ (1 − 10⁻⁴ λ) ‖F(z)‖₂`; if no halving achieves that, the
/// best trial is accepted provided it reduces the residual at all.
pub fn newton_solve<F>(
    mut f: F,
    mut jac: JacobianSource<'_>,
    z0: &[f64],
    opts: &NewtonOptions,
) -> Result<NewtonOutcome>
where
    F: FnMut(&[f64]) -> Result<Vector>,
{
    let n = z0.len();
    if n == 0 || n > MAX_UNKNOWNS {
        return Err(Error::InvalidArgument(format!(
            "Newton system of size {n} (supported 1..={MAX_UNKNOWNS})"
        )));
    }
    if z0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Newton initial guess".into()));
    }
    let mut z = Vector::from(z0);
    let mut fz = f(&z)?;
    if fz.dim() != n {
        return Err(Error::Dimension(format!(
            "Newton residual has {} components for {n} unknowns",
            fz.dim()
        )));
    }
    let mut condition = f64::NAN;
    for iter in 0..=opts.max_iter {
        let res_inf = fz.norm_inf();
        if res_inf <= opts.tol {
            return Ok(NewtonOutcome {
                z,
                residual: res_inf,
                iterations: iter,
                condition,
            });
        }
        if iter == opts.max_iter {
            break;
        }
        let j = match &mut jac {
            JacobianSource::FiniteDifference { rel_step } => {
                fd_jacobian(&mut f, &z, &fz, *rel_step)?
            }
            JacobianSource::Analytic(provider) => provider(&z)?,
        };
        condition = j.condition_number();
        if condition.is_nan() || condition > opts.singular_condition {
            return Err(Error::IllConditioned { condition });
        }
        let step = j.solve(&fz.scale(-1.0))?;

        let norm0 = fz.norm2();
        let mut lambda = 1.0;
        let mut best: Option<(Vector, Vector, f64)> = None;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial = z.axpy(lambda, &step);
            if let Ok(ft) = f(&trial) {
                let nt = ft.norm2();
                if nt.is_finite() {
                    if nt <= (1.0 - 1e-4 * lambda) * norm0 {
                        accepted = Some((trial, ft));
                        break;
                    }
                    if best.as_ref().is_none_or(|b| nt < b.2) {
                        best = Some((trial, ft, nt));
                    }
                }
            }
            lambda *= 0.5;
        }
        let (zn, fzn) = match accepted {
            Some(a) => a,
            None => match best {
                Some((zt, ft, nt)) if nt < norm0 => (zt, ft),
                _ => {
                    return Err(Error::NoConvergence {
                        method: "damped Newton (no descent)",
                        iterations: iter + 1,
                        residual: res_inf,
                    })
                }
            },
        };
        z = zn;
        fz = fzn;
    }
    Err(Error::NoConvergence {
        method: "damped Newton",
        iterations: opts.max_iter,
        residual: fz.norm_inf(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_problem_in_one_step() {
        let c = [3.0, -1.5, 0.25];
        let out = newton_solve(
            |z| Ok(Vector::from(vec![z[0] - c[0], z[1] - c[1], z[2] - c[2]])),
            JacobianSource::Analytic(Box::new(|_| Ok(Matrix::identity(3)))),
            &[10.0, 10.0, 10.0],
            &NewtonOptions::default(),
        )
        .unwrap();
        assert_eq!(out.iterations, 1);
        for (z, c) in out.z.iter().zip(c) {
            assert!((z - c).abs() < 1e-10);
        }
    }

    #[test]
    fn quadratic_system() {
        let out = newton_solve(
            |z| Ok(Vector::from(vec![z[0] * z[0] - 4.0, z[1] - z[0]])),
            JacobianSource::Analytic(Box::new(|z| {
                Ok(Matrix::from_rows(&[[2.0 * z[0], 0.0], [-1.0, 1.0]]))
            })),
            &[1.0, 0.0],
            &NewtonOptions::default(),
        )
        .unwrap();
        assert!((out.z[0] - 2.0).abs() < 1e-10 && (out.z[1] - 2.0).abs() < 1e-10);
        assert!(out.residual <= 1e-10);
    }

    #[test]
    fn damping_rescues_overshoot() {
        // atan has the classic Newton overshoot from |z0| > 1.39.
        let out = newton_solve(
            |z| Ok(Vector::from(vec![z[0].atan()])),
            JacobianSource::default(),
            &[3.0],
            &NewtonOptions::default(),
        )
        .unwrap();
        assert!(out.z[0].abs() < 1e-10);
    }

    #[test]
    fn singular_jacobian_reported() {
        let err = newton_solve(
            |z| {
                Ok(Vector::from(vec![
                    z[0] + z[1] - 1.0,
                    2.0 * z[0] + 2.0 * z[1] - 3.0,
                ]))
            },
            JacobianSource::default(),
            &[0.0, 0.0],
            &NewtonOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::IllConditioned { .. } | Error::Singular(_)
        ));
    }

    #[test]
    fn iteration_cap() {
        let opts = NewtonOptions {
            max_iter: 2,
            ..Default::default()
        };
        let err = newton_solve(
            |z| Ok(Vector::from(vec![z[0].powi(9) - 1e-3])),
            JacobianSource::default(),
            &[5.0],
            &opts,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. }));
    }
}
