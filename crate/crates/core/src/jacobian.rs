//! Jacobians of the stroboscopic map around a periodic orbit.

use crate::error::{Error, Result};
use crate::model::{Control, ConverterSpec, Stage};
use crate::numerics::{mat_exp, Matrix, Vector};
use crate::orbit::PeriodicOrbit;
use crate::sim::{CycleMap, Saturation};

/// Grazing threshold on the switching-sensitivity denominator, relative to
/// the ramp slope.
pub const GRAZING_BAND: f64 = 1e-9;

/// Relative distance from a limiter corner below which the discrete-duty map
/// is treated as non-differentiable.
pub const KINK_BAND: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JacobianMethod {
    ClosedForm,
    DiscreteDuty,
    /// Saturated cycle(s): the switching instant does not respond to the
    /// state, so Φ is the plain product of stage transitions.
    Saturated,
    FiniteDifference,
    /// Ordered product of per-cycle Jacobians (m = 2).
    Product,
}

impl JacobianMethod {
    pub fn label(self) -> &'static str {
        match self {
            JacobianMethod::ClosedForm => "closed-form",
            JacobianMethod::DiscreteDuty => "discrete-duty chain rule",
            JacobianMethod::Saturated => "saturated",
            JacobianMethod::FiniteDifference => "finite-difference",
            JacobianMethod::Product => "per-cycle product",
        }
    }
}

/// `(A1 − A2) x(d) + (B1 − B2) u`: the jump in the vector field at the
/// switching instant.
fn field_jump(spec: &ConverterSpec, xd: &[f64]) -> Vector {
    let a = spec.a(Stage::S1) - spec.a(Stage::S2);
    let b = spec.b(Stage::S1) - spec.b(Stage::S2);
    &a.mul_vec(xd) + &b.mul_vec(spec.u())
}

/// Single-cycle closed-form Jacobian at cycle-start state `x` with switching
/// instant `d` (seconds, strictly inside the cycle).
pub fn phi_cycle_closed_form(spec: &ConverterSpec, x: &[f64], d: f64) -> Result<Matrix> {
    let rc = spec
        .ramp_control()
        .ok_or_else(|| Error::InvalidArgument("closed-form Φ needs ramp control".into()))?;
    let t = spec.period();
    if !(d > 0.0 && d < t) {
        return Err(Error::InvalidArgument(format!(
            "closed-form Φ needs 0 < d < T, got d/T = {}",
            d / t
        )));
    }
    let map = CycleMap::new(spec)?;
    let xd = map.flow(Stage::S1, x, d)?;
    let slope = rc.ramp.slope();
    let field1 = spec.forcing(Stage::S1);
    let field1 = &spec.a(Stage::S1).mul_vec(&xd) + &field1;
    let denom = rc.c.dot_row(&field1) - slope;
    if denom.abs() < GRAZING_BAND * slope.abs() {
        return Err(Error::Grazing(format!(
            "switching sensitivity {denom:e} at d/T = {} (trajectory tangent to the ramp)",
            d / t
        )));
    }
    let jump = field_jump(spec, &xd);
    let correction = Matrix::outer(&jump, rc.c.as_slice()).scale(1.0 / denom);
    let bracket = &Matrix::identity(spec.dim()) - &correction;
    let e1 = mat_exp(spec.a(Stage::S1), d)?;
    let e2 = mat_exp(spec.a(Stage::S2), t - d)?;
    Ok(&(&e2 * &bracket) * &e1)
}

/// Closed-form Φ for an unsaturated ramp-controlled T-periodic orbit:
/// `e^{A2(T−d)} (I − ((A1−A2)x(d) + (B1−B2)u) C / (C(A1 x(d) + B1 u) − ḣ)) e^{A1 d}`.
pub fn phi_closed_form(spec: &ConverterSpec, orbit: &PeriodicOrbit) -> Result<Matrix> {
    if orbit.m != 1 {
        return Err(Error::InvalidArgument(
            "closed-form Φ is defined for T-periodic orbits".into(),
        ));
    }
    phi_cycle_closed_form(spec, &orbit.x0, orbit.d[0])
}

/// Single-cycle chain-rule Jacobian of the discrete duty law at `x`.
pub fn phi_cycle_discrete(spec: &ConverterSpec, x: &[f64]) -> Result<Matrix> {
    let dc = spec
        .discrete_control()
        .ok_or_else(|| Error::InvalidArgument("discrete-duty Φ needs discrete control".into()))?;
    let t = spec.period();
    let raw = dc.raw_duration(x, t);
    let d = dc.duration(x, t);
    let band = KINK_BAND * t;
    if (raw - 0.0).abs() <= band || (raw - t).abs() <= band {
        return Err(Error::NonSmooth(format!(
            "duty law at the limiter corner (d/T = {})",
            raw / t
        )));
    }
    let e1 = mat_exp(spec.a(Stage::S1), d)?;
    let e2 = mat_exp(spec.a(Stage::S2), t - d)?;
    if raw <= 0.0 || raw >= t {
        return Ok(&e2 * &e1);
    }
    let map = CycleMap::new(spec)?;
    let xd = map.flow(Stage::S1, x, d)?;
    let jump = field_jump(spec, &xd);
    let inner = &e1 - &Matrix::outer(&jump, dc.gains.as_slice());
    Ok(&e2 * &inner)
}

/// Chain-rule Φ for a discrete-duty T-periodic orbit:
/// `e^{A2(T−d)} (e^{A1 d} − ((A1−A2)x(d) + (B1−B2)u) K)` on the interior
/// branch of the limiter, `e^{A2(T−d)} e^{A1 d}` when saturated.
pub fn phi_discrete_duty(spec: &ConverterSpec, orbit: &PeriodicOrbit) -> Result<Matrix> {
    if orbit.m != 1 {
        return Err(Error::InvalidArgument(
            "discrete-duty Φ is defined for T-periodic orbits".into(),
        ));
    }
    phi_cycle_discrete(spec, &orbit.x0)
}

/// Central-difference Jacobian of the `m`-cycle map at `x`.
pub fn map_finite_difference(spec: &ConverterSpec, x: &[f64], m: usize) -> Result<Matrix> {
    let map = CycleMap::new(spec)?;
    let n = spec.dim();
    let run = |p: &[f64]| -> Result<Vector> {
        let mut s = Vector::from(p);
        for _ in 0..m {
            s = map.step(&s)?.x_next;
        }
        Ok(s)
    };
    let mut jac = Matrix::zeros(n, n);
    let mut probe = x.to_vec();
    for j in 0..n {
        let h = 1e-6 * (1.0 + x[j].abs());
        probe[j] = x[j] + h;
        let fp = run(&probe)?;
        probe[j] = x[j] - h;
        let fm = run(&probe)?;
        probe[j] = x[j];
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Central differences of the `m`-cycle stroboscopic map around `x0`.
pub fn phi_finite_difference(spec: &ConverterSpec, orbit: &PeriodicOrbit) -> Result<Matrix> {
    map_finite_difference(spec, &orbit.x0, orbit.m)
}

/// Jacobian of one cycle starting at `x`, using the analytic form that
/// applies, falling back to finite differences.
pub fn cycle_jacobian(spec: &ConverterSpec, x: &[f64]) -> Result<(Matrix, JacobianMethod)> {
    let map = CycleMap::new(spec)?;
    let cycle = map.step(x)?;
    match spec.control() {
        Control::Ramp(_) => match cycle.saturated {
            Saturation::None => Ok((
                phi_cycle_closed_form(spec, x, cycle.d)?,
                JacobianMethod::ClosedForm,
            )),
            // Without a crossing nearby, the whole cycle is stage 1.
            Saturation::FullStage1 => Ok((
                mat_exp(spec.a(Stage::S1), spec.period())?,
                JacobianMethod::Saturated,
            )),
            Saturation::FullStage2 => Ok((
                map_finite_difference(spec, x, 1)?,
                JacobianMethod::FiniteDifference,
            )),
        },
        Control::DiscreteDuty(_) => {
            let method = if cycle.saturated == Saturation::None {
                JacobianMethod::DiscreteDuty
            } else {
                JacobianMethod::Saturated
            };
            Ok((phi_cycle_discrete(spec, x)?, method))
        }
    }
}

/// The Jacobian used for stability decisions: closed form for ramp m = 1,
/// chain rule for discrete m = 1, and for m = 2 the ordered product of the
/// two per-cycle finite-difference Jacobians.
pub fn orbit_jacobian(
    spec: &ConverterSpec,
    orbit: &PeriodicOrbit,
) -> Result<(Matrix, JacobianMethod)> {
    match orbit.m {
        1 => match cycle_jacobian(spec, &orbit.x0) {
            Ok(r) => Ok(r),
            Err(Error::Grazing(_)) | Err(Error::NonSmooth(_)) => Ok((
                phi_finite_difference(spec, orbit)?,
                JacobianMethod::FiniteDifference,
            )),
            Err(e) => Err(e),
        },
        _ => {
            let mut total = Matrix::identity(spec.dim());
            for x in &orbit.states {
                let step = map_finite_difference(spec, x, 1)?;
                total = &step * &total;
            }
            Ok((total, JacobianMethod::Product))
        }
    }
}

/// Largest entrywise relative difference over entries above `floor` in
/// magnitude (in either matrix).
pub fn relative_mismatch(a: &Matrix, b: &Matrix, floor: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
        let scale = x.abs().max(y.abs());
        if scale > floor {
            worst = worst.max((x - y).abs() / scale);
        }
    }
    worst
}
