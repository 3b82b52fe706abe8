//! Two-stage switched-linear converter description.
//!
//! Within each clock period the converter runs stage S1 on `[0, d)` and stage
//! S2 on `[d, T)`, each stage being the affine system `ẋ = A_i x + B_i u`.
//! The first-stage duration `d` comes either from a ramp comparator
//! (`y = C x + D u` meets the sawtooth `h(t)`) or from a per-cycle discrete
//! duty law with a limiter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};

/// T-periodic sawtooth `h(t) = V_l + (V_h − V_l)·((t/T) mod 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ramp {
    pub v_low: f64,
    pub v_high: f64,
    pub period: f64,
}

impl Ramp {
    pub fn new(v_low: f64, v_high: f64, period: f64) -> Result<Ramp> {
        let r = Ramp {
            v_low,
            v_high,
            period,
        };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<()> {
        if !(self.v_low.is_finite() && self.v_high.is_finite() && self.period.is_finite()) {
            return Err(Error::NonFinite("ramp parameters".into()));
        }
        if self.v_high <= self.v_low {
            return Err(Error::InvalidArgument(format!(
                "ramp needs v_high > v_low (got {} <= {})",
                self.v_high, self.v_low
            )));
        }
        if self.period <= 0.0 {
            return Err(Error::InvalidArgument(
                "ramp period must be positive".into(),
            ));
        }
        Ok(())
    }

    /// `h(t)` for any `t`, wrapping modulo the period.
    pub fn value(&self, t: f64) -> f64 {
        let phase = (t / self.period).rem_euclid(1.0);
        self.v_low + (self.v_high - self.v_low) * phase
    }

    /// `h(τ)` for an in-cycle time `τ ∈ [0, T]`, with `h(T) = V_h` (the left
    /// limit at the end of the cycle) instead of wrapping back to `V_l`.
    pub fn value_in_cycle(&self, tau: f64) -> f64 {
        self.v_low + self.slope() * tau
    }

    /// Constant slope `ḣ = (V_h − V_l)/T`.
    pub fn slope(&self) -> f64 {
        (self.v_high - self.v_low) / self.period
    }

    pub fn amplitude(&self) -> f64 {
        self.v_high - self.v_low
    }
}

/// Saturation `ℓ(t)`: 0 for `t ≤ 0`, `t` on `(0, T]`, `T` above.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Limiter {
    pub period: f64,
}

impl Limiter {
    pub fn new(period: f64) -> Limiter {
        Limiter { period }
    }

    pub fn apply(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else if t > self.period {
            self.period
        } else {
            t
        }
    }
}

/// Comparator control: S1 → S2 at the first in-cycle instant where
/// `C x(t) + D u = h(t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RampControl {
    /// 1×N feedback row.
    pub c: Matrix,
    /// 1×2 feedforward row.
    pub d: Matrix,
    pub ramp: Ramp,
}

impl RampControl {
    /// Feedback signal `y = C x + D u`.
    pub fn feedback(&self, x: &[f64], u: &[f64]) -> f64 {
        self.c.dot_row(x) + self.d.dot_row(u)
    }
}

/// Per-cycle duty law `d_n = ℓ(base_duty·T − K (x_n − x_ref))`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteDutyControl {
    pub base_duty: f64,
    /// 1×N gain row.
    pub gains: Matrix,
    pub x_ref: Vector,
}

impl DiscreteDutyControl {
    /// Unsaturated argument of the limiter, in seconds.
    pub fn raw_duration(&self, x: &[f64], period: f64) -> f64 {
        let dev: Vec<f64> = x
            .iter()
            .zip(self.x_ref.iter())
            .map(|(a, b)| a - b)
            .collect();
        self.base_duty * period - self.gains.dot_row(&dev)
    }

    pub fn duration(&self, x: &[f64], period: f64) -> f64 {
        Limiter::new(period).apply(self.raw_duration(x, period))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Control {
    Ramp(RampControl),
    DiscreteDuty(DiscreteDutyControl),
}

/// One of the two switching stages of a cycle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    S1,
    S2,
}

impl Stage {
    pub fn label(self) -> &'static str {
        match self {
            Stage::S1 => "S1",
            Stage::S2 => "S2",
        }
    }

    pub fn other(self) -> Stage {
        match self {
            Stage::S1 => Stage::S2,
            Stage::S2 => Stage::S1,
        }
    }
}

/// Raw parts of a converter, validated by [`ConverterSpec::new`].
#[derive(Clone, Debug)]
pub struct ConverterParts {
    pub a1: Matrix,
    pub a2: Matrix,
    pub b1: Matrix,
    pub b2: Matrix,
    pub e1: Matrix,
    pub e2: Matrix,
    /// `(v_s, v_r)`.
    pub u: Vector,
    pub period: f64,
    pub control: Control,
    /// Stage with the source connected. `None` infers it from which `B` has
    /// a nonzero source column.
    pub on_stage: Option<Stage>,
}

/// Validated converter description. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct ConverterSpec {
    a1: Matrix,
    a2: Matrix,
    b1: Matrix,
    b2: Matrix,
    e1: Matrix,
    e2: Matrix,
    u: Vector,
    period: f64,
    control: Control,
    on_stage: Stage,
}

fn check_shape(name: &str, m: &Matrix, rows: usize, cols: usize) -> Result<()> {
    if m.rows() != rows || m.cols() != cols {
        return Err(Error::Dimension(format!(
            "{name} must be {rows}x{cols}, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite(name.to_string()));
    }
    Ok(())
}

impl ConverterSpec {
    pub fn new(p: ConverterParts) -> Result<ConverterSpec> {
        let n = p.a1.rows();
        if n == 0 {
            return Err(Error::Dimension(
                "state dimension must be at least 1".into(),
            ));
        }
        check_shape("A1", &p.a1, n, n)?;
        check_shape("A2", &p.a2, n, n)?;
        check_shape("B1", &p.b1, n, 2)?;
        check_shape("B2", &p.b2, n, 2)?;
        check_shape("E1", &p.e1, 1, n)?;
        check_shape("E2", &p.e2, 1, n)?;
        if p.u.dim() != 2 {
            return Err(Error::Dimension(format!(
                "input u must have 2 components (v_s, v_r), got {}",
                p.u.dim()
            )));
        }
        if !p.u.is_finite() {
            return Err(Error::NonFinite("input u".into()));
        }
        if !(p.period.is_finite() && p.period > 0.0) {
            return Err(Error::InvalidArgument("period must be positive".into()));
        }
        match &p.control {
            Control::Ramp(rc) => {
                check_shape("C", &rc.c, 1, n)?;
                check_shape("D", &rc.d, 1, 2)?;
                rc.ramp.validate()?;
                if (rc.ramp.period - p.period).abs() > 1e-12 * p.period {
                    return Err(Error::InvalidArgument(format!(
                        "ramp period {} differs from switching period {}",
                        rc.ramp.period, p.period
                    )));
                }
            }
            Control::DiscreteDuty(dc) => {
                check_shape("K", &dc.gains, 1, n)?;
                if dc.x_ref.dim() != n {
                    return Err(Error::Dimension(format!(
                        "x_ref must have {n} components, got {}",
                        dc.x_ref.dim()
                    )));
                }
                if !dc.base_duty.is_finite() || !dc.x_ref.is_finite() {
                    return Err(Error::NonFinite("discrete duty control".into()));
                }
            }
        }
        let on_stage = match p.on_stage {
            Some(s) => s,
            None => infer_on_stage(&p.b1, &p.b2),
        };
        Ok(ConverterSpec {
            a1: p.a1,
            a2: p.a2,
            b1: p.b1,
            b2: p.b2,
            e1: p.e1,
            e2: p.e2,
            u: p.u,
            period: p.period,
            control: p.control,
            on_stage,
        })
    }

    pub fn into_parts(self) -> ConverterParts {
        ConverterParts {
            a1: self.a1,
            a2: self.a2,
            b1: self.b1,
            b2: self.b2,
            e1: self.e1,
            e2: self.e2,
            u: self.u,
            period: self.period,
            control: self.control,
            on_stage: Some(self.on_stage),
        }
    }

    /// Same converter with a different input vector `(v_s, v_r)`.
    pub fn with_input(&self, u: Vector) -> Result<ConverterSpec> {
        let mut parts = self.clone().into_parts();
        parts.u = u;
        ConverterSpec::new(parts)
    }

    pub fn with_source_voltage(&self, v_s: f64) -> Result<ConverterSpec> {
        self.with_input(Vector::from(vec![v_s, self.u[1]]))
    }

    pub fn dim(&self) -> usize {
        self.a1.rows()
    }

    pub fn a(&self, stage: Stage) -> &Matrix {
        match stage {
            Stage::S1 => &self.a1,
            Stage::S2 => &self.a2,
        }
    }

    pub fn b(&self, stage: Stage) -> &Matrix {
        match stage {
            Stage::S1 => &self.b1,
            Stage::S2 => &self.b2,
        }
    }

    pub fn e(&self, stage: Stage) -> &Matrix {
        match stage {
            Stage::S1 => &self.e1,
            Stage::S2 => &self.e2,
        }
    }

    /// Constant forcing `B_i u` of a stage.
    pub fn forcing(&self, stage: Stage) -> Vector {
        self.b(stage).mul_vec(&self.u)
    }

    /// Output voltage `E_i x` in the given stage.
    pub fn output(&self, stage: Stage, x: &[f64]) -> f64 {
        self.e(stage).dot_row(x)
    }

    pub fn u(&self) -> &Vector {
        &self.u
    }

    pub fn source_voltage(&self) -> f64 {
        self.u[0]
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn switching_frequency(&self) -> f64 {
        1.0 / self.period
    }

    pub fn control(&self) -> &Control {
        &self.control
    }

    pub fn ramp_control(&self) -> Option<&RampControl> {
        match &self.control {
            Control::Ramp(rc) => Some(rc),
            Control::DiscreteDuty(_) => None,
        }
    }

    pub fn discrete_control(&self) -> Option<&DiscreteDutyControl> {
        match &self.control {
            Control::DiscreteDuty(dc) => Some(dc),
            Control::Ramp(_) => None,
        }
    }

    pub fn on_stage(&self) -> Stage {
        self.on_stage
    }

    /// Converts a stage-1 fraction `d/T` into the switch-ON fraction.
    pub fn on_fraction(&self, s1_fraction: f64) -> f64 {
        match self.on_stage {
            Stage::S1 => s1_fraction,
            Stage::S2 => 1.0 - s1_fraction,
        }
    }

    /// Inverse of [`ConverterSpec::on_fraction`].
    pub fn s1_fraction(&self, on_fraction: f64) -> f64 {
        self.on_fraction(on_fraction)
    }
}

fn infer_on_stage(b1: &Matrix, b2: &Matrix) -> Stage {
    let source_col = |b: &Matrix| (0..b.rows()).any(|i| b[(i, 0)] != 0.0);
    match (source_col(b1), source_col(b2)) {
        (true, false) => Stage::S1,
        (false, true) => Stage::S2,
        // Ambiguous: treat the post-switching stage as ON.
        _ => Stage::S2,
    }
}

/// Result of [`saturated_always_on_check`].
#[derive(Clone, Debug)]
pub struct AlwaysOnCheck {
    /// Whether the limiter pins the ON stage for the whole cycle at the
    /// ON-stage equilibrium.
    pub feasible: bool,
    pub equilibrium: Vector,
    /// Limiter argument at the equilibrium (seconds); feasible iff `≤ 0` when
    /// the ON stage is S2.
    pub limiter_argument: f64,
}

/// Whether the switch can stay ON permanently under discrete duty control:
/// evaluates the duty law at the ON-stage equilibrium `x_eq = −A_on⁻¹ B_on u`.
pub fn saturated_always_on_check(spec: &ConverterSpec) -> Result<AlwaysOnCheck> {
    let dc = spec.discrete_control().ok_or_else(|| {
        Error::InvalidArgument("always-on check needs discrete duty control".into())
    })?;
    let on = spec.on_stage();
    let rhs = spec.forcing(on).scale(-1.0);
    let equilibrium = spec.a(on).solve(&rhs)?;
    let arg = dc.raw_duration(&equilibrium, spec.period());
    // ON is stage 2: always on needs d_n = 0. ON is stage 1: needs d_n = T.
    let feasible = match on {
        Stage::S2 => arg <= 0.0,
        Stage::S1 => arg >= spec.period(),
    };
    Ok(AlwaysOnCheck {
        feasible,
        equilibrium,
        limiter_argument: arg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ramp_endpoints_and_midpoint() {
        let r = Ramp::new(3.8, 8.2, 400e-6).unwrap();
        assert_eq!(r.value(0.0), 3.8);
        assert!((r.value(400e-6 * (1.0 - 1e-12)) - 8.2).abs() < 1e-9);
        assert_eq!(r.value_in_cycle(400e-6), 8.2);
        assert!((r.value(200e-6) - 6.0).abs() < 1e-12);
        assert!((r.slope() - 4.4 / 400e-6).abs() < 1e-6);
    }

    #[test]
    fn ramp_rejects_inverted_levels() {
        assert!(Ramp::new(8.2, 3.8, 1.0).is_err());
        assert!(Ramp::new(1.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn limiter_branches() {
        let t = 400e-6;
        let l = Limiter::new(t);
        assert_eq!(l.apply(-1.0), 0.0);
        assert_eq!(l.apply(0.0), 0.0);
        assert_eq!(l.apply(t / 2.0), t / 2.0);
        assert_eq!(l.apply(t), t);
        assert_eq!(l.apply(2.0 * t), t);
    }

    proptest! {
        #[test]
        fn limiter_range_and_idempotence(x in -1e3f64..1e3) {
            let l = Limiter::new(0.7);
            let y = l.apply(x);
            prop_assert!((0.0..=0.7).contains(&y));
            prop_assert_eq!(l.apply(y), y);
        }

        #[test]
        fn ramp_is_periodic(k in 0u32..50, frac in 0.001f64..0.999) {
            let r = Ramp::new(2.8, 8.2, 0.25).unwrap();
            let t = (k as f64 + frac) * 0.25;
            prop_assert!((r.value(t) - r.value(t + 0.25)).abs() <= 1e-12);
        }
    }

    #[test]
    fn dimension_validation() {
        let spec = crate::presets::PresetKind::PdBuck
            .defaults()
            .build()
            .unwrap();
        let mut parts = spec.into_parts();
        parts.b1 = Matrix::zeros(3, 2);
        assert!(matches!(
            ConverterSpec::new(parts),
            Err(Error::Dimension(_))
        ));
    }
}
