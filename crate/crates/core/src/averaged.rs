//! State-space averaged model and its linearization, kept for comparison
//! with the sampled-data analysis.
//!
//! Duties are expressed as the fraction of the period spent in the switch-ON
//! stage. The ON stage is S2 for `pd_buck`/`sn_buck` and S1 for `ns_buck`,
//! so the mapping to the first-stage fraction `d/T` is done explicitly.

use crate::error::{Error, Result};
use crate::model::{ConverterSpec, Stage};
use crate::numerics::{eigenvalues, try_bracketed_root, ComplexEig, Matrix, Vector};

/// Relative band on `|Re λ| / |λ|` inside which a complex pair is flagged as
/// close to a Hopf crossing.
pub const HOPF_BAND: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct AveragedOperatingPoint {
    /// Fraction of the period in the ON stage.
    pub on_duty: f64,
    /// Fraction of the period in S1 (`d/T`).
    pub s1_fraction: f64,
    pub x_ave: Vector,
    pub jacobian: Matrix,
    /// Continuous-time eigenvalues of the averaged linearization.
    pub eigenvalues: Vec<ComplexEig>,
    pub near_hopf: bool,
}

impl AveragedOperatingPoint {
    pub fn is_stable(&self) -> bool {
        self.eigenvalues.iter().all(|e| e.re < 0.0)
    }

    /// The complex eigenvalue with the largest real part and positive
    /// imaginary part, if any.
    pub fn leading_complex_pair(&self) -> Option<ComplexEig> {
        self.eigenvalues
            .iter()
            .filter(|e| e.im > 0.0)
            .copied()
            .max_by(|a, b| a.re.total_cmp(&b.re))
    }
}

fn averaged_matrices(spec: &ConverterSpec, on_duty: f64) -> (Matrix, Matrix) {
    let on = spec.on_stage();
    let off = on.other();
    let blend = |m_on: &Matrix, m_off: &Matrix| {
        if m_on == m_off {
            m_on.clone()
        } else {
            &m_on.scale(on_duty) + &m_off.scale(1.0 - on_duty)
        }
    };
    (
        blend(spec.a(on), spec.a(off)),
        blend(spec.b(on), spec.b(off)),
    )
}

/// `X_ave = −A_ave⁻¹ B_ave u` at the given ON duty.
pub fn averaged_equilibrium(spec: &ConverterSpec, on_duty: f64) -> Result<Vector> {
    if !on_duty.is_finite() {
        return Err(Error::NonFinite("duty".into()));
    }
    let (a, b) = averaged_matrices(spec, on_duty);
    let rhs = b.mul_vec(spec.u()).scale(-1.0);
    a.solve(&rhs)
        .map_err(|e| Error::Singular(format!("averaged A at duty {on_duty}: {e}")))
}

/// Where a steady-state duty came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DutySource {
    /// Root of the averaged PWM consistency condition.
    Consistent,
    /// No root in (0, 1); duty of the located sampled-data orbit.
    OrbitFallback,
}

#[derive(Clone, Copy, Debug)]
pub struct DutyEstimate {
    pub on_duty: f64,
    pub source: DutySource,
}

/// Mismatch `C X_ave + D u − h(d)` of the averaged comparator condition as a
/// function of the S1 fraction `δ = d/T`.
fn consistency_mismatch(spec: &ConverterSpec, s1_fraction: f64) -> Result<f64> {
    let rc = spec
        .ramp_control()
        .ok_or_else(|| Error::InvalidArgument("consistent duty needs ramp control".into()))?;
    let x = averaged_equilibrium(spec, spec.on_fraction(s1_fraction))?;
    Ok(rc.feedback(&x, spec.u()) - rc.ramp.value_in_cycle(s1_fraction * rc.ramp.period))
}

/// ON duty satisfying the averaged PWM condition, if one exists in (0, 1).
pub fn consistent_duty_root(spec: &ConverterSpec) -> Result<Option<f64>> {
    let lo = 1e-9;
    let hi = 1.0 - 1e-9;
    let f_lo = consistency_mismatch(spec, lo)?;
    let f_hi = consistency_mismatch(spec, hi)?;
    if f_lo.signum() == f_hi.signum() {
        return Ok(None);
    }
    let root = try_bracketed_root(|s| consistency_mismatch(spec, s), lo, hi, 1e-13)?;
    Ok(Some(spec.on_fraction(root)))
}

/// Steady-state ON duty for the averaged model: the consistency root when it
/// exists, else the duty of the sampled-data period-one orbit.
pub fn consistent_duty(spec: &ConverterSpec) -> Result<DutyEstimate> {
    if let Some(on_duty) = consistent_duty_root(spec)? {
        return Ok(DutyEstimate {
            on_duty,
            source: DutySource::Consistent,
        });
    }
    let mut last = None;
    for on in [0.5, 0.25, 0.75, 0.1, 0.9] {
        match crate::orbit::find_orbit(spec, 1, &crate::orbit::OrbitGuess::OnDuty(on)) {
            Ok(orbit) => {
                return Ok(DutyEstimate {
                    on_duty: spec.on_fraction(orbit.duty[0]),
                    source: DutySource::OrbitFallback,
                })
            }
            Err(e) => last = Some(e),
        }
    }
    Err(Error::NoConvergence {
        method: match last {
            Some(_) => "consistent duty (no root, orbit fallback failed)",
            None => "consistent duty",
        },
        iterations: 0,
        residual: f64::NAN,
    })
}

/// Linearization of the averaged model at the given ON duty:
/// `A_ave + ((A1 − A2) X_ave + (B1 − B2) u) C / (V_h − V_l)`.
pub fn averaged_jacobian(spec: &ConverterSpec, on_duty: f64) -> Result<AveragedOperatingPoint> {
    let rc = spec.ramp_control().ok_or_else(|| {
        Error::Unsupported("averaged linearization is defined for ramp control only".into())
    })?;
    let x_ave = averaged_equilibrium(spec, on_duty)?;
    let (a_ave, _) = averaged_matrices(spec, on_duty);
    let a1 = spec.a(Stage::S1);
    let a2 = spec.a(Stage::S2);
    let jump =
        &(a1 - a2).mul_vec(&x_ave) + &(spec.b(Stage::S1) - spec.b(Stage::S2)).mul_vec(spec.u());
    let correction = Matrix::outer(&jump, rc.c.as_slice()).scale(1.0 / rc.ramp.amplitude());
    let jacobian = &a_ave + &correction;
    let eigenvalues = eigenvalues(&jacobian)?;
    let near_hopf = eigenvalues
        .iter()
        .any(|e| e.im != 0.0 && e.re.abs() <= HOPF_BAND * e.norm());
    Ok(AveragedOperatingPoint {
        on_duty,
        s1_fraction: spec.s1_fraction(on_duty),
        x_ave,
        jacobian,
        eigenvalues,
        near_hopf,
    })
}

/// Averaged linearization at the consistent duty.
pub fn averaged_operating_point(spec: &ConverterSpec) -> Result<AveragedOperatingPoint> {
    let duty = consistent_duty(spec)?;
    averaged_jacobian(spec, duty.on_duty)
}
