//! The three worked converter examples, built from physical parameters.
//!
//! * `pd_buck` — voltage-mode buck with proportional error amplifier; loses
//!   stability through a period doubling as the source voltage rises.
//! * `sn_buck` — buck under a per-cycle discrete duty law with limiter
//!   (switch OFF then ON each cycle); shows a saddle-node fold and a
//!   coexisting always-on state.
//! * `ns_buck` — voltage-mode buck with an integrating error amplifier;
//!   a complex multiplier pair leaves the unit circle (Neimark).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{
    Control, ConverterParts, ConverterSpec, DiscreteDutyControl, Ramp, RampControl, Stage,
};
use crate::numerics::{Matrix, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PresetKind {
    PdBuck,
    SnBuck,
    NsBuck,
}

impl PresetKind {
    pub const ALL: [PresetKind; 3] = [PresetKind::PdBuck, PresetKind::SnBuck, PresetKind::NsBuck];

    pub fn name(self) -> &'static str {
        match self {
            PresetKind::PdBuck => "pd_buck",
            PresetKind::SnBuck => "sn_buck",
            PresetKind::NsBuck => "ns_buck",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            PresetKind::PdBuck => "voltage-mode buck, proportional feedback (period doubling)",
            PresetKind::SnBuck => "buck with discrete-time duty law and limiter (saddle-node)",
            PresetKind::NsBuck => "voltage-mode buck, integrating error amplifier (Neimark)",
        }
    }

    /// Default physical parameters, in a fixed order.
    pub fn defaults(self) -> PresetParams {
        let values: Vec<(&'static str, f64)> = match self {
            PresetKind::PdBuck => vec![
                ("T", 400e-6),
                ("L", 20e-3),
                ("C", 47e-6),
                ("R", 22.0),
                ("vr", 11.3),
                ("g1", 8.4),
                ("Vl", 3.8),
                ("Vh", 8.2),
                ("vs", 24.0),
            ],
            PresetKind::SnBuck => vec![
                ("T", 400e-6),
                ("L", 20e-3),
                ("C", 47e-6),
                ("R", 22.0),
                ("vs", 19.9),
                ("vr", 0.0),
                ("base_duty", 0.3),
                ("ki", -8.574e-4),
                ("kv", 5.53e-5),
                ("Ip", 0.6785),
                ("Vp", 14.0263),
            ],
            PresetKind::NsBuck => vec![
                ("fs", 15e3),
                ("L", 0.9e-3),
                ("C", 22e-6),
                ("R", 20.0),
                ("vr", 5.0),
                ("R1", 7.5e3),
                ("R2", 7.5e3),
                ("R3", 60e3),
                ("C2", 0.4e-6),
                ("vs", 30.0),
                ("Vl", 2.8),
                ("Vh", 8.2),
            ],
        };
        PresetParams { kind: self, values }
    }
}

impl fmt::Display for PresetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PresetKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PresetKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown preset `{s}` (expected one of pd_buck, sn_buck, ns_buck)"
                ))
            })
    }
}

/// Physical parameters of a preset; overrides rebuild the matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct PresetParams {
    kind: PresetKind,
    values: Vec<(&'static str, f64)>,
}

impl PresetParams {
    pub fn kind(&self) -> PresetKind {
        self.kind
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        self.values.iter().copied()
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        self.values
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| self.unknown(name))
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("parameter {name}")));
        }
        let kind = self.kind;
        match self.values.iter_mut().find(|(k, _)| *k == name) {
            Some(slot) => {
                slot.1 = value;
                Ok(())
            }
            None => Err(PresetParams {
                kind,
                values: self.values.clone(),
            }
            .unknown(name)),
        }
    }

    pub fn with(mut self, name: &str, value: f64) -> Result<Self> {
        self.set(name, value)?;
        Ok(self)
    }

    fn unknown(&self, name: &str) -> Error {
        let known: Vec<&str> = self.values.iter().map(|(k, _)| *k).collect();
        Error::InvalidArgument(format!(
            "preset {} has no parameter `{name}` (known: {})",
            self.kind,
            known.join(", ")
        ))
    }

    pub fn build(&self) -> Result<ConverterSpec> {
        let p = |k: &str| self.get(k);
        match self.kind {
            PresetKind::PdBuck => {
                let (t, l, c, r) = (p("T")?, p("L")?, p("C")?, p("R")?);
                let g1 = p("g1")?;
                let a = Matrix::from_rows(&[[0.0, -1.0 / l], [1.0 / c, -1.0 / (r * c)]]);
                ConverterSpec::new(ConverterParts {
                    a1: a.clone(),
                    a2: a,
                    b1: Matrix::zeros(2, 2),
                    b2: Matrix::from_rows(&[[1.0 / l, 0.0], [0.0, 0.0]]),
                    e1: Matrix::row(&[0.0, 1.0]),
                    e2: Matrix::row(&[0.0, 1.0]),
                    u: Vector::from(vec![p("vs")?, p("vr")?]),
                    period: t,
                    control: Control::Ramp(RampControl {
                        c: Matrix::row(&[0.0, g1]),
                        d: Matrix::row(&[0.0, -g1]),
                        ramp: Ramp::new(p("Vl")?, p("Vh")?, t)?,
                    }),
                    on_stage: Some(Stage::S2),
                })
            }
            PresetKind::SnBuck => {
                let (t, l, c, r) = (p("T")?, p("L")?, p("C")?, p("R")?);
                let a = Matrix::from_rows(&[[0.0, -1.0 / l], [1.0 / c, -1.0 / (r * c)]]);
                ConverterSpec::new(ConverterParts {
                    a1: a.clone(),
                    a2: a,
                    b1: Matrix::zeros(2, 2),
                    b2: Matrix::from_rows(&[[1.0 / l, 0.0], [0.0, 0.0]]),
                    e1: Matrix::row(&[0.0, 1.0]),
                    e2: Matrix::row(&[0.0, 1.0]),
                    u: Vector::from(vec![p("vs")?, p("vr")?]),
                    period: t,
                    control: Control::DiscreteDuty(DiscreteDutyControl {
                        base_duty: p("base_duty")?,
                        gains: Matrix::row(&[p("ki")?, p("kv")?]),
                        x_ref: Vector::from(vec![p("Ip")?, p("Vp")?]),
                    }),
                    on_stage: Some(Stage::S2),
                })
            }
            PresetKind::NsBuck => {
                let t = 1.0 / p("fs")?;
                let (l, c, r) = (p("L")?, p("C")?, p("R")?);
                let (r1, r2, r3, c2) = (p("R1")?, p("R2")?, p("R3")?, p("C2")?);
                let a = Matrix::from_rows(&[
                    [0.0, -1.0 / l, 0.0],
                    [1.0 / c, -1.0 / (r * c), 0.0],
                    [0.0, 1.0 / (r1 * c2), -1.0 / (r3 * c2)],
                ]);
                let ref_gain = -(1.0 / r1 + 1.0 / r2) / c2;
                ConverterSpec::new(ConverterParts {
                    a1: a.clone(),
                    a2: a,
                    b1: Matrix::from_rows(&[[1.0 / l, 0.0], [0.0, 0.0], [0.0, ref_gain]]),
                    b2: Matrix::from_rows(&[[0.0, 0.0], [0.0, 0.0], [0.0, ref_gain]]),
                    e1: Matrix::row(&[0.0, 1.0, 0.0]),
                    e2: Matrix::row(&[0.0, 1.0, 0.0]),
                    u: Vector::from(vec![p("vs")?, p("vr")?]),
                    period: t,
                    control: Control::Ramp(RampControl {
                        c: Matrix::row(&[0.0, 0.0, -1.0]),
                        d: Matrix::row(&[0.0, 1.0]),
                        ramp: Ramp::new(p("Vl")?, p("Vh")?, t)?,
                    }),
                    on_stage: Some(Stage::S1),
                })
            }
        }
    }
}

/// Builds a preset with default parameters.
pub fn preset(kind: PresetKind) -> Result<ConverterSpec> {
    kind.defaults().build()
}

/// Builds a preset by name with the source voltage set to `v_s`.
pub fn preset_at(name: &str, v_s: f64) -> Result<ConverterSpec> {
    name.parse::<PresetKind>()?
        .defaults()
        .with("vs", v_s)?
        .build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::saturated_always_on_check;
    use crate::numerics::bracketed_root;

    #[test]
    fn pd_buck_matches_parameter_list() {
        let s = preset_at("pd_buck", 24.0).unwrap();
        assert_eq!(s.period(), 400e-6);
        let rc = s.ramp_control().unwrap();
        assert_eq!((rc.ramp.v_low, rc.ramp.v_high), (3.8, 8.2));
        assert_eq!(s.u().to_vec(), vec![24.0, 11.3]);
        assert_eq!(rc.c.as_slice(), &[0.0, 8.4]);
        assert_eq!(rc.d.as_slice(), &[0.0, -8.4]);
        assert_eq!(s.b(Stage::S1).norm_max(), 0.0);
        assert_eq!(s.b(Stage::S2)[(0, 0)], 1.0 / 20e-3);
        assert_eq!(s.a(Stage::S1), s.a(Stage::S2));
        assert_eq!(s.on_stage(), Stage::S2);
    }

    #[test]
    fn sn_buck_gains() {
        let s = preset(PresetKind::SnBuck).unwrap();
        let dc = s.discrete_control().unwrap();
        assert_eq!(dc.gains.as_slice(), &[-8.574e-4, 5.53e-5]);
        assert_eq!(dc.x_ref.to_vec(), vec![0.6785, 14.0263]);
        assert_eq!(dc.base_duty, 0.3);
    }

    #[test]
    fn ns_buck_ramp_and_dimension() {
        let s = preset(PresetKind::NsBuck).unwrap();
        assert_eq!(s.dim(), 3);
        let r = s.ramp_control().unwrap().ramp;
        assert_eq!((r.v_low, r.v_high), (2.8, 8.2));
        let t = s.period();
        assert!((r.value(0.25 * t) - (2.8 + 5.4 * 0.25)).abs() < 1e-12);
        assert_eq!(s.on_stage(), Stage::S1);
    }

    #[test]
    fn unknown_names() {
        assert!("boost".parse::<PresetKind>().is_err());
        assert!(PresetKind::PdBuck.defaults().with("ki", 1.0).is_err());
    }

    #[test]
    fn always_on_check_examples() {
        let hi = saturated_always_on_check(&preset_at("sn_buck", 20.5).unwrap()).unwrap();
        assert!(hi.feasible);
        assert!((hi.equilibrium[1] - 20.5).abs() < 1e-9);
        assert!((hi.equilibrium[0] - 20.5 / 22.0).abs() < 1e-12);
        let lo = saturated_always_on_check(&preset_at("sn_buck", 18.5).unwrap()).unwrap();
        assert!(!lo.feasible);
    }

    #[test]
    fn always_on_threshold_matches_closed_form() {
        // Smallest feasible v_s from the inequality solved by hand:
        // v_s* = (0.3T + k_i I_p + k_v V_p) / (k_i/R + k_v).
        let (t, ki, kv, ip, vp, r) = (400e-6, -8.574e-4, 5.53e-5, 0.6785, 14.0263, 22.0);
        let closed = (0.3 * t + ki * ip + kv * vp) / (ki / r + kv);
        let f = |v: f64| {
            saturated_always_on_check(&preset_at("sn_buck", v).unwrap())
                .unwrap()
                .limiter_argument
        };
        let root = bracketed_root(f, 18.0, 21.0, 1e-10).unwrap();
        assert!((root - closed).abs() < 1e-6, "{root} vs {closed}");
        assert!((root - 19.21).abs() < 0.05);
    }
}
