//! Converter definition documents (TOML, `schema_version = 1`).
//!
//! A document names a preset plus physical-parameter overrides, or spells
//! out the matrices, ramp and control law. Field names carry their units.
//!
//! ```toml
//! schema_version = 1
//!
//! [preset]
//! name = "pd_buck"
//! overrides = { vs = 26.0 }
//! ```

#![allow(non_snake_case)]

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bifurcation::Template;
use crate::error::{Error, Result};
use crate::model::{
    Control, ConverterParts, ConverterSpec, DiscreteDutyControl, Ramp, RampControl, Stage,
};
use crate::numerics::{Matrix, Vector};
use crate::presets::{PresetKind, PresetParams};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConverterDocument {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<PresetBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converter: Option<ExplicitBlock>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetBlock {
    pub name: String,
    /// Physical parameters by preset name (`vs`, `L`, `g1`, …).
    #[serde(default)]
    pub overrides: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitBlock {
    pub T_seconds: f64,
    pub vs_volts: f64,
    pub vr_volts: f64,
    pub A1: Vec<Vec<f64>>,
    pub A2: Vec<Vec<f64>>,
    pub B1: Vec<Vec<f64>>,
    pub B2: Vec<Vec<f64>>,
    pub E1: Vec<f64>,
    pub E2: Vec<f64>,
    /// Stage with the source connected; inferred from `B` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub on_stage: Option<Stage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp_control: Option<RampBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discrete_duty_control: Option<DiscreteBlock>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RampBlock {
    pub C: Vec<f64>,
    pub D: Vec<f64>,
    pub V_low_volts: f64,
    pub V_high_volts: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteBlock {
    pub base_duty: f64,
    pub K: Vec<f64>,
    pub x_ref: Vec<f64>,
}

fn matrix(name: &str, rows: &[Vec<f64>]) -> Result<Matrix> {
    Matrix::try_from_rows(rows).map_err(|e| Error::Document(format!("{name}: {e}")))
}

fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    m.to_rows()
}

impl ConverterDocument {
    pub fn parse(text: &str) -> Result<ConverterDocument> {
        let doc: ConverterDocument =
            toml::from_str(text).map_err(|e| Error::Document(e.to_string()))?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Document(e.to_string()))
    }

    fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Document(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        match (&self.preset, &self.converter) {
            (Some(_), Some(_)) => Err(Error::Document(
                "give either [preset] or [converter], not both".into(),
            )),
            (None, None) => Err(Error::Document("missing [preset] or [converter]".into())),
            _ => self.template().map(|_| ()),
        }
    }

    pub fn from_preset(params: &PresetParams) -> ConverterDocument {
        ConverterDocument {
            schema_version: SCHEMA_VERSION,
            preset: Some(PresetBlock {
                name: params.kind().name().to_string(),
                overrides: params.iter().map(|(k, v)| (k.to_string(), v)).collect(),
            }),
            converter: None,
        }
    }

    /// Explicit-matrix document equivalent to `spec`.
    pub fn from_spec(spec: &ConverterSpec) -> ConverterDocument {
        let parts = spec.clone().into_parts();
        let (ramp_control, discrete_duty_control) = match &parts.control {
            Control::Ramp(rc) => (
                Some(RampBlock {
                    C: rc.c.as_slice().to_vec(),
                    D: rc.d.as_slice().to_vec(),
                    V_low_volts: rc.ramp.v_low,
                    V_high_volts: rc.ramp.v_high,
                }),
                None,
            ),
            Control::DiscreteDuty(dc) => (
                None,
                Some(DiscreteBlock {
                    base_duty: dc.base_duty,
                    K: dc.gains.as_slice().to_vec(),
                    x_ref: dc.x_ref.to_vec(),
                }),
            ),
        };
        ConverterDocument {
            schema_version: SCHEMA_VERSION,
            preset: None,
            converter: Some(ExplicitBlock {
                T_seconds: parts.period,
                vs_volts: parts.u[0],
                vr_volts: parts.u[1],
                A1: rows_of(&parts.a1),
                A2: rows_of(&parts.a2),
                B1: rows_of(&parts.b1),
                B2: rows_of(&parts.b2),
                E1: parts.e1.as_slice().to_vec(),
                E2: parts.e2.as_slice().to_vec(),
                on_stage: parts.on_stage,
                ramp_control,
                discrete_duty_control,
            }),
        }
    }

    /// What the document describes: preset parameters (overridable) or a
    /// fixed explicit spec.
    pub fn template(&self) -> Result<Template> {
        if let Some(p) = &self.preset {
            let kind: PresetKind = p.name.parse()?;
            let mut params = kind.defaults();
            for (k, v) in &p.overrides {
                params.set(k, *v)?;
            }
            params.build()?;
            return Ok(Template::Preset(params));
        }
        let c = self
            .converter
            .as_ref()
            .ok_or_else(|| Error::Document("missing [preset] or [converter]".into()))?;
        let control = match (&c.ramp_control, &c.discrete_duty_control) {
            (Some(r), None) => Control::Ramp(RampControl {
                c: Matrix::row(&r.C),
                d: Matrix::row(&r.D),
                ramp: Ramp::new(r.V_low_volts, r.V_high_volts, c.T_seconds)?,
            }),
            (None, Some(d)) => Control::DiscreteDuty(DiscreteDutyControl {
                base_duty: d.base_duty,
                gains: Matrix::row(&d.K),
                x_ref: Vector::from(d.x_ref.clone()),
            }),
            _ => {
                return Err(Error::Document(
                    "[converter] needs exactly one of ramp_control or discrete_duty_control".into(),
                ))
            }
        };
        let spec = ConverterSpec::new(ConverterParts {
            a1: matrix("A1", &c.A1)?,
            a2: matrix("A2", &c.A2)?,
            b1: matrix("B1", &c.B1)?,
            b2: matrix("B2", &c.B2)?,
            e1: Matrix::row(&c.E1),
            e2: Matrix::row(&c.E2),
            u: Vector::from(vec![c.vs_volts, c.vr_volts]),
            period: c.T_seconds,
            control,
            on_stage: c.on_stage,
        })?;
        Ok(Template::Explicit(spec))
    }

    pub fn spec(&self) -> Result<ConverterSpec> {
        self.template()?.base()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_document_with_overrides() {
        let doc = ConverterDocument::parse(
            "schema_version = 1\n[preset]\nname = \"pd_buck\"\noverrides = { vs = 26 }\n",
        )
        .unwrap();
        let spec = doc.spec().unwrap();
        assert_eq!(spec.source_voltage(), 26.0);
    }

    #[test]
    fn unknown_fields_and_versions_rejected() {
        for text in [
            "schema_version = 1\nextra = 3\n[preset]\nname = \"pd_buck\"\n",
            "schema_version = 2\n[preset]\nname = \"pd_buck\"\n",
            "schema_version = 1\n[preset]\nname = \"pd_buck\"\nvs = 3\n",
            "schema_version = 1\n[preset]\nname = \"boost\"\n",
            "schema_version = 1\n[preset]\nname = \"pd_buck\"\noverrides = { Q = 1.0 }\n",
            "schema_version = 1\n",
        ] {
            assert!(ConverterDocument::parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn explicit_dimensions_checked_before_numerics() {
        let mut doc =
            ConverterDocument::from_spec(&crate::presets::preset_at("pd_buck", 24.0).unwrap());
        doc.converter.as_mut().unwrap().A1.pop();
        let text = doc.to_toml().unwrap();
        let err = ConverterDocument::parse(&text).unwrap_err();
        assert!(
            matches!(err, Error::Dimension(_) | Error::Document(_)),
            "{err}"
        );
    }

    #[test]
    fn presets_round_trip_bit_exactly() {
        for kind in PresetKind::ALL {
            let spec = kind.defaults().build().unwrap();
            let text = ConverterDocument::from_spec(&spec).to_toml().unwrap();
            let back = ConverterDocument::parse(&text).unwrap().spec().unwrap();
            assert_eq!(back, spec, "{kind}");

            let text = ConverterDocument::from_preset(&kind.defaults())
                .to_toml()
                .unwrap();
            let back = ConverterDocument::parse(&text).unwrap().spec().unwrap();
            assert_eq!(back, spec, "{kind}");
        }
    }
}
