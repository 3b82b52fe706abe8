//! Plain-text run reports with a fixed layout and 12 significant digits.

use std::fmt::Write as _;

use dcdc_core::document::ConverterDocument;
use dcdc_core::model::ConverterSpec;
use dcdc_core::numerics::ComplexEig;
use sha2::{Digest, Sha256};

pub const SIG_DIGITS: usize = 12;

/// `%.12g`-style formatting: fixed notation for moderate exponents,
/// scientific otherwise, trailing zeros trimmed.
pub fn num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, v);
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if exp < -5 || exp >= SIG_DIGITS as i32 {
        return format!("{}e{exp}", trim_zeros(mantissa));
    }
    let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn complex(l: ComplexEig) -> String {
    if l.im == 0.0 {
        num(l.re)
    } else if l.im > 0.0 {
        format!("{}+{}i", num(l.re), num(l.im))
    } else {
        format!("{}-{}i", num(l.re), num(-l.im))
    }
}

pub fn list(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| num(*v)).collect();
    format!("[{}]", parts.join(", "))
}

pub fn complex_list(values: &[ComplexEig]) -> String {
    let parts: Vec<String> = values.iter().map(|v| complex(*v)).collect();
    format!("[{}]", parts.join(", "))
}

/// First 16 hex digits of the SHA-256 of the explicit-matrix document.
pub fn spec_digest(spec: &ConverterSpec) -> String {
    let text = ConverterDocument::from_spec(spec)
        .to_toml()
        .unwrap_or_default();
    let hash = Sha256::digest(text.as_bytes());
    hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Default)]
pub struct RunReport {
    pub command: String,
    pub spec: Vec<(String, String)>,
    pub sections: Vec<(String, Vec<(String, String)>)>,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn new(command: String, spec: &ConverterSpec) -> RunReport {
        let mut r = RunReport {
            command,
            ..RunReport::default()
        };
        r.spec.push(("digest".into(), spec_digest(spec)));
        r.spec.push(("N".into(), spec.dim().to_string()));
        r.spec.push(("T_seconds".into(), num(spec.period())));
        r.spec.push(("vs_volts".into(), num(spec.source_voltage())));
        r.spec.push(("vr_volts".into(), num(spec.u()[1])));
        let control = if spec.ramp_control().is_some() {
            "ramp"
        } else {
            "discrete_duty"
        };
        r.spec.push(("control".into(), control.into()));
        r.spec
            .push(("on_stage".into(), spec.on_stage().label().into()));
        r
    }

    pub fn section(&mut self, name: &str) -> &mut Vec<(String, String)> {
        self.sections.push((name.to_string(), Vec::new()));
        &mut self.sections.last_mut().unwrap().1
    }

    pub fn warn(&mut self, w: impl Into<String>) {
        self.warnings.push(w.into());
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "command: {}", self.command);
        let _ = writeln!(out, "[spec]");
        for (k, v) in &self.spec {
            let _ = writeln!(out, "{k} = {v}");
        }
        for (name, rows) in &self.sections {
            let _ = writeln!(out, "[{name}]");
            for (k, v) in rows {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        let _ = writeln!(out, "[warnings]");
        for w in &self.warnings {
            let _ = writeln!(out, "- {w}");
        }
        out
    }
}

pub fn kv(rows: &mut Vec<(String, String)>, k: &str, v: impl Into<String>) {
    rows.push((k.to_string(), v.into()));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(num(24.516572828977917), "24.516572829");
        assert_eq!(num(0.25), "0.25");
        assert_eq!(num(4e-4), "0.0004");
        assert_eq!(num(-1.0000000000000013), "-1");
        assert_eq!(num(1.5e-9), "1.5e-9");
        assert_eq!(num(123456789012345.0), "1.23456789012e14");
        assert_eq!(num(0.0), "0");
    }

    #[test]
    fn complex_formatting() {
        assert_eq!(complex(ComplexEig::new(0.5, -0.25)), "0.5-0.25i");
        assert_eq!(complex(ComplexEig::new(-1.0, 0.0)), "-1");
    }
}
