//! Orbital stability and bifurcation-proximity classification from the
//! multipliers (eigenvalues of Φ).

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::jacobian::{orbit_jacobian, JacobianMethod};
use crate::model::ConverterSpec;
use crate::numerics::{eigenvalues, spectral_radius, ComplexEig, Matrix};
use crate::orbit::PeriodicOrbit;

/// Default half-width of the band around the unit circle inside which a
/// multiplier is reported as near-critical.
pub const DEFAULT_BAND: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Classification {
    Stable,
    Unstable,
    /// Real multiplier near −1.
    NearPd,
    /// Real multiplier near +1.
    NearSn,
    /// Complex pair near the unit circle.
    NearNs,
}

impl Classification {
    pub fn label(self) -> &'static str {
        match self {
            Classification::Stable => "stable",
            Classification::Unstable => "unstable",
            Classification::NearPd => "near_pd",
            Classification::NearSn => "near_sn",
            Classification::NearNs => "near_ns",
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug)]
pub struct StabilityReport {
    pub eigenvalues: Vec<ComplexEig>,
    pub spectral_radius: f64,
    pub classification: Classification,
    /// Multiplier of maximum modulus.
    pub critical_eigenvalue: ComplexEig,
}

impl StabilityReport {
    pub fn is_stable(&self) -> bool {
        self.spectral_radius < 1.0
    }
}

/// Treats a multiplier as real when its imaginary part is negligible.
pub fn is_real(l: ComplexEig) -> bool {
    l.im.abs() <= 1e-12 * l.norm().max(1.0)
}

/// Classifies a full spectrum of Φ with the given band around |λ| = 1.
pub fn classify_with_band(eigs: &[ComplexEig], band: f64) -> StabilityReport {
    let rho = spectral_radius(eigs);
    let critical = eigs
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or_default();
    let nearest = eigs
        .iter()
        .copied()
        .filter(|l| (l.norm() - 1.0).abs() <= band)
        .min_by(|a, b| (a.norm() - 1.0).abs().total_cmp(&(b.norm() - 1.0).abs()));
    let classification = match nearest {
        Some(l) if !is_real(l) => Classification::NearNs,
        Some(l) if l.re < 0.0 => Classification::NearPd,
        Some(_) => Classification::NearSn,
        None if rho < 1.0 => Classification::Stable,
        None => Classification::Unstable,
    };
    StabilityReport {
        eigenvalues: eigs.to_vec(),
        spectral_radius: rho,
        classification,
        critical_eigenvalue: critical,
    }
}

pub fn classify(eigs: &[ComplexEig]) -> StabilityReport {
    classify_with_band(eigs, DEFAULT_BAND)
}

/// Modulation frequency `f_s·|∠λ|/(2π)` of a complex multiplier.
pub fn neimark_frequency(critical: ComplexEig, f_s: f64) -> Result<f64> {
    if is_real(critical) {
        return Err(Error::InvalidArgument(format!(
            "Neimark frequency needs a complex multiplier, got {critical}"
        )));
    }
    Ok(f_s * critical.im.atan2(critical.re).abs() / (2.0 * PI))
}

/// Orbit Jacobian, its spectrum and classification.
#[derive(Clone, Debug)]
pub struct OrbitAnalysis {
    pub phi: Matrix,
    pub method: JacobianMethod,
    pub report: StabilityReport,
}

pub fn analyze_orbit(spec: &ConverterSpec, orbit: &PeriodicOrbit) -> Result<OrbitAnalysis> {
    let (phi, method) = orbit_jacobian(spec, orbit)?;
    let eigs = eigenvalues(&phi)?;
    Ok(OrbitAnalysis {
        phi,
        method,
        report: classify(&eigs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> ComplexEig {
        ComplexEig::new(re, im)
    }

    #[test]
    fn period_doubling_side() {
        let r = classify(&[c(-1.0005, 0.0), c(0.3, 0.0)]);
        assert_eq!(r.classification, Classification::NearPd);
        assert!(!r.is_stable());
        assert_eq!(r.critical_eigenvalue, c(-1.0005, 0.0));
    }

    #[test]
    fn neimark_pair() {
        let r = classify(&[c(0.8897, 0.4567), c(0.8897, -0.4567), c(0.5, 0.0)]);
        assert_eq!(r.classification, Classification::NearNs);
    }

    #[test]
    fn fold_side_and_plain_cases() {
        assert_eq!(
            classify(&[c(0.9995, 0.0), c(0.1, 0.0)]).classification,
            Classification::NearSn
        );
        assert_eq!(
            classify(&[c(0.5, 0.0), c(0.2, 0.0)]).classification,
            Classification::Stable
        );
        assert_eq!(
            classify(&[c(1.5, 0.0), c(0.2, 0.0)]).classification,
            Classification::Unstable
        );
    }

    #[test]
    fn band_is_configurable() {
        let eigs = [c(-1.01, 0.0)];
        assert_eq!(classify(&eigs).classification, Classification::Unstable);
        assert_eq!(
            classify_with_band(&eigs, 0.02).classification,
            Classification::NearPd
        );
    }

    #[test]
    fn modulation_frequencies() {
        let f = neimark_frequency(c(0.8897, 0.4567), 15000.0).unwrap();
        assert!((f - 1132.0).abs() < 2.0, "{f}");
        assert!((neimark_frequency(c(0.0, 1.0), 15000.0).unwrap() - 3750.0).abs() < 1e-9);
        let half = neimark_frequency(c(-1.0, 1e-4), 15000.0).unwrap();
        assert!((half - 7500.0).abs() < 1.0);
        assert!(neimark_frequency(c(0.5, 0.0), 15000.0).is_err());
    }
}
