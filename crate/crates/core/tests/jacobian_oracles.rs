mod common;

use common::mat_rel_diff;
use dcdc_core::jacobian::{
    map_finite_difference, orbit_jacobian, phi_closed_form, phi_discrete_duty,
    phi_finite_difference, relative_mismatch,
};
use dcdc_core::model::{ConverterSpec, Stage};
use dcdc_core::numerics::{eigenvalues, mat_exp, ComplexEig};
use dcdc_core::orbit::{find_orbit, orbit_through, OrbitGuess, PeriodicOrbit};
use dcdc_core::presets::preset_at;

fn interior_orbit(spec: &ConverterSpec) -> PeriodicOrbit {
    std::iter::once(OrbitGuess::Averaged)
        .chain((1..10).map(|k| OrbitGuess::OnDuty(k as f64 / 10.0)))
        .filter_map(|g| find_orbit(spec, 1, &g).ok())
        .find(|o| !o.is_saturated())
        .expect("no interior orbit")
}

fn sorted(mut e: Vec<ComplexEig>) -> Vec<ComplexEig> {
    e.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    e
}

#[test]
fn closed_form_matches_finite_differences() {
    for (name, values) in [
        ("pd_buck", &[15.0, 20.0, 24.0, 25.0][..]),
        ("ns_buck", &[30.0, 36.0, 40.0][..]),
    ] {
        for &vs in values {
            let spec = preset_at(name, vs).unwrap();
            let orbit = interior_orbit(&spec);
            let closed = phi_closed_form(&spec, &orbit).unwrap();
            let fd = phi_finite_difference(&spec, &orbit).unwrap();
            let err = relative_mismatch(&closed, &fd, 1e-8);
            assert!(err < 1e-5, "{name} {vs}: {err}");
        }
    }
}

#[test]
fn discrete_chain_rule_matches_finite_differences() {
    for vs in [18.5, 19.5, 19.9] {
        let spec = preset_at("sn_buck", vs).unwrap();
        // Every interior orbit: at 19.9 a stable and an unstable one coexist.
        let orbits: Vec<PeriodicOrbit> = (1..10)
            .filter_map(|k| find_orbit(&spec, 1, &OrbitGuess::OnDuty(k as f64 / 10.0)).ok())
            .filter(|o| !o.is_saturated())
            .collect();
        assert!(!orbits.is_empty());
        for orbit in orbits {
            let chain = phi_discrete_duty(&spec, &orbit).unwrap();
            let fd = phi_finite_difference(&spec, &orbit).unwrap();
            let err = relative_mismatch(&chain, &fd, 1e-8);
            assert!(err < 1e-5, "sn {vs} duty {:?}: {err}", orbit.duty);
        }
    }
}

#[test]
fn identical_stages_give_the_plain_exponential() {
    for (name, vs) in [("pd_buck", 22.0), ("ns_buck", 30.0)] {
        let mut parts = preset_at(name, vs).unwrap().into_parts();
        parts.a1 = parts.a2.clone();
        parts.b1 = parts.b2.clone();
        parts.on_stage = Some(Stage::S1);
        let spec = ConverterSpec::new(parts).unwrap();
        let x = vec![0.3; spec.dim()];
        for frac in [0.2, 0.5, 0.8] {
            let phi = dcdc_core::jacobian::phi_cycle_closed_form(&spec, &x, frac * spec.period())
                .unwrap();
            let exact = mat_exp(spec.a(Stage::S1), spec.period()).unwrap();
            assert!(mat_rel_diff(&phi, &exact) < 1e-10, "{name}");
        }
    }
}

#[test]
fn two_cycle_jacobian_is_the_product_of_cycles() {
    let spec = preset_at("pd_buck", 26.0).unwrap();
    let orbit = find_orbit(&spec, 2, &OrbitGuess::Averaged).unwrap();
    assert!(!orbit.is_degenerate());
    let total = map_finite_difference(&spec, &orbit.x0, 2).unwrap();
    let (product, _) = orbit_jacobian(&spec, &orbit).unwrap();
    assert!(relative_mismatch(&total, &product, 1e-8) < 1e-4);
    let by_hand = map_finite_difference(&spec, &orbit.states[1], 1)
        .unwrap()
        .matmul(&map_finite_difference(&spec, &orbit.states[0], 1).unwrap())
        .unwrap();
    assert!(relative_mismatch(&total, &by_hand, 1e-8) < 1e-4);
}

#[test]
fn spectrum_is_invariant_under_section_shift() {
    let spec = preset_at("pd_buck", 26.0).unwrap();
    let orbit = find_orbit(&spec, 2, &OrbitGuess::Averaged).unwrap();
    let shifted = orbit_through(&spec, 2, &orbit.states[1]).unwrap();
    let a = sorted(eigenvalues(&orbit_jacobian(&spec, &orbit).unwrap().0).unwrap());
    let b = sorted(eigenvalues(&orbit_jacobian(&spec, &shifted).unwrap().0).unwrap());
    for (p, q) in a.iter().zip(&b) {
        assert!((p - q).norm() < 1e-6, "{a:?} vs {b:?}");
    }
}
