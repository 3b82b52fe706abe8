use dcdc_core::bifurcation::{brute_force_diagram, DiagramOptions, Template};
use dcdc_core::jacobian::orbit_jacobian;
use dcdc_core::model::{saturated_always_on_check, ConverterSpec};
use dcdc_core::numerics::{eigenvalues, spectral_radius, Vector};
use dcdc_core::orbit::{find_orbit, OrbitGuess, PeriodicOrbit};
use dcdc_core::presets::{preset_at, PresetKind};
use dcdc_core::sim::CycleMap;

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max)
}

fn radius(spec: &ConverterSpec, orbit: &PeriodicOrbit) -> f64 {
    spectral_radius(&eigenvalues(&orbit_jacobian(spec, orbit).unwrap().0).unwrap())
}

/// Orbits spread over the presets, with both stable and unstable ones.
fn located_orbits() -> Vec<(String, ConverterSpec, PeriodicOrbit)> {
    let mut out = Vec::new();
    for (name, vs, m) in [
        ("pd_buck", 15.0, 1),
        ("pd_buck", 20.0, 1),
        ("pd_buck", 24.0, 1),
        ("pd_buck", 26.0, 1),
        ("pd_buck", 26.0, 2),
        ("pd_buck", 27.0, 1),
        ("ns_buck", 25.0, 1),
        ("ns_buck", 40.0, 1),
        ("ns_buck", 50.0, 1),
        ("sn_buck", 18.5, 1),
    ] {
        let spec = preset_at(name, vs).unwrap();
        let orbit = find_orbit(&spec, m, &OrbitGuess::Averaged).unwrap();
        out.push((format!("{name} {vs} m={m}"), spec, orbit));
    }
    out
}

#[test]
fn linear_stability_predicts_simulation() {
    let mut checked = (0, 0);
    for (label, spec, orbit) in located_orbits() {
        let rho = radius(&spec, &orbit);
        let eps: Vec<f64> = orbit.x0.iter().map(|v| 1e-4 * (1.0 + v.abs())).collect();
        let start: Vec<f64> = orbit.x0.iter().zip(&eps).map(|(v, e)| v + e).collect();
        let d0 = distance(&start, &orbit.x0);
        let cm = CycleMap::new(&spec).unwrap();
        if rho < 0.98 {
            let states = cm.iterate(&start, 200 * orbit.m).unwrap();
            let d = distance(states.last().unwrap(), &orbit.x0);
            assert!(d < d0 / 10.0, "{label}: rho {rho}, distance {d}");
            checked.0 += 1;
        } else if rho > 1.02 {
            let states = cm.iterate(&start, 200 * orbit.m).unwrap_or_default();
            let grew = states
                .iter()
                .step_by(orbit.m)
                .any(|x| distance(x, &orbit.x0) >= 10.0 * d0);
            assert!(grew || states.is_empty(), "{label}: rho {rho}");
            checked.1 += 1;
        }
    }
    assert!(checked.0 >= 4 && checked.1 >= 2, "{checked:?}");
}

#[test]
fn orbit_is_insensitive_to_the_guess() {
    for (name, vs, guesses) in [
        (
            "pd_buck",
            20.0,
            [OrbitGuess::Averaged, OrbitGuess::OnDuty(0.4)],
        ),
        (
            "ns_buck",
            30.0,
            [OrbitGuess::Averaged, OrbitGuess::OnDuty(0.3)],
        ),
    ] {
        let spec = preset_at(name, vs).unwrap();
        let [a, b] = guesses.map(|g| find_orbit(&spec, 1, &g).unwrap());
        assert!(
            distance(&a.x0, &b.x0) < 1e-8 * (1.0 + a.x0.norm_inf()),
            "{name}"
        );
    }
}

#[test]
fn period_two_attractor_after_doubling() {
    let spec = preset_at("pd_buck", 26.0).unwrap();
    let t1 = find_orbit(&spec, 1, &OrbitGuess::Averaged).unwrap();
    let t2 = find_orbit(&spec, 2, &OrbitGuess::Averaged).unwrap();
    assert!(radius(&spec, &t1) > 1.0);
    assert!(radius(&spec, &t2) < 1.0);
    let start: Vec<f64> = t1.x0.iter().map(|v| v * 1.001).collect();
    let states = CycleMap::new(&spec).unwrap().iterate(&start, 500).unwrap();
    let (a, b, c) = (&states[498], &states[499], &states[500]);
    assert!(distance(a, c) < 1e-8);
    assert!(distance(a, b) > 1e-2);
    let near = |x: &Vector| {
        t2.states
            .iter()
            .map(|s| distance(x, s))
            .fold(f64::INFINITY, f64::min)
    };
    assert!(near(a) < 1e-6 && near(b) < 1e-6);
}

#[test]
fn coexisting_attractors_at_sn_parameter() {
    let spec = preset_at("sn_buck", 19.9).unwrap();
    let check = saturated_always_on_check(&spec).unwrap();
    assert!(check.feasible);
    let interior = (1..10)
        .filter_map(|k| find_orbit(&spec, 1, &OrbitGuess::OnDuty(k as f64 / 10.0)).ok())
        .filter(|o| !o.is_saturated())
        .find(|o| radius(&spec, o) < 1.0)
        .unwrap();
    let cm = CycleMap::new(&spec).unwrap();
    // Small kicks off either attractor decay back to it.
    for target in [interior.x0.clone(), check.equilibrium.clone()] {
        let start: Vec<f64> = target.iter().map(|v| v * 1.001).collect();
        let end = cm.iterate(&start, 2000).unwrap().pop().unwrap();
        assert!(distance(&end, &target) < 1e-6, "{end:?} vs {target:?}");
    }
    assert!(distance(&interior.x0, &check.equilibrium) > 1.0);
}

#[test]
fn brute_force_settles_on_the_stable_orbit() {
    let template = Template::Preset(PresetKind::PdBuck.defaults());
    let opts = DiagramOptions {
        record: 8,
        ..DiagramOptions::default()
    };
    let samples = brute_force_diagram(&template, "vs", 20.0, 24.0, 3, &opts).unwrap();
    for s in samples {
        let spec = template.build("vs", s.param_value).unwrap();
        let orbit = find_orbit(&spec, 1, &OrbitGuess::Averaged).unwrap();
        let v = orbit.clock_outputs(&spec)[0];
        for o in &s.stroboscopic_outputs {
            assert!((o - v).abs() < 1e-6, "{} {o} vs {v}", s.param_value);
        }
    }
}
