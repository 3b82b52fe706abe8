//! Periodic orbits of the stroboscopic map.
//!
//! An `m·T`-periodic solution is a period-`m` point of the cycle map. In ramp
//! mode the orbit is solved as a multiple-shooting boundary-value problem in
//! the clock-instant states and the switching instants; the switching
//! condition is imposed explicitly, which keeps the residual smooth even
//! though the map itself involves a first-crossing search. Discrete-duty
//! orbits, and ramp orbits whose cycles saturate, are solved on the map
//! difference `P^m(x) − x` instead.

use crate::averaged::{averaged_equilibrium, consistent_duty_root};
use crate::error::{Error, Result};
use crate::model::{Control, ConverterSpec, Stage};
use crate::numerics::{newton_solve, JacobianSource, NewtonOptions, Vector};
use crate::sim::{CycleMap, Saturation};

/// Newton Jacobian condition above which an orbit is annotated near-fold.
pub const FOLD_CONDITION: f64 = 1e10;

#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicOrbit {
    /// Period multiple (1 or 2).
    pub m: usize,
    /// State at a clock instant.
    pub x0: Vector,
    /// States at the m consecutive clock instants, starting with `x0`.
    pub states: Vec<Vector>,
    /// First-stage durations of each cycle (seconds).
    pub d: Vec<f64>,
    /// First-stage fractions `d_k / T`.
    pub duty: Vec<f64>,
    /// ‖residual‖∞ at the solution.
    pub residual: f64,
    pub saturation: Vec<Saturation>,
    /// Newton Jacobian condition estimate at the final iterate.
    pub condition: f64,
    pub near_fold: bool,
}

impl PeriodicOrbit {
    /// ON-stage fraction of each cycle.
    pub fn on_duty(&self, spec: &ConverterSpec) -> Vec<f64> {
        self.duty.iter().map(|&f| spec.on_fraction(f)).collect()
    }

    pub fn is_saturated(&self) -> bool {
        self.saturation.iter().any(|s| *s != Saturation::None)
    }

    /// An `m = 2` solution that is really a period-one orbit.
    pub fn is_degenerate(&self) -> bool {
        self.m > 1 && {
            let scale = 1.0 + self.x0.norm_inf();
            self.states
                .iter()
                .skip(1)
                .all(|s| (s - &self.x0).norm_inf() <= 1e-6 * scale)
        }
    }

    /// Output voltage at each clock instant of the orbit.
    pub fn clock_outputs(&self, spec: &ConverterSpec) -> Vec<f64> {
        self.states
            .iter()
            .map(|x| spec.output(Stage::S1, x))
            .collect()
    }
}

/// Starting point for [`find_orbit`].
#[derive(Clone, Debug)]
pub enum OrbitGuess {
    /// Averaged equilibrium at the consistent duty (ramp) or nominal duty
    /// (discrete law).
    Averaged,
    /// Averaged equilibrium at the given switch-ON fraction.
    OnDuty(f64),
    /// Explicit clock-instant state.
    State(Vector),
    /// Continuation from a previously located orbit.
    Orbit(PeriodicOrbit),
}

#[derive(Clone, Copy, Debug)]
pub struct OrbitOptions {
    pub newton: NewtonOptions,
    pub fd_step: f64,
    /// Cycles iterated from the guess before solving for an `m = 2` orbit,
    /// so that Newton starts near the period-two attractor rather than the
    /// period-one orbit.
    pub warmup_cycles: usize,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        OrbitOptions {
            newton: NewtonOptions::default(),
            fd_step: 1e-7,
            warmup_cycles: 500,
        }
    }
}

fn check_m(m: usize) -> Result<()> {
    if m == 1 || m == 2 {
        Ok(())
    } else {
        Err(Error::Unsupported(format!("orbits of period multiple {m}")))
    }
}

/// Ramp-mode residual on `z = (x_0, …, x_{m−1}, d_0/T, …, d_{m−1}/T)`.
///
/// Per cycle `k`: the switching condition `C x(d_k) + D u − h(d_k)` and the
/// continuity defect `x_{k+1} − P(x_k; d_k)` (indices mod m).
fn switching_residual(map: &CycleMap, m: usize, z: &[f64]) -> Result<Vector> {
    let spec = map.spec();
    let rc = spec
        .ramp_control()
        .ok_or_else(|| Error::InvalidArgument("switching residual needs ramp control".into()))?;
    let n = spec.dim();
    let t = spec.period();
    if z.len() != m * (n + 1) {
        return Err(Error::Dimension(format!(
            "orbit unknowns: expected {}, got {}",
            m * (n + 1),
            z.len()
        )));
    }
    let mut out = Vec::with_capacity(m * (n + 1));
    for k in 0..m {
        let xk = &z[k * n..(k + 1) * n];
        let frac = z[m * n + k];
        if !(frac > 0.0 && frac < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "switching instant d/T = {frac} outside (0, 1); use the saturated branch"
            )));
        }
        let d = frac * t;
        let xd = map.flow(Stage::S1, xk, d)?;
        out.push(rc.feedback(&xd, spec.u()) - rc.ramp.value_in_cycle(d));
        let xend = map.flow(Stage::S2, &xd, t - d)?;
        let next = &z[((k + 1) % m) * n..((k + 1) % m + 1) * n];
        out.extend(next.iter().zip(xend.iter()).map(|(a, b)| b - a));
    }
    Ok(Vector::from(out))
}

/// Map-difference residual `P^m(x_0) − x_0`.
fn map_residual(map: &CycleMap, m: usize, x0: &[f64]) -> Result<Vector> {
    let mut x = Vector::from(x0);
    for _ in 0..m {
        x = map.step(&x)?.x_next;
    }
    Ok(&x - &Vector::from(x0))
}

/// Periodic-orbit residual.
///
/// Ramp control: `z = (x_0, …, x_{m−1}, d_0/T, …, d_{m−1}/T)`, residual of
/// dimension `m·(N+1)` stacking the switching condition and the continuity
/// defect for each cycle. Discrete duty control: `z = x_0` and the residual
/// is `P^m(x_0) − x_0`, the durations coming from the control law.
pub fn orbit_residual(spec: &ConverterSpec, m: usize, z: &[f64]) -> Result<Vector> {
    check_m(m)?;
    let map = CycleMap::new(spec)?;
    match spec.control() {
        Control::Ramp(_) => switching_residual(&map, m, z),
        Control::DiscreteDuty(_) => map_residual(&map, m, z),
    }
}

/// Clock-instant state a guess stands for (before any warm-up).
pub fn initial_state(spec: &ConverterSpec, guess: &OrbitGuess) -> Result<Vector> {
    guess_state(spec, guess).map(|(x, _)| x)
}

fn guess_state(
    spec: &ConverterSpec,
    guess: &OrbitGuess,
) -> Result<(Vector, Option<PeriodicOrbit>)> {
    match guess {
        OrbitGuess::Averaged => {
            let on = match spec.control() {
                Control::Ramp(_) => consistent_duty_root(spec)?.unwrap_or(0.5),
                Control::DiscreteDuty(dc) => spec.on_fraction(dc.base_duty),
            };
            Ok((averaged_equilibrium(spec, on)?, None))
        }
        OrbitGuess::OnDuty(on) => Ok((averaged_equilibrium(spec, *on)?, None)),
        OrbitGuess::State(x) => {
            if x.dim() != spec.dim() {
                return Err(Error::Dimension(format!(
                    "guess state has {} components, spec has {}",
                    x.dim(),
                    spec.dim()
                )));
            }
            Ok((x.clone(), None))
        }
        OrbitGuess::Orbit(o) => Ok((o.x0.clone(), Some(o.clone()))),
    }
}

/// Locates an `m·T`-periodic orbit (m ∈ {1, 2}) by damped Newton with a
/// finite-difference Jacobian. Stable and unstable orbits alike are found.
pub fn find_orbit(spec: &ConverterSpec, m: usize, guess: &OrbitGuess) -> Result<PeriodicOrbit> {
    find_orbit_with(spec, m, guess, &OrbitOptions::default())
}

pub fn find_orbit_with(
    spec: &ConverterSpec,
    m: usize,
    guess: &OrbitGuess,
    opts: &OrbitOptions,
) -> Result<PeriodicOrbit> {
    check_m(m)?;
    let map = CycleMap::new(spec)?;
    let (mut x, prior) = guess_state(spec, guess)?;
    let prior = prior.filter(|o| o.m == m);
    if m == 2 && prior.is_none() && opts.warmup_cycles > 0 {
        // Land on the period-two attractor if there is one.
        match map.iterate(&x, opts.warmup_cycles) {
            Ok(states) => x = states.last().unwrap().clone(),
            Err(Error::Divergence { .. }) => {}
            Err(e) => return Err(e),
        }
    }

    let jac = || JacobianSource::FiniteDifference {
        rel_step: opts.fd_step,
    };

    if spec.ramp_control().is_some() {
        // Seed states and switching fractions.
        let (states, fracs) = match &prior {
            Some(o) => (o.states.clone(), o.duty.clone()),
            None => {
                let cycles = map.steps(&x, m)?;
                let mut states = vec![x.clone()];
                for c in cycles.iter().take(m - 1) {
                    states.push(c.x_next.clone());
                }
                let fracs = cycles
                    .iter()
                    .map(|c| {
                        let f = c.d / spec.period();
                        if c.saturated == Saturation::None {
                            f
                        } else {
                            0.5
                        }
                    })
                    .collect();
                (states, fracs)
            }
        };
        let all_interior = fracs.iter().all(|f| *f > 0.0 && *f < 1.0);
        if all_interior {
            let mut z: Vec<f64> = states.iter().flat_map(|s| s.iter().copied()).collect();
            z.extend(fracs.iter().copied());
            let solved = newton_solve(|z| switching_residual(&map, m, z), jac(), &z, &opts.newton);
            match solved {
                Ok(out) => {
                    let n = spec.dim();
                    let x0 = Vector::from(&out.z[..n]);
                    if let Ok(orbit) = verify(&map, m, &x0, out.residual, out.condition, opts) {
                        return Ok(orbit);
                    }
                }
                Err(e @ Error::IllConditioned { .. }) => return Err(e),
                Err(_) => {}
            }
        }
    }

    let out = newton_solve(|z| map_residual(&map, m, z), jac(), &x, &opts.newton)?;
    verify(&map, m, &out.z, out.residual, out.condition, opts)
}

/// Packages a state already known to lie on an `m`-periodic orbit (for
/// example from an extended fold solve), after re-simulation.
pub fn orbit_through(spec: &ConverterSpec, m: usize, x0: &Vector) -> Result<PeriodicOrbit> {
    check_m(m)?;
    let map = CycleMap::new(spec)?;
    verify(&map, m, x0, 0.0, f64::NAN, &OrbitOptions::default())
}

/// Re-simulates the candidate through the cycle map (first-crossing rule
/// included) and packages it.
fn verify(
    map: &CycleMap,
    m: usize,
    x0: &Vector,
    residual: f64,
    condition: f64,
    opts: &OrbitOptions,
) -> Result<PeriodicOrbit> {
    let spec = map.spec();
    let cycles = map.steps(x0, m)?;
    let end = &cycles.last().unwrap().x_next;
    let mismatch = (end - x0).norm_inf();
    let allowed = 10.0 * opts.newton.tol.max(1e-12 * (1.0 + x0.norm_inf()));
    if mismatch > allowed {
        return Err(Error::NoConvergence {
            method: "orbit verification by re-simulation",
            iterations: m,
            residual: mismatch,
        });
    }
    let mut states = vec![x0.clone()];
    for c in cycles.iter().take(m - 1) {
        states.push(c.x_next.clone());
    }
    let d: Vec<f64> = cycles.iter().map(|c| c.d).collect();
    Ok(PeriodicOrbit {
        m,
        x0: x0.clone(),
        states,
        duty: d.iter().map(|v| v / spec.period()).collect(),
        d,
        residual: residual.max(mismatch),
        saturation: cycles.iter().map(|c| c.saturated).collect(),
        condition,
        near_fold: condition > FOLD_CONDITION,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::preset_at;

    #[test]
    fn residual_matches_direct_substitution() {
        let spec = preset_at("pd_buck", 22.0).unwrap();
        let map = CycleMap::new(&spec).unwrap();
        let z = [0.55, 12.1, 0.4];
        let r = orbit_residual(&spec, 1, &z).unwrap();
        let d = 0.4 * spec.period();
        let xd = map.flow(Stage::S1, &z[..2], d).unwrap();
        let rc = spec.ramp_control().unwrap();
        let g = rc.feedback(&xd, spec.u()) - rc.ramp.value_in_cycle(d);
        let xt = map.flow(Stage::S2, &xd, spec.period() - d).unwrap();
        assert_eq!(r.dim(), 3);
        assert_eq!(r[0], g);
        assert_eq!(r[1], xt[0] - z[0]);
        assert_eq!(r[2], xt[1] - z[1]);
    }

    #[test]
    fn residual_rejects_saturated_instants() {
        let spec = preset_at("pd_buck", 22.0).unwrap();
        assert!(orbit_residual(&spec, 1, &[0.5, 12.0, 1.0]).is_err());
        assert!(orbit_residual(&spec, 1, &[0.5, 12.0, 0.0]).is_err());
        assert!(orbit_residual(&spec, 3, &[0.5, 12.0, 0.5]).is_err());
    }

    #[test]
    fn always_on_equilibrium_has_zero_residual() {
        let spec = preset_at("sn_buck", 20.5).unwrap();
        let r = orbit_residual(&spec, 1, &[20.5 / 22.0, 20.5]).unwrap();
        assert!(r.norm_inf() < 1e-12);
    }

    #[test]
    fn pd_buck_period_one_orbit_is_a_fixed_point() {
        let spec = preset_at("pd_buck", 20.0).unwrap();
        let orbit = find_orbit(&spec, 1, &OrbitGuess::Averaged).unwrap();
        assert!(orbit.residual <= 1e-10);
        let next = crate::sim::stroboscopic_map(&spec, &orbit.x0).unwrap();
        assert!((&next.x_next - &orbit.x0).norm_inf() < 1e-8);
        assert!((next.d - orbit.d[0]).abs() < 1e-9 * spec.period());
    }

    #[test]
    fn insensitive_to_guess_within_basin() {
        let spec = preset_at("ns_buck", 30.0).unwrap();
        let a = find_orbit(&spec, 1, &OrbitGuess::Averaged).unwrap();
        let b = find_orbit(
            &spec,
            1,
            &OrbitGuess::State(Vector::from(vec![0.3, 10.1, 0.4])),
        )
        .unwrap();
        assert!((&a.x0 - &b.x0).norm_inf() < 1e-8);
    }
}
