//! Exact cycle-by-cycle simulation of the switched converter.
//!
//! Between switching events each stage is an affine linear system, so the
//! state is propagated with matrix exponentials rather than an ODE stepper.

use crate::error::{Error, Result};
use crate::model::{Control, ConverterSpec, RampControl, Stage};
use crate::numerics::{affine_flow, try_bracketed_root, AffineFlow, Vector};

/// Default number of grid subintervals used to bracket ramp crossings.
pub const DEFAULT_CROSSING_GRID: usize = 64;
/// Crossing refinement tolerance relative to the period.
pub const CROSSING_TOL: f64 = 1e-12;

/// Which stage, if any, occupied the whole cycle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Saturation {
    None,
    /// `d = T`: never left S1.
    FullStage1,
    /// `d = 0`: switched to S2 at the clock edge.
    FullStage2,
}

impl Saturation {
    pub fn from_duration(d: f64, period: f64) -> Saturation {
        if d >= period {
            Saturation::FullStage1
        } else if d <= 0.0 {
            Saturation::FullStage2
        } else {
            Saturation::None
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Saturation::None => "none",
            Saturation::FullStage1 => "full_stage1",
            Saturation::FullStage2 => "full_stage2",
        }
    }
}

#[derive(Clone, Debug)]
pub struct CycleResult {
    pub x_next: Vector,
    /// First-stage duration (seconds).
    pub d: f64,
    pub saturated: Saturation,
}

#[derive(Clone, Debug)]
pub struct TrajectorySample {
    pub t: f64,
    pub x: Vector,
    pub v_o: f64,
    pub stage: Stage,
}

/// Outcome of a ramp-crossing search within one cycle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Crossing {
    At(f64),
    None,
}

/// Stroboscopic map of one converter with the per-spec matrix exponentials
/// cached. Cheap to clone; build one per parameter value.
#[derive(Clone, Debug)]
pub struct CycleMap {
    spec: ConverterSpec,
    forcing1: Vector,
    forcing2: Vector,
    grid: usize,
    /// Stage-1 flow over one grid step (ramp mode).
    grid_step: Option<AffineFlow>,
    full1: AffineFlow,
    full2: AffineFlow,
}

impl CycleMap {
    pub fn new(spec: &ConverterSpec) -> Result<CycleMap> {
        CycleMap::with_grid(spec, DEFAULT_CROSSING_GRID)
    }

    pub fn with_grid(spec: &ConverterSpec, grid: usize) -> Result<CycleMap> {
        if grid == 0 {
            return Err(Error::InvalidArgument(
                "crossing grid must be positive".into(),
            ));
        }
        let t = spec.period();
        let forcing1 = spec.forcing(Stage::S1);
        let forcing2 = spec.forcing(Stage::S2);
        let grid_step = match spec.control() {
            Control::Ramp(_) => Some(AffineFlow::new(
                spec.a(Stage::S1),
                &forcing1,
                t / grid as f64,
            )?),
            Control::DiscreteDuty(_) => None,
        };
        Ok(CycleMap {
            full1: AffineFlow::new(spec.a(Stage::S1), &forcing1, t)?,
            full2: AffineFlow::new(spec.a(Stage::S2), &forcing2, t)?,
            spec: spec.clone(),
            forcing1,
            forcing2,
            grid,
            grid_step,
        })
    }

    pub fn spec(&self) -> &ConverterSpec {
        &self.spec
    }

    /// State after flowing `stage` for `tau` seconds from `x`.
    pub fn flow(&self, stage: Stage, x: &[f64], tau: f64) -> Result<Vector> {
        let (full, forcing) = match stage {
            Stage::S1 => (&self.full1, &self.forcing1),
            Stage::S2 => (&self.full2, &self.forcing2),
        };
        if tau == 0.0 {
            return Ok(Vector::from(x));
        }
        if tau == self.spec.period() {
            return Ok(full.apply(x));
        }
        affine_flow(self.spec.a(stage), forcing, x, tau)
    }

    /// Switching function `g(τ) = C x(τ) + D u − h(τ)` along the stage-1 flow.
    fn switching_function(&self, rc: &RampControl, x0: &[f64], tau: f64) -> Result<f64> {
        let x = self.flow(Stage::S1, x0, tau)?;
        Ok(rc.feedback(&x, self.spec.u()) - rc.ramp.value_in_cycle(tau))
    }

    /// First in-cycle instant where the feedback meets the ramp.
    pub fn find_switching_instant(&self, x0: &[f64]) -> Result<Crossing> {
        let rc = self
            .spec
            .ramp_control()
            .ok_or_else(|| Error::InvalidArgument("switching instant needs ramp control".into()))?;
        let step = self.grid_step.as_ref().expect("ramp mode caches grid step");
        let t = self.spec.period();
        let u = self.spec.u();
        let h = t / self.grid as f64;
        let mut x = Vector::from(x0);
        let mut g_prev = rc.feedback(&x, u) - rc.ramp.v_low;
        if g_prev == 0.0 {
            return Ok(Crossing::At(0.0));
        }
        for k in 1..=self.grid {
            x = step.apply(&x);
            let tau = if k == self.grid { t } else { k as f64 * h };
            let g = rc.feedback(&x, u) - rc.ramp.value_in_cycle(tau);
            if g == 0.0 {
                return Ok(Crossing::At(tau));
            }
            if g.signum() != g_prev.signum() {
                let lo = (k - 1) as f64 * h;
                let root = try_bracketed_root(
                    |s| self.switching_function(rc, x0, s),
                    lo,
                    tau,
                    CROSSING_TOL * t,
                )?;
                return Ok(Crossing::At(root));
            }
            g_prev = g;
        }
        Ok(Crossing::None)
    }

    /// First-stage duration for a cycle starting at `x`.
    pub fn duration(&self, x: &[f64]) -> Result<f64> {
        match self.spec.control() {
            Control::Ramp(rc) => {
                // The ramp rises, so the comparator fires once h ≥ y. Starting
                // a cycle already past that point switches immediately.
                if rc.feedback(x, self.spec.u()) < rc.ramp.v_low {
                    return Ok(0.0);
                }
                Ok(match self.find_switching_instant(x)? {
                    Crossing::At(d) => d,
                    Crossing::None => self.spec.period(),
                })
            }
            Control::DiscreteDuty(dc) => Ok(dc.duration(x, self.spec.period())),
        }
    }

    /// End-of-cycle state for a given first-stage duration.
    pub fn propagate(&self, x: &[f64], d: f64) -> Result<Vector> {
        let t = self.spec.period();
        let mid = self.flow(Stage::S1, x, d)?;
        self.flow(Stage::S2, &mid, t - d)
    }

    /// One application of the stroboscopic map `x_n ↦ x_{n+1}`.
    pub fn step(&self, x: &[f64]) -> Result<CycleResult> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("cycle start state".into()));
        }
        let d = self.duration(x)?;
        let x_next = self.propagate(x, d)?;
        if !x_next.is_finite() {
            return Err(Error::NonFinite("cycle end state".into()));
        }
        Ok(CycleResult {
            x_next,
            d,
            saturated: Saturation::from_duration(d, self.spec.period()),
        })
    }

    /// `m` consecutive cycles; returns the per-cycle results.
    pub fn steps(&self, x: &[f64], m: usize) -> Result<Vec<CycleResult>> {
        let mut out = Vec::with_capacity(m);
        let mut cur = Vector::from(x);
        for _ in 0..m {
            let r = self.step(&cur)?;
            cur = r.x_next.clone();
            out.push(r);
        }
        Ok(out)
    }

    /// Stroboscopic states `x_0 … x_n` (n + 1 entries) with a divergence
    /// guard at `1e6 × max(‖x_0‖∞, 1)`.
    pub fn iterate(&self, x0: &[f64], n: usize) -> Result<Vec<Vector>> {
        let limit = divergence_limit(x0);
        let mut states = Vec::with_capacity(n + 1);
        states.push(Vector::from(x0));
        for k in 0..n {
            let next = self.step(states.last().unwrap())?.x_next;
            let norm = next.norm_inf();
            if norm > limit {
                return Err(Error::Divergence {
                    norm,
                    cycles: k + 1,
                });
            }
            states.push(next);
        }
        Ok(states)
    }

    /// Dense waveform: `samples_per_cycle` uniformly spaced samples per cycle
    /// (cycle start included, cycle end excluded), each computed from the
    /// cycle-start state.
    pub fn simulate(
        &self,
        x0: &[f64],
        n_cycles: usize,
        samples_per_cycle: usize,
    ) -> Result<Vec<TrajectorySample>> {
        if n_cycles < 1 {
            return Err(Error::InvalidArgument("n_cycles must be at least 1".into()));
        }
        if samples_per_cycle < 2 {
            return Err(Error::InvalidArgument(
                "samples_per_cycle must be at least 2".into(),
            ));
        }
        let t = self.spec.period();
        let limit = divergence_limit(x0);
        let mut out = Vec::with_capacity(n_cycles * samples_per_cycle);
        let mut x = Vector::from(x0);
        for n in 0..n_cycles {
            let d = self.duration(&x)?;
            let x_switch = self.flow(Stage::S1, &x, d)?;
            for k in 0..samples_per_cycle {
                let tau = k as f64 * t / samples_per_cycle as f64;
                let (stage, xs) = if tau < d {
                    (Stage::S1, self.flow(Stage::S1, &x, tau)?)
                } else {
                    (Stage::S2, self.flow(Stage::S2, &x_switch, tau - d)?)
                };
                out.push(TrajectorySample {
                    t: n as f64 * t + tau,
                    v_o: self.spec.output(stage, &xs),
                    x: xs,
                    stage,
                });
            }
            x = self.flow(Stage::S2, &x_switch, t - d)?;
            let norm = x.norm_inf();
            if !x.is_finite() || norm > limit {
                return Err(Error::Divergence {
                    norm,
                    cycles: n + 1,
                });
            }
        }
        Ok(out)
    }

    /// Output voltage at a clock instant (the cycle starts in S1).
    pub fn clock_output(&self, x: &[f64]) -> f64 {
        self.spec.output(Stage::S1, x)
    }
}

fn divergence_limit(x0: &[f64]) -> f64 {
    let scale = x0.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    1e6 * scale
}

/// First ramp crossing for a cycle starting at `x0` (ramp mode only).
pub fn find_switching_instant(spec: &ConverterSpec, x0: &[f64]) -> Result<Crossing> {
    CycleMap::new(spec)?.find_switching_instant(x0)
}

pub fn stroboscopic_map(spec: &ConverterSpec, x_n: &[f64]) -> Result<CycleResult> {
    CycleMap::new(spec)?.step(x_n)
}

pub fn simulate(
    spec: &ConverterSpec,
    x0: &[f64],
    n_cycles: usize,
    samples_per_cycle: usize,
) -> Result<Vec<TrajectorySample>> {
    CycleMap::new(spec)?.simulate(x0, n_cycles, samples_per_cycle)
}
