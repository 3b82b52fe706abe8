//! Parameter sweeps with orbit continuation, location of bifurcation points,
//! brute-force bifurcation diagrams and modulation-frequency estimation.

use std::fmt;
use std::str::FromStr;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::jacobian::cycle_jacobian;
use crate::model::ConverterSpec;
use crate::numerics::{
    newton_solve, try_bracketed_root, ComplexEig, JacobianSource, Matrix, NewtonOptions, Vector,
};
use crate::orbit::{find_orbit, initial_state, orbit_through, OrbitGuess, PeriodicOrbit};
use crate::presets::PresetParams;
use crate::sim::CycleMap;
use crate::stability::{analyze_orbit, is_real, neimark_frequency, Classification};

/// Something a converter can be rebuilt from at each parameter value.
#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum Template {
    /// Physical parameters; any of them can be swept.
    Preset(PresetParams),
    /// Fixed matrices; only the inputs `vs` and `vr` can be swept.
    Explicit(ConverterSpec),
}

impl Template {
    pub fn build(&self, param: &str, value: f64) -> Result<ConverterSpec> {
        match self {
            Template::Preset(p) => p.clone().with(param, value)?.build(),
            Template::Explicit(spec) => match param {
                "vs" => spec.with_source_voltage(value),
                "vr" => spec.with_input(Vector::from(vec![spec.u()[0], value])),
                other => Err(Error::Unsupported(format!(
                    "explicit-matrix documents can only sweep vs or vr, not `{other}`"
                ))),
            },
        }
    }

    pub fn base(&self) -> Result<ConverterSpec> {
        match self {
            Template::Preset(p) => p.build(),
            Template::Explicit(spec) => Ok(spec.clone()),
        }
    }
}

impl From<PresetParams> for Template {
    fn from(p: PresetParams) -> Self {
        Template::Preset(p)
    }
}

impl From<ConverterSpec> for Template {
    fn from(s: ConverterSpec) -> Self {
        Template::Explicit(s)
    }
}

/// `steps` uniformly spaced values from `from` to `to`, endpoints exact.
pub fn parameter_grid(from: f64, to: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![from];
    }
    (0..steps)
        .map(|k| {
            if k + 1 == steps {
                to
            } else {
                from + (to - from) * k as f64 / (steps - 1) as f64
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub enum RowStatus {
    Ok,
    /// The orbit found has a saturated cycle.
    Saturated,
    /// Newton Jacobian nearly singular (likely close to a fold).
    NearFold,
    /// An m = 2 search collapsed onto a period-one orbit.
    Degenerate,
    /// No orbit located; the message says why.
    NoOrbit(String),
}

impl RowStatus {
    pub fn label(&self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Saturated => "saturated",
            RowStatus::NearFold => "near_fold",
            RowStatus::Degenerate => "degenerate",
            RowStatus::NoOrbit(_) => "no_orbit",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepRecord {
    pub param_value: f64,
    pub orbit: Option<PeriodicOrbit>,
    /// Multipliers (empty when there is no orbit).
    pub eigenvalues: Vec<ComplexEig>,
    /// NaN when there is no orbit.
    pub spectral_radius: f64,
    pub classification: Option<Classification>,
    pub status: RowStatus,
}

fn failed_row(p: f64, e: &Error) -> SweepRecord {
    SweepRecord {
        param_value: p,
        orbit: None,
        eigenvalues: Vec::new(),
        spectral_radius: f64::NAN,
        classification: None,
        status: RowStatus::NoOrbit(e.to_string()),
    }
}

/// Orbit at `spec`, trying continuation from `prev` first, then the
/// averaged equilibrium.
fn continue_orbit(
    spec: &ConverterSpec,
    m: usize,
    prev: Option<&PeriodicOrbit>,
) -> Result<PeriodicOrbit> {
    if let Some(o) = prev {
        if let Ok(found) = find_orbit(spec, m, &OrbitGuess::Orbit(o.clone())) {
            return Ok(found);
        }
    }
    find_orbit(spec, m, &OrbitGuess::Averaged)
}

/// Marches the parameter uniformly, continuing the `m`-periodic orbit and
/// recording its multipliers. Per-point failures are recorded, never fatal.
pub fn sweep(
    template: &Template,
    param: &str,
    from: f64,
    to: f64,
    steps: usize,
    m: usize,
) -> Result<Vec<SweepRecord>> {
    if steps < 2 {
        return Err(Error::InvalidArgument(
            "a sweep needs at least 2 steps".into(),
        ));
    }
    if !(m == 1 || m == 2) {
        return Err(Error::Unsupported(format!("orbits of period multiple {m}")));
    }
    if !from.is_finite() || !to.is_finite() {
        return Err(Error::NonFinite("sweep range".into()));
    }
    // Surface a bad parameter name once instead of in every row.
    template.build(param, from)?;

    let mut rows = Vec::with_capacity(steps);
    let mut prev: Option<PeriodicOrbit> = None;
    for p in parameter_grid(from, to, steps) {
        let row = (|| -> Result<SweepRecord> {
            let spec = template.build(param, p)?;
            let orbit = continue_orbit(&spec, m, prev.as_ref())?;
            let analysis = analyze_orbit(&spec, &orbit)?;
            let status = if orbit.is_degenerate() {
                RowStatus::Degenerate
            } else if orbit.is_saturated() {
                RowStatus::Saturated
            } else if orbit.near_fold {
                RowStatus::NearFold
            } else {
                RowStatus::Ok
            };
            Ok(SweepRecord {
                param_value: p,
                eigenvalues: analysis.report.eigenvalues,
                spectral_radius: analysis.report.spectral_radius,
                classification: Some(analysis.report.classification),
                orbit: Some(orbit),
                status,
            })
        })();
        match row {
            Ok(r) => {
                prev = r.orbit.clone();
                rows.push(r);
            }
            Err(e) => rows.push(failed_row(p, &e)),
        }
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BifurcationKind {
    PeriodDoubling,
    SaddleNode,
    Neimark,
}

impl BifurcationKind {
    pub fn label(self) -> &'static str {
        match self {
            BifurcationKind::PeriodDoubling => "period_doubling",
            BifurcationKind::SaddleNode => "saddle_node",
            BifurcationKind::Neimark => "neimark",
        }
    }

    /// Kind-specific test function of the multipliers; it is positive on the
    /// stable side and changes sign at the bifurcation.
    ///
    /// A complex pair on the relevant half-plane is projected to `∓|λ|`, so
    /// the function stays continuous where a real pair turns complex.
    pub fn test_function(self, eigs: &[ComplexEig]) -> Option<f64> {
        match self {
            BifurcationKind::PeriodDoubling => eigs
                .iter()
                .filter_map(|l| {
                    if is_real(*l) {
                        Some(l.re)
                    } else if l.re < 0.0 {
                        Some(-l.norm())
                    } else {
                        None
                    }
                })
                .min_by(f64::total_cmp)
                .map(|v| 1.0 + v),
            BifurcationKind::SaddleNode => eigs
                .iter()
                .filter_map(|l| {
                    if is_real(*l) {
                        Some(l.re)
                    } else if l.re > 0.0 {
                        Some(l.norm())
                    } else {
                        None
                    }
                })
                .max_by(f64::total_cmp)
                .map(|v| 1.0 - v),
            BifurcationKind::Neimark => eigs
                .iter()
                .filter(|l| !is_real(**l))
                .map(|l| l.norm())
                .max_by(f64::total_cmp)
                .map(|v| 1.0 - v),
        }
    }

    /// The multiplier that realizes the crossing.
    pub fn critical(self, eigs: &[ComplexEig]) -> Option<ComplexEig> {
        let target = match self {
            BifurcationKind::PeriodDoubling => ComplexEig::new(-1.0, 0.0),
            BifurcationKind::SaddleNode => ComplexEig::new(1.0, 0.0),
            BifurcationKind::Neimark => {
                return eigs
                    .iter()
                    .copied()
                    .filter(|l| !is_real(*l) && l.im > 0.0)
                    .min_by(|a, b| (a.norm() - 1.0).abs().total_cmp(&(b.norm() - 1.0).abs()));
            }
        };
        eigs.iter()
            .copied()
            .filter(|l| is_real(*l))
            .min_by(|a, b| (a - target).norm().total_cmp(&(b - target).norm()))
    }
}

impl fmt::Display for BifurcationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for BifurcationKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pd" | "period_doubling" => Ok(BifurcationKind::PeriodDoubling),
            "sn" | "saddle_node" => Ok(BifurcationKind::SaddleNode),
            "ns" | "neimark" => Ok(BifurcationKind::Neimark),
            _ => Err(Error::InvalidArgument(format!(
                "unknown bifurcation kind `{s}` (expected pd, sn or ns)"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BifurcationPoint {
    pub kind: BifurcationKind,
    pub param_value: f64,
    pub critical_eigenvalue: ComplexEig,
    pub eigenvalues: Vec<ComplexEig>,
    pub orbit: PeriodicOrbit,
    /// Neimark only.
    pub modulation_frequency: Option<f64>,
}

/// An interior (unsaturated) T-periodic orbit and its multipliers.
fn interior_point(
    spec: &ConverterSpec,
    guess: &OrbitGuess,
) -> Result<(PeriodicOrbit, Vec<ComplexEig>)> {
    let orbit = find_orbit(spec, 1, guess)?;
    if orbit.is_saturated() {
        return Err(Error::NonSmooth("orbit has a saturated cycle".into()));
    }
    let analysis = analyze_orbit(spec, &orbit)?;
    Ok((orbit, analysis.report.eigenvalues))
}

const DUTY_GUESSES: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Interior orbit at `spec` on the stable side of `kind`'s test function.
fn stable_side_orbit(
    spec: &ConverterSpec,
    kind: BifurcationKind,
) -> Option<(PeriodicOrbit, Vec<ComplexEig>)> {
    std::iter::once(OrbitGuess::Averaged)
        .chain(DUTY_GUESSES.iter().map(|&d| OrbitGuess::OnDuty(d)))
        .filter_map(|g| interior_point(spec, &g).ok())
        .find(|(_, eigs)| kind.test_function(eigs).is_some_and(|g| g > 0.0))
}

fn point_from(
    spec: &ConverterSpec,
    kind: BifurcationKind,
    p: f64,
    orbit: PeriodicOrbit,
    eigs: Vec<ComplexEig>,
) -> Result<BifurcationPoint> {
    let critical = kind.critical(&eigs).ok_or({
        Error::NoConvergence {
            method: "bifurcation location (no multiplier of the requested kind)",
            iterations: 0,
            residual: f64::NAN,
        }
    })?;
    let modulation_frequency = match kind {
        BifurcationKind::Neimark => Some(neimark_frequency(critical, spec.switching_frequency())?),
        _ => None,
    };
    Ok(BifurcationPoint {
        kind,
        param_value: p,
        critical_eigenvalue: critical,
        eigenvalues: eigs,
        orbit,
        modulation_frequency,
    })
}

/// Locates a bifurcation of the given kind within `[a, b]`.
///
/// Period-doubling and Neimark points are roots of the smooth test function
/// along the continued T-periodic orbit. A saddle-node is approached from the
/// side where the stable orbit exists (beyond the fold no interior orbit
/// survives) and polished on the fold system `P(x; p) = x`,
/// `det(Φ(x; p) − I) = 0`.
pub fn locate_bifurcation(
    template: &Template,
    param: &str,
    a: f64,
    b: f64,
    kind: BifurcationKind,
) -> Result<BifurcationPoint> {
    if !(a.is_finite() && b.is_finite()) || a == b {
        return Err(Error::InvalidArgument(format!("bad bracket [{a}, {b}]")));
    }
    match kind {
        BifurcationKind::SaddleNode => locate_fold(template, param, a, b),
        _ => locate_smooth(template, param, a, b, kind),
    }
}

fn locate_smooth(
    template: &Template,
    param: &str,
    a: f64,
    b: f64,
    kind: BifurcationKind,
) -> Result<BifurcationPoint> {
    let spec_a = template.build(param, a)?;
    let (orbit_a, eigs_a) = interior_point(&spec_a, &OrbitGuess::Averaged)?;
    let mut last = orbit_a;
    let mut eval = |p: f64| -> Result<(PeriodicOrbit, Vec<ComplexEig>, f64)> {
        let spec = template.build(param, p)?;
        let (orbit, eigs) = interior_point(&spec, &OrbitGuess::Orbit(last.clone()))
            .or_else(|_| interior_point(&spec, &OrbitGuess::Averaged))
            .map_err(|e| Error::NoConvergence {
                method: match e {
                    Error::NonSmooth(_) => "orbit continuation (saturated inside bracket)",
                    _ => "orbit continuation lost inside bracket",
                },
                iterations: 0,
                residual: p,
            })?;
        let g = kind.test_function(&eigs).ok_or(Error::NoConvergence {
            method: "bifurcation test function (no multiplier of the requested kind)",
            iterations: 0,
            residual: p,
        })?;
        last = orbit.clone();
        Ok((orbit, eigs, g))
    };
    let ga = kind.test_function(&eigs_a);
    let (_, _, gb) = eval(b)?;
    let ga = match ga {
        Some(g) => g,
        None => eval(a)?.2,
    };
    if ga.signum() == gb.signum() {
        return Err(Error::NoSignChange {
            lo: a,
            hi: b,
            flo: ga,
            fhi: gb,
        });
    }
    let tol = 1e-12 * a.abs().max(b.abs()).max(1.0);
    let root = try_bracketed_root(|p| eval(p).map(|r| r.2), a, b, tol)?;
    let (orbit, eigs, _) = eval(root)?;
    point_from(&template.build(param, root)?, kind, root, orbit, eigs)
}

fn locate_fold(template: &Template, param: &str, a: f64, b: f64) -> Result<BifurcationPoint> {
    let kind = BifurcationKind::SaddleNode;
    let spec_a = template.build(param, a)?;
    let spec_b = template.build(param, b)?;
    let (mut lo, mut hi) = (a, b);
    let (mut orbit_lo, _) = match stable_side_orbit(&spec_a, kind) {
        Some(found) => found,
        None => match stable_side_orbit(&spec_b, kind) {
            // The stable branch may live at the other end of the bracket.
            Some(found) => {
                std::mem::swap(&mut lo, &mut hi);
                found
            }
            None => {
                return Err(Error::NoSignChange {
                    lo: a,
                    hi: b,
                    flo: f64::NAN,
                    fhi: f64::NAN,
                })
            }
        },
    };
    let beyond = template.build(param, hi)?;
    if stable_side_orbit(&beyond, kind).is_some() {
        return Err(Error::NoSignChange {
            lo,
            hi,
            flo: 1.0,
            fhi: 1.0,
        });
    }

    // Bisection: "stable interior orbit continued from the stable side" vs
    // "no such orbit".
    let width = 1e-7 * a.abs().max(b.abs()).max(1.0);
    for _ in 0..200 {
        if (hi - lo).abs() <= width {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let spec = template.build(param, mid)?;
        let on_branch = interior_point(&spec, &OrbitGuess::Orbit(orbit_lo.clone()))
            .ok()
            .filter(|(_, eigs)| kind.test_function(eigs).is_some_and(|g| g > 0.0));
        match on_branch {
            Some((orbit, _)) => {
                lo = mid;
                orbit_lo = orbit;
            }
            None => hi = mid,
        }
    }

    match polish_fold(template, param, &orbit_lo, lo) {
        Ok((p, x)) => {
            let spec = template.build(param, p)?;
            let orbit = orbit_through(&spec, 1, &x)?;
            let analysis = analyze_orbit(&spec, &orbit)?;
            let mut orbit = orbit;
            orbit.near_fold = true;
            point_from(&spec, kind, p, orbit, analysis.report.eigenvalues)
        }
        Err(_) => {
            let spec = template.build(param, lo)?;
            let analysis = analyze_orbit(&spec, &orbit_lo)?;
            point_from(&spec, kind, lo, orbit_lo, analysis.report.eigenvalues)
        }
    }
}

/// Newton on `(P(x; p) − x, det(Φ(x; p) − I))` in the unknowns `(x, p)`.
fn polish_fold(
    template: &Template,
    param: &str,
    orbit: &PeriodicOrbit,
    p0: f64,
) -> Result<(f64, Vector)> {
    let n = orbit.x0.dim();
    let residual = |z: &[f64]| -> Result<Vector> {
        let spec = template.build(param, z[n])?;
        let x = &z[..n];
        let map = CycleMap::new(&spec)?;
        let cycle = map.step(x)?;
        if cycle.saturated != crate::sim::Saturation::None {
            return Err(Error::NonSmooth(
                "fold polish left the interior branch".into(),
            ));
        }
        let (phi, _) = cycle_jacobian(&spec, x)?;
        let shifted = &phi - &Matrix::identity(n);
        let mut out: Vec<f64> = cycle.x_next.iter().zip(x).map(|(a, b)| a - b).collect();
        out.push(shifted.determinant()?);
        Ok(Vector::from(out))
    };
    let mut z: Vec<f64> = orbit.x0.to_vec();
    z.push(p0);
    let opts = NewtonOptions {
        tol: 1e-12,
        ..NewtonOptions::default()
    };
    let out = newton_solve(
        residual,
        JacobianSource::FiniteDifference { rel_step: 1e-7 },
        &z,
        &opts,
    )?;
    Ok((out.z[n], Vector::from(&out.z[..n])))
}

#[derive(Clone, Debug)]
pub struct DiagramOptions {
    /// Cycles discarded at each parameter value.
    pub burn_in: usize,
    /// Cycles recorded after the burn-in.
    pub record: usize,
    /// Start each parameter value from the previous value's final state
    /// (a slow sweep). Parameter values are then processed strictly in order.
    pub inherit_state: bool,
    /// Starting state; defaults to the averaged equilibrium.
    pub initial: Option<Vector>,
}

impl Default for DiagramOptions {
    fn default() -> Self {
        DiagramOptions {
            burn_in: 500,
            record: 64,
            inherit_state: false,
            initial: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AttractorSample {
    pub param_value: f64,
    /// `v_o` at the recorded clock instants.
    pub stroboscopic_outputs: Vec<f64>,
    pub final_state: Vector,
}

fn attractor_at(
    template: &Template,
    param: &str,
    p: f64,
    start: Option<&Vector>,
    opts: &DiagramOptions,
) -> Result<AttractorSample> {
    let spec = template.build(param, p)?;
    let x0 = match start {
        Some(x) => x.clone(),
        None => initial_state(&spec, &OrbitGuess::Averaged)?,
    };
    let map = CycleMap::new(&spec)?;
    let states = map.iterate(&x0, opts.burn_in + opts.record)?;
    let recorded = &states[states.len() - opts.record..];
    Ok(AttractorSample {
        param_value: p,
        stroboscopic_outputs: recorded.iter().map(|x| map.clock_output(x)).collect(),
        final_state: states.last().unwrap().clone(),
    })
}

/// Iterates the full nonlinear map at each parameter value from `from` to
/// `to` (in that order) and records the clock-instant output voltage.
pub fn brute_force_diagram(
    template: &Template,
    param: &str,
    from: f64,
    to: f64,
    steps: usize,
    opts: &DiagramOptions,
) -> Result<Vec<AttractorSample>> {
    if steps < 1 {
        return Err(Error::InvalidArgument(
            "a diagram needs at least 1 step".into(),
        ));
    }
    if opts.record < 1 {
        return Err(Error::InvalidArgument("record at least one cycle".into()));
    }
    let grid = parameter_grid(from, to, steps);
    if opts.inherit_state {
        let mut out: Vec<AttractorSample> = Vec::with_capacity(steps);
        for &p in &grid {
            let start = out
                .last()
                .map(|s| s.final_state.clone())
                .or_else(|| opts.initial.clone());
            out.push(attractor_at(template, param, p, start.as_ref(), opts)?);
        }
        return Ok(out);
    }

    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(grid.len());
    let chunk = grid.len().div_ceil(workers);
    let results: Vec<Result<Vec<AttractorSample>>> = std::thread::scope(|s| {
        let handles: Vec<_> = grid
            .chunks(chunk)
            .map(|ps| {
                s.spawn(move || {
                    ps.iter()
                        .map(|&p| attractor_at(template, param, p, opts.initial.as_ref(), opts))
                        .collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("diagram worker panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(steps);
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// Minimum series length for [`estimate_modulation_frequency`].
pub const MIN_MODULATION_SAMPLES: usize = 512;

/// Dominant frequency of a stroboscopic series sampled at `f_s`: Hann-windowed
/// DFT of the mean-removed series, peak bin refined by a parabola through its
/// neighbours. `None` for a flat series.
pub fn estimate_modulation_frequency(samples: &[f64], f_s: f64) -> Result<Option<f64>> {
    let n = samples.len();
    if n < MIN_MODULATION_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_MODULATION_SAMPLES} samples, got {n}"
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) || f_s.is_nan() || f_s <= 0.0 {
        return Err(Error::NonFinite("modulation series".into()));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let spread = samples
        .iter()
        .map(|v| (v - mean).abs())
        .fold(0.0_f64, f64::max);
    if spread <= 1e-9 * mean.abs().max(1.0) {
        return Ok(None);
    }
    let mut buf: Vec<Complex<f64>> = samples
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / (n - 1) as f64).cos();
            Complex::new((v - mean) * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mags: Vec<f64> = buf[..n / 2 + 1].iter().map(|c| c.norm()).collect();
    let (peak, _) = mags
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let offset = if peak + 1 < mags.len() {
        let (l, c, r) = (mags[peak - 1], mags[peak], mags[peak + 1]);
        let denom = l - 2.0 * c + r;
        if denom != 0.0 {
            (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    } else {
        0.0
    };
    Ok(Some((peak as f64 + offset) * f_s / n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::PresetKind;

    fn pd() -> Template {
        Template::Preset(PresetKind::PdBuck.defaults())
    }

    #[test]
    fn grid_endpoints_exact() {
        let g = parameter_grid(13.1, 25.068, 100);
        assert_eq!(g.len(), 100);
        assert_eq!(g[0], 13.1);
        assert_eq!(g[99], 25.068);
    }

    #[test]
    fn degenerate_sweep_gives_identical_rows() {
        let rows = sweep(&pd(), "vs", 20.0, 20.0, 2, 1).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].eigenvalues, rows[1].eigenvalues);
        assert_eq!(
            rows[0].orbit.as_ref().unwrap().x0,
            rows[1].orbit.as_ref().unwrap().x0
        );
    }

    #[test]
    fn sweep_rejects_bad_arguments() {
        assert!(sweep(&pd(), "vs", 20.0, 21.0, 1, 1).is_err());
        assert!(sweep(&pd(), "nope", 20.0, 21.0, 3, 1).is_err());
        assert!(sweep(&pd(), "vs", 20.0, 21.0, 3, 3).is_err());
    }

    #[test]
    fn test_functions_are_continuous_at_pair_splitting() {
        let k = BifurcationKind::PeriodDoubling;
        let pair = [ComplexEig::new(-0.8, 0.1), ComplexEig::new(-0.8, -0.1)];
        let m = pair[0].norm();
        let split = [ComplexEig::new(-m, 0.0), ComplexEig::new(-m, 0.0)];
        assert!((k.test_function(&pair).unwrap() - k.test_function(&split).unwrap()).abs() < 1e-15);
        assert_eq!(
            BifurcationKind::Neimark.test_function(&[ComplexEig::new(0.5, 0.0)]),
            None
        );
    }

    #[test]
    fn kinds_parse() {
        assert_eq!(
            "pd".parse::<BifurcationKind>().unwrap(),
            BifurcationKind::PeriodDoubling
        );
        assert_eq!(
            "sn".parse::<BifurcationKind>().unwrap(),
            BifurcationKind::SaddleNode
        );
        assert_eq!(
            "ns".parse::<BifurcationKind>().unwrap(),
            BifurcationKind::Neimark
        );
        assert!("hopf".parse::<BifurcationKind>().is_err());
    }

    #[test]
    fn sinusoid_frequency() {
        let fs = 15_000.0;
        let s: Vec<f64> = (0..4096)
            .map(|k| 3.0 + (2.0 * std::f64::consts::PI * 1000.0 * k as f64 / fs).sin())
            .collect();
        let f = estimate_modulation_frequency(&s, fs).unwrap().unwrap();
        assert!((f - 1000.0).abs() < 5.0, "{f}");
    }

    #[test]
    fn flat_and_short_series() {
        assert_eq!(
            estimate_modulation_frequency(&[2.5; 1024], 15e3).unwrap(),
            None
        );
        assert!(estimate_modulation_frequency(&[1.0; 100], 15e3).is_err());
    }

    #[test]
    fn explicit_template_sweeps_inputs_only() {
        let t = Template::Explicit(pd().base().unwrap());
        assert_eq!(t.build("vs", 21.0).unwrap().source_voltage(), 21.0);
        assert!(t.build("L", 1.0).is_err());
    }
}
