mod report;

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dcdc_core::averaged::{averaged_jacobian, consistent_duty, DutySource};
use dcdc_core::bifurcation::{
    brute_force_diagram, locate_bifurcation, sweep, BifurcationKind, DiagramOptions, Template,
};
use dcdc_core::document::ConverterDocument;
use dcdc_core::jacobian::{
    orbit_jacobian, phi_closed_form, phi_discrete_duty, phi_finite_difference, relative_mismatch,
    JacobianMethod,
};
use dcdc_core::model::{saturated_always_on_check, ConverterSpec};
use dcdc_core::numerics::{eigenvalues, Matrix, Vector};
use dcdc_core::orbit::{find_orbit, OrbitGuess, PeriodicOrbit};
use dcdc_core::presets::PresetKind;
use dcdc_core::sim::simulate;
use dcdc_core::stability::{classify, classify_with_band, Classification};
use dcdc_core::Error;

use report::{complex, complex_list, kv, list, num, RunReport};

#[derive(Debug)]
enum CliError {
    Usage(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Numeric(m) | CliError::Io(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_)
            | Error::Document(_)
            | Error::Dimension(_)
            | Error::Unsupported(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "dcdc",
    version,
    about = "Sampled-data analysis of PWM DC-DC converters: orbits, multipliers and local bifurcations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SpecArgs {
    /// Built-in converter (pd_buck, sn_buck, ns_buck).
    #[arg(long, conflicts_with = "file")]
    preset: Option<String>,
    /// Converter document (TOML, schema_version = 1).
    #[arg(long)]
    file: Option<PathBuf>,
    /// Physical-parameter override, e.g. `--set vs=26`. Repeatable.
    #[arg(long = "set", value_name = "NAME=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in converters or show one's parameters.
    Presets {
        #[command(subcommand)]
        action: PresetsAction,
    },
    /// Cycle-by-cycle waveform as CSV.
    Simulate {
        #[command(flatten)]
        spec: SpecArgs,
        /// Start on the located m-periodic orbit (`m=1`, `m=2`).
        #[arg(long, value_name = "m=M", conflicts_with = "x0")]
        from_orbit: Option<String>,
        /// Explicit start state, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        #[arg(long, default_value_t = 100)]
        cycles: usize,
        #[arg(long, default_value_t = 64)]
        samples_per_cycle: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Locate a periodic orbit and report its multipliers.
    Orbit {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 1)]
        m: usize,
        /// `averaged`, `duty=F` (switch-ON fraction) or `x=a,b,...`.
        #[arg(long)]
        guess: Option<String>,
    },
    /// Print Φ and its eigenvalues for a located orbit.
    Eigs {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long)]
        guess: Option<String>,
        #[arg(long, value_enum, default_value_t = PhiMethod::Auto)]
        method: PhiMethod,
    },
    /// Continue an orbit over a parameter range; CSV of multipliers.
    Sweep {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value = "vs")]
        param: String,
        #[arg(long, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Locate a bifurcation point inside a bracket.
    Locate {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value = "vs")]
        param: String,
        /// pd, sn or ns.
        #[arg(long)]
        kind: String,
        #[arg(long, num_args = 2, value_names = ["A", "B"], allow_hyphen_values = true)]
        bracket: Vec<f64>,
    },
    /// Brute-force bifurcation diagram as CSV.
    Bifdiag {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value = "vs")]
        param: String,
        #[arg(long, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long, default_value_t = 500)]
        burn_in: usize,
        #[arg(long, default_value_t = 64)]
        record: usize,
        /// Carry the state between parameter values, sweeping up or down.
        #[arg(long, value_enum, default_value_t = Inherit::None)]
        inherit: Inherit,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Averaged-model linearization, compared with the sampled-data result.
    Averaged {
        #[command(flatten)]
        spec: SpecArgs,
        /// Switch-ON duty; defaults to the consistent duty.
        #[arg(long)]
        duty: Option<f64>,
        /// Distance to the unit circle below which a sampled-data multiplier
        /// counts as a disagreement with a stable averaged verdict.
        #[arg(long, default_value_t = 1e-2)]
        band: f64,
    },
}

#[derive(Subcommand)]
enum PresetsAction {
    List,
    Show {
        name: String,
        /// Print the equivalent explicit-matrix converter document.
        #[arg(long)]
        toml: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PhiMethod {
    Auto,
    Closed,
    Discrete,
    Fd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Inherit {
    None,
    Up,
    Down,
}

impl SpecArgs {
    fn template(&self) -> CliResult<Template> {
        let mut template = match (&self.preset, &self.file) {
            (Some(name), None) => Template::Preset(name.parse::<PresetKind>()?.defaults()),
            (None, Some(path)) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                ConverterDocument::parse(&text)?.template()?
            }
            _ => {
                return Err(CliError::Usage(
                    "give a converter with --preset NAME or --file PATH".into(),
                ))
            }
        };
        for item in &self.set {
            let (k, v) = item.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("--set expects NAME=VALUE, got `{item}`"))
            })?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("--set {k}: `{v}` is not a number")))?;
            template = match template {
                Template::Preset(p) => Template::Preset(p.with(k.trim(), v)?),
                Template::Explicit(_) => Template::Explicit(template.build(k.trim(), v)?),
            };
        }
        Ok(template)
    }

    fn spec(&self) -> CliResult<ConverterSpec> {
        Ok(self.template()?.base()?)
    }
}

fn command_echo() -> String {
    let args: Vec<String> = std::env::args().skip(1).collect();
    format!("dcdc {}", args.join(" "))
}

fn parse_guess(text: &str, n: usize) -> CliResult<OrbitGuess> {
    if text == "averaged" {
        return Ok(OrbitGuess::Averaged);
    }
    if let Some(d) = text.strip_prefix("duty=") {
        let d: f64 = d
            .parse()
            .map_err(|_| CliError::Usage(format!("bad duty in --guess {text}")))?;
        if !(0.0..=1.0).contains(&d) {
            return Err(CliError::Usage(format!(
                "--guess duty must lie in [0, 1], got {d}"
            )));
        }
        return Ok(OrbitGuess::OnDuty(d));
    }
    if let Some(x) = text.strip_prefix("x=") {
        let x: Vec<f64> = x
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::Usage(format!("bad state in --guess {text}")))?;
        if x.len() != n {
            return Err(CliError::Usage(format!(
                "--guess x needs {n} components, got {}",
                x.len()
            )));
        }
        return Ok(OrbitGuess::State(Vector::from(x)));
    }
    Err(CliError::Usage(format!(
        "--guess expects averaged, duty=F or x=a,b,..., got `{text}`"
    )))
}

fn guess_label(g: &OrbitGuess) -> String {
    match g {
        OrbitGuess::Averaged => "averaged".into(),
        OrbitGuess::OnDuty(d) => format!("duty={d}"),
        OrbitGuess::State(x) => format!("x={}", list(x)),
        OrbitGuess::Orbit(_) => "continuation".into(),
    }
}

/// Tries the user's guess, or the default chain (averaged equilibrium, then
/// a grid of duties), preferring a stable unsaturated orbit, then any
/// unsaturated one.
fn locate_orbit(
    spec: &ConverterSpec,
    m: usize,
    guess: Option<&str>,
) -> CliResult<(PeriodicOrbit, String)> {
    let chain: Vec<OrbitGuess> = match guess {
        Some(g) => vec![parse_guess(g, spec.dim())?],
        None => std::iter::once(OrbitGuess::Averaged)
            .chain((1..10).map(|k| OrbitGuess::OnDuty(k as f64 / 10.0)))
            .collect(),
    };
    let mut interior = None;
    let mut saturated = None;
    let mut failures = Vec::new();
    for g in &chain {
        match find_orbit(spec, m, g) {
            Ok(o) if !o.is_saturated() && !o.is_degenerate() => {
                let stable = orbit_jacobian(spec, &o)
                    .and_then(|(phi, _)| eigenvalues(&phi))
                    .map(|e| classify(&e).is_stable())
                    .unwrap_or(false);
                if stable {
                    return Ok((o, guess_label(g)));
                }
                if interior.is_none() {
                    interior = Some((o, guess_label(g)));
                }
            }
            Ok(o) => {
                if saturated.is_none() {
                    saturated = Some((o, guess_label(g)));
                }
            }
            Err(e) => failures.push(format!("{}: {e}", guess_label(g))),
        }
    }
    interior.or(saturated).ok_or_else(|| {
        CliError::Numeric(format!(
            "no {m}T-periodic orbit found; guesses tried: {}",
            failures.join("; ")
        ))
    })
}

fn orbit_rows(rows: &mut Vec<(String, String)>, spec: &ConverterSpec, o: &PeriodicOrbit) {
    kv(rows, "m", o.m.to_string());
    kv(rows, "x0", list(&o.x0));
    if o.m > 1 {
        for (k, s) in o.states.iter().enumerate().skip(1) {
            kv(rows, &format!("x{k}"), list(s));
        }
    }
    kv(rows, "d_seconds", list(&o.d));
    kv(rows, "duty_s1", list(&o.duty));
    kv(rows, "duty_on", list(&o.on_duty(spec)));
    kv(rows, "residual", num(o.residual));
    let sat: Vec<&str> = o.saturation.iter().map(|s| s.label()).collect();
    kv(rows, "saturation", format!("[{}]", sat.join(", ")));
    kv(rows, "near_fold", o.near_fold.to_string());
    kv(rows, "clock_v_o_volts", list(&o.clock_outputs(spec)));
}

fn matrix_rows(rows: &mut Vec<(String, String)>, name: &str, m: &Matrix) {
    for i in 0..m.rows() {
        kv(rows, &format!("{name}[{i}]"), list(m.row_slice(i)));
    }
}

fn open_out(path: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(
            fs::File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn check_m(m: usize) -> CliResult<()> {
    if m == 1 || m == 2 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--m must be 1 or 2, got {m}")))
    }
}

fn cmd_presets(action: &PresetsAction) -> CliResult<String> {
    let mut out = String::new();
    match action {
        PresetsAction::List => {
            for k in PresetKind::ALL {
                out.push_str(&format!("{}\t{}\n", k.name(), k.description()));
            }
        }
        PresetsAction::Show { name, toml } => {
            let kind: PresetKind = name.parse()?;
            if *toml {
                let spec = kind.defaults().build()?;
                return Ok(ConverterDocument::from_spec(&spec).to_toml()?);
            }
            out.push_str(&format!("# {}: {}\n", kind.name(), kind.description()));
            for (k, v) in kind.defaults().iter() {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
    }
    Ok(out)
}

fn cmd_simulate(
    spec_args: &SpecArgs,
    from_orbit: &Option<String>,
    x0: &Option<Vec<f64>>,
    cycles: usize,
    samples_per_cycle: usize,
    out: &Option<PathBuf>,
) -> CliResult<String> {
    if cycles == 0 {
        return Err(CliError::Usage("--cycles must be at least 1".into()));
    }
    if samples_per_cycle < 2 {
        return Err(CliError::Usage(
            "--samples-per-cycle must be at least 2".into(),
        ));
    }
    let spec = spec_args.spec()?;
    let start = match (from_orbit, x0) {
        (Some(m), _) => {
            let m: usize = m.trim_start_matches("m=").parse().map_err(|_| {
                CliError::Usage(format!("--from-orbit expects m=1 or m=2, got `{m}`"))
            })?;
            check_m(m)?;
            locate_orbit(&spec, m, None)?.0.x0
        }
        (None, Some(x)) => {
            if x.len() != spec.dim() {
                return Err(CliError::Usage(format!(
                    "--x0 needs {} components, got {}",
                    spec.dim(),
                    x.len()
                )));
            }
            Vector::from(x.clone())
        }
        (None, None) => dcdc_core::orbit::initial_state(&spec, &OrbitGuess::Averaged)?,
    };
    let samples = simulate(&spec, &start, cycles, samples_per_cycle)?;
    let mut w = csv::Writer::from_writer(open_out(out)?);
    let mut header = vec!["t_seconds".to_string()];
    header.extend((1..=spec.dim()).map(|i| format!("x{i}")));
    header.push("v_o_volts".into());
    header.push("stage".into());
    w.write_record(&header)?;
    for s in &samples {
        let mut rec = vec![s.t.to_string()];
        rec.extend(s.x.iter().map(|v| v.to_string()));
        rec.push(s.v_o.to_string());
        rec.push(s.stage.label().to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(String::new())
}

fn cmd_orbit(spec_args: &SpecArgs, m: usize, guess: &Option<String>) -> CliResult<String> {
    check_m(m)?;
    let spec = spec_args.spec()?;
    let mut rep = RunReport::new(command_echo(), &spec);
    let (orbit, used) = match locate_orbit(&spec, m, guess.as_deref()) {
        Ok(found) => found,
        Err(e) => {
            // Discrete duty law: the only steady state may be the saturated
            // always-on point, which Newton need not have reached.
            match saturated_always_on_check(&spec) {
                Ok(check) if check.feasible => {
                    let o = dcdc_core::orbit::orbit_through(&spec, 1, &check.equilibrium)?;
                    (o, "always-on equilibrium".into())
                }
                _ => return Err(e),
            }
        }
    };
    if orbit.is_saturated() {
        rep.warn(
            "no interior (unsaturated) periodic orbit found; reporting the saturated fixed point",
        );
    }
    if orbit.is_degenerate() {
        rep.warn("the 2T search converged to a T-periodic orbit");
    }
    if orbit.near_fold {
        rep.warn("Newton Jacobian nearly singular: orbit is close to a fold (saddle-node)");
    }
    let rows = rep.section("orbit");
    kv(rows, "guess", used);
    orbit_rows(rows, &spec, &orbit);

    let (phi, method) = orbit_jacobian(&spec, &orbit)?;
    let eigs = eigenvalues(&phi)?;
    let stab = classify(&eigs);
    let rows = rep.section("stability");
    kv(rows, "jacobian", method.label());
    kv(rows, "eigenvalues", complex_list(&stab.eigenvalues));
    kv(rows, "spectral_radius", num(stab.spectral_radius));
    kv(rows, "classification", stab.classification.label());
    kv(
        rows,
        "critical_eigenvalue",
        complex(stab.critical_eigenvalue),
    );
    if matches!(
        method,
        JacobianMethod::ClosedForm | JacobianMethod::DiscreteDuty
    ) {
        let fd = phi_finite_difference(&spec, &orbit)?;
        kv(
            rows,
            "fd_relative_mismatch",
            num(relative_mismatch(&phi, &fd, 1e-8)),
        );
    }
    if m == 1 && method == JacobianMethod::FiniteDifference {
        rep.warn("closed-form Jacobian not applicable here (grazing or limiter corner); finite differences used");
    }
    Ok(rep.render())
}

fn cmd_eigs(
    spec_args: &SpecArgs,
    m: usize,
    guess: &Option<String>,
    method: PhiMethod,
) -> CliResult<String> {
    check_m(m)?;
    let spec = spec_args.spec()?;
    let (orbit, _) = locate_orbit(&spec, m, guess.as_deref())?;
    let (phi, label) = match method {
        PhiMethod::Auto => {
            let (phi, mth) = orbit_jacobian(&spec, &orbit)?;
            (phi, mth.label())
        }
        PhiMethod::Closed => (
            phi_closed_form(&spec, &orbit)?,
            JacobianMethod::ClosedForm.label(),
        ),
        PhiMethod::Discrete => (
            phi_discrete_duty(&spec, &orbit)?,
            JacobianMethod::DiscreteDuty.label(),
        ),
        PhiMethod::Fd => (
            phi_finite_difference(&spec, &orbit)?,
            JacobianMethod::FiniteDifference.label(),
        ),
    };
    let eigs = eigenvalues(&phi)?;
    let stab = classify(&eigs);
    let mut rep = RunReport::new(command_echo(), &spec);
    let rows = rep.section("phi");
    kv(rows, "jacobian", label);
    kv(rows, "x0", list(&orbit.x0));
    matrix_rows(rows, "phi", &phi);
    kv(rows, "eigenvalues", complex_list(&eigs));
    let moduli: Vec<f64> = eigs.iter().map(|l| l.norm()).collect();
    kv(rows, "moduli", list(&moduli));
    kv(rows, "spectral_radius", num(stab.spectral_radius));
    kv(rows, "classification", stab.classification.label());
    Ok(rep.render())
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    spec_args: &SpecArgs,
    param: &str,
    from: f64,
    to: f64,
    steps: usize,
    m: usize,
    out: &Option<PathBuf>,
) -> CliResult<String> {
    check_m(m)?;
    let template = spec_args.template()?;
    let n = template.base()?.dim();
    let rows = sweep(&template, param, from, to, steps, m)?;
    let mut w = csv::Writer::from_writer(open_out(out)?);
    let mut header = vec!["param".to_string()];
    for i in 1..=n {
        header.push(format!("re_l{i}"));
        header.push(format!("im_l{i}"));
    }
    header.extend(["spectral_radius", "duty", "status"].map(String::from));
    w.write_record(&header)?;
    for r in &rows {
        let mut rec = vec![r.param_value.to_string()];
        for i in 0..n {
            match r.eigenvalues.get(i) {
                Some(l) => {
                    rec.push(l.re.to_string());
                    rec.push(l.im.to_string());
                }
                None => {
                    rec.push(String::new());
                    rec.push(String::new());
                }
            }
        }
        match &r.orbit {
            Some(o) => {
                rec.push(r.spectral_radius.to_string());
                rec.push(o.duty[0].to_string());
            }
            None => {
                rec.push(String::new());
                rec.push(String::new());
            }
        }
        rec.push(r.status.label().to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    drop(w);

    if out.is_none() {
        return Ok(String::new());
    }
    let spec = template.build(param, from)?;
    let mut rep = RunReport::new(command_echo(), &spec);
    let failed = rows.iter().filter(|r| r.orbit.is_none()).count();
    let crossings: Vec<String> = rows
        .windows(2)
        .filter(|w| {
            w[0].classification.is_some()
                && w[1].classification.is_some()
                && (w[0].spectral_radius < 1.0) != (w[1].spectral_radius < 1.0)
        })
        .map(|w| format!("({}, {})", num(w[0].param_value), num(w[1].param_value)))
        .collect();
    let s = rep.section("sweep");
    kv(s, "rows", rows.len().to_string());
    kv(s, "rows_without_orbit", failed.to_string());
    kv(
        s,
        "stability_changes_between",
        format!("[{}]", crossings.join(", ")),
    );
    Ok(rep.render())
}

fn cmd_locate(spec_args: &SpecArgs, param: &str, kind: &str, bracket: &[f64]) -> CliResult<String> {
    let kind: BifurcationKind = kind.parse()?;
    let [a, b] = bracket else {
        return Err(CliError::Usage("--bracket needs two values".into()));
    };
    let template = spec_args.template()?;
    let point = locate_bifurcation(&template, param, *a, *b, kind)?;
    let spec = template.build(param, point.param_value)?;
    let mut rep = RunReport::new(command_echo(), &spec);
    let rows = rep.section("bifurcation");
    kv(rows, "kind", point.kind.label());
    kv(rows, "param", param);
    kv(rows, "param_value", num(point.param_value));
    kv(
        rows,
        "critical_eigenvalue",
        complex(point.critical_eigenvalue),
    );
    kv(
        rows,
        "critical_modulus",
        num(point.critical_eigenvalue.norm()),
    );
    kv(rows, "eigenvalues", complex_list(&point.eigenvalues));
    if let Some(f) = point.modulation_frequency {
        kv(rows, "modulation_frequency_hz", num(f));
    }
    let rows = rep.section("orbit");
    orbit_rows(rows, &spec, &point.orbit);
    Ok(rep.render())
}

#[allow(clippy::too_many_arguments)]
fn cmd_bifdiag(
    spec_args: &SpecArgs,
    param: &str,
    from: f64,
    to: f64,
    steps: usize,
    burn_in: usize,
    record: usize,
    inherit: Inherit,
    out: &Option<PathBuf>,
) -> CliResult<String> {
    if steps == 0 || record == 0 {
        return Err(CliError::Usage(
            "--steps and --record must be at least 1".into(),
        ));
    }
    let template = spec_args.template()?;
    let (lo, hi) = (from.min(to), from.max(to));
    let (start, end) = match inherit {
        Inherit::None => (from, to),
        Inherit::Up => (lo, hi),
        Inherit::Down => (hi, lo),
    };
    let opts = DiagramOptions {
        burn_in,
        record,
        inherit_state: inherit != Inherit::None,
        initial: None,
    };
    let samples = brute_force_diagram(&template, param, start, end, steps, &opts)?;
    let mut w = csv::Writer::from_writer(open_out(out)?);
    w.write_record(["param", "sample_index", "v_o_volts"])?;
    for s in &samples {
        for (k, v) in s.stroboscopic_outputs.iter().enumerate() {
            w.write_record([s.param_value.to_string(), k.to_string(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(String::new())
}

fn cmd_averaged(spec_args: &SpecArgs, duty: Option<f64>, band: f64) -> CliResult<String> {
    let spec = spec_args.spec()?;
    let (on_duty, source) = match duty {
        Some(d) => (d, "user"),
        None => {
            let est = consistent_duty(&spec)?;
            let src = match est.source {
                DutySource::Consistent => "consistent",
                DutySource::OrbitFallback => "orbit_fallback",
            };
            (est.on_duty, src)
        }
    };
    let op = averaged_jacobian(&spec, on_duty)?;
    let mut rep = RunReport::new(command_echo(), &spec);
    let rows = rep.section("averaged");
    kv(rows, "D_c_on", num(op.on_duty));
    kv(rows, "D_c_s1", num(op.s1_fraction));
    kv(rows, "duty_source", source);
    kv(rows, "X_ave", list(&op.x_ave));
    matrix_rows(rows, "J_ave", &op.jacobian);
    kv(rows, "eigenvalues", complex_list(&op.eigenvalues));
    kv(rows, "stable", op.is_stable().to_string());
    kv(rows, "near_hopf", op.near_hopf.to_string());
    if let Some(pair) = op.leading_complex_pair() {
        kv(
            rows,
            "leading_pair_frequency_hz",
            num(pair.im / (2.0 * std::f64::consts::PI)),
        );
    }
    let averaged_verdict = if op.is_stable() { "stable" } else { "unstable" };

    let sampled = locate_orbit(&spec, 1, None).and_then(|(o, _)| {
        let (phi, _) = orbit_jacobian(&spec, &o)?;
        Ok((o, eigenvalues(&phi)?))
    });
    let rows = rep.section("sampled_data");
    match sampled {
        Ok((orbit, eigs)) => {
            let stab = classify_with_band(&eigs, band);
            kv(rows, "duty_on", list(&orbit.on_duty(&spec)));
            kv(rows, "eigenvalues", complex_list(&eigs));
            kv(rows, "spectral_radius", num(stab.spectral_radius));
            kv(rows, "classification", stab.classification.label());
            kv(
                rows,
                "verdict",
                format!(
                    "averaged model {averaged_verdict}; sampled-data {} (spectral radius {})",
                    stab.classification,
                    num(stab.spectral_radius)
                ),
            );
            let sampled_critical = stab.classification != Classification::Stable;
            if op.is_stable() && sampled_critical {
                rep.warn(format!(
                    "sampled-data analysis disagrees: multiplier {} is {} while the averaged model is stable",
                    complex(stab.critical_eigenvalue),
                    match stab.classification {
                        Classification::Unstable => "outside the unit circle".to_string(),
                        c => format!("within {} of the unit circle ({c})", num(band)),
                    }
                ));
            } else if !op.is_stable() && stab.classification == Classification::Stable {
                rep.warn("sampled-data analysis disagrees: the T-periodic orbit is stable while the averaged model is not");
            }
        }
        Err(e) => {
            kv(
                rows,
                "verdict",
                format!("averaged model {averaged_verdict}; no sampled-data orbit"),
            );
            rep.warn(format!("sampled-data orbit not available: {}", e.message()));
        }
    }
    Ok(rep.render())
}

fn run(cli: &Cli) -> CliResult<String> {
    match &cli.command {
        Command::Presets { action } => cmd_presets(action),
        Command::Simulate {
            spec,
            from_orbit,
            x0,
            cycles,
            samples_per_cycle,
            out,
        } => cmd_simulate(spec, from_orbit, x0, *cycles, *samples_per_cycle, out),
        Command::Orbit { spec, m, guess } => cmd_orbit(spec, *m, guess),
        Command::Eigs {
            spec,
            m,
            guess,
            method,
        } => cmd_eigs(spec, *m, guess, *method),
        Command::Sweep {
            spec,
            param,
            from,
            to,
            steps,
            m,
            out,
        } => cmd_sweep(spec, param, *from, *to, *steps, *m, out),
        Command::Locate {
            spec,
            param,
            kind,
            bracket,
        } => cmd_locate(spec, param, kind, bracket),
        Command::Bifdiag {
            spec,
            param,
            from,
            to,
            steps,
            burn_in,
            record,
            inherit,
            out,
        } => cmd_bifdiag(
            spec, param, *from, *to, *steps, *burn_in, *record, *inherit, out,
        ),
        Command::Averaged { spec, duty, band } => cmd_averaged(spec, *duty, *band),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(text) => {
            let mut stdout = io::stdout().lock();
            if stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .is_err()
            {
                return ExitCode::from(4);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
