//! The `hele-homog` command-line front end.
//!
//! Every subcommand accepts `--config FILE`, a JSON object with
//! `"version": 1` and keys named after the long flags (`T` for `--T`).
//! Flags given on the command line override values from the file.
//!
//! Exit codes: 0 success, 1 validation failure (bad input, failed check),
//! 2 numerical failure.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::barriers::{
    self, BarrierCheck, BarrierError, BarrierField, BarrierReport, BoundaryData, PerturbedContracting,
    RadialContracting,
};
use crate::geometry::{ConeGeometry, GeometryError, GeometryRecord};
use crate::homog1d::{self, HomogError, Side};
use crate::hs2d::{self, Hs2dError, SimConfig};
use crate::medium::{Medium, MediumError, MediumSpec};
use crate::timescale::{SubScaling, SuperScaling, ThetaShift, TimescaleError};

pub const CONFIG_VERSION: u64 = 1;
pub const SEED_VAR: &str = "HELE_HOMOG_SEED";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    invalid(format!("{}: {e}", path.display()))
}

impl From<MediumError> for CliError {
    fn from(e: MediumError) -> CliError {
        match e {
            MediumError::NonFinite { .. } => CliError::Numerical(e.to_string()),
            _ => invalid(e.to_string()),
        }
    }
}

impl From<HomogError> for CliError {
    fn from(e: HomogError) -> CliError {
        match e {
            HomogError::Medium(m) => m.into(),
            HomogError::Param(_) | HomogError::TimeDependent { .. } => invalid(e.to_string()),
            HomogError::NonFinite(_) | HomogError::Bracket { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<Hs2dError> for CliError {
    fn from(e: Hs2dError) -> CliError {
        match e {
            Hs2dError::Medium(m) => m.into(),
            Hs2dError::Config(_) | Hs2dError::Resolution { .. } | Hs2dError::EmptySet => invalid(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<TimescaleError> for CliError {
    fn from(e: TimescaleError) -> CliError {
        invalid(e.to_string())
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> CliError {
        invalid(e.to_string())
    }
}

impl From<BarrierError> for CliError {
    fn from(e: BarrierError) -> CliError {
        match e {
            BarrierError::Window { .. } => CliError::Numerical(e.to_string()),
            _ => invalid(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "hele-homog",
    version,
    about = "Homogenized Hele-Shaw free-boundary velocities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Inspect periodic media.
    #[command(subcommand)]
    Medium(MediumCmd),
    /// Effective velocities in one dimension.
    #[command(subcommand)]
    Rq(RqCmd),
    /// Lambert-W time rescalings.
    #[command(subcommand)]
    Timescale(TimescaleCmd),
    /// Closed-form radial barriers.
    #[command(subcommand)]
    Barrier(BarrierCmd),
    /// Cone geometry of a planar obstacle.
    #[command(subcommand)]
    Geometry(GeometryCmd),
    /// Two-dimensional strip simulations.
    #[command(subcommand)]
    Sim2d(Sim2dCmd),
}

#[derive(Subcommand, Debug)]
enum MediumCmd {
    /// Parse a medium, estimate its bounds and audit its periodicity.
    Check(MediumCheckArgs),
}

#[derive(Subcommand, Debug)]
enum RqCmd {
    /// Effective velocity over a range of slopes.
    Curve(CurveArgs),
    /// One obstacle front and its flatness trace.
    Obstacle(ObstacleArgs),
    /// Sub and super candidates for the homogenized velocity.
    Candidates(CandidatesArgs),
}

#[derive(Subcommand, Debug)]
enum TimescaleCmd {
    /// Evaluate a rescaling and its derivative.
    Eval(TimescaleArgs),
}

#[derive(Subcommand, Debug)]
enum BarrierCmd {
    /// Check the barrier identities and print a residual table.
    Verify(BarrierArgs),
}

#[derive(Subcommand, Debug)]
enum GeometryCmd {
    /// Cone angles, vertex speeds and matching-wave admissibility.
    Report(GeometryArgs),
}

#[derive(Subcommand, Debug)]
enum Sim2dCmd {
    /// Run one simulation.
    Run(SimRunArgs),
    /// Compare runs over several eps.
    Converge(SimConvergeArgs),
}

#[derive(Args, Debug, Default)]
struct Common {
    /// JSON config file with `"version": 1`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long)]
    jobs: Option<usize>,
}

/// Fills every `None` field of `$flags` from `$file`.
macro_rules! overlay {
    ($flags:expr, $file:expr; $($f:ident),* $(,)?) => {
        $( if $flags.$f.is_none() { $flags.$f = $file.$f; } )*
    };
}

#[derive(Args, Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct MediumCheckArgs {
    /// Expression in x1..xn and t.
    #[arg(long)]
    expr: Option<String>,
    /// Spatial dimension of `--expr`.
    #[arg(long)]
    dim: Option<usize>,
    /// Builtin name, `builtin:<name>` or a JSON medium file.
    #[arg(long, conflicts_with = "expr")]
    medium: Option<String>,
    /// Grid points per period axis for the bounds.
    #[arg(long)]
    resolution: Option<usize>,
    /// Random lattice shifts for the periodicity audit.
    #[arg(long)]
    trials: Option<usize>,
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
}

#[derive(Args, Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct CurveArgs {
    #[arg(long)]
    medium: Option<String>,
    #[arg(long)]
    qmin: Option<f64>,
    #[arg(long)]
    qmax: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Integration horizon.
    #[arg(long = "T")]
    #[serde(rename = "T")]
    t_end: Option<f64>,
    /// Also write an SVG plot of the curve.
    #[arg(long)]
    svg: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
}

#[derive(Args, Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct ObstacleArgs {
    #[arg(long)]
    medium: Option<String>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// `sub` or `super`.
    #[arg(long)]
    side: Option<Side>,
    #[arg(long = "T")]
    #[serde(rename = "T")]
    t_end: Option<f64>,
    /// Step size, at most eps/10; defaults to eps/20.
    #[arg(long)]
    dt: Option<f64>,
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
}

#[derive(Args, Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct CandidatesArgs {
    #[arg(long)]
    medium: Option<String>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Comma-separated list.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long = "T")]
    #[serde(rename = "T")]
    t_end: Option<f64>,
    /// Print the full result as JSON.
    #[arg(long)]
    #[serde(default)]
    json: bool,
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Sub,
    Super,
    Theta,
}

#[derive(Args, Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct TimescaleArgs {
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Single evaluation time.
    #[arg(long)]
    t: Option<f64>,
    /// Table mode: evaluate on `samples` points of [0, t_end].
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
}

#[derive(Args, Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct BarrierArgs {
    /// Space dimension.
    #[arg(long)]
    n: Option<usize>,
    /// Lower medium bound for the expanding barrier.
    #[arg(long)]
    m: Option<f64>,
    /// Upper medium bound for the contracting barrier.
    #[arg(long = "M")]
    #[serde(rename = "M")]
    big_m: Option<f64>,
    #[arg(long = "K")]
    #[serde(rename = "K")]
    k: Option<f64>,
    #[arg(long = "A")]
    #[serde(rename = "A")]
    a: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    /// Sample count per check.
    #[arg(long)]
    samples: Option<usize>,
    /// Print the report as JSON instead of a table.
    #[arg(long)]
    #[serde(default)]
    json: bool,
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
}

#[derive(Args, Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct GeometryArgs {
    /// Slope vector, comma-separated, at least two entries.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    q: Option<Vec<f64>>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    m: Option<f64>,
    #[arg(long = "M")]
    #[serde(rename = "M")]
    big_m: Option<f64>,
    /// Medium to take `m`, `M` from when they are not given.
    #[arg(long)]
    medium: Option<String>,
    /// Ray directions to sample.
    #[arg(long)]
    rays: Option<usize>,
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
}

#[derive(Args, Debug, Default)]
struct SimOverrides {
    #[arg(long)]
    medium: Option<String>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long)]
    lx: Option<f64>,
    #[arg(long)]
    psi0: Option<f64>,
    #[arg(long)]
    h0: Option<f64>,
    #[arg(long = "T")]
    t_end: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct SimRunArgs {
    #[command(flatten)]
    sim: SimOverrides,
    #[arg(long)]
    eps: Option<f64>,
    /// Directory for `fronts.csv` and `summary.json`.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct SimConvergeArgs {
    #[command(flatten)]
    sim: SimOverrides,
    /// Comma-separated list, at least three values.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[command(flatten)]
    common: Common,
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit code. Output goes to standard output and standard error.
pub fn dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    dispatch_to(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// [`dispatch`] with explicit output streams.
pub fn dispatch_to<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match run(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn run(cmd: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::Medium(MediumCmd::Check(a)) => medium_check(a, out),
        Command::Rq(RqCmd::Curve(a)) => rq_curve(a, out),
        Command::Rq(RqCmd::Obstacle(a)) => rq_obstacle(a, out),
        Command::Rq(RqCmd::Candidates(a)) => rq_candidates(a, out),
        Command::Timescale(TimescaleCmd::Eval(a)) => timescale_eval(a, out),
        Command::Barrier(BarrierCmd::Verify(a)) => barrier_verify(a, out),
        Command::Geometry(GeometryCmd::Report(a)) => geometry_report(a, out),
        Command::Sim2d(Sim2dCmd::Run(a)) => sim2d_run(a, out),
        Command::Sim2d(Sim2dCmd::Converge(a)) => sim2d_converge(a, out),
    }
}

/// Reads a versioned config object, returning it without the version key.
fn read_config_value(path: &Path) -> Result<serde_json::Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let Value::Object(mut map) = value else {
        return Err(invalid(format!("{}: config must be a JSON object", path.display())));
    };
    match map.remove("version") {
        Some(Value::Number(n)) if n.as_u64() == Some(CONFIG_VERSION) => Ok(map),
        Some(v) => Err(invalid(format!("{}: unsupported config version {v}", path.display()))),
        None => Err(invalid(format!(
            "{}: missing \"version\": {CONFIG_VERSION}",
            path.display()
        ))),
    }
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let map = read_config_value(path)?;
    serde_json::from_value(Value::Object(map)).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn require<T>(v: Option<T>, flag: &str) -> Result<T, CliError> {
    v.ok_or_else(|| invalid(format!("missing required value --{flag}")))
}

fn seed() -> Result<u64, CliError> {
    match std::env::var(SEED_VAR) {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| invalid(format!("{SEED_VAR} must be an unsigned integer, got `{s}`"))),
        Err(_) => Ok(0),
    }
}

fn resolve_medium(reference: Option<&str>) -> Result<Medium, CliError> {
    Ok(MediumSpec::resolve(reference.unwrap_or("builtin:pinning"))?)
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(invalid("--jobs must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Numerical(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

fn emit(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| io_err(p, e)),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| invalid(format!("writing output: {e}"))),
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data serializes");
    s.push('\n');
    s
}

/// Renders a minimal SVG with one polyline through `points`.
pub fn svg_polyline(points: &[(f64, f64)], x_label: &str, y_label: &str) -> String {
    let (w, h, pad) = (640.0, 400.0, 48.0);
    let span = |it: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, lo + 0.5)
        }
    };
    let (x0, x1) = span(&mut points.iter().map(|p| p.0));
    let (y0, y1) = span(&mut points.iter().map(|p| p.1));
    let mut coords = String::new();
    for (i, (x, y)) in points.iter().enumerate() {
        let px = pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
        let py = h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
        if i > 0 {
            coords.push(' ');
        }
        let _ = write!(coords, "{px:.2},{py:.2}");
    }
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{pad} {pad} V{} H{}" fill="none" stroke="black"/>"#,
        h - pad,
        w - pad
    );
    let _ = writeln!(
        s,
        r#"<polyline points="{coords}" fill="none" stroke="steelblue" stroke-width="2"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{x_label} [{x0}, {x1}]</text>"#,
        w / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="12" y="{}" transform="rotate(-90 12 {})" text-anchor="middle">{y_label} [{y0}, {y1}]</text>"#,
        h / 2.0,
        h / 2.0
    );
    s.push_str("</svg>\n");
    s
}

#[derive(Serialize)]
struct MediumCheckOutput<'a> {
    source: &'a str,
    dim: usize,
    time_independent: bool,
    bounds: crate::MediumBounds,
    periodicity: crate::medium::PeriodicityReport,
    seed: u64,
}

fn medium_check(mut a: MediumCheckArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let file: MediumCheckArgs = load_config(a.common.config.as_deref())?;
    overlay!(a, file; expr, dim, medium, resolution, trials);
    let medium = match (&a.expr, &a.medium) {
        (Some(src), _) => Medium::parse(src, a.dim.unwrap_or(1)).map_err(|e| parse_diagnostic(src, e))?,
        (None, Some(r)) => resolve_medium(Some(r))?,
        (None, None) => return Err(invalid("give --expr or --medium")),
    };
    let seed = seed()?;
    let bounds = medium.estimate_bounds(a.resolution.unwrap_or(64))?;
    let periodicity = medium.check_periodicity(a.trials.unwrap_or(1000), seed);
    let report = MediumCheckOutput {
        source: medium.source(),
        dim: medium.dim(),
        time_independent: medium.is_time_independent(),
        bounds,
        periodicity,
        seed,
    };
    emit(a.common.out.as_deref(), &to_json(&report), out)?;
    // expressions built from sin, cos and integer shifts agree to rounding
    let tol = 1e-9 * bounds.big_m.max(1.0);
    if report.periodicity.max_deviation > tol {
        return Err(invalid(format!(
            "medium is not lattice periodic: deviation {} at {:?}",
            report.periodicity.max_deviation, report.periodicity.worst_point
        )));
    }
    Ok(())
}

/// The parse error plus the source with a caret under the offending offset.
fn parse_diagnostic(src: &str, e: MediumError) -> CliError {
    let MediumError::Parse(pe) = &e else {
        return e.into();
    };
    let mut msg = format!("{pe}\n  {src}");
    if let Some(off) = pe.offset() {
        let col = src[..off.min(src.len())].chars().count();
        let _ = write!(msg, "\n  {}^", " ".repeat(col));
    }
    invalid(msg)
}

fn rq_curve(mut a: CurveArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let file: CurveArgs = load_config(a.common.config.as_deref())?;
    overlay!(a, file; medium, qmin, qmax, samples, t_end, svg);
    let medium = resolve_medium(a.medium.as_deref())?;
    let (qmin, qmax) = (require(a.qmin, "qmin")?, require(a.qmax, "qmax")?);
    let samples = a.samples.unwrap_or(20);
    let t_end = a.t_end.unwrap_or(200.0);
    let curve = with_jobs(a.common.jobs, || {
        homog1d::velocity_curve(&medium, qmin, qmax, samples, t_end)
    })??;
    let mut csv = String::from("q [1/length],r_hat [length/time],err [length/time]\n");
    for p in &curve.points {
        let _ = writeln!(csv, "{},{},{}", p.q, p.r_hat, p.error_bound);
    }
    emit(a.common.out.as_deref(), &csv, out)?;
    if let Some(path) = &a.svg {
        let pts: Vec<(f64, f64)> = curve.points.iter().map(|p| (p.q, p.r_hat)).collect();
        std::fs::write(path, svg_polyline(&pts, "q", "r_hat")).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

fn rq_obstacle(mut a: ObstacleArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let file: ObstacleArgs = load_config(a.common.config.as_deref())?;
    overlay!(a, file; medium, q, r, eps, side, t_end, dt);
    let medium = resolve_medium(a.medium.as_deref())?;
    let eps = require(a.eps, "eps")?;
    let (front, flat) = homog1d::obstacle_front(
        &medium,
        require(a.q, "q")?,
        require(a.r, "r")?,
        eps,
        require(a.side, "side")?,
        a.t_end.unwrap_or(1.0),
        a.dt.unwrap_or(eps / 20.0),
    )?;
    let mut csv = String::from("t [time],front [length],phi [length]\n");
    for ((t, x), phi) in front.trace.times.iter().zip(&front.trace.positions).zip(&flat.phi) {
        let _ = writeln!(csv, "{t},{x},{phi}");
    }
    emit(a.common.out.as_deref(), &csv, out)
}

fn rq_candidates(mut a: CandidatesArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let file: CandidatesArgs = load_config(a.common.config.as_deref())?;
    overlay!(a, file; medium, q, beta, eps, t_end);
    a.json |= file.json;
    let medium = resolve_medium(a.medium.as_deref())?;
    let bounds = medium.estimate_bounds(64)?;
    let eps = a.eps.unwrap_or_else(|| vec![0.1, 0.05, 0.02]);
    let c = with_jobs(a.common.jobs, || {
        homog1d::homogenized_candidates(
            &medium,
            &bounds,
            a.q.unwrap_or(0.75),
            a.beta.unwrap_or(homog1d::DEFAULT_BETA),
            &eps,
            a.t_end.unwrap_or(1.0),
        )
    })??;
    let text = if a.json {
        to_json(&c)
    } else {
        format!(
            "r_lower {}\nr_upper {}\ntolerance {}\n",
            c.r_lower, c.r_upper, c.tolerance
        )
    };
    emit(a.common.out.as_deref(), &text, out)
}

enum Rescaling {
    Sub(SubScaling),
    Super(SuperScaling),
    Theta(ThetaShift),
}

impl Rescaling {
    fn at(&self, t: f64) -> Result<(f64, f64), TimescaleError> {
        Ok(match self {
            Rescaling::Sub(s) => (s.eval(t)?, s.derivative(t)?),
            Rescaling::Super(s) => (s.eval(t)?, s.derivative(t)?),
            Rescaling::Theta(s) => (s.eval(t)?, s.derivative(t)?),
        })
    }
}

fn timescale_eval(mut a: TimescaleArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let file: TimescaleArgs = load_config(a.common.config.as_deref())?;
    overlay!(a, file; kind, alpha, gamma, lambda, t, t_end, samples);
    let gamma = require(a.gamma, "gamma")?;
    let lambda = a.lambda.unwrap_or(0.0);
    let f = match require(a.kind, "kind")? {
        Kind::Sub => Rescaling::Sub(SubScaling::new(require(a.alpha, "alpha")?, gamma, lambda)?),
        Kind::Super => Rescaling::Super(SuperScaling::new(require(a.alpha, "alpha")?, gamma, lambda)?),
        Kind::Theta => Rescaling::Theta(ThetaShift::new(gamma, lambda)?),
    };
    let text = match (a.t, a.t_end) {
        (Some(t), None) => {
            let (v, d) = f.at(t)?;
            format!("value {v}\nderivative {d}\n")
        }
        (None, Some(t_end)) => {
            let n = a.samples.unwrap_or(101);
            if n < 2 || !(t_end > 0.0) {
                return Err(invalid("table mode needs --t-end > 0 and --samples >= 2"));
            }
            let mut csv = String::from("t [time],value [time],derivative [1]\n");
            for i in 0..n {
                let t = t_end * i as f64 / (n - 1) as f64;
                let (v, d) = f.at(t)?;
                let _ = writeln!(csv, "{t},{v},{d}");
            }
            csv
        }
        _ => return Err(invalid("give exactly one of --t or --t-end")),
    };
    emit(a.common.out.as_deref(), &text, out)
}

fn check_from(name: &str, margins: impl IntoIterator<Item = f64>) -> BarrierCheck {
    let mut margin = f64::INFINITY;
    let mut points = 0;
    for m in margins {
        points += 1;
        margin = if m.is_nan() { f64::NEG_INFINITY } else { margin.min(m) };
    }
    BarrierCheck {
        name: name.to_string(),
        residual: if points == 0 { 0.0 } else { (-margin).max(0.0) },
        margin,
        points,
        pass: margin >= 0.0,
    }
}

fn barrier_verify(mut a: BarrierArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let file: BarrierArgs = load_config(a.common.config.as_deref())?;
    overlay!(a, file; n, m, big_m, k, a, mu, samples);
    a.json |= file.json;
    let n = a.n.unwrap_or(3);
    let (m, big_m) = (a.m.unwrap_or(1.0), a.big_m.unwrap_or(1.0));
    let (k, amp, mu) = (a.k.unwrap_or(1.0), a.a.unwrap_or(0.5), a.mu.unwrap_or(1.0));
    let samples = a.samples.unwrap_or(100).max(2);
    let grid = |lo: f64, hi: f64| (0..samples).map(move |i| lo + (hi - lo) * (i as f64 + 0.5) / samples as f64);

    let mut checks = Vec::new();
    let exp = barriers::expanding_barrier(n, m, k, amp)?;
    let fbc: Vec<f64> = grid(0.01, 10.0).map(|t| exp.check_fbc(t)).collect::<Result<_, _>>()?;
    checks.push(check_from("expanding_free_boundary", fbc.iter().map(|r| 1e-8 - r)));
    checks.push(check_from(
        "expanding_boundary_value",
        grid(0.01, 10.0).map(|t| {
            let mut x = vec![0.0; n];
            x[0] = amp * exp.radius(t);
            1e-12 * k - (exp.eval(&x, t) - k).abs()
        }),
    ));

    let con = RadialContracting::new(n, big_m, mu, BoundaryData::constant(k))?;
    let t0 = con.t0();
    let times: Vec<f64> = grid(t0, 0.0).collect();
    let mut radii = Vec::with_capacity(times.len());
    let mut residuals = Vec::with_capacity(times.len());
    for &t in &times {
        radii.push(con.radius(t)?);
        residuals.push(con.radius_residual(t)?);
    }
    checks.push(check_from(
        "contracting_radius_equation",
        residuals.iter().map(|r| 1e-10 - r.abs()),
    ));
    checks.push(check_from(
        "contracting_monotone",
        radii.windows(2).map(|w| w[0] - w[1]),
    ));
    // the contracting solution is exact: V = M |D phi| holds with equality on the front
    let field = PerturbedContracting { base: con, kappa: 0.0 };
    let front: Vec<(Vec<f64>, f64)> = times
        .iter()
        .zip(&radii)
        .map(|(&t, &rho)| {
            let mut x = vec![0.0; n];
            x[0] = rho;
            (x, t)
        })
        .collect();
    let grad2 = |x: &[f64], t: f64| field.gradient(x, t).iter().map(|g| g * g).sum::<f64>();
    checks.push(check_from(
        "contracting_front_gradient",
        front.iter().map(|(x, t)| grad2(x, *t).sqrt()),
    ));
    checks.push(check_from(
        "contracting_front_velocity",
        front.iter().map(|(x, t)| {
            let phi_t = field.time_derivative(x, *t);
            1e-8 * phi_t.abs().max(1.0) - (phi_t - big_m * grad2(x, *t)).abs()
        }),
    ));

    checks.push(check_from(
        "thin_cylinder_laplacian",
        (0..samples * 10).map(|i| {
            let u = (i as f64 + 0.5) / (samples * 10) as f64;
            let xn = (2.0 * u - 1.0) * (std::f64::consts::FRAC_PI_2 - 1e-3);
            let r = 3.0 * ((i * 7919) % 1000) as f64 / 1000.0;
            -barriers::thin_cylinder_phi(r, xn, n).1
        }),
    ));
    if n >= 3 {
        let rp = barriers::radial_perturbation(n)?;
        checks.push(check_from(
            "radial_perturbation",
            [rp.min_residual(samples * 10) + 1e-9],
        ));
    }
    let report = BarrierReport { checks };
    let text = if a.json {
        to_json(&report)
    } else {
        let mut t = String::from("check,residual,margin,points,pass\n");
        for c in &report.checks {
            let _ = writeln!(t, "{},{:e},{:e},{},{}", c.name, c.residual, c.margin, c.points, c.pass);
        }
        t
    };
    emit(a.common.out.as_deref(), &text, out)?;
    if report.pass() {
        Ok(())
    } else {
        Err(invalid("barrier checks failed"))
    }
}

#[derive(Serialize)]
struct RayOutput {
    xi: Vec<f64>,
    r_plus: f64,
    mu_plus: f64,
    r_minus: f64,
    mu_minus: f64,
    plus_margin: f64,
    minus_margin: f64,
    admissible: bool,
}

#[derive(Serialize)]
struct GeometryOutput {
    q: Vec<f64>,
    r: f64,
    m: f64,
    #[serde(rename = "M")]
    big_m: f64,
    #[serde(flatten)]
    record: GeometryRecord,
    nu: Vec<f64>,
    v0_plus: Vec<f64>,
    v0_minus: Vec<f64>,
    base_slice_residual: f64,
    rays: Vec<RayOutput>,
}

fn geometry_report(mut a: GeometryArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let file: GeometryArgs = load_config(a.common.config.as_deref())?;
    overlay!(a, file; q, r, m, big_m, medium, rays);
    let q = a.q.unwrap_or_else(|| vec![0.0, -1.0]);
    let (m, big_m) = match (a.m, a.big_m) {
        (Some(m), Some(big_m)) => (m, big_m),
        _ => {
            let b = resolve_medium(a.medium.as_deref())?.estimate_bounds(64)?;
            (a.m.unwrap_or(b.m), a.big_m.unwrap_or(b.big_m))
        }
    };
    let qn = crate::geometry::norm(&q);
    let r = a.r.unwrap_or(0.5 * (m + big_m) * qn);
    let geo = ConeGeometry::new(&q, r, m, big_m)?;
    // the seed selects where the Halton sequence starts
    let skip = (seed()? % 1024) as usize;
    let rays: Vec<Vec<f64>> = geo.sample_rays(a.rays.unwrap_or(16) + skip).split_off(skip);
    let mut ray_out = Vec::with_capacity(rays.len());
    for xi in rays {
        let (plus, minus) = geo.matching_waves(&xi)?;
        let adm = geo.verify_admissibility(&xi)?;
        ray_out.push(RayOutput {
            r_plus: plus.speed,
            mu_plus: plus.mu,
            r_minus: minus.speed,
            mu_minus: minus.mu,
            plus_margin: adm.plus_margin,
            minus_margin: adm.minus_margin,
            admissible: adm.admissible,
            xi,
        });
    }
    let report = GeometryOutput {
        record: geo.record(),
        base_slice_residual: [0.0, 0.5, 1.0]
            .iter()
            .map(|&t| geo.base_slice_residual(t))
            .fold(0.0, f64::max),
        nu: geo.nu.clone(),
        v0_plus: geo.v0_plus.clone(),
        v0_minus: geo.v0_minus.clone(),
        q,
        r,
        m,
        big_m,
        rays: ray_out,
    };
    emit(a.common.out.as_deref(), &to_json(&report), out)?;
    if report.rays.iter().all(|r| r.admissible) {
        Ok(())
    } else {
        Err(invalid("some matching waves are not admissible"))
    }
}

fn file_map(path: Option<&Path>) -> Result<serde_json::Map<String, Value>, CliError> {
    match path {
        Some(p) => read_config_value(p),
        None => Ok(serde_json::Map::new()),
    }
}

/// File values overlaid by flags, then validated as a [`SimConfig`].
fn sim_config(
    mut map: serde_json::Map<String, Value>,
    o: &SimOverrides,
    eps: Option<f64>,
) -> Result<SimConfig, CliError> {
    let mut set = |k: &str, v: Option<Value>| {
        if let Some(v) = v {
            map.insert(k.to_string(), v);
        }
    };
    set("medium", o.medium.clone().map(Value::from));
    set("nx", o.nx.map(Value::from));
    set("ny", o.ny.map(Value::from));
    set("lx", o.lx.map(Value::from));
    set("psi0", o.psi0.map(Value::from));
    set("h0", o.h0.map(Value::from));
    set("T", o.t_end.map(Value::from));
    set("max_steps", o.max_steps.map(Value::from));
    set("eps", eps.map(Value::from));
    let config: SimConfig =
        serde_json::from_value(Value::Object(map)).map_err(|e| invalid(format!("sim2d config: {e}")))?;
    config.validate()?;
    Ok(config)
}

#[derive(Serialize)]
struct RunSummary {
    config: SimConfig,
    steps: usize,
    final_time: f64,
    snapshots: usize,
    mean_speed: f64,
    final_mean_position: f64,
    pressure_min: f64,
    pressure_max: f64,
    bounds: crate::MediumBounds,
}

fn sim2d_run(a: SimRunArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let config = sim_config(file_map(a.config.as_deref())?, &a.sim, a.eps)?;
    let result = hs2d::simulate(&config)?;
    let mut csv = String::from("t [time],y [length],h [length]\n");
    for p in result.space_time_points(config.ly) {
        let _ = writeln!(csv, "{},{},{}", p[0], p[1], p[2]);
    }
    let summary = RunSummary {
        steps: result.steps,
        final_time: result.final_time,
        snapshots: result.history.len(),
        mean_speed: result.mean_speed(),
        final_mean_position: result.final_front().mean(),
        pressure_min: result.pressure_min,
        pressure_max: result.pressure_max,
        bounds: result.bounds,
        config,
    };
    std::fs::create_dir_all(&a.out_dir).map_err(|e| io_err(&a.out_dir, e))?;
    let fronts = a.out_dir.join("fronts.csv");
    let summary_path = a.out_dir.join("summary.json");
    std::fs::write(&fronts, csv).map_err(|e| io_err(&fronts, e))?;
    std::fs::write(&summary_path, to_json(&summary)).map_err(|e| io_err(&summary_path, e))?;
    let _ = writeln!(out, "{}\n{}", fronts.display(), summary_path.display());
    Ok(())
}

fn sim2d_converge(a: SimConvergeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut map = file_map(a.common.config.as_deref())?;
    // `eps` in the file may be a single value (shared with `sim2d run`) or
    // the study's list; the flag replaces either
    let file_eps = map.remove("eps");
    let eps = match (a.eps.clone(), file_eps) {
        (Some(list), _) => list,
        (None, Some(Value::Array(v))) => serde_json::from_value(Value::Array(v))
            .map_err(|e| invalid(format!("eps must be a list of numbers: {e}")))?,
        (None, _) => return Err(invalid("missing required value --eps (a list)")),
    };
    let config = sim_config(map, &a.sim, None)?;
    let report = with_jobs(a.common.jobs, || hs2d::convergence_study(&config, &eps))??;
    emit(a.common.out.as_deref(), &to_json(&report), out)
}
