//! `flipmesh` command-line tool.
//!
//! Exit codes: 0 success, 1 check failed, 2 usage error, 3 runtime error.

use std::fs::File;
use std::io::{self, LineWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};

use flipmesh::analysis::{self, ConformanceReport};
use flipmesh::flip::{self, FlipConfig, FlipMode, FlipOrder, FlipStatus};
use flipmesh::io::{self as mio, MeshFormat};
use flipmesh::predicates::TAU;
use flipmesh::surface::{self, GenSpec, SurfaceError, SurfaceModel};
use flipmesh::TriangleMesh;

#[derive(Parser, Debug)]
#[command(
    name = "flipmesh",
    version,
    about = "Edge flips toward Gabriel surface triangulations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a dense triangulation of a sphere or torus.
    Generate(GenerateArgs),
    /// Flip edges until no flippable edge remains.
    Flip(FlipArgs),
    /// Check the Gabriel (or alpha-Gabriel) property by brute force.
    Check(CheckArgs),
    /// Report density and normal bounds against a reference surface.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LogFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FileFormat {
    Off,
    Obj,
}

impl From<FileFormat> for MeshFormat {
    fn from(f: FileFormat) -> Self {
        match f {
            FileFormat::Off => MeshFormat::Off,
            FileFormat::Obj => MeshFormat::Obj,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Full,
    Conservative,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OrderArg {
    /// Largest incident circumradius first.
    Largest,
    Fifo,
}

#[derive(clap::Args, Debug)]
struct GenerateArgs {
    /// `sphere:R` or `torus:R,r` (requires R > 2r).
    #[arg(long)]
    surface: String,
    #[arg(long)]
    epsilon: f64,
    /// Uniformity floor, or `auto` for 2 sin(24 epsilon). Zero on a torus
    /// grades the grid 2:1.
    #[arg(long, default_value = "0")]
    delta: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random anti-Delaunay flips applied after generation.
    #[arg(long, default_value_t = 0)]
    perturb: usize,
    /// Mesh to circumradius epsilon * reach / headroom.
    #[arg(long, default_value_t = 1.0)]
    headroom: f64,
    #[arg(long, default_value_t = 0.15)]
    jitter: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    format: Option<FileFormat>,
    /// Where to write the density report (default: standard output).
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    log: LogFormat,
}

#[derive(clap::Args, Debug)]
struct FlipArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Lens half-width for conservative mode.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    max_flips: Option<u64>,
    #[arg(long, value_enum, default_value = "on")]
    monitor: OnOff,
    #[arg(long, value_enum, default_value = "largest")]
    order: OrderArg,
    #[arg(long, default_value_t = TAU)]
    tolerance: f64,
    #[arg(long, value_enum)]
    format: Option<FileFormat>,
    #[arg(long, value_enum, default_value = "text")]
    log: LogFormat,
    /// Stream flip records here instead of standard output.
    #[arg(long)]
    log_file: Option<PathBuf>,
    /// Write the final summary here (atomically) instead of standard output.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct CheckArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Shrink each diametric ball by min(alpha, rho) before testing.
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, default_value_t = TAU)]
    tolerance: f64,
    #[arg(long, value_enum, default_value = "text")]
    log: LogFormat,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    surface: String,
    /// Reach override.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, value_enum, default_value = "text")]
    log: LogFormat,
    #[arg(long)]
    report: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    CheckFailed,
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Generate(a) => generate(a),
        Command::Flip(a) => flip_cmd(a),
        Command::Check(a) => check(a),
        Command::Report(a) => report(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::CheckFailed) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("FLIPMESH_THREADS") else {
        return Ok(());
    };
    let n: usize = value.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        usage(format!(
            "FLIPMESH_THREADS must be a positive integer, got {value:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Runtime(anyhow!(e)))
}

fn parse_surface(spec: &str) -> Result<SurfaceModel, Failure> {
    let bad = || {
        usage(format!(
            "--surface must be sphere:R or torus:R,r, got {spec:?}"
        ))
    };
    let (kind, params) = spec.split_once(':').ok_or_else(bad)?;
    let nums: Vec<f64> = params
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let surf = match (kind, nums.as_slice()) {
        ("sphere", &[r]) => SurfaceModel::sphere(r),
        ("torus", &[big, small]) => SurfaceModel::torus(big, small),
        _ => return Err(bad()),
    };
    surf.map_err(|e| usage(e.to_string()))
}

/// Resolves `--delta`, where `auto` means 2 sin(24 epsilon).
fn parse_delta(delta: &str, epsilon: f64) -> Result<f64, Failure> {
    let value = if delta == "auto" {
        2.0 * (24.0 * epsilon).sin()
    } else {
        delta
            .parse()
            .map_err(|_| usage(format!("--delta must be a number or auto, got {delta:?}")))?
    };
    if !(0.0..1.0).contains(&value) {
        return Err(usage(format!(
            "--delta resolves to {value}, outside [0, 1){}",
            if delta == "auto" {
                "; auto needs 2 sin(24 epsilon) < 1"
            } else {
                ""
            }
        )));
    }
    Ok(value)
}

fn output_format(explicit: Option<FileFormat>, path: &Path) -> Result<MeshFormat, Failure> {
    match explicit {
        Some(f) => Ok(f.into()),
        None => MeshFormat::from_path(path).ok_or_else(|| {
            usage(format!(
                "cannot infer the format of {}; pass --format",
                path.display()
            ))
        }),
    }
}

fn check_positive(name: &str, v: f64) -> Result<(), Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("{name} must be positive, got {v}")))
    }
}

fn check_non_negative(name: &str, v: f64) -> Result<(), Failure> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("{name} must be non-negative, got {v}")))
    }
}

fn load(path: &Path) -> Result<TriangleMesh, Failure> {
    let file = mio::read_mesh(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(file
        .into_mesh()
        .with_context(|| format!("building mesh from {}", path.display()))?)
}

/// Writes a report to `path` atomically, or to standard output.
fn emit(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => mio::write_atomic(p, text.as_bytes())
            .with_context(|| format!("writing {}", p.display()))?,
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())
                .context("writing to standard output")?;
            out.flush().context("writing to standard output")?;
        }
    }
    Ok(())
}

fn generate(a: GenerateArgs) -> Result<(), Failure> {
    let surf = parse_surface(&a.surface)?;
    check_positive("--epsilon", a.epsilon)?;
    let delta = parse_delta(&a.delta, a.epsilon)?;
    let format = output_format(a.format, &a.out)?;
    let spec = GenSpec {
        epsilon: a.epsilon,
        delta,
        seed: a.seed,
        perturb_flips: a.perturb,
        headroom: a.headroom,
        jitter: a.jitter,
    };
    spec.validate().map_err(|e| usage(e.to_string()))?;

    let generated = match surface::generate(&surf, &spec) {
        Err(e @ SurfaceError::UnachievableSpec(_)) => return Err(usage(e.to_string())),
        r => r.context("generating mesh")?,
    };
    mio::write_mesh(&generated.mesh, &a.out, format)
        .with_context(|| format!("writing {}", a.out.display()))?;
    let density =
        analysis::density_report(&generated.mesh, &surf, None).context("measuring mesh")?;
    let text = match a.log {
        LogFormat::Json => {
            let value = serde_json::json!({
                "surface": surf,
                "spec": spec,
                "density": density,
                "perturbation": generated.perturbation,
            });
            format!(
                "{}\n",
                serde_json::to_string_pretty(&value).expect("serializable")
            )
        }
        LogFormat::Text => {
            let mut t = format!(
                "surface {}\nseed {}\ntarget_epsilon {}\ntarget_delta {}\nperturbation_flips {}\n",
                a.surface,
                a.seed,
                a.epsilon,
                delta,
                generated.perturbation.len()
            );
            t.push_str(&mio::density_text(&density));
            t
        }
    };
    emit(a.report.as_deref(), &text)
}

fn partial_path(out: &Path) -> PathBuf {
    let mut name = out
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".partial");
    out.with_file_name(name)
}

fn flip_cmd(a: FlipArgs) -> Result<(), Failure> {
    let mode = match (a.mode, a.beta) {
        (Some(ModeArg::Full), Some(_)) => return Err(usage("--beta requires --mode conservative")),
        (Some(ModeArg::Full), None) | (None, None) => FlipMode::Full,
        (Some(ModeArg::Conservative), None) => {
            return Err(usage("--mode conservative requires --beta"))
        }
        (_, Some(beta)) => {
            check_non_negative("--beta", beta)?;
            FlipMode::Conservative { beta }
        }
    };
    if a.max_flips == Some(0) {
        return Err(usage("--max-flips must be positive"));
    }
    check_non_negative("--tolerance", a.tolerance)?;
    let format = output_format(a.format, &a.out)?;
    let cfg = FlipConfig {
        mode,
        order: match a.order {
            OrderArg::Largest => FlipOrder::LargestRadiusFirst,
            OrderArg::Fifo => FlipOrder::Fifo,
        },
        max_flips: a.max_flips,
        monitor_lexicographic: matches!(a.monitor, OnOff::On),
        tolerance: a.tolerance,
        ..FlipConfig::default()
    };

    let mut mesh = load(&a.input)?;
    let mut sink: Box<dyn Write> = match &a.log_file {
        Some(p) => Box::new(LineWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(LineWriter::new(io::stdout())),
    };
    let mut write_err: Option<io::Error> = None;
    let mut index = 0u64;
    let log = flip::mesh_flip_with(&mut mesh, &cfg, |rec| {
        if write_err.is_some() {
            return;
        }
        let line = match a.log {
            LogFormat::Text => mio::flip_record_text(index, rec),
            LogFormat::Json => mio::flip_record_json(index, rec),
        };
        index += 1;
        if let Err(e) = writeln!(sink, "{line}") {
            write_err = Some(e);
        }
    })
    .map_err(|e| usage(e.to_string()))?;
    if let Some(e) = write_err {
        return Err(Failure::Runtime(anyhow!(e).context("writing flip log")));
    }
    sink.flush().context("writing flip log")?;
    drop(sink);

    let target = if log.status == FlipStatus::Converged {
        a.out.clone()
    } else {
        partial_path(&a.out)
    };
    mio::write_mesh(&mesh, &target, format)
        .with_context(|| format!("writing {}", target.display()))?;

    let summary = match a.log {
        LogFormat::Json => {
            let value = serde_json::json!({
                "status": log.status,
                "mode": log.mode,
                "order": log.order,
                "flips": log.flips,
                "guard_rejections": log.guard_rejections,
                "max_dihedral": log.max_dihedral,
                "monitor_events": log.monitor_events,
                "radius_checked": log.radius_checked,
                "radius_increases": log.radius_increases,
                "rescans": log.rescans,
                "rescan_misses": log.rescan_misses,
                "initial_max_radius": log.initial_max_radius,
                "final_max_radius": log.final_max_radius,
                "output": target,
            });
            format!(
                "{}\n",
                serde_json::to_string_pretty(&value).expect("serializable")
            )
        }
        LogFormat::Text => format!(
            "{}output {}\n",
            mio::flip_summary_text(&log),
            target.display()
        ),
    };
    emit(a.summary.as_deref(), &summary)?;

    match log.status {
        FlipStatus::Converged => Ok(()),
        FlipStatus::CapReached => Err(Failure::Runtime(anyhow!(
            "flip budget exhausted after {} flips; partial mesh written to {}",
            log.flips,
            target.display()
        ))),
        FlipStatus::GuardStalled => Err(Failure::Runtime(anyhow!(
            "every remaining flippable edge was refused by a flip guard; partial mesh written to {}",
            target.display()
        ))),
        FlipStatus::MonitorViolation => Err(Failure::Runtime(anyhow!(
            "radius sequence failed to decrease at flip {}; partial mesh written to {}",
            log.monitor_events.first().map_or(0, |e| e.flip),
            target.display()
        ))),
    }
}

fn conformance_output(r: &ConformanceReport, format: LogFormat) -> String {
    match format {
        LogFormat::Json => format!("{}\n", mio::to_json(r)),
        LogFormat::Text => mio::conformance_text(r),
    }
}

fn check(a: CheckArgs) -> Result<(), Failure> {
    check_non_negative("--alpha", a.alpha)?;
    check_non_negative("--tolerance", a.tolerance)?;
    let mesh = load(&a.input)?;
    let report = if a.alpha == 0.0 {
        analysis::gabriel_check(&mesh, a.tolerance)
    } else {
        analysis::alpha_gabriel_check(&mesh, a.alpha, a.tolerance)
    };
    emit(a.report.as_deref(), &conformance_output(&report, a.log))?;
    if report.pass {
        Ok(())
    } else {
        Err(Failure::CheckFailed)
    }
}

fn report(a: ReportArgs) -> Result<(), Failure> {
    let surf = parse_surface(&a.surface)?;
    if let Some(g) = a.gamma {
        check_positive("--gamma", g)?;
    }
    let mesh = load(&a.input)?;
    let density = analysis::density_report(&mesh, &surf, a.gamma).context("measuring mesh")?;
    let audit = analysis::normal_bound_audit(&mesh, &surf, a.gamma).context("auditing normals")?;
    let text = match a.log {
        LogFormat::Json => {
            let value = serde_json::json!({ "density": density, "normal_bounds": audit });
            format!(
                "{}\n",
                serde_json::to_string_pretty(&value).expect("serializable")
            )
        }
        LogFormat::Text => format!("{}{}", mio::density_text(&density), mio::audit_text(&audit)),
    };
    emit(a.report.as_deref(), &text)
}
