use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use chemostat_core::certificates::{check_decay, check_extinction, check_invariance, check_iss, iiss_check};
use chemostat_core::plot::{render_svg, LineStyle, PlotSpec, Series, Table};
use chemostat_core::scenario::Scenario;
use chemostat_core::sweep::{run_sweep, write_summary, SweepSpec};
use chemostat_core::{Certificate, ChemostatError, DisturbanceMode, ModelParams, Trajectory, VerificationReport};
use clap::{Parser, Subcommand, ValueEnum};

/// Chemostat tracking: certificates, simulation and verification.
#[derive(Parser)]
#[command(name = "chemostat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the certificate constants for a parameter pair.
    Certify {
        #[arg(long)]
        m: f64,
        #[arg(long)]
        a: f64,
        /// Disturbance bound; defaults to half of the admissible limit.
        #[arg(long)]
        ubar: Option<f64>,
        #[arg(long, value_enum, default_value = "iss")]
        mode: Mode,
        /// Write the JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario file and write the trajectory CSV.
    Simulate {
        scenario: PathBuf,
        /// Trajectory CSV path (overrides the scenario; `-` for stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Certificate JSON path (overrides the scenario).
        #[arg(long)]
        certificate_out: Option<PathBuf>,
    },
    /// Check a trajectory against a certificate.
    Verify {
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        certificate: PathBuf,
        /// Checks to run; may be repeated.
        #[arg(long = "check", value_enum, required = true)]
        checks: Vec<Check>,
        /// Terminal error threshold of the extinction check.
        #[arg(long, default_value_t = 1e-3)]
        terminal_threshold: f64,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw CSV columns as an SVG line chart.
    Plot {
        /// JSON plot specification; replaces the other flags.
        #[arg(long, conflicts_with_all = ["input", "x", "y", "out"])]
        spec: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        x: Option<String>,
        /// Column to draw, optionally suffixed with `:dashed`; may be repeated.
        #[arg(long)]
        y: Vec<String>,
        #[arg(long)]
        x_label: Option<String>,
        #[arg(long)]
        y_label: Option<String>,
        #[arg(long)]
        title: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a parameter sweep and write the summary CSV.
    Sweep {
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (overrides the spec).
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Iss,
    Iiss,
}

impl From<Mode> for DisturbanceMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Iss => DisturbanceMode::Iss,
            Mode::Iiss => DisturbanceMode::Iiss,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Check {
    Decay,
    Iss,
    Iiss,
    Extinction,
    Invariance,
}

/// Failures that are not the user's fault and that are reported as exit 1.
fn is_runtime_failure(err: &anyhow::Error) -> bool {
    matches!(
        err.downcast_ref::<ChemostatError>(),
        Some(
            ChemostatError::IntegrationFailure { .. }
                | ChemostatError::LeftDomain { .. }
                | ChemostatError::DisturbanceBound { .. }
                | ChemostatError::ExtinctionWarning { .. }
        )
    )
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) if p.as_os_str() != "-" => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        _ => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn certify(m: f64, a: f64, ubar: Option<f64>, mode: Mode, out: Option<PathBuf>) -> Result<()> {
    let params = ModelParams::new(m, a)?;
    let cert = Certificate::new(params, ubar, mode.into())?;
    write_output(out.as_deref(), &(cert.to_json() + "\n"))
}

fn simulate(path: PathBuf, out: Option<PathBuf>, certificate_out: Option<PathBuf>) -> Result<()> {
    let scenario = Scenario::from_json(&read(&path)?).with_context(|| format!("loading {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
    let run = scenario.run()?;
    let traj_path = out.or_else(|| scenario.outputs.trajectory.as_ref().map(resolve));
    write_output(traj_path.as_deref(), &run.trajectory.to_csv_string())?;
    if let Some(p) = certificate_out.or_else(|| scenario.outputs.certificate.as_ref().map(resolve)) {
        write_output(Some(&p), &(run.certificate.to_json() + "\n"))?;
    }
    if run.trajectory.meta.positivity_retries > 0 {
        eprintln!(
            "warning: {} steps were split by the positivity guard",
            run.trajectory.meta.positivity_retries
        );
    }
    Ok(())
}

fn verify(
    trajectory: PathBuf,
    certificate: PathBuf,
    checks: Vec<Check>,
    terminal_threshold: f64,
    out: Option<PathBuf>,
) -> Result<bool> {
    let traj = Trajectory::read_csv(fs::File::open(&trajectory).with_context(|| format!("opening {}", trajectory.display()))?)
        .with_context(|| format!("reading {}", trajectory.display()))?;
    let cert = Certificate::from_json(&read(&certificate)?).with_context(|| format!("reading {}", certificate.display()))?;
    let mut reports: Vec<VerificationReport> = Vec::new();
    for check in checks {
        let report = match check {
            Check::Decay => check_decay(&traj, &cert)?,
            Check::Iss => check_iss(&traj, &cert.iss_envelope())?,
            Check::Iiss => iiss_check(&traj, &cert)?,
            Check::Invariance => check_invariance(&traj),
            Check::Extinction => {
                let mc = cert
                    .multi
                    .as_ref()
                    .ok_or_else(|| anyhow!("certificate has no multi-species block"))?;
                check_extinction(&traj, mc, terminal_threshold)?
            }
        };
        reports.push(report);
    }
    let pass = reports.iter().all(|r| r.pass);
    let text = if reports.len() == 1 {
        serde_json::to_string_pretty(&reports[0])?
    } else {
        serde_json::to_string_pretty(&reports)?
    };
    write_output(out.as_deref(), &(text + "\n"))?;
    Ok(pass)
}

fn parse_series(arg: &str) -> Result<Series> {
    let (column, style) = match arg.rsplit_once(':') {
        Some((c, "dashed")) => (c, LineStyle::Dashed),
        Some((c, "solid")) => (c, LineStyle::Solid),
        Some((_, other)) => bail!("unknown line style '{other}' (use solid or dashed)"),
        None => (arg, LineStyle::Solid),
    };
    Ok(Series {
        column: column.into(),
        style,
    })
}

#[allow(clippy::too_many_arguments)]
fn plot(
    spec: Option<PathBuf>,
    input: Option<PathBuf>,
    x: Option<String>,
    y: Vec<String>,
    x_label: Option<String>,
    y_label: Option<String>,
    title: Option<String>,
    out: Option<PathBuf>,
) -> Result<()> {
    let spec = match spec {
        Some(path) => {
            let mut spec: PlotSpec =
                serde_json::from_str(&read(&path)?).with_context(|| format!("parsing {}", path.display()))?;
            let base = path.parent().unwrap_or(Path::new("."));
            for p in [&mut spec.input, &mut spec.output] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
            spec
        }
        None => PlotSpec {
            input: input.ok_or_else(|| anyhow!("--input is required without --spec"))?,
            x: x.unwrap_or_else(|| "t".into()),
            y: y.iter().map(|s| parse_series(s)).collect::<Result<_>>()?,
            x_label,
            y_label,
            title,
            output: out.ok_or_else(|| anyhow!("--out is required without --spec"))?,
        },
    };
    let table = Table::read(fs::File::open(&spec.input).with_context(|| format!("opening {}", spec.input.display()))?)?;
    let svg = render_svg(
        &table,
        &spec.x,
        &spec.y,
        spec.x_label.as_deref(),
        spec.y_label.as_deref(),
        spec.title.as_deref(),
    )?;
    write_output(Some(&spec.output), &svg)
}

fn sweep(path: PathBuf, out: Option<PathBuf>, workers: Option<usize>) -> Result<bool> {
    let mut spec: SweepSpec =
        serde_json::from_str(&read(&path)?).with_context(|| format!("parsing {}", path.display()))?;
    if workers.is_some() {
        spec.workers = workers;
    }
    let rows = run_sweep(&spec)?;
    for r in rows.iter().filter(|r| r.status != "ok") {
        eprintln!("warning: m={} a={} seed={}: {} ({})", r.m, r.a, r.seed, r.status, r.message);
    }
    let mut buf = Vec::new();
    write_summary(&rows, &mut buf)?;
    write_output(out.as_deref(), &String::from_utf8(buf)?)?;
    Ok(true)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Certify { m, a, ubar, mode, out } => certify(m, a, ubar, mode, out).map(|_| true),
        Command::Simulate {
            scenario,
            out,
            certificate_out,
        } => simulate(scenario, out, certificate_out).map(|_| true),
        Command::Verify {
            trajectory,
            certificate,
            checks,
            terminal_threshold,
            out,
        } => verify(trajectory, certificate, checks, terminal_threshold, out),
        Command::Plot {
            spec,
            input,
            x,
            y,
            x_label,
            y_label,
            title,
            out,
        } => plot(spec, input, x, y, x_label, y_label, title, out).map(|_| true),
        Command::Sweep { spec, out, workers } => sweep(spec, out, workers),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            if is_runtime_failure(&err) {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
