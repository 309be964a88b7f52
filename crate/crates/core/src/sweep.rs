//! Parameter sweeps: a grid over `(m, a, ubar fraction)` crossed with seeds,
//! each point simulated and checked, summarized one row per `(point, seed)`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificates::{check_decay, check_invariance, ubar_limit, Certificate};
use crate::disturbance::DisturbanceMode;
use crate::error::{ChemostatError, Result};
use crate::integrator::IntegratorConfig;
use crate::model::{ModelParams, State};
use crate::scenario::{DisturbanceConfig, SignalConfig};
use crate::simulate::simulate_single;

/// Fractions at or above 1 are pulled this far below the admissible limit,
/// which is itself excluded.
pub const LIMIT_BACKOFF: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub m: Vec<f64>,
    pub a: Vec<f64>,
    /// `ubar` as a fraction of the admissible limit of `mode`.
    pub ubar_fraction: Vec<f64>,
    pub seeds: Vec<u64>,
    pub initial: State,
    #[serde(default = "default_mode")]
    pub mode: DisturbanceMode,
    /// Disturbance signal; `seed` of a random signal is replaced by each
    /// sweep seed. Defaults to a random signal.
    #[serde(default)]
    pub signal: Option<SignalConfig>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_mode() -> DisturbanceMode {
    DisturbanceMode::Iss
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub m: f64,
    pub a: f64,
    pub ubar_fraction: f64,
    pub seed: u64,
    pub status: String,
    pub message: String,
    pub d_o: Option<f64>,
    pub d_bar: Option<f64>,
    pub c: Option<f64>,
    pub kappa: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
    pub c4: Option<f64>,
    pub c5: Option<f64>,
    pub ubar: Option<f64>,
    pub ubar_max: Option<f64>,
    pub terminal_error: Option<f64>,
    pub worst_decay_margin: Option<f64>,
    pub decay_pass: Option<bool>,
    pub invariance_pass: Option<bool>,
    pub case_1b: Option<usize>,
    pub case_2b: Option<usize>,
    pub positivity_retries: Option<usize>,
}

impl SweepRow {
    fn blank(m: f64, a: f64, ubar_fraction: f64, seed: u64, status: &str, message: String) -> Self {
        Self {
            m,
            a,
            ubar_fraction,
            seed,
            status: status.into(),
            message,
            d_o: None,
            d_bar: None,
            c: None,
            kappa: None,
            c1: None,
            c2: None,
            c3: None,
            c4: None,
            c5: None,
            ubar: None,
            ubar_max: None,
            terminal_error: None,
            worst_decay_margin: None,
            decay_pass: None,
            invariance_pass: None,
            case_1b: None,
            case_2b: None,
            positivity_retries: None,
        }
    }
}

/// `ubar` for a fraction of the admissible limit.
pub fn ubar_for_fraction(params: &ModelParams, mode: DisturbanceMode, fraction: f64) -> f64 {
    let limit = ubar_limit(params, mode);
    if fraction >= 1.0 {
        limit * (1.0 - LIMIT_BACKOFF)
    } else {
        fraction * limit
    }
}

struct Point {
    m: f64,
    a: f64,
    fraction: f64,
    prepared: std::result::Result<(ModelParams, Certificate), String>,
}

fn prepare(spec: &SweepSpec, m: f64, a: f64, fraction: f64) -> std::result::Result<(ModelParams, Certificate), String> {
    let params = ModelParams::new(m, a).map_err(|e| e.to_string())?;
    if !(fraction > 0.0) {
        return Err(format!("ubar fraction must be positive, got {fraction}"));
    }
    let ubar = ubar_for_fraction(&params, spec.mode, fraction);
    let cert = Certificate::new(params, Some(ubar), spec.mode).map_err(|e| e.to_string())?;
    Ok((params, cert))
}

fn run_seed(spec: &SweepSpec, point: &Point, seed: u64) -> SweepRow {
    let (params, cert) = match &point.prepared {
        Ok(p) => p,
        Err(msg) => return SweepRow::blank(point.m, point.a, point.fraction, seed, "skipped", msg.clone()),
    };
    let signal = match spec.signal.unwrap_or(SignalConfig::Random { seed, interval: None }) {
        SignalConfig::Random { interval, .. } => SignalConfig::Random { seed, interval },
        other => other,
    };
    let config = DisturbanceConfig {
        signal,
        ubar: cert.ubar,
        mode: spec.mode,
    };
    let mut row = SweepRow::blank(point.m, point.a, point.fraction, seed, "ok", String::new());
    row.d_o = Some(cert.d_o);
    row.d_bar = Some(cert.d_bar);
    row.c = Some(cert.c);
    row.kappa = Some(cert.kappa);
    row.c1 = Some(cert.c1);
    row.c2 = Some(cert.c2);
    row.c3 = Some(cert.c3);
    row.c4 = Some(cert.c4);
    row.c5 = Some(cert.c5);
    row.ubar = Some(cert.ubar);
    row.ubar_max = Some(cert.ubar_max);
    let outcome = config
        .build(params, &spec.integrator)
        .and_then(|u| simulate_single(*params, &u, cert, spec.initial, &spec.integrator))
        .and_then(|traj| {
            let decay = check_decay(&traj, cert)?;
            Ok((traj, decay))
        });
    match outcome {
        Ok((traj, decay)) => {
            let last = traj.last().expect("non-empty trajectory");
            row.terminal_error = Some((last.s - last.s_ref).hypot(last.x - last.x_ref));
            row.worst_decay_margin = Some(decay.worst_margin);
            row.decay_pass = Some(decay.pass);
            row.case_1b = decay.case_1b;
            row.case_2b = decay.case_2b;
            row.invariance_pass = Some(check_invariance(&traj).pass);
            row.positivity_retries = Some(traj.meta.positivity_retries);
        }
        Err(e) => {
            row.status = "failed".into();
            row.message = e.to_string();
        }
    }
    row
}

fn sweep_rows(spec: &SweepSpec) -> Vec<SweepRow> {
    let grid: Vec<(f64, f64, f64)> = spec
        .m
        .iter()
        .flat_map(|&m| {
            spec.a
                .iter()
                .flat_map(move |&a| spec.ubar_fraction.iter().map(move |&f| (m, a, f)))
        })
        .collect();
    let points: Vec<Point> = grid
        .par_iter()
        .map(|&(m, a, fraction)| Point {
            m,
            a,
            fraction,
            prepared: prepare(spec, m, a, fraction),
        })
        .collect();
    let jobs: Vec<(&Point, u64)> = points
        .iter()
        .flat_map(|p| spec.seeds.iter().map(move |&s| (p, s)))
        .collect();
    jobs.par_iter().map(|&(p, seed)| run_seed(spec, p, seed)).collect()
}

/// Runs the sweep on a pool of `spec.workers` threads (all cores if unset).
/// Rows come back in grid order regardless of scheduling.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.integrator.validate()?;
    if spec.seeds.is_empty() {
        return Err(ChemostatError::InvalidConfig("sweep needs at least one seed".into()));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = spec.workers {
        if n == 0 {
            return Err(ChemostatError::InvalidConfig("workers must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| ChemostatError::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| sweep_rows(spec)))
}

/// Writes the summary; numbers use the same 17-digit format as trajectories.
pub fn write_summary<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let header = [
        "m", "a", "ubar_fraction", "seed", "status", "message", "d_o", "d_bar", "c", "kappa", "c1", "c2", "c3",
        "c4", "c5", "ubar", "ubar_max", "terminal_error", "worst_decay_margin", "decay_pass", "invariance_pass",
        "case_1b", "case_2b", "positivity_retries",
    ];
    w.write_record(header).map_err(|e| ChemostatError::Parse(e.to_string()))?;
    let num = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.16e}"));
    let int = |v: Option<usize>| v.map_or(String::new(), |v| v.to_string());
    let flag = |v: Option<bool>| v.map_or(String::new(), |v| v.to_string());
    for r in rows {
        let record = [
            format!("{:.16e}", r.m),
            format!("{:.16e}", r.a),
            format!("{:.16e}", r.ubar_fraction),
            r.seed.to_string(),
            r.status.clone(),
            r.message.clone(),
            num(r.d_o),
            num(r.d_bar),
            num(r.c),
            num(r.kappa),
            num(r.c1),
            num(r.c2),
            num(r.c3),
            num(r.c4),
            num(r.c5),
            num(r.ubar),
            num(r.ubar_max),
            num(r.terminal_error),
            num(r.worst_decay_margin),
            flag(r.decay_pass),
            flag(r.invariance_pass),
            int(r.case_1b),
            int(r.case_2b),
            int(r.positivity_retries),
        ];
        w.write_record(&record).map_err(|e| ChemostatError::Parse(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
