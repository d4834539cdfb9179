//! Subcommand bodies. Each returns the process exit code, or a [`CliError`]
//! carrying the code and a diagnostic for stderr.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{Artifact, Built, BuiltObserver, RunSpec};
use super::fixtures;
use super::output::{self, DesignReport, DesignView};
use crate::design::{
    certify_stability, feedback_certificate, search_nonzero_equilibria, Certificate,
    CubicObserverDesign, LinearObserverDesign, DEFAULT_SEARCH_SEED,
};
use crate::error::Error;
use crate::par::Execution;
use crate::sim::{
    self, compute_metrics, Metrics, SimConfig, Trace, DEFAULT_SETTLE_THRESHOLD,
};
use crate::sweep::{self, SweepRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Used when neither `--out` nor `CUBIC_OBS_OUT_DIR` is given.
pub const DEFAULT_OUT_DIR: &str = "cubic-obs-out";
pub const OUT_DIR_ENV: &str = "CUBIC_OBS_OUT_DIR";
pub const EQUILIBRIUM_STARTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

pub type CliResult = std::result::Result<i32, CliError>;

fn usage(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn domain(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_DOMAIN,
        message: message.into(),
    }
}

/// Errors raised while turning a config into domain objects. A violated
/// design premise is a domain failure; everything else is bad input.
fn build_error(e: Error) -> CliError {
    match e {
        Error::Design(msg) => domain(format!(
            "hurwitz condition violated: (A - L_c C)^T P + P (A - L_c C) < 0 has no solution P > 0 ({msg})"
        )),
        Error::Io(_) | Error::Numerical(_) | Error::Diverged { .. } => domain(e.to_string()),
        other => usage(other.to_string()),
    }
}

fn run_error(e: Error) -> CliError {
    match e {
        Error::Config(_) => usage(e.to_string()),
        other => domain(other.to_string()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    Json,
    #[default]
    Csv,
}

/// Flags shared by the subcommands; each uses the ones that apply.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub out: Option<PathBuf>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub eps: Option<f64>,
    pub gammas: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub format: Option<Format>,
    /// Value of `CUBIC_OBS_OUT_DIR`, read once by the binary.
    pub env_out_dir: Option<PathBuf>,
    pub exec: Execution,
}

impl Options {
    fn out_dir(&self) -> PathBuf {
        self.env_out_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    fn apply(&self, cfg: &mut SimConfig) {
        if let Some(dt) = self.dt {
            cfg.dt = dt;
        }
        if let Some(h) = self.horizon {
            cfg.horizon = h;
        }
        if let Some(eps) = self.eps {
            cfg.eps = Some(eps);
        }
    }
}

fn load(path: &Path) -> std::result::Result<(RunSpec, Built), CliError> {
    let spec = RunSpec::from_path(path).map_err(|e| usage(e.to_string()))?;
    let built = spec.build().map_err(build_error)?;
    Ok((spec, built))
}

fn sim_config(
    spec: &RunSpec,
    built: &Built,
    opts: &Options,
) -> std::result::Result<SimConfig, CliError> {
    let mut cfg = match spec.sim_config(&built.system) {
        Ok(cfg) => cfg,
        // overrides may repair a grid the file alone gets wrong
        Err(e) if opts.dt.is_some() || opts.horizon.is_some() => {
            let sim = spec.sim.as_ref().ok_or_else(|| usage(e.to_string()))?;
            let mut sim = sim.clone();
            sim.dt = opts.dt.or(sim.dt);
            sim.horizon = opts.horizon.unwrap_or(sim.horizon);
            sim.build(&built.system).map_err(|e| usage(e.to_string()))?
        }
        Err(e) => return Err(usage(e.to_string())),
    };
    opts.apply(&mut cfg);
    cfg.validate(&built.system)
        .map_err(|e| usage(format!("sim: {e}")))?;
    Ok(cfg)
}

fn write(path: &Path, contents: &str) -> std::result::Result<(), CliError> {
    output::write_file(path, contents).map_err(|e| domain(format!("{}: {e}", path.display())))
}

fn emit(
    out: Option<&Path>,
    stdout: &mut dyn Write,
    contents: &str,
) -> std::result::Result<(), CliError> {
    match out {
        Some(path) => write(path, contents),
        None => stdout
            .write_all(contents.as_bytes())
            .map_err(|e| domain(format!("stdout: {e}"))),
    }
}

fn certificate_for(built: &Built) -> std::result::Result<Certificate, CliError> {
    let design = built.observer.design();
    match &built.feedback {
        Some(k) => feedback_certificate(&built.system, design, k),
        None => certify_stability(&built.system, design),
    }
    .map_err(run_error)
}

fn margins_line(cert: &Certificate) -> String {
    cert.margins
        .iter()
        .map(|(k, v)| format!("{k}={}", output::num(*v)))
        .collect::<Vec<_>>()
        .join(" ")
}

/// `design`: emits the design and its certificate as JSON.
pub fn cmd_design(config: &Path, opts: &Options, stdout: &mut dyn Write) -> CliResult {
    if opts.format == Some(Format::Csv) {
        return Err(usage("design output is JSON only"));
    }
    let (_, built) = load(config)?;
    let cert = certificate_for(&built)?;
    let search = search_nonzero_equilibria(
        &built.system,
        built.observer.design(),
        EQUILIBRIUM_STARTS,
        opts.seed.unwrap_or(DEFAULT_SEARCH_SEED),
        opts.exec,
    );
    let mut failures = cert.failures();
    if !search.nonzero_roots.is_empty() {
        failures.push("equilibrium search found a nonzero equilibrium of the error dynamics");
    }
    let report = DesignReport {
        design: DesignView::new(built.observer.kind(), built.observer.design()),
        passed: failures.is_empty(),
        failures: failures.clone(),
        certificate: cert.clone(),
        equilibrium_search: Some(search),
    };
    emit(opts.out.as_deref(), stdout, &output::json(&report))?;
    if failures.is_empty() {
        Ok(EXIT_OK)
    } else {
        Err(domain(format!(
            "certificate failed: {}\nmargins: {}",
            failures.join("; "),
            margins_line(&cert)
        )))
    }
}

/// Result of one simulation, divergence included.
struct Run {
    trace: Trace,
    diverged_at: Option<f64>,
}

fn settle(result: crate::error::Result<Trace>) -> std::result::Result<Run, CliError> {
    match result {
        Ok(trace) => Ok(Run {
            trace,
            diverged_at: None,
        }),
        Err(Error::Diverged { at, partial }) => Ok(Run {
            trace: *partial,
            diverged_at: Some(at),
        }),
        Err(e) => Err(run_error(e)),
    }
}

fn simulate_linear(
    built: &Built,
    obs: &LinearObserverDesign,
    certified_as: &CubicObserverDesign,
    cfg: &SimConfig,
) -> std::result::Result<Run, CliError> {
    let sys = &built.system;
    let mut run = settle(match &built.feedback {
        Some(k) => sim::simulate_closed_loop_linear(sys, obs, k, cfg),
        None => sim::simulate_linear_observer(sys, obs, cfg),
    })?;
    run.trace.attach_lyapunov(certified_as.lyapunov_p());
    Ok(run)
}

fn simulate_cubic(
    built: &Built,
    design: &CubicObserverDesign,
    cfg: &SimConfig,
) -> std::result::Result<Run, CliError> {
    let sys = &built.system;
    settle(match &built.feedback {
        Some(k) => sim::simulate_closed_loop(sys, design, k, cfg),
        None => sim::simulate_cubic_observer(sys, design, cfg),
    })
}

/// Primary run plus, for cubic observers, the linear run with `L = L_c`.
fn simulate_pair(
    built: &Built,
    cfg: &SimConfig,
) -> std::result::Result<(Run, Option<Run>), CliError> {
    match &built.observer {
        BuiltObserver::Linear {
            observer,
            certified_as,
        } => Ok((simulate_linear(built, observer, certified_as, cfg)?, None)),
        BuiltObserver::Cubic(design) => {
            let linear = design.as_linear();
            let certified_as = CubicObserverDesign::degenerate_linear(
                &built.system,
                design.gain_lc().clone(),
                design.lyapunov_q().clone(),
                design.theta().clone(),
            )
            .map_err(run_error)?;
            let primary = simulate_cubic(built, design, cfg)?;
            let baseline = simulate_linear(built, &linear, &certified_as, cfg)?;
            Ok((primary, Some(baseline)))
        }
    }
}

fn metrics(built: &Built, trace: &Trace) -> std::result::Result<Metrics, CliError> {
    let lqr = built.lqr.as_ref().filter(|_| trace.control.is_some());
    compute_metrics(trace, DEFAULT_SETTLE_THRESHOLD, lqr).map_err(run_error)
}

#[derive(Debug, Serialize)]
struct SimulateReport {
    observer: &'static str,
    dt: f64,
    horizon: f64,
    eps: Option<f64>,
    metrics: Metrics,
    diverged_at: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    linear_baseline: Option<BaselineReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate: Option<Certificate>,
}

#[derive(Debug, Serialize)]
struct BaselineReport {
    metrics: Metrics,
    diverged_at: Option<f64>,
}

fn trace_document(trace: &Trace, format: Format) -> String {
    match format {
        Format::Csv => output::trace_csv(trace),
        Format::Json => output::trace_json(trace),
    }
}

/// `simulate`: writes the trace file and prints metrics JSON.
pub fn cmd_simulate(config: &Path, opts: &Options, stdout: &mut dyn Write) -> CliResult {
    let (spec, built) = load(config)?;
    if built.lqr.is_some() && built.feedback.is_none() {
        return Err(usage("`lqr` weights need a `feedback` gain"));
    }
    let cfg = sim_config(&spec, &built, opts)?;
    let (mut primary, baseline) = simulate_pair(&built, &cfg)?;
    if !spec.wants(Artifact::Lyapunov) {
        primary.trace.lyapunov = None;
        primary.trace.lyapunov_zubov = None;
    }

    let format = opts.format.unwrap_or_default();
    if spec.wants(Artifact::Trace) {
        let path = opts.out.clone().unwrap_or_else(|| {
            opts.out_dir().join(match format {
                Format::Csv => "trace.csv",
                Format::Json => "trace.json",
            })
        });
        write(&path, &trace_document(&primary.trace, format))?;
    }

    let certificate = if spec.wants(Artifact::Certificate) {
        Some(certificate_for(&built)?)
    } else {
        None
    };
    let report = SimulateReport {
        observer: built.observer.kind(),
        dt: cfg.dt,
        horizon: cfg.horizon,
        eps: cfg.eps,
        metrics: metrics(&built, &primary.trace)?,
        diverged_at: primary.diverged_at,
        linear_baseline: baseline
            .map(|b| -> std::result::Result<BaselineReport, CliError> {
                Ok(BaselineReport {
                    metrics: metrics(&built, &b.trace)?,
                    diverged_at: b.diverged_at,
                })
            })
            .transpose()?,
        certificate,
    };
    if spec.wants(Artifact::Metrics) {
        emit(None, stdout, &output::json(&report))?;
    }
    match primary.diverged_at {
        Some(at) => Err(domain(format!(
            "simulation diverged after t = {at}; partial trace written"
        ))),
        None => Ok(EXIT_OK),
    }
}

fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(String::new, output::num)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let n = rows.first().map_or(0, |r| r.metrics.peak_error.len());
    let mut cols = vec![
        "gamma".to_string(),
        "linear_degenerate".into(),
        "diverged_at".into(),
    ];
    for prefix in ["peak", "overshoot", "settling", "J"] {
        cols.extend((1..=n).map(|i| format!("{prefix}{i}")));
    }
    cols.push("J".into());
    let mut s = cols.join(",");
    s.push('\n');
    for r in rows {
        let m = &r.metrics;
        let mut row = vec![
            output::num(r.gamma),
            r.linear_degenerate.to_string(),
            opt_num(r.diverged_at),
        ];
        row.extend(m.peak_error.iter().map(|&v| output::num(v)));
        row.extend(m.overshoot.iter().map(|&v| output::num(v)));
        row.extend(m.settling_time.iter().map(|&v| opt_num(v)));
        row.extend(m.j_final.iter().map(|&v| output::num(v)));
        row.push(output::num(m.j_total));
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// `sweep-gamma`: one metrics row per `γ`, in the order given.
pub fn cmd_sweep_gamma(config: &Path, opts: &Options, stdout: &mut dyn Write) -> CliResult {
    let (spec, built) = load(config)?;
    let base = spec
        .observer
        .cubic_base(&built.system)
        .map_err(|e| usage(e.to_string()))?;
    let gammas = opts
        .gammas
        .clone()
        .unwrap_or_else(|| vec![spec.observer.gamma().unwrap_or(0.0)]);
    if gammas.is_empty() {
        return Err(usage("--gammas needs at least one value"));
    }
    if let Some(g) = gammas.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
        return Err(usage(format!("gamma values must be >= 0, got {g}")));
    }
    if built.feedback.is_some() {
        log::warn!("sweep-gamma ignores the feedback gain; rows are open-loop observer runs");
    }
    let cfg = sim_config(&spec, &built, opts)?;
    let rows = sweep::sweep_gamma(&built.system, &base, &gammas, &cfg, opts.exec)
        .map_err(run_error)?;
    let text = match opts.format.unwrap_or_default() {
        Format::Csv => sweep_csv(&rows),
        Format::Json => output::json(&rows),
    };
    emit(opts.out.as_deref(), stdout, &text)?;
    Ok(EXIT_OK)
}

/// `example N`: writes the full bundle for one of the built-in examples.
pub fn cmd_example(n: u8, opts: &Options, stdout: &mut dyn Write) -> CliResult {
    let text = fixtures::config(n).ok_or_else(|| usage(format!("no example {n}; use 1, 2 or 3")))?;
    let spec = RunSpec::from_json(text).map_err(|e| usage(e.to_string()))?;
    let built = spec.build().map_err(build_error)?;
    let cfg = sim_config(&spec, &built, opts)?;
    let dir = opts
        .out
        .clone()
        .unwrap_or_else(|| opts.out_dir().join(format!("example-{n}")));
    let files = match n {
        1 => super::examples::example_one(&spec, &built, &cfg, opts.exec)?,
        2 => super::examples::example_two(&spec, &built, &cfg, opts.exec)?,
        _ => super::examples::example_three(&spec, &built, &cfg)?,
    };
    let mut names = Vec::with_capacity(files.len());
    for (name, contents) in &files {
        write(&dir.join(name), contents)?;
        names.push(name.clone());
    }
    emit(None, stdout, &output::json(&serde_json::json!({
        "example": n,
        "dir": dir.display().to_string(),
        "files": names,
    })))?;
    Ok(EXIT_OK)
}

pub(super) struct Pair {
    pub linear: Trace,
    pub cubic: Trace,
    pub linear_metrics: Metrics,
    pub cubic_metrics: Metrics,
    pub linear_diverged_at: Option<f64>,
    pub cubic_diverged_at: Option<f64>,
}

pub(super) fn run_pair(built: &Built, cfg: &SimConfig) -> std::result::Result<Pair, CliError> {
    let (cubic, linear) = simulate_pair(built, cfg)?;
    let linear = linear.ok_or_else(|| usage("example fixtures use cubic observers"))?;
    Ok(Pair {
        linear_metrics: metrics(built, &linear.trace)?,
        cubic_metrics: metrics(built, &cubic.trace)?,
        linear_diverged_at: linear.diverged_at,
        cubic_diverged_at: cubic.diverged_at,
        linear: linear.trace,
        cubic: cubic.trace,
    })
}

pub(super) fn design_report(
    built: &Built,
    kind: &'static str,
    design: &CubicObserverDesign,
) -> std::result::Result<DesignReport, CliError> {
    let cert = match &built.feedback {
        Some(k) => feedback_certificate(&built.system, design, k),
        None => certify_stability(&built.system, design),
    }
    .map_err(run_error)?;
    Ok(DesignReport {
        design: DesignView::new(kind, design),
        passed: cert.passed(),
        failures: cert.failures(),
        certificate: cert,
        equilibrium_search: None,
    })
}
