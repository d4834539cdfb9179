//! Output bundles of the three built-in examples. Each function returns
//! `(file name, contents)` pairs; the caller decides where they go.

use serde::Serialize;

use super::commands::{design_report, run_pair, sweep_csv, CliError, Pair};
use super::config::{Built, RunSpec};
use super::fixtures::{EXAMPLE_1_GAMMAS, EXAMPLE_2_EPS, EXAMPLE_2_GAMMAS};
use super::output::{self, cumulative_columns, series_csv};
use crate::design::CubicObserverDesign;
use crate::par::Execution;
use crate::sim::{Metrics, SimConfig};
use crate::sweep::{self, CubicBase, SweepRow};

type Files = Vec<(String, String)>;
type Res<T> = std::result::Result<T, CliError>;

fn fail(e: crate::error::Error) -> CliError {
    CliError {
        code: super::commands::EXIT_DOMAIN,
        message: e.to_string(),
    }
}

#[derive(Serialize)]
struct RunSummary<'a> {
    metrics: &'a Metrics,
    diverged_at: Option<f64>,
}

#[derive(Serialize)]
struct Designs {
    linear: output::DesignReport,
    cubic: output::DesignReport,
}

fn base_and_linear(spec: &RunSpec, built: &Built) -> Res<(Option<CubicBase>, CubicObserverDesign)> {
    let design = built.observer.design();
    let base = spec.observer.cubic_base(&built.system).ok();
    let linear = CubicObserverDesign::degenerate_linear(
        &built.system,
        design.gain_lc().clone(),
        design.lyapunov_q().clone(),
        design.theta().clone(),
    )
    .map_err(fail)?;
    Ok((base, linear))
}

fn common_files(built: &Built, linear: &CubicObserverDesign, pair: &Pair, prefix: &str) -> Res<Files> {
    let mut files = Vec::new();
    if prefix.is_empty() {
        let designs = Designs {
            linear: design_report(built, "linear", linear)?,
            cubic: design_report(built, built.observer.kind(), built.observer.design())?,
        };
        files.push(("design.json".to_string(), output::json(&designs)));
    }
    files.push((
        format!("{prefix}linear_trace.csv"),
        output::trace_csv(&pair.linear),
    ));
    files.push((
        format!("{prefix}cubic_trace.csv"),
        output::trace_csv(&pair.cubic),
    ));
    let mut cols = cumulative_columns("linear_", &pair.linear_metrics);
    cols.extend(cumulative_columns("cubic_", &pair.cubic_metrics));
    files.push((
        format!("{prefix}cumulative_error.csv"),
        series_csv(&pair.linear.times, &cols),
    ));
    Ok(files)
}

fn lyapunov_csv(pair: &Pair) -> String {
    let empty = Vec::new();
    let cols: Vec<(String, &[f64])> = vec![
        ("V_l".into(), pair.linear.lyapunov.as_ref().unwrap_or(&empty)),
        ("V_c".into(), pair.cubic.lyapunov.as_ref().unwrap_or(&empty)),
        ("V_cz_l".into(), pair.linear.lyapunov_zubov.as_ref().unwrap_or(&empty)),
        ("V_cz_c".into(), pair.cubic.lyapunov_zubov.as_ref().unwrap_or(&empty)),
    ];
    series_csv(&pair.linear.times, &cols)
}

fn gamma_label(g: f64) -> String {
    format!("gamma={g}")
}

#[derive(Serialize)]
struct Comparison {
    state: usize,
    peak_definition: &'static str,
    linear_peak: f64,
    cubic_peak: f64,
    linear_settling: Option<f64>,
    cubic_settling: Option<f64>,
    cubic_smaller_peak: bool,
    cubic_faster_settling: bool,
}

fn faster(cubic: Option<f64>, linear: Option<f64>) -> bool {
    match (cubic, linear) {
        (Some(c), Some(l)) => c < l,
        (Some(_), None) => true,
        _ => false,
    }
}

#[derive(Serialize)]
struct ExampleOneReport<'a> {
    example: u8,
    linear: RunSummary<'a>,
    cubic: RunSummary<'a>,
    comparison: Comparison,
    robustness_eps_max: Option<f64>,
    gamma_sweep: &'a [SweepRow],
}

/// Estimation of a double integrator's velocity from its position.
pub fn example_one(spec: &RunSpec, built: &Built, cfg: &SimConfig, exec: Execution) -> Res<Files> {
    let (base, linear) = base_and_linear(spec, built)?;
    let pair = run_pair(built, cfg)?;
    let mut files = common_files(built, &linear, &pair, "")?;
    files.push(("lyapunov.csv".into(), lyapunov_csv(&pair)));

    let base = base.expect("example 1 is synthesized");
    let swept = sweep::sweep_gamma_traces(&built.system, &base, &EXAMPLE_1_GAMMAS, cfg, exec)
        .map_err(fail)?;
    let rows: Vec<SweepRow> = swept.iter().map(|(r, _)| r.clone()).collect();
    files.push(("gamma_sweep.csv".into(), sweep_csv(&rows)));
    let comps: Vec<Vec<f64>> = swept
        .iter()
        .flat_map(|(_, t)| (0..t.state_dim()).map(move |i| t.error_component(i)))
        .collect();
    let names: Vec<String> = swept
        .iter()
        .flat_map(|(r, t)| (1..=t.state_dim()).map(move |i| format!("e{i}[{}]", gamma_label(r.gamma))))
        .collect();
    let cols: Vec<(String, &[f64])> = names
        .into_iter()
        .zip(comps.iter().map(Vec::as_slice))
        .collect();
    files.push((
        "gamma_sweep_errors.csv".into(),
        series_csv(&swept[0].1.times, &cols),
    ));

    let state = 1;
    let (lm, cm) = (&pair.linear_metrics, &pair.cubic_metrics);
    let report = ExampleOneReport {
        example: 1,
        linear: RunSummary {
            metrics: lm,
            diverged_at: pair.linear_diverged_at,
        },
        cubic: RunSummary {
            metrics: cm,
            diverged_at: pair.cubic_diverged_at,
        },
        comparison: Comparison {
            state: state + 1,
            peak_definition: "largest |e| after the error first changes sign",
            linear_peak: lm.overshoot[state],
            cubic_peak: cm.overshoot[state],
            linear_settling: lm.settling_time[state],
            cubic_settling: cm.settling_time[state],
            cubic_smaller_peak: cm.overshoot[state] < lm.overshoot[state],
            cubic_faster_settling: faster(cm.settling_time[state], lm.settling_time[state]),
        },
        robustness_eps_max: crate::design::robustness_bound(built.observer.design()).ok(),
        gamma_sweep: &rows,
    };
    files.push(("report.json".into(), output::json(&report)));
    Ok(files)
}

#[derive(Serialize)]
struct SweepTotal {
    gamma: f64,
    j3: f64,
    j: f64,
}

#[derive(Serialize)]
struct Perturbed {
    eps: f64,
    gamma: Option<f64>,
    linear_j: f64,
    cubic_j: f64,
    cubic_better: bool,
    linear_diverged_at: Option<f64>,
    cubic_diverged_at: Option<f64>,
}

#[derive(Serialize)]
struct ExampleTwoReport<'a> {
    example: u8,
    robustness_eps_max: f64,
    p_max_eig: f64,
    gamma: Option<f64>,
    linear: RunSummary<'a>,
    cubic: RunSummary<'a>,
    gamma_sweep: Vec<SweepTotal>,
    best_swept_gamma: f64,
    perturbed: Perturbed,
}

/// Third-order plant: γ sweep and the `A + εI` robustness runs.
pub fn example_two(spec: &RunSpec, built: &Built, cfg: &SimConfig, exec: Execution) -> Res<Files> {
    let (base, linear) = base_and_linear(spec, built)?;
    let eps = cfg.eps.unwrap_or(EXAMPLE_2_EPS);
    let nominal_cfg = SimConfig {
        eps: None,
        ..cfg.clone()
    };
    let pair = run_pair(built, &nominal_cfg)?;
    let mut files = common_files(built, &linear, &pair, "")?;
    files.push(("lyapunov.csv".into(), lyapunov_csv(&pair)));

    let base = base.expect("example 2 is synthesized");
    let rows = sweep::sweep_gamma(&built.system, &base, &EXAMPLE_2_GAMMAS, &nominal_cfg, exec)
        .map_err(fail)?;
    files.push(("gamma_sweep.csv".into(), sweep_csv(&rows)));
    let mut cols: Vec<(String, &[f64])> = Vec::new();
    for r in &rows {
        let label = gamma_label(r.gamma);
        let last = r.metrics.cumulative_squared.len() - 1;
        cols.push((format!("J3[{label}]"), &r.metrics.cumulative_squared[last]));
        cols.push((format!("J[{label}]"), &r.metrics.cumulative_total));
    }
    files.push((
        "gamma_sweep_cumulative.csv".into(),
        series_csv(&pair.linear.times, &cols),
    ));

    let perturbed_cfg = SimConfig {
        eps: Some(eps),
        ..cfg.clone()
    };
    let perturbed = run_pair(built, &perturbed_cfg)?;
    files.extend(common_files(built, &linear, &perturbed, "perturbed_")?);

    let totals: Vec<SweepTotal> = rows
        .iter()
        .map(|r| SweepTotal {
            gamma: r.gamma,
            j3: *r.metrics.j_final.last().expect("three states"),
            j: r.metrics.j_total,
        })
        .collect();
    let best = totals
        .iter()
        .filter(|t| t.gamma > 0.0)
        .min_by(|a, b| a.j.total_cmp(&b.j))
        .map_or(f64::NAN, |t| t.gamma);
    let design = built.observer.design();
    let report = ExampleTwoReport {
        example: 2,
        robustness_eps_max: crate::design::robustness_bound(design).map_err(fail)?,
        p_max_eig: crate::numlin::symmetric_extremes(design.lyapunov_p())
            .map_err(fail)?
            .1,
        gamma: design.gamma(),
        linear: RunSummary {
            metrics: &pair.linear_metrics,
            diverged_at: pair.linear_diverged_at,
        },
        cubic: RunSummary {
            metrics: &pair.cubic_metrics,
            diverged_at: pair.cubic_diverged_at,
        },
        gamma_sweep: totals,
        best_swept_gamma: best,
        perturbed: Perturbed {
            eps,
            gamma: design.gamma(),
            linear_j: perturbed.linear_metrics.j_total,
            cubic_j: perturbed.cubic_metrics.j_total,
            cubic_better: perturbed.cubic_metrics.j_total < perturbed.linear_metrics.j_total,
            linear_diverged_at: perturbed.linear_diverged_at,
            cubic_diverged_at: perturbed.cubic_diverged_at,
        },
    };
    files.push(("report.json".into(), output::json(&report)));
    Ok(files)
}

#[derive(Serialize)]
struct LoopSummary<'a> {
    metrics: &'a Metrics,
    diverged_at: Option<f64>,
    final_state_norm: f64,
    final_error_norm: f64,
}

#[derive(Serialize)]
struct ExampleThreeReport<'a> {
    example: u8,
    lqr_cost_linear: Option<f64>,
    lqr_cost_cubic: Option<f64>,
    cubic_cost_not_worse: bool,
    feedback_ok: Option<bool>,
    feedback_beta: Option<f64>,
    linear: LoopSummary<'a>,
    cubic: LoopSummary<'a>,
}

fn final_norms(t: &crate::sim::Trace) -> (f64, f64) {
    (
        t.plant_states.last().map_or(f64::NAN, |x| x.norm()),
        t.errors.last().map_or(f64::NAN, |e| e.norm()),
    )
}

/// Observer-based state feedback and its regulation cost.
pub fn example_three(spec: &RunSpec, built: &Built, cfg: &SimConfig) -> Res<Files> {
    let (_, linear) = base_and_linear(spec, built)?;
    let pair = run_pair(built, cfg)?;
    let mut files = common_files(built, &linear, &pair, "")?;
    let empty = Vec::new();
    let cols: Vec<(String, &[f64])> = vec![
        (
            "lqr_cost_linear".into(),
            pair.linear_metrics.lqr_cost_series.as_ref().unwrap_or(&empty),
        ),
        (
            "lqr_cost_cubic".into(),
            pair.cubic_metrics.lqr_cost_series.as_ref().unwrap_or(&empty),
        ),
    ];
    files.push(("lqr_cost.csv".into(), series_csv(&pair.linear.times, &cols)));

    let cert = design_report(built, built.observer.kind(), built.observer.design())?.certificate;
    let (lx, le) = final_norms(&pair.linear);
    let (cx, ce) = final_norms(&pair.cubic);
    let (l_cost, c_cost) = (pair.linear_metrics.lqr_cost, pair.cubic_metrics.lqr_cost);
    let report = ExampleThreeReport {
        example: 3,
        lqr_cost_linear: l_cost,
        lqr_cost_cubic: c_cost,
        cubic_cost_not_worse: matches!((c_cost, l_cost), (Some(c), Some(l)) if c <= l),
        feedback_ok: cert.feedback_ok,
        feedback_beta: cert.feedback_beta,
        linear: LoopSummary {
            metrics: &pair.linear_metrics,
            diverged_at: pair.linear_diverged_at,
            final_state_norm: lx,
            final_error_norm: le,
        },
        cubic: LoopSummary {
            metrics: &pair.cubic_metrics,
            diverged_at: pair.cubic_diverged_at,
            final_state_norm: cx,
            final_error_norm: ce,
        },
    };
    files.push(("report.json".into(), output::json(&report)));
    Ok(files)
}
