//! CSV and JSON serialization of traces, designs and metrics.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::design::{Certificate, CubicObserverDesign};
use crate::error::Result;
use crate::numlin::{self, Matrix};
use crate::sim::{Metrics, Trace};

/// 17 significant digits: round-trips every `f64`.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

pub fn trace_header(trace: &Trace) -> Vec<String> {
    let n = trace.state_dim();
    let ny = trace.outputs.first().map_or(0, |v| v.len());
    let nu = trace.inputs.first().map_or(0, |v| v.len());
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=n).map(|i| format!("x{i}")));
    cols.extend((1..=n).map(|i| format!("xhat{i}")));
    cols.extend((1..=n).map(|i| format!("e{i}")));
    cols.extend((1..=ny).map(|i| format!("y{i}")));
    cols.extend((1..=nu).map(|i| format!("u{i}")));
    if trace.lyapunov.is_some() {
        cols.push("V".into());
        cols.push("V_cz".into());
    }
    if let Some(c) = &trace.control {
        let nc = c.first().map_or(0, |v| v.len());
        cols.extend((1..=nc).map(|i| format!("uc{i}")));
    }
    cols
}

/// Row `k` of a trace in header order.
pub fn trace_row(trace: &Trace, k: usize) -> Vec<f64> {
    let mut row = vec![trace.times[k]];
    for series in [
        &trace.plant_states,
        &trace.estimates,
        &trace.errors,
        &trace.outputs,
        &trace.inputs,
    ] {
        row.extend(series[k].iter());
    }
    if let (Some(v), Some(z)) = (&trace.lyapunov, &trace.lyapunov_zubov) {
        row.push(v[k]);
        row.push(z[k]);
    }
    if let Some(c) = &trace.control {
        row.extend(c[k].iter());
    }
    row
}

pub fn trace_csv(trace: &Trace) -> String {
    let mut s = String::with_capacity(trace.len() * 24 * 16);
    s.push_str(&trace_header(trace).join(","));
    s.push('\n');
    for k in 0..trace.len() {
        let row: Vec<String> = trace_row(trace, k).into_iter().map(num).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

#[derive(Serialize)]
struct TraceDoc {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

/// `{"columns": [...], "rows": [[...], ...]}` with the CSV column order.
pub fn trace_json(trace: &Trace) -> String {
    json(&TraceDoc {
        columns: trace_header(trace),
        rows: (0..trace.len()).map(|k| trace_row(trace, k)).collect(),
    })
}

/// Column table with a shared time axis.
pub fn series_csv(times: &[f64], columns: &[(String, &[f64])]) -> String {
    let mut s = String::new();
    s.push('t');
    for (name, _) in columns {
        s.push(',');
        s.push_str(name);
    }
    s.push('\n');
    for (k, &t) in times.iter().enumerate() {
        s.push_str(&num(t));
        for (_, col) in columns {
            let _ = write!(s, ",{}", num(col[k]));
        }
        s.push('\n');
    }
    s
}

/// `J_1..J_n, J` columns of a trace's metrics, prefixed with `label`.
pub fn cumulative_columns<'a>(label: &str, m: &'a Metrics) -> Vec<(String, &'a [f64])> {
    let mut cols: Vec<(String, &[f64])> = m
        .cumulative_squared
        .iter()
        .enumerate()
        .map(|(i, c)| (format!("{label}J{}", i + 1), c.as_slice()))
        .collect();
    cols.push((format!("{label}J"), m.cumulative_total.as_slice()));
    cols
}

#[derive(Debug, Clone, Serialize)]
pub struct DesignView {
    pub observer: &'static str,
    pub gain_lc: Vec<Vec<f64>>,
    pub gain_nc: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
    pub gamma: Option<f64>,
    pub p: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub p_max_eig: f64,
}

impl DesignView {
    pub fn new(kind: &'static str, d: &CubicObserverDesign) -> Self {
        let p_max = numlin::symmetric_extremes(d.lyapunov_p()).map_or(f64::NAN, |(_, hi)| hi);
        DesignView {
            observer: kind,
            gain_lc: numlin::to_rows(d.gain_lc()),
            gain_nc: numlin::to_rows(d.gain_nc()),
            theta: numlin::to_rows(d.theta()),
            gamma: d.gamma(),
            p: numlin::to_rows(d.lyapunov_p()),
            q: numlin::to_rows(d.lyapunov_q()),
            p_max_eig: p_max,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DesignReport {
    pub design: DesignView,
    pub certificate: Certificate,
    pub passed: bool,
    pub failures: Vec<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equilibrium_search: Option<crate::design::EquilibriumSearch>,
}

pub fn matrix_rows(m: &Matrix) -> Vec<Vec<f64>> {
    numlin::to_rows(m)
}

/// Pretty JSON with a trailing newline.
pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(contents.as_bytes())?;
    f.flush()?;
    Ok(())
}
