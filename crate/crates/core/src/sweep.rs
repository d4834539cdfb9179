//! Parameter sweeps over the cubic gain scale `γ`, one simulation per row.
//! Rows are independent and run through [`crate::par::map`]; the output
//! always follows the order of the requested `γ` values.

use serde::Serialize;

use crate::design::{synthesize_cubic_gain, CubicObserverDesign};
use crate::error::{Error, Result};
use crate::numlin::Matrix;
use crate::par::{self, Execution};
use crate::sim::{self, Metrics, SimConfig, Trace, DEFAULT_SETTLE_THRESHOLD};
use crate::sysmodel::LinearSystem;

/// Everything in a cubic design except `γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicBase {
    pub gain_lc: Matrix,
    pub q: Matrix,
    pub theta: Matrix,
}

impl CubicBase {
    /// Design at `gamma`; `0` gives the degenerate linear design.
    pub fn design(&self, sys: &LinearSystem, gamma: f64) -> Result<CubicObserverDesign> {
        if gamma == 0.0 {
            CubicObserverDesign::degenerate_linear(
                sys,
                self.gain_lc.clone(),
                self.q.clone(),
                self.theta.clone(),
            )
        } else {
            synthesize_cubic_gain(
                sys,
                self.gain_lc.clone(),
                self.q.clone(),
                self.theta.clone(),
                gamma,
            )
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub gamma: f64,
    /// `γ = 0`: the row is the plain linear observer.
    pub linear_degenerate: bool,
    pub metrics: Metrics,
    pub diverged_at: Option<f64>,
}

/// Simulates the cubic observer once per `γ`.
///
/// Negative or non-finite `γ` are rejected up front. A diverging row is
/// reported with `diverged_at` and metrics over its partial trace.
pub fn sweep_gamma(
    sys: &LinearSystem,
    base: &CubicBase,
    gammas: &[f64],
    cfg: &SimConfig,
    exec: Execution,
) -> Result<Vec<SweepRow>> {
    Ok(sweep_gamma_traces(sys, base, gammas, cfg, exec)?
        .into_iter()
        .map(|(row, _)| row)
        .collect())
}

/// [`sweep_gamma`], keeping each row's (possibly partial) trace.
pub fn sweep_gamma_traces(
    sys: &LinearSystem,
    base: &CubicBase,
    gammas: &[f64],
    cfg: &SimConfig,
    exec: Execution,
) -> Result<Vec<(SweepRow, Trace)>> {
    if let Some(g) = gammas.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
        return Err(Error::Contract(format!(
            "gamma values must be finite and >= 0, got {g}"
        )));
    }
    cfg.validate(sys)?;
    let rows = par::map(gammas, exec, |&gamma| -> Result<(SweepRow, Trace)> {
        let design = base.design(sys, gamma)?;
        let (trace, diverged_at) = match sim::simulate_cubic_observer(sys, &design, cfg) {
            Ok(t) => (t, None),
            Err(Error::Diverged { at, partial }) => (*partial, Some(at)),
            Err(e) => return Err(e),
        };
        let row = SweepRow {
            gamma,
            linear_degenerate: gamma == 0.0,
            metrics: sim::compute_metrics(&trace, DEFAULT_SETTLE_THRESHOLD, None)?,
            diverged_at,
        };
        Ok((row, trace))
    });
    rows.into_iter().collect()
}
