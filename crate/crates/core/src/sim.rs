//! Fixed-step RK4 simulation of plant + observer, and the metrics computed
//! from the resulting traces.
//!
//! Plant and observer are integrated jointly as one `2n`-dimensional state
//! `[x; x̂]`. The observer only ever sees the output residual
//! `r = y − C x̂`; its cubic correction is `−(rᵀΘr)·N_c·r`.

use serde::{Deserialize, Serialize};

use crate::design::{CubicObserverDesign, LinearObserverDesign};
use crate::error::{Error, Result};
use crate::numlin::{Matrix, Vector};
use crate::sysmodel::{InputSignal, LinearSystem, PerturbedFamily};

pub const DEFAULT_DT: f64 = 1e-3;
/// Absolute error band used for settling times.
pub const DEFAULT_SETTLE_THRESHOLD: f64 = 0.05;
/// Any state component beyond this magnitude counts as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Where `εI` enters when a perturbation is simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationModel {
    /// Plant and the observer's internal model both use `A + εI`, so the
    /// error obeys `ė = (A + εI − L_c C) e + cubic`.
    #[default]
    Matched,
    /// Only the plant is perturbed; the error is additionally forced by `εx`.
    PlantOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Integration step.
    pub dt: f64,
    pub horizon: f64,
    pub x0: Vector,
    /// Observer initial state; zero when `None`.
    pub xhat0: Option<Vector>,
    pub input: InputSignal,
    pub eps: Option<f64>,
    pub perturbation: PerturbationModel,
    /// Keep every k-th integration step in the trace (the final step is
    /// always kept).
    pub record_every: usize,
}

impl SimConfig {
    pub fn new(horizon: f64, x0: Vector, input: InputSignal) -> Self {
        Self {
            dt: DEFAULT_DT,
            horizon,
            x0,
            xhat0: None,
            input,
            eps: None,
            perturbation: PerturbationModel::default(),
            record_every: 1,
        }
    }

    pub fn validate(&self, sys: &LinearSystem) -> Result<()> {
        self.validate_grid()?;
        let n = sys.n();
        if self.x0.len() != n {
            return Err(Error::Dimension(format!(
                "x0 has {} entries, plant has {n} states",
                self.x0.len()
            )));
        }
        if let Some(xh) = &self.xhat0 {
            if xh.len() != n {
                return Err(Error::Dimension(format!(
                    "xhat0 has {} entries, plant has {n} states",
                    xh.len()
                )));
            }
        }
        if self.input.dim() != sys.n_u() {
            return Err(Error::Dimension(format!(
                "input has {} channels, plant has {}",
                self.input.dim(),
                sys.n_u()
            )));
        }
        if let Some(eps) = self.eps {
            if !eps.is_finite() {
                return Err(Error::Contract("eps must be finite".into()));
            }
        }
        Ok(())
    }

    fn validate_grid(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Contract(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= self.dt && self.horizon.is_finite()) {
            return Err(Error::Contract(format!(
                "horizon {} must be at least dt = {}",
                self.horizon, self.dt
            )));
        }
        if self.record_every == 0 {
            return Err(Error::Contract("record_every must be >= 1".into()));
        }
        Ok(())
    }

    fn observer_start(&self, n: usize) -> Vector {
        self.xhat0.clone().unwrap_or_else(|| Vector::zeros(n))
    }
}

/// Time samples and raw state vectors straight from the integrator.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawTrace {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
}

/// Integration stopped at a non-finite or runaway state.
#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    /// Time of the last finite state.
    pub at: f64,
    pub partial: RawTrace,
}

fn runaway(x: &Vector) -> bool {
    x.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT)
}

/// Classical fixed-step fourth-order Runge–Kutta from `t = 0` to
/// `cfg.horizon`. A shortened final step lands exactly on the horizon.
pub fn integrate_rk4<F>(
    mut derivative: F,
    x0: &Vector,
    cfg: &SimConfig,
) -> Result<std::result::Result<RawTrace, Divergence>>
where
    F: FnMut(f64, &Vector) -> Vector,
{
    cfg.validate_grid()?;
    let (dt, horizon) = (cfg.dt, cfg.horizon);
    let ratio = horizon / dt;
    let rounded = ratio.round();
    let (full_steps, tail) = if (rounded * dt - horizon).abs() <= 1e-9 * horizon {
        (rounded as usize, 0.0)
    } else {
        let k = ratio.floor();
        (k as usize, horizon - k * dt)
    };
    let total = full_steps + usize::from(tail > 0.0);

    let mut out = RawTrace::default();
    let capacity = total / cfg.record_every + 2;
    out.times.reserve(capacity);
    out.states.reserve(capacity);
    out.times.push(0.0);
    out.states.push(x0.clone());

    let mut x = x0.clone();
    let mut t = 0.0;
    for step in 1..=total {
        let h = if step <= full_steps { dt } else { tail };
        let k1 = derivative(t, &x);
        let k2 = derivative(t + 0.5 * h, &(&x + &k1 * (0.5 * h)));
        let k3 = derivative(t + 0.5 * h, &(&x + &k2 * (0.5 * h)));
        let k4 = derivative(t + h, &(&x + &k3 * h));
        let next = &x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if runaway(&next) {
            if out.times.last() != Some(&t) {
                out.times.push(t);
                out.states.push(x);
            }
            return Ok(Err(Divergence { at: t, partial: out }));
        }
        x = next;
        t = if step == total {
            horizon
        } else {
            step as f64 * dt
        };
        if step % cfg.record_every == 0 || step == total {
            out.times.push(t);
            out.states.push(x.clone());
        }
    }
    Ok(Ok(out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub times: Vec<f64>,
    pub plant_states: Vec<Vector>,
    pub estimates: Vec<Vector>,
    /// `e = x − x̂`.
    pub errors: Vec<Vector>,
    pub outputs: Vec<Vector>,
    /// Exogenous input `u(t)` (excludes feedback).
    pub inputs: Vec<Vector>,
    /// `V = eᵀPe`.
    pub lyapunov: Option<Vec<f64>>,
    /// `V_CZ = 1 − exp(−eᵀPe)`.
    pub lyapunov_zubov: Option<Vec<f64>>,
    /// Feedback `−K x̂` for closed-loop runs.
    pub control: Option<Vec<Vector>>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.errors.first().map_or(0, Vector::len)
    }

    /// Time series of error component `i`.
    pub fn error_component(&self, i: usize) -> Vec<f64> {
        self.errors.iter().map(|e| e[i]).collect()
    }

    /// Fills `lyapunov` and `lyapunov_zubov` from `p`.
    pub fn attach_lyapunov(&mut self, p: &Matrix) {
        let v: Vec<f64> = self.errors.iter().map(|e| e.dot(&(p * e))).collect();
        self.lyapunov_zubov = Some(v.iter().map(|&v| -(-v).exp_m1()).collect());
        self.lyapunov = Some(v);
    }
}

struct ObserverModel<'a> {
    plant_a: Matrix,
    observer_a: Matrix,
    gain: &'a Matrix,
    cubic: Option<(&'a Matrix, &'a Matrix)>,
    feedback: Option<&'a Matrix>,
}

fn state_matrices(sys: &LinearSystem, cfg: &SimConfig) -> (Matrix, Matrix) {
    match cfg.eps {
        None => (sys.a().clone(), sys.a().clone()),
        Some(eps) => {
            let perturbed = sys.shifted(eps).a().clone();
            match cfg.perturbation {
                PerturbationModel::Matched => (perturbed.clone(), perturbed),
                PerturbationModel::PlantOnly => (perturbed, sys.a().clone()),
            }
        }
    }
}

fn run(sys: &LinearSystem, model: ObserverModel<'_>, cfg: &SimConfig) -> Result<Trace> {
    cfg.validate(sys)?;
    let n = sys.n();
    let (b, c) = (sys.b(), sys.c());
    let mut start = Vector::zeros(2 * n);
    start.rows_mut(0, n).copy_from(&cfg.x0);
    start.rows_mut(n, n).copy_from(&cfg.observer_start(n));

    // an all-zero N_c contributes nothing; skipping it keeps the linear and
    // degenerate paths bit-identical
    let cubic = model
        .cubic
        .filter(|(nc, _)| nc.iter().any(|&v| v != 0.0));

    let derivative = |t: f64, s: &Vector| -> Vector {
        let x = s.rows(0, n);
        let xh = s.rows(n, n);
        let mut u = cfg.input.evaluate(t);
        if let Some(k) = model.feedback {
            u -= k * xh;
        }
        let bu = b * &u;
        let r = c * x - c * xh;
        let mut out = Vector::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&(&model.plant_a * x + &bu));
        let mut obs = &model.observer_a * xh + &bu + model.gain * &r;
        if let Some((nc, theta)) = cubic {
            let weight = r.dot(&(theta * &r));
            obs -= nc * &r * weight;
        }
        out.rows_mut(n, n).copy_from(&obs);
        out
    };

    let (raw, diverged) = match integrate_rk4(derivative, &start, cfg)? {
        Ok(raw) => (raw, None),
        Err(d) => (d.partial, Some(d.at)),
    };

    let mut trace = Trace {
        times: raw.times,
        plant_states: Vec::with_capacity(raw.states.len()),
        estimates: Vec::with_capacity(raw.states.len()),
        errors: Vec::with_capacity(raw.states.len()),
        outputs: Vec::with_capacity(raw.states.len()),
        inputs: Vec::with_capacity(raw.states.len()),
        lyapunov: None,
        lyapunov_zubov: None,
        control: model.feedback.map(|_| Vec::with_capacity(raw.states.len())),
    };
    for (t, s) in trace.times.iter().zip(&raw.states) {
        let x: Vector = s.rows(0, n).into();
        let xh: Vector = s.rows(n, n).into();
        trace.outputs.push(c * &x);
        trace.inputs.push(cfg.input.evaluate(*t));
        if let (Some(k), Some(ctrl)) = (model.feedback, trace.control.as_mut()) {
            ctrl.push(-(k * &xh));
        }
        trace.errors.push(&x - &xh);
        trace.plant_states.push(x);
        trace.estimates.push(xh);
    }
    match diverged {
        None => Ok(trace),
        Some(at) => Err(Error::Diverged {
            at,
            partial: Box::new(trace),
        }),
    }
}

/// Plant plus Luenberger observer `x̂̇ = A x̂ + B u + L (y − C x̂)`.
pub fn simulate_linear_observer(
    sys: &LinearSystem,
    obs: &LinearObserverDesign,
    cfg: &SimConfig,
) -> Result<Trace> {
    obs.error_matrix(sys)?;
    let (plant_a, observer_a) = state_matrices(sys, cfg);
    run(
        sys,
        ObserverModel {
            plant_a,
            observer_a,
            gain: obs.gain_l(),
            cubic: None,
            feedback: None,
        },
        cfg,
    )
}

/// Plant plus cubic observer. The trace carries `V = eᵀPe` and its Zubov
/// form for the design's `P`.
pub fn simulate_cubic_observer(
    sys: &LinearSystem,
    design: &CubicObserverDesign,
    cfg: &SimConfig,
) -> Result<Trace> {
    simulate_cubic(sys, design, None, cfg)
}

fn simulate_cubic(
    sys: &LinearSystem,
    design: &CubicObserverDesign,
    feedback: Option<&Matrix>,
    cfg: &SimConfig,
) -> Result<Trace> {
    let (plant_a, observer_a) = state_matrices(sys, cfg);
    let result = run(
        sys,
        ObserverModel {
            plant_a,
            observer_a,
            gain: design.gain_lc(),
            cubic: Some((design.gain_nc(), design.theta())),
            feedback,
        },
        cfg,
    );
    match result {
        Ok(mut trace) => {
            trace.attach_lyapunov(design.lyapunov_p());
            Ok(trace)
        }
        Err(Error::Diverged { at, mut partial }) => {
            partial.attach_lyapunov(design.lyapunov_p());
            Err(Error::Diverged { at, partial })
        }
        Err(e) => Err(e),
    }
}

/// Plant driven by `u = −K x̂_c` (plus any exogenous input in `cfg`).
pub fn simulate_closed_loop(
    sys: &LinearSystem,
    design: &CubicObserverDesign,
    k: &Matrix,
    cfg: &SimConfig,
) -> Result<Trace> {
    check_feedback(sys, k)?;
    simulate_cubic(sys, design, Some(k), cfg)
}

/// Closed loop with the linear observer `L`; the comparison run for
/// [`simulate_closed_loop`].
pub fn simulate_closed_loop_linear(
    sys: &LinearSystem,
    obs: &LinearObserverDesign,
    k: &Matrix,
    cfg: &SimConfig,
) -> Result<Trace> {
    check_feedback(sys, k)?;
    obs.error_matrix(sys)?;
    let (plant_a, observer_a) = state_matrices(sys, cfg);
    run(
        sys,
        ObserverModel {
            plant_a,
            observer_a,
            gain: obs.gain_l(),
            cubic: None,
            feedback: Some(k),
        },
        cfg,
    )
}

fn check_feedback(sys: &LinearSystem, k: &Matrix) -> Result<()> {
    if k.shape() != (sys.n_u(), sys.n()) {
        return Err(Error::Dimension(format!(
            "K is {}x{}, expected {}x{}",
            k.nrows(),
            k.ncols(),
            sys.n_u(),
            sys.n()
        )));
    }
    Ok(())
}

/// Nominal-designed cubic observer on the family member `A + εI`. How `ε`
/// enters the observer follows `cfg.perturbation`.
pub fn simulate_perturbed(
    family: &PerturbedFamily,
    design: &CubicObserverDesign,
    eps: f64,
    cfg: &SimConfig,
) -> Result<Trace> {
    // perturb() logs when eps leaves the certified range
    let _ = family.perturb(eps);
    let cfg = SimConfig {
        eps: Some(eps),
        ..cfg.clone()
    };
    simulate_cubic_observer(family.nominal(), design, &cfg)
}

/// Linear-observer counterpart of [`simulate_perturbed`].
pub fn simulate_perturbed_linear(
    family: &PerturbedFamily,
    obs: &LinearObserverDesign,
    eps: f64,
    cfg: &SimConfig,
) -> Result<Trace> {
    let _ = family.perturb(eps);
    let cfg = SimConfig {
        eps: Some(eps),
        ..cfg.clone()
    };
    simulate_linear_observer(family.nominal(), obs, &cfg)
}

/// State and control weights of the quadratic regulation cost.
#[derive(Debug, Clone, PartialEq)]
pub struct LqrWeights {
    pub q: Matrix,
    pub r: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    /// `max_t |e_i(t)|`.
    pub peak_error: Vec<f64>,
    /// Largest `|e_i|` once the error has crossed to the opposite sign of
    /// its initial value; zero if it never does.
    pub overshoot: Vec<f64>,
    /// Time from which `|e_i|` stays below the threshold; `None` if it is
    /// still outside at the end of the trace.
    pub settling_time: Vec<Option<f64>>,
    /// `J_i(t_end)`.
    pub j_final: Vec<f64>,
    /// `Σ_i J_i(t_end)`.
    pub j_total: f64,
    pub lqr_cost: Option<f64>,
    #[serde(skip)]
    pub cumulative_squared: Vec<Vec<f64>>,
    #[serde(skip)]
    pub cumulative_total: Vec<f64>,
    #[serde(skip)]
    pub lqr_cost_series: Option<Vec<f64>>,
}

fn trapezoid_cumulative(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut acc = Vec::with_capacity(values.len());
    let mut total = 0.0;
    acc.push(0.0);
    for k in 1..values.len() {
        total += 0.5 * (times[k] - times[k - 1]) * (values[k - 1] + values[k]);
        acc.push(total);
    }
    acc
}

fn settling(times: &[f64], series: &[f64], threshold: f64) -> Option<f64> {
    match series.iter().rposition(|v| v.abs() >= threshold) {
        None => Some(times[0]),
        Some(k) if k + 1 == series.len() => None,
        Some(k) => Some(times[k + 1]),
    }
}

fn overshoot(series: &[f64]) -> f64 {
    let Some(first) = series.iter().copied().find(|&v| v != 0.0) else {
        return 0.0;
    };
    series
        .iter()
        .filter(|&&v| v * first < 0.0)
        .map(|v| v.abs())
        .fold(0.0, f64::max)
}

pub fn compute_metrics(
    trace: &Trace,
    settle_threshold: f64,
    lqr: Option<&LqrWeights>,
) -> Result<Metrics> {
    if trace.is_empty() {
        return Err(Error::Contract("cannot compute metrics of an empty trace".into()));
    }
    let n = trace.state_dim();
    let times = &trace.times;
    let mut peak_error = Vec::with_capacity(n);
    let mut overshoots = Vec::with_capacity(n);
    let mut settling_time = Vec::with_capacity(n);
    let mut cumulative_squared = Vec::with_capacity(n);
    for i in 0..n {
        let e = trace.error_component(i);
        peak_error.push(e.iter().map(|v| v.abs()).fold(0.0, f64::max));
        overshoots.push(overshoot(&e));
        settling_time.push(settling(times, &e, settle_threshold));
        let sq: Vec<f64> = e.iter().map(|v| v * v).collect();
        cumulative_squared.push(trapezoid_cumulative(times, &sq));
    }
    let cumulative_total: Vec<f64> = (0..trace.len())
        .map(|k| cumulative_squared.iter().map(|j| j[k]).sum())
        .collect();
    let j_final: Vec<f64> = cumulative_squared
        .iter()
        .map(|j| *j.last().expect("nonempty"))
        .collect();

    let lqr_cost_series = match lqr {
        None => None,
        Some(w) => {
            let control = trace.control.as_ref().ok_or_else(|| {
                Error::Contract("LQR cost requested for a trace without a control series".into())
            })?;
            let nu = control.first().map_or(0, Vector::len);
            if w.q.shape() != (n, n) || w.r.shape() != (nu, nu) {
                return Err(Error::Dimension(format!(
                    "LQR weights must be {n}x{n} and {nu}x{nu}"
                )));
            }
            let integrand: Vec<f64> = trace
                .plant_states
                .iter()
                .zip(control)
                .map(|(x, u)| x.dot(&(&w.q * x)) + u.dot(&(&w.r * u)))
                .collect();
            Some(trapezoid_cumulative(times, &integrand))
        }
    };

    Ok(Metrics {
        peak_error,
        overshoot: overshoots,
        settling_time,
        j_total: j_final.iter().sum(),
        j_final,
        lqr_cost: lqr_cost_series.as_ref().map(|s| *s.last().expect("nonempty")),
        cumulative_squared,
        cumulative_total,
        lqr_cost_series,
    })
}

/// `V̇` of `V = eᵀPe` along the cubic error dynamics at `e`, together with
/// the linear comparator `−eᵀQe`. Returns `(vdot_cubic, vdot_linear)`.
pub fn lyapunov_derivative_at(
    sys: &LinearSystem,
    design: &CubicObserverDesign,
    e: &Vector,
) -> Result<(f64, f64)> {
    if e.len() != sys.n() {
        return Err(Error::Dimension(format!(
            "error vector has {} entries, expected {}",
            e.len(),
            sys.n()
        )));
    }
    let p = design.lyapunov_p();
    let f = design.error_matrix(sys);
    let linear_part = e.dot(&((f.transpose() * p + p * &f) * e));
    let d = design.damping_matrix(sys);
    let cubic_part = e.dot(&(design.output_weight(sys) * e)) * e.dot(&((&d + d.transpose()) * e));
    Ok((
        linear_part + cubic_part,
        -e.dot(&(design.lyapunov_q() * e)),
    ))
}
