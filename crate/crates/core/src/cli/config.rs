//! JSON run configuration and its conversion into domain objects.

use std::path::Path;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::design::{
    self, place_poles_single_output, synthesize_cubic_gain, CubicObserverDesign,
    LinearObserverDesign,
};
use crate::error::{Error, Result};
use crate::numlin::{self, Matrix, Vector};
use crate::sim::{LqrWeights, PerturbationModel, SimConfig, DEFAULT_DT};
use crate::sysmodel::{InputSignal, LinearSystem, SignalKind};

pub const DEFAULT_GAMMA: f64 = 1.0;

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub a: Rows,
    pub b: Rows,
    pub c: Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObserverSpec {
    Linear {
        #[serde(default)]
        poles: Option<Vec<[f64; 2]>>,
        #[serde(default)]
        gain_l: Option<Rows>,
        #[serde(default)]
        q: Option<Rows>,
        #[serde(default)]
        theta: Option<Rows>,
    },
    Cubic {
        #[serde(default)]
        poles: Option<Vec<[f64; 2]>>,
        #[serde(default)]
        gain_lc: Option<Rows>,
        #[serde(default)]
        q: Option<Rows>,
        #[serde(default)]
        theta: Option<Rows>,
        #[serde(default)]
        gamma: Option<f64>,
    },
    CubicExplicit {
        gain_lc: Rows,
        gain_nc: Rows,
        #[serde(default)]
        theta: Option<Rows>,
        #[serde(default)]
        q: Option<Rows>,
        #[serde(default)]
        semidefinite_ok: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    #[serde(default)]
    pub dt: Option<f64>,
    pub horizon: f64,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub xhat0: Option<Vec<f64>>,
    #[serde(default)]
    pub input: Option<SignalKind>,
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub perturbation: PerturbationModel,
    #[serde(default)]
    pub record_every: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackSpec {
    pub k: Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqrSpec {
    pub q: Rows,
    pub r: Rows,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Artifact {
    Trace,
    Metrics,
    Certificate,
    Lyapunov,
}

fn all_artifacts() -> Vec<Artifact> {
    vec![
        Artifact::Trace,
        Artifact::Metrics,
        Artifact::Certificate,
        Artifact::Lyapunov,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub system: SystemSpec,
    pub observer: ObserverSpec,
    #[serde(default)]
    pub sim: Option<SimSpec>,
    #[serde(default)]
    pub feedback: Option<FeedbackSpec>,
    #[serde(default)]
    pub lqr: Option<LqrSpec>,
    #[serde(default = "all_artifacts")]
    pub outputs: Vec<Artifact>,
}

impl RunSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn wants(&self, artifact: Artifact) -> bool {
        self.outputs.contains(&artifact)
    }
}

fn field<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Design(msg) => Error::Design(msg),
        other => Error::Config(format!("field `{name}`: {other}")),
    })
}

fn matrix(name: &str, rows: &Rows) -> Result<Matrix> {
    field(name, numlin::from_rows(rows))
}

fn vector(name: &str, v: &[f64]) -> Result<Vector> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config(format!("field `{name}`: entries must be finite")));
    }
    Ok(Vector::from_column_slice(v))
}

fn poles(list: &[[f64; 2]]) -> Vec<Complex<f64>> {
    list.iter().map(|&[re, im]| Complex::new(re, im)).collect()
}

/// The observer a config resolves to.
#[derive(Debug, Clone)]
pub enum BuiltObserver {
    /// Linear observer, with its degenerate cubic form for certification.
    Linear {
        observer: LinearObserverDesign,
        certified_as: CubicObserverDesign,
    },
    Cubic(CubicObserverDesign),
}

impl BuiltObserver {
    /// The design used for certificates and Lyapunov traces.
    pub fn design(&self) -> &CubicObserverDesign {
        match self {
            BuiltObserver::Linear { certified_as, .. } => certified_as,
            BuiltObserver::Cubic(d) => d,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            BuiltObserver::Linear { .. } => "linear",
            BuiltObserver::Cubic(d) => match d.origin() {
                design::GainOrigin::Explicit { .. } => "cubic_explicit",
                _ => "cubic",
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct Built {
    pub system: LinearSystem,
    pub observer: BuiltObserver,
    pub feedback: Option<Matrix>,
    pub lqr: Option<LqrWeights>,
}

impl SystemSpec {
    pub fn build(&self) -> Result<LinearSystem> {
        let a = matrix("system.a", &self.a)?;
        let b = matrix("system.b", &self.b)?;
        let c = matrix("system.c", &self.c)?;
        field("system", LinearSystem::new(a, b, c))
    }
}

fn resolve_gain(
    sys: &LinearSystem,
    name: &str,
    pole_list: &Option<Vec<[f64; 2]>>,
    gain: &Option<Rows>,
) -> Result<Matrix> {
    match (pole_list, gain) {
        (Some(p), None) => Ok(field(
            "observer.poles",
            place_poles_single_output(sys, &poles(p)),
        )?
        .gain_l()
        .clone()),
        (None, Some(g)) => matrix(&format!("observer.{name}"), g),
        _ => Err(Error::Config(format!(
            "observer needs exactly one of `poles` or `{name}`"
        ))),
    }
}

fn weight_or_identity(name: &str, rows: &Option<Rows>, dim: usize) -> Result<Matrix> {
    rows.as_ref()
        .map_or_else(|| Ok(Matrix::identity(dim, dim)), |r| matrix(name, r))
}

impl ObserverSpec {
    /// `γ` this spec asks for, with the default applied.
    pub fn gamma(&self) -> Option<f64> {
        match self {
            ObserverSpec::Cubic { gamma, .. } => Some(gamma.unwrap_or(DEFAULT_GAMMA)),
            _ => None,
        }
    }

    /// `(L_c, Q, Θ)` for synthesizable observers.
    pub fn cubic_base(&self, sys: &LinearSystem) -> Result<crate::sweep::CubicBase> {
        let (pole_list, gain, name, q, theta) = match self {
            ObserverSpec::Linear {
                poles,
                gain_l,
                q,
                theta,
            } => (poles, gain_l, "gain_l", q, theta),
            ObserverSpec::Cubic {
                poles,
                gain_lc,
                q,
                theta,
                ..
            } => (poles, gain_lc, "gain_lc", q, theta),
            ObserverSpec::CubicExplicit { .. } => {
                return Err(Error::Config(
                    "an explicit N_c cannot be re-synthesized for other gamma values".into(),
                ))
            }
        };
        Ok(crate::sweep::CubicBase {
            gain_lc: resolve_gain(sys, name, pole_list, gain)?,
            q: weight_or_identity("observer.q", q, sys.n())?,
            theta: weight_or_identity("observer.theta", theta, sys.n_y())?,
        })
    }

    pub fn build(&self, sys: &LinearSystem) -> Result<BuiltObserver> {
        match self {
            ObserverSpec::Linear { .. } => {
                let base = self.cubic_base(sys)?;
                let certified_as = field(
                    "observer",
                    CubicObserverDesign::degenerate_linear(
                        sys,
                        base.gain_lc.clone(),
                        base.q,
                        base.theta,
                    ),
                )?;
                Ok(BuiltObserver::Linear {
                    observer: LinearObserverDesign::new(base.gain_lc),
                    certified_as,
                })
            }
            ObserverSpec::Cubic { .. } => {
                let base = self.cubic_base(sys)?;
                let gamma = self.gamma().expect("cubic spec");
                Ok(BuiltObserver::Cubic(field(
                    "observer",
                    synthesize_cubic_gain(sys, base.gain_lc, base.q, base.theta, gamma),
                )?))
            }
            ObserverSpec::CubicExplicit {
                gain_lc,
                gain_nc,
                theta,
                q,
                semidefinite_ok,
            } => Ok(BuiltObserver::Cubic(field(
                "observer",
                CubicObserverDesign::explicit(
                    sys,
                    matrix("observer.gain_lc", gain_lc)?,
                    matrix("observer.gain_nc", gain_nc)?,
                    weight_or_identity("observer.theta", theta, sys.n_y())?,
                    weight_or_identity("observer.q", q, sys.n())?,
                    *semidefinite_ok,
                ),
            )?)),
        }
    }
}

impl SimSpec {
    pub fn build(&self, sys: &LinearSystem) -> Result<SimConfig> {
        let input = match &self.input {
            None => InputSignal::zero(sys.n_u()),
            Some(kind) => field("sim.input", InputSignal::new(kind.clone(), sys.n_u()))?,
        };
        let mut cfg = SimConfig::new(self.horizon, vector("sim.x0", &self.x0)?, input);
        cfg.dt = self.dt.unwrap_or(DEFAULT_DT);
        cfg.xhat0 = self
            .xhat0
            .as_ref()
            .map(|v| vector("sim.xhat0", v))
            .transpose()?;
        cfg.eps = self.eps;
        cfg.perturbation = self.perturbation;
        cfg.record_every = self.record_every.unwrap_or(1);
        field("sim", cfg.validate(sys))?;
        Ok(cfg)
    }
}

impl RunSpec {
    pub fn build(&self) -> Result<Built> {
        let system = self.system.build()?;
        let observer = self.observer.build(&system)?;
        let feedback = self
            .feedback
            .as_ref()
            .map(|f| matrix("feedback.k", &f.k))
            .transpose()?;
        if let Some(k) = &feedback {
            if k.shape() != (system.n_u(), system.n()) {
                return Err(Error::Config(format!(
                    "field `feedback.k`: expected {}x{}, got {}x{}",
                    system.n_u(),
                    system.n(),
                    k.nrows(),
                    k.ncols()
                )));
            }
        }
        let lqr = self
            .lqr
            .as_ref()
            .map(|l| -> Result<LqrWeights> {
                Ok(LqrWeights {
                    q: matrix("lqr.q", &l.q)?,
                    r: matrix("lqr.r", &l.r)?,
                })
            })
            .transpose()?;
        Ok(Built {
            system,
            observer,
            feedback,
            lqr,
        })
    }

    pub fn sim_config(&self, sys: &LinearSystem) -> Result<SimConfig> {
        self.sim
            .as_ref()
            .ok_or_else(|| Error::Config("missing `sim` section".into()))?
            .build(sys)
    }
}
