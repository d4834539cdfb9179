//! Helpers shared by the integration suites.
#![allow(dead_code)]

use cubic_observer::cli::config::{Built, RunSpec};
use cubic_observer::cli::fixtures;
use cubic_observer::design::{place_poles_single_output, synthesize_cubic_gain};
use cubic_observer::numlin::{self, Matrix};
use cubic_observer::random::{observable_siso, stable_poles};
use cubic_observer::sim::SimConfig;
use cubic_observer::{CubicObserverDesign, LinearSystem};
use rand::Rng;

pub fn m(rows: &[&[f64]]) -> Matrix {
    numlin::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

pub fn example(n: u8) -> (RunSpec, Built, SimConfig) {
    let spec = RunSpec::from_json(fixtures::config(n).unwrap()).unwrap();
    let built = spec.build().unwrap();
    let cfg = spec.sim_config(&built.system).unwrap();
    (spec, built, cfg)
}

/// Random observable single-output plant with a synthesized cubic design.
pub struct RandomCase {
    pub sys: LinearSystem,
    pub design: CubicObserverDesign,
    pub gamma: f64,
}

/// Largest placed observer gain accepted by the random suites. Beyond it
/// `eps·‖F‖·‖P‖` alone exceeds the Lyapunov residual bound.
pub const MAX_RANDOM_GAIN: f64 = 100.0;

/// Random observable plant, stable pole set and the gain placing it, redrawn
/// until `‖L‖∞ ≤ MAX_RANDOM_GAIN`.
pub fn random_placement<R: Rng>(
    rng: &mut R,
    n: usize,
) -> (LinearSystem, Vec<nalgebra::Complex<f64>>, Matrix) {
    loop {
        let sys = observable_siso(rng, n);
        let poles = stable_poles(rng, n);
        let l = place_poles_single_output(&sys, &poles).unwrap().gain_l().clone();
        if numlin::inf_norm(&l) <= MAX_RANDOM_GAIN {
            return (sys, poles, l);
        }
    }
}

pub fn random_case<R: Rng>(rng: &mut R, n: usize, q: Option<Matrix>) -> RandomCase {
    let (sys, _, lc) = random_placement(rng, n);
    let q = q.unwrap_or_else(|| {
        let g = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &g * g.transpose() + Matrix::identity(n, n)
    });
    let theta = Matrix::from_element(1, 1, rng.random_range(0.5..10.0));
    let gamma = rng.random_range(0.1..10.0);
    let design = synthesize_cubic_gain(&sys, lc, q, theta, gamma).unwrap();
    RandomCase { sys, design, gamma }
}
