//! Seeded generators for random test plants, used by the property suites
//! and the benchmarks.

use nalgebra::Complex;
use rand::Rng;

use crate::numlin::{self, Matrix};
use crate::sysmodel::LinearSystem;

/// Random single-output plant of order `n` with entries in `[-1, 1]`,
/// redrawn until `(A, C)` is observable with a condition number below 1e6.
pub fn observable_siso<R: Rng>(rng: &mut R, n: usize) -> LinearSystem {
    loop {
        let a = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let b = Matrix::from_fn(n, 1, |_, _| rng.random_range(-1.0..1.0));
        let c = Matrix::from_fn(1, n, |_, _| rng.random_range(-1.0..1.0));
        let Ok(sys) = LinearSystem::new(a, b, c) else {
            continue;
        };
        if numlin::condition_number(&sys.observability_matrix()) < 1e6 {
            return sys;
        }
    }
}

/// `n` distinct stable poles, closed under conjugation, with real parts in
/// `[-4, -0.5]`. Roughly half of the slots go to complex pairs.
pub fn stable_poles<R: Rng>(rng: &mut R, n: usize) -> Vec<Complex<f64>> {
    let mut poles: Vec<Complex<f64>> = Vec::with_capacity(n);
    let distinct = |poles: &[Complex<f64>], z: Complex<f64>| {
        poles.iter().all(|p| (p - z).norm() > 0.2)
    };
    while poles.len() < n {
        let re = rng.random_range(-4.0..-0.5);
        if n - poles.len() >= 2 && rng.random_bool(0.5) {
            let z = Complex::new(re, rng.random_range(0.3..2.0));
            if distinct(&poles, z) {
                poles.push(z);
                poles.push(z.conj());
            }
        } else {
            let z = Complex::new(re, 0.0);
            if distinct(&poles, z) {
                poles.push(z);
            }
        }
    }
    poles
}
