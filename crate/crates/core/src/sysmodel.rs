//! Plant models: the LTI system `ẋ = Ax + Bu, y = Cx`, the scalar-shift
//! uncertainty family `A(ε) = A + εI`, and deterministic input signals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numlin::{self, Matrix, Vector};

/// Singular values below this fraction of `σ_max` count as zero when
/// checking observability.
pub const OBSERVABILITY_RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    a: Matrix,
    b: Matrix,
    c: Matrix,
}

impl LinearSystem {
    /// Validates dimensions, finiteness and observability of `(a, c)`.
    pub fn new(a: Matrix, b: Matrix, c: Matrix) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() || n == 0 {
            return Err(Error::Dimension(format!(
                "state matrix must be square and nonempty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != n {
            return Err(Error::Dimension(format!(
                "input matrix has {} rows, expected {n}",
                b.nrows()
            )));
        }
        if c.ncols() != n {
            return Err(Error::Dimension(format!(
                "output matrix has {} columns, expected {n}",
                c.ncols()
            )));
        }
        numlin::ensure_finite(&a, "A")?;
        numlin::ensure_finite(&b, "B")?;
        numlin::ensure_finite(&c, "C")?;
        let obs = observability_matrix(&a, &c)?;
        let rank = numlin::numerical_rank(&obs, OBSERVABILITY_RANK_TOL);
        if rank != n {
            return Err(Error::Contract(format!(
                "pair (A, C) is not observable: observability rank {rank} < {n}"
            )));
        }
        Ok(Self { a, b, c })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_u(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_y(&self) -> usize {
        self.c.nrows()
    }

    pub fn observability_matrix(&self) -> Matrix {
        observability_matrix(&self.a, &self.c).expect("dimensions validated on construction")
    }

    /// Same system with `εI` added to the state matrix. Observability is
    /// invariant under this shift, so no recheck is needed.
    pub fn shifted(&self, eps: f64) -> Self {
        if eps == 0.0 {
            return self.clone();
        }
        let mut a = self.a.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += eps;
        }
        Self {
            a,
            b: self.b.clone(),
            c: self.c.clone(),
        }
    }
}

/// Stacks `[C; CA; …; CA^{n−1}]`.
pub fn observability_matrix(a: &Matrix, c: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    if !a.is_square() || c.ncols() != n {
        return Err(Error::Dimension(format!(
            "observability needs square A and C with {n} columns"
        )));
    }
    let ny = c.nrows();
    let mut obs = Matrix::zeros(n * ny, n);
    let mut block = c.clone();
    for k in 0..n {
        obs.rows_mut(k * ny, ny).copy_from(&block);
        block = &block * a;
    }
    Ok(obs)
}

/// `A(ε) = A + εI` for `ε_min ≤ ε ≤ ε_max`, normalized so that
/// `ε_min ≤ 0 ≤ ε_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedFamily {
    nominal: LinearSystem,
    eps_min: f64,
    eps_max: f64,
    shift: f64,
}

impl PerturbedFamily {
    /// When both bounds share a sign the nominal state matrix absorbs the
    /// bound closest to zero and the range is re-zeroed; `shift()` reports
    /// the amount moved.
    pub fn new(nominal: LinearSystem, eps_min: f64, eps_max: f64) -> Result<Self> {
        if !(eps_min.is_finite() && eps_max.is_finite()) || eps_min > eps_max {
            return Err(Error::Contract(format!(
                "invalid perturbation range [{eps_min}, {eps_max}]"
            )));
        }
        let shift = if eps_min > 0.0 {
            eps_min
        } else if eps_max < 0.0 {
            eps_max
        } else {
            0.0
        };
        Ok(Self {
            nominal: nominal.shifted(shift),
            eps_min: eps_min - shift,
            eps_max: eps_max - shift,
            shift,
        })
    }

    pub fn nominal(&self) -> &LinearSystem {
        &self.nominal
    }

    pub fn eps_min(&self) -> f64 {
        self.eps_min
    }

    pub fn eps_max(&self) -> f64 {
        self.eps_max
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Member of the family at `eps` (in normalized coordinates). Values
    /// outside the range are allowed but logged.
    pub fn perturb(&self, eps: f64) -> LinearSystem {
        if eps < self.eps_min || eps > self.eps_max {
            log::warn!(
                "eps = {eps} lies outside [{}, {}]; simulating anyway",
                self.eps_min,
                self.eps_max
            );
        }
        self.nominal.shifted(eps)
    }
}

/// Shape of a deterministic input. Scalar shapes drive every channel
/// identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalKind {
    Zero,
    Sinusoid {
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    Constant {
        level: f64,
    },
    /// Zero-order hold through `(time, value)` samples; before the first
    /// sample the first value applies.
    Sampled {
        times: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputSignal {
    kind: SignalKind,
    dim: usize,
}

impl InputSignal {
    pub fn new(kind: SignalKind, dim: usize) -> Result<Self> {
        let finite = |v: f64| v.is_finite();
        match &kind {
            SignalKind::Zero => {}
            SignalKind::Sinusoid {
                amplitude,
                omega,
                phase,
            } => {
                if ![*amplitude, *omega, *phase].into_iter().all(finite) {
                    return Err(Error::Contract("sinusoid parameters must be finite".into()));
                }
            }
            SignalKind::Constant { level } => {
                if !level.is_finite() {
                    return Err(Error::Contract("constant level must be finite".into()));
                }
            }
            SignalKind::Sampled { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return Err(Error::Contract(
                        "sampled signal needs matching, nonempty times and values".into(),
                    ));
                }
                if times.windows(2).any(|w| w[0] >= w[1] || w[0].is_nan()) || !times.iter().copied().all(finite) {
                    return Err(Error::Contract(
                        "sampled signal times must be finite and strictly increasing".into(),
                    ));
                }
                if let Some(v) = values.iter().find(|v| v.len() != dim) {
                    return Err(Error::Dimension(format!(
                        "sampled value has {} channels, expected {dim}",
                        v.len()
                    )));
                }
                if !values.iter().flatten().copied().all(finite) {
                    return Err(Error::Contract("sampled values must be finite".into()));
                }
            }
        }
        Ok(Self { kind, dim })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            kind: SignalKind::Zero,
            dim,
        }
    }

    pub fn kind(&self) -> &SignalKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn evaluate(&self, t: f64) -> Vector {
        match &self.kind {
            SignalKind::Zero => Vector::zeros(self.dim),
            SignalKind::Sinusoid {
                amplitude,
                omega,
                phase,
            } => Vector::from_element(self.dim, amplitude * (omega * t + phase).sin()),
            SignalKind::Constant { level } => Vector::from_element(self.dim, *level),
            SignalKind::Sampled { times, values } => {
                let idx = times.partition_point(|&s| s <= t).saturating_sub(1);
                Vector::from_column_slice(&values[idx])
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn m(rows: &[&[f64]]) -> Matrix {
        numlin::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn example_one() -> LinearSystem {
        LinearSystem::new(
            m(&[&[0.0, 1.0], &[0.0, 0.0]]),
            m(&[&[0.0], &[1.0]]),
            m(&[&[1.0, 0.0]]),
        )
        .unwrap()
    }

    #[test]
    fn observability_of_double_integrator() {
        let sys = example_one();
        assert_eq!(sys.observability_matrix(), Matrix::identity(2, 2));
        assert_eq!(numlin::numerical_rank(&sys.observability_matrix(), 1e-9), 2);
    }

    #[test]
    fn full_state_output_is_observable() {
        let a = m(&[&[1.0, 2.0, 0.0], &[0.0, 1.0, 0.0], &[3.0, 0.0, 0.0]]);
        let sys = LinearSystem::new(a, Matrix::zeros(3, 1), Matrix::identity(3, 3)).unwrap();
        assert_eq!(sys.observability_matrix().nrows(), 9);
    }

    #[test]
    fn unobservable_pair_rejected() {
        let a = Matrix::identity(2, 2);
        let c = m(&[&[1.0, 0.0]]);
        assert_eq!(observability_matrix(&a, &c).unwrap(), m(&[&[1.0, 0.0], &[1.0, 0.0]]));
        assert!(matches!(
            LinearSystem::new(a, Matrix::zeros(2, 1), c),
            Err(Error::Contract(msg)) if msg.contains("not observable")
        ));
    }

    #[test]
    fn dimension_errors() {
        assert!(matches!(
            LinearSystem::new(Matrix::zeros(2, 3), Matrix::zeros(2, 1), Matrix::zeros(1, 3)),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            LinearSystem::new(Matrix::identity(2, 2), Matrix::zeros(3, 1), m(&[&[1.0, 0.0]])),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            LinearSystem::new(Matrix::identity(2, 2), Matrix::zeros(2, 1), m(&[&[1.0, 0.0, 0.0]])),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn perturb_zero_is_bit_identical() {
        let sys = example_one();
        let fam = PerturbedFamily::new(sys.clone(), -0.1, 0.1).unwrap();
        assert_eq!(fam.perturb(0.0), sys);
    }

    #[test]
    fn perturb_example_two() {
        let a = m(&[&[-0.1, -0.2, 0.0], &[0.3, 0.0, 0.0], &[0.1, 0.2, -3.0]]);
        let sys = LinearSystem::new(a.clone(), Matrix::zeros(3, 1), m(&[&[1.0, 1.0, 2.0]])).unwrap();
        let fam = PerturbedFamily::new(sys, 0.0, 0.0014).unwrap();
        let p = fam.perturb(0.02);
        assert_eq!(p.a(), &(a + Matrix::identity(3, 3) * 0.02));
    }

    #[test]
    fn perturb_scalar_plant() {
        let sys = LinearSystem::new(m(&[&[0.0]]), m(&[&[1.0]]), m(&[&[1.0]])).unwrap();
        let fam = PerturbedFamily::new(sys, -1.0, 1.0).unwrap();
        assert_eq!(fam.perturb(-0.5).a()[(0, 0)], -0.5);
    }

    #[test]
    fn same_signed_range_is_normalized() {
        let sys = LinearSystem::new(m(&[&[-1.0]]), m(&[&[1.0]]), m(&[&[1.0]])).unwrap();
        let fam = PerturbedFamily::new(sys.clone(), 0.2, 0.5).unwrap();
        assert_eq!(fam.shift(), 0.2);
        assert_eq!(fam.eps_min(), 0.0);
        assert!((fam.eps_max() - 0.3).abs() < 1e-15);
        assert!((fam.nominal().a()[(0, 0)] + 0.8).abs() < 1e-15);

        let fam = PerturbedFamily::new(sys, -0.5, -0.2).unwrap();
        assert_eq!(fam.eps_max(), 0.0);
        assert!((fam.eps_min() + 0.3).abs() < 1e-15);
        assert!((fam.nominal().a()[(0, 0)] + 1.2).abs() < 1e-15);
    }

    #[test]
    fn inverted_range_rejected() {
        let sys = example_one();
        assert!(PerturbedFamily::new(sys, 0.1, -0.1).is_err());
    }

    #[test]
    fn input_signals() {
        assert_eq!(InputSignal::zero(2).evaluate(3.0), Vector::zeros(2));
        let s = InputSignal::new(
            SignalKind::Sinusoid {
                amplitude: 1.0,
                omega: 1.0,
                phase: 0.0,
            },
            1,
        )
        .unwrap();
        assert!((s.evaluate(FRAC_PI_2)[0] - 1.0).abs() < 1e-15);
        let c = InputSignal::new(SignalKind::Constant { level: 2.5 }, 2).unwrap();
        assert_eq!(c.evaluate(0.0), Vector::from_element(2, 2.5));
    }

    #[test]
    fn sampled_signal_holds() {
        let s = InputSignal::new(
            SignalKind::Sampled {
                times: vec![0.0, 2.0],
                values: vec![vec![1.0], vec![3.0]],
            },
            1,
        )
        .unwrap();
        assert_eq!(s.evaluate(1.5)[0], 1.0);
        assert_eq!(s.evaluate(2.0)[0], 3.0);
        assert_eq!(s.evaluate(7.0)[0], 3.0);

        let late = InputSignal::new(
            SignalKind::Sampled {
                times: vec![1.0, 2.0],
                values: vec![vec![4.0], vec![5.0]],
            },
            1,
        )
        .unwrap();
        assert_eq!(late.evaluate(0.0)[0], 4.0);
    }

    #[test]
    fn sampled_signal_validation() {
        let bad = InputSignal::new(
            SignalKind::Sampled {
                times: vec![1.0, 1.0],
                values: vec![vec![0.0], vec![0.0]],
            },
            1,
        );
        assert!(bad.is_err());
        let wrong_dim = InputSignal::new(
            SignalKind::Sampled {
                times: vec![0.0],
                values: vec![vec![0.0, 1.0]],
            },
            1,
        );
        assert!(matches!(wrong_dim, Err(Error::Dimension(_))));
    }
}
