//! Observer gain synthesis and stability certificates.
//!
//! The cubic observer adds `−(rᵀΘr)·N_c·r`, with output residual
//! `r = y − C x̂`, to a Luenberger observer with gain `L_c`. Its error obeys
//!
//! ```text
//! ė = (A − L_c C) e + (eᵀ Cᵀ Θ C e) · N_c C e
//! ```
//!
//! With `P` solving `(A − L_c C)ᵀ P + P (A − L_c C) = −Q`, the choice
//! `N_c = −γ P⁻¹ Cᵀ Θ` makes the cubic contribution to `d/dt (eᵀPe)` equal to
//! `−2γ (eᵀCᵀΘCe)²`, which never opposes the linear decay.

use std::collections::BTreeMap;

use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numlin::{self, Matrix, Vector, DEFAULT_DEFINITENESS_TOL};
use crate::par::{self, Execution};
use crate::sysmodel::LinearSystem;

/// Scalings tried for the observer block of the feedback certificate.
pub const FEEDBACK_BETA_GRID: [f64; 9] = [1e0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8];

/// Relative tolerance used when matching a pole with its conjugate.
const CONJUGATE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearObserverDesign {
    gain_l: Matrix,
}

impl LinearObserverDesign {
    pub fn new(gain_l: Matrix) -> Self {
        Self { gain_l }
    }

    pub fn gain_l(&self) -> &Matrix {
        &self.gain_l
    }

    /// `A − L C` for the given plant.
    pub fn error_matrix(&self, sys: &LinearSystem) -> Result<Matrix> {
        check_gain(sys, &self.gain_l, "L")?;
        Ok(sys.a() - &self.gain_l * sys.c())
    }
}

/// How the nonlinear gain of a design came about; decides which damping
/// test the certificate applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainOrigin {
    /// `N_c = −γ P⁻¹ Cᵀ Θ`.
    Synthesized,
    /// `N_c = 0`, i.e. a linear observer in cubic clothing.
    DegenerateLinear,
    /// User supplied `N_c`; held to the strict damping test unless
    /// `semidefinite_ok`.
    Explicit { semidefinite_ok: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubicObserverDesign {
    gain_lc: Matrix,
    gain_nc: Matrix,
    theta: Matrix,
    gamma: Option<f64>,
    lyapunov_p: Matrix,
    lyapunov_q: Matrix,
    origin: GainOrigin,
}

fn check_gain(sys: &LinearSystem, gain: &Matrix, name: &str) -> Result<()> {
    if gain.shape() != (sys.n(), sys.n_y()) {
        return Err(Error::Dimension(format!(
            "{name} is {}x{}, expected {}x{}",
            gain.nrows(),
            gain.ncols(),
            sys.n(),
            sys.n_y()
        )));
    }
    numlin::ensure_finite(gain, name)
}

fn check_theta(sys: &LinearSystem, theta: &Matrix) -> Result<Matrix> {
    if theta.shape() != (sys.n_y(), sys.n_y()) {
        return Err(Error::Dimension(format!(
            "Theta is {}x{}, expected {}x{}",
            theta.nrows(),
            theta.ncols(),
            sys.n_y(),
            sys.n_y()
        )));
    }
    let theta = numlin::symmetrized(theta)?;
    if !numlin::is_positive_semidefinite(&theta, DEFAULT_DEFINITENESS_TOL)? {
        return Err(Error::Contract("Theta must be positive semidefinite".into()));
    }
    Ok(theta)
}

fn check_weight(sys: &LinearSystem, q: &Matrix) -> Result<()> {
    if q.shape() != (sys.n(), sys.n()) {
        return Err(Error::Dimension(format!(
            "Q is {}x{}, expected {n}x{n}",
            q.nrows(),
            q.ncols(),
            n = sys.n()
        )));
    }
    Ok(())
}

impl CubicObserverDesign {
    /// Linear observer expressed as a cubic design with `γ = 0`, `N_c = 0`.
    pub fn degenerate_linear(
        sys: &LinearSystem,
        gain_l: Matrix,
        q: Matrix,
        theta: Matrix,
    ) -> Result<Self> {
        check_gain(sys, &gain_l, "L_c")?;
        check_weight(sys, &q)?;
        let theta = check_theta(sys, &theta)?;
        let p = numlin::solve_lyapunov(&(sys.a() - &gain_l * sys.c()), &q)?;
        Ok(Self {
            gain_nc: Matrix::zeros(sys.n(), sys.n_y()),
            gain_lc: gain_l,
            theta,
            gamma: Some(0.0),
            lyapunov_p: p,
            lyapunov_q: numlin::symmetrized(&q)?,
            origin: GainOrigin::DegenerateLinear,
        })
    }

    /// Design with a user supplied `N_c`. `P` is still computed from `Q` so
    /// the certificate can be evaluated.
    pub fn explicit(
        sys: &LinearSystem,
        gain_lc: Matrix,
        gain_nc: Matrix,
        theta: Matrix,
        q: Matrix,
        semidefinite_ok: bool,
    ) -> Result<Self> {
        check_gain(sys, &gain_lc, "L_c")?;
        check_gain(sys, &gain_nc, "N_c")?;
        check_weight(sys, &q)?;
        let theta = check_theta(sys, &theta)?;
        let p = numlin::solve_lyapunov(&(sys.a() - &gain_lc * sys.c()), &q)?;
        Ok(Self {
            gain_lc,
            gain_nc,
            theta,
            gamma: None,
            lyapunov_p: p,
            lyapunov_q: numlin::symmetrized(&q)?,
            origin: GainOrigin::Explicit { semidefinite_ok },
        })
    }

    pub fn gain_lc(&self) -> &Matrix {
        &self.gain_lc
    }

    pub fn gain_nc(&self) -> &Matrix {
        &self.gain_nc
    }

    pub fn theta(&self) -> &Matrix {
        &self.theta
    }

    /// `None` for explicit designs, whose `N_c` did not come from a `γ`.
    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn lyapunov_p(&self) -> &Matrix {
        &self.lyapunov_p
    }

    pub fn lyapunov_q(&self) -> &Matrix {
        &self.lyapunov_q
    }

    pub fn origin(&self) -> GainOrigin {
        self.origin
    }

    /// `A − L_c C`.
    pub fn error_matrix(&self, sys: &LinearSystem) -> Matrix {
        sys.a() - &self.gain_lc * sys.c()
    }

    /// `Cᵀ Θ C`.
    pub fn output_weight(&self, sys: &LinearSystem) -> Matrix {
        sys.c().transpose() * &self.theta * sys.c()
    }

    /// `P N_c C`; its symmetric part is the cubic factor of `V̇`.
    pub fn damping_matrix(&self, sys: &LinearSystem) -> Matrix {
        &self.lyapunov_p * &self.gain_nc * sys.c()
    }

    pub fn as_linear(&self) -> LinearObserverDesign {
        LinearObserverDesign::new(self.gain_lc.clone())
    }
}

/// Builds `N_c = −γ P⁻¹ Cᵀ Θ` with `P` from the Lyapunov equation of
/// `A − L_c C` and weight `q`.
pub fn synthesize_cubic_gain(
    sys: &LinearSystem,
    gain_lc: Matrix,
    q: Matrix,
    theta: Matrix,
    gamma: f64,
) -> Result<CubicObserverDesign> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Contract(format!(
            "gamma must be finite and > 0, got {gamma} (use the degenerate linear constructor for 0)"
        )));
    }
    check_gain(sys, &gain_lc, "L_c")?;
    check_weight(sys, &q)?;
    let theta = check_theta(sys, &theta)?;
    let f = sys.a() - &gain_lc * sys.c();
    let p = numlin::solve_lyapunov(&f, &q)?;
    let ct_theta = sys.c().transpose() * &theta;
    let gain_nc = numlin::solve(&p, &ct_theta)? * -gamma;
    Ok(CubicObserverDesign {
        gain_lc,
        gain_nc,
        theta,
        gamma: Some(gamma),
        lyapunov_p: p,
        lyapunov_q: numlin::symmetrized(&q)?,
        origin: GainOrigin::Synthesized,
    })
}

/// Observer gain placing the eigenvalues of `A − L C` at `desired`, for a
/// single-output plant, via the dual Ackermann formula.
pub fn place_poles_single_output(
    sys: &LinearSystem,
    desired: &[Complex<f64>],
) -> Result<LinearObserverDesign> {
    if sys.n_y() != 1 {
        return Err(Error::Unsupported(format!(
            "pole placement handles single-output plants only (n_y = {}); supply L directly",
            sys.n_y()
        )));
    }
    let n = sys.n();
    if desired.len() != n {
        return Err(Error::Contract(format!(
            "{} poles requested for a plant of order {n}",
            desired.len()
        )));
    }
    if desired.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Contract("poles must be finite".into()));
    }
    check_conjugate_closed(desired)?;

    // coefficients of ∏(λ − p_i), leading coefficient first
    let mut coeffs = vec![Complex::new(1.0, 0.0)];
    for &p in desired {
        let mut next = vec![Complex::new(0.0, 0.0); coeffs.len() + 1];
        for (k, &c) in coeffs.iter().enumerate() {
            next[k] += c;
            next[k + 1] -= c * p;
        }
        coeffs = next;
    }

    let a = sys.a();
    let eye = Matrix::identity(n, n);
    let mut phi = eye.clone();
    for c in &coeffs[1..] {
        phi = &phi * a + &eye * c.re;
    }
    let mut e_last = Matrix::zeros(n, 1);
    e_last[(n - 1, 0)] = 1.0;
    let q = numlin::solve(&sys.observability_matrix(), &e_last)?;
    Ok(LinearObserverDesign::new(phi * q))
}

fn check_conjugate_closed(poles: &[Complex<f64>]) -> Result<()> {
    let mut used = vec![false; poles.len()];
    for i in 0..poles.len() {
        if used[i] {
            continue;
        }
        let p = poles[i];
        let tol = CONJUGATE_TOL * p.norm().max(1.0);
        if p.im.abs() <= tol {
            used[i] = true;
            continue;
        }
        let partner = (0..poles.len())
            .find(|&j| j != i && !used[j] && (poles[j] - p.conj()).norm() <= tol);
        match partner {
            Some(j) => {
                used[i] = true;
                used[j] = true;
            }
            None => {
                return Err(Error::Contract(format!(
                    "pole {p} has no conjugate partner in the requested set"
                )))
            }
        }
    }
    Ok(())
}

/// Machine-checked stability record. Every flag has a numeric margin in
/// `margins` so the verdict can be reproduced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// `A − L_c C` Hurwitz and `(A − L_c C)ᵀP + P(A − L_c C) ≺ 0`.
    pub hurwitz_ok: bool,
    /// `P N_c C + Cᵀ N_cᵀ P ⪯ 0`, strict when `damping_strict`.
    pub damping_ok: bool,
    pub damping_strict: bool,
    /// No nonzero equilibrium of the error dynamics (sufficient test).
    pub uniqueness_ok: bool,
    pub margins: BTreeMap<String, f64>,
    pub robustness_eps_max: Option<f64>,
    pub feedback_ok: Option<bool>,
    pub feedback_beta: Option<f64>,
    /// Same block test at `β = 1`: linear feedback with the linear observer.
    pub linear_feedback_ok: Option<bool>,
}

impl Certificate {
    pub fn stability_ok(&self) -> bool {
        self.hurwitz_ok && self.damping_ok && self.uniqueness_ok
    }

    /// All checked conditions pass, including feedback when present.
    pub fn passed(&self) -> bool {
        self.stability_ok() && self.feedback_ok.unwrap_or(true)
    }

    /// Names of failed conditions, for diagnostics.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.hurwitz_ok {
            out.push("hurwitz condition: (A - L_c C)^T P + P (A - L_c C) < 0");
        }
        if !self.damping_ok {
            out.push(if self.damping_strict {
                "damping condition: P N_c C + C^T N_c^T P < 0"
            } else {
                "damping condition: P N_c C + C^T N_c^T P <= 0"
            });
        }
        if !self.uniqueness_ok {
            out.push("uniqueness condition: C^T Theta C (A - L_c C)^-1 N_c C >= 0");
        }
        if self.feedback_ok == Some(false) {
            out.push("feedback block condition not certified on the beta grid");
        }
        out
    }
}

/// Evaluates the global stability conditions for `design` on `sys`.
/// Failing conditions produce `false` flags, never errors; only dimension
/// mismatches are reported as `Err`.
pub fn certify_stability(sys: &LinearSystem, design: &CubicObserverDesign) -> Result<Certificate> {
    check_gain(sys, design.gain_lc(), "L_c")?;
    check_gain(sys, design.gain_nc(), "N_c")?;
    let tol = DEFAULT_DEFINITENESS_TOL;
    let n = sys.n();
    let p = design.lyapunov_p();
    let f = design.error_matrix(sys);
    let mut margins = BTreeMap::new();

    let spectrum = numlin::eigenvalues(&f)?;
    margins.insert("error_matrix_max_real".to_string(), spectrum.max_real());
    let lyap = f.transpose() * p + p * &f;
    let (p_min, p_max) = numlin::symmetric_extremes(p)?;
    margins.insert("p_min_eig".to_string(), p_min);
    margins.insert("p_max_eig".to_string(), p_max);
    let q_eff = -&lyap;
    let (q_eff_min, _) = numlin::symmetric_extremes(&numlin::symmetrized(&q_eff)?)?;
    margins.insert("lyapunov_decay_min_eig".to_string(), q_eff_min);
    let hurwitz_ok = spectrum.max_real() < 0.0
        && numlin::is_positive_definite(p, tol)?
        && numlin::is_negative_definite_quadform(&lyap, tol)?;

    let weight = design.output_weight(sys);
    let full_rank_weight = numlin::numerical_rank(&weight, 1e-9) == n;
    let damping_strict = full_rank_weight
        || matches!(
            design.origin(),
            GainOrigin::Explicit {
                semidefinite_ok: false
            }
        );
    let damping = design.damping_matrix(sys);
    margins.insert(
        "damping_max_eig".to_string(),
        numlin::quadform_upper_margin(&damping)?,
    );
    let damping_ok = if damping_strict {
        numlin::is_negative_definite_quadform(&damping, tol)?
    } else {
        numlin::is_negative_semidefinite_quadform(&damping, tol)?
    };

    let uniqueness_ok = match numlin::solve(&f, &(design.gain_nc() * sys.c())) {
        Ok(finv_nc_c) => {
            let m = &weight * finv_nc_c;
            let sym = &m + m.transpose();
            let (lo, _) = numlin::symmetric_extremes(&sym)?;
            margins.insert("uniqueness_min_eig".to_string(), lo);
            let general = numlin::is_positive_semidefinite(&sym, tol)?;
            if design.origin() == GainOrigin::Synthesized {
                let pf = p * &f;
                margins.insert(
                    "pf_quadform_max_eig".to_string(),
                    numlin::quadform_upper_margin(&pf)?,
                );
                general && numlin::is_negative_definite_quadform(&pf, tol)?
            } else {
                general
            }
        }
        Err(_) => {
            margins.insert("uniqueness_min_eig".to_string(), f64::NAN);
            false
        }
    };

    Ok(Certificate {
        hurwitz_ok,
        damping_ok,
        damping_strict,
        uniqueness_ok,
        margins,
        robustness_eps_max: Some(robustness_bound(design)?),
        feedback_ok: None,
        feedback_beta: None,
        linear_feedback_ok: None,
    })
}

/// Largest `ε` in `A + εI` for which `eᵀPe` is guaranteed to keep
/// decreasing: `λ_min(Q) / (2 λ_max(P))`.
pub fn robustness_bound(design: &CubicObserverDesign) -> Result<f64> {
    let (q_min, _) = numlin::symmetric_extremes(design.lyapunov_q())?;
    let (_, p_max) = numlin::symmetric_extremes(design.lyapunov_p())?;
    Ok((q_min / (2.0 * p_max)).max(0.0))
}

/// Stability certificate plus the observer-based feedback block test for
/// `u = −K x̂`.
///
/// `P₁` solves the Lyapunov equation of `A − BK` with `Q₁ = I`; the observer
/// block is scaled by `β` over [`FEEDBACK_BETA_GRID`]. A `false` result means
/// "not certified by this test", not "unstable".
pub fn feedback_certificate(
    sys: &LinearSystem,
    design: &CubicObserverDesign,
    k: &Matrix,
) -> Result<Certificate> {
    let n = sys.n();
    if k.shape() != (sys.n_u(), n) {
        return Err(Error::Dimension(format!(
            "K is {}x{}, expected {}x{n}",
            k.nrows(),
            k.ncols(),
            sys.n_u()
        )));
    }
    numlin::ensure_finite(k, "K")?;
    let mut cert = certify_stability(sys, design)?;
    let tol = DEFAULT_DEFINITENESS_TOL;

    let bk = sys.b() * k;
    let fk = sys.a() - &bk;
    let controller = numlin::eigenvalues(&fk)?;
    cert.margins
        .insert("controller_max_real".to_string(), controller.max_real());
    if controller.max_real() >= 0.0 {
        cert.feedback_ok = Some(false);
        cert.linear_feedback_ok = Some(false);
        return Ok(cert);
    }

    let p1 = numlin::solve_lyapunov(&fk, &Matrix::identity(n, n))?;
    let top = fk.transpose() * &p1 + &p1 * &fk;
    let coupling = &p1 * &bk;
    let f = design.error_matrix(sys);
    let p = design.lyapunov_p();
    let observer = f.transpose() * p + p * &f;

    let block = |beta: f64| {
        let mut m = Matrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&top);
        m.view_mut((0, n), (n, n)).copy_from(&coupling);
        m.view_mut((n, 0), (n, n)).copy_from(&coupling.transpose());
        m.view_mut((n, n), (n, n)).copy_from(&(&observer * beta));
        m
    };

    let unit = block(1.0);
    cert.linear_feedback_ok = Some(numlin::is_positive_definite(&-&unit, tol)?);
    cert.margins.insert(
        "linear_feedback_max_eig".to_string(),
        numlin::symmetric_extremes(&unit)?.1,
    );

    let mut found = None;
    let mut last_margin = f64::NAN;
    for beta in FEEDBACK_BETA_GRID {
        let m = block(beta);
        last_margin = numlin::symmetric_extremes(&m)?.1;
        if numlin::is_positive_definite(&-&m, tol)? {
            found = Some(beta);
            break;
        }
    }
    cert.margins
        .insert("feedback_block_max_eig".to_string(), last_margin);
    cert.feedback_ok = Some(found.is_some());
    cert.feedback_beta = found;
    Ok(cert)
}

/// Outcome of the damped-Newton search for nonzero equilibria of the error
/// dynamics. Finding none proves nothing; finding one falsifies uniqueness.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumSearch {
    pub starts: usize,
    pub seed: u64,
    pub nonzero_roots: Vec<Vec<f64>>,
}

pub const DEFAULT_SEARCH_SEED: u64 = 0x5EED;

/// Runs damped Newton on `(A − L_c C)v + (vᵀCᵀΘCv) N_c C v = 0` from
/// `starts` seeded random points in `[-10, 10]ⁿ`.
pub fn search_nonzero_equilibria(
    sys: &LinearSystem,
    design: &CubicObserverDesign,
    starts: usize,
    seed: u64,
    exec: Execution,
) -> EquilibriumSearch {
    let f = design.error_matrix(sys);
    let w = design.output_weight(sys);
    let nc_c = design.gain_nc() * sys.c();
    let scale = numlin::inf_norm(&f).max(1.0);
    let n = sys.n();

    let residual = |v: &Vector| &f * v + &nc_c * v * v.dot(&(&w * v));
    let newton = |start: &u64| -> Option<Vector> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(*start));
        let mut v = Vector::from_fn(n, |_, _| rng.random_range(-10.0..10.0));
        let mut g = residual(&v);
        for _ in 0..200 {
            let s = v.dot(&(&w * &v));
            let jac = &f + &nc_c * s + (&nc_c * &v) * (&w * &v).transpose() * 2.0;
            let step = jac.lu().solve(&g)?;
            let mut t = 1.0;
            let base = g.norm();
            loop {
                let trial = &v - &step * t;
                let gt = residual(&trial);
                if gt.norm() < base || t < 1e-8 {
                    v = trial;
                    g = gt;
                    break;
                }
                t *= 0.5;
            }
            if g.norm() <= 1e-12 * scale * (1.0 + v.norm()) {
                break;
            }
        }
        let converged = g.norm() <= 1e-10 * scale * (1.0 + v.norm());
        (converged && v.norm() > 1e-6).then_some(v)
    };

    let seeds: Vec<u64> = (0..starts as u64).collect();
    let found = par::map(&seeds, exec, newton);
    let mut roots: Vec<Vector> = Vec::new();
    for v in found.into_iter().flatten() {
        if !roots
            .iter()
            .any(|r| (r - &v).norm() <= 1e-6 * (1.0 + v.norm()))
        {
            roots.push(v);
        }
    }
    EquilibriumSearch {
        starts,
        seed,
        nonzero_roots: roots.iter().map(|v| v.iter().copied().collect()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m(rows: &[&[f64]]) -> Matrix {
        numlin::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn real(ps: &[f64]) -> Vec<Complex<f64>> {
        ps.iter().map(|&p| Complex::new(p, 0.0)).collect()
    }

    fn example_one() -> LinearSystem {
        LinearSystem::new(
            m(&[&[0.0, 1.0], &[0.0, 0.0]]),
            m(&[&[0.0], &[1.0]]),
            m(&[&[1.0, 0.0]]),
        )
        .unwrap()
    }

    fn example_two() -> LinearSystem {
        LinearSystem::new(
            m(&[&[-0.1, -0.2, 0.0], &[0.3, 0.0, 0.0], &[0.1, 0.2, -3.0]]),
            Matrix::zeros(3, 1),
            m(&[&[1.0, 1.0, 2.0]]),
        )
        .unwrap()
    }

    fn scalar() -> LinearSystem {
        LinearSystem::new(m(&[&[-1.0]]), m(&[&[1.0]]), m(&[&[1.0]])).unwrap()
    }

    fn example_one_design() -> CubicObserverDesign {
        let sys = example_one();
        let l = place_poles_single_output(&sys, &real(&[-2.0, -5.0])).unwrap();
        synthesize_cubic_gain(
            &sys,
            l.gain_l().clone(),
            Matrix::identity(2, 2) * 10.0,
            m(&[&[10.0]]),
            2.0,
        )
        .unwrap()
    }

    #[test]
    fn place_poles_example_one() {
        let l = place_poles_single_output(&example_one(), &real(&[-2.0, -5.0])).unwrap();
        assert_abs_diff_eq!(l.gain_l(), &m(&[&[7.0], &[10.0]]), epsilon = 1e-9);
    }

    #[test]
    fn place_poles_repeated() {
        let l = place_poles_single_output(&example_one(), &real(&[-1.0, -1.0])).unwrap();
        assert_abs_diff_eq!(l.gain_l(), &m(&[&[2.0], &[1.0]]), epsilon = 1e-12);
    }

    #[test]
    fn place_poles_example_two_stated_and_printed_sets() {
        let sys = example_two();
        // the stated pole set
        let l = place_poles_single_output(&sys, &real(&[-30.0, -10.0, -5.0])).unwrap();
        let ev = numlin::eigenvalues(&l.error_matrix(&sys).unwrap()).unwrap();
        for (z, want) in ev.values().iter().zip([-30.0, -10.0, -5.0]) {
            assert_abs_diff_eq!(z.re, want, epsilon = 1e-8);
            assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-8);
        }
        // the printed gain corresponds to {-30, -5, -5}
        let printed = place_poles_single_output(&sys, &real(&[-30.0, -5.0, -5.0])).unwrap();
        assert_abs_diff_eq!(
            printed.gain_l(),
            &m(&[&[583.7712], &[-519.9601], &[-13.4556]]),
            epsilon = 1e-3
        );
    }

    #[test]
    fn place_poles_complex_pair() {
        let poles = vec![Complex::new(-1.0, 2.0), Complex::new(-1.0, -2.0)];
        let sys = example_one();
        let l = place_poles_single_output(&sys, &poles).unwrap();
        // λ² + l₁λ + l₂ = λ² + 2λ + 5
        assert_abs_diff_eq!(l.gain_l(), &m(&[&[2.0], &[5.0]]), epsilon = 1e-12);
    }

    #[test]
    fn place_poles_errors() {
        let sys = example_one();
        let lonely = vec![Complex::new(-1.0, 2.0), Complex::new(-3.0, 0.0)];
        assert!(matches!(
            place_poles_single_output(&sys, &lonely),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            place_poles_single_output(&sys, &real(&[-1.0])),
            Err(Error::Contract(_))
        ));
        let mimo = LinearSystem::new(Matrix::identity(2, 2) * -1.0, Matrix::zeros(2, 1), Matrix::identity(2, 2)).unwrap();
        assert!(matches!(
            place_poles_single_output(&mimo, &real(&[-1.0, -2.0])),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn synthesize_example_one() {
        let d = example_one_design();
        assert_abs_diff_eq!(d.gain_nc(), &m(&[&[-9.8824], &[-11.5294]]), epsilon = 5e-4);
        assert_abs_diff_eq!(
            d.lyapunov_p(),
            &m(&[&[7.8571, -5.0], &[-5.0, 4.2857]]),
            epsilon = 5e-4
        );
    }

    #[test]
    fn synthesize_example_two_with_unit_theta() {
        let sys = example_two();
        let l = place_poles_single_output(&sys, &real(&[-30.0, -10.0, -5.0])).unwrap();
        let d = synthesize_cubic_gain(&sys, l.gain_l().clone(), Matrix::identity(3, 3) * 10.0, m(&[&[1.0]]), 1.0)
            .unwrap();
        assert_abs_diff_eq!(d.gain_nc(), &(m(&[&[0.1866], &[-0.1748], &[-0.0014]]) * -1.0), epsilon = 1e-3);
        assert_abs_diff_eq!(d.lyapunov_p()[(0, 0)], 750.5346, epsilon = 1e-2);
    }

    #[test]
    fn synthesize_scalar() {
        let d = synthesize_cubic_gain(&scalar(), m(&[&[0.0]]), m(&[&[2.0]]), m(&[&[1.0]]), 1.0).unwrap();
        assert_abs_diff_eq!(d.lyapunov_p()[(0, 0)], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d.gain_nc()[(0, 0)], -1.0, epsilon = 1e-14);
    }

    #[test]
    fn synthesize_rejects_bad_inputs() {
        let sys = example_one();
        let q = Matrix::identity(2, 2);
        let th = m(&[&[1.0]]);
        let l = m(&[&[7.0], &[10.0]]);
        assert!(matches!(
            synthesize_cubic_gain(&sys, l.clone(), q.clone(), th.clone(), 0.0),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            synthesize_cubic_gain(&sys, l.clone(), q.clone(), m(&[&[-1.0]]), 1.0),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            synthesize_cubic_gain(&sys, m(&[&[-1.0], &[0.0]]), q, th, 1.0),
            Err(Error::Design(_))
        ));
    }

    #[test]
    fn synthesized_identity_holds() {
        let sys = example_one();
        let d = example_one_design();
        let d_mat = d.damping_matrix(&sys);
        let lhs = &d_mat + d_mat.transpose();
        let rhs = d.output_weight(&sys) * (-2.0 * 2.0);
        let w = numlin::inf_norm(&d.output_weight(&sys));
        assert!(numlin::inf_norm(&(lhs - rhs)) <= 1e-10 * (1.0 + 4.0 * w));
    }

    #[test]
    fn certificate_example_one() {
        let sys = example_one();
        let cert = certify_stability(&sys, &example_one_design()).unwrap();
        assert!(cert.hurwitz_ok && cert.damping_ok && cert.uniqueness_ok);
        // rank(CᵀΘC) = 1 < 2, so only the semidefinite test applies
        assert!(!cert.damping_strict);
        assert!(cert.margins["lyapunov_decay_min_eig"] > 9.99);
    }

    #[test]
    fn certificate_degenerate() {
        let sys = example_one();
        let d = CubicObserverDesign::degenerate_linear(
            &sys,
            m(&[&[7.0], &[10.0]]),
            Matrix::identity(2, 2) * 10.0,
            m(&[&[10.0]]),
        )
        .unwrap();
        let cert = certify_stability(&sys, &d).unwrap();
        assert!(cert.damping_ok && !cert.damping_strict);
        assert_eq!(cert.margins["damping_max_eig"], 0.0);
        assert!(cert.hurwitz_ok);
    }

    #[test]
    fn certificate_sign_flipped() {
        let sys = example_one();
        let good = example_one_design();
        let flipped = CubicObserverDesign::explicit(
            &sys,
            good.gain_lc().clone(),
            -good.gain_nc(),
            good.theta().clone(),
            good.lyapunov_q().clone(),
            true,
        )
        .unwrap();
        let cert = certify_stability(&sys, &flipped).unwrap();
        assert!(cert.hurwitz_ok);
        assert!(!cert.damping_ok);
        assert!(!cert.uniqueness_ok);
        assert!(!cert.failures().is_empty());
    }

    #[test]
    fn explicit_designs_default_to_strict_damping() {
        let sys = example_one();
        let good = example_one_design();
        let strict = CubicObserverDesign::explicit(
            &sys,
            good.gain_lc().clone(),
            good.gain_nc().clone(),
            good.theta().clone(),
            good.lyapunov_q().clone(),
            false,
        )
        .unwrap();
        let cert = certify_stability(&sys, &strict).unwrap();
        assert!(cert.damping_strict);
        assert!(!cert.damping_ok);
        assert!(cert.uniqueness_ok);
    }

    #[test]
    fn robustness_bounds() {
        let sys = scalar();
        let d = synthesize_cubic_gain(&sys, m(&[&[0.0]]), m(&[&[2.0]]), m(&[&[1.0]]), 1.0).unwrap();
        assert_abs_diff_eq!(robustness_bound(&d).unwrap(), 1.0, epsilon = 1e-14);

        let d1 = example_one_design();
        let (tr, det): (f64, f64) = (7.857142857142857 + 4.285714285714286, 7.857142857142857 * 4.285714285714286 - 25.0);
        let lmax = (tr + (tr * tr - 4.0 * det).sqrt()) / 2.0;
        assert_abs_diff_eq!(robustness_bound(&d1).unwrap(), 10.0 / (2.0 * lmax), epsilon = 1e-12);
    }

    #[test]
    fn feedback_decoupled_case() {
        let a = m(&[&[-1.0, 1.0], &[0.0, -2.0]]);
        let sys = LinearSystem::new(a, Matrix::zeros(2, 1), m(&[&[1.0, 0.0]])).unwrap();
        let d = synthesize_cubic_gain(&sys, m(&[&[1.0], &[0.0]]), Matrix::identity(2, 2), m(&[&[1.0]]), 1.0)
            .unwrap();
        let cert = feedback_certificate(&sys, &d, &Matrix::zeros(1, 2)).unwrap();
        assert_eq!(cert.feedback_ok, Some(true));
        assert_eq!(cert.feedback_beta, Some(1.0));
        assert_eq!(cert.linear_feedback_ok, Some(true));
    }

    #[test]
    fn feedback_destabilizing_gain() {
        let sys = example_one();
        let d = example_one_design();
        let k = m(&[&[-1.0, -1.0]]);
        let cert = feedback_certificate(&sys, &d, &k).unwrap();
        assert_eq!(cert.feedback_ok, Some(false));
        assert!(cert.margins["controller_max_real"] >= 0.0);
        assert!(feedback_certificate(&sys, &d, &Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn equilibrium_search_finds_spurious_roots() {
        // ė = −e + e³ has equilibria at ±1
        let sys = scalar();
        let d = CubicObserverDesign::explicit(&sys, m(&[&[0.0]]), m(&[&[1.0]]), m(&[&[1.0]]), m(&[&[2.0]]), false)
            .unwrap();
        let res = search_nonzero_equilibria(&sys, &d, 50, DEFAULT_SEARCH_SEED, Execution::Parallel);
        let mut roots: Vec<f64> = res.nonzero_roots.iter().map(|r| r[0]).collect();
        roots.sort_by(f64::total_cmp);
        assert_eq!(roots.len(), 2);
        assert_abs_diff_eq!(roots[0], -1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(roots[1], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn equilibrium_search_clean_for_certified_design() {
        let sys = example_one();
        let d = example_one_design();
        let par = search_nonzero_equilibria(&sys, &d, 100, 7, Execution::Parallel);
        let seq = search_nonzero_equilibria(&sys, &d, 100, 7, Execution::Sequential);
        assert!(par.nonzero_roots.is_empty());
        assert_eq!(par, seq);
    }
}
