//! Small dense real-matrix numerics: spectra, definiteness tests, inversion
//! and the continuous Lyapunov equation.
//!
//! Everything here is sized for state dimensions up to ~20. Storage is
//! nalgebra's `DMatrix<f64>`; the functions in this module add the checks
//! (finiteness, symmetry, Hurwitz premise, conditioning) that the design
//! layer relies on.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative threshold used by the definiteness tests unless told otherwise.
pub const DEFAULT_DEFINITENESS_TOL: f64 = 1e-10;
/// `‖s − sᵀ‖∞ ≤ SYMMETRY_TOL · ‖s‖∞` counts as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-9;
/// Largest 2-norm condition number `invert` accepts.
pub const MAX_CONDITION: f64 = 1e12;

const SCHUR_EPS: f64 = 1e-14;
const SCHUR_MAX_ITER: usize = 10_000;

/// Builds a matrix from row arrays, rejecting ragged or non-finite input.
pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(Error::Dimension("matrix must have at least one row and column".into()));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(Error::Dimension(format!(
            "row {i} has {} entries, expected {ncols}",
            r.len()
        )));
    }
    let m = Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]);
    ensure_finite(&m, "matrix")?;
    Ok(m)
}

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn ensure_finite(m: &Matrix, what: &str) -> Result<()> {
    match m.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(k) => Err(Error::Contract(format!(
            "{what} has a non-finite entry at ({}, {})",
            k % m.nrows(),
            k / m.nrows()
        ))),
    }
}

/// Induced infinity norm (maximum absolute row sum).
pub fn inf_norm(m: &Matrix) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn require_square(m: &Matrix, what: &str) -> Result<usize> {
    if m.is_square() {
        Ok(m.nrows())
    } else {
        Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// Eigenvalues of a real square matrix, sorted by real part and then by
/// imaginary part.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: Vec<Complex<f64>>,
}

impl Spectrum {
    pub fn new(mut values: Vec<Complex<f64>>) -> Self {
        values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        Self { values }
    }

    pub fn values(&self) -> &[Complex<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_real(&self) -> f64 {
        self.values.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_real(&self) -> f64 {
        self.values.iter().map(|z| z.re).fold(f64::INFINITY, f64::min)
    }
}

pub fn eigenvalues(m: &Matrix) -> Result<Spectrum> {
    require_square(m, "eigenvalue input")?;
    ensure_finite(m, "eigenvalue input")?;
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), SCHUR_EPS, SCHUR_MAX_ITER)
        .ok_or_else(|| {
            Error::Numerical(format!(
                "Schur iteration did not converge in {SCHUR_MAX_ITER} sweeps (n = {}, ‖m‖∞ = {:e})",
                m.nrows(),
                inf_norm(m)
            ))
        })?;
    Ok(Spectrum::new(schur.complex_eigenvalues().iter().copied().collect()))
}

/// True iff every eigenvalue has real part below `-margin`.
pub fn is_hurwitz(m: &Matrix, margin: f64) -> Result<bool> {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail
    if !(margin >= 0.0) {
        return Err(Error::Contract(format!("Hurwitz margin must be >= 0, got {margin}")));
    }
    Ok(eigenvalues(m)?.max_real() < -margin)
}

/// Checks symmetry within [`SYMMETRY_TOL`] and returns `(s + sᵀ)/2`.
pub fn symmetrized(s: &Matrix) -> Result<Matrix> {
    require_square(s, "symmetric input")?;
    ensure_finite(s, "symmetric input")?;
    let skew = inf_norm(&(s - s.transpose()));
    let scale = inf_norm(s);
    if skew > SYMMETRY_TOL * scale {
        return Err(Error::Contract(format!(
            "matrix is not symmetric: ‖s − sᵀ‖∞ = {skew:e} exceeds {SYMMETRY_TOL:e}·‖s‖∞"
        )));
    }
    Ok((s + s.transpose()) * 0.5)
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn symmetric_extremes(s: &Matrix) -> Result<(f64, f64)> {
    let s = symmetrized(s)?;
    let ev = s.symmetric_eigenvalues();
    let lo = ev.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

fn definiteness_threshold(s: &Matrix, tol: f64) -> f64 {
    tol * inf_norm(s).max(1.0)
}

/// `λ_min(s) > tol · max(1, ‖s‖∞)`.
pub fn is_positive_definite(s: &Matrix, tol: f64) -> Result<bool> {
    let (lo, _) = symmetric_extremes(s)?;
    Ok(lo > definiteness_threshold(s, tol))
}

/// `λ_min(s) ≥ −tol · max(1, ‖s‖∞)`.
pub fn is_positive_semidefinite(s: &Matrix, tol: f64) -> Result<bool> {
    let (lo, _) = symmetric_extremes(s)?;
    Ok(lo >= -definiteness_threshold(s, tol))
}

fn symmetric_part(m: &Matrix) -> Result<Matrix> {
    require_square(m, "quadratic-form input")?;
    ensure_finite(m, "quadratic-form input")?;
    Ok(m + m.transpose())
}

/// `vᵀ m v < 0` for all nonzero `v`, tested as `−(m + mᵀ)` positive definite.
pub fn is_negative_definite_quadform(m: &Matrix, tol: f64) -> Result<bool> {
    is_positive_definite(&-symmetric_part(m)?, tol)
}

/// `vᵀ m v ≤ 0` for all `v`, up to the relative tolerance.
pub fn is_negative_semidefinite_quadform(m: &Matrix, tol: f64) -> Result<bool> {
    is_positive_semidefinite(&-symmetric_part(m)?, tol)
}

/// Largest eigenvalue of `m + mᵀ`; negative iff the quadratic form of `m`
/// is negative definite.
pub fn quadform_upper_margin(m: &Matrix) -> Result<f64> {
    Ok(symmetric_extremes(&symmetric_part(m)?)?.1)
}

/// Singular-value rank with threshold `rel_tol · σ_max`.
pub fn numerical_rank(m: &Matrix, rel_tol: f64) -> usize {
    let sv = m.singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// 2-norm condition number `σ_max / σ_min` (infinite when singular).
pub fn condition_number(m: &Matrix) -> f64 {
    let sv = m.singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if smin == 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

pub fn invert(m: &Matrix) -> Result<Matrix> {
    require_square(m, "matrix to invert")?;
    ensure_finite(m, "matrix to invert")?;
    let cond = condition_number(m);
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail
    if !(cond <= MAX_CONDITION) {
        return Err(Error::Numerical(format!(
            "matrix is singular or ill-conditioned (condition estimate {cond:e})"
        )));
    }
    m.clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Numerical(format!("LU inverse failed (condition estimate {cond:e})")))
}

/// Solves `m x = rhs` by LU with one step of iterative refinement.
pub fn solve(m: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    require_square(m, "system matrix")?;
    if rhs.nrows() != m.nrows() {
        return Err(Error::Dimension(format!(
            "right-hand side has {} rows, system has {}",
            rhs.nrows(),
            m.nrows()
        )));
    }
    let lu = m.clone().lu();
    let mut x = lu
        .solve(rhs)
        .ok_or_else(|| Error::Numerical("singular linear system".into()))?;
    // iterative refinement; stop once the residual no longer shrinks
    let mut r = rhs - m * &x;
    for _ in 0..3 {
        let Some(dx) = lu.solve(&r) else { break };
        let candidate = &x + dx;
        let next = rhs - m * &candidate;
        if next.amax() >= r.amax() {
            break;
        }
        x = candidate;
        r = next;
    }
    Ok(x)
}

/// Solves `fᵀ P + P f = −q` for symmetric positive-definite `P`.
///
/// `f` must be Hurwitz and `q` symmetric positive definite. The n²×n²
/// Kronecker system is solved directly, which is fine at the sizes this
/// crate targets.
pub fn solve_lyapunov(f: &Matrix, q: &Matrix) -> Result<Matrix> {
    let n = require_square(f, "Lyapunov state matrix")?;
    if q.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "Lyapunov weight is {}x{}, expected {n}x{n}",
            q.nrows(),
            q.ncols()
        )));
    }
    let spectrum = eigenvalues(f)?;
    if spectrum.max_real() >= 0.0 {
        return Err(Error::Design(format!(
            "Lyapunov premise violated: state matrix is not Hurwitz (max real part {:e})",
            spectrum.max_real()
        )));
    }
    let q = symmetrized(q)?;
    if !is_positive_definite(&q, DEFAULT_DEFINITENESS_TOL)? {
        return Err(Error::Contract("Lyapunov weight Q must be positive definite".into()));
    }

    let eye = Matrix::identity(n, n);
    let ft = f.transpose();
    // column-major vec: vec(fᵀP) = (I ⊗ fᵀ) vec(P), vec(P f) = (fᵀ ⊗ I) vec(P)
    let kron = eye.kronecker(&ft) + ft.kronecker(&eye);
    let rhs = Matrix::from_column_slice(n * n, 1, q.as_slice()) * -1.0;
    let x = solve(&kron, &rhs)?;
    let p = Matrix::from_column_slice(n, n, x.as_slice());
    let p = (&p + p.transpose()) * 0.5;

    let residual = inf_norm(&(&ft * &p + &p * f + &q));
    if residual > 1e-8 * inf_norm(&q) {
        return Err(Error::Numerical(format!(
            "Lyapunov residual {residual:e} exceeds 1e-8·‖Q‖∞"
        )));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m(rows: &[&[f64]]) -> Matrix {
        from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn ex1_closed() -> Matrix {
        m(&[&[-7.0, 1.0], &[-10.0, 0.0]])
    }

    #[test]
    fn from_rows_rejects_ragged_and_nan() {
        assert!(matches!(
            from_rows(&[vec![1.0, 2.0], vec![3.0]]),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            from_rows(&[vec![1.0, f64::NAN]]),
            Err(Error::Contract(_))
        ));
        assert!(from_rows(&[]).is_err());
    }

    #[test]
    fn identity_spectrum() {
        let s = eigenvalues(&Matrix::identity(3, 3)).unwrap();
        assert_eq!(s.len(), 3);
        for z in s.values() {
            assert_abs_diff_eq!(z.re, 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn example_one_observer_poles() {
        let s = eigenvalues(&ex1_closed()).unwrap();
        assert_abs_diff_eq!(s.values()[0].re, -5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.values()[1].re, -2.0, epsilon = 1e-12);
    }

    #[test]
    fn eigenvalues_rejects_rectangular() {
        assert!(matches!(
            eigenvalues(&Matrix::zeros(2, 3)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn hurwitz_cases() {
        assert!(is_hurwitz(&(-Matrix::identity(2, 2)), 0.0).unwrap());
        let a3 = m(&[&[0.1, -2.0, 0.0], &[0.3, 0.0, -1.0], &[0.1, 0.2, 3.0]]);
        assert!(!is_hurwitz(&a3, 0.0).unwrap());
        assert!(!is_hurwitz(&(-Matrix::identity(2, 2)), 1.0).unwrap());
        assert!(is_hurwitz(&Matrix::identity(1, 1), -1.0).is_err());
    }

    #[test]
    fn example_two_printed_gain_is_hurwitz() {
        let a = m(&[&[-0.1, -0.2, 0.0], &[0.3, 0.0, 0.0], &[0.1, 0.2, -3.0]]);
        let c = m(&[&[1.0, 1.0, 2.0]]);
        let l = m(&[&[583.7712], &[-519.9601], &[-13.4556]]);
        assert!(is_hurwitz(&(a - l * c), 0.0).unwrap());
    }

    #[test]
    fn positive_definite_cases() {
        let tol = DEFAULT_DEFINITENESS_TOL;
        assert!(is_positive_definite(&Matrix::identity(2, 2), tol).unwrap());
        let p1 = m(&[&[7.8571, -5.0], &[-5.0, 4.2857]]);
        assert!(is_positive_definite(&p1, tol).unwrap());
        assert!(!is_positive_definite(&m(&[&[1.0, 2.0], &[2.0, 1.0]]), tol).unwrap());
        assert!(matches!(
            is_positive_definite(&m(&[&[1.0, 2.0], &[0.0, 1.0]]), tol),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn near_symmetric_input_is_accepted() {
        let s = m(&[&[2.0, 1.0 + 1e-12], &[1.0, 2.0]]);
        assert!(is_positive_definite(&s, DEFAULT_DEFINITENESS_TOL).unwrap());
    }

    #[test]
    fn negative_definite_quadform_cases() {
        let tol = DEFAULT_DEFINITENESS_TOL;
        assert!(is_negative_definite_quadform(&(-Matrix::identity(3, 3)), tol).unwrap());
        let p1 = m(&[&[7.8571, -5.0], &[-5.0, 4.2857]]);
        assert!(is_negative_definite_quadform(&(p1 * ex1_closed()), tol).unwrap());
        let skew = m(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        assert!(!is_negative_definite_quadform(&skew, tol).unwrap());
        assert!(is_negative_semidefinite_quadform(&skew, tol).unwrap());
    }

    #[test]
    fn lyapunov_trivial() {
        let p = solve_lyapunov(&(-Matrix::identity(2, 2)), &(Matrix::identity(2, 2) * 2.0)).unwrap();
        assert_abs_diff_eq!(p, Matrix::identity(2, 2), epsilon = 1e-14);
    }

    #[test]
    fn lyapunov_example_one() {
        let f = ex1_closed();
        let q = Matrix::identity(2, 2) * 10.0;
        let p = solve_lyapunov(&f, &q).unwrap();
        let expected = m(&[&[7.8571, -5.0], &[-5.0, 4.2857]]);
        assert_abs_diff_eq!(p, expected, epsilon = 5e-4);
        assert_eq!(p, p.transpose());
        let residual = inf_norm(&(f.transpose() * &p + &p * &f + &q));
        assert!(residual <= 1e-8 * 10.0, "residual {residual:e}");
    }

    #[test]
    fn lyapunov_rejects_unstable_and_indefinite_weight() {
        let unstable = m(&[&[1.0, 0.0], &[0.0, -1.0]]);
        assert!(matches!(
            solve_lyapunov(&unstable, &Matrix::identity(2, 2)),
            Err(Error::Design(msg)) if msg.contains("Lyapunov premise violated")
        ));
        let indefinite = m(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert!(matches!(
            solve_lyapunov(&ex1_closed(), &indefinite),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn invert_cases() {
        assert_eq!(invert(&Matrix::identity(4, 4)).unwrap(), Matrix::identity(4, 4));
        let d = invert(&m(&[&[2.0, 0.0], &[0.0, 4.0]])).unwrap();
        assert_abs_diff_eq!(d, m(&[&[0.5, 0.0], &[0.0, 0.25]]), epsilon = 1e-15);
        // adjugate by hand: det = 7.8571·4.2857 − 25 = 8.67357...
        let p1 = m(&[&[7.8571, -5.0], &[-5.0, 4.2857]]);
        let det = 7.8571 * 4.2857 - 25.0;
        let expected = m(&[&[4.2857, 5.0], &[5.0, 7.8571]]) / det;
        assert_abs_diff_eq!(invert(&p1).unwrap(), expected, epsilon = 1e-4);
    }

    #[test]
    fn invert_rejects_singular() {
        let s = m(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(matches!(invert(&s), Err(Error::Numerical(msg)) if msg.contains("condition")));
    }

    #[test]
    fn rank_threshold() {
        assert_eq!(numerical_rank(&m(&[&[1.0, 0.0], &[1.0, 0.0]]), 1e-9), 1);
        assert_eq!(numerical_rank(&Matrix::identity(3, 3), 1e-9), 3);
        assert_eq!(numerical_rank(&Matrix::zeros(2, 2), 1e-9), 0);
    }
}
