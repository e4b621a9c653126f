//! Dense complex matrix kernel.
//!
//! Matrices are `nalgebra::DMatrix<Complex<f64>>`. Eigen- and singular
//! value decompositions are delegated to nalgebra (Householder
//! tridiagonalisation followed by implicit symmetric QR), which is
//! deterministic for a fixed input.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result, Violation};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

pub const ZERO: C64 = Complex { re: 0.0, im: 0.0 };
pub const ONE: C64 = Complex { re: 1.0, im: 0.0 };
pub const I: C64 = Complex { re: 0.0, im: 1.0 };

/// Acceptance tolerances for density matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub hermitian: f64,
    pub psd: f64,
    pub trace: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            hermitian: 1e-9,
            psd: 1e-9,
            trace: 1e-9,
        }
    }
}

impl Tolerances {
    pub fn uniform(tol: f64) -> Self {
        Tolerances {
            hermitian: tol,
            psd: tol,
            trace: tol,
        }
    }
}

pub fn check_finite(a: &CMatrix) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput("matrix has non-finite entries".into()))
    }
}

pub fn check_square(a: &CMatrix) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::Shape(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(a.nrows())
}

/// Largest entry modulus of `a - a*`.
pub fn hermiticity_error(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Largest entry modulus of `u u* - 1`.
pub fn unitarity_error(u: &CMatrix) -> f64 {
    let n = u.nrows();
    let prod = u * u.adjoint();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { ONE } else { ZERO };
            worst = worst.max((prod[(i, j)] - target).norm());
        }
    }
    worst
}

pub fn check_unitary(u: &CMatrix, tol: f64) -> Result<()> {
    check_square(u)?;
    check_finite(u)?;
    let err = unitarity_error(u);
    if err > tol {
        return Err(Error::InvalidInput(format!(
            "matrix is not unitary (max |uu* - 1| = {err:e})"
        )));
    }
    Ok(())
}

/// Eigenvalues (ascending) and eigenvectors (as columns) of a Hermitian
/// matrix. Only the lower triangle is read.
pub fn hermitian_eigen(a: &CMatrix) -> (DVector<f64>, CMatrix) {
    let eig = a.clone().symmetric_eigen();
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn hermitian_eigenvalues(a: &CMatrix) -> DVector<f64> {
    let mut v: Vec<f64> = a.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    DVector::from_vec(v)
}

pub fn singular_values(a: &CMatrix) -> DVector<f64> {
    a.clone().singular_values()
}

/// Sum of singular values.
pub fn trace_norm(a: &CMatrix) -> Result<f64> {
    check_finite(a)?;
    if a.is_square() && hermiticity_error(a) <= 1e-12 * (1.0 + a.norm()) {
        return Ok(hermitian_eigenvalues(a).iter().map(|x| x.abs()).sum());
    }
    Ok(singular_values(a).iter().sum())
}

/// Half the trace norm of `a - b`; lies in [0, 1] for density matrices.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    Ok(0.5 * trace_norm(&(a - b))?)
}

/// `exp(-i t h)` for Hermitian `h`, via the spectral decomposition.
pub fn matrix_exp_skew(h: &CMatrix, t: f64) -> Result<CMatrix> {
    check_square(h)?;
    check_finite(h)?;
    let dev = hermiticity_error(h);
    if dev > 1e-9 * (1.0 + h.norm()) {
        return Err(Error::InvalidInput(format!(
            "generator is not Hermitian (max |h - h*| = {dev:e})"
        )));
    }
    let (values, vectors) = hermitian_eigen(h);
    let phases = values.map(|lam| Complex::from_polar(1.0, -t * lam));
    let scaled = CMatrix::from_fn(h.nrows(), h.ncols(), |i, j| vectors[(i, j)] * phases[j]);
    Ok(scaled * vectors.adjoint())
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Trace over the first factor of an (n·m)×(n·m) operator on
/// C^n ⊗ C^m, returning an m×m matrix.
pub fn partial_trace_first(rho: &CMatrix, n: usize, m: usize) -> Result<CMatrix> {
    if rho.nrows() != n * m || rho.ncols() != n * m {
        return Err(Error::Shape(format!(
            "operator is {}x{}, expected {}",
            rho.nrows(),
            rho.ncols(),
            n * m
        )));
    }
    Ok(CMatrix::from_fn(m, m, |a, b| {
        (0..n).map(|i| rho[(i * m + a, i * m + b)]).sum()
    }))
}

/// Trace over the second factor, returning an n×n matrix.
pub fn partial_trace_second(rho: &CMatrix, n: usize, m: usize) -> Result<CMatrix> {
    if rho.nrows() != n * m || rho.ncols() != n * m {
        return Err(Error::Shape(format!(
            "operator is {}x{}, expected {}",
            rho.nrows(),
            rho.ncols(),
            n * m
        )));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| {
        (0..m).map(|a| rho[(i * m + a, j * m + a)]).sum()
    }))
}

/// `Tr(a b)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Matrix with standard complex Gaussian entries (real and imaginary
/// parts each N(0, 1/2)).
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex::new(s * re, s * im)
    })
}

/// Random Hermitian matrix from the Gaussian unitary ensemble.
pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let g = ginibre(n, n, rng);
    (&g + g.adjoint()).scale(0.5)
}

/// A validated quantum state: Hermitian, positive semidefinite, unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn maximally_mixed(n: usize) -> Self {
        DensityMatrix {
            matrix: CMatrix::identity(n, n).unscale(n as f64),
        }
    }

    /// Rank-one projector onto basis vector `m` (0-based).
    pub fn basis_projector(n: usize, m: usize) -> Self {
        let mut matrix = CMatrix::zeros(n, n);
        matrix[(m, m)] = ONE;
        DensityMatrix { matrix }
    }

    /// `|psi><psi|` for a (not necessarily normalised) nonzero vector.
    pub fn pure(psi: &DVector<C64>) -> Result<Self> {
        let norm = psi.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidInput("state vector has zero or non-finite norm".into()));
        }
        let v = psi.unscale(norm);
        Ok(DensityMatrix {
            matrix: &v * v.adjoint(),
        })
    }

    /// Random full-rank state `G G* / Tr(G G*)` with Ginibre `G`
    /// (Hilbert–Schmidt measure).
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let g = ginibre(n, n, rng);
        let w = &g * g.adjoint();
        let tr = w.trace().re;
        let mut matrix = w.unscale(tr);
        symmetrize(&mut matrix);
        DensityMatrix { matrix }
    }

    /// Random pure state, Haar-distributed.
    pub fn random_pure<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let g = ginibre(n, 1, rng);
        DensityMatrix::pure(&g.column(0).into_owned()).expect("Gaussian vector is nonzero")
    }

    pub fn purity(&self) -> f64 {
        trace_product(&self.matrix, &self.matrix).re
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    /// Wrap without validation. Callers must guarantee the invariants.
    pub(crate) fn from_trusted(matrix: CMatrix) -> Self {
        DensityMatrix { matrix }
    }
}

/// Replace `m` by `(m + m*)/2`.
pub fn symmetrize(m: &mut CMatrix) {
    let h = (&*m + m.adjoint()).scale(0.5);
    *m = h;
}

/// Check the density-matrix invariants; on failure report the first
/// violated one (Hermiticity, then trace, then positivity).
pub fn validate_density(m: &CMatrix, tol: &Tolerances) -> Result<DensityMatrix> {
    check_square(m)?;
    check_finite(m)?;
    let dev = hermiticity_error(m);
    if dev > tol.hermitian {
        return Err(Error::Violation(Violation::NotHermitian { deviation: dev }));
    }
    let trace = m.trace().re;
    if (trace - 1.0).abs() > tol.trace {
        return Err(Error::Violation(Violation::TraceNotOne { trace }));
    }
    let mut sym = m.clone();
    symmetrize(&mut sym);
    let min = hermitian_eigenvalues(&sym)[0];
    if min < -tol.psd {
        return Err(Error::Violation(Violation::NegativeEigenvalue { eigenvalue: min }));
    }
    Ok(DensityMatrix { matrix: sym })
}

/// Project a Hermitian matrix with unit trace onto the state space by
/// clipping negative eigenvalues and renormalising the trace.
pub fn clip_to_density(m: &CMatrix) -> Result<DensityMatrix> {
    check_square(m)?;
    let mut sym = m.clone();
    symmetrize(&mut sym);
    let (values, vectors) = hermitian_eigen(&sym);
    let clipped: Vec<f64> = values.iter().map(|&x| x.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidInput("no positive spectral weight to project".into()));
    }
    let n = sym.nrows();
    let scaled = CMatrix::from_fn(n, n, |i, j| vectors[(i, j)] * (clipped[j] / total));
    let mut out = scaled * vectors.adjoint();
    symmetrize(&mut out);
    Ok(DensityMatrix { matrix: out })
}

pub fn diag(values: &[f64]) -> CMatrix {
    let n = values.len();
    CMatrix::from_fn(n, n, |i, j| if i == j { Complex::new(values[i], 0.0) } else { ZERO })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        Complex::new(re, im)
    }

    #[test]
    fn trace_norm_of_diagonal_sign_matrix() {
        assert!((trace_norm(&diag(&[1.0, -1.0])).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_pure_states_are_at_trace_norm_two() {
        let r1 = DensityMatrix::basis_projector(2, 0);
        let r2 = DensityMatrix::basis_projector(2, 1);
        let d = trace_norm(&(r1.matrix() - r2.matrix())).unwrap();
        assert!((d - 2.0).abs() < 1e-15);
    }

    #[test]
    fn trace_norm_matches_independent_eigensolve() {
        // Oracle: eigenvalues of the 3x3 Hermitian matrix via the real
        // 6x6 embedding [[A, -B], [B, A]], whose spectrum is that of
        // A + iB with every eigenvalue doubled.
        let mut rng = stream(11, 0);
        for _ in 0..20 {
            let h = random_hermitian(3, &mut rng);
            let real = nalgebra::DMatrix::<f64>::from_fn(6, 6, |i, j| {
                let z = h[(i % 3, j % 3)];
                match (i < 3, j < 3) {
                    (true, true) | (false, false) => z.re,
                    (true, false) => -z.im,
                    (false, true) => z.im,
                }
            });
            let ev = real.symmetric_eigenvalues();
            let expected: f64 = ev.iter().map(|x| x.abs()).sum::<f64>() / 2.0;
            // Also exercise the SVD branch.
            let svd_sum: f64 = singular_values(&h).iter().sum();
            assert!((trace_norm(&h).unwrap() - expected).abs() < 1e-10);
            assert!((svd_sum - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn trace_norm_rejects_non_finite() {
        let mut m = diag(&[1.0, 0.0]);
        m[(0, 1)] = c(f64::NAN, 0.0);
        assert!(matches!(trace_norm(&m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn validate_accepts_maximally_mixed() {
        let m = CMatrix::identity(2, 2).scale(0.5);
        assert!(validate_density(&m, &Tolerances::default()).is_ok());
    }

    #[test]
    fn validate_reports_negative_eigenvalue() {
        match validate_density(&diag(&[1.2, -0.2]), &Tolerances::default()) {
            Err(Error::Violation(Violation::NegativeEigenvalue { eigenvalue })) => {
                assert!((eigenvalue + 0.2).abs() < 1e-12)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validate_two_level_determinant_condition() {
        // lambda = (0.3, 0.7), alpha = 0.4: lambda1 lambda2 - |alpha|^2 = 0.05 >= 0.
        let det = 0.3 * 0.7 - 0.4f64.powi(2);
        assert!(det >= 0.0);
        let mut m = diag(&[0.3, 0.7]);
        m[(0, 1)] = c(0.4, 0.0);
        m[(1, 0)] = c(0.4, 0.0);
        assert!(validate_density(&m, &Tolerances::default()).is_ok());
        // Beyond the disc the determinant turns negative and so does an eigenvalue.
        m[(0, 1)] = c(0.3, 0.35);
        m[(1, 0)] = c(0.3, -0.35);
        assert!(matches!(
            validate_density(&m, &Tolerances::default()),
            Err(Error::Violation(Violation::NegativeEigenvalue { .. }))
        ));
    }

    #[test]
    fn validate_rejects_non_square_and_non_hermitian() {
        let rect = CMatrix::zeros(2, 3);
        assert!(matches!(validate_density(&rect, &Tolerances::default()), Err(Error::Shape(_))));
        let mut m = diag(&[0.5, 0.5]);
        m[(0, 1)] = c(0.1, 0.0);
        assert!(matches!(
            validate_density(&m, &Tolerances::default()),
            Err(Error::Violation(Violation::NotHermitian { .. }))
        ));
        let m = diag(&[0.5, 0.6]);
        assert!(matches!(
            validate_density(&m, &Tolerances::default()),
            Err(Error::Violation(Violation::TraceNotOne { .. }))
        ));
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let u = matrix_exp_skew(&CMatrix::zeros(3, 3), 1.7).unwrap();
        assert!((u - CMatrix::identity(3, 3)).norm() < 1e-15);
    }

    #[test]
    fn exp_of_sigma3_at_pi_is_minus_identity() {
        let u = matrix_exp_skew(&diag(&[1.0, -1.0]), PI).unwrap();
        assert!((u + CMatrix::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn exp_rejects_non_hermitian() {
        let mut h = diag(&[1.0, 0.0]);
        h[(0, 1)] = ONE;
        assert!(matches!(matrix_exp_skew(&h, 1.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn partial_traces_of_product() {
        let mut rng = stream(3, 0);
        let a = DensityMatrix::random(2, &mut rng);
        let b = DensityMatrix::random(3, &mut rng);
        let ab = kron(a.matrix(), b.matrix());
        assert!((partial_trace_first(&ab, 2, 3).unwrap() - b.matrix()).norm() < 1e-14);
        assert!((partial_trace_second(&ab, 2, 3).unwrap() - a.matrix()).norm() < 1e-14);
    }

    #[test]
    fn clip_projects_onto_states() {
        let p = clip_to_density(&diag(&[1.2, -0.2])).unwrap();
        assert!((p.matrix() - diag(&[1.0, 0.0])).norm() < 1e-14);
    }

    fn arb_hermitian(n: usize) -> impl Strategy<Value = CMatrix> {
        any::<u64>().prop_map(move |seed| random_hermitian(n, &mut stream(seed, 0)))
    }

    proptest! {
        #[test]
        fn trace_norm_is_a_norm(a in arb_hermitian(3), b in arb_hermitian(3), s in -3.0f64..3.0) {
            let na = trace_norm(&a).unwrap();
            let nb = trace_norm(&b).unwrap();
            prop_assert!(na >= 0.0);
            prop_assert!((trace_norm(&a.scale(s)).unwrap() - s.abs() * na).abs() < 1e-9);
            prop_assert!(trace_norm(&(&a + &b)).unwrap() <= na + nb + 1e-9);
            // Non-Hermitian combination goes through the SVD branch.
            let z = &a + b.map(|x| x * I);
            prop_assert!(trace_norm(&z).unwrap() <= na + nb + 1e-9);
        }

        #[test]
        fn state_distances_are_bounded(seed in any::<u64>(), n in 2usize..6) {
            let mut rng = stream(seed, 0);
            let r1 = DensityMatrix::random(n, &mut rng);
            let r2 = DensityMatrix::random_pure(n, &mut rng);
            let d = trace_norm(&(r1.matrix() - r2.matrix())).unwrap();
            prop_assert!((0.0..=2.0 + 1e-12).contains(&d));
        }

        #[test]
        fn exp_is_unitary_and_invertible(h in arb_hermitian(4), t in -5.0f64..5.0) {
            let u = matrix_exp_skew(&h, t).unwrap();
            let v = matrix_exp_skew(&h, -t).unwrap();
            prop_assert!(unitarity_error(&u) < 1e-10);
            prop_assert!((&u * &v - CMatrix::identity(4, 4)).norm() < 1e-10);
        }
    }
}
