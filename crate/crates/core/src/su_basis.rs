//! Normalised su(N) generators, the adjoint representation and the
//! special unitaries used by the finite reconstruction protocols.
//!
//! Generators satisfy `Tr(E_k E_l) = 2 δ_kl` and are ordered as
//!
//! 1. Cartan: `E_1 = sqrt(2N/(N-1)) (P_1 - 1/N)`, then the remaining
//!    diagonal generators;
//! 2. symmetric roots `|i><j| + |j><i|`, `i < j` lexicographic;
//! 3. antisymmetric roots `-i|i><j| + i|j><i|`, `i < j` lexicographic.
//!
//! For N = 2 this is (σ₃, σ₁, σ₂).

use nalgebra::{Complex, DMatrix};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::json::MatrixJson;
use crate::linalg::{check_unitary, ginibre, trace_product, CMatrix, C64, I, ONE, ZERO};

/// Unitarity tolerance for frames passed in by callers.
pub const UNITARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Cartan,
    Root,
}

/// Off-diagonal support of a root generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RootLabel {
    pub i: usize,
    pub j: usize,
    pub symmetric: bool,
}

#[derive(Debug, Clone)]
pub struct HermitianBasis {
    dim: usize,
    generators: Vec<CMatrix>,
    roots: Vec<Option<RootLabel>>,
}

impl HermitianBasis {
    pub fn new(n: usize) -> Result<Self> {
        build_basis(n)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of generators, N² − 1.
    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn generators(&self) -> &[CMatrix] {
        &self.generators
    }

    pub fn generator(&self, k: usize) -> &CMatrix {
        &self.generators[k]
    }

    pub fn kind(&self, k: usize) -> GeneratorKind {
        if self.roots[k].is_some() {
            GeneratorKind::Root
        } else {
            GeneratorKind::Cartan
        }
    }

    pub fn root_label(&self, k: usize) -> Option<RootLabel> {
        self.roots.get(k).copied().flatten()
    }

    pub fn cartan_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.roots[k].is_none()).collect()
    }

    pub fn root_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.roots[k].is_some()).collect()
    }

    /// Components `Tr(a E_k)`.
    pub fn components(&self, a: &CMatrix) -> Vec<C64> {
        self.generators.iter().map(|e| trace_product(a, e)).collect()
    }

    /// Real components `Re Tr(rho E_k)` of a Hermitian operator.
    pub fn bloch(&self, rho: &CMatrix) -> Vec<f64> {
        self.generators.iter().map(|e| trace_product(rho, e).re).collect()
    }

    /// `trace/N · 1 + ½ Σ_k c_k E_k`, the inverse of [`Self::bloch`] for
    /// an operator of the given trace.
    pub fn synthesize(&self, trace: f64, components: &[f64]) -> CMatrix {
        let n = self.dim;
        let mut m = CMatrix::identity(n, n).scale(trace / n as f64);
        for (c, e) in components.iter().zip(&self.generators) {
            m += e.scale(0.5 * c);
        }
        m
    }

    /// JSON export: a list of `{"index", "kind", "matrix"}` records.
    pub fn export(&self) -> Vec<GeneratorRecord> {
        (0..self.len())
            .map(|k| GeneratorRecord {
                index: k + 1,
                kind: self.kind(k),
                matrix: MatrixJson::from(&self.generators[k]),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GeneratorRecord {
    /// 1-based generator index.
    pub index: usize,
    pub kind: GeneratorKind,
    pub matrix: MatrixJson,
}

pub fn build_basis(n: usize) -> Result<HermitianBasis> {
    if n < 2 {
        return Err(Error::InvalidDimension(n));
    }
    let mut generators = Vec::with_capacity(n * n - 1);
    let mut roots = Vec::with_capacity(n * n - 1);

    // Diagonal generators built on the reversed index order so that the
    // last one is proportional to P_1 - 1/N; it is emitted first.
    let diagonal = |l: usize| -> CMatrix {
        let s = (2.0 / (l * (l + 1)) as f64).sqrt();
        let mut m = CMatrix::zeros(n, n);
        for i in (n - l)..n {
            m[(i, i)] = Complex::new(s, 0.0);
        }
        m[(n - 1 - l, n - 1 - l)] = Complex::new(-s * l as f64, 0.0);
        m
    };
    generators.push(-diagonal(n - 1));
    roots.push(None);
    for l in 1..n - 1 {
        generators.push(diagonal(l));
        roots.push(None);
    }
    for symmetric in [true, false] {
        for i in 0..n {
            for j in i + 1..n {
                let mut m = CMatrix::zeros(n, n);
                if symmetric {
                    m[(i, j)] = ONE;
                    m[(j, i)] = ONE;
                } else {
                    m[(i, j)] = -I;
                    m[(j, i)] = I;
                }
                generators.push(m);
                roots.push(Some(RootLabel { i, j, symmetric }));
            }
        }
    }
    Ok(HermitianBasis {
        dim: n,
        generators,
        roots,
    })
}

/// Real orthogonal matrix of the adjoint action, `D_kl = ½ Tr(E_k u E_l u*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointMatrix(pub DMatrix<f64>);

impl AdjointMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

pub fn adjoint_rep(u: &CMatrix, basis: &HermitianBasis) -> Result<AdjointMatrix> {
    check_frame(u, basis.dim())?;
    let d = basis.len();
    let ud = u.adjoint();
    let rotated: Vec<CMatrix> = basis.generators.iter().map(|e| u * e * &ud).collect();
    let mut out = DMatrix::zeros(d, d);
    for k in 0..d {
        for (l, r) in rotated.iter().enumerate() {
            let z = trace_product(&basis.generators[k], r) * 0.5;
            if z.im.abs() > 1e-10 {
                return Err(Error::Consistency(format!(
                    "adjoint entry ({k},{l}) has imaginary part {:e}",
                    z.im
                )));
            }
            out[(k, l)] = z.re;
        }
    }
    Ok(AdjointMatrix(out))
}

/// First column of the adjoint matrix, `D_k1(u)`.
pub fn adjoint_first_column(u: &CMatrix, basis: &HermitianBasis) -> Vec<f64> {
    let r = u * &basis.generators[0] * u.adjoint();
    basis.generators.iter().map(|e| 0.5 * trace_product(e, &r).re).collect()
}

pub(crate) fn check_frame(u: &CMatrix, n: usize) -> Result<()> {
    if u.nrows() != n || u.ncols() != n {
        return Err(Error::Shape(format!(
            "frame is {}x{}, expected {n}x{n}",
            u.nrows(),
            u.ncols()
        )));
    }
    check_unitary(u, UNITARY_TOL)
}

/// `u P_1 u*`, cross-checked against the expansion
/// `sqrt((N-1)/(2N)) Σ_k E_k D_k1(u) + 1/N`.
pub fn orbit_point(u: &CMatrix, basis: &HermitianBasis) -> Result<CMatrix> {
    let n = basis.dim();
    check_frame(u, n)?;
    let col = u.column(0);
    let direct = col * col.adjoint();
    let coeff = ((n - 1) as f64 / (2 * n) as f64).sqrt();
    let d1 = adjoint_first_column(u, basis);
    let mut expansion = CMatrix::identity(n, n).unscale(n as f64);
    for (e, d) in basis.generators.iter().zip(d1) {
        expansion += e.scale(coeff * d);
    }
    let gap = (&direct - &expansion).camax();
    if gap > 1e-9 {
        return Err(Error::Consistency(format!(
            "orbit expansion differs from u P1 u* by {gap:e}"
        )));
    }
    Ok(direct)
}

/// Haar-distributed unitary: QR of a Ginibre matrix with the phases of
/// diag(R) moved into Q.
pub fn haar_sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let z = ginibre(n, n, rng);
    let qr = z.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Unitary `u_k` with `u_k* Ẽ_k u_k = P_i - P_j` for the root
/// `Ẽ_k` supported on `(i, j)`: the eigenvector matrix of Ẽ_k, a
/// Givens-type rotation in the (i, j) plane.
pub fn root_rotation(k: usize, basis: &HermitianBasis) -> Result<CMatrix> {
    let label = basis.root_label(k).ok_or_else(|| Error::Index {
        index: k,
        reason: format!("not a root index of su({})", basis.dim()),
    })?;
    Ok(plane_rotation(basis.dim(), label))
}

fn plane_rotation(n: usize, RootLabel { i, j, symmetric }: RootLabel) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let c = if symmetric { ONE } else { I };
    let mut u = CMatrix::identity(n, n);
    // Column i: (|i> + c|j>)/√2, eigenvalue +1. Column j: (|i> - c|j>)/√2.
    u[(i, i)] = Complex::new(s, 0.0);
    u[(j, i)] = c * s;
    u[(i, j)] = Complex::new(s, 0.0);
    u[(j, j)] = -c * s;
    u
}

/// Cyclic shift `Σ_s |s+k-1><s|` (indices mod N), mapping P_1 to P_k.
/// `k` is 1-based.
pub fn shift_unitary(k: usize, n: usize) -> Result<CMatrix> {
    if k == 0 || k > n {
        return Err(Error::Index {
            index: k,
            reason: format!("shift index must lie in 1..={n}"),
        });
    }
    let mut u = CMatrix::from_element(n, n, ZERO);
    for s in 0..n {
        u[((s + k - 1) % n, s)] = ONE;
    }
    Ok(u)
}

/// Frobenius norm of the off-diagonal part.
pub fn off_diagonal_norm(a: &CMatrix) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            if i != j {
                acc += a[(i, j)].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, unitarity_error};
    use crate::rng::stream;

    fn gram(basis: &HermitianBasis) -> DMatrix<f64> {
        let d = basis.len();
        DMatrix::from_fn(d, d, |k, l| trace_product(basis.generator(k), basis.generator(l)).re)
    }

    #[test]
    fn su2_basis_is_sigma3_sigma1_sigma2() {
        let b = build_basis(2).unwrap();
        assert_eq!(b.generator(0), &diag(&[1.0, -1.0]));
        let mut s1 = CMatrix::zeros(2, 2);
        s1[(0, 1)] = ONE;
        s1[(1, 0)] = ONE;
        let mut s2 = CMatrix::zeros(2, 2);
        s2[(0, 1)] = -I;
        s2[(1, 0)] = I;
        assert_eq!(b.generator(1), &s1);
        assert_eq!(b.generator(2), &s2);
    }

    #[test]
    fn first_generator_matches_projector_formula() {
        for n in 2..=6 {
            let b = build_basis(n).unwrap();
            let mut p1 = CMatrix::zeros(n, n);
            p1[(0, 0)] = ONE;
            let nn = n as f64;
            let e1 = (p1 - CMatrix::identity(n, n).unscale(nn)).scale((2.0 * nn / (nn - 1.0)).sqrt());
            assert!((b.generator(0) - e1).norm() < 1e-14);
        }
    }

    #[test]
    fn su3_has_eight_traceless_generators_with_gram_2i() {
        let b = build_basis(3).unwrap();
        assert_eq!(b.len(), 8);
        for e in b.generators() {
            assert!(e.trace().norm() < 1e-14);
        }
        assert!((gram(&b) - DMatrix::identity(8, 8).scale(2.0)).camax() < 1e-10);
    }

    #[test]
    fn partition_sizes() {
        let b = build_basis(4).unwrap();
        assert_eq!(b.cartan_indices().len(), 3);
        assert_eq!(b.root_indices().len(), 12);
    }

    #[test]
    fn gram_and_cartan_commutation_for_small_n() {
        for n in 2..=6 {
            let b = build_basis(n).unwrap();
            let d = n * n - 1;
            assert!((gram(&b) - DMatrix::identity(d, d).scale(2.0)).camax() < 1e-10);
            let cartan = b.cartan_indices();
            for &x in &cartan {
                for &y in &cartan {
                    let (ex, ey) = (b.generator(x), b.generator(y));
                    assert!((ex * ey - ey * ex).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn rejects_dimension_below_two() {
        assert!(matches!(build_basis(1), Err(Error::InvalidDimension(1))));
    }

    #[test]
    fn adjoint_of_identity_and_of_phase() {
        let b = build_basis(3).unwrap();
        let id = adjoint_rep(&CMatrix::identity(3, 3), &b).unwrap();
        assert!((id.0.clone() - DMatrix::identity(8, 8)).camax() < 1e-14);
        let phase = CMatrix::identity(3, 3) * Complex::from_polar(1.0, 0.77);
        let dp = adjoint_rep(&phase, &b).unwrap();
        assert!((dp.0 - DMatrix::identity(8, 8)).camax() < 1e-14);
    }

    #[test]
    fn adjoint_is_a_homomorphism_into_so() {
        let mut rng = stream(5, 0);
        for n in 2..=4 {
            let b = build_basis(n).unwrap();
            for _ in 0..10 {
                let u = haar_sample(n, &mut rng);
                let v = haar_sample(n, &mut rng);
                let du = adjoint_rep(&u, &b).unwrap().0;
                let dv = adjoint_rep(&v, &b).unwrap().0;
                let duv = adjoint_rep(&(&u * &v), &b).unwrap().0;
                assert!((&duv - &du * &dv).camax() < 1e-9);
                let d = du.nrows();
                assert!((du.transpose() * &du - DMatrix::identity(d, d)).camax() < 1e-9);
                assert!((du.determinant() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn adjoint_rejects_non_unitary() {
        let b = build_basis(2).unwrap();
        assert!(matches!(adjoint_rep(&diag(&[1.0, 2.0]), &b), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn orbit_point_at_identity_is_p1() {
        let b = build_basis(4).unwrap();
        let p = orbit_point(&CMatrix::identity(4, 4), &b).unwrap();
        assert!((p - diag(&[1.0, 0.0, 0.0, 0.0])).norm() < 1e-14);
    }

    #[test]
    fn orbit_point_of_hadamard_rotation() {
        // Direct conjugation: H P1 H* = ½(1 + σ₁).
        let b = build_basis(2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let h = CMatrix::from_row_slice(2, 2, &[s, s, s, -s].map(|x| Complex::new(x, 0.0)));
        let p = orbit_point(&h, &b).unwrap();
        let expected = CMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5].map(|x| Complex::new(x, 0.0)));
        assert!((p - expected).camax() < 1e-12);
    }

    #[test]
    fn orbit_points_are_rank_one_projectors_and_expansion_holds() {
        let mut rng = stream(9, 0);
        for n in 2..=5 {
            let b = build_basis(n).unwrap();
            for _ in 0..100 {
                let u = haar_sample(n, &mut rng);
                let p = orbit_point(&u, &b).unwrap();
                assert!((&p * &p - &p).camax() < 1e-9);
                assert!((p.trace().re - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn stabilizer_blocks_leave_orbit_point_fixed() {
        let mut rng = stream(10, 0);
        for n in 2..=5 {
            let b = build_basis(n).unwrap();
            for _ in 0..10 {
                let u = haar_sample(n, &mut rng);
                let inner = haar_sample(n - 1, &mut rng);
                let mut w = CMatrix::identity(n, n);
                w.view_mut((1, 1), (n - 1, n - 1)).copy_from(&inner);
                let a = orbit_point(&u, &b).unwrap();
                let c = orbit_point(&(&u * &w), &b).unwrap();
                assert!((a - c).camax() < 1e-10);
            }
        }
    }

    #[test]
    fn haar_samples_are_unitary_and_reproducible() {
        let u = haar_sample(4, &mut stream(1, 0));
        let v = haar_sample(4, &mut stream(1, 0));
        assert_eq!(u, v);
        assert!(unitarity_error(&u) < 1e-10);
        for j in 0..4 {
            assert!((u.column(j).norm() - 1.0).abs() < 1e-10);
        }
        assert_eq!(haar_sample(1, &mut stream(1, 0)).nrows(), 1);
    }

    #[test]
    fn haar_adjoint_entries_average_to_zero() {
        // No trivial component in the adjoint representation: every
        // D_kl averages to zero. Per-sample variance of D_kl is
        // 1/(N²-1), so the 3σ band is 3/sqrt((N²-1) M).
        let n = 2;
        let m = 100_000;
        let b = build_basis(n).unwrap();
        let mut rng = stream(2024, 0);
        let d = b.len();
        let mut sum = DMatrix::<f64>::zeros(d, d);
        for _ in 0..m {
            sum += adjoint_rep(&haar_sample(n, &mut rng), &b).unwrap().0;
        }
        let band = 3.0 / ((d * m) as f64).sqrt();
        assert!((sum / m as f64).camax() < band);
    }

    #[test]
    fn haar_is_left_invariant_in_distribution() {
        // Moments E|u_11|² = 1/N and E|u_11|⁴ = 2/(N(N+1)) are unchanged by
        // a fixed left factor.
        let n = 3;
        let m = 40_000;
        let mut rng = stream(77, 0);
        let fixed = haar_sample(n, &mut stream(78, 0));
        let (mut a2, mut a4, mut b2, mut b4) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..m {
            let u = haar_sample(n, &mut rng);
            let x = u[(0, 0)].norm_sqr();
            let y = (&fixed * &u)[(0, 0)].norm_sqr();
            a2 += x;
            a4 += x * x;
            b2 += y;
            b4 += y * y;
        }
        let mf = m as f64;
        let (e2, e4) = (1.0 / n as f64, 2.0 / (n * (n + 1)) as f64);
        for (got, want) in [(a2 / mf, e2), (b2 / mf, e2), (a4 / mf, e4), (b4 / mf, e4)] {
            assert!((got - want).abs() < 0.01, "{got} vs {want}");
        }
    }

    #[test]
    fn root_rotation_for_sigma1_gives_sigma3() {
        let b = build_basis(2).unwrap();
        let u = root_rotation(1, &b).unwrap();
        let conj = u.adjoint() * b.generator(1) * &u;
        assert!((conj - diag(&[1.0, -1.0])).camax() < 1e-15);
    }

    #[test]
    fn root_rotations_land_in_cartan() {
        for n in 2..=5 {
            let b = build_basis(n).unwrap();
            for k in b.root_indices() {
                let u = root_rotation(k, &b).unwrap();
                assert!(unitarity_error(&u) < 1e-10);
                let conj = u.adjoint() * b.generator(k) * &u;
                assert!(off_diagonal_norm(&conj) < 1e-9);
            }
        }
    }

    #[test]
    fn root_rotation_rejects_cartan_index() {
        let b = build_basis(3).unwrap();
        assert!(matches!(root_rotation(0, &b), Err(Error::Index { .. })));
    }

    #[test]
    fn shift_unitaries() {
        assert_eq!(shift_unitary(1, 4).unwrap(), CMatrix::identity(4, 4));
        let u = shift_unitary(2, 3).unwrap();
        let p1 = diag(&[1.0, 0.0, 0.0]);
        assert_eq!(&u * p1 * u.adjoint(), diag(&[0.0, 1.0, 0.0]));
        for n in 1..=6 {
            for k in 1..=n {
                let u = shift_unitary(k, n).unwrap();
                for i in 0..n {
                    let row: Vec<f64> = (0..n).map(|j| u[(i, j)].re).collect();
                    assert!(row.iter().all(|&x| x == 0.0 || x == 1.0));
                    assert_eq!(row.iter().sum::<f64>(), 1.0);
                    assert_eq!((0..n).map(|j| u[(j, i)].re).sum::<f64>(), 1.0);
                }
                let mut pk = CMatrix::zeros(n, n);
                pk[(k - 1, k - 1)] = ONE;
                let mut p1 = CMatrix::zeros(n, n);
                p1[(0, 0)] = ONE;
                assert_eq!(&u * p1 * u.adjoint(), pk);
            }
        }
        assert!(shift_unitary(0, 3).is_err());
        assert!(shift_unitary(4, 3).is_err());
    }
}
