//! SU(2): spin representations, Haar quadrature, Fourier coefficients in
//! the orthonormal basis `d^j_{ab} = sqrt(2j+1) D^j_{ab}`, and the
//! entropic inequality between a function and its coefficients.
//!
//! Basis order inside a spin-j block is `m = j, j−1, …, −j`.
//! `D^j(α, β, γ) = exp(−iαJ₃) exp(−iβJ_y) exp(−iγJ₃)`; Haar measure
//! `sin β dα dβ dγ / 16π²` on `α ∈ [0, 2π), β ∈ [0, π], γ ∈ [0, 4π)`.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use nalgebra::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, unitarity_error, CMatrix, C64};
use crate::rng::CompensatedSum;

use super::xlogx;

pub const NORM_TOL: f64 = 1e-8;

/// Spin `j`, stored as `2j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Spin(u32);

impl Spin {
    pub fn from_twice(twice: u32) -> Self {
        Spin(twice)
    }

    pub fn new(j: f64) -> Result<Self> {
        let t = 2.0 * j;
        if !(t >= 0.0) || (t - t.round()).abs() > 1e-12 || t > 1e6 {
            return Err(Error::InvalidInput(format!("{j} is not a nonnegative half-integer")));
        }
        Ok(Spin(t.round() as u32))
    }

    pub fn twice(self) -> u32 {
        self.0
    }

    pub fn j(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn dim(self) -> usize {
        self.0 as usize + 1
    }

    /// Magnetic quantum number of row `k`.
    pub fn m(self, k: usize) -> f64 {
        self.j() - k as f64
    }

    /// Row of magnetic number `m`.
    pub fn row(self, m: f64) -> usize {
        (self.j() - m).round() as usize
    }

    /// All spins up to and including this one.
    pub fn up_to(self) -> impl Iterator<Item = Spin> {
        (0..=self.0).map(Spin)
    }
}

/// `(J₃, J₊, J₋)` in the `m = j, …, −j` basis.
pub fn spin_matrices(s: Spin) -> (CMatrix, CMatrix, CMatrix) {
    let n = s.dim();
    let j = s.j();
    let j3 = CMatrix::from_fn(n, n, |a, b| if a == b { Complex::new(s.m(a), 0.0) } else { Complex::new(0.0, 0.0) });
    let mut jp = CMatrix::zeros(n, n);
    for k in 1..n {
        let m = s.m(k);
        jp[(k - 1, k)] = Complex::new((j * (j + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
    }
    let jm = jp.adjoint();
    (j3, jp, jm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Euler {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Euler {
    pub const IDENTITY: Euler = Euler { alpha: 0.0, beta: 0.0, gamma: 0.0 };

    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        Euler { alpha, beta, gamma }
    }
}

/// A spin representation with `J_y` diagonalised once, so evaluating
/// `D^j(g)` costs only small matrix products.
#[derive(Debug, Clone)]
pub struct SpinRep {
    spin: Spin,
    vectors: CMatrix,
    values: Vec<f64>,
}

impl SpinRep {
    pub fn new(spin: Spin) -> Self {
        let (_, jp, jm) = spin_matrices(spin);
        let jy = (jp - jm) * Complex::new(0.0, -0.5);
        let (values, vectors) = hermitian_eigen(&jy);
        SpinRep {
            spin,
            vectors,
            values: values.iter().copied().collect(),
        }
    }

    pub fn spin(&self) -> Spin {
        self.spin
    }

    /// `exp(−iβJ_y)`, the real small-d matrix.
    pub fn small_d(&self, beta: f64) -> CMatrix {
        let phases = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.values.len(),
            self.values.iter().map(|l| C64::from_polar(1.0, -beta * l)),
        ));
        &self.vectors * phases * self.vectors.adjoint()
    }

    pub fn d(&self, g: &Euler) -> CMatrix {
        let s = self.spin;
        let mut out = self.small_d(g.beta);
        for a in 0..s.dim() {
            for b in 0..s.dim() {
                out[(a, b)] *= C64::from_polar(1.0, -g.alpha * s.m(a) - g.gamma * s.m(b));
            }
        }
        out
    }
}

/// `D^j(g)`.
pub fn wigner_d(j: Spin, g: &Euler) -> CMatrix {
    SpinRep::new(j).d(g)
}

/// Euler angles of an SU(2) matrix in the spin-½ representation.
pub fn euler_from_su2(u: &CMatrix) -> Result<Euler> {
    if u.shape() != (2, 2) || unitarity_error(u) > 1e-9 || (u.determinant() - Complex::new(1.0, 0.0)).norm() > 1e-9 {
        return Err(Error::InvalidInput("expected a 2x2 special unitary matrix".into()));
    }
    let (c, s) = (u[(0, 0)].norm(), u[(1, 0)].norm());
    let beta = 2.0 * s.atan2(c);
    let sum = if c > 1e-14 { -2.0 * u[(0, 0)].arg() } else { 0.0 };
    let diff = if s > 1e-14 { 2.0 * u[(1, 0)].arg() } else { 0.0 };
    Ok(Euler::new(0.5 * (sum + diff), beta, 0.5 * (sum - diff)))
}

/// The group product `g₁ g₂`, read off the faithful spin-½ matrices.
pub fn compose(g1: &Euler, g2: &Euler) -> Result<Euler> {
    let half = SpinRep::new(Spin(1));
    euler_from_su2(&(half.d(g1) * half.d(g2)))
}

/// A Haar-random group element.
pub fn haar_euler<R: Rng + ?Sized>(rng: &mut R) -> Euler {
    Euler::new(
        rng.random_range(0.0..2.0 * PI),
        rng.random_range(-1.0f64..=1.0).acos(),
        rng.random_range(0.0..4.0 * PI),
    )
}

/// Product rule: Gauss–Legendre in `cos β`, trapezoid in `α` and `γ`.
#[derive(Debug, Clone)]
pub struct Su2Quadrature {
    nodes: Vec<Euler>,
    weights: Vec<f64>,
    /// Twice the largest total spin integrated exactly.
    exact_twice: u32,
}

impl Su2Quadrature {
    pub fn with_counts(n_beta: usize, n_alpha: usize, n_gamma: usize) -> Result<Self> {
        if n_beta == 0 || n_alpha == 0 || n_gamma == 0 {
            return Err(Error::InvalidInput("quadrature counts must be positive".into()));
        }
        let gl = GaussLegendre::new(NonZeroUsize::new(n_beta).expect("positive"));
        let mut nodes = Vec::with_capacity(n_beta * n_alpha * n_gamma);
        let mut weights = Vec::with_capacity(nodes.capacity());
        let w_ag = 1.0 / (n_alpha * n_gamma) as f64;
        for &(x, w) in gl.as_node_weight_pairs() {
            let beta = x.clamp(-1.0, 1.0).acos();
            for a in 0..n_alpha {
                for c in 0..n_gamma {
                    nodes.push(Euler::new(
                        2.0 * PI * a as f64 / n_alpha as f64,
                        beta,
                        4.0 * PI * c as f64 / n_gamma as f64,
                    ));
                    weights.push(0.5 * w * w_ag);
                }
            }
        }
        let exact_twice = (2 * (2 * n_beta - 1)).min(2 * (n_alpha - 1)).min(n_gamma - 1) as u32;
        Ok(Su2Quadrature {
            nodes,
            weights,
            exact_twice,
        })
    }

    /// Exact for products of two functions band-limited at `j_max`:
    /// `⌊j_max⌋ + 1` nodes in `cos β`, `2(2 j_max + 1)` in each angle.
    pub fn for_band_limit(j_max: Spin) -> Self {
        let t = j_max.twice() as usize;
        Self::with_counts(t / 2 + 1, 2 * (t + 1), 2 * (t + 1)).expect("positive counts")
    }

    /// Every count multiplied by `factor`.
    pub fn refined(j_max: Spin, factor: usize) -> Result<Self> {
        let t = j_max.twice() as usize;
        let f = factor.max(1);
        Self::with_counts((t / 2 + 1) * f, 2 * (t + 1) * f, 2 * (t + 1) * f)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Euler] {
        &self.nodes
    }

    /// Integrands whose total spin is at most `exact_spin()` integrate
    /// exactly.
    pub fn exact_spin(&self) -> Spin {
        Spin(self.exact_twice)
    }

    /// `∫ f dμ`; nodes evaluate in parallel, summation is sequential and
    /// compensated so the result does not depend on the thread count.
    pub fn integrate<F>(&self, f: F) -> C64
    where
        F: Fn(&Euler) -> C64 + Sync,
    {
        self.integrate_vec(1, |g| vec![f(g)])[0]
    }

    /// Component-wise `∫ f dμ` for vector-valued `f` of length `len`.
    pub fn integrate_vec<F>(&self, len: usize, f: F) -> Vec<C64>
    where
        F: Fn(&Euler) -> Vec<C64> + Sync,
    {
        let values: Vec<Vec<C64>> = self.nodes.par_iter().map(&f).collect();
        let mut re = vec![CompensatedSum::default(); len];
        let mut im = vec![CompensatedSum::default(); len];
        for (v, w) in values.iter().zip(&self.weights) {
            for k in 0..len {
                re[k].add(w * v[k].re);
                im[k].add(w * v[k].im);
            }
        }
        re.iter().zip(&im).map(|(a, b)| Complex::new(a.value(), b.value())).collect()
    }
}

/// Coefficients `f̂^j_{ab}` for every spin up to `j_max` (half-integers
/// included); `blocks[2j]` is the (2j+1)×(2j+1) block.
#[derive(Debug, Clone)]
pub struct GroupFourierData {
    pub j_max: Spin,
    pub blocks: Vec<CMatrix>,
}

impl GroupFourierData {
    pub fn zeros(j_max: Spin) -> Self {
        GroupFourierData {
            j_max,
            blocks: j_max.up_to().map(|s| CMatrix::zeros(s.dim(), s.dim())).collect(),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.blocks.iter().map(|b| b.norm_squared()).sum()
    }

    /// `f(g) = Σ f̂^j_{ab} d^j_{ab}(g)`.
    pub fn evaluator(&self) -> impl Fn(&Euler) -> C64 + Sync + '_ {
        let reps: Vec<SpinRep> = self.j_max.up_to().map(SpinRep::new).collect();
        move |g| {
            let mut acc = Complex::new(0.0, 0.0);
            for (rep, block) in reps.iter().zip(&self.blocks) {
                if block.iter().all(|z| *z == Complex::new(0.0, 0.0)) {
                    continue;
                }
                let d = rep.d(g);
                let scale = (rep.spin().dim() as f64).sqrt();
                acc += block.iter().zip(d.iter()).map(|(c, x)| c * x).sum::<C64>() * scale;
            }
            acc
        }
    }

    /// `(−Σ|f̂|² ln|f̂|², −Σ|f̂|² ln(|f̂|²/(2j+1)))`.
    pub fn coefficient_entropies(&self) -> (f64, f64) {
        let mut plain = 0.0;
        let mut weighted = 0.0;
        for (k, block) in self.blocks.iter().enumerate() {
            let d = (k + 1) as f64;
            for z in block.iter() {
                let w = z.norm_sqr();
                plain -= xlogx(w);
                if w > 0.0 {
                    weighted -= w * (w / d).ln();
                }
            }
        }
        (plain, weighted)
    }
}

/// Random coefficients up to `j_max`, unit total weight.
pub fn random_band_limited<R: Rng + ?Sized>(j_max: Spin, rng: &mut R) -> GroupFourierData {
    let mut data = GroupFourierData::zeros(j_max);
    for block in &mut data.blocks {
        for z in block.iter_mut() {
            *z = Complex::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        }
    }
    let n = data.norm_sqr().sqrt();
    for block in &mut data.blocks {
        *block /= Complex::new(n, 0.0);
    }
    data
}

#[derive(Debug, Clone)]
pub struct FourierTransform {
    pub data: GroupFourierData,
    /// `∫ |f|² dμ` by the same quadrature.
    pub norm_sqr: f64,
    /// `|Σ|f̂|² − ∫|f|²|`.
    pub plancherel_residual: f64,
}

/// `f̂^j_{ab} = sqrt(2j+1) ∫ D^j_{ab}(g)* f(g) dμ(g)` for `j ≤ j_max`.
pub fn su2_fourier<F>(f: F, j_max: Spin, quad: &Su2Quadrature) -> Result<FourierTransform>
where
    F: Fn(&Euler) -> C64 + Sync,
{
    if quad.exact_spin().twice() < 2 * j_max.twice() {
        return Err(Error::Resolution(format!(
            "quadrature is exact to total spin {}, need {}",
            quad.exact_spin().j(),
            2.0 * j_max.j()
        )));
    }
    let reps: Vec<SpinRep> = j_max.up_to().map(SpinRep::new).collect();
    let len: usize = 1 + reps.iter().map(|r| r.spin().dim().pow(2)).sum::<usize>();
    let raw = quad.integrate_vec(len, |g| {
        let v = f(g);
        let mut out = Vec::with_capacity(len);
        out.push(Complex::new(v.norm_sqr(), 0.0));
        for rep in &reps {
            let scale = (rep.spin().dim() as f64).sqrt();
            out.extend(rep.d(g).iter().map(|d| d.conj() * v * scale));
        }
        out
    });
    let norm_sqr = raw[0].re;
    let mut data = GroupFourierData::zeros(j_max);
    let mut offset = 1;
    for block in &mut data.blocks {
        let n = block.len();
        block.iter_mut().zip(&raw[offset..offset + n]).for_each(|(b, v)| *b = *v);
        offset += n;
    }
    let plancherel_residual = (data.norm_sqr() - norm_sqr).abs();
    Ok(FourierTransform {
        data,
        norm_sqr,
        plancherel_residual,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupEntropyReport {
    /// `−∫ |f|² ln |f|² dμ`.
    pub function_entropy: f64,
    /// `−Σ |f̂|² ln |f̂|²`.
    pub coefficient_entropy: f64,
    /// `−Σ |f̂|² ln(|f̂|² / (2j+1))`.
    pub weighted_coefficient_entropy: f64,
    /// Function plus plain coefficient entropy.
    pub slack: f64,
    /// Function plus weighted coefficient entropy.
    pub weighted_slack: f64,
    pub plancherel_residual: f64,
    pub nodes: usize,
}

/// Entropies of a normalised `f` band-limited at `j_max`. Coefficients
/// use the exact rule; the non-polynomial `|f|² ln |f|²` uses a rule
/// refined by `refine` in every direction.
pub fn group_entropy_check<F>(f: F, j_max: Spin, refine: usize) -> Result<GroupEntropyReport>
where
    F: Fn(&Euler) -> C64 + Sync,
{
    let ft = su2_fourier(&f, j_max, &Su2Quadrature::for_band_limit(j_max))?;
    if (ft.norm_sqr - 1.0).abs() > NORM_TOL {
        return Err(Error::Domain(format!("‖f‖₂² = {}, expected 1", ft.norm_sqr)));
    }
    let fine = Su2Quadrature::refined(j_max, refine)?;
    let function_entropy = -fine.integrate(|g| Complex::new(xlogx(f(g).norm_sqr()), 0.0)).re;
    let (coefficient_entropy, weighted_coefficient_entropy) = ft.data.coefficient_entropies();
    Ok(GroupEntropyReport {
        function_entropy,
        coefficient_entropy,
        weighted_coefficient_entropy,
        slack: function_entropy + coefficient_entropy,
        weighted_slack: function_entropy + weighted_coefficient_entropy,
        plancherel_residual: ft.plancherel_residual,
        nodes: fine.len(),
    })
}
