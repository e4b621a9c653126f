//! Lifts of a diagonal state and the size of the lift set.
//!
//! A lift of `ρ_D = diag(λ)` is any density matrix with that diagonal. The
//! set of lifts is convex and contains `ρ_D`; its off-diagonal entries are
//! confined by `|ρ_ij|² ≤ λ_i λ_j`. The ambiguity `Δρ_D` is the largest
//! trace distance `½‖ρ′ − ρ″‖₁` between two lifts. For a qubit this is
//! `2 sqrt(λ₁ λ₂)`; for larger N the optimiser returns a lower bound.

use nalgebra::Complex;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::json::MatrixJson;
use crate::linalg::{diag, ginibre, hermitian_eigen, hermitian_eigenvalues, CMatrix, DensityMatrix, C64};
use crate::rng::{stream, SeedStream};

pub const WEIGHT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalState {
    weights: Vec<f64>,
}

impl DiagonalState {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidInput("no weights".into()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidInput(format!("weight {w} is negative or non-finite")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidInput(format!("weights sum to {total}, not 1")));
        }
        Ok(DiagonalState { weights })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn matrix(&self) -> CMatrix {
        diag(&self.weights)
    }

    pub fn is_pure(&self) -> bool {
        self.weights.iter().filter(|&&w| w > 0.0).count() == 1
    }
}

/// Diagonal of ρ; imaginary parts and rounding residue are dropped.
pub fn restrict_diagonal(rho: &DensityMatrix) -> DiagonalState {
    let n = rho.dim();
    let raw: Vec<f64> = (0..n).map(|i| rho.matrix()[(i, i)].re.max(0.0)).collect();
    let total: f64 = raw.iter().sum();
    DiagonalState {
        weights: raw.iter().map(|w| w / total).collect(),
    }
}

/// Off-diagonal coordinates of a lift: real and imaginary parts of
/// `ρ_ij` for every pair with both weights positive.
#[derive(Debug, Clone)]
struct LiftSpace {
    base: CMatrix,
    pairs: Vec<(usize, usize)>,
    /// `sqrt(λ_i λ_j)` per pair.
    radius: Vec<f64>,
}

impl LiftSpace {
    fn new(d: &DiagonalState) -> Self {
        let w = d.weights();
        let mut pairs = Vec::new();
        let mut radius = Vec::new();
        for i in 0..w.len() {
            for j in i + 1..w.len() {
                if w[i] > 0.0 && w[j] > 0.0 {
                    pairs.push((i, j));
                    radius.push((w[i] * w[j]).sqrt());
                }
            }
        }
        LiftSpace {
            base: d.matrix(),
            pairs,
            radius,
        }
    }

    fn params(&self) -> usize {
        2 * self.pairs.len()
    }

    fn offdiag(&self, x: &[f64]) -> CMatrix {
        let n = self.base.nrows();
        let mut m = CMatrix::zeros(n, n);
        for (p, &(i, j)) in self.pairs.iter().enumerate() {
            let z = Complex::new(x[2 * p], x[2 * p + 1]);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
        m
    }

    fn lift(&self, x: &[f64]) -> CMatrix {
        &self.base + self.offdiag(x)
    }

    fn is_psd(&self, x: &[f64], scale: f64) -> bool {
        let m = &self.base + self.offdiag(x).scale(scale);
        hermitian_eigenvalues(&m)[0] >= -1e-14
    }

    /// Largest `s ∈ [0, 1]` keeping `ρ_D + s X` positive.
    fn feasible_scale(&self, x: &[f64]) -> f64 {
        if self.is_psd(x, 1.0) {
            return 1.0;
        }
        // 2x2 minors bound the scale from above.
        let mut hi = 1.0f64;
        for (p, r) in self.radius.iter().enumerate() {
            let z = x[2 * p].hypot(x[2 * p + 1]);
            if z > 0.0 {
                hi = hi.min(r / z);
            }
        }
        if self.is_psd(x, hi) {
            return hi;
        }
        let mut lo = 0.0;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.is_psd(x, mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Radial shrink toward `ρ_D` onto the lift set.
    fn project(&self, x: &mut [f64]) {
        let s = self.feasible_scale(x);
        if s < 1.0 {
            x.iter_mut().for_each(|v| *v *= s);
        }
    }

    /// Random lift, reaching the boundary with positive probability.
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let k = self.params();
        let mut x = vec![0.0; k];
        if k == 0 {
            return x;
        }
        for (p, r) in self.radius.iter().enumerate() {
            // Uniform in the disc |z| <= r.
            let rho = r * rng.random::<f64>().sqrt();
            let phi = std::f64::consts::TAU * rng.random::<f64>();
            x[2 * p] = rho * phi.cos();
            x[2 * p + 1] = rho * phi.sin();
        }
        // Stretch to the boundary along this direction, then pull in by a
        // factor distributed like the radius of a uniform point in a
        // k-dimensional ball.
        let mut hi = f64::INFINITY;
        for (p, r) in self.radius.iter().enumerate() {
            let z = x[2 * p].hypot(x[2 * p + 1]);
            if z > 0.0 {
                hi = hi.min(r / z);
            }
        }
        if !hi.is_finite() {
            return vec![0.0; k];
        }
        x.iter_mut().for_each(|v| *v *= hi);
        self.project(&mut x);
        let pull = rng.random::<f64>().powf(1.0 / k as f64);
        x.iter_mut().for_each(|v| *v *= pull);
        x
    }
}

/// A random lift of `d`: its diagonal is exactly `d` and it is positive.
pub fn sample_lift(d: &DiagonalState, rng: &mut SeedStream) -> DensityMatrix {
    let space = LiftSpace::new(d);
    let x = space.sample(rng);
    DensityMatrix::from_trusted(space.lift(&x))
}

#[derive(Debug, Clone, Copy)]
pub struct AmbiguityConfig {
    pub restarts: usize,
    /// Stop once a full sweep improves the objective by less than this
    /// relative amount at the smallest step.
    pub rel_tol: f64,
    /// Smallest coordinate step, relative to the largest disc radius.
    pub min_step: f64,
    pub seed: u64,
}

impl Default for AmbiguityConfig {
    fn default() -> Self {
        AmbiguityConfig {
            restarts: 32,
            rel_tol: 1e-6,
            min_step: 1e-7,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AmbiguityResult {
    /// Largest trace distance `½‖ρ′ − ρ″‖₁` found.
    pub delta: f64,
    /// The pair attaining it.
    pub pair: (CMatrix, CMatrix),
    pub evaluations: usize,
}

impl AmbiguityResult {
    /// `‖ρ′ − ρ″‖₁`, twice `delta`.
    pub fn diameter(&self) -> f64 {
        2.0 * self.delta
    }

    pub fn report(&self) -> AmbiguityReport {
        AmbiguityReport {
            delta: self.delta,
            diameter_trace_norm: self.diameter(),
            evaluations: self.evaluations,
            pair: [MatrixJson::from(&self.pair.0), MatrixJson::from(&self.pair.1)],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AmbiguityReport {
    pub delta: f64,
    pub diameter_trace_norm: f64,
    pub evaluations: usize,
    pub pair: [MatrixJson; 2],
}

/// Lower bound on `Δρ_D` from at most `budget` objective evaluations.
///
/// Each lift is written as a Gram matrix `V V*` whose rows have norms
/// `sqrt(λ_i)`, so every iterate is an exact lift. Multi-start projected
/// gradient ascent on the pair; nondecreasing in `budget` for a fixed seed.
pub fn delta_rho(d: &DiagonalState, budget: usize, config: &AmbiguityConfig) -> AmbiguityResult {
    let base = d.matrix();
    if d.is_pure() || budget == 0 {
        return AmbiguityResult {
            delta: 0.0,
            pair: (base.clone(), base),
            evaluations: 0,
        };
    }
    let restarts = config.restarts.max(1);
    let per_restart = (budget / restarts).max(1);
    let runs: Vec<Ascent> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(config.seed, r as u64);
            ascend(d.weights(), per_restart, config, &mut rng)
        })
        .collect();
    let evaluations = runs.iter().map(|r| r.evaluations).sum();
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.value > a.value { b } else { a })
        .expect("at least one restart");
    AmbiguityResult {
        delta: best.value,
        pair: (gram(&best.factors[0]), gram(&best.factors[1])),
        evaluations,
    }
}

struct Ascent {
    value: f64,
    factors: [CMatrix; 2],
    evaluations: usize,
}

fn gram(v: &CMatrix) -> CMatrix {
    let mut m = v * v.adjoint();
    for i in 0..m.nrows() {
        m[(i, i)].im = 0.0;
    }
    m
}

/// Rescale each row to norm `sqrt(λ_i)`.
fn retract(v: &mut CMatrix, weights: &[f64]) {
    for (i, &w) in weights.iter().enumerate() {
        let norm = v.row(i).norm();
        let target = w.sqrt();
        if w == 0.0 || norm == 0.0 {
            v.row_mut(i).fill(C64::new(0.0, 0.0));
            if w > 0.0 {
                v[(i, i)] = C64::new(target, 0.0);
            }
        } else {
            v.row_mut(i).scale_mut(target / norm);
        }
    }
}

/// Objective `½‖A − B‖₁` and the sign operator of `A − B`.
fn evaluate(a: &CMatrix, b: &CMatrix) -> (f64, CMatrix) {
    let diff = gram(a) - gram(b);
    let (values, vectors) = hermitian_eigen(&diff);
    let n = diff.nrows();
    let mut sign = CMatrix::zeros(n, n);
    for (k, &mu) in values.iter().enumerate() {
        let s = if mu > 0.0 {
            1.0
        } else if mu < 0.0 {
            -1.0
        } else {
            0.0
        };
        let col = vectors.column(k);
        sign += (col * col.adjoint()).scale(s);
    }
    (0.5 * values.iter().map(|v| v.abs()).sum::<f64>(), sign)
}

fn ascend(weights: &[f64], budget: usize, config: &AmbiguityConfig, rng: &mut SeedStream) -> Ascent {
    let n = weights.len();
    let mut factors = [ginibre(n, n, rng), ginibre(n, n, rng)];
    factors.iter_mut().for_each(|v| retract(v, weights));
    let (mut value, mut sign) = evaluate(&factors[0], &factors[1]);
    let mut evaluations = 1;
    let mut step = 0.5;
    let mut stalls = 0;
    let min_step = config.min_step * 1e-6;

    while evaluations < budget && step > min_step && stalls < 5 {
        // Ascent directions for V' and V'' on the product of spheres.
        let mut trial = factors.clone();
        for (side, v) in trial.iter_mut().enumerate() {
            let sgn = if side == 0 { 1.0 } else { -1.0 };
            let mut g = (&sign * &*v).scale(sgn);
            for i in 0..n {
                let norm_sqr = v.row(i).norm_squared();
                if norm_sqr > 0.0 {
                    let radial = v.row(i).dotc(&g.row(i)).re / norm_sqr;
                    let row = v.row(i).scale(radial);
                    g.set_row(i, &(g.row(i) - row));
                }
            }
            *v += g.scale(step);
            retract(v, weights);
        }
        let (candidate, candidate_sign) = evaluate(&trial[0], &trial[1]);
        evaluations += 1;
        if candidate > value {
            stalls = if candidate - value < config.rel_tol * value { stalls + 1 } else { 0 };
            value = candidate;
            sign = candidate_sign;
            factors = trial;
            step *= 1.5;
        } else {
            step *= 0.5;
        }
    }
    Ascent {
        value,
        factors,
        evaluations,
    }
}
