//! Doubly stochastic maps `T_sr = |u_sr|²` induced by unitary frames.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::ambiguity::DiagonalState;
use crate::error::{Error, Result};
use crate::linalg::{check_unitary, CMatrix};
use crate::su_basis::UNITARY_TOL;

/// Entries above this negativity are errors; smaller ones are clamped.
pub const NEGATIVE_DUST: f64 = 1e-12;
pub const MARGIN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix(DMatrix<f64>);

impl StochasticMatrix {
    pub fn new(mut t: DMatrix<f64>) -> Result<Self> {
        if !t.is_square() || t.nrows() == 0 {
            return Err(Error::Shape(format!("stochastic matrix must be square, got {}x{}", t.nrows(), t.ncols())));
        }
        for x in t.iter_mut() {
            if !x.is_finite() || *x < -NEGATIVE_DUST {
                return Err(Error::InvalidInput(format!("entry {x} is negative or non-finite")));
            }
            *x = x.max(0.0);
        }
        for i in 0..t.nrows() {
            let r: f64 = t.row(i).sum();
            let c: f64 = t.column(i).sum();
            if (r - 1.0).abs() > MARGIN_TOL || (c - 1.0).abs() > MARGIN_TOL {
                return Err(Error::InvalidInput(format!(
                    "row/column {i} sums to {r}/{c}, not 1"
                )));
            }
        }
        Ok(StochasticMatrix(t))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// `(Tλ)_r = Σ_s T_sr λ_s`.
    pub fn apply(&self, lambda: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n).map(|r| (0..n).map(|s| self.0[(s, r)] * lambda[s]).sum()).collect()
    }
}

pub fn from_unitary(u: &CMatrix) -> Result<StochasticMatrix> {
    check_unitary(u, UNITARY_TOL)?;
    StochasticMatrix::new(u.map(|z| z.norm_sqr()))
}

/// `|Tr ρ_D(λ) u (Σ_r a_r P_r) u* − Σ_r (Tλ)_r a_r|`.
pub fn pushforward_check(lambda: &DiagonalState, u: &CMatrix, a: &[f64]) -> Result<f64> {
    let n = lambda.dim();
    if u.nrows() != n || a.len() != n {
        return Err(Error::Shape("weights, frame and observable sizes differ".into()));
    }
    let t = from_unitary(u)?;
    let observable = u * crate::linalg::diag(a) * u.adjoint();
    let lhs: f64 = (0..n).map(|s| lambda.weights()[s] * observable[(s, s)].re).sum();
    let rhs: f64 = t.apply(lambda.weights()).iter().zip(a).map(|(x, y)| x * y).sum();
    Ok((lhs - rhs).abs())
}

/// Shannon entropy with `0 ln 0 = 0`.
pub fn shannon(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// Entropy before and after the map; errors if it decreased.
pub fn entropy_monotone(lambda: &DiagonalState, t: &StochasticMatrix) -> Result<(f64, f64)> {
    if t.dim() != lambda.dim() {
        return Err(Error::Shape("weights and map sizes differ".into()));
    }
    let before = shannon(lambda.weights());
    let after = shannon(&t.apply(lambda.weights()));
    if after < before - 1e-10 {
        return Err(Error::PropertyViolation(format!(
            "entropy decreased from {before} to {after}; map is not doubly stochastic"
        )));
    }
    Ok((before, after))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffTerm {
    pub weight: f64,
    /// `perm[r] = c` means the permutation matrix has a one at (r, c).
    pub perm: Vec<usize>,
}

/// Greedy Birkhoff–von Neumann decomposition: repeatedly find a perfect
/// matching on the positive support, peel off its smallest entry.
pub fn birkhoff_decompose(t: &StochasticMatrix, tol: f64) -> Result<Vec<BirkhoffTerm>> {
    let n = t.dim();
    let mut rest = t.matrix().clone();
    let mut terms = Vec::new();
    let mut remaining = 1.0;
    let max_terms = n * n - 2 * n + 2;
    while remaining > tol {
        for x in rest.iter_mut() {
            if *x <= tol {
                *x = 0.0;
            }
        }
        let perm = perfect_matching(&rest).ok_or_else(|| {
            Error::NumericalDegeneracy(format!(
                "no perfect matching on the support with {remaining} weight left; tolerance {tol:e} too small"
            ))
        })?;
        let weight = perm
            .iter()
            .enumerate()
            .map(|(r, &c)| rest[(r, c)])
            .fold(f64::INFINITY, f64::min)
            .min(remaining);
        for (r, &c) in perm.iter().enumerate() {
            rest[(r, c)] -= weight;
        }
        remaining -= weight;
        terms.push(BirkhoffTerm { weight, perm });
        if terms.len() > max_terms {
            return Err(Error::NumericalDegeneracy(format!(
                "more than {max_terms} terms; tolerance {tol:e} too small"
            )));
        }
    }
    Ok(terms)
}

/// Row-to-column perfect matching on the positive entries (Kuhn's
/// augmenting paths), or `None`.
fn perfect_matching(m: &DMatrix<f64>) -> Option<Vec<usize>> {
    let n = m.nrows();
    let mut col_owner: Vec<Option<usize>> = vec![None; n];

    fn augment(
        r: usize,
        m: &DMatrix<f64>,
        seen: &mut [bool],
        col_owner: &mut [Option<usize>],
    ) -> bool {
        for c in 0..m.ncols() {
            if m[(r, c)] > 0.0 && !seen[c] {
                seen[c] = true;
                if col_owner[c].is_none_or(|r2| augment(r2, m, seen, col_owner)) {
                    col_owner[c] = Some(r);
                    return true;
                }
            }
        }
        false
    }

    for r in 0..n {
        let mut seen = vec![false; n];
        if !augment(r, m, &mut seen, &mut col_owner) {
            return None;
        }
    }
    let mut perm = vec![0; n];
    for (c, owner) in col_owner.iter().enumerate() {
        perm[owner.expect("perfect")] = c;
    }
    Some(perm)
}

/// `Σ weight_i Perm_i`.
pub fn reassemble(n: usize, terms: &[BirkhoffTerm]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, n);
    for term in terms {
        for (r, &c) in term.perm.iter().enumerate() {
            out[(r, c)] += term.weight;
        }
    }
    out
}
