//! Spin-J tomography: rotating the computational projectors `P_i` by the
//! spin-J representation and expanding in irreducible tensor operators
//! `Λ^j_m`, `j = 0..2J`.
//!
//! Conventions: `Λ^j_j ∝ (−1)^j J₊^j`, lower components by `[J₋, ·]` with
//! positive normalisation, `Tr(Λ^j_m Λ^{j′†}_{m′}) = 2 δ δ`, which gives
//! `Λ^{j†}_m = (−1)^m Λ^j_{−m}` and `U(g) Λ^j_m U(g)† = Σ_{m′} Λ^j_{m′}
//! D^j_{m′m}(g)`.

use nalgebra::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::json::MatrixJson;
use crate::linalg::{trace_product, CMatrix, DensityMatrix, C64};

use super::su2::{spin_matrices, Euler, Spin, SpinRep, Su2Quadrature};

/// `|c^ℓ_{i0}|` below this cannot serve as a pivot.
pub const PIVOT_TOL: f64 = 1e-12;
pub const MAX_DIM: usize = 32;
/// Direct conjugation and tensor expansion must agree to this.
pub const EXPANSION_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct TensorOperatorSet {
    spin: Spin,
    /// `ops[j][m + j]`.
    ops: Vec<Vec<CMatrix>>,
}

fn normalise(m: CMatrix) -> CMatrix {
    let n = trace_product(&m, &m.adjoint()).re;
    m.scale((2.0 / n).sqrt())
}

pub fn tensor_ops(spin: Spin) -> Result<TensorOperatorSet> {
    let n = spin.dim();
    if n > MAX_DIM {
        return Err(Error::InvalidInput(format!("2J+1 = {n} exceeds {MAX_DIM}")));
    }
    let (_, jp, jm) = spin_matrices(spin);
    let ops = (0..n)
        .map(|j| {
            let mut top = CMatrix::identity(n, n);
            for _ in 0..j {
                top = &top * &jp;
            }
            if j % 2 == 1 {
                top = -top;
            }
            let mut chain = vec![normalise(top)];
            for _ in 0..2 * j {
                let cur = chain.last().expect("nonempty");
                chain.push(normalise(&jm * cur - cur * &jm));
            }
            chain.reverse();
            chain
        })
        .collect();
    Ok(TensorOperatorSet { spin, ops })
}

impl TensorOperatorSet {
    pub fn spin(&self) -> Spin {
        self.spin
    }

    pub fn dim(&self) -> usize {
        self.spin.dim()
    }

    /// Largest rank `2J`.
    pub fn max_rank(&self) -> usize {
        self.ops.len() - 1
    }

    pub fn get(&self, j: usize, m: i64) -> &CMatrix {
        &self.ops[j][(m + j as i64) as usize]
    }

    /// `(j, m, Λ^j_m)` in rank-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, i64, &CMatrix)> {
        self.ops
            .iter()
            .enumerate()
            .flat_map(|(j, row)| row.iter().enumerate().map(move |(k, op)| (j, k as i64 - j as i64, op)))
    }

    /// `G_{ab} = Tr(Λ_a Λ_b†)` over the flattened set.
    pub fn gram(&self) -> CMatrix {
        let all: Vec<&CMatrix> = self.iter().map(|t| t.2).collect();
        CMatrix::from_fn(all.len(), all.len(), |a, b| trace_product(all[a], &all[b].adjoint()))
    }

    /// `a^j_m = ½ Tr(Λ^{j†}_m A)`, so `A = Σ a^j_m Λ^j_m`.
    pub fn expand(&self, a: &CMatrix) -> Vec<C64> {
        self.iter().map(|(_, _, op)| trace_product(&op.adjoint(), a) * 0.5).collect()
    }

    pub fn synthesize(&self, coefficients: &[C64]) -> CMatrix {
        let n = self.dim();
        self.iter()
            .zip(coefficients)
            .fold(CMatrix::zeros(n, n), |acc, ((_, _, op), c)| acc + op * *c)
    }

    /// `c` with `[J₃, Λ^j_m] = c Λ^j_m`, and the residual of that fit.
    pub fn commutator_constant(&self, j: usize, m: i64) -> (C64, f64) {
        let (j3, _, _) = spin_matrices(self.spin);
        let op = self.get(j, m);
        let comm = &j3 * op - op * &j3;
        let c = trace_product(&op.adjoint(), &comm) * 0.5;
        (c, (comm - op * c).camax())
    }

    /// `c^j_{im}` with `P_i = Σ c^j_{im} Λ^j_m`; `out[j][m + j]`.
    pub fn projector_coefficients(&self, i: usize) -> Vec<Vec<C64>> {
        self.ops
            .iter()
            .map(|row| row.iter().map(|op| op[(i, i)].conj() * 0.5).collect())
            .collect()
    }
}

fn rotated_projector_expectation(rho: &CMatrix, u: &CMatrix, i: usize) -> f64 {
    let col = u.column(i);
    (col.adjoint() * rho * col)[(0, 0)].re
}

/// `Tr ρ U(g) P_i U(g)†`, checked against the tensor expansion
/// `Σ c^j_{im} Tr(ρ Λ^j_{m′}) D^j_{m′m}(g)`.
pub fn spin_tomogram(rho: &DensityMatrix, i: usize, g: &Euler, ops: &TensorOperatorSet) -> Result<f64> {
    let n = ops.dim();
    if rho.dim() != n {
        return Err(Error::Shape(format!("state has dim {}, tensor set {n}", rho.dim())));
    }
    if i >= n {
        return Err(Error::Index {
            index: i,
            reason: format!("projector index must be below {n}"),
        });
    }
    let direct = rotated_projector_expectation(rho.matrix(), &SpinRep::new(ops.spin()).d(g), i);
    let coeffs = ops.projector_coefficients(i);
    let mut expansion = Complex::new(0.0, 0.0);
    for (j, cj) in coeffs.iter().enumerate() {
        let spin = Spin::from_twice(2 * j as u32);
        let d = SpinRep::new(spin).d(g);
        for (km, c) in cj.iter().enumerate() {
            if c.norm() == 0.0 {
                continue;
            }
            let m = km as i64 - j as i64;
            for mp in -(j as i64)..=j as i64 {
                let rho_jm = trace_product(rho.matrix(), ops.get(j, mp));
                expansion += c * rho_jm * d[(spin.row(mp as f64), spin.row(m as f64))];
            }
        }
    }
    let gap = (expansion - Complex::new(direct, 0.0)).norm();
    if gap > EXPANSION_TOL {
        return Err(Error::Consistency(format!("tensor expansion misses the tomogram by {gap:e}")));
    }
    Ok(direct)
}

/// Oracle answering `Tr ρ U(g) P_i U(g)†` by direct conjugation.
pub fn spin_state_oracle(rho: &DensityMatrix) -> impl Fn(usize, &Euler) -> f64 + Sync + '_ {
    let spin = Spin::from_twice(rho.dim() as u32 - 1);
    let rep = SpinRep::new(spin);
    move |i, g| rotated_projector_expectation(rho.matrix(), &rep.d(g), i)
}

#[derive(Debug, Clone)]
pub struct SpinReconstruction {
    pub matrix: CMatrix,
    /// `ρ^ℓ_{n′} = Tr ρ Λ^ℓ_{n′}`, as `[ℓ][n′ + ℓ]`.
    pub components: Vec<Vec<C64>>,
    /// Projector index used for each rank.
    pub pivots: Vec<usize>,
    pub queries: usize,
}

impl SpinReconstruction {
    pub fn report(&self) -> SpinReport {
        SpinReport {
            rho: MatrixJson::from(&self.matrix),
            pivots: self.pivots.clone(),
            queries: self.queries,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpinReport {
    pub rho: MatrixJson,
    pub pivots: Vec<usize>,
    pub queries: usize,
}

/// Invert the tomogram rank by rank:
/// `ρ^ℓ_{n′} = (2ℓ+1)/c^ℓ_{i0} ∫ D^ℓ_{n′0}(g)* Tr ρ U(g)P_iU(g)† dμ`.
///
/// With `pivot = None` each rank uses the projector with the largest
/// `|c^ℓ_{i0}|`.
pub fn spin_reconstruct<F>(
    oracle: F,
    ops: &TensorOperatorSet,
    quad: &Su2Quadrature,
    pivot: Option<usize>,
) -> Result<SpinReconstruction>
where
    F: Fn(usize, &Euler) -> f64 + Sync,
{
    let n = ops.dim();
    let need = 2 * ops.spin().twice();
    if quad.exact_spin().twice() < need {
        return Err(Error::Resolution(format!(
            "quadrature is exact to total spin {}, need {}",
            quad.exact_spin().j(),
            need as f64 / 2.0
        )));
    }
    let coeffs: Vec<Vec<Vec<C64>>> = (0..n).map(|i| ops.projector_coefficients(i)).collect();
    let c0 = |i: usize, l: usize| coeffs[i][l][l];
    let pivots: Vec<usize> = (0..=ops.max_rank())
        .map(|l| match pivot {
            Some(i) if i >= n => Err(Error::Index {
                index: i,
                reason: format!("projector index must be below {n}"),
            }),
            Some(i) if c0(i, l).norm() < PIVOT_TOL => Err(Error::Pivot(format!(
                "projector {i} has no rank-{l} component; choose another index"
            ))),
            Some(i) => Ok(i),
            None => Ok((0..n)
                .max_by(|&a, &b| c0(a, l).norm().total_cmp(&c0(b, l).norm()))
                .expect("nonempty")),
        })
        .collect::<Result<_>>()?;

    let mut used: Vec<usize> = pivots.clone();
    used.sort_unstable();
    used.dedup();
    let reps: Vec<SpinRep> = (0..=ops.max_rank())
        .map(|l| SpinRep::new(Spin::from_twice(2 * l as u32)))
        .collect();

    // One pass over the nodes: every rank's integrals for every pivot used.
    let len: usize = used.len() * reps.iter().map(|r| r.spin().dim()).sum::<usize>();
    let raw = quad.integrate_vec(len, |g| {
        let t: Vec<f64> = used.iter().map(|&i| oracle(i, g)).collect();
        let mut out = Vec::with_capacity(len);
        for (l, rep) in reps.iter().enumerate() {
            let d = rep.d(g);
            for tv in &t {
                out.extend(d.column(l).iter().map(|x| x.conj() * *tv));
            }
        }
        out
    });

    let mut components = Vec::with_capacity(reps.len());
    let mut offset = 0;
    for (l, rep) in reps.iter().enumerate() {
        let dim = rep.spin().dim();
        let slot = used.iter().position(|&i| i == pivots[l]).expect("pivot used");
        let block = &raw[offset + slot * dim..offset + (slot + 1) * dim];
        let scale = Complex::new(dim as f64, 0.0) / c0(pivots[l], l);
        // Rows of D run m = ℓ..−ℓ; components are stored by n′ + ℓ.
        components.push((0..dim).rev().map(|r| block[r] * scale).collect::<Vec<_>>());
        offset += used.len() * dim;
    }

    let mut matrix = CMatrix::zeros(n, n);
    for (l, comps) in components.iter().enumerate() {
        for (k, c) in comps.iter().enumerate() {
            matrix += ops.get(l, k as i64 - l as i64).adjoint() * (c * 0.5);
        }
    }
    Ok(SpinReconstruction {
        matrix,
        components,
        pivots,
        queries: quad.len() * used.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::su2::haar_euler;
    use crate::linalg::{random_hermitian, trace_norm};
    use crate::rng::stream;

    #[test]
    fn gram_is_twice_identity() {
        for t in 1..=8 {
            let ops = tensor_ops(Spin::from_twice(t)).unwrap();
            let g = ops.gram();
            let n = g.nrows();
            assert_eq!(n, ops.dim() * ops.dim());
            assert!((g - CMatrix::identity(n, n).scale(2.0)).camax() < 1e-10, "J = {}", t as f64 / 2.0);
        }
    }

    #[test]
    fn spin_half_set_is_identity_and_paulis() {
        let ops = tensor_ops(Spin::from_twice(1)).unwrap();
        assert!((ops.get(0, 0) - CMatrix::identity(2, 2)).camax() < 1e-12);
        let z = ops.get(1, 0);
        assert!((z[(0, 0)].re - 1.0).abs() < 1e-12 && (z[(1, 1)].re + 1.0).abs() < 1e-12);
        assert!((ops.get(1, 1)[(0, 1)].re + 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn adjoint_convention() {
        let ops = tensor_ops(Spin::from_twice(4)).unwrap();
        for (j, m, op) in ops.iter() {
            let sign = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            assert!((op.adjoint() - ops.get(j, -m).scale(sign)).camax() < 1e-12);
        }
    }

    #[test]
    fn j3_commutator_constant_is_m() {
        let ops = tensor_ops(Spin::from_twice(3)).unwrap();
        for (j, m, _) in ops.iter() {
            let (c, residual) = ops.commutator_constant(j, m);
            assert!((c - Complex::new(m as f64, 0.0)).norm() < 1e-12);
            assert!(residual < 1e-12);
        }
    }

    #[test]
    fn expansion_is_complete() {
        let mut rng = stream(41, 0);
        for t in 1..=8 {
            let ops = tensor_ops(Spin::from_twice(t)).unwrap();
            let n = ops.dim();
            let a = random_hermitian(n, &mut rng) + random_hermitian(n, &mut rng) * Complex::new(0.0, 1.0);
            let back = ops.synthesize(&ops.expand(&a));
            assert!((back - a).camax() < 1e-10);
        }
    }

    #[test]
    fn only_m_zero_components_build_projectors() {
        let ops = tensor_ops(Spin::from_twice(3)).unwrap();
        for i in 0..4 {
            let c = ops.projector_coefficients(i);
            for (j, row) in c.iter().enumerate() {
                for (k, z) in row.iter().enumerate() {
                    if k != j {
                        assert_eq!(z.norm(), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn tomogram_examples() {
        let mut rng = stream(42, 0);
        let ops = tensor_ops(Spin::from_twice(2)).unwrap();
        let rho = DensityMatrix::random(3, &mut rng);
        for i in 0..3 {
            let v = spin_tomogram(&rho, i, &Euler::IDENTITY, &ops).unwrap();
            assert!((v - rho.matrix()[(i, i)].re).abs() < 1e-12);
        }
        let mixed = DensityMatrix::maximally_mixed(3);
        for _ in 0..20 {
            let g = haar_euler(&mut rng);
            assert!((spin_tomogram(&mixed, 1, &g, &ops).unwrap() - 1.0 / 3.0).abs() < 1e-12);
            spin_tomogram(&rho, 0, &g, &ops).unwrap();
            spin_tomogram(&rho, 2, &g, &ops).unwrap();
        }
    }

    #[test]
    fn round_trip_spin_half_and_one() {
        let mut rng = stream(43, 0);
        for t in [1u32, 2, 3, 4] {
            let spin = Spin::from_twice(t);
            let ops = tensor_ops(spin).unwrap();
            let quad = Su2Quadrature::for_band_limit(Spin::from_twice(2 * t));
            let rho = DensityMatrix::random(spin.dim(), &mut rng);
            let rec = spin_reconstruct(spin_state_oracle(&rho), &ops, &quad, None).unwrap();
            let err = trace_norm(&(&rec.matrix - rho.matrix())).unwrap();
            assert!(err <= 1e-8, "J = {}: {err}", spin.j());
        }
    }

    #[test]
    fn diagonal_states_have_only_m_zero_components() {
        let ops = tensor_ops(Spin::from_twice(2)).unwrap();
        let quad = Su2Quadrature::for_band_limit(Spin::from_twice(4));
        let rho = DensityMatrix::from_trusted(crate::linalg::diag(&[0.2, 0.5, 0.3]));
        let rec = spin_reconstruct(spin_state_oracle(&rho), &ops, &quad, None).unwrap();
        for (l, comps) in rec.components.iter().enumerate() {
            for (k, c) in comps.iter().enumerate() {
                if k != l {
                    assert!(c.norm() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn zero_pivot_is_rejected() {
        // For J = 1 the middle projector has no rank-1 component.
        let ops = tensor_ops(Spin::from_twice(2)).unwrap();
        let quad = Su2Quadrature::for_band_limit(Spin::from_twice(4));
        let rho = DensityMatrix::maximally_mixed(3);
        assert!(matches!(
            spin_reconstruct(spin_state_oracle(&rho), &ops, &quad, Some(1)),
            Err(Error::Pivot(_))
        ));
        assert!(spin_reconstruct(spin_state_oracle(&rho), &ops, &quad, Some(0)).is_ok());
    }

    #[test]
    fn insufficient_quadrature_is_rejected() {
        let ops = tensor_ops(Spin::from_twice(2)).unwrap();
        let quad = Su2Quadrature::for_band_limit(Spin::from_twice(1));
        let rho = DensityMatrix::maximally_mixed(3);
        assert!(matches!(
            spin_reconstruct(spin_state_oracle(&rho), &ops, &quad, None),
            Err(Error::Resolution(_))
        ));
    }
}
