//! Indirect tomography: a system of dimension n is coupled to an apparatus
//! of dimension N for a finite window, then only apparatus observables are
//! read. Stacking several coupling choices gives a linear design that is
//! inverted for the system's Bloch components.
//!
//! The interaction is switched on as a constant `H_I = Σ C_{αk} e_α ⊗ E_k`
//! on `[t0, t0 + T]`, so the propagator to `t_read` is
//! `exp(−i(t_read − t0 − T) H0) · exp(−i T (H0 + H_I))`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json::MatrixJson;
use crate::linalg::{
    check_square, hermiticity_error, kron, matrix_exp_skew, random_hermitian, trace_product,
    validate_density, CMatrix, DensityMatrix, Tolerances,
};
use crate::su_basis::HermitianBasis;

pub const HERMITIAN_TOL: f64 = 1e-10;
/// Singular values below this fraction of the largest (floored at 1, the
/// natural scale of an apparatus read) count as zero.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct CoupledConfig {
    /// System dimension n.
    pub n: usize,
    /// Apparatus dimension N.
    pub apparatus_dim: usize,
    pub h_s: CMatrix,
    pub h_m: CMatrix,
    /// n² × N² real couplings; row/column 0 is the identity.
    pub couplings: DMatrix<f64>,
    pub t0: f64,
    pub window: f64,
    pub t_read: f64,
}

impl CoupledConfig {
    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.n, self.apparatus_dim);
        if n < 2 || m < 2 {
            return Err(Error::InvalidDimension(n.min(m)));
        }
        if check_square(&self.h_s)? != n || check_square(&self.h_m)? != m {
            return Err(Error::Shape("Hamiltonians do not match n and N".into()));
        }
        if self.couplings.shape() != (n * n, m * m) {
            return Err(Error::Shape(format!(
                "couplings are {:?}, expected ({}, {})",
                self.couplings.shape(),
                n * n,
                m * m
            )));
        }
        for (name, h) in [("H_S", &self.h_s), ("H_M", &self.h_m)] {
            if hermiticity_error(h) > HERMITIAN_TOL {
                return Err(Error::InvalidInput(format!("{name} is not Hermitian")));
            }
        }
        if self.couplings.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite coupling".into()));
        }
        if !(self.window >= 0.0) || !(self.t_read > self.t0 + self.window) {
            return Err(Error::Config(format!(
                "need T >= 0 and t_read > t0 + T (t0 = {}, T = {}, t_read = {})",
                self.t0, self.window, self.t_read
            )));
        }
        Ok(())
    }

    /// Random Hamiltonians, couplings uniform in [−1, 1]; t0 = 0, T = 1,
    /// t_read = 1.5.
    pub fn random<R: Rng + ?Sized>(n: usize, apparatus_dim: usize, rng: &mut R) -> Self {
        CoupledConfig {
            n,
            apparatus_dim,
            h_s: random_hermitian(n, rng),
            h_m: random_hermitian(apparatus_dim, rng),
            couplings: DMatrix::from_fn(n * n, apparatus_dim * apparatus_dim, |_, _| {
                rng.random_range(-1.0..=1.0)
            }),
            t0: 0.0,
            window: 1.0,
            t_read: 1.5,
        }
    }

    pub fn free_hamiltonian(&self) -> CMatrix {
        kron(&self.h_s, &CMatrix::identity(self.apparatus_dim, self.apparatus_dim))
            + kron(&CMatrix::identity(self.n, self.n), &self.h_m)
    }

    pub fn interaction(&self) -> Result<CMatrix> {
        let sys = with_identity(&HermitianBasis::new(self.n)?);
        let app = with_identity(&HermitianBasis::new(self.apparatus_dim)?);
        let dim = self.n * self.apparatus_dim;
        let mut h = CMatrix::zeros(dim, dim);
        for (a, e) in sys.iter().enumerate() {
            for (k, f) in app.iter().enumerate() {
                let c = self.couplings[(a, k)];
                if c != 0.0 {
                    h += kron(e, f).scale(c);
                }
            }
        }
        Ok(h)
    }

    /// `V(t_read, t0)`.
    pub fn propagator(&self) -> Result<CMatrix> {
        self.validate()?;
        let h0 = self.free_hamiltonian();
        let during = matrix_exp_skew(&(&h0 + self.interaction()?), self.window)?;
        let after = matrix_exp_skew(&h0, self.t_read - self.t0 - self.window)?;
        Ok(after * during)
    }

    pub fn to_json(&self) -> CoupledConfigJson {
        CoupledConfigJson {
            n: self.n,
            apparatus_dim: self.apparatus_dim,
            h_s: MatrixJson::from(&self.h_s),
            h_m: MatrixJson::from(&self.h_m),
            couplings: MatrixJson::from(&self.couplings),
            t0: self.t0,
            window: self.window,
            t_read: self.t_read,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoupledConfigJson {
    pub n: usize,
    pub apparatus_dim: usize,
    pub h_s: MatrixJson,
    pub h_m: MatrixJson,
    pub couplings: MatrixJson,
    #[serde(default)]
    pub t0: f64,
    pub window: f64,
    pub t_read: f64,
}

impl CoupledConfigJson {
    pub fn to_config(&self) -> Result<CoupledConfig> {
        let cfg = CoupledConfig {
            n: self.n,
            apparatus_dim: self.apparatus_dim,
            h_s: self.h_s.to_matrix()?,
            h_m: self.h_m.to_matrix()?,
            couplings: self.couplings.to_real_matrix(1e-12)?,
            t0: self.t0,
            window: self.window,
            t_read: self.t_read,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `[1, E_1, ..., E_{N²−1}]`.
fn with_identity(basis: &HermitianBasis) -> Vec<CMatrix> {
    let n = basis.dim();
    std::iter::once(CMatrix::identity(n, n))
        .chain(basis.generators().iter().cloned())
        .collect()
}

fn conjugate(v: &CMatrix, x: &CMatrix) -> CMatrix {
    v * x * v.adjoint()
}

/// `ρ(t_read) = V (ρ_S ⊗ ρ_M) V*`.
pub fn evolve(config: &CoupledConfig, rho_s: &DensityMatrix, rho_m: &DensityMatrix) -> Result<DensityMatrix> {
    if rho_s.dim() != config.n || rho_m.dim() != config.apparatus_dim {
        return Err(Error::Shape("state dimensions do not match the configuration".into()));
    }
    let v = config.propagator()?;
    let out = conjugate(&v, &kron(rho_s.matrix(), rho_m.matrix()));
    validate_density(&out, &Tolerances::uniform(1e-9))
}

/// `b_l = Tr ρ(t) (1 ⊗ E_l)` for the N²−1 apparatus generators.
pub fn apparatus_read(rho_t: &DensityMatrix, basis_m: &HermitianBasis) -> Result<Vec<f64>> {
    operator_read(rho_t.matrix(), basis_m)
}

fn operator_read(x: &CMatrix, basis_m: &HermitianBasis) -> Result<Vec<f64>> {
    let m = basis_m.dim();
    if !x.nrows().is_multiple_of(m) {
        return Err(Error::Shape(format!("{} is not a multiple of N = {m}", x.nrows())));
    }
    let n = x.nrows() / m;
    let id = CMatrix::identity(n, n);
    Ok(basis_m
        .generators()
        .iter()
        .map(|e| trace_product(x, &kron(&id, e)).re)
        .collect())
}

/// Linear model `b = offset + M ρ_S` for the stacked apparatus reads of a
/// set of configurations. Column 0 of `matrix` is the offset (the response
/// to `(1/n) ⊗ ρ_M`); column α ≥ 1 is the response to `½ e_α ⊗ ρ_M`.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub n: usize,
    pub apparatus_dim: usize,
    pub matrix: DMatrix<f64>,
}

impl DesignMatrix {
    pub fn offset(&self) -> DVector<f64> {
        self.matrix.column(0).into_owned()
    }

    pub fn system_columns(&self) -> DMatrix<f64> {
        self.matrix.columns(1, self.matrix.ncols() - 1).into_owned()
    }

    pub fn rank(&self) -> usize {
        let cut = self.rank_cutoff();
        self.system_columns().singular_values().iter().filter(|&&s| s > cut).count()
    }

    fn rank_cutoff(&self) -> f64 {
        RANK_TOL * self.matrix.singular_values().max().max(1.0)
    }
}

fn check_family(configs: &[CoupledConfig], rho_m: &DensityMatrix) -> Result<(usize, usize)> {
    let first = configs
        .first()
        .ok_or_else(|| Error::Config("no coupling configurations".into()))?;
    let (n, m) = (first.n, first.apparatus_dim);
    if configs.iter().any(|c| c.n != n || c.apparatus_dim != m) {
        return Err(Error::Config("configurations disagree on (n, N)".into()));
    }
    if rho_m.dim() != m {
        return Err(Error::Config(format!("apparatus state has dim {}, expected {m}", rho_m.dim())));
    }
    Ok((n, m))
}

pub fn build_design(configs: &[CoupledConfig], rho_m: &DensityMatrix) -> Result<DesignMatrix> {
    let (n, m) = check_family(configs, rho_m)?;
    let sys = HermitianBasis::new(n)?;
    let app = HermitianBasis::new(m)?;
    let mut inputs = vec![kron(&CMatrix::identity(n, n).scale(1.0 / n as f64), rho_m.matrix())];
    inputs.extend(sys.generators().iter().map(|e| kron(&e.scale(0.5), rho_m.matrix())));

    let blocks: Vec<Vec<Vec<f64>>> = configs
        .par_iter()
        .map(|cfg| {
            let v = cfg.propagator()?;
            inputs
                .iter()
                .map(|x| operator_read(&conjugate(&v, x), &app))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let rows_per = m * m - 1;
    let mut matrix = DMatrix::zeros(rows_per * configs.len(), n * n);
    for (c, block) in blocks.iter().enumerate() {
        for (col, reads) in block.iter().enumerate() {
            for (l, b) in reads.iter().enumerate() {
                matrix[(c * rows_per + l, col)] = *b;
            }
        }
    }
    Ok(DesignMatrix {
        n,
        apparatus_dim: m,
        matrix,
    })
}

/// Stacked apparatus reads, in the same row order as [`build_design`].
pub fn simulate_observations(
    configs: &[CoupledConfig],
    rho_s: &DensityMatrix,
    rho_m: &DensityMatrix,
) -> Result<Vec<f64>> {
    check_family(configs, rho_m)?;
    let app = HermitianBasis::new(rho_m.dim())?;
    let reads: Vec<Vec<f64>> = configs
        .par_iter()
        .map(|cfg| apparatus_read(&evolve(cfg, rho_s, rho_m)?, &app))
        .collect::<Result<_>>()?;
    Ok(reads.concat())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecoveryMode {
    /// Fail unless every system component is determined.
    Full,
    /// Return whatever the design determines.
    Partial,
}

#[derive(Debug, Clone)]
pub struct Recovery {
    /// Least-squares Bloch components (minimum-norm when rank deficient).
    pub components: Vec<f64>,
    /// Resynthesised system state; `None` when rank deficient.
    pub rho_s: Option<CMatrix>,
    pub rank: usize,
    /// Ratio of extreme retained singular values.
    pub condition: f64,
    /// `‖M x + offset − b‖₂`.
    pub residual: f64,
    /// Orthonormal rows spanning the determined component subspace.
    pub determined: Vec<Vec<f64>>,
}

impl Recovery {
    pub fn density(&self) -> Result<DensityMatrix> {
        let m = self
            .rho_s
            .as_ref()
            .ok_or_else(|| Error::NoInformation("system state is not fully determined".into()))?;
        validate_density(m, &Tolerances::uniform(1e-6))
    }

    pub fn report(&self) -> RecoveryReport {
        RecoveryReport {
            rho_s: self.rho_s.as_ref().map(MatrixJson::from),
            components: self.components.clone(),
            residual: self.residual,
            rank: self.rank,
            condition: self.condition,
            determined: self.determined.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RecoveryReport {
    pub rho_s: Option<MatrixJson>,
    pub components: Vec<f64>,
    pub residual: f64,
    pub rank: usize,
    pub condition: f64,
    pub determined: Vec<Vec<f64>>,
}

/// Truncated-SVD least squares for the system components.
pub fn recover_system(design: &DesignMatrix, observations: &[f64], mode: RecoveryMode) -> Result<Recovery> {
    let a = design.system_columns();
    if observations.len() != a.nrows() {
        return Err(Error::Shape(format!(
            "{} observations for a design with {} rows",
            observations.len(),
            a.nrows()
        )));
    }
    let y = DVector::from_column_slice(observations) - design.offset();
    let required = a.ncols();
    let svd = a.clone().svd(true, true);
    let cut = design.rank_cutoff();
    let (u, vt) = (svd.u.as_ref().expect("u"), svd.v_t.as_ref().expect("v_t"));

    let mut x = DVector::zeros(required);
    let mut determined = Vec::new();
    let mut kept: Vec<f64> = Vec::new();
    // nalgebra does not sort singular values; keep by threshold.
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cut {
            let coeff = u.column(k).dot(&y) / s;
            x += vt.row(k).transpose() * coeff;
            determined.push(vt.row(k).iter().copied().collect());
            kept.push(s);
        }
    }
    let condition = match (kept.iter().copied().reduce(f64::max), kept.iter().copied().reduce(f64::min)) {
        (Some(hi), Some(lo)) => hi / lo,
        _ => f64::INFINITY,
    };
    let residual = (&a * &x - &y).norm();
    let rank = kept.len();

    if rank < required && mode == RecoveryMode::Full {
        return Err(Error::UnderDetermined {
            rank,
            required,
            determined,
        });
    }
    let components: Vec<f64> = x.iter().copied().collect();
    let rho_s = (rank == required)
        .then(|| HermitianBasis::new(design.n).map(|b| b.synthesize(1.0, &components)))
        .transpose()?;
    Ok(Recovery {
        components,
        rho_s,
        rank,
        condition,
        residual,
        determined,
    })
}
