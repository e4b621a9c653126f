//! Simulated abelian-subalgebra measurements and state reconstruction.
//!
//! Tomogram convention: a frame `u` measures the rotated diagonal algebra
//! `u A_D u*`, so the record is `w_m = Tr ρ (u P_m u*) = (u* ρ u)_mm`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};
use crate::json::MatrixJson;
use crate::linalg::{clip_to_density, validate_density, CMatrix, DensityMatrix, Tolerances};
use crate::rng::{stream, CompensatedSum};
use crate::su_basis::{
    adjoint_first_column, adjoint_rep, build_basis, check_frame, haar_sample, root_rotation,
    shift_unitary, HermitianBasis,
};

/// Slack allowed on record entries and their sum.
pub const RECORD_TOL: f64 = 1e-9;

/// Expectations of the rank-one projectors of one rotated frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub frame: CMatrix,
    pub expectations: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct MeasurementRecordJson {
    pub frame: MatrixJson,
    pub expectations: Vec<f64>,
}

impl MeasurementRecord {
    /// Checks the record is a probability distribution.
    pub fn check(&self) -> Result<()> {
        let total: f64 = self.expectations.iter().sum();
        if let Some(w) = self
            .expectations
            .iter()
            .find(|&&w| !(-RECORD_TOL..=1.0 + RECORD_TOL).contains(&w))
        {
            return Err(Error::Data(format!("expectation {w} outside [0, 1]")));
        }
        if (total - 1.0).abs() > RECORD_TOL {
            return Err(Error::Data(format!("expectations sum to {total}, not 1")));
        }
        Ok(())
    }

    pub fn to_json(&self) -> MeasurementRecordJson {
        MeasurementRecordJson {
            frame: MatrixJson::from(&self.frame),
            expectations: self.expectations.clone(),
        }
    }

    pub fn from_json(j: &MeasurementRecordJson) -> Result<Self> {
        let frame = j.frame.to_matrix()?;
        if frame.nrows() != j.expectations.len() {
            return Err(Error::Shape("frame and expectation list sizes differ".into()));
        }
        let rec = MeasurementRecord {
            frame,
            expectations: j.expectations.clone(),
        };
        rec.check()?;
        Ok(rec)
    }
}

pub fn measure(rho: &DensityMatrix, u: &CMatrix) -> Result<MeasurementRecord> {
    check_frame(u, rho.dim())?;
    let rotated = u.adjoint() * rho.matrix() * u;
    Ok(MeasurementRecord {
        frame: u.clone(),
        expectations: (0..rho.dim()).map(|m| rotated[(m, m)].re).collect(),
    })
}

/// Something that answers measurement queries about a fixed unknown state.
pub trait TomogramOracle: Sync {
    fn dim(&self) -> usize;

    /// Full record of the frame `u`.
    fn record(&self, u: &CMatrix) -> Result<MeasurementRecord>;

    /// The single number `Tr ρ(u P_1 u*)`.
    fn projector(&self, u: &CMatrix) -> Result<f64> {
        Ok(self.record(u)?.expectations[0])
    }
}

/// Exact oracle backed by a known state; counts queries.
#[derive(Debug)]
pub struct StateOracle {
    rho: DensityMatrix,
    frames: AtomicUsize,
    scalars: AtomicUsize,
}

impl StateOracle {
    pub fn new(rho: DensityMatrix) -> Self {
        StateOracle {
            rho,
            frames: AtomicUsize::new(0),
            scalars: AtomicUsize::new(0),
        }
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.rho
    }

    pub fn frame_queries(&self) -> usize {
        self.frames.load(Ordering::Relaxed)
    }

    pub fn scalar_queries(&self) -> usize {
        self.scalars.load(Ordering::Relaxed)
    }
}

impl TomogramOracle for StateOracle {
    fn dim(&self) -> usize {
        self.rho.dim()
    }

    fn record(&self, u: &CMatrix) -> Result<MeasurementRecord> {
        self.frames.fetch_add(1, Ordering::Relaxed);
        measure(&self.rho, u)
    }

    fn projector(&self, u: &CMatrix) -> Result<f64> {
        self.scalars.fetch_add(1, Ordering::Relaxed);
        check_frame(u, self.rho.dim())?;
        let col = u.column(0);
        Ok((col.adjoint() * self.rho.matrix() * col)[(0, 0)].re)
    }
}

/// Result of any reconstruction route.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// `ρ̂_k = Tr(ρ̂ E_k)`.
    pub bloch: Vec<f64>,
    /// `1/N + ½ Σ ρ̂_k E_k`, unprojected.
    pub matrix: CMatrix,
    /// Per-component standard errors (zero for exact protocols).
    pub stderr: Vec<f64>,
    /// Frame records or scalar queries issued.
    pub queries: usize,
    pub valid_density: bool,
}

impl Reconstruction {
    fn assemble(basis: &HermitianBasis, bloch: Vec<f64>, stderr: Vec<f64>, queries: usize) -> Self {
        let matrix = basis.synthesize(1.0, &bloch);
        let valid_density = validate_density(&matrix, &Tolerances::default()).is_ok();
        Reconstruction {
            bloch,
            matrix,
            stderr,
            queries,
            valid_density,
        }
    }

    /// Eigenvalue-clipping projection onto the state space.
    pub fn projected(&self) -> Result<DensityMatrix> {
        clip_to_density(&self.matrix)
    }

    pub fn density(&self) -> Result<DensityMatrix> {
        validate_density(&self.matrix, &Tolerances::default())
    }

    pub fn report(&self) -> ReconstructionReport {
        ReconstructionReport {
            bloch: self.bloch.clone(),
            matrix: MatrixJson::from(&self.matrix),
            stderr: self.stderr.clone(),
            queries: self.queries,
            valid_density: self.valid_density,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconstructionReport {
    pub bloch: Vec<f64>,
    pub matrix: MatrixJson,
    pub stderr: Vec<f64>,
    pub queries: usize,
    pub valid_density: bool,
}

/// Where the reconstructed component sits in the averaged adjoint
/// matrix `∫ D(u)_{αβ} Tr ρ(u P_1 u*) dμ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexConvention {
    /// `ρ_α` sits in column 1: estimate with `D_{α1}`.
    Column,
    /// `ρ_β` sits in row 1: estimate with `D_{1β}`.
    Row,
}

#[derive(Debug, Clone, Copy)]
pub struct MonteCarloConfig {
    pub samples: usize,
    pub seed: u64,
    pub convention: IndexConvention,
    /// Samples per independent seed stream.
    pub chunk: usize,
}

impl MonteCarloConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        MonteCarloConfig {
            samples,
            seed,
            convention: IndexConvention::Column,
            chunk: 1024,
        }
    }
}

/// `1/((N+1) sqrt(2N(N-1)))`, the Haar average of `D_{k1}(u)²` times the
/// orbit coefficient `sqrt((N-1)/(2N))`.
pub fn inversion_constant(n: usize) -> f64 {
    let nf = n as f64;
    1.0 / ((nf + 1.0) * (2.0 * nf * (nf - 1.0)).sqrt())
}

#[derive(Default, Clone)]
struct Moments {
    sum: Vec<CompensatedSum>,
    sum_sq: Vec<CompensatedSum>,
}

impl Moments {
    fn new(d: usize) -> Self {
        Moments {
            sum: vec![CompensatedSum::default(); d],
            sum_sq: vec![CompensatedSum::default(); d],
        }
    }

    fn merge(mut self, other: &Moments) -> Self {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            a.merge(b);
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            a.merge(b);
        }
        self
    }
}

/// Haar Monte-Carlo inversion of the single-projector tomogram.
///
/// Samples are split into chunks of `config.chunk`, each drawn from its own
/// seed stream, so the result does not depend on the number of worker
/// threads.
pub fn mc_reconstruct<O: TomogramOracle + ?Sized>(
    oracle: &O,
    n: usize,
    config: &MonteCarloConfig,
) -> Result<Reconstruction> {
    if config.samples == 0 {
        return Err(Error::InvalidInput("Monte-Carlo needs at least one sample".into()));
    }
    if oracle.dim() != n {
        return Err(Error::Shape(format!("oracle dimension {} != {n}", oracle.dim())));
    }
    let basis = build_basis(n)?;
    let d = basis.len();
    let chunk = config.chunk.max(1);
    let chunks = config.samples.div_ceil(chunk);
    let partials: Vec<Result<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(config.seed, c as u64);
            let count = chunk.min(config.samples - c * chunk);
            let mut mom = Moments::new(d);
            for _ in 0..count {
                let u = haar_sample(n, &mut rng);
                let w = oracle.projector(&u)?;
                let weights = match config.convention {
                    IndexConvention::Column => adjoint_first_column(&u, &basis),
                    IndexConvention::Row => {
                        let full = adjoint_rep(&u, &basis)?;
                        full.0.row(0).iter().copied().collect()
                    }
                };
                for (k, wk) in weights.iter().enumerate() {
                    let x = wk * w;
                    mom.sum[k].add(x);
                    mom.sum_sq[k].add(x * x);
                }
            }
            Ok(mom)
        })
        .collect();
    let mut total = Moments::new(d);
    for p in partials {
        total = total.merge(&p?);
    }
    let m = config.samples as f64;
    let scale = 1.0 / inversion_constant(n);
    let mut bloch = Vec::with_capacity(d);
    let mut stderr = Vec::with_capacity(d);
    for k in 0..d {
        let mean = total.sum[k].value() / m;
        let var = if config.samples > 1 {
            ((total.sum_sq[k].value() / m - mean * mean) * m / (m - 1.0)).max(0.0)
        } else {
            0.0
        };
        bloch.push(scale * mean);
        stderr.push(scale * (var / m).sqrt());
    }
    Ok(Reconstruction::assemble(&basis, bloch, stderr, config.samples))
}

/// Decide the index placement of the inversion formula numerically: run
/// both placements against a known qubit state and keep the one that
/// reproduces it.
pub fn calibrate_index_convention(samples: usize, seed: u64) -> Result<IndexConvention> {
    let basis = build_basis(2)?;
    // Bloch vector (0.3, 0.5, -0.4): distinct components make a transposed
    // placement visible.
    let target = [0.3, 0.5, -0.4];
    let rho = validate_density(&basis.synthesize(1.0, &target), &Tolerances::default())?;
    let oracle = StateOracle::new(rho);
    let mut best = (f64::INFINITY, IndexConvention::Column);
    for convention in [IndexConvention::Column, IndexConvention::Row] {
        let mut cfg = MonteCarloConfig::new(samples, seed);
        cfg.convention = convention;
        let rec = mc_reconstruct(&oracle, 2, &cfg)?;
        let err: f64 = rec
            .bloch
            .iter()
            .zip(target)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        if err < best.0 {
            best = (err, convention);
        }
    }
    Ok(best.1)
}

/// Cartan frame plus one root frame per root generator: `1 + N(N-1)`
/// frame records, exact inversion.
///
/// If the Cartan record is a point mass on `m`, the only lift is the pure
/// projector `P_m`, which is returned whatever the root records say.
pub fn finite_reconstruct<O: TomogramOracle + ?Sized>(
    oracle: &O,
    basis: &HermitianBasis,
) -> Result<Reconstruction> {
    let n = basis.dim();
    if oracle.dim() != n {
        return Err(Error::Shape(format!("oracle dimension {} != {n}", oracle.dim())));
    }
    let cartan = oracle.record(&CMatrix::identity(n, n))?;
    cartan.check()?;
    let mut bloch = vec![0.0; basis.len()];
    for k in basis.cartan_indices() {
        let e = basis.generator(k);
        bloch[k] = (0..n).map(|m| e[(m, m)].re * cartan.expectations[m]).sum();
    }
    let mut queries = 1;
    for k in basis.root_indices() {
        let label = basis.root_label(k).expect("root index");
        let rec = oracle.record(&root_rotation(k, basis)?)?;
        rec.check()?;
        queries += 1;
        bloch[k] = rec.expectations[label.i] - rec.expectations[label.j];
    }
    if let Some(m) = point_mass(&cartan.expectations) {
        let pure = DensityMatrix::basis_projector(n, m);
        return Ok(Reconstruction::assemble(basis, basis.bloch(pure.matrix()), vec![0.0; basis.len()], queries));
    }
    Ok(Reconstruction::assemble(basis, bloch, vec![0.0; basis.len()], queries))
}

fn point_mass(w: &[f64]) -> Option<usize> {
    w.iter().position(|&x| (x - 1.0).abs() <= RECORD_TOL)
}

/// N² single-projector queries: N shift frames for the diagonal and one
/// frame `u_k s_i` per root, where `s_i` carries P_1 to P_i.
pub fn projector_protocol<O: TomogramOracle + ?Sized>(oracle: &O, n: usize) -> Result<Reconstruction> {
    let basis = build_basis(n)?;
    if oracle.dim() != n {
        return Err(Error::Shape(format!("oracle dimension {} != {n}", oracle.dim())));
    }
    let mut queries = 0;
    let mut diag = Vec::with_capacity(n);
    for k in 1..=n {
        let w = oracle.projector(&shift_unitary(k, n)?)?;
        queries += 1;
        if !(-RECORD_TOL..=1.0 + RECORD_TOL).contains(&w) {
            return Err(Error::Data(format!("projector expectation {w} outside [0, 1]")));
        }
        diag.push(w);
    }
    let total: f64 = diag.iter().sum();
    if (total - 1.0).abs() > RECORD_TOL {
        return Err(Error::Data(format!("diagonal expectations sum to {total}, not 1")));
    }
    let mut bloch = vec![0.0; basis.len()];
    for k in basis.cartan_indices() {
        let e = basis.generator(k);
        bloch[k] = (0..n).map(|m| e[(m, m)].re * diag[m]).sum();
    }
    for k in basis.root_indices() {
        let label = basis.root_label(k).expect("root index");
        // u_k P_i u_k* = ½(P_i + P_j + Ẽ_k).
        let frame = root_rotation(k, &basis)? * shift_unitary(label.i + 1, n)?;
        let q = oracle.projector(&frame)?;
        queries += 1;
        bloch[k] = 2.0 * q - diag[label.i] - diag[label.j];
    }
    Ok(Reconstruction::assemble(&basis, bloch, vec![0.0; basis.len()], queries))
}

/// Monte-Carlo check of `∫ D_{αβ} D_{γλ} dμ = δ_{αγ} δ_{βλ} / (N²-1)`.
/// Returns the largest absolute deviation over all index quadruples.
pub fn orthogonality_check(n: usize, samples: usize, seed: u64) -> Result<f64> {
    let (mean, _) = orthogonality_moments(n, samples, seed)?;
    let d = n * n - 1;
    let target = 1.0 / d as f64;
    let mut worst = 0.0f64;
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                for l in 0..d {
                    let expect = if a == c && b == l { target } else { 0.0 };
                    worst = worst.max((mean[(a * d + b, c * d + l)] - expect).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Sample means of `D_{αβ} D_{γλ}` (indexed `(α d + β, γ d + λ)`) and of
/// `D_{αβ}` itself.
pub fn orthogonality_moments(n: usize, samples: usize, seed: u64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if samples == 0 {
        return Err(Error::InvalidInput("need at least one sample".into()));
    }
    let basis = build_basis(n)?;
    let d = basis.len();
    let chunk = 1024;
    let chunks = samples.div_ceil(chunk);
    let parts: Vec<Result<(DMatrix<f64>, DMatrix<f64>)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, c as u64);
            let count = chunk.min(samples - c * chunk);
            let mut second = DMatrix::zeros(d * d, d * d);
            let mut first = DMatrix::zeros(d, d);
            for _ in 0..count {
                let dm = adjoint_rep(&haar_sample(n, &mut rng), &basis)?.0;
                let flat: Vec<f64> = (0..d * d).map(|i| dm[(i / d, i % d)]).collect();
                for i in 0..d * d {
                    for j in 0..d * d {
                        second[(i, j)] += flat[i] * flat[j];
                    }
                }
                first += dm;
            }
            Ok((second, first))
        })
        .collect();
    let mut second = DMatrix::zeros(d * d, d * d);
    let mut first = DMatrix::zeros(d, d);
    for p in parts {
        let (s, f) = p?;
        second += s;
        first += f;
    }
    Ok((second / samples as f64, first / samples as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{trace_norm, ONE};
    use nalgebra::Complex;

    fn hadamard() -> CMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        CMatrix::from_row_slice(2, 2, &[s, s, s, -s].map(|x| Complex::new(x, 0.0)))
    }

    #[test]
    fn identity_frame_reads_the_diagonal() {
        let rho = validate_density(&crate::linalg::diag(&[0.2, 0.5, 0.3]), &Tolerances::default()).unwrap();
        let rec = measure(&rho, &CMatrix::identity(3, 3)).unwrap();
        assert_eq!(rec.expectations, vec![0.2, 0.5, 0.3]);
    }

    #[test]
    fn maximally_mixed_is_flat_in_every_frame() {
        let rho = DensityMatrix::maximally_mixed(4);
        let u = haar_sample(4, &mut stream(1, 0));
        for w in measure(&rho, &u).unwrap().expectations {
            assert!((w - 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn sigma1_eigenframe_record() {
        // ρ = ½(1 + 0.6 σ₁); u*ρu = ½(1 + 0.6 σ₃) for the Hadamard frame.
        let basis = build_basis(2).unwrap();
        let rho = validate_density(&basis.synthesize(1.0, &[0.0, 0.6, 0.0]), &Tolerances::default()).unwrap();
        let rec = measure(&rho, &hadamard()).unwrap();
        assert!((rec.expectations[0] - 0.8).abs() < 1e-14);
        assert!((rec.expectations[1] - 0.2).abs() < 1e-14);
    }

    #[test]
    fn measure_rejects_wrong_frame_size() {
        let rho = DensityMatrix::maximally_mixed(2);
        assert!(matches!(measure(&rho, &CMatrix::identity(3, 3)), Err(Error::Shape(_))));
    }

    #[test]
    fn inversion_constant_matches_haar_second_moment() {
        for n in 2..=5 {
            let nf = n as f64;
            let via_moment = ((nf - 1.0) / (2.0 * nf)).sqrt() / (nf * nf - 1.0);
            assert!((inversion_constant(n) - via_moment).abs() < 1e-15);
        }
    }

    #[test]
    fn calibration_selects_column_placement() {
        assert_eq!(calibrate_index_convention(20_000, 3).unwrap(), IndexConvention::Column);
    }

    #[test]
    fn mc_isotropic_state_gives_null_components() {
        for n in 2..=3 {
            let oracle = StateOracle::new(DensityMatrix::maximally_mixed(n));
            let rec = mc_reconstruct(&oracle, n, &MonteCarloConfig::new(10_000, 17)).unwrap();
            for (b, s) in rec.bloch.iter().zip(&rec.stderr) {
                assert!(b.abs() <= 5.0 * s + 1e-15, "{b} vs {s}");
            }
        }
    }

    #[test]
    fn mc_recovers_pure_state() {
        let rho = DensityMatrix::basis_projector(2, 0);
        let oracle = StateOracle::new(rho.clone());
        let rec = mc_reconstruct(&oracle, 2, &MonteCarloConfig::new(100_000, 5)).unwrap();
        let err = trace_norm(&(&rec.matrix - rho.matrix())).unwrap();
        let sigma = rec.stderr.iter().map(|s| s * s).sum::<f64>().sqrt();
        assert!(err <= 0.05);
        assert!(err <= 3.0 * sigma + 1e-3, "{err} vs 3σ = {}", 3.0 * sigma);
        assert_eq!(rec.queries, 100_000);
        assert_eq!(oracle.scalar_queries(), 100_000);
    }

    #[test]
    fn mc_is_independent_of_thread_count() {
        let oracle = StateOracle::new(DensityMatrix::random(3, &mut stream(4, 0)));
        let cfg = MonteCarloConfig::new(5000, 8);
        let a = mc_reconstruct(&oracle, 3, &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| mc_reconstruct(&oracle, 3, &cfg).unwrap());
        assert_eq!(a.bloch, b.bloch);
    }

    #[test]
    fn mc_stderr_halves_with_quadrupled_samples() {
        // Doubling M scales stderr by 1/√2; averaged over repeated runs.
        let oracle = StateOracle::new(DensityMatrix::random(2, &mut stream(6, 0)));
        let mean_se = |m: usize| -> f64 {
            (0..20)
                .map(|r| {
                    let rec = mc_reconstruct(&oracle, 2, &MonteCarloConfig::new(m, 100 + r)).unwrap();
                    rec.stderr.iter().sum::<f64>() / rec.stderr.len() as f64
                })
                .sum::<f64>()
                / 20.0
        };
        let ratio = mean_se(4000) / mean_se(2000);
        assert!((ratio / std::f64::consts::FRAC_1_SQRT_2 - 1.0).abs() < 0.15, "{ratio}");
    }

    #[test]
    fn mc_estimator_is_unbiased() {
        let rho = DensityMatrix::random(2, &mut stream(21, 0));
        let truth = build_basis(2).unwrap().bloch(rho.matrix());
        let oracle = StateOracle::new(rho);
        let runs = 200;
        let mut mean = [0.0; 3];
        let mut var = [0.0; 3];
        for r in 0..runs {
            let rec = mc_reconstruct(&oracle, 2, &MonteCarloConfig::new(1000, 1000 + r)).unwrap();
            for k in 0..3 {
                mean[k] += rec.bloch[k] / runs as f64;
                var[k] += rec.stderr[k].powi(2);
            }
        }
        for k in 0..3 {
            let pooled = var[k].sqrt() / runs as f64;
            assert!((mean[k] - truth[k]).abs() <= 4.0 * pooled, "component {k}");
        }
    }

    #[test]
    fn mc_rejects_zero_samples_and_wrong_dimension() {
        let oracle = StateOracle::new(DensityMatrix::maximally_mixed(2));
        assert!(matches!(
            mc_reconstruct(&oracle, 2, &MonteCarloConfig::new(0, 1)),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            mc_reconstruct(&oracle, 3, &MonteCarloConfig::new(10, 1)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn finite_round_trip_and_query_count() {
        let mut rng = stream(31, 0);
        for n in 2..=5 {
            let basis = build_basis(n).unwrap();
            for _ in 0..10 {
                let rho = DensityMatrix::random(n, &mut rng);
                let oracle = StateOracle::new(rho.clone());
                let rec = finite_reconstruct(&oracle, &basis).unwrap();
                assert!(trace_norm(&(&rec.matrix - rho.matrix())).unwrap() <= 1e-9);
                assert_eq!(rec.queries, 1 + n * (n - 1));
                assert_eq!(oracle.frame_queries(), 1 + n * (n - 1));
                assert!(rec.valid_density);
            }
        }
    }

    #[test]
    fn diagonal_state_has_symmetric_root_records() {
        let basis = build_basis(3).unwrap();
        let rho = validate_density(&crate::linalg::diag(&[0.5, 0.3, 0.2]), &Tolerances::default()).unwrap();
        for k in basis.root_indices() {
            let label = basis.root_label(k).unwrap();
            let rec = measure(&rho, &root_rotation(k, &basis).unwrap()).unwrap();
            assert!((rec.expectations[label.i] - rec.expectations[label.j]).abs() < 1e-10);
        }
        let rec = finite_reconstruct(&StateOracle::new(rho), &basis).unwrap();
        for k in basis.root_indices() {
            assert!(rec.bloch[k].abs() < 1e-10);
        }
    }

    #[test]
    fn plus_state_components() {
        // |+><+| = ½(1 + σ₁): components (σ₃, σ₁, σ₂) = (0, 1, 0).
        let basis = build_basis(2).unwrap();
        let psi = nalgebra::DVector::from_vec(vec![ONE, ONE]);
        let rho = DensityMatrix::pure(&psi).unwrap();
        let rec = finite_reconstruct(&StateOracle::new(rho), &basis).unwrap();
        for (got, want) in rec.bloch.iter().zip([0.0, 1.0, 0.0]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    struct Inconsistent;
    impl TomogramOracle for Inconsistent {
        fn dim(&self) -> usize {
            2
        }
        fn record(&self, u: &CMatrix) -> Result<MeasurementRecord> {
            Ok(MeasurementRecord {
                frame: u.clone(),
                expectations: vec![0.7, 0.7],
            })
        }
    }

    #[test]
    fn inconsistent_oracle_is_a_data_error() {
        let basis = build_basis(2).unwrap();
        assert!(matches!(finite_reconstruct(&Inconsistent, &basis), Err(Error::Data(_))));
        assert!(matches!(projector_protocol(&Inconsistent, 2), Err(Error::Data(_))));
    }

    /// Exact Cartan record, root records shifted by a fixed perturbation.
    struct NoisyRoots {
        rho: DensityMatrix,
        noise: f64,
    }
    impl TomogramOracle for NoisyRoots {
        fn dim(&self) -> usize {
            self.rho.dim()
        }
        fn record(&self, u: &CMatrix) -> Result<MeasurementRecord> {
            let mut rec = measure(&self.rho, u)?;
            let n = self.rho.dim();
            if *u != CMatrix::identity(n, n) {
                // Move weight between the first two outcomes, keeping a distribution.
                let shift = self.noise.min(rec.expectations[1]);
                rec.expectations[0] += shift;
                rec.expectations[1] -= shift;
            }
            Ok(rec)
        }
    }

    #[test]
    fn point_mass_cartan_record_forces_the_pure_lift() {
        for n in 2..=4 {
            let basis = build_basis(n).unwrap();
            for m in 0..n {
                let rho = DensityMatrix::basis_projector(n, m);
                for noise in [0.0, 1e-3, 0.2] {
                    let rec = finite_reconstruct(&NoisyRoots { rho: rho.clone(), noise }, &basis).unwrap();
                    assert!((&rec.matrix - rho.matrix()).camax() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn projector_protocol_uses_n_squared_queries_and_agrees() {
        let mut rng = stream(41, 0);
        for n in 2..=4 {
            let basis = build_basis(n).unwrap();
            for _ in 0..50 {
                let rho = DensityMatrix::random(n, &mut rng);
                let oracle = StateOracle::new(rho.clone());
                let a = projector_protocol(&oracle, n).unwrap();
                let b = finite_reconstruct(&oracle, &basis).unwrap();
                assert_eq!(a.queries, n * n);
                assert_eq!(oracle.scalar_queries(), n * n);
                assert!((&a.matrix - &b.matrix).camax() < 1e-10);
                assert!(trace_norm(&(&a.matrix - rho.matrix())).unwrap() <= 1e-9);
            }
        }
    }

    #[test]
    fn projector_protocol_on_p1() {
        struct Logged(StateOracle, std::sync::Mutex<Vec<f64>>);
        impl TomogramOracle for Logged {
            fn dim(&self) -> usize {
                self.0.dim()
            }
            fn record(&self, u: &CMatrix) -> Result<MeasurementRecord> {
                self.0.record(u)
            }
            fn projector(&self, u: &CMatrix) -> Result<f64> {
                let w = self.0.projector(u)?;
                self.1.lock().unwrap().push(w);
                Ok(w)
            }
        }
        let n = 3;
        let oracle = Logged(StateOracle::new(DensityMatrix::basis_projector(n, 0)), Default::default());
        projector_protocol(&oracle, n).unwrap();
        let log = oracle.1.lock().unwrap();
        assert_eq!(log[0], 1.0);
        assert!(log[1..n].iter().all(|&w| w == 0.0));
    }

    #[test]
    fn orthogonality_relation_for_su2() {
        let dev = orthogonality_check(2, 100_000, 12).unwrap();
        assert!(dev <= 0.02, "{dev}");
        let (second, first) = orthogonality_moments(2, 100_000, 13).unwrap();
        let d = 3;
        // Each D_{ab}² has variance below 1 over the group; 3σ band.
        let band = 3.0 / (100_000f64).sqrt();
        for a in 0..d {
            for b in 0..d {
                let diag = second[(a * d + b, a * d + b)];
                assert!((diag - 1.0 / 3.0).abs() < band);
                assert!(first[(a, b)].abs() < 3.0 / (3.0 * 100_000f64).sqrt());
            }
        }
    }

    #[test]
    fn record_json_round_trip() {
        let rho = DensityMatrix::random(3, &mut stream(2, 0));
        let rec = measure(&rho, &haar_sample(3, &mut stream(2, 1))).unwrap();
        let text = serde_json::to_string(&rec.to_json()).unwrap();
        let back: MeasurementRecordJson = serde_json::from_str(&text).unwrap();
        assert_eq!(MeasurementRecord::from_json(&back).unwrap(), rec);
    }
}
