use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::{Args, Subcommand, ValueEnum};
use rand::Rng;
use serde::Deserialize;
use serde_json::{json, Value};

use tomoforge::ambiguity::{delta_rho, AmbiguityConfig, DiagonalState};
use tomoforge::circle::{b_expectation, recover_momentum, CouplingProfile, MomentumState, Trajectory};
use tomoforge::coupled::{build_design, recover_system, simulate_observations, CoupledConfigJson, RecoveryMode};
use tomoforge::entropy::{
    entropy_sum_rn, group_entropy_check, hy_check_rn, random_band_limited, u1_check, Domain, GridFunction, Spin,
    SpinRep,
};
use tomoforge::json::MatrixJson;
use tomoforge::linalg::{trace_norm, validate_density};
use tomoforge::reconstruct::{
    finite_reconstruct, mc_reconstruct, projector_protocol, MeasurementRecord, MeasurementRecordJson,
    MonteCarloConfig, Reconstruction, StateOracle, TomogramOracle,
};
use tomoforge::rng::stream;
use tomoforge::stochastic::{birkhoff_decompose, from_unitary, reassemble, StochasticMatrix};
use tomoforge::su_basis::{build_basis, haar_sample};
use tomoforge::{CMatrix, DensityMatrix, Error, Tolerances, C64};

use crate::io::{read_json, CliError, CliResult, SCHEMA};

/// Settings shared by every subcommand.
pub struct Context {
    pub seed: u64,
    pub tol: Option<f64>,
}

impl Context {
    fn density_tolerances(&self) -> Tolerances {
        self.tol.map(Tolerances::uniform).unwrap_or_default()
    }
}

fn tagged(mut v: Value) -> Value {
    if let Value::Object(map) = &mut v {
        map.insert("schema".into(), json!(SCHEMA));
    }
    v
}

// ---------------------------------------------------------------- basis

pub fn basis(n: usize) -> CliResult<Value> {
    let b = build_basis(n)?;
    Ok(tagged(json!({ "n": n, "generators": b.export() })))
}

// ----------------------------------------------------------------- tomo

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Protocol {
    /// Cartan frame plus one frame per root, exact.
    Finite,
    /// N² single-projector queries, exact.
    Projector,
    /// Haar Monte-Carlo inversion.
    Mc,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StateKind {
    Random,
    Pure,
    Mixed,
}

#[derive(Debug, Args)]
pub struct StateArgs {
    /// Dimension N (ignored with --in).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum, default_value_t = StateKind::Random)]
    state: StateKind,
    /// Density matrix file in the matrix exchange format.
    #[arg(long = "in")]
    input: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum TomoAction {
    /// Simulate measurements of a state and reconstruct it.
    Reconstruct {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long, value_enum, default_value_t = Protocol::Finite)]
        protocol: Protocol,
        /// Haar samples for the Monte-Carlo protocol.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// Replay a file written by `tomo measure` instead of simulating.
        #[arg(long, conflicts_with_all = ["n", "input"])]
        records: Option<PathBuf>,
    },
    /// Write the frame records the finite protocol needs.
    Measure {
        #[command(flatten)]
        state: StateArgs,
    },
}

fn load_state(args: &StateArgs, ctx: &Context) -> CliResult<DensityMatrix> {
    if let Some(path) = &args.input {
        let m: MatrixJson = read_json(path)?;
        return Ok(validate_density(&m.to_matrix()?, &ctx.density_tolerances())?);
    }
    let n = args
        .n
        .ok_or_else(|| CliError::Usage("give --n or --in".into()))?;
    build_basis(n)?;
    let mut rng = stream(ctx.seed, 0);
    Ok(match args.state {
        StateKind::Random => DensityMatrix::random(n, &mut rng),
        StateKind::Pure => DensityMatrix::random_pure(n, &mut rng),
        StateKind::Mixed => DensityMatrix::maximally_mixed(n),
    })
}

/// Wraps an exact oracle and keeps every frame record it hands out.
struct Recorder {
    inner: StateOracle,
    log: Mutex<Vec<MeasurementRecordJson>>,
}

impl TomogramOracle for Recorder {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn record(&self, u: &CMatrix) -> tomoforge::Result<MeasurementRecord> {
        let r = self.inner.record(u)?;
        self.log.lock().expect("log lock").push(r.to_json());
        Ok(r)
    }
}

/// Answers frame queries from previously written records.
struct Replay {
    dim: usize,
    records: Vec<MeasurementRecord>,
}

/// Frames are matched entrywise to this.
const FRAME_MATCH_TOL: f64 = 1e-9;

impl TomogramOracle for Replay {
    fn dim(&self) -> usize {
        self.dim
    }

    fn record(&self, u: &CMatrix) -> tomoforge::Result<MeasurementRecord> {
        self.records
            .iter()
            .find(|r| r.frame.shape() == u.shape() && (&r.frame - u).camax() <= FRAME_MATCH_TOL)
            .cloned()
            .ok_or_else(|| Error::Data("no record for a frame the protocol requires".into()))
    }
}

#[derive(Deserialize)]
struct RecordFile {
    n: usize,
    records: Vec<MeasurementRecordJson>,
}

pub fn tomo(action: &TomoAction, ctx: &Context) -> CliResult<Value> {
    match action {
        TomoAction::Measure { state } => {
            let rho = load_state(state, ctx)?;
            let n = rho.dim();
            let rec = Recorder {
                inner: StateOracle::new(rho.clone()),
                log: Mutex::new(Vec::new()),
            };
            finite_reconstruct(&rec, &build_basis(n)?)?;
            let records = rec.log.into_inner().expect("log lock");
            Ok(tagged(json!({
                "n": n,
                "state": MatrixJson::from(rho.matrix()),
                "records": records,
            })))
        }
        TomoAction::Reconstruct {
            records: Some(path), protocol, ..
        } => {
            if !matches!(protocol, Protocol::Finite) {
                return Err(CliError::Usage("--records replays the finite protocol only".into()));
            }
            let file: RecordFile = read_json(path)?;
            let records = file
                .records
                .iter()
                .map(MeasurementRecord::from_json)
                .collect::<tomoforge::Result<Vec<_>>>()?;
            let oracle = Replay { dim: file.n, records };
            let rec = finite_reconstruct(&oracle, &build_basis(file.n)?)?;
            Ok(tagged(json!({
                "protocol": "finite",
                "n": file.n,
                "reconstruction": rec.report(),
            })))
        }
        TomoAction::Reconstruct {
            state,
            protocol,
            samples,
            records: None,
        } => {
            let rho = load_state(state, ctx)?;
            let n = rho.dim();
            let oracle = StateOracle::new(rho.clone());
            let rec: Reconstruction = match protocol {
                Protocol::Finite => finite_reconstruct(&oracle, &build_basis(n)?)?,
                Protocol::Projector => projector_protocol(&oracle, n)?,
                Protocol::Mc => mc_reconstruct(&oracle, n, &MonteCarloConfig::new(*samples, ctx.seed))?,
            };
            let err = trace_norm(&(&rec.matrix - rho.matrix()))?;
            Ok(tagged(json!({
                "protocol": format!("{protocol:?}").to_lowercase(),
                "n": n,
                "state": MatrixJson::from(rho.matrix()),
                "reconstruction": rec.report(),
                "trace_error": err,
            })))
        }
    }
}

// ------------------------------------------------------------ ambiguity

pub fn ambiguity(weights: &[f64], budget: usize, restarts: usize, ctx: &Context) -> CliResult<Value> {
    let d = DiagonalState::new(weights.to_vec())?;
    if restarts == 0 {
        return Err(Error::InvalidInput("need at least one restart".into()).into());
    }
    let mut config = AmbiguityConfig {
        restarts,
        seed: ctx.seed,
        ..AmbiguityConfig::default()
    };
    if let Some(t) = ctx.tol {
        config.rel_tol = t;
    }
    let report = delta_rho(&d, budget, &config).report();
    let mut out = serde_json::to_value(report)?;
    out["weights"] = json!(weights);
    out["budget"] = json!(budget);
    Ok(tagged(out))
}

// ----------------------------------------------------------- stochastic

#[derive(Debug, Subcommand)]
pub enum StochasticAction {
    /// Birkhoff–von Neumann decomposition of a doubly stochastic matrix.
    Decompose {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// The doubly stochastic matrix |u_rs|² of a unitary frame.
    FromUnitary {
        /// Unitary in the matrix exchange format; Haar-random if absent.
        #[arg(long = "in", conflicts_with = "n")]
        input: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
    },
}

pub fn stochastic(action: &StochasticAction, ctx: &Context) -> CliResult<Value> {
    match action {
        StochasticAction::Decompose { input } => {
            let m: MatrixJson = read_json(input)?;
            let t = StochasticMatrix::new(m.to_real_matrix(1e-12)?)?;
            let tol = ctx.tol.unwrap_or(1e-12);
            let terms = birkhoff_decompose(&t, tol)?;
            let residual = (reassemble(t.dim(), &terms) - t.matrix()).amax();
            Ok(tagged(json!({ "terms": terms, "residual": residual })))
        }
        StochasticAction::FromUnitary { input, n } => {
            let u = match (input, n) {
                (Some(path), _) => read_json::<MatrixJson>(path)?.to_matrix()?,
                (None, Some(n)) => {
                    build_basis(*n)?;
                    haar_sample(*n, &mut stream(ctx.seed, 0))
                }
                (None, None) => return Err(CliError::Usage("give --in or --n".into())),
            };
            let t = from_unitary(&u)?;
            Ok(tagged(json!({
                "unitary": MatrixJson::from(&u),
                "matrix": MatrixJson::from(t.matrix()),
            })))
        }
    }
}

// -------------------------------------------------------------- coupled

/// Input for `coupled`: configurations, the apparatus state, and either
/// the system state to simulate or the observed apparatus expectations.
#[derive(Deserialize)]
struct CoupledInput {
    configs: Vec<CoupledConfigJson>,
    rho_m: MatrixJson,
    #[serde(default)]
    rho_s: Option<MatrixJson>,
    #[serde(default)]
    observations: Option<Vec<f64>>,
}

pub fn coupled(input: &Path, partial: bool, ctx: &Context) -> CliResult<Value> {
    let inp: CoupledInput = read_json(input)?;
    let tol = ctx.density_tolerances();
    let configs = inp
        .configs
        .iter()
        .map(CoupledConfigJson::to_config)
        .collect::<tomoforge::Result<Vec<_>>>()?;
    let rho_m = validate_density(&inp.rho_m.to_matrix()?, &tol)?;
    let truth = inp
        .rho_s
        .as_ref()
        .map(|m| validate_density(&m.to_matrix()?, &tol))
        .transpose()?;
    let observations = match (&truth, inp.observations) {
        (Some(rho_s), None) => simulate_observations(&configs, rho_s, &rho_m)?,
        (None, Some(obs)) => obs,
        _ => {
            return Err(Error::Config("give exactly one of \"rho_s\" and \"observations\"".into()).into());
        }
    };
    let design = build_design(&configs, &rho_m)?;
    let mode = if partial { RecoveryMode::Partial } else { RecoveryMode::Full };
    let rec = recover_system(&design, &observations, mode)?;
    let mut out = json!({
        "rho_S": rec.rho_s.as_ref().map(MatrixJson::from),
        "components": rec.components,
        "residual": rec.residual,
        "rank": rec.rank,
        "condition": rec.condition,
        "determined": rec.determined,
    });
    if let (Some(rho_s), Some(est)) = (&truth, &rec.rho_s) {
        out["trace_error"] = json!(trace_norm(&(est - rho_s.matrix()))?);
    }
    Ok(tagged(out))
}

// --------------------------------------------------------------- circle

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ProfileKind {
    Rect,
    Bump,
    Constant,
    Tabulated,
}

#[derive(Debug, Args)]
pub struct CircleArgs {
    #[arg(long, value_enum, default_value_t = ProfileKind::Bump)]
    profile: ProfileKind,
    #[arg(long, default_value_t = 0.8, allow_hyphen_values = true)]
    lambda0: f64,
    /// Switch-off time.
    #[arg(long = "T", default_value_t = 5.0)]
    window: f64,
    /// JSON {"times": [...], "values": [...]} for the tabulated profile.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Momentum eigenvalue of the system.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "mixture")]
    n: Option<i64>,
    /// Mixture `n:p,n:p,...` of momentum eigenstates.
    #[arg(long, allow_hyphen_values = true)]
    mixture: Option<String>,
    #[arg(long, default_value_t = 1e-3)]
    h: f64,
    #[arg(long = "t-end", default_value_t = 15.0)]
    t_end: f64,
    /// Keep every k-th grid point in the written trajectory.
    #[arg(long, default_value_t = 1)]
    stride: usize,
}

#[derive(Deserialize)]
struct Table {
    times: Vec<f64>,
    values: Vec<f64>,
}

fn parse_mixture(s: &str) -> CliResult<MomentumState> {
    let parts = s
        .split(',')
        .map(|item| {
            let (n, p) = item
                .split_once(':')
                .ok_or_else(|| CliError::Usage(format!("mixture term {item:?} is not n:p")))?;
            let n: i64 = n.trim().parse().map_err(|_| CliError::Usage(format!("bad momentum {n:?}")))?;
            let p: f64 = p.trim().parse().map_err(|_| CliError::Usage(format!("bad weight {p:?}")))?;
            Ok((n, p))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(MomentumState::Mixture(parts))
}

pub enum CircleOutput {
    Json(Value),
    Csv(String),
}

pub fn circle(args: &CircleArgs, csv: bool) -> CliResult<CircleOutput> {
    if args.stride == 0 {
        return Err(Error::InvalidInput("--stride must be positive".into()).into());
    }
    let profile = match args.profile {
        ProfileKind::Rect => CouplingProfile::Rect {
            lambda0: args.lambda0,
            window: args.window,
        },
        ProfileKind::Bump => CouplingProfile::Bump {
            lambda0: args.lambda0,
            window: args.window,
        },
        ProfileKind::Constant => CouplingProfile::Constant { lambda0: args.lambda0 },
        ProfileKind::Tabulated => {
            let path = args
                .table
                .as_ref()
                .ok_or_else(|| CliError::Usage("the tabulated profile needs --table".into()))?;
            let t: Table = read_json(path)?;
            CouplingProfile::Tabulated {
                times: t.times,
                values: t.values,
            }
        }
    };
    let state = match (&args.mixture, args.n) {
        (Some(m), _) => parse_mixture(m)?,
        (None, Some(n)) => MomentumState::Eigen(n),
        (None, None) => MomentumState::Eigen(1),
    };
    let traj = b_expectation(&profile, &state, args.t_end, args.h)?;
    let keep: Vec<usize> = (0..traj.t.len()).step_by(args.stride).collect();
    if csv {
        let mut s = String::from("t,u1,u2,u_par,B\n");
        for &k in &keep {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                traj.t[k], traj.u1[k], traj.u2[k], traj.u_par[k], traj.b[k]
            ));
        }
        return Ok(CircleOutput::Csv(s));
    }
    let pick = |v: &[f64]| keep.iter().map(|&k| v[k]).collect::<Vec<_>>();
    let (recovery, note) = match recover_momentum(&traj) {
        Ok(est) => (serde_json::to_value(est)?, Value::Null),
        Err(e @ Error::NoInformation(_)) => (Value::Null, json!(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    Ok(CircleOutput::Json(tagged(json!({
        "profile": profile,
        "state": state,
        "step": traj.step,
        "lambda1": traj.lambda1,
        "lambda2": traj.lambda2,
        "wronskian_drift": traj.max_wronskian_drift(),
        "junction_gap": traj.junction_gap,
        "trajectory": trajectory_block(&traj, pick),
        "recovery": recovery,
        "recovery_note": note,
    }))))
}

fn trajectory_block(traj: &Trajectory, pick: impl Fn(&[f64]) -> Vec<f64>) -> Value {
    json!({
        "t": pick(&traj.t),
        "u1": pick(&traj.u1),
        "u2": pick(&traj.u2),
        "u_par": pick(&traj.u_par),
        "B": pick(&traj.b),
    })
}

// -------------------------------------------------------------- entropy

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EntropyDomain {
    Rn,
    Circle,
    Su2,
}

#[derive(Debug, Args)]
pub struct EntropyArgs {
    #[arg(value_enum)]
    domain: EntropyDomain,
    #[arg(long, default_value_t = 1.5)]
    p: f64,
    /// Grid points (default 4096 on the line, 256 on the circle).
    #[arg(long)]
    grid: Option<usize>,
    /// Half-width of the line grid.
    #[arg(long = "L", default_value_t = 20.0)]
    half_width: f64,
    /// Test function: rn gaussian|squeezed|double-bump|chirp;
    /// circle single|two-mode|random; su2 basis|random|constant.
    #[arg(long = "fn")]
    function: Option<String>,
    /// Band limit j on SU(2), an integer or half-integer.
    #[arg(long, default_value_t = 2.0)]
    jmax: f64,
    /// Refinement factor of the SU(2) entropy quadrature.
    #[arg(long, default_value_t = 4)]
    refine: usize,
}

/// Quadrature cost grows as `j³`; 8 keeps a run to seconds.
const MAX_TWICE_JMAX: u32 = 16;

fn unknown_fn(domain: &str, name: &str) -> CliError {
    CliError::Usage(format!("unknown --fn {name:?} for {domain}"))
}

fn normalised_line(half_width: f64, points: usize, f: impl Fn(f64) -> C64) -> CliResult<GridFunction> {
    let raw = GridFunction::line(half_width, points, f)?;
    let norm = raw.lp_norm(2.0);
    let samples = raw.samples().iter().map(|z| z / norm).collect();
    Ok(GridFunction::from_samples(Domain::Line { half_width }, samples)?)
}

pub fn entropy(args: &EntropyArgs, ctx: &Context) -> CliResult<Value> {
    match args.domain {
        EntropyDomain::Rn => {
            let name = args.function.as_deref().unwrap_or("gaussian");
            let grid = args.grid.unwrap_or(4096);
            let l = args.half_width;
            let psi = match name {
                "gaussian" => normalised_line(l, grid, |x| C64::new((-x * x / 2.0).exp(), 0.0))?,
                "squeezed" => normalised_line(l, grid, |x| C64::new((-x * x / 8.0).exp(), 0.0))?,
                "double-bump" => normalised_line(l, grid, |x| {
                    C64::new((-(x - 2.5).powi(2)).exp() + 0.6 * (-(x + 2.0).powi(2) / 0.5).exp(), 0.0)
                })?,
                "chirp" => normalised_line(l, grid, |x| C64::from_polar((-x * x / 3.0).exp(), 0.4 * x * x))?,
                other => return Err(unknown_fn("rn", other)),
            };
            let hy = hy_check_rn(&psi, args.p)?;
            let ent = entropy_sum_rn(&psi)?;
            Ok(tagged(json!({
                "domain": "rn",
                "fn": name,
                "p": hy.p,
                "q": hy.q,
                "kappa": hy.kappa,
                "hy_slack": hy.hy_slack,
                "eps_quad": hy.eps_quad,
                "S_x": ent.s_x,
                "S_p": ent.s_p,
                "sum": ent.sum,
                "bound": ent.bound,
                "hy_derivative": ent.hy_derivative,
            })))
        }
        EntropyDomain::Circle => {
            let name = args.function.as_deref().unwrap_or("two-mode");
            let grid = args.grid.unwrap_or(256);
            let phi = match name {
                "single" => GridFunction::circle(grid, |t| C64::from_polar(1.0, 3.0 * t))?,
                "two-mode" => GridFunction::circle(grid, |t| {
                    (C64::new(1.0, 0.0) + C64::from_polar(1.0, t)) * std::f64::consts::FRAC_1_SQRT_2
                })?,
                "random" => {
                    let mut rng = stream(ctx.seed, 0);
                    let c: Vec<C64> = (0..9)
                        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                        .collect();
                    let norm = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                    GridFunction::circle(grid, |t| {
                        c.iter()
                            .enumerate()
                            .map(|(k, z)| z * C64::from_polar(1.0 / norm, (k as f64 - 4.0) * t))
                            .sum()
                    })?
                }
                other => return Err(unknown_fn("circle", other)),
            };
            let r = u1_check(&phi, args.p)?;
            Ok(tagged(json!({
                "domain": "circle",
                "fn": name,
                "p": r.p,
                "q": r.q,
                "hy_slack": r.hy_slack,
                "S_x": r.function_entropy,
                "S_p": r.coefficient_entropy,
                "entropy_slack": r.entropy_slack,
                "bound": 0.0,
            })))
        }
        EntropyDomain::Su2 => {
            let name = args.function.as_deref().unwrap_or("random");
            let j_max = Spin::new(args.jmax)?;
            if j_max.twice() > MAX_TWICE_JMAX {
                return Err(Error::InvalidInput(format!("--jmax {} exceeds {}", args.jmax, MAX_TWICE_JMAX / 2)).into());
            }
            let report = match name {
                "basis" => {
                    let rep = SpinRep::new(j_max);
                    let scale = (j_max.dim() as f64).sqrt();
                    group_entropy_check(|g| rep.d(g)[(0, 0)] * scale, j_max, args.refine)?
                }
                "constant" => group_entropy_check(|_| C64::new(1.0, 0.0), j_max, args.refine)?,
                "random" => {
                    let data = random_band_limited(j_max, &mut stream(ctx.seed, 0));
                    group_entropy_check(data.evaluator(), j_max, args.refine)?
                }
                other => return Err(unknown_fn("su2", other)),
            };
            Ok(tagged(json!({
                "domain": "su2",
                "fn": name,
                "jmax": j_max.j(),
                "hy_slack": Value::Null,
                "S_x": report.function_entropy,
                "S_p": report.coefficient_entropy,
                "slack": report.slack,
                "weighted_S_p": report.weighted_coefficient_entropy,
                "weighted_slack": report.weighted_slack,
                "bound": 0.0,
                "plancherel_residual": report.plancherel_residual,
                "nodes": report.nodes,
            })))
        }
    }
}
