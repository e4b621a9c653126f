//! Reduced-size invariant suite behind `tomoforge selftest`.

use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use tomoforge::ambiguity::{delta_rho, AmbiguityConfig, DiagonalState};
use tomoforge::circle::{b_expectation, recover_momentum, CouplingProfile, MomentumState};
use tomoforge::coupled::{build_design, recover_system, simulate_observations, CoupledConfig, RecoveryMode};
use tomoforge::entropy::{
    entropy_sum_rn, group_entropy_check, random_band_limited, spin_reconstruct, spin_state_oracle, tensor_ops,
    GridFunction, Spin, Su2Quadrature,
};
use tomoforge::linalg::{trace_norm, trace_product};
use tomoforge::reconstruct::{finite_reconstruct, mc_reconstruct, projector_protocol, MonteCarloConfig, StateOracle};
use tomoforge::rng::stream;
use tomoforge::stochastic::{birkhoff_decompose, entropy_monotone, from_unitary, pushforward_check, reassemble};
use tomoforge::su_basis::{build_basis, haar_sample};
use tomoforge::{DensityMatrix, Error, Result, C64};

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub value: f64,
    pub tolerance: f64,
}

/// `value ≤ tolerance` passes.
fn at_most(name: &'static str, value: f64, tolerance: f64) -> Check {
    Check {
        name,
        pass: value <= tolerance,
        value,
        tolerance,
    }
}

fn basis_orthonormality() -> Result<f64> {
    let mut worst: f64 = 0.0;
    for n in 2..=5 {
        let b = build_basis(n)?;
        for (k, a) in b.generators().iter().enumerate() {
            for (l, c) in b.generators().iter().enumerate() {
                let expect = if k == l { 2.0 } else { 0.0 };
                worst = worst.max((trace_product(a, c) - C64::new(expect, 0.0)).norm());
            }
        }
    }
    Ok(worst)
}

fn exact_protocols(seed: u64) -> Result<(f64, f64)> {
    let (mut round, mut agree) = (0.0f64, 0.0f64);
    for n in 2..=5 {
        let basis = build_basis(n)?;
        let mut rng = stream(seed, n as u64);
        for _ in 0..10 {
            let rho = DensityMatrix::random(n, &mut rng);
            let a = finite_reconstruct(&StateOracle::new(rho.clone()), &basis)?;
            let b = projector_protocol(&StateOracle::new(rho.clone()), n)?;
            round = round.max(trace_norm(&(&a.matrix - rho.matrix()))?);
            agree = agree.max((&a.matrix - &b.matrix).camax());
        }
    }
    Ok((round, agree))
}

/// Largest Bloch-component deviation in units of its standard error.
fn monte_carlo(seed: u64) -> Result<f64> {
    let rho = DensityMatrix::random(2, &mut stream(seed, 10));
    let truth = build_basis(2)?.bloch(rho.matrix());
    let rec = mc_reconstruct(&StateOracle::new(rho), 2, &MonteCarloConfig::new(20_000, seed))?;
    Ok(rec
        .bloch
        .iter()
        .zip(&truth)
        .zip(&rec.stderr)
        .map(|((a, b), s)| (a - b).abs() / s)
        .fold(0.0, f64::max))
}

fn ambiguity() -> Result<(f64, f64)> {
    let config = AmbiguityConfig::default();
    let d = DiagonalState::new(vec![0.3, 0.7])?;
    let gap = (delta_rho(&d, 5_000, &config).delta - 2.0 * 0.21f64.sqrt()).abs();
    let pure = delta_rho(&DiagonalState::new(vec![0.0, 1.0, 0.0])?, 5_000, &config).delta;
    Ok((gap, pure))
}

fn stochastic(seed: u64) -> Result<(f64, f64)> {
    let mut rng = stream(seed, 20);
    let (mut push, mut birk) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let n = rng.random_range(2..=5usize);
        let u = haar_sample(n, &mut rng);
        let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
        let total: f64 = raw.iter().sum();
        let lambda = DiagonalState::new(raw.iter().map(|x| x / total).collect())?;
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        push = push.max(pushforward_check(&lambda, &u, &a)?);
        let t = from_unitary(&u)?;
        entropy_monotone(&lambda, &t)?;
        let terms = birkhoff_decompose(&t, 1e-12)?;
        if terms.len() > n * n - 2 * n + 2 {
            return Err(Error::PropertyViolation(format!("{} Birkhoff terms for N = {n}", terms.len())));
        }
        birk = birk.max((reassemble(n, &terms) - t.matrix()).amax());
    }
    Ok((push, birk))
}

/// Recovery error, and 0/1 for whether an uncoupled design is refused.
fn coupled(seed: u64) -> Result<(f64, f64)> {
    let mut rng = stream(seed, 30);
    let configs: Vec<CoupledConfig> = (0..4).map(|_| CoupledConfig::random(2, 2, &mut rng)).collect();
    let rho_s = DensityMatrix::random(2, &mut rng);
    let rho_m = DensityMatrix::random(2, &mut rng);
    let obs = simulate_observations(&configs, &rho_s, &rho_m)?;
    let rec = recover_system(&build_design(&configs, &rho_m)?, &obs, RecoveryMode::Full)?;
    let est = rec.rho_s.ok_or_else(|| Error::NoInformation("no state".into()))?;
    let err = trace_norm(&(est - rho_s.matrix()))?;
    let zero: Vec<CoupledConfig> = configs
        .iter()
        .cloned()
        .map(|mut c| {
            c.couplings.fill(0.0);
            c
        })
        .collect();
    let obs = simulate_observations(&zero, &rho_s, &rho_m)?;
    let refused = matches!(
        recover_system(&build_design(&zero, &rho_m)?, &obs, RecoveryMode::Full),
        Err(Error::UnderDetermined { .. })
    );
    Ok((err, if refused { 0.0 } else { 1.0 }))
}

fn circle() -> Result<(f64, f64)> {
    let bump = CouplingProfile::Bump {
        lambda0: 0.8,
        window: 5.0,
    };
    let traj = b_expectation(&bump, &MomentumState::Eigen(-2), 15.0, 1e-3)?;
    let est = recover_momentum(&traj)?;
    let miss = if est.integer == Some(-2) { (est.mean + 2.0).abs() } else { f64::INFINITY };
    Ok((traj.max_wronskian_drift(), miss))
}

fn entropy(seed: u64) -> Result<(f64, f64, f64)> {
    let g = GridFunction::line(20.0, 4096, |x| {
        C64::new((-x * x / 2.0).exp() / std::f64::consts::PI.powf(0.25), 0.0)
    })?;
    let saturation = (entropy_sum_rn(&g)?.sum - (1.0 + std::f64::consts::PI.ln())).abs();

    let spin = Spin::from_twice(2);
    let rho = DensityMatrix::random(3, &mut stream(seed, 40));
    let rec = spin_reconstruct(
        spin_state_oracle(&rho),
        &tensor_ops(spin)?,
        &Su2Quadrature::for_band_limit(Spin::from_twice(4)),
        None,
    )?;
    let spin_err = trace_norm(&(&rec.matrix - rho.matrix()))?;

    let mut rng = stream(seed, 41);
    let mut worst = f64::INFINITY;
    for _ in 0..5 {
        let data = random_band_limited(Spin::from_twice(4), &mut rng);
        worst = worst.min(group_entropy_check(data.evaluator(), Spin::from_twice(4), 3)?.slack);
    }
    Ok((saturation, spin_err, -worst))
}

/// Runs every check; an error inside a check counts as a failure of that
/// check rather than aborting the suite.
pub fn run(seed: u64) -> (bool, Value) {
    let mut checks = Vec::new();
    let mut errors = Vec::new();
    let mut record = |r: Result<Vec<Check>>, label: &'static str| match r {
        Ok(cs) => checks.extend(cs),
        Err(e) => errors.push(json!({ "check": label, "kind": e.kind(), "message": e.to_string() })),
    };
    record(
        basis_orthonormality().map(|v| vec![at_most("basis Tr(E_k E_l) = 2δ", v, 1e-12)]),
        "basis",
    );
    record(
        exact_protocols(seed).map(|(r, a)| {
            vec![
                at_most("finite protocol round trip ‖ρ̂−ρ‖₁", r, 1e-9),
                at_most("projector protocol agreement", a, 1e-10),
            ]
        }),
        "exact protocols",
    );
    record(
        monte_carlo(seed).map(|z| vec![at_most("Monte-Carlo deviation in standard errors", z, 4.0)]),
        "monte carlo",
    );
    record(
        ambiguity().map(|(g, p)| {
            vec![
                at_most("ambiguity 2√(λ₁λ₂) for N = 2", g, 1e-3),
                at_most("ambiguity of a pure diagonal", p, 0.0),
            ]
        }),
        "ambiguity",
    );
    record(
        stochastic(seed).map(|(p, b)| {
            vec![
                at_most("stochastic pushforward residual", p, 1e-10),
                at_most("Birkhoff reassembly residual", b, 1e-8),
            ]
        }),
        "stochastic",
    );
    record(
        coupled(seed).map(|(e, r)| {
            vec![
                at_most("coupled recovery ‖ρ̂_S−ρ_S‖₁", e, 1e-8),
                at_most("uncoupled design refused", r, 0.0),
            ]
        }),
        "coupled",
    );
    record(
        circle().map(|(d, m)| {
            vec![
                at_most("circle Wronskian drift", d, 1e-8),
                at_most("circle momentum recovery", m, 1e-4),
            ]
        }),
        "circle",
    );
    record(
        entropy(seed).map(|(s, r, g)| {
            vec![
                at_most("Gaussian entropy saturation", s, 1e-6),
                at_most("spin-1 tomogram round trip", r, 1e-7),
                at_most("SU(2) entropy deficit", g, 1e-6),
            ]
        }),
        "entropy",
    );
    let passed = errors.is_empty() && checks.iter().all(|c| c.pass);
    (
        passed,
        json!({ "schema": crate::io::SCHEMA, "passed": passed, "checks": checks, "errors": errors }),
    )
}
