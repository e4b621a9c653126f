//! Particle on a circle coupled to an oscillator through `λ(t)`.
//!
//! The apparatus coordinate obeys `B̈ + (1 + λ²) B = λ π`, with π the
//! conserved system momentum. Everything reduces to the scalar problem
//! `ü + (1 + λ²) u = λ`: two fundamental solutions `u₁, u₂` (Wronskian 1),
//! a particular solution by variation of parameters, and the moments
//! `λᵢ = ∫₀ᵀ λ uᵢ`. With the oscillator in its ground state,
//! `⟨B(t)⟩ = ⟨π⟩ u_par(t)`, which after switch-off is
//! `⟨π⟩ (λ₁ u₂ − λ₂ u₁)`; fitting that curve recovers `⟨π⟩`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest tolerated `|W − 1|` before a solve is rejected.
pub const WRONSKIAN_LIMIT: f64 = 1e-4;
/// Post-window closed form must match the quadrature to this.
pub const JUNCTION_TOL: f64 = 1e-6;
/// Rounding radius for claiming an integer momentum.
pub const INTEGER_RADIUS: f64 = 0.25;
/// Regressor norm below which nothing can be inferred.
pub const REGRESSOR_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum CouplingProfile {
    /// `λ₀` on `[0, T]`.
    Rect { lambda0: f64, window: f64 },
    /// `λ₀ sin²(π t / T)` on `[0, T]`.
    Bump { lambda0: f64, window: f64 },
    /// Linear interpolation through `(times, values)`; zero outside
    /// `[0, times.last()]`.
    Tabulated { times: Vec<f64>, values: Vec<f64> },
    /// `λ₀` for all `t ≥ 0`, never switched off. Test use only.
    Constant { lambda0: f64 },
}

impl CouplingProfile {
    pub fn validate(&self) -> Result<()> {
        match self {
            CouplingProfile::Rect { lambda0, window } | CouplingProfile::Bump { lambda0, window } => {
                if !lambda0.is_finite() || !(window.is_finite() && *window > 0.0) {
                    return Err(Error::InvalidInput("need finite λ₀ and T > 0".into()));
                }
            }
            CouplingProfile::Tabulated { times, values } => {
                if times.len() < 2 || times.len() != values.len() {
                    return Err(Error::Shape("tabulated profile needs >= 2 matching samples".into()));
                }
                if times[0] < 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::InvalidInput("tabulated times must increase from t >= 0".into()));
                }
                if !times.iter().chain(values).all(|x| x.is_finite()) {
                    return Err(Error::InvalidInput("tabulated profile has non-finite entries".into()));
                }
            }
            CouplingProfile::Constant { lambda0 } => {
                if !lambda0.is_finite() {
                    return Err(Error::InvalidInput("λ₀ must be finite".into()));
                }
            }
        }
        Ok(())
    }

    /// Switch-off time `T`; `None` if the coupling never ends.
    pub fn window(&self) -> Option<f64> {
        match self {
            CouplingProfile::Rect { window, .. } | CouplingProfile::Bump { window, .. } => Some(*window),
            CouplingProfile::Tabulated { times, .. } => times.last().copied(),
            CouplingProfile::Constant { .. } => None,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self {
            CouplingProfile::Rect { lambda0, window } => {
                if t <= *window {
                    *lambda0
                } else {
                    0.0
                }
            }
            CouplingProfile::Bump { lambda0, window } => {
                if t <= *window {
                    let s = (std::f64::consts::PI * t / window).sin();
                    lambda0 * s * s
                } else {
                    0.0
                }
            }
            CouplingProfile::Tabulated { times, values } => {
                if t < times[0] || t > *times.last().expect("validated") {
                    return 0.0;
                }
                let k = times.partition_point(|&x| x <= t).clamp(1, times.len() - 1);
                let (t0, t1) = (times[k - 1], times[k]);
                let w = (t - t0) / (t1 - t0);
                values[k - 1] * (1.0 - w) + values[k] * w
            }
            CouplingProfile::Constant { lambda0 } => *lambda0,
        }
    }

    /// Points where λ or its derivative may jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            CouplingProfile::Rect { window, .. } => vec![0.0, *window],
            CouplingProfile::Bump { window, .. } => vec![0.0, *window],
            CouplingProfile::Tabulated { times, .. } => {
                let mut b = vec![0.0];
                b.extend(times.iter().copied());
                b
            }
            CouplingProfile::Constant { .. } => vec![0.0],
        }
    }

    /// λ at `t`, taking the one-sided limit from inside `(a, b)` at the
    /// interval ends.
    fn eval_within(&self, t: f64, a: f64, b: f64) -> f64 {
        let nudge = 1e-9 * (b - a);
        self.eval(t.clamp(a + nudge, b - nudge))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub step: f64,
    /// Switch-off time of the profile that produced it.
    pub window: Option<f64>,
    pub t: Vec<f64>,
    pub u1: Vec<f64>,
    pub du1: Vec<f64>,
    pub u2: Vec<f64>,
    pub du2: Vec<f64>,
    pub wronskian: Vec<f64>,
    /// Empty until [`particular_solution`] fills it.
    pub u_par: Vec<f64>,
    /// `⟨B(t)⟩`; empty until [`b_expectation`] fills it.
    pub b: Vec<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Mean system momentum used to build `b`.
    pub mean_momentum: Option<f64>,
    /// Largest gap between `b` and the post-window closed form.
    pub junction_gap: Option<f64>,
}

impl Trajectory {
    pub fn max_wronskian_drift(&self) -> f64 {
        self.wronskian.iter().map(|w| (w - 1.0).abs()).fold(0.0, f64::max)
    }

    /// `λ₁ u₂(t) − λ₂ u₁(t)` on the grid.
    pub fn regressor(&self) -> Vec<f64> {
        self.u1
            .iter()
            .zip(&self.u2)
            .map(|(a, b)| self.lambda1 * b - self.lambda2 * a)
            .collect()
    }
}

type State = [f64; 4];

fn rhs(lambda: f64, y: &State) -> State {
    let k = 1.0 + lambda * lambda;
    [y[1], -k * y[0], y[3], -k * y[2]]
}

fn axpy(y: &State, h: f64, k: &State) -> State {
    [y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2], y[3] + h * k[3]]
}

/// One classical RK4 step over `[a, b]` with λ sampled inside the step.
fn rk4(profile: &CouplingProfile, y: &State, a: f64, b: f64) -> State {
    let h = b - a;
    let mid = 0.5 * (a + b);
    let l0 = profile.eval_within(a, a, b);
    let lm = profile.eval_within(mid, a, b);
    let l1 = profile.eval_within(b, a, b);
    let k1 = rhs(l0, y);
    let k2 = rhs(lm, &axpy(y, 0.5 * h, &k1));
    let k3 = rhs(lm, &axpy(y, 0.5 * h, &k2));
    let k4 = rhs(l1, &axpy(y, h, &k3));
    let mut out = *y;
    for i in 0..4 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Sub-intervals of `[a, b]` split at breakpoints strictly inside.
fn pieces(breaks: &[f64], a: f64, b: f64) -> Vec<(f64, f64)> {
    let tol = 1e-12 * (b - a);
    let mut cuts = vec![a];
    cuts.extend(breaks.iter().copied().filter(|&p| p > a + tol && p < b - tol));
    cuts.push(b);
    cuts.windows(2).map(|w| (w[0], w[1])).collect()
}

fn grid(t_end: f64, h: f64) -> Result<(usize, f64)> {
    if !(h > 0.0) || !(t_end > 0.0) || !h.is_finite() || !t_end.is_finite() {
        return Err(Error::InvalidInput("need h > 0 and t_end > 0".into()));
    }
    let steps = (t_end / h).round().max(1.0) as usize;
    Ok((steps, t_end / steps as f64))
}

/// Fundamental solutions with `u₁(0) = 1, u̇₁(0) = 0, u₂(0) = 0,
/// u̇₂(0) = 1` on a uniform grid of step ≈ `h` (adjusted so the grid ends
/// exactly at `t_end`).
pub fn solve_modes(profile: &CouplingProfile, t_end: f64, h: f64) -> Result<Trajectory> {
    profile.validate()?;
    let (steps, step) = grid(t_end, h)?;
    let breaks = profile.breakpoints();
    let mut y: State = [1.0, 0.0, 0.0, 1.0];
    let mut traj = Trajectory {
        step,
        window: profile.window(),
        t: Vec::with_capacity(steps + 1),
        u1: Vec::with_capacity(steps + 1),
        du1: Vec::with_capacity(steps + 1),
        u2: Vec::with_capacity(steps + 1),
        du2: Vec::with_capacity(steps + 1),
        wronskian: Vec::with_capacity(steps + 1),
        u_par: Vec::new(),
        b: Vec::new(),
        lambda1: 0.0,
        lambda2: 0.0,
        mean_momentum: None,
        junction_gap: None,
    };
    let push = |traj: &mut Trajectory, t: f64, y: &State| {
        traj.t.push(t);
        traj.u1.push(y[0]);
        traj.du1.push(y[1]);
        traj.u2.push(y[2]);
        traj.du2.push(y[3]);
        traj.wronskian.push(y[0] * y[3] - y[1] * y[2]);
    };
    push(&mut traj, 0.0, &y);
    for k in 0..steps {
        let (a, b) = (k as f64 * step, (k + 1) as f64 * step);
        for (p, q) in pieces(&breaks, a, b) {
            y = rk4(profile, &y, p, q);
        }
        push(&mut traj, b, &y);
    }
    let drift = traj.max_wronskian_drift();
    if !(drift <= WRONSKIAN_LIMIT) {
        return Err(Error::Accuracy { drift, step });
    }
    Ok(traj)
}

/// Cubic Hermite value of a solution at `s ∈ [a, b]` from endpoint values
/// and derivatives.
fn hermite(s: f64, a: f64, b: f64, ya: f64, dya: f64, yb: f64, dyb: f64) -> f64 {
    let h = b - a;
    let x = (s - a) / h;
    let (x2, x3) = (x * x, x * x * x);
    (2.0 * x3 - 3.0 * x2 + 1.0) * ya
        + (x3 - 2.0 * x2 + x) * h * dya
        + (-2.0 * x3 + 3.0 * x2) * yb
        + (x3 - x2) * h * dyb
}

/// Fills `u_par`, `λ₁`, `λ₂`. The integrals `∫₀ᵗ λ uᵢ` are accumulated
/// with Simpson's rule per grid interval (split at breakpoints), with
/// midpoint values from the Hermite interpolant of the solution.
pub fn particular_solution(profile: &CouplingProfile, modes: &mut Trajectory) -> Result<()> {
    let m = modes.t.len();
    let lens = [modes.u1.len(), modes.du1.len(), modes.u2.len(), modes.du2.len()];
    if m < 2 || lens.iter().any(|&l| l != m) {
        return Err(Error::Shape("trajectory arrays disagree in length".into()));
    }
    let breaks = profile.breakpoints();
    let mut a1 = 0.0;
    let mut a2 = 0.0;
    let mut u_par = Vec::with_capacity(m);
    u_par.push(0.0);
    for k in 0..m - 1 {
        let (ta, tb) = (modes.t[k], modes.t[k + 1]);
        let u1 = |s: f64| hermite(s, ta, tb, modes.u1[k], modes.du1[k], modes.u1[k + 1], modes.du1[k + 1]);
        let u2 = |s: f64| hermite(s, ta, tb, modes.u2[k], modes.du2[k], modes.u2[k + 1], modes.du2[k + 1]);
        for (p, q) in pieces(&breaks, ta, tb) {
            let mid = 0.5 * (p + q);
            let (lp, lm, lq) = (
                profile.eval_within(p, p, q),
                profile.eval_within(mid, p, q),
                profile.eval_within(q, p, q),
            );
            let w = (q - p) / 6.0;
            a1 += w * (lp * u1(p) + 4.0 * lm * u1(mid) + lq * u1(q));
            a2 += w * (lp * u2(p) + 4.0 * lm * u2(mid) + lq * u2(q));
        }
        u_par.push(-a2 * modes.u1[k + 1] + a1 * modes.u2[k + 1]);
    }
    modes.u_par = u_par;
    modes.lambda1 = a1;
    modes.lambda2 = a2;
    Ok(())
}

/// Largest `|ü_par + (1 + λ²) u_par − λ|` over grid points whose
/// five-point stencil avoids every breakpoint; `ü` by the fourth-order
/// central difference.
pub fn ode_residual(profile: &CouplingProfile, traj: &Trajectory) -> Result<f64> {
    let u = &traj.u_par;
    if u.len() != traj.t.len() || u.len() < 5 {
        return Err(Error::Shape("particular solution missing or grid too short".into()));
    }
    let h = traj.step;
    let breaks = profile.breakpoints();
    let mut worst: f64 = 0.0;
    for k in 2..u.len() - 2 {
        let (lo, hi) = (traj.t[k - 2], traj.t[k + 2]);
        if breaks.iter().any(|&b| b > lo - 1e-12 && b < hi + 1e-12) {
            continue;
        }
        let d2 = (-u[k + 2] + 16.0 * u[k + 1] - 30.0 * u[k] + 16.0 * u[k - 1] - u[k - 2]) / (12.0 * h * h);
        let l = profile.eval(traj.t[k]);
        worst = worst.max((d2 + (1.0 + l * l) * u[k] - l).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentumState {
    /// `|n⟩⟨n|`.
    Eigen(i64),
    /// `Σ p_n |n⟩⟨n|` as `(n, p_n)` pairs.
    Mixture(Vec<(i64, f64)>),
}

impl MomentumState {
    pub fn mean(&self) -> Result<f64> {
        match self {
            MomentumState::Eigen(n) => Ok(*n as f64),
            MomentumState::Mixture(parts) => {
                if parts.is_empty() || parts.iter().any(|&(_, p)| !(p >= 0.0)) {
                    return Err(Error::InvalidInput("mixture weights must be nonnegative".into()));
                }
                let total: f64 = parts.iter().map(|p| p.1).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidInput(format!("mixture weights sum to {total}")));
                }
                Ok(parts.iter().map(|&(n, p)| n as f64 * p).sum())
            }
        }
    }
}

/// Full trajectory with `⟨B(t)⟩ = ⟨π⟩ u_par(t)`, cross-checked after
/// switch-off against `⟨π⟩ (λ₁ u₂ − λ₂ u₁)`.
pub fn b_expectation(profile: &CouplingProfile, system: &MomentumState, t_end: f64, h: f64) -> Result<Trajectory> {
    let mean = system.mean()?;
    let mut traj = solve_modes(profile, t_end, h)?;
    particular_solution(profile, &mut traj)?;
    traj.b = traj.u_par.iter().map(|u| mean * u).collect();
    traj.mean_momentum = Some(mean);
    if let Some(window) = profile.window() {
        let r = traj.regressor();
        let gap = traj
            .t
            .iter()
            .zip(&traj.b)
            .zip(&r)
            .filter(|((t, _), _)| **t > window)
            .map(|((_, b), r)| (b - mean * r).abs())
            .fold(0.0, f64::max);
        if gap > JUNCTION_TOL {
            return Err(Error::Consistency(format!("post-window form differs by {gap:e}")));
        }
        traj.junction_gap = Some(gap);
    }
    Ok(traj)
}

/// Independent solves for a parameter sweep.
pub fn b_expectation_sweep(
    runs: &[(CouplingProfile, MomentumState)],
    t_end: f64,
    h: f64,
) -> Vec<Result<Trajectory>> {
    runs.par_iter().map(|(p, s)| b_expectation(p, s, t_end, h)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentumEstimate {
    pub mean: f64,
    /// Set when `mean` lies within 0.25 of an integer.
    pub integer: Option<i64>,
    /// RMS misfit of the regression.
    pub fit_rms: f64,
    /// `fit_rms / ‖r‖`, the scale of error in `mean`.
    pub error_bound: f64,
    pub samples: usize,
}

/// Least-squares fit of `⟨B⟩` against `λ₁ u₂ − λ₂ u₁` over `(T, t_end]`.
pub fn recover_momentum(traj: &Trajectory) -> Result<MomentumEstimate> {
    let window = window_of(traj)?;
    let start = traj.t.iter().position(|&t| t > window).unwrap_or(traj.t.len());
    fit_range(traj, start, traj.t.len())
}

/// Same fit restricted to `t ∈ (from, to]`, all past switch-off.
pub fn recover_momentum_window(traj: &Trajectory, from: f64, to: f64) -> Result<MomentumEstimate> {
    if from < window_of(traj)? {
        return Err(Error::InvalidInput("fit window starts before switch-off".into()));
    }
    let start = traj.t.iter().position(|&t| t > from).unwrap_or(traj.t.len());
    let end = traj.t.iter().position(|&t| t > to).unwrap_or(traj.t.len());
    fit_range(traj, start, end)
}

fn window_of(traj: &Trajectory) -> Result<f64> {
    traj.window
        .ok_or_else(|| Error::NoInformation("coupling is never switched off".into()))
}

fn fit_range(traj: &Trajectory, start: usize, end: usize) -> Result<MomentumEstimate> {
    if traj.b.len() != traj.t.len() {
        return Err(Error::Shape("trajectory has no ⟨B(t)⟩ samples".into()));
    }
    let r = traj.regressor();
    let (rr, rb) = (start..end).fold((0.0, 0.0), |(rr, rb), k| (rr + r[k] * r[k], rb + r[k] * traj.b[k]));
    let norm = rr.sqrt();
    if !(norm >= REGRESSOR_FLOOR) {
        return Err(Error::NoInformation("λ₁ = λ₂ = 0: the apparatus never saw the system".into()));
    }
    let mean = rb / rr;
    let samples = end - start;
    let sse: f64 = (start..end).map(|k| (traj.b[k] - mean * r[k]).powi(2)).sum();
    let fit_rms = (sse / samples as f64).sqrt();
    let nearest = mean.round();
    Ok(MomentumEstimate {
        mean,
        integer: ((mean - nearest).abs() <= INTEGER_RADIUS).then_some(nearest as i64),
        fit_rms,
        error_bound: sse.sqrt() / norm,
        samples,
    })
}
