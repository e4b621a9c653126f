//! The line: `ψ̃(k) = (2π)^{−1/2} ∫ e^{−ikx} ψ(x) dx` approximated by an
//! FFT on `x_j = −L + j·2L/M`, `k_m = (m − M/2) π/L`.

use std::f64::consts::PI;

use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::C64;

use super::xlogx;

pub const MIN_POINTS: usize = 16;
/// `|ψ(±L)|` must be below this fraction of `max |ψ|`.
pub const DECAY_TOL: f64 = 1e-8;
pub const NORM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain {
    /// `[−L, L)` sampled at M points.
    Line { half_width: f64 },
    /// `[0, 2π)` sampled at M points.
    Circle,
}

#[derive(Debug, Clone)]
pub struct GridFunction {
    domain: Domain,
    samples: Vec<C64>,
}

impl GridFunction {
    pub fn from_samples(domain: Domain, samples: Vec<C64>) -> Result<Self> {
        if samples.len() < MIN_POINTS || !samples.len().is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "need an even number of at least {MIN_POINTS} samples, got {}",
                samples.len()
            )));
        }
        if let Domain::Line { half_width } = domain {
            if !(half_width > 0.0 && half_width.is_finite()) {
                return Err(Error::InvalidInput("need L > 0".into()));
            }
        }
        if samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("non-finite sample".into()));
        }
        Ok(GridFunction { domain, samples })
    }

    pub fn line(half_width: f64, points: usize, f: impl Fn(f64) -> C64) -> Result<Self> {
        let dx = 2.0 * half_width / points as f64;
        let samples = (0..points).map(|j| f(-half_width + j as f64 * dx)).collect();
        Self::from_samples(Domain::Line { half_width }, samples)
    }

    pub fn circle(points: usize, f: impl Fn(f64) -> C64) -> Result<Self> {
        let dphi = 2.0 * PI / points as f64;
        let samples = (0..points).map(|j| f(j as f64 * dphi)).collect();
        Self::from_samples(Domain::Circle, samples)
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn points(&self) -> usize {
        self.samples.len()
    }

    /// Quadrature weight per sample: `dx` on the line, `1/M` on the
    /// circle (normalised measure `dφ/2π`).
    pub fn weight(&self) -> f64 {
        match self.domain {
            Domain::Line { half_width } => 2.0 * half_width / self.points() as f64,
            Domain::Circle => 1.0 / self.points() as f64,
        }
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        lp(&self.samples, p, self.weight())
    }

    /// Every other sample; `None` once that would drop below the minimum.
    fn coarsen(&self) -> Option<GridFunction> {
        let m = self.points() / 2;
        if m < MIN_POINTS || !m.is_multiple_of(2) {
            return None;
        }
        Some(GridFunction {
            domain: self.domain,
            samples: self.samples.iter().step_by(2).copied().collect(),
        })
    }

    fn half_width(&self) -> Result<f64> {
        match self.domain {
            Domain::Line { half_width } => Ok(half_width),
            Domain::Circle => Err(Error::InvalidInput("expected a function on the line".into())),
        }
    }
}

pub(crate) fn lp(values: &[C64], p: f64, weight: f64) -> f64 {
    let s: f64 = values.iter().map(|z| z.norm().powf(p)).sum();
    (s * weight).powf(1.0 / p)
}

pub(crate) fn fft_forward(data: &mut [C64]) {
    FftPlanner::new().plan_fft_forward(data.len()).process(data);
}

/// `(ψ̃ on k_m, dk)`.
fn line_transform(psi: &GridFunction) -> Result<(Vec<C64>, f64)> {
    let l = psi.half_width()?;
    let m = psi.points();
    let dx = psi.weight();
    let mut y: Vec<C64> = psi
        .samples
        .iter()
        .enumerate()
        .map(|(j, z)| if j % 2 == 0 { *z } else { -z })
        .collect();
    fft_forward(&mut y);
    let dk = PI / l;
    let scale = dx / (2.0 * PI).sqrt();
    let out = y
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let k = (i as f64 - (m / 2) as f64) * dk;
            z * C64::from_polar(scale, k * l)
        })
        .collect();
    Ok((out, dk))
}

fn check_decay(psi: &GridFunction) -> Result<()> {
    let max = psi.samples.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let edge = psi.samples[0].norm().max(psi.samples[psi.points() - 1].norm());
    if !(max > 0.0) {
        return Err(Error::Domain("function vanishes identically".into()));
    }
    if edge >= DECAY_TOL * max {
        return Err(Error::Domain(format!(
            "domain truncation: |ψ| at the grid edge is {:.3e} of its maximum; enlarge L",
            edge / max
        )));
    }
    Ok(())
}

/// `κ(p, q) = (2π/q)^{n/2q} (2π/p)^{−n/2p}` with `1/p + 1/q = 1`.
pub fn hy_constant(p: f64, n: u32) -> Result<f64> {
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::Domain(format!("p = {p} is outside (1, 2]")));
    }
    let q = p / (p - 1.0);
    let n = n as f64;
    Ok((2.0 * PI / q).powf(n / (2.0 * q)) * (2.0 * PI / p).powf(-n / (2.0 * p)))
}

#[derive(Debug, Clone, Serialize)]
pub struct HyReport {
    pub p: f64,
    pub q: f64,
    pub kappa: f64,
    pub norm_p: f64,
    pub transform_norm_q: f64,
    /// `κ ‖ψ‖_p − ‖ψ̃‖_q`.
    pub hy_slack: f64,
    /// Change in the slack when the grid is halved; `None` when the grid
    /// is already minimal.
    pub eps_quad: Option<f64>,
}

fn hy_slack_raw(psi: &GridFunction, p: f64) -> Result<(f64, f64, f64, f64)> {
    let kappa = hy_constant(p, 1)?;
    let q = p / (p - 1.0);
    let (tilde, dk) = line_transform(psi)?;
    let np = psi.lp_norm(p);
    let nq = lp(&tilde, q, dk);
    Ok((kappa * np - nq, kappa, np, nq))
}

/// Hausdorff–Young on the line for a function decaying at `±L`.
pub fn hy_check_rn(psi: &GridFunction, p: f64) -> Result<HyReport> {
    check_decay(psi)?;
    let (slack, kappa, norm_p, norm_q) = hy_slack_raw(psi, p)?;
    let eps_quad = match psi.coarsen() {
        Some(coarse) => Some((hy_slack_raw(&coarse, p)?.0 - slack).abs()),
        None => None,
    };
    Ok(HyReport {
        p,
        q: p / (p - 1.0),
        kappa,
        norm_p,
        transform_norm_q: norm_q,
        hy_slack: slack,
        eps_quad,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyReport {
    #[serde(rename = "S_x")]
    pub s_x: f64,
    #[serde(rename = "S_p")]
    pub s_p: f64,
    pub sum: f64,
    /// `1 + ln π`.
    pub bound: f64,
    /// `dF/dq` at `q = 2⁺` for `F(q) = κ ‖ψ‖_p − ‖ψ̃‖_q`.
    pub hy_derivative: f64,
}

/// Step for the one-sided derivative in q.
const DQ: f64 = 1e-3;

/// Position and momentum entropies of a normalised function on the line.
pub fn entropy_sum_rn(psi: &GridFunction) -> Result<EntropyReport> {
    check_decay(psi)?;
    let norm = psi.lp_norm(2.0);
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::Domain(format!("‖ψ‖₂ = {norm}, expected 1")));
    }
    let (tilde, dk) = line_transform(psi)?;
    let s_x = -psi.weight() * psi.samples.iter().map(|z| xlogx(z.norm_sqr())).sum::<f64>();
    let s_p = -dk * tilde.iter().map(|z| xlogx(z.norm_sqr())).sum::<f64>();
    let f = |q: f64| hy_slack_raw(psi, q / (q - 1.0)).map(|r| r.0);
    // Second-order one-sided difference.
    let hy_derivative = (-3.0 * f(2.0)? + 4.0 * f(2.0 + DQ)? - f(2.0 + 2.0 * DQ)?) / (2.0 * DQ);
    Ok(EntropyReport {
        s_x,
        s_p,
        sum: s_x + s_p,
        bound: 1.0 + PI.ln(),
        hy_derivative,
    })
}
