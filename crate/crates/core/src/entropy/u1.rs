//! The circle with normalised measure `dφ/2π` and Fourier series
//! `Φ(φ) = Σ c_m e^{imφ}`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::C64;

use super::rn::{fft_forward, lp, Domain, GridFunction, NORM_TOL};
use super::xlogx;

/// Coefficients above `M/4` in magnitude must be below this.
pub const ALIAS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct U1Report {
    pub p: f64,
    pub q: f64,
    pub norm_p: f64,
    pub coefficient_norm_q: f64,
    /// `‖Φ‖_p − ‖c‖_q`.
    pub hy_slack: f64,
    /// `−∫ |Φ|² ln |Φ|² dφ/2π`; only for `‖Φ‖₂ = 1`.
    pub function_entropy: Option<f64>,
    /// `−Σ |c_m|² ln |c_m|²`; only for `‖Φ‖₂ = 1`.
    pub coefficient_entropy: Option<f64>,
    pub entropy_slack: Option<f64>,
}

/// Coefficients `c_m` for `m = −M/2 .. M/2 − 1` (index `m + M/2`).
fn coefficients(phi: &GridFunction) -> Vec<C64> {
    let m = phi.points();
    let mut c: Vec<C64> = phi.samples().to_vec();
    fft_forward(&mut c);
    let inv = 1.0 / m as f64;
    (0..m).map(|i| c[(i + m / 2) % m] * inv).collect()
}

pub fn u1_check(phi: &GridFunction, p: f64) -> Result<U1Report> {
    if phi.domain() != Domain::Circle {
        return Err(Error::InvalidInput("expected a function on the circle".into()));
    }
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::Domain(format!("p = {p} is outside (1, 2]")));
    }
    let m = phi.points();
    let c = coefficients(phi);
    let half = (m / 2) as i64;
    let quarter = (m / 4) as i64;
    if let Some((i, z)) = c
        .iter()
        .enumerate()
        .find(|(i, z)| (*i as i64 - half).abs() > quarter && z.norm() >= ALIAS_TOL)
    {
        return Err(Error::Resolution(format!(
            "coefficient m = {} has magnitude {:.3e}; use more than {m} points",
            i as i64 - half,
            z.norm()
        )));
    }
    let q = p / (p - 1.0);
    let norm_p = phi.lp_norm(p);
    let coefficient_norm_q = lp(&c, q, 1.0);

    let normalised = (phi.lp_norm(2.0) - 1.0).abs() <= NORM_TOL;
    let (function_entropy, coefficient_entropy) = if normalised {
        let f = -phi.weight() * phi.samples().iter().map(|z| xlogx(z.norm_sqr())).sum::<f64>();
        let k = -c.iter().map(|z| xlogx(z.norm_sqr())).sum::<f64>();
        (Some(f), Some(k))
    } else {
        (None, None)
    };
    Ok(U1Report {
        p,
        q,
        norm_p,
        coefficient_norm_q,
        hy_slack: norm_p - coefficient_norm_q,
        function_entropy,
        coefficient_entropy,
        entropy_slack: function_entropy.zip(coefficient_entropy).map(|(a, b)| a + b),
    })
}
