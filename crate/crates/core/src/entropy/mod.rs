//! Hausdorff–Young constants and entropic uncertainty inequalities on the
//! line, the circle and SU(2), plus the spin-J tensor-operator tomogram.
//!
//! Only one-dimensional grids are supported on ℝⁿ: the inequalities are
//! additive over product states, so n > 1 adds cost but no coverage.

mod rn;
mod spin;
mod su2;
mod u1;

pub use rn::{entropy_sum_rn, hy_check_rn, hy_constant, Domain, EntropyReport, GridFunction, HyReport};
pub use spin::{
    spin_reconstruct, spin_state_oracle, spin_tomogram, tensor_ops, SpinReconstruction, SpinReport,
    TensorOperatorSet, PIVOT_TOL,
};
pub use su2::{
    compose, euler_from_su2, group_entropy_check, haar_euler, random_band_limited, spin_matrices,
    su2_fourier, wigner_d, Euler, FourierTransform, GroupEntropyReport, GroupFourierData, Spin,
    SpinRep, Su2Quadrature,
};
pub use u1::{u1_check, U1Report};

/// `−Σ w ln w` with `0 ln 0 = 0`.
pub(crate) fn xlogx(w: f64) -> f64 {
    if w > 0.0 {
        w * w.ln()
    } else {
        0.0
    }
}
