//! Branch admittance coefficients and the branch power-flow expressions.
//!
//! With series admittance `ys = 1/(r + jx)`, total line charging `ysh = jb`
//! and complex turns ratio `a = tap·e^{j·shift}` on the from side:
//!
//! ```text
//! g_ii + j b_ii = (ys + ysh/2) / |a|²
//! g_ij + j b_ij = -ys / conj(a)
//! g_ji + j b_ji = -ys / a
//! g_jj + j b_jj =  ys + ysh/2
//! ```
//!
//! Flows are evaluated in the `w` variables `w_i = v_i²`,
//! `wR = v_i v_j cos(θ_i - θ_j)`, `wI = v_i v_j sin(θ_i - θ_j)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The eight real coefficients of a branch's pi model.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BranchAdmittance {
    pub g_ii: f64,
    pub b_ii: f64,
    pub g_ij: f64,
    pub b_ij: f64,
    pub g_ji: f64,
    pub b_ji: f64,
    pub g_jj: f64,
    pub b_jj: f64,
}

/// Complex power flows at both ends of a branch (p.u.).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BranchFlow {
    pub p_ij: f64,
    pub q_ij: f64,
    pub p_ji: f64,
    pub q_ji: f64,
}

impl BranchFlow {
    pub fn from_apparent(&self) -> f64 {
        self.p_ij.hypot(self.q_ij)
    }

    pub fn to_apparent(&self) -> f64 {
        self.p_ji.hypot(self.q_ji)
    }
}

/// Computes the admittance coefficients of a branch.
///
/// `charging` is the total line-charging susceptance, `tap` the off-nominal
/// turns-ratio magnitude (already mapped from 0 to 1) and `shift` the phase
/// shift in radians.
pub fn derive_admittances(
    r: f64,
    x: f64,
    charging: f64,
    tap: f64,
    shift: f64,
) -> Result<BranchAdmittance> {
    if r * r + x * x <= 0.0 {
        return Err(Error::ZeroImpedance { branch: 0 });
    }
    let ys = Complex64::new(1.0, 0.0) / Complex64::new(r, x);
    let ysh = Complex64::new(0.0, charging);
    let a = Complex64::from_polar(tap, shift);

    let ii = (ys + ysh * 0.5) / a.norm_sqr();
    let ij = -ys / a.conj();
    let ji = -ys / a;
    let jj = ys + ysh * 0.5;

    Ok(BranchAdmittance {
        g_ii: ii.re,
        b_ii: ii.im,
        g_ij: ij.re,
        b_ij: ij.im,
        g_ji: ji.re,
        b_ji: ji.im,
        g_jj: jj.re,
        b_jj: jj.im,
    })
}

impl BranchAdmittance {
    /// Flows from the lifted variables `(w_i, w_j, wR, wI)`.
    pub fn flows_w(&self, w_i: f64, w_j: f64, w_re: f64, w_im: f64) -> BranchFlow {
        BranchFlow {
            p_ij: self.g_ii * w_i + self.g_ij * w_re + self.b_ij * w_im,
            q_ij: -self.b_ii * w_i - self.b_ij * w_re + self.g_ij * w_im,
            p_ji: self.g_jj * w_j + self.g_ji * w_re - self.b_ji * w_im,
            q_ji: -self.b_jj * w_j - self.b_ji * w_re - self.g_ji * w_im,
        }
    }

    /// Flows from polar voltages at both ends.
    pub fn flows(&self, v_i: f64, v_j: f64, theta_i: f64, theta_j: f64) -> BranchFlow {
        let (sin, cos) = (theta_i - theta_j).sin_cos();
        let vv = v_i * v_j;
        self.flows_w(v_i * v_i, v_j * v_j, vv * cos, vv * sin)
    }
}
