//! Branch subproblem in polar voltage and slack variables.
//!
//! Variables are `(v_i, v_j, θ_i, θ_j, s_ij, s_ji)`; the slack pair is
//! dropped for branches without a rate limit. Flows are eliminated through
//! the pi-model expressions so the problem is purely bound-constrained:
//!
//! ```text
//! Σ_k  y_k (e_k - x̄_k + z_k) + ρ_k/2 (e_k - x̄_k + z_k)²       k = 8 coupling rows
//! + Σ_e λ̃_e (p_e² + q_e² + s_e) + ρ̃/2 (p_e² + q_e² + s_e)²    e = from, to ends
//! ```
//!
//! where `e_k` is the branch-side expression of row `k` (a flow, `v²` or an
//! angle).

use crate::decomp::{P_IJ, P_JI, Q_IJ, Q_JI, THETA_I, THETA_J, W_I, W_J};
use crate::netdata::{BranchAdmittance, BranchFlow, ANGLE_BOUND};
use crate::tron::BoxNlp;

/// Value, gradient and Hessian of a scalar in `(v_i, v_j, θ_i, θ_j)`.
#[derive(Debug, Clone, Copy, Default)]
struct Jet {
    v: f64,
    g: [f64; 4],
    h: [[f64; 4]; 4],
}

impl Jet {
    fn combine(a: f64, x: &Jet, b: f64, y: &Jet, c: f64, w: &Jet, d: f64) -> Jet {
        let mut out = Jet { v: a * x.v + b * y.v + c * w.v + d, ..Jet::default() };
        for i in 0..4 {
            out.g[i] = a * x.g[i] + b * y.g[i] + c * w.g[i];
            for j in 0..4 {
                out.h[i][j] = a * x.h[i][j] + b * y.h[i][j] + c * w.h[i][j];
            }
        }
        out
    }
}

/// Jets of `v_i²`, `v_j²`, `wR`, `wI`.
fn lifted_jets(vi: f64, vj: f64, ti: f64, tj: f64) -> [Jet; 4] {
    let (s, c) = (ti - tj).sin_cos();
    let vv = vi * vj;

    let mut wi = Jet { v: vi * vi, ..Jet::default() };
    wi.g[0] = 2.0 * vi;
    wi.h[0][0] = 2.0;

    let mut wj = Jet { v: vj * vj, ..Jet::default() };
    wj.g[1] = 2.0 * vj;
    wj.h[1][1] = 2.0;

    let mut wr = Jet { v: vv * c, ..Jet::default() };
    wr.g = [vj * c, vi * c, -vv * s, vv * s];
    wr.h = [
        [0.0, c, -vj * s, vj * s],
        [c, 0.0, -vi * s, vi * s],
        [-vj * s, -vi * s, -vv * c, vv * c],
        [vj * s, vi * s, vv * c, -vv * c],
    ];

    let mut wim = Jet { v: vv * s, ..Jet::default() };
    wim.g = [vj * s, vi * s, vv * c, -vv * c];
    wim.h = [
        [0.0, s, vj * c, -vj * c],
        [s, 0.0, vi * c, -vi * c],
        [vj * c, vi * c, -vv * s, vv * s],
        [-vj * c, -vi * c, vv * s, -vv * s],
    ];

    [wi, wj, wr, wim]
}

/// Jets of `p_ij, q_ij, p_ji, q_ji`.
fn flow_jets(y: &BranchAdmittance, x: &[f64]) -> [Jet; 4] {
    let [wi, wj, wr, wim] = lifted_jets(x[0], x[1], x[2], x[3]);
    [
        Jet::combine(y.g_ii, &wi, y.g_ij, &wr, y.b_ij, &wim, 0.0),
        Jet::combine(-y.b_ii, &wi, -y.b_ij, &wr, y.g_ij, &wim, 0.0),
        Jet::combine(y.g_jj, &wj, y.g_ji, &wr, -y.b_ji, &wim, 0.0),
        Jet::combine(-y.b_jj, &wj, -y.b_ji, &wr, -y.g_ji, &wim, 0.0),
    ]
}

/// Line-limit data of a rate-limited branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineLimit {
    /// Squared (tightened) apparent-power limit; slacks live in `[-limit_sq, 0]`.
    pub limit_sq: f64,
    pub mult: [f64; 2],
    pub rho: f64,
}

/// One branch NLP instance.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchProblem {
    pub y: BranchAdmittance,
    /// Bus-side values `x̄` of the 8 coupling rows.
    pub target: [f64; 8],
    pub z: [f64; 8],
    pub mult: [f64; 8],
    pub rho: [f64; 8],
    pub limit: Option<LineLimit>,
    lower: [f64; 6],
    upper: [f64; 6],
}

impl BranchProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        y: BranchAdmittance,
        v_bounds_i: (f64, f64),
        v_bounds_j: (f64, f64),
        target: [f64; 8],
        z: [f64; 8],
        mult: [f64; 8],
        rho: [f64; 8],
        limit: Option<LineLimit>,
    ) -> Self {
        let s_lo = limit.map_or(0.0, |l| -l.limit_sq);
        Self {
            y,
            target,
            z,
            mult,
            rho,
            limit,
            lower: [v_bounds_i.0, v_bounds_j.0, -ANGLE_BOUND, -ANGLE_BOUND, s_lo, s_lo],
            upper: [v_bounds_i.1, v_bounds_j.1, ANGLE_BOUND, ANGLE_BOUND, 0.0, 0.0],
        }
    }

    pub fn flows(&self, x: &[f64]) -> BranchFlow {
        self.y.flows(x[0], x[1], x[2], x[3])
    }

    /// Branch-side values of the 8 coupling rows at `x`.
    pub fn coupling_values(&self, x: &[f64]) -> [f64; 8] {
        let f = self.flows(x);
        let mut e = [0.0; 8];
        e[P_IJ] = f.p_ij;
        e[Q_IJ] = f.q_ij;
        e[P_JI] = f.p_ji;
        e[Q_JI] = f.q_ji;
        e[W_I] = x[0] * x[0];
        e[THETA_I] = x[2];
        e[W_J] = x[1] * x[1];
        e[THETA_J] = x[3];
        e
    }

    /// `p² + q² + s` at both ends (zero for unlimited branches).
    pub fn limit_residuals(&self, x: &[f64]) -> [f64; 2] {
        if self.limit.is_none() {
            return [0.0; 2];
        }
        let f = self.flows(x);
        [f.p_ij * f.p_ij + f.q_ij * f.q_ij + x[4], f.p_ji * f.p_ji + f.q_ji * f.q_ji + x[5]]
    }

    fn row_residual(&self, k: usize, e: f64) -> f64 {
        e - self.target[k] + self.z[k]
    }

    /// Derivative of the row-`k` penalty term with respect to its expression.
    fn row_slope(&self, k: usize, e: f64) -> f64 {
        self.mult[k] + self.rho[k] * self.row_residual(k, e)
    }
}

impl BoxNlp for BranchProblem {
    fn dim(&self) -> usize {
        if self.limit.is_some() {
            6
        } else {
            4
        }
    }

    fn lower(&self) -> &[f64] {
        &self.lower[..self.dim()]
    }

    fn upper(&self) -> &[f64] {
        &self.upper[..self.dim()]
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let e = self.coupling_values(x);
        let mut f = 0.0;
        for k in 0..8 {
            let r = self.row_residual(k, e[k]);
            f += self.mult[k] * r + 0.5 * self.rho[k] * r * r;
        }
        if let Some(lim) = &self.limit {
            for (end, h) in self.limit_residuals(x).into_iter().enumerate() {
                f += lim.mult[end] * h + 0.5 * lim.rho * h * h;
            }
        }
        f
    }

    fn gradient(&self, x: &[f64], g: &mut [f64]) {
        let jets = flow_jets(&self.y, x);
        g.fill(0.0);
        for (k, jet) in [P_IJ, Q_IJ, P_JI, Q_JI].into_iter().zip(&jets) {
            let slope = self.row_slope(k, jet.v);
            for i in 0..4 {
                g[i] += slope * jet.g[i];
            }
        }
        g[0] += self.row_slope(W_I, x[0] * x[0]) * 2.0 * x[0];
        g[1] += self.row_slope(W_J, x[1] * x[1]) * 2.0 * x[1];
        g[2] += self.row_slope(THETA_I, x[2]);
        g[3] += self.row_slope(THETA_J, x[3]);

        if let Some(lim) = &self.limit {
            for end in 0..2 {
                let (p, q) = (&jets[2 * end], &jets[2 * end + 1]);
                let h = p.v * p.v + q.v * q.v + x[4 + end];
                let slope = lim.mult[end] + lim.rho * h;
                for i in 0..4 {
                    g[i] += slope * 2.0 * (p.v * p.g[i] + q.v * q.g[i]);
                }
                g[4 + end] += slope;
            }
        }
    }

    fn hessian(&self, x: &[f64], hess: &mut [f64]) {
        let n = self.dim();
        let jets = flow_jets(&self.y, x);
        let mut h = [[0.0; 6]; 6];

        for (k, jet) in [P_IJ, Q_IJ, P_JI, Q_JI].into_iter().zip(&jets) {
            let slope = self.row_slope(k, jet.v);
            let rho = self.rho[k];
            for i in 0..4 {
                for j in 0..4 {
                    h[i][j] += rho * jet.g[i] * jet.g[j] + slope * jet.h[i][j];
                }
            }
        }
        let (vi, vj) = (x[0], x[1]);
        h[0][0] += self.rho[W_I] * 4.0 * vi * vi + 2.0 * self.row_slope(W_I, vi * vi);
        h[1][1] += self.rho[W_J] * 4.0 * vj * vj + 2.0 * self.row_slope(W_J, vj * vj);
        h[2][2] += self.rho[THETA_I];
        h[3][3] += self.rho[THETA_J];

        if let Some(lim) = &self.limit {
            for end in 0..2 {
                let (p, q) = (&jets[2 * end], &jets[2 * end + 1]);
                let hval = p.v * p.v + q.v * q.v + x[4 + end];
                let slope = lim.mult[end] + lim.rho * hval;
                let mut grad = [0.0; 6];
                for i in 0..4 {
                    grad[i] = 2.0 * (p.v * p.g[i] + q.v * q.g[i]);
                }
                grad[4 + end] = 1.0;
                for i in 0..6 {
                    for j in 0..6 {
                        h[i][j] += lim.rho * grad[i] * grad[j];
                    }
                }
                for i in 0..4 {
                    for j in 0..4 {
                        let curv = p.g[i] * p.g[j]
                            + p.v * p.h[i][j]
                            + q.g[i] * q.g[j]
                            + q.v * q.h[i][j];
                        h[i][j] += slope * 2.0 * curv;
                    }
                }
            }
        }

        for i in 0..n {
            for j in i..n {
                hess[i * n + j] = h[i][j];
                hess[j * n + i] = h[i][j];
            }
        }
    }
}
