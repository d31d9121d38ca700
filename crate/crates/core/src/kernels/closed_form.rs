//! Closed-form component updates: generators, buses, `z`, and multipliers.

use rayon::prelude::*;

use crate::decomp::{AdmmState, CouplingLayout};
use crate::error::{Error, Result};
use crate::netdata::{BusType, PowerNetwork};

/// Minimizer of `c2 p² + c1 p + y (p - t + z) + ρ/2 (p - t + z)²` on `[lo, hi]`.
pub fn generator_power(c2: f64, c1: f64, rho: f64, y: f64, target_minus_z: f64, lo: f64, hi: f64) -> f64 {
    ((rho * target_minus_z - y - c1) / (2.0 * c2 + rho)).clamp(lo, hi)
}

/// Generator phase: updates `p_g`, `q_g` in `state.x`.
pub fn solve_generators(state: &mut AdmmState, net: &PowerNetwork, layout: &CouplingLayout) {
    let n_gen_rows = 2 * layout.n_gens;
    let (xbar, z, y, rho) = (&state.xbar, &state.z, &state.y, &state.rho);
    state.x[..n_gen_rows]
        .par_chunks_mut(2)
        .zip(net.generators.par_iter())
        .enumerate()
        .for_each(|(g, (out, gen))| {
            let kp = layout.gen_offset(g);
            let kq = kp + 1;
            out[0] = generator_power(
                gen.cost.c2,
                gen.cost.c1,
                rho[kp],
                y[kp],
                xbar[kp] - z[kp],
                gen.pmin,
                gen.pmax,
            );
            out[1] = generator_power(0.0, 0.0, rho[kq], y[kq], xbar[kq] - z[kq], gen.qmin, gen.qmax);
        });
}

/// One variable of an equality-constrained diagonal QP:
/// contributes `½ q x² - c x` to the objective and `a x` to the two rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpVar {
    pub q: f64,
    pub c: f64,
    pub a: [f64; 2],
}

/// Solves `min Σ ½ q_i x_i² - c_i x_i  s.t.  Σ a_i x_i = b` in closed form:
/// `μ = (A Q⁻¹ Aᵀ)⁻¹ (A Q⁻¹ c - b)`, `x = Q⁻¹ (c - Aᵀ μ)`.
///
/// Writes `x` into `out` and returns `μ`, or `None` when `A Q⁻¹ Aᵀ` is singular.
pub fn equality_qp(vars: &[QpVar], b: [f64; 2], out: &mut [f64]) -> Option<[f64; 2]> {
    let mut m = [[0.0; 2]; 2];
    let mut rhs = [-b[0], -b[1]];
    for v in vars {
        if !(v.q > 0.0) {
            return None;
        }
        let inv = 1.0 / v.q;
        for r in 0..2 {
            rhs[r] += v.a[r] * inv * v.c;
            for s in 0..2 {
                m[r][s] += v.a[r] * inv * v.a[s];
            }
        }
    }
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let scale = m[0][0].abs().max(m[1][1].abs());
    if !(det.abs() > 1e-14 * scale * scale) {
        return None;
    }
    let mu = [
        (m[1][1] * rhs[0] - m[0][1] * rhs[1]) / det,
        (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det,
    ];
    for (o, v) in out.iter_mut().zip(vars) {
        *o = (v.c - v.a[0] * mu[0] - v.a[1] * mu[1]) / v.q;
    }
    Some(mu)
}

struct BusSolution {
    w: f64,
    theta: f64,
    values: Vec<f64>,
}

/// Bus phase: updates every bus's `w`, `θ` and owned duplicates in `xbar`.
pub fn solve_buses(state: &mut AdmmState, net: &PowerNetwork, layout: &CouplingLayout) -> Result<()> {
    let st = &*state;
    let solutions: Vec<Result<BusSolution>> = layout
        .bus_rows
        .par_iter()
        .enumerate()
        .map_init(Vec::new, |vars, (b, rows)| {
            let bus = &net.buses[b];
            let coef = |k: usize| st.rho[k] * (st.x[k] + st.z[k]) + st.y[k];
            vars.clear();
            for &k in &rows.gens {
                vars.push(QpVar { q: st.rho[k], c: coef(k), a: [1.0, 0.0] });
                vars.push(QpVar { q: st.rho[k + 1], c: coef(k + 1), a: [0.0, 1.0] });
            }
            for &k in &rows.flows {
                vars.push(QpVar { q: st.rho[k], c: coef(k), a: [-1.0, 0.0] });
                vars.push(QpVar { q: st.rho[k + 1], c: coef(k + 1), a: [0.0, -1.0] });
            }
            let (mut qw, mut cw, mut qt, mut ct) = (0.0, 0.0, 0.0, 0.0);
            for &k in &rows.voltages {
                qw += st.rho[k];
                cw += coef(k);
                qt += st.rho[k + 1];
                ct += coef(k + 1);
            }
            vars.push(QpVar { q: qw, c: cw, a: [-bus.gs, bus.bs] });

            let mut values = vec![0.0; vars.len()];
            equality_qp(vars, [bus.pd, bus.qd], &mut values)
                .ok_or(Error::SingularBus { bus: b })?;
            let w = values.pop().expect("w variable");
            let theta = if bus.kind == BusType::Ref || qt == 0.0 { 0.0 } else { ct / qt };
            Ok(BusSolution { w, theta, values })
        })
        .collect();

    for (b, (rows, sol)) in layout.bus_rows.iter().zip(solutions).enumerate() {
        let sol = sol?;
        let mut it = sol.values.into_iter();
        for &k in rows.gens.iter().chain(&rows.flows) {
            state.xbar[k] = it.next().expect("p duplicate");
            state.xbar[k + 1] = it.next().expect("q duplicate");
        }
        state.bus_w[b] = sol.w;
        state.bus_theta[b] = sol.theta;
        for &k in &rows.voltages {
            state.xbar[k] = sol.w;
            state.xbar[k + 1] = sol.theta;
        }
    }
    Ok(())
}

/// Minimizer over `z` of `y(r + z) + ρ/2 (r + z)² + λ z + β/2 z²`.
pub fn z_value(rho: f64, beta: f64, y: f64, lambda: f64, mismatch: f64) -> f64 {
    -(lambda + y + rho * mismatch) / (rho + beta)
}

/// `z` phase.
pub fn solve_z(state: &mut AdmmState) {
    let beta = state.beta;
    let (x, xbar, y, lambda, rho) = (&state.x, &state.xbar, &state.y, &state.lambda, &state.rho);
    state.z.par_iter_mut().enumerate().for_each(|(k, z)| {
        *z = z_value(rho[k], beta, y[k], lambda[k], x[k] - xbar[k]);
    });
}

/// `y ← y + ρ (x - x̄ + z)`.
pub fn update_y(state: &mut AdmmState) {
    let (x, xbar, z, rho) = (&state.x, &state.xbar, &state.z, &state.rho);
    state.y.par_iter_mut().enumerate().for_each(|(k, y)| {
        *y += rho[k] * (x[k] - xbar[k] + z[k]);
    });
}

/// `λ ← Π_[lo, hi](λ + β z)`.
pub fn update_lambda(state: &mut AdmmState, lo: f64, hi: f64) {
    let beta = state.beta;
    let z = &state.z;
    state.lambda.par_iter_mut().enumerate().for_each(|(k, l)| {
        *l = (*l + beta * z[k]).clamp(lo, hi);
    });
}

/// Outer penalty schedule: grow `β` when `‖z‖` did not shrink enough.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaSchedule {
    pub growth: f64,
    pub trigger: f64,
    pub max: f64,
}

impl BetaSchedule {
    pub fn next(&self, beta: f64, z_norm: f64, prev_z_norm: Option<f64>) -> f64 {
        match prev_z_norm {
            Some(prev) if z_norm > self.trigger * prev => (beta * self.growth).min(self.max),
            _ => beta,
        }
    }
}

/// Outer update: multipliers first (with the current `β`), then `β`.
pub fn update_outer(
    state: &mut AdmmState,
    lambda_bounds: (f64, f64),
    schedule: &BetaSchedule,
    z_norm: f64,
    prev_z_norm: Option<f64>,
) {
    update_lambda(state, lambda_bounds.0, lambda_bounds.1);
    state.beta = schedule.next(state.beta, z_norm, prev_z_norm);
}
