//! Per-component update kernels of one inner ADMM iteration.
//!
//! Every kernel reads the shared iterates and writes only the entries owned by
//! its component, so each phase is a data-parallel map over components. The
//! caller picks the thread pool by running a phase inside `pool.install`.

mod branch;
mod closed_form;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use self::branch::{BranchProblem, LineLimit};
pub use self::closed_form::{
    equality_qp, generator_power, solve_buses, solve_generators, solve_z, update_lambda,
    update_outer, update_y, z_value, BetaSchedule, QpVar,
};
use crate::decomp::{AdmmState, CouplingLayout, BRANCH_ROWS};
use crate::netdata::PowerNetwork;
use crate::tron::{solve_in_place, TronSettings, TronStatus};

/// Settings of the branch phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchSettings {
    pub tron: TronSettings,
    /// Line limits are tightened to this fraction of the rating.
    pub limit_fraction: f64,
    /// Bound on the line-limit multipliers.
    pub mult_bound: f64,
}

impl Default for BranchSettings {
    fn default() -> Self {
        Self { tron: TronSettings::default(), limit_fraction: 0.99, mult_bound: 1e8 }
    }
}

/// Work counters of one branch phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BranchStats {
    pub tron_iterations: usize,
    /// Solves that stopped on the iteration cap or a collapsed radius.
    pub unconverged: usize,
    /// Solves that hit a non-finite value; the branch keeps its previous point.
    pub failures: usize,
}

/// Builds branch `l`'s NLP from the current iterates.
pub fn branch_problem(
    l: usize,
    state: &AdmmState,
    net: &PowerNetwork,
    layout: &CouplingLayout,
    settings: &BranchSettings,
) -> BranchProblem {
    let br = &net.branches[l];
    let base = layout.branch_offset(l);
    let rows = base..base + BRANCH_ROWS;
    let take = |v: &[f64]| -> [f64; 8] { v[rows.clone()].try_into().expect("8 rows") };
    let limit = layout.limited_index[l].map(|e| {
        let r = settings.limit_fraction * br.rate;
        LineLimit { limit_sq: r * r, mult: state.line_mult[e], rho: state.line_rho[e] }
    });
    let (bi, bj) = (&net.buses[br.from], &net.buses[br.to]);
    BranchProblem::new(
        br.y,
        (bi.vmin, bi.vmax),
        (bj.vmin, bj.vmax),
        take(&state.xbar),
        take(&state.z),
        take(&state.y),
        take(&state.rho),
        limit,
    )
}

struct BranchOutcome {
    vars: [f64; 6],
    values: [f64; 8],
    limit_res: [f64; 2],
    iterations: usize,
    status: Option<TronStatus>,
}

/// Branch phase: solves every branch NLP from its previous local solution,
/// writes the branch rows of `x`, then updates the line-limit multipliers.
pub fn solve_branches(
    state: &mut AdmmState,
    net: &PowerNetwork,
    layout: &CouplingLayout,
    settings: &BranchSettings,
) -> BranchStats {
    let st = &*state;
    let outcomes: Vec<BranchOutcome> = (0..layout.n_branches)
        .into_par_iter()
        .map(|l| {
            let p = branch_problem(l, st, net, layout, settings);
            let n = crate::tron::BoxNlp::dim(&p);
            let mut vars = st.branch_vars[l];
            match solve_in_place(&p, &mut vars[..n], &settings.tron) {
                Ok(rep) => BranchOutcome {
                    vars,
                    values: p.coupling_values(&vars),
                    limit_res: p.limit_residuals(&vars),
                    iterations: rep.iterations,
                    status: Some(rep.status),
                },
                Err(_) => {
                    let vars = st.branch_vars[l];
                    let base = layout.branch_offset(l);
                    BranchOutcome {
                        vars,
                        values: st.x[base..base + BRANCH_ROWS].try_into().expect("8 rows"),
                        limit_res: [0.0; 2],
                        iterations: 0,
                        status: None,
                    }
                }
            }
        })
        .collect();

    let mut stats = BranchStats::default();
    let bound = settings.mult_bound;
    for (l, out) in outcomes.into_iter().enumerate() {
        let base = layout.branch_offset(l);
        state.x[base..base + BRANCH_ROWS].copy_from_slice(&out.values);
        state.branch_vars[l] = out.vars;
        stats.tron_iterations += out.iterations;
        match out.status {
            None => stats.failures += 1,
            Some(TronStatus::Converged) => {}
            Some(_) => stats.unconverged += 1,
        }
        if let (Some(e), Some(_)) = (layout.limited_index[l], out.status) {
            let rho = state.line_rho[e];
            for end in 0..2 {
                let m = &mut state.line_mult[e][end];
                *m = (*m + rho * out.limit_res[end]).clamp(-bound, bound);
            }
        }
    }
    stats
}
