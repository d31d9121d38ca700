//! The two-level loop: inner ADMM sweeps `x → x̄ → z → y` until the inner
//! residual tests pass, then an outer step on `λ`, `β`, until `‖z‖ ≤ ε`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::decomp::{self, AdmmState, CouplingLayout, BRANCH_ROWS, P_IJ, P_JI, Q_IJ, Q_JI, THETA_I, THETA_J, W_I, W_J};
use crate::error::{Error, Result};
use crate::kernels::{self, BetaSchedule, BranchSettings};
use crate::netdata::{BranchFlow, PowerNetwork, ANGLE_BOUND};

/// Vector norm used by a termination test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    Inf,
    Two,
}

impl Norm {
    pub fn of(self, v: &[f64]) -> f64 {
        match self {
            Norm::Inf => decomp::norm_inf(v),
            Norm::Two => decomp::norm2(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub rho_pq: f64,
    pub rho_va: f64,
    pub beta0: f64,
    pub beta_growth: f64,
    /// `β` grows when `‖z‖` exceeds this fraction of the previous outer value.
    pub beta_trigger: f64,
    pub beta_max: f64,
    /// Outer tolerance on `‖z‖`.
    pub eps: f64,
    pub z_norm: Norm,
    /// Inner primal tolerance per unit `√m`.
    pub inner_tol: f64,
    /// Inner dual tolerance per unit `√m`; `None` skips the dual test.
    pub dual_tol: Option<f64>,
    /// Divide the inner tolerances by the outer iteration index.
    pub inner_decay: bool,
    pub inner_norm: Norm,
    pub max_outer: usize,
    pub max_inner: usize,
    /// `λ` is projected onto `[-lambda_bound, lambda_bound]`.
    pub lambda_bound: f64,
    pub branch: BranchSettings,
    pub workers: usize,
    /// Abort when a residual norm exceeds this.
    pub divergence: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho_pq: 10.0,
            rho_va: 1000.0,
            beta0: 1e3,
            beta_growth: 10.0,
            beta_trigger: 0.25,
            beta_max: 1e12,
            eps: 1e-4,
            z_norm: Norm::Inf,
            inner_tol: 1e-4,
            dual_tol: Some(1e-4),
            inner_decay: false,
            inner_norm: Norm::Two,
            max_outer: 20,
            max_inner: 1000,
            lambda_bound: 1e12,
            branch: BranchSettings::default(),
            workers: 1,
            divergence: 1e8,
        }
    }
}

/// Built-in penalty presets `(ρ_pq, ρ_va)` by case name.
pub fn preset(name: &str) -> Option<(f64, f64)> {
    let key = name.trim_end_matches(".m").trim_start_matches("case").to_ascii_lowercase();
    Some(match key.as_str() {
        "9" => (1e2, 1e4),
        "30" => (1e2, 1e4),
        "118" => (1e2, 1e5),
        "1354pegase" | "2869pegase" => (1e1, 1e3),
        "9241pegase" | "13659pegase" => (5e1, 5e3),
        "_activsg25k" | "activsg25k" => (3e3, 3e4),
        "_activsg70k" | "activsg70k" => (3e4, 3e5),
        _ => return None,
    })
}

impl SolverConfig {
    pub fn with_preset(name: &str) -> Option<Self> {
        preset(name).map(|(rho_pq, rho_va)| Self { rho_pq, rho_va, ..Self::default() })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rho_pq", self.rho_pq),
            ("rho_va", self.rho_va),
            ("beta0", self.beta0),
            ("beta_max", self.beta_max),
            ("eps", self.eps),
            ("inner_tol", self.inner_tol),
            ("dual_tol", self.dual_tol.unwrap_or(1.0)),
            ("lambda_bound", self.lambda_bound),
            ("divergence", self.divergence),
            ("limit_fraction", self.branch.limit_fraction),
            ("mult_bound", self.branch.mult_bound),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.beta_growth >= 1.0) {
            return Err(Error::InvalidConfig("beta_growth must be at least 1".into()));
        }
        if !(self.beta_trigger > 0.0) {
            return Err(Error::InvalidConfig("beta_trigger must be positive".into()));
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(Error::InvalidConfig("iteration limits must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        self.branch.tron.validate()
    }

    fn schedule(&self) -> BetaSchedule {
        BetaSchedule { growth: self.beta_growth, trigger: self.beta_trigger, max: self.beta_max }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    IterationLimit,
}

/// One inner iteration's residuals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub outer: usize,
    /// Cumulative inner iteration count.
    pub inner: usize,
    pub primal_res: f64,
    pub dual_res: f64,
    pub z_norm: f64,
    pub elapsed_s: f64,
}

/// Wall time spent in each phase (seconds).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimes {
    pub generators: f64,
    pub branches: f64,
    pub buses: f64,
    pub z: f64,
    pub multipliers: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub objective: f64,
    /// `‖c(x)‖_∞` over balance, line limits and bounds.
    pub max_violation: f64,
    pub balance_violation: f64,
    pub line_violation: f64,
    pub bound_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub pg: Vec<f64>,
    pub qg: Vec<f64>,
    pub vm: Vec<f64>,
    pub va: Vec<f64>,
    /// Flows recomputed from the bus voltages.
    pub flows: Vec<BranchFlow>,
}

impl Solution {
    pub fn new(net: &PowerNetwork, pg: Vec<f64>, qg: Vec<f64>, vm: Vec<f64>, va: Vec<f64>) -> Self {
        let flows = branch_flows(net, &vm, &va);
        Self { pg, qg, vm, va, flows }
    }
}

fn branch_flows(net: &PowerNetwork, vm: &[f64], va: &[f64]) -> Vec<BranchFlow> {
    net.branches
        .iter()
        .map(|br| br.y.flows(vm[br.from], vm[br.to], va[br.from], va[br.to]))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchTotals {
    pub tron_iterations: usize,
    pub unconverged: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub records: Vec<IterationRecord>,
    pub phase_times: PhaseTimes,
    pub branch_totals: BranchTotals,
    pub elapsed_s: f64,
    pub solution: Solution,
    pub metrics: Metrics,
    /// Final iterates, usable as a warm start.
    pub state: AdmmState,
}

/// Cold start: mid-bound generation and voltage magnitudes, zero angles,
/// flows from those voltages, zero `z`, `y`, `λ`.
pub fn cold_start(net: &PowerNetwork, layout: &CouplingLayout, config: &SolverConfig) -> AdmmState {
    let mut st = AdmmState::zeros(layout, net.buses.len());
    st.rho = layout.penalties(config.rho_pq, config.rho_va);
    st.beta = config.beta0;
    st.line_rho.fill(config.rho_pq);

    for (g, gen) in net.generators.iter().enumerate() {
        let k = layout.gen_offset(g);
        let (p, q) = (midpoint(gen.pmin, gen.pmax), midpoint(gen.qmin, gen.qmax));
        st.x[k] = p;
        st.x[k + 1] = q;
        st.xbar[k] = p;
        st.xbar[k + 1] = q;
    }
    let vm: Vec<f64> = net.buses.iter().map(|b| 0.5 * (b.vmin + b.vmax)).collect();
    for (b, v) in vm.iter().enumerate() {
        st.bus_w[b] = v * v;
        st.bus_theta[b] = 0.0;
    }
    for (l, br) in net.branches.iter().enumerate() {
        let (vi, vj) = (vm[br.from], vm[br.to]);
        let f = br.y.flows(vi, vj, 0.0, 0.0);
        let base = layout.branch_offset(l);
        let mut e = [0.0; BRANCH_ROWS];
        e[P_IJ] = f.p_ij;
        e[Q_IJ] = f.q_ij;
        e[P_JI] = f.p_ji;
        e[Q_JI] = f.q_ji;
        e[W_I] = vi * vi;
        e[THETA_I] = 0.0;
        e[W_J] = vj * vj;
        e[THETA_J] = 0.0;
        st.x[base..base + BRANCH_ROWS].copy_from_slice(&e);
        st.xbar[base..base + BRANCH_ROWS].copy_from_slice(&e);

        let mut vars = [vi, vj, 0.0, 0.0, 0.0, 0.0];
        if br.is_limited() {
            let r = config.branch.limit_fraction * br.rate;
            vars[4] = (-(f.p_ij * f.p_ij + f.q_ij * f.q_ij)).max(-r * r);
            vars[5] = (-(f.p_ji * f.p_ji + f.q_ji * f.q_ji)).max(-r * r);
        }
        st.branch_vars[l] = vars;
    }
    st
}

/// Middle of `[lo, hi]`; for a half-open or unbounded range, 0 projected onto it.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = 0.5 * (lo + hi);
    if mid.is_finite() {
        mid
    } else {
        0.0f64.clamp(lo, hi)
    }
}

fn check_warm_start(state: &AdmmState, layout: &CouplingLayout, n_buses: usize) -> Result<()> {
    let m = layout.n_rows;
    let ok = [&state.x, &state.xbar, &state.z, &state.y, &state.lambda, &state.rho]
        .iter()
        .all(|v| v.len() == m)
        && state.bus_w.len() == n_buses
        && state.bus_theta.len() == n_buses
        && state.branch_vars.len() == layout.n_branches
        && state.line_mult.len() == layout.n_limited
        && state.line_rho.len() == layout.n_limited;
    if !ok {
        return Err(Error::InvalidConfig("warm start does not match the network layout".into()));
    }
    if !(state.beta > 0.0) {
        return Err(Error::InvalidConfig("warm start has a nonpositive beta".into()));
    }
    Ok(())
}

/// Runs the two-level algorithm from a cold start or from `warm`.
///
/// A warm start keeps every iterate including `β`; the per-row penalties are
/// reset from `config`.
pub fn solve(net: &PowerNetwork, config: &SolverConfig, warm: Option<&AdmmState>) -> Result<SolveReport> {
    config.validate()?;
    let layout = CouplingLayout::build(net);
    let mut state = match warm {
        Some(w) => {
            check_warm_start(w, &layout, net.buses.len())?;
            let mut st = w.clone();
            st.rho = layout.penalties(config.rho_pq, config.rho_va);
            st.line_rho.fill(config.rho_pq);
            st
        }
        None => cold_start(net, &layout, config),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
    pool.install(|| run_loop(net, &layout, config, &mut state))
        .map(|run| finish(net, &layout, run, state))
}

struct LoopOutcome {
    status: SolveStatus,
    outer_iterations: usize,
    records: Vec<IterationRecord>,
    phase_times: PhaseTimes,
    branch_totals: BranchTotals,
    elapsed_s: f64,
}

fn run_loop(
    net: &PowerNetwork,
    layout: &CouplingLayout,
    config: &SolverConfig,
    state: &mut AdmmState,
) -> Result<LoopOutcome> {
    let start = Instant::now();
    let m = layout.n_rows;
    let sqrt_m = (m as f64).sqrt();
    let schedule = config.schedule();
    let mut records = Vec::new();
    let mut times = PhaseTimes::default();
    let mut totals = BranchTotals::default();
    let mut prev_xbar = state.xbar.clone();
    let mut scratch = vec![0.0; m];
    let mut prev_z_norm = None;
    let mut status = SolveStatus::IterationLimit;
    let mut outer_iterations = 0;
    let mut inner_total = 0;

    for outer in 1..=config.max_outer {
        outer_iterations = outer;
        let mut z_norm = config.z_norm.of(&state.z);
        let scale = if config.inner_decay { sqrt_m / outer as f64 } else { sqrt_m };
        let primal_tol = config.inner_tol * scale;
        let dual_tol = config.dual_tol.map_or(f64::INFINITY, |t| t * scale);
        for _ in 0..config.max_inner {
            inner_total += 1;

            let t = Instant::now();
            kernels::solve_generators(state, net, layout);
            times.generators += t.elapsed().as_secs_f64();

            let t = Instant::now();
            let stats = kernels::solve_branches(state, net, layout, &config.branch);
            times.branches += t.elapsed().as_secs_f64();
            totals.tron_iterations += stats.tron_iterations;
            totals.unconverged += stats.unconverged;
            totals.failures += stats.failures;

            let t = Instant::now();
            kernels::solve_buses(state, net, layout)?;
            times.buses += t.elapsed().as_secs_f64();

            let t = Instant::now();
            kernels::solve_z(state);
            times.z += t.elapsed().as_secs_f64();

            let t = Instant::now();
            kernels::update_y(state);
            times.multipliers += t.elapsed().as_secs_f64();

            for k in 0..m {
                scratch[k] = state.x[k] - state.xbar[k] + state.z[k];
            }
            let primal = config.inner_norm.of(&scratch);
            for k in 0..m {
                scratch[k] = state.rho[k] * (state.xbar[k] - prev_xbar[k]);
            }
            let dual = config.inner_norm.of(&scratch);
            prev_xbar.copy_from_slice(&state.xbar);
            z_norm = config.z_norm.of(&state.z);

            records.push(IterationRecord {
                outer,
                inner: inner_total,
                primal_res: primal,
                dual_res: dual,
                z_norm,
                elapsed_s: start.elapsed().as_secs_f64(),
            });

            let worst = primal.max(dual).max(z_norm);
            if [primal, dual, z_norm].iter().any(|v| !v.is_finite()) || worst > config.divergence {
                return Err(Error::Diverged { outer, inner: inner_total, norm: worst });
            }
            if primal <= primal_tol && dual <= dual_tol {
                break;
            }
        }
        log::info!("outer {outer}: inner total {inner_total}, |z| {z_norm:e}, beta {:e}", state.beta);

        if z_norm <= config.eps {
            status = SolveStatus::Converged;
            break;
        }
        let t = Instant::now();
        kernels::update_outer(
            state,
            (-config.lambda_bound, config.lambda_bound),
            &schedule,
            z_norm,
            prev_z_norm,
        );
        times.multipliers += t.elapsed().as_secs_f64();
        prev_z_norm = Some(z_norm);
    }

    Ok(LoopOutcome {
        status,
        outer_iterations,
        records,
        phase_times: times,
        branch_totals: totals,
        elapsed_s: start.elapsed().as_secs_f64(),
    })
}

fn finish(net: &PowerNetwork, layout: &CouplingLayout, run: LoopOutcome, state: AdmmState) -> SolveReport {
    let n_gens = layout.n_gens;
    let pg = (0..n_gens).map(|g| state.x[layout.gen_offset(g)]).collect();
    let qg = (0..n_gens).map(|g| state.x[layout.gen_offset(g) + 1]).collect();
    let vm = state.bus_w.iter().map(|w| w.max(0.0).sqrt()).collect();
    let va = state.bus_theta.clone();
    let solution = Solution::new(net, pg, qg, vm, va);
    let metrics = evaluate_solution(net, &solution);
    SolveReport {
        status: run.status,
        outer_iterations: run.outer_iterations,
        inner_iterations: run.records.len(),
        records: run.records,
        phase_times: run.phase_times,
        branch_totals: run.branch_totals,
        elapsed_s: run.elapsed_s,
        solution,
        metrics,
        state,
    }
}

/// Quality metrics of a candidate solution; flows are recomputed from the
/// bus voltages and line limits use the unmodified ratings.
pub fn evaluate_solution(net: &PowerNetwork, sol: &Solution) -> Metrics {
    let flows = branch_flows(net, &sol.vm, &sol.va);

    let mut balance: f64 = 0.0;
    for (b, bus) in net.buses.iter().enumerate() {
        let w = sol.vm[b] * sol.vm[b];
        let mut p = -bus.pd - bus.gs * w;
        let mut q = -bus.qd + bus.bs * w;
        for &g in &bus.gens {
            p += sol.pg[g];
            q += sol.qg[g];
        }
        for &l in &bus.from_branches {
            p -= flows[l].p_ij;
            q -= flows[l].q_ij;
        }
        for &l in &bus.to_branches {
            p -= flows[l].p_ji;
            q -= flows[l].q_ji;
        }
        balance = balance.max(p.abs()).max(q.abs());
    }

    let mut line: f64 = 0.0;
    for (br, f) in net.branches.iter().zip(&flows) {
        if br.is_limited() {
            let worst = f.from_apparent().max(f.to_apparent());
            line = line.max(worst - br.rate);
        }
    }

    let excess = |v: f64, lo: f64, hi: f64| (lo - v).max(v - hi).max(0.0);
    let mut bound: f64 = 0.0;
    for (g, gen) in net.generators.iter().enumerate() {
        bound = bound.max(excess(sol.pg[g], gen.pmin, gen.pmax));
        bound = bound.max(excess(sol.qg[g], gen.qmin, gen.qmax));
    }
    for (b, bus) in net.buses.iter().enumerate() {
        bound = bound.max(excess(sol.vm[b], bus.vmin, bus.vmax));
        bound = bound.max(excess(sol.va[b], -ANGLE_BOUND, ANGLE_BOUND));
    }

    Metrics {
        objective: net.objective(&sol.pg),
        max_violation: balance.max(line).max(bound),
        balance_violation: balance,
        line_violation: line,
        bound_violation: bound,
    }
}
