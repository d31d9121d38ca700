//! Component decomposition: coupling rows, their ownership, and the ADMM
//! iterate vectors.
//!
//! Every coupling row `k` links one component-side value `x[k]` (generator
//! or branch) with one bus-side value `x̄[k]` through `x[k] - x̄[k] + z[k] = 0`.
//! Rows are laid out generators first (2 rows each: `p_g`, `q_g`), then
//! branches in file order (8 rows each):
//!
//! | offset | x side          | x̄ side        | class |
//! |--------|-----------------|---------------|-------|
//! | 0      | `p_ij`          | `p_ij(i)`     | pq    |
//! | 1      | `q_ij`          | `q_ij(i)`     | pq    |
//! | 2      | `p_ji`          | `p_ji(j)`     | pq    |
//! | 3      | `q_ji`          | `q_ji(j)`     | pq    |
//! | 4      | `v_i²`          | `w_i`         | va    |
//! | 5      | `θ_i(ij)`       | `θ_i`         | va    |
//! | 6      | `v_j²`          | `w_j`         | va    |
//! | 7      | `θ_j(ij)`       | `θ_j`         | va    |

use serde::{Deserialize, Serialize};

use crate::netdata::PowerNetwork;

pub const GEN_ROWS: usize = 2;
pub const BRANCH_ROWS: usize = 8;

pub const P_IJ: usize = 0;
pub const Q_IJ: usize = 1;
pub const P_JI: usize = 2;
pub const Q_JI: usize = 3;
pub const W_I: usize = 4;
pub const THETA_I: usize = 5;
pub const W_J: usize = 6;
pub const THETA_J: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PenaltyClass {
    /// Real/reactive power generation and flow rows.
    Power,
    /// Voltage magnitude and angle rows.
    VoltageAngle,
}

/// Rows a bus owns on the x̄ side.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BusRows {
    /// `p` row of each attached generator (`q` is the next row).
    pub gens: Vec<usize>,
    /// `p` row of each flow duplicate the bus owns (`q` is the next row).
    pub flows: Vec<usize>,
    /// `w` row of each incident branch end (`θ` is the next row).
    pub voltages: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CouplingLayout {
    pub n_rows: usize,
    pub n_gens: usize,
    pub n_branches: usize,
    pub class: Vec<PenaltyClass>,
    /// Bus owning the x̄ side of each row.
    pub row_bus: Vec<usize>,
    pub bus_rows: Vec<BusRows>,
    /// Position of each branch among rate-limited branches.
    pub limited_index: Vec<Option<usize>>,
    pub n_limited: usize,
}

impl CouplingLayout {
    pub fn build(net: &PowerNetwork) -> Self {
        let n_gens = net.generators.len();
        let n_branches = net.branches.len();
        let n_rows = GEN_ROWS * n_gens + BRANCH_ROWS * n_branches;
        let mut class = Vec::with_capacity(n_rows);
        let mut row_bus = Vec::with_capacity(n_rows);
        let mut bus_rows = vec![BusRows::default(); net.buses.len()];

        for (g, gen) in net.generators.iter().enumerate() {
            let base = GEN_ROWS * g;
            class.extend([PenaltyClass::Power; GEN_ROWS]);
            row_bus.extend([gen.bus; GEN_ROWS]);
            bus_rows[gen.bus].gens.push(base);
        }

        let mut limited_index = Vec::with_capacity(n_branches);
        let mut n_limited = 0;
        for (l, br) in net.branches.iter().enumerate() {
            let base = GEN_ROWS * n_gens + BRANCH_ROWS * l;
            class.extend([PenaltyClass::Power; 4]);
            class.extend([PenaltyClass::VoltageAngle; 4]);
            row_bus.extend([br.from, br.from, br.to, br.to, br.from, br.from, br.to, br.to]);
            bus_rows[br.from].flows.push(base + P_IJ);
            bus_rows[br.to].flows.push(base + P_JI);
            bus_rows[br.from].voltages.push(base + W_I);
            bus_rows[br.to].voltages.push(base + W_J);
            if br.is_limited() {
                limited_index.push(Some(n_limited));
                n_limited += 1;
            } else {
                limited_index.push(None);
            }
        }

        Self { n_rows, n_gens, n_branches, class, row_bus, bus_rows, limited_index, n_limited }
    }

    pub fn gen_offset(&self, g: usize) -> usize {
        GEN_ROWS * g
    }

    pub fn branch_offset(&self, l: usize) -> usize {
        GEN_ROWS * self.n_gens + BRANCH_ROWS * l
    }

    /// Per-row penalty vector for the two penalty classes.
    pub fn penalties(&self, rho_pq: f64, rho_va: f64) -> Vec<f64> {
        self.class
            .iter()
            .map(|c| match c {
                PenaltyClass::Power => rho_pq,
                PenaltyClass::VoltageAngle => rho_va,
            })
            .collect()
    }
}

/// All ADMM iterates.
///
/// `xbar` mirrors the bus variables: for voltage rows it holds the owning
/// bus's `w`/`θ`, which are also kept in `bus_w`/`bus_theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmState {
    pub x: Vec<f64>,
    pub xbar: Vec<f64>,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    pub lambda: Vec<f64>,
    pub rho: Vec<f64>,
    pub beta: f64,
    pub bus_w: Vec<f64>,
    pub bus_theta: Vec<f64>,
    /// Local branch NLP solution `(v_i, v_j, θ_i, θ_j, s_ij, s_ji)`.
    pub branch_vars: Vec<[f64; 6]>,
    /// Line-limit multipliers, one pair per rate-limited branch.
    pub line_mult: Vec<[f64; 2]>,
    /// Line-limit penalties, one per rate-limited branch.
    pub line_rho: Vec<f64>,
}

impl AdmmState {
    pub fn zeros(layout: &CouplingLayout, n_buses: usize) -> Self {
        let m = layout.n_rows;
        Self {
            x: vec![0.0; m],
            xbar: vec![0.0; m],
            z: vec![0.0; m],
            y: vec![0.0; m],
            lambda: vec![0.0; m],
            rho: vec![1.0; m],
            beta: 1.0,
            bus_w: vec![1.0; n_buses],
            bus_theta: vec![0.0; n_buses],
            branch_vars: vec![[1.0, 1.0, 0.0, 0.0, 0.0, 0.0]; layout.n_branches],
            line_mult: vec![[0.0; 2]; layout.n_limited],
            line_rho: vec![1.0; layout.n_limited],
        }
    }

    /// Copies bus `w`/`θ` into the voltage rows of `xbar`.
    pub fn sync_bus_rows(&mut self, layout: &CouplingLayout) {
        for (bus, rows) in layout.bus_rows.iter().enumerate() {
            for &k in &rows.voltages {
                self.xbar[k] = self.bus_w[bus];
                self.xbar[k + 1] = self.bus_theta[bus];
            }
        }
    }
}

/// Residual vector `x - x̄ + z` with its norms.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub values: Vec<f64>,
    pub norm2: f64,
    pub norm_inf: f64,
}

pub fn primal_residual(state: &AdmmState) -> Residual {
    let values: Vec<f64> = state
        .x
        .iter()
        .zip(&state.xbar)
        .zip(&state.z)
        .map(|((x, xb), z)| x - xb + z)
        .collect();
    let norm2 = norm2(&values);
    let norm_inf = norm_inf(&values);
    Residual { values, norm2, norm_inf }
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, a| m.max(a.abs()))
}
