//! Per-unit network model.
//!
//! All quantities are stored on the system MVA base: loads, shunts, limits
//! and rates are divided by `base_mva`, cost coefficients are rescaled so
//! that a generator's cost evaluated at `p` (p.u.) equals the file's cost at
//! `p·base_mva` (MW).

mod admittance;
mod matpower;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use self::admittance::{derive_admittances, BranchAdmittance, BranchFlow};
pub use self::matpower::{parse_matpower, parse_matpower_file};
use crate::error::{Error, Result};

/// Angle bound applied to every bus angle variable (radians).
pub const ANGLE_BOUND: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BusType {
    Pq,
    Pv,
    Ref,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    /// External bus number from the case file.
    pub id: i64,
    pub kind: BusType,
    pub pd: f64,
    pub qd: f64,
    pub gs: f64,
    pub bs: f64,
    pub vmin: f64,
    pub vmax: f64,
    /// Indices of in-service generators connected to this bus.
    pub gens: Vec<usize>,
    /// Branches whose from-end is this bus.
    pub from_branches: Vec<usize>,
    /// Branches whose to-end is this bus.
    pub to_branches: Vec<usize>,
}

/// Quadratic generation cost `c2·p² + c1·p + c0` with `p` in p.u.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QuadraticCost {
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
}

impl QuadraticCost {
    pub fn eval(&self, p: f64) -> f64 {
        (self.c2 * p + self.c1) * p + self.c0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    /// Internal bus index.
    pub bus: usize,
    pub pmin: f64,
    pub pmax: f64,
    pub qmin: f64,
    pub qmax: f64,
    pub cost: QuadraticCost,
    pub in_service: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    /// Total line-charging susceptance.
    pub charging: f64,
    pub tap: f64,
    /// Phase shift in radians.
    pub shift: f64,
    /// Apparent-power limit (p.u.); zero means unlimited.
    pub rate: f64,
    pub y: BranchAdmittance,
}

impl Branch {
    pub fn is_limited(&self) -> bool {
        self.rate > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerNetwork {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub generators: Vec<Generator>,
    pub branches: Vec<Branch>,
    /// External bus number to internal index.
    pub bus_index: HashMap<i64, usize>,
}

impl PowerNetwork {
    /// Fills bus incidence lists and checks the model invariants.
    pub(crate) fn finish(mut self) -> Result<Self> {
        for bus in &mut self.buses {
            bus.gens.clear();
            bus.from_branches.clear();
            bus.to_branches.clear();
        }
        let nbus = self.buses.len();
        for (g, gen) in self.generators.iter().enumerate() {
            if gen.bus >= nbus {
                return Err(Error::InvalidNetwork(format!("generator {g} bus out of range")));
            }
            self.buses[gen.bus].gens.push(g);
        }
        for (l, br) in self.branches.iter().enumerate() {
            if br.from >= nbus || br.to >= nbus {
                return Err(Error::InvalidNetwork(format!("branch {l} bus out of range")));
            }
            self.buses[br.from].from_branches.push(l);
            self.buses[br.to].to_branches.push(l);
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_mva > 0.0) {
            return Err(Error::InvalidNetwork("baseMVA must be positive".into()));
        }
        if !self.buses.iter().any(|b| b.kind == BusType::Ref) {
            return Err(Error::MissingReferenceBus);
        }
        for bus in &self.buses {
            if !(bus.vmin > 0.0 && bus.vmin <= bus.vmax) {
                return Err(Error::InvalidNetwork(format!(
                    "bus {}: voltage bounds [{}, {}]",
                    bus.id, bus.vmin, bus.vmax
                )));
            }
        }
        for (g, gen) in self.generators.iter().enumerate() {
            if gen.pmin > gen.pmax || gen.qmin > gen.qmax {
                return Err(Error::InvalidNetwork(format!("generator {g}: inverted bounds")));
            }
            if gen.cost.c2 < 0.0 {
                return Err(Error::InvalidNetwork(format!("generator {g}: negative c2")));
            }
        }
        for (l, br) in self.branches.iter().enumerate() {
            if br.r * br.r + br.x * br.x <= 0.0 {
                return Err(Error::ZeroImpedance { branch: l });
            }
            if !(br.tap > 0.0) {
                return Err(Error::InvalidNetwork(format!("branch {l}: tap must be positive")));
            }
        }
        Ok(())
    }

    /// Returns a copy with every bus load multiplied by `factor`.
    pub fn scaled_loads(&self, factor: f64) -> Self {
        let mut net = self.clone();
        for bus in &mut net.buses {
            bus.pd *= factor;
            bus.qd *= factor;
        }
        net
    }

    /// Total generation cost in the case file's cost units.
    pub fn objective(&self, pg: &[f64]) -> f64 {
        self.generators
            .iter()
            .zip(pg)
            .map(|(g, &p)| g.cost.eval(p))
            .sum()
    }
}
