//! Multi-period tracking: each period scales the loads, restricts real-power
//! output to a ramp window around the previous period, and warm starts from
//! the previous period's full ADMM state.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decomp::AdmmState;
use crate::driver::{solve, SolveReport, SolverConfig};
use crate::error::{Error, Result};
use crate::netdata::PowerNetwork;

/// Load multipliers per period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LoadProfile {
    /// One multiplier per period applied to every bus.
    Uniform(Vec<f64>),
    /// Per period, `(external bus number, multiplier)` pairs; unlisted buses keep multiplier 1.
    PerBus(Vec<Vec<(i64, f64)>>),
}

impl LoadProfile {
    pub fn periods(&self) -> usize {
        match self {
            LoadProfile::Uniform(m) => m.len(),
            LoadProfile::PerBus(t) => t.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.periods() == 0 {
            return Err(Error::InvalidProfile("profile has no periods".into()));
        }
        let bad = match self {
            LoadProfile::Uniform(m) => m.iter().copied().find(|v| !(*v > 0.0 && v.is_finite())),
            LoadProfile::PerBus(t) => t.iter().flatten().map(|e| e.1).find(|v| !(*v > 0.0 && v.is_finite())),
        };
        match bad {
            Some(v) => Err(Error::InvalidProfile(format!("multiplier {v} is not positive"))),
            None => Ok(()),
        }
    }

    /// The base network with period `t`'s (0-based) loads applied.
    pub fn apply(&self, net: &PowerNetwork, t: usize) -> Result<PowerNetwork> {
        match self {
            LoadProfile::Uniform(m) => Ok(net.scaled_loads(m[t])),
            LoadProfile::PerBus(table) => {
                let mut out = net.clone();
                for &(id, f) in &table[t] {
                    let b = *net.bus_index.get(&id).ok_or(Error::UnknownBus {
                        kind: "profile",
                        row: t + 1,
                        bus: id,
                    })?;
                    out.buses[b].pd *= f;
                    out.buses[b].qd *= f;
                }
                Ok(out)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingScenario {
    pub profile: LoadProfile,
    /// Ramp limit as a fraction of each generator's `pmax`.
    pub ramp_frac: f64,
    /// Optional reference objective per period, for gap reporting.
    pub reference: Option<Vec<f64>>,
}

impl TrackingScenario {
    pub fn uniform(multipliers: Vec<f64>) -> Self {
        Self { profile: LoadProfile::Uniform(multipliers), ramp_frac: 0.02, reference: None }
    }

    pub fn validate(&self) -> Result<()> {
        self.profile.validate()?;
        if !(self.ramp_frac >= 0.0 && self.ramp_frac.is_finite()) {
            return Err(Error::InvalidProfile(format!("ramp fraction {} is invalid", self.ramp_frac)));
        }
        if let Some(r) = &self.reference {
            if r.len() != self.profile.periods() {
                return Err(Error::InvalidProfile("reference objectives do not match the period count".into()));
            }
        }
        Ok(())
    }

    /// Reads a profile CSV with header `period,multiplier` (uniform) or
    /// `period,bus,multiplier` (per bus). An optional `ref_objective` column
    /// supplies per-period reference objectives.
    pub fn from_csv(path: impl AsRef<Path>, ramp_frac: f64) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let headers = rdr.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let (Some(c_period), Some(c_mult)) = (col("period"), col("multiplier")) else {
            return Err(Error::InvalidProfile(format!(
                "{}: header must contain `period` and `multiplier`",
                path.display()
            )));
        };
        let c_bus = col("bus");
        let c_ref = col("ref_objective");

        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = |c: usize, what: &str| -> Result<&str> {
                rec.get(c).ok_or_else(|| Error::InvalidProfile(format!("row {}: missing {what}", i + 1)))
            };
            let num = |c: usize, what: &str| -> Result<f64> {
                let s = field(c, what)?;
                s.parse::<f64>()
                    .map_err(|_| Error::InvalidProfile(format!("row {}: bad {what} `{s}`", i + 1)))
            };
            let period = num(c_period, "period")?;
            if period.fract() != 0.0 || period < 1.0 {
                return Err(Error::InvalidProfile(format!("row {}: period must be a positive integer", i + 1)));
            }
            let bus = c_bus.map(|c| num(c, "bus")).transpose()?.map(|b| b as i64);
            let reference = match c_ref.map(|c| field(c, "ref_objective")).transpose()? {
                Some(s) if !s.is_empty() => Some(num(c_ref.unwrap(), "ref_objective")?),
                _ => None,
            };
            rows.push((period as usize, bus, num(c_mult, "multiplier")?, reference));
        }

        let periods = rows.iter().map(|r| r.0).max().unwrap_or(0);
        let mut reference = vec![None; periods];
        for r in &rows {
            if let Some(v) = r.3 {
                reference[r.0 - 1] = Some(v);
            }
        }
        let reference = reference.iter().all(Option::is_some).then(|| reference.into_iter().flatten().collect());

        let profile = if c_bus.is_some() {
            let mut table = vec![Vec::new(); periods];
            for (p, bus, m, _) in rows {
                table[p - 1].push((bus.expect("bus column"), m));
            }
            LoadProfile::PerBus(table)
        } else {
            let mut mult = vec![None; periods];
            for (p, _, m, _) in rows {
                if mult[p - 1].replace(m).is_some() {
                    return Err(Error::InvalidProfile(format!("period {p} listed twice")));
                }
            }
            let mult: Option<Vec<f64>> = mult.into_iter().collect();
            LoadProfile::Uniform(mult.ok_or_else(|| Error::InvalidProfile("periods are not contiguous".into()))?)
        };
        let scenario = Self { profile, ramp_frac, reference };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Linearly interpolates an hourly demand series into `steps_per_hour`
/// periods per hour, normalized so the first period is 1.
///
/// Produces `(n - 1)·steps_per_hour + 1` multipliers for `n` hourly points.
pub fn interpolate_profile(hourly: &[f64], steps_per_hour: usize) -> Result<Vec<f64>> {
    if hourly.len() < 2 {
        return Err(Error::InvalidProfile("need at least two hourly points".into()));
    }
    if steps_per_hour == 0 {
        return Err(Error::InvalidProfile("steps per hour must be at least 1".into()));
    }
    if let Some(v) = hourly.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidProfile(format!("demand value {v} is not positive")));
    }
    let first = hourly[0];
    let mut out = Vec::with_capacity((hourly.len() - 1) * steps_per_hour + 1);
    for pair in hourly.windows(2) {
        for s in 0..steps_per_hour {
            let frac = s as f64 / steps_per_hour as f64;
            out.push((pair[0] + (pair[1] - pair[0]) * frac) / first);
        }
    }
    out.push(hourly[hourly.len() - 1] / first);
    Ok(out)
}

/// Real-power bounds of period `t + 1` given the previous set points.
pub fn ramp_window(net: &PowerNetwork, prev_pg: &[f64], ramp_frac: f64) -> Result<Vec<(f64, f64)>> {
    net.generators
        .iter()
        .zip(prev_pg)
        .enumerate()
        .map(|(g, (gen, &p))| {
            let r = ramp_frac * gen.pmax.abs();
            let (lo, hi) = (p - r, p + r);
            let (a, b) = (lo.max(gen.pmin), hi.min(gen.pmax));
            if a > b {
                return Err(Error::InfeasibleRamp { gen: g, lo, hi, pmin: gen.pmin, pmax: gen.pmax });
            }
            Ok((a, b))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodReport {
    /// 1-based period number.
    pub period: usize,
    pub multiplier: Option<f64>,
    /// Real-power bounds the period was solved with.
    pub p_bounds: Vec<(f64, f64)>,
    pub report: SolveReport,
    pub gap: Option<f64>,
}

/// Resets `β` to `beta0` and shifts `λ` by `(β_old - beta0)·z`, so the
/// carried-over `z` still minimizes its block; a converged state stays one.
pub fn rebase_beta(state: &mut AdmmState, beta0: f64, lambda_bound: f64) {
    let shift = state.beta - beta0;
    for (l, z) in state.lambda.iter_mut().zip(&state.z) {
        *l = (*l + shift * z).clamp(-lambda_bound, lambda_bound);
    }
    state.beta = beta0;
}

/// Solves every period in order; period 1 from a cold start, later periods
/// warm started from the previous state with `β` rebased to `β₀` (see [`rebase_beta`]).
pub fn run_tracking(net: &PowerNetwork, config: &SolverConfig, scenario: &TrackingScenario) -> Result<Vec<PeriodReport>> {
    scenario.validate()?;
    let mut out: Vec<PeriodReport> = Vec::with_capacity(scenario.profile.periods());
    for t in 0..scenario.profile.periods() {
        let mut period_net = scenario.profile.apply(net, t)?;
        let (report, p_bounds) = match out.last() {
            None => {
                let bounds = net.generators.iter().map(|g| (g.pmin, g.pmax)).collect();
                (solve(&period_net, config, None)?, bounds)
            }
            Some(prev) => {
                let bounds = ramp_window(net, &prev.report.solution.pg, scenario.ramp_frac)?;
                for (gen, &(lo, hi)) in period_net.generators.iter_mut().zip(&bounds) {
                    gen.pmin = lo;
                    gen.pmax = hi;
                }
                let mut warm = prev.report.state.clone();
                rebase_beta(&mut warm, config.beta0, config.lambda_bound);
                (solve(&period_net, config, Some(&warm))?, bounds)
            }
        };
        let gap = scenario
            .reference
            .as_ref()
            .map(|r| crate::report::report_gap(report.metrics.objective, r[t]))
            .transpose()?;
        log::info!(
            "period {}: {:?} after {} inner iterations, objective {:.4}",
            t + 1,
            report.status,
            report.inner_iterations,
            report.metrics.objective
        );
        let multiplier = match &scenario.profile {
            LoadProfile::Uniform(m) => Some(m[t]),
            LoadProfile::PerBus(_) => None,
        };
        out.push(PeriodReport { period: t + 1, multiplier, p_bounds, report, gap });
    }
    Ok(out)
}
