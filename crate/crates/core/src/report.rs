//! Run manifest, objective gap and the output artifacts written by the CLI.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::driver::{IterationRecord, Metrics, SolveReport, SolveStatus, SolverConfig};
use crate::error::{Error, Result};
use crate::netdata::PowerNetwork;
use crate::tracking::PeriodReport;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Solve,
    Track,
}

/// Everything a run needs; loaded from a TOML file and/or command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunManifest {
    pub case: Option<PathBuf>,
    pub mode: Mode,
    pub preset: Option<String>,
    pub out_dir: PathBuf,
    pub profile: Option<PathBuf>,
    pub ramp_frac: f64,
    pub ref_objective: Option<f64>,
    /// Write zeros instead of wall-clock times so outputs are reproducible.
    pub no_timing: bool,
    pub solver: SolverConfig,
}

impl Default for RunManifest {
    fn default() -> Self {
        Self {
            case: None,
            mode: Mode::Solve,
            preset: None,
            out_dir: PathBuf::from("."),
            profile: None,
            ramp_frac: 0.02,
            ref_objective: None,
            no_timing: false,
            solver: SolverConfig::default(),
        }
    }
}

impl RunManifest {
    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.case.is_none() {
            return Err(Error::InvalidConfig("a case file is required".into()));
        }
        if self.mode == Mode::Track && self.profile.is_none() {
            return Err(Error::InvalidConfig("track mode requires a load profile".into()));
        }
        if let Some(r) = self.ref_objective {
            if !(r > 0.0) {
                return Err(Error::InvalidConfig(format!("reference objective {r} must be positive")));
            }
        }
        self.solver.validate()
    }
}

/// Relative objective gap `|f - f*| / f*`.
pub fn report_gap(objective: f64, reference: f64) -> Result<f64> {
    if !(reference > 0.0 && reference.is_finite()) {
        return Err(Error::InvalidConfig(format!("reference objective {reference} must be positive")));
    }
    Ok((objective - reference).abs() / reference)
}

#[derive(Serialize)]
struct GeneratorOut {
    index: usize,
    bus: i64,
    pg: f64,
    qg: f64,
}

#[derive(Serialize)]
struct BusOut {
    id: i64,
    vm: f64,
    va: f64,
}

#[derive(Serialize)]
struct BranchOut {
    index: usize,
    from: i64,
    to: i64,
    p_ij: f64,
    q_ij: f64,
    p_ji: f64,
    q_ji: f64,
}

#[derive(Serialize)]
struct SolutionOut<'a> {
    status: SolveStatus,
    base_mva: f64,
    objective: f64,
    gap: Option<f64>,
    metrics: &'a Metrics,
    outer_iterations: usize,
    inner_iterations: usize,
    elapsed_s: f64,
    generators: Vec<GeneratorOut>,
    buses: Vec<BusOut>,
    branches: Vec<BranchOut>,
}

/// Writes `solution.json`; all electrical quantities are per unit, angles in radians.
pub fn write_solution_json(
    path: impl AsRef<Path>,
    net: &PowerNetwork,
    report: &SolveReport,
    gap: Option<f64>,
    timing: bool,
) -> Result<()> {
    let sol = &report.solution;
    let out = SolutionOut {
        status: report.status,
        base_mva: net.base_mva,
        objective: report.metrics.objective,
        gap,
        metrics: &report.metrics,
        outer_iterations: report.outer_iterations,
        inner_iterations: report.inner_iterations,
        elapsed_s: if timing { report.elapsed_s } else { 0.0 },
        generators: net
            .generators
            .iter()
            .enumerate()
            .map(|(g, gen)| GeneratorOut { index: g, bus: net.buses[gen.bus].id, pg: sol.pg[g], qg: sol.qg[g] })
            .collect(),
        buses: net
            .buses
            .iter()
            .enumerate()
            .map(|(b, bus)| BusOut { id: bus.id, vm: sol.vm[b], va: sol.va[b] })
            .collect(),
        branches: net
            .branches
            .iter()
            .zip(&sol.flows)
            .enumerate()
            .map(|(l, (br, f))| BranchOut {
                index: l,
                from: net.buses[br.from].id,
                to: net.buses[br.to].id,
                p_ij: f.p_ij,
                q_ij: f.q_ij,
                p_ji: f.p_ji,
                q_ji: f.q_ji,
            })
            .collect(),
    };
    let mut file = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut file, &out)?;
    writeln!(file)?;
    Ok(())
}

/// Writes the per-iteration series; `period` adds a leading column.
pub fn write_convergence<W: Write>(
    w: W,
    series: &[(Option<usize>, &[IterationRecord])],
    timing: bool,
) -> Result<()> {
    let tracked = series.iter().any(|s| s.0.is_some());
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["outer", "inner", "primal_res", "dual_res", "z_norm", "elapsed_s"];
    if tracked {
        header.insert(0, "period");
    }
    wtr.write_record(&header)?;
    for (period, records) in series {
        for r in records.iter() {
            let elapsed = if timing { r.elapsed_s } else { 0.0 };
            let mut row = vec![
                r.outer.to_string(),
                r.inner.to_string(),
                format!("{:e}", r.primal_res),
                format!("{:e}", r.dual_res),
                format!("{:e}", r.z_norm),
                format!("{elapsed:.6}"),
            ];
            if tracked {
                row.insert(0, period.map_or(String::new(), |p| p.to_string()));
            }
            wtr.write_record(&row)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Writes `periods.csv`: `period, inner_iters, time_s, viol_inf, gap`.
pub fn write_periods<W: Write>(w: W, periods: &[PeriodReport], timing: bool) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["period", "inner_iters", "time_s", "viol_inf", "gap"])?;
    for p in periods {
        let time = if timing { p.report.elapsed_s } else { 0.0 };
        wtr.write_record([
            p.period.to_string(),
            p.report.inner_iterations.to_string(),
            format!("{time:.6}"),
            format!("{:e}", p.report.metrics.max_violation),
            p.gap.map_or(String::new(), |g| format!("{g:e}")),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
