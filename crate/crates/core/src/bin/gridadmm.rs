//! Command-line front end.
//!
//! Exit status: 0 converged, 2 iteration limit reached, 1 input or run error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, ValueEnum};

use gridadmm::driver::{preset, SolveStatus};
use gridadmm::netdata::parse_matpower_file;
use gridadmm::report::{
    report_gap, write_convergence, write_periods, write_solution_json, Mode, RunManifest,
};
use gridadmm::tracking::{run_tracking, TrackingScenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Solve,
    Track,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Solve => Mode::Solve,
            ModeArg::Track => Mode::Track,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "gridadmm", version, about = "Two-level ADMM solver and tracker for AC optimal power flow")]
struct Cli {
    /// Run mode (same as --mode).
    #[arg(value_enum)]
    command: Option<ModeArg>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// MATPOWER case file.
    #[arg(long)]
    case: Option<PathBuf>,
    /// TOML run manifest; command-line flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Penalty preset by case name, e.g. case1354pegase.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    rho_pq: Option<f64>,
    #[arg(long)]
    rho_va: Option<f64>,
    #[arg(long)]
    beta0: Option<f64>,
    /// Outer tolerance on the z norm.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    max_outer: Option<usize>,
    #[arg(long)]
    max_inner: Option<usize>,
    #[arg(long, env = "GRIDADMM_WORKERS")]
    workers: Option<usize>,
    /// Load profile CSV (track mode).
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Ramp limit as a fraction of pmax (track mode).
    #[arg(long)]
    ramp_frac: Option<f64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Reference objective for gap reporting.
    #[arg(long)]
    ref_objective: Option<f64>,
    /// Write zero wall-clock times so repeated runs produce identical files.
    #[arg(long)]
    no_timing: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(SolveStatus::Converged) => ExitCode::SUCCESS,
        Ok(SolveStatus::IterationLimit) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn build_manifest(cli: &Cli) -> anyhow::Result<RunManifest> {
    let (mut m, file_rho) = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            let table: toml::Table = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            let file_rho = table
                .get("solver")
                .and_then(|s| s.as_table())
                .is_some_and(|s| s.contains_key("rho_pq") || s.contains_key("rho_va"));
            (RunManifest::from_toml_file(path)?, file_rho)
        }
        None => (RunManifest::default(), false),
    };

    match (cli.command, cli.mode) {
        (Some(a), Some(b)) if a != b => bail!("conflicting modes {a:?} and {b:?}"),
        (Some(a), _) | (None, Some(a)) => m.mode = a.into(),
        (None, None) => {}
    }
    if let Some(c) = &cli.case {
        m.case = Some(c.clone());
    }
    let case = m.case.clone().ok_or_else(|| anyhow!("--case is required"))?;

    let flag_rho = cli.rho_pq.is_some() || cli.rho_va.is_some();
    let apply = |m: &mut RunManifest, name: &str| -> anyhow::Result<()> {
        let (pq, va) = preset(name).ok_or_else(|| anyhow!("unknown preset `{name}`"))?;
        m.solver.rho_pq = pq;
        m.solver.rho_va = va;
        Ok(())
    };
    if let Some(p) = &cli.preset {
        apply(&mut m, p)?;
        m.preset = Some(p.clone());
    } else if let Some(p) = m.preset.clone() {
        if !file_rho {
            apply(&mut m, &p)?;
        }
    } else if !file_rho && !flag_rho {
        let stem = case.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        apply(&mut m, stem).map_err(|_| {
            anyhow!("no penalty preset for `{stem}`; pass --rho-pq and --rho-va or --preset")
        })?;
    }

    let s = &mut m.solver;
    if let Some(v) = cli.rho_pq {
        s.rho_pq = v;
    }
    if let Some(v) = cli.rho_va {
        s.rho_va = v;
    }
    if let Some(v) = cli.beta0 {
        s.beta0 = v;
    }
    if let Some(v) = cli.eps {
        s.eps = v;
    }
    if let Some(v) = cli.max_outer {
        s.max_outer = v;
    }
    if let Some(v) = cli.max_inner {
        s.max_inner = v;
    }
    if let Some(v) = cli.workers {
        s.workers = v;
    }
    if let Some(p) = &cli.profile {
        m.profile = Some(p.clone());
    }
    if let Some(v) = cli.ramp_frac {
        m.ramp_frac = v;
    }
    if let Some(d) = &cli.out_dir {
        m.out_dir = d.clone();
    }
    if let Some(v) = cli.ref_objective {
        m.ref_objective = Some(v);
    }
    m.no_timing |= cli.no_timing;
    m.validate()?;
    Ok(m)
}

fn run(cli: Cli) -> anyhow::Result<SolveStatus> {
    let m = build_manifest(&cli)?;
    let case = m.case.as_deref().expect("validated");
    let net = parse_matpower_file(case).with_context(|| format!("reading case {}", case.display()))?;
    fs::create_dir_all(&m.out_dir).with_context(|| format!("creating {}", m.out_dir.display()))?;
    let timing = !m.no_timing;
    let out = |name: &str| m.out_dir.join(name);

    match m.mode {
        Mode::Solve => {
            let report = gridadmm::solve(&net, &m.solver, None)?;
            let gap = m.ref_objective.map(|r| report_gap(report.metrics.objective, r)).transpose()?;
            write_solution_json(out("solution.json"), &net, &report, gap, timing)?;
            let file = create(&out("convergence.csv"))?;
            write_convergence(file, &[(None, &report.records)], timing)?;
            println!(
                "{:?}: objective {:.6}, |c(x)|inf {:.3e}, outer {}, inner {}{}",
                report.status,
                report.metrics.objective,
                report.metrics.max_violation,
                report.outer_iterations,
                report.inner_iterations,
                gap.map_or(String::new(), |g| format!(", gap {:.4}%", 100.0 * g)),
            );
            Ok(report.status)
        }
        Mode::Track => {
            let profile = m.profile.as_deref().expect("validated");
            let scenario = TrackingScenario::from_csv(profile, m.ramp_frac)
                .with_context(|| format!("reading profile {}", profile.display()))?;
            let periods = run_tracking(&net, &m.solver, &scenario)?;
            let last = periods.last().expect("at least one period");
            let period_net = scenario.profile.apply(&net, last.period - 1)?;
            write_solution_json(out("solution.json"), &period_net, &last.report, last.gap, timing)?;
            let series: Vec<_> = periods.iter().map(|p| (Some(p.period), &p.report.records[..])).collect();
            write_convergence(create(&out("convergence.csv"))?, &series, timing)?;
            write_periods(create(&out("periods.csv"))?, &periods, timing)?;
            for p in &periods {
                println!(
                    "period {:>3}: {:?}, inner {}, |c(x)|inf {:.3e}{}",
                    p.period,
                    p.report.status,
                    p.report.inner_iterations,
                    p.report.metrics.max_violation,
                    p.gap.map_or(String::new(), |g| format!(", gap {:.4}%", 100.0 * g)),
                );
            }
            let all_converged = periods.iter().all(|p| p.report.status == SolveStatus::Converged);
            Ok(if all_converged { SolveStatus::Converged } else { SolveStatus::IterationLimit })
        }
    }
}

fn create(path: &Path) -> anyhow::Result<fs::File> {
    fs::File::create(path).with_context(|| format!("creating {}", path.display()))
}
