//! Acceptance run: one PASS/FAIL line per criterion with the measured values.
//!
//! Not part of the default test set (it solves 1354pegase); run it with
//! `cargo test --release --test acceptance`. Worker count comes from
//! `GRIDADMM_WORKERS`, else the available parallelism.

mod common;

use std::time::Instant;

use common::checks;
use gridadmm::driver::{SolveReport, SolveStatus, SolverConfig};
use gridadmm::netdata::parse_matpower_file;
use gridadmm::report::{report_gap, write_convergence};
use gridadmm::{run_tracking, solve, PowerNetwork, TrackingScenario};

struct Outcome {
    failures: usize,
}

impl Outcome {
    fn line(&mut self, id: &str, ok: bool, detail: String, secs: f64) {
        if !ok {
            self.failures += 1;
        }
        println!("{} {id}: {detail} [{secs:.1} s]", if ok { "PASS" } else { "FAIL" });
    }
}

fn workers() -> usize {
    std::env::var("GRIDADMM_WORKERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn load(case: &str) -> PowerNetwork {
    parse_matpower_file(common::data_path(&format!("{case}.m"))).expect("bundled case parses")
}

fn config(case: &str) -> SolverConfig {
    SolverConfig { workers: workers(), ..SolverConfig::with_preset(case).expect("preset") }
}

fn convergence_bytes(report: &SolveReport) -> Vec<u8> {
    let mut buf = Vec::new();
    write_convergence(&mut buf, &[(None, &report.records)], false).unwrap();
    buf
}

fn main() {
    let mut out = Outcome { failures: 0 };
    println!("workers: {}", workers());

    // 1. closed-form updates vs oracles
    let t = Instant::now();
    let (g, b, z) = (checks::generator_vs_grid(1000, 101), checks::bus_vs_kkt(1000, 102), checks::z_vs_scalar(1000, 103));
    let secs = t.elapsed().as_secs_f64();
    out.line(
        "C1 closed-form oracles",
        g <= 1e-5 && b <= 1e-8 && z <= 1e-8 && secs < 10.0,
        format!("generator {g:.2e} (<=1e-5), bus {b:.2e} (<=1e-8), z {z:.2e} (<=1e-8)"),
        secs,
    );

    // 2. branch derivatives vs central differences
    let t = Instant::now();
    let (gr, hr) = checks::branch_derivatives_vs_fd(100, 10, 104);
    let secs = t.elapsed().as_secs_f64();
    out.line(
        "C2 branch derivatives",
        gr <= 1e-6 && hr <= 1e-5 && secs < 10.0,
        format!("gradient rel {gr:.2e} (<=1e-6), hessian rel {hr:.2e} (<=1e-5)"),
        secs,
    );

    // 3. TRON on box QPs
    let t = Instant::now();
    let (err, identical) = checks::tron_vs_active_set(10_000, 105);
    let secs = t.elapsed().as_secs_f64();
    out.line(
        "C3 TRON box QPs",
        err <= 1e-6 && identical && secs < 60.0,
        format!("10000 QPs, max |dx| {err:.2e} (<=1e-6), 1 vs 8 workers bit-identical: {identical}"),
        secs,
    );

    // 4. desk-scale cold starts; 7 reruns them; 8 warm starts from them
    let mut desk = Vec::new();
    for case in ["case9", "case30", "case118"] {
        let net = load(case);
        let cfg = config(case);
        let t = Instant::now();
        let report = solve(&net, &cfg, None).expect("solve");
        let secs = t.elapsed().as_secs_f64();
        let z = report.records.last().map_or(f64::INFINITY, |r| r.z_norm);
        let gap = report_gap(report.metrics.objective, common::reference_objective(case)).unwrap();
        let c = report.metrics.max_violation;
        out.line(
            &format!("C4 {case}"),
            report.status == SolveStatus::Converged && z <= 1e-4 && c <= 1e-3 && gap <= 5e-3 && secs < 120.0,
            format!(
                "{:?}, inner {}, |z|inf {z:.2e} (<=1e-4), |c(x)|inf {c:.2e} (<=1e-3), gap {:.4}% (<=0.5%)",
                report.status,
                report.inner_iterations,
                gap * 100.0
            ),
            secs,
        );
        desk.push((case, net, cfg, report));
    }

    let t = Instant::now();
    let mut same = Vec::new();
    for (case, net, cfg, first) in &desk {
        let again = solve(net, cfg, None).expect("solve");
        same.push((case, convergence_bytes(first) == convergence_bytes(&again)));
    }
    out.line(
        "C7 determinism",
        same.iter().all(|s| s.1),
        format!("convergence.csv byte-identical: {}", same.iter().map(|(c, s)| format!("{c}={s}")).collect::<Vec<_>>().join(" ")),
        t.elapsed().as_secs_f64(),
    );

    let t = Instant::now();
    let mut fixed = Vec::new();
    for (case, net, cfg, first) in &desk {
        let warm = solve(net, cfg, Some(&first.state)).expect("solve");
        fixed.push((case, warm.status, warm.outer_iterations, warm.inner_iterations));
    }
    out.line(
        "C8 fixed point",
        fixed.iter().all(|f| f.1 == SolveStatus::Converged && f.2 == 1 && f.3 <= 2),
        fixed.iter().map(|(c, _, o, i)| format!("{c}: outer {o} inner {i}")).collect::<Vec<_>>().join(", "),
        t.elapsed().as_secs_f64(),
    );

    // 6. case30 tracking, 10 periods of +-2% load
    let net = load("case30");
    let cfg = config("case30");
    let mut scenario = TrackingScenario::from_csv(common::data_path("case30_sine10.csv"), 0.02).unwrap();
    let reference: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(common::data_path("case30_sine10_reference.json")).unwrap()).unwrap();
    scenario.reference =
        Some(reference.as_array().unwrap().iter().map(|p| p["objective"].as_f64().unwrap()).collect());
    let t = Instant::now();
    let periods = run_tracking(&net, &cfg, &scenario).expect("tracking");
    let secs = t.elapsed().as_secs_f64();
    let all_converged = periods.iter().all(|p| p.report.status == SolveStatus::Converged);
    let cold = periods[0].report.inner_iterations;
    let warm: usize = periods[1..].iter().map(|p| p.report.inner_iterations).sum();
    let ratio = warm as f64 / ((periods.len() - 1) * cold) as f64;
    let mut ramp_excess = f64::NEG_INFINITY;
    for w in periods.windows(2) {
        for (g, gen) in net.generators.iter().enumerate() {
            let step = (w[1].report.solution.pg[g] - w[0].report.solution.pg[g]).abs();
            ramp_excess = ramp_excess.max(step - scenario.ramp_frac * gen.pmax);
        }
    }
    let gaps: Vec<f64> = periods.iter().map(|p| p.gap.unwrap()).collect();
    let max_gap = gaps.iter().copied().fold(0.0, f64::max);
    out.line(
        "C6 case30 tracking",
        all_converged && ratio < 0.5 && ramp_excess <= 1e-8 && max_gap <= 1e-2 && secs < 300.0,
        format!(
            "all converged: {all_converged}, cold {cold}, warm sum {warm}, ratio {ratio:.3} (<0.5), \
             ramp excess {ramp_excess:.1e} (<=1e-8), max gap {:.3}% (<=1%), gaps [{}]",
            max_gap * 100.0,
            gaps.iter().map(|g| format!("{:.2}", g * 100.0)).collect::<Vec<_>>().join(" ")
        ),
        secs,
    );

    // 5. 1354pegase at its preset penalties
    let net = load("case1354pegase");
    let cfg = config("case1354pegase");
    let t = Instant::now();
    let report = solve(&net, &cfg, None).expect("solve");
    let secs = t.elapsed().as_secs_f64();
    let gap = report_gap(report.metrics.objective, common::reference_objective("case1354pegase")).unwrap();
    let c = report.metrics.max_violation;
    out.line(
        "C5 case1354pegase",
        report.status == SolveStatus::Converged
            && report.inner_iterations <= 2000
            && c <= 5e-3
            && gap <= 5e-3
            && secs < 900.0,
        format!(
            "{:?}, inner {} (<=2000), outer {}, |c(x)|inf {c:.2e} (<=5e-3), gap {:.4}% (<=0.5%)",
            report.status,
            report.inner_iterations,
            report.outer_iterations,
            gap * 100.0
        ),
        secs,
    );

    println!("{} criteria failed", out.failures);
}
