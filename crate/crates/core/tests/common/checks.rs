//! Randomized oracle comparisons used by both the focused tests and the
//! acceptance run. Each returns the worst discrepancy it saw.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gridadmm::decomp::{AdmmState, CouplingLayout, PenaltyClass};
use gridadmm::kernels::{generator_power, solve_buses, z_value, BranchProblem, LineLimit};
use gridadmm::netdata::{derive_admittances, BusType};
use gridadmm::tron::{solve_batch, BoxNlp, BoxQuadratic, TronSettings};

use super::{bisect_increasing, box_qp_active_set, grid_minimize, kkt_equality_qp, star};

/// Generator update vs a 1e-6 grid search of the scalar objective.
pub fn generator_vs_grid(instances: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let (c2, c1) = if rng.gen_bool(0.1) {
            (0.0, 0.0)
        } else {
            (rng.gen_range(0.0..50.0), rng.gen_range(-20.0..40.0))
        };
        let rho = rng.gen_range(1.0..1000.0);
        let y = rng.gen_range(-50.0..50.0);
        let t = rng.gen_range(-1.0..3.0);
        let lo = rng.gen_range(-1.0..1.0);
        let hi = lo + rng.gen_range(0.1..2.0);
        let f = |p: f64| c2 * p * p + c1 * p + y * (p - t) + 0.5 * rho * (p - t) * (p - t);
        let oracle = grid_minimize(f, lo, hi, 1e-6);
        let p = generator_power(c2, c1, rho, y, t, lo, hi);
        worst = worst.max((p - oracle).abs());
    }
    worst
}

fn random_state(rng: &mut ChaCha8Rng, layout: &CouplingLayout, n_buses: usize) -> AdmmState {
    let mut st = AdmmState::zeros(layout, n_buses);
    let (rho_pq, rho_va) = (rng.gen_range(1.0..100.0), rng.gen_range(10.0..1e4));
    for k in 0..layout.n_rows {
        st.rho[k] = match layout.class[k] {
            PenaltyClass::Power => rho_pq * rng.gen_range(0.5..2.0),
            PenaltyClass::VoltageAngle => rho_va * rng.gen_range(0.5..2.0),
        };
        st.x[k] = rng.gen_range(-1.5..1.5);
        st.z[k] = rng.gen_range(-0.1..0.1);
        st.y[k] = rng.gen_range(-20.0..20.0);
    }
    st
}

/// Bus update vs the dense KKT system of each bus subproblem. The oracle keeps
/// one `(w, θ)` copy per incident branch end and ties the copies together
/// with explicit equality rows.
pub fn bus_vs_kkt(instances: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let leaves = rng.gen_range(1..=6);
        let kind = if i % 4 == 0 { BusType::Ref } else { BusType::Pq };
        let center_gens = rng.gen_range(0..=2);
        let net = star(&mut rng, leaves, center_gens, kind);
        let layout = CouplingLayout::build(&net);
        let mut st = random_state(&mut rng, &layout, net.buses.len());
        let before = st.clone();
        solve_buses(&mut st, &net, &layout).unwrap();

        let n_gen_rows = 2 * net.generators.len();
        for (b, bus) in net.buses.iter().enumerate() {
            // (row, constraint coefficients on the two balance rows)
            let mut rows: Vec<(usize, [f64; 2])> = Vec::new();
            for &g in &bus.gens {
                rows.push((2 * g, [1.0, 0.0]));
                rows.push((2 * g + 1, [0.0, 1.0]));
            }
            for &l in &bus.from_branches {
                rows.push((n_gen_rows + 8 * l, [-1.0, 0.0]));
                rows.push((n_gen_rows + 8 * l + 1, [0.0, -1.0]));
            }
            for &l in &bus.to_branches {
                rows.push((n_gen_rows + 8 * l + 2, [-1.0, 0.0]));
                rows.push((n_gen_rows + 8 * l + 3, [0.0, -1.0]));
            }
            let ends: Vec<usize> = bus
                .from_branches
                .iter()
                .map(|l| n_gen_rows + 8 * l + 4)
                .chain(bus.to_branches.iter().map(|l| n_gen_rows + 8 * l + 6))
                .collect();
            let n_flow = rows.len();
            let mut all: Vec<usize> = rows.iter().map(|r| r.0).collect();
            for &k in &ends {
                all.push(k);
                all.push(k + 1);
            }
            let n = all.len();
            let q: Vec<f64> = all.iter().map(|&k| before.rho[k]).collect();
            let c: Vec<f64> = all
                .iter()
                .map(|&k| before.rho[k] * (before.x[k] + before.z[k]) + before.y[k])
                .collect();
            let mut a = vec![vec![0.0; n]; 2];
            for (j, (_, coef)) in rows.iter().enumerate() {
                a[0][j] = coef[0];
                a[1][j] = coef[1];
            }
            a[0][n_flow] = -bus.gs;
            a[1][n_flow] = bus.bs;
            let mut rhs = vec![bus.pd, bus.qd];
            for e in 1..ends.len() {
                for off in 0..2 {
                    let mut row = vec![0.0; n];
                    row[n_flow + 2 * e + off] = 1.0;
                    row[n_flow + off] = -1.0;
                    a.push(row);
                    rhs.push(0.0);
                }
            }
            if bus.kind == BusType::Ref {
                let mut row = vec![0.0; n];
                row[n_flow + 1] = 1.0;
                a.push(row);
                rhs.push(0.0);
            }
            let oracle = kkt_equality_qp(&q, &c, &a, &rhs).expect("nonsingular KKT");
            for (j, &k) in all.iter().enumerate() {
                worst = worst.max((st.xbar[k] - oracle[j]).abs());
            }
            worst = worst.max((st.bus_w[b] - oracle[n_flow]).abs());
            worst = worst.max((st.bus_theta[b] - oracle[n_flow + 1]).abs());
        }
    }
    worst
}

/// `z` update vs bisection on the derivative of its scalar objective.
pub fn z_vs_scalar(instances: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let rho = 10f64.powf(rng.gen_range(0.0..4.0));
        let beta = 10f64.powf(rng.gen_range(0.0..8.0));
        let y = rng.gen_range(-100.0..100.0);
        let lambda = rng.gen_range(-1e3..1e3);
        let r = rng.gen_range(-1.0..1.0);
        // d/dz of y (r + z) + ρ/2 (r + z)² + λ z + β/2 z²
        let slope = |z: f64| y + rho * (r + z) + lambda + beta * z;
        let oracle = bisect_increasing(slope, -1e4, 1e4);
        worst = worst.max((z_value(rho, beta, y, lambda, r) - oracle).abs());
    }
    worst
}

pub fn random_branch_problem(rng: &mut ChaCha8Rng, limited: bool) -> BranchProblem {
    let y = derive_admittances(
        rng.gen_range(0.0..0.05),
        rng.gen_range(0.02..0.3),
        rng.gen_range(0.0..0.3),
        rng.gen_range(0.9..1.1),
        rng.gen_range(-0.1..0.1),
    )
    .unwrap();
    let mut arr = |lo: f64, hi: f64| -> [f64; 8] { std::array::from_fn(|_| rng.gen_range(lo..hi)) };
    let target = arr(-1.0, 1.0);
    let z = arr(-0.05, 0.05);
    let mult = arr(-50.0, 50.0);
    let rho = [10.0, 10.0, 10.0, 10.0, 1000.0, 1000.0, 1000.0, 1000.0];
    let limit = limited.then(|| LineLimit {
        limit_sq: rng.gen_range(0.5..4.0),
        mult: [rng.gen_range(0.0..20.0), rng.gen_range(0.0..20.0)],
        rho: 10.0,
    });
    BranchProblem::new(y, (0.9, 1.1), (0.94, 1.06), target, z, mult, rho, limit)
}

fn random_interior_point(rng: &mut ChaCha8Rng, p: &BranchProblem) -> Vec<f64> {
    (0..p.dim())
        .map(|i| match i {
            2 | 3 => rng.gen_range(-0.6..0.6),
            _ => rng.gen_range(p.lower()[i]..=p.upper()[i]),
        })
        .collect()
}

/// Fourth-order central difference of `f` along coordinate `i`.
fn central(f: &dyn Fn(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let at = |s: f64| {
        let mut xs = x.to_vec();
        xs[i] += s;
        f(&xs)
    };
    (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)
}

/// Worst relative error `‖analytic - fd‖∞ / max(‖analytic‖∞, 1)` of the
/// branch gradient and Hessian against central differences.
pub fn branch_derivatives_vs_fd(branches: usize, points: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_g, mut worst_h): (f64, f64) = (0.0, 0.0);
    let h = 1e-4;
    for b in 0..branches {
        let p = random_branch_problem(&mut rng, b % 2 == 0);
        let n = p.dim();
        for _ in 0..points {
            let x = random_interior_point(&mut rng, &p);
            let mut g = vec![0.0; n];
            p.gradient(&x, &mut g);
            let mut hess = vec![0.0; n * n];
            p.hessian(&x, &mut hess);

            let f = |x: &[f64]| p.objective(x);
            let fd: Vec<f64> = (0..n).map(|i| central(&f, &x, i, h)).collect();
            let scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let err = g.iter().zip(&fd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            worst_g = worst_g.max(err / scale);

            let scale = hess.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let mut err: f64 = 0.0;
            for j in 0..n {
                let gj = |x: &[f64]| {
                    let mut g = vec![0.0; n];
                    p.gradient(x, &mut g);
                    g[j]
                };
                for i in 0..n {
                    err = err.max((central(&gj, &x, i, h) - hess[j * n + i]).abs());
                }
            }
            worst_h = worst_h.max(err / scale);
        }
    }
    (worst_g, worst_h)
}

pub fn random_box_qp(rng: &mut ChaCha8Rng, n: usize) -> (BoxQuadratic, Vec<f64>) {
    let m: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            q[i * n + j] = (0..n).map(|k| m[k * n + i] * m[k * n + j]).sum::<f64>() / n as f64;
        }
        q[i * n + i] += 1.0;
    }
    let c = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let lower: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..0.0)).collect();
    let upper: Vec<f64> = lower.iter().map(|l| l + rng.gen_range(0.5..3.0)).collect();
    let x0 = lower.iter().zip(&upper).map(|(l, u)| rng.gen_range(*l..=*u)).collect();
    (BoxQuadratic { q, c, lower, upper }, x0)
}

pub fn tron_qp_settings() -> TronSettings {
    TronSettings { gtol: 1e-10, ..TronSettings::default() }
}

/// Batch TRON vs active-set enumeration; also reports whether the 1- and
/// 8-worker batches agree bit for bit.
pub fn tron_vs_active_set(instances: usize, seed: u64) -> (f64, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (problems, starts): (Vec<_>, Vec<_>) = (0..instances).map(|_| random_box_qp(&mut rng, 6)).unzip();
    let settings = tron_qp_settings();
    let one = solve_batch(&problems, &starts, &settings, 1).unwrap();
    let eight = solve_batch(&problems, &starts, &settings, 8).unwrap();
    let mut worst: f64 = 0.0;
    let mut identical = true;
    for (k, p) in problems.iter().enumerate() {
        let a = one[k].as_ref().expect("TRON solve");
        let b = eight[k].as_ref().expect("TRON solve");
        identical &= a.x.iter().zip(&b.x).all(|(u, v)| u.to_bits() == v.to_bits())
            && a.report.iterations == b.report.iterations
            && a.report.objective.to_bits() == b.report.objective.to_bits();
        let oracle = box_qp_active_set(&p.q, &p.c, &p.lower, &p.upper);
        worst = worst.max(a.x.iter().zip(&oracle).fold(0.0f64, |m, (u, v)| m.max((u - v).abs())));
    }
    (worst, identical)
}
