//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

pub mod checks;

use std::collections::HashMap;
use std::path::PathBuf;

use num_complex::Complex64;
use rand::Rng;

use gridadmm::netdata::{derive_admittances, Branch, Bus, BusType, Generator, PowerNetwork, QuadraticCost};

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

/// Reference-solver objective of a bundled case.
pub fn reference_objective(case: &str) -> f64 {
    let text = std::fs::read_to_string(data_path("reference_objectives.json")).unwrap();
    let all: serde_json::Value = serde_json::from_str(&text).unwrap();
    all[case]["objective"].as_f64().unwrap_or_else(|| panic!("no reference objective for {case}"))
}

/// Solves `A x = b` for a dense square system by Gaussian elimination with
/// partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Minimizer of `½ xᵀ diag(q) x - cᵀx` subject to `A x = b` via the full
/// dense KKT system; `a` holds one row per constraint.
pub fn kkt_equality_qp(q: &[f64], c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let (n, m) = (q.len(), b.len());
    let mut k = vec![vec![0.0; n + m]; n + m];
    let mut rhs = vec![0.0; n + m];
    for i in 0..n {
        k[i][i] = q[i];
        rhs[i] = c[i];
    }
    for (r, row) in a.iter().enumerate() {
        for i in 0..n {
            k[i][n + r] = row[i];
            k[n + r][i] = row[i];
        }
        rhs[n + r] = b[r];
    }
    dense_solve(k, rhs).map(|mut x| {
        x.truncate(n);
        x
    })
}

/// Grid minimizer of a convex scalar function on `[lo, hi]` at resolution
/// `h`: a coarse pass at `1000·h` locates the bracket, a fine pass at `h`
/// scans it.
pub fn grid_minimize(f: impl Fn(f64) -> f64, lo: f64, hi: f64, h: f64) -> f64 {
    let scan = |a: f64, b: f64, step: f64| -> f64 {
        let n = ((b - a) / step).ceil() as usize;
        let mut best = (f(a), a);
        for i in 0..=n {
            let x = (a + i as f64 * step).min(b);
            let v = f(x);
            if v < best.0 {
                best = (v, x);
            }
        }
        best.1
    };
    let coarse = 1000.0 * h;
    let x0 = scan(lo, hi, coarse);
    scan((x0 - 2.0 * coarse).max(lo), (x0 + 2.0 * coarse).min(hi), h)
}

/// Root of an increasing scalar function on `[a, b]` by bisection, run
/// until the bracket stops shrinking in floating point.
pub fn bisect_increasing(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    assert!(f(a) <= 0.0 && f(b) >= 0.0, "root not bracketed");
    loop {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            return m;
        }
        if f(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
}

/// Minimizer of the box QP `½ xᵀQx - cᵀx`, `l ≤ x ≤ u` (Q SPD, row-major) by
/// enumerating all 3ⁿ lower/upper/free patterns and returning the pattern
/// that satisfies the KKT conditions.
pub fn box_qp_active_set(q: &[f64], c: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let n = c.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for code in 0..3usize.pow(n as u32) {
        let mut pattern = vec![0u8; n];
        let mut k = code;
        for p in pattern.iter_mut() {
            *p = (k % 3) as u8;
            k /= 3;
        }
        let mut x = vec![0.0; n];
        for i in 0..n {
            match pattern[i] {
                1 => x[i] = lo[i],
                2 => x[i] = hi[i],
                _ => {}
            }
        }
        let free: Vec<usize> = (0..n).filter(|&i| pattern[i] == 0).collect();
        if !free.is_empty() {
            let a: Vec<Vec<f64>> = free.iter().map(|&i| free.iter().map(|&j| q[i * n + j]).collect()).collect();
            let b: Vec<f64> = free
                .iter()
                .map(|&i| c[i] - (0..n).filter(|j| pattern[*j] != 0).map(|j| q[i * n + j] * x[j]).sum::<f64>())
                .collect();
            let Some(sol) = dense_solve(a, b) else { continue };
            for (&i, v) in free.iter().zip(sol) {
                x[i] = v;
            }
        }
        let feasible = (0..n).all(|i| x[i] >= lo[i] - 1e-12 && x[i] <= hi[i] + 1e-12);
        if !feasible {
            continue;
        }
        let g: Vec<f64> = (0..n).map(|i| (0..n).map(|j| q[i * n + j] * x[j]).sum::<f64>() - c[i]).collect();
        let kkt = (0..n).all(|i| match pattern[i] {
            1 => g[i] >= -1e-12,
            2 => g[i] <= 1e-12,
            _ => true,
        });
        if !kkt {
            continue;
        }
        let f: f64 = 0.5 * (0..n).map(|i| x[i] * g[i] - x[i] * c[i]).sum::<f64>();
        if best.as_ref().map_or(true, |b| f < b.0) {
            best = Some((f, x));
        }
    }
    best.expect("an SPD box QP has a KKT point").1
}

/// Two-bus network: generator at the reference bus 1, load at bus 2.
pub fn two_bus(load_p: f64, load_q: f64, rate: f64) -> PowerNetwork {
    let bus = |id: i64, kind: BusType, pd: f64, qd: f64| Bus {
        id,
        kind,
        pd,
        qd,
        gs: 0.0,
        bs: 0.0,
        vmin: 0.95,
        vmax: 1.05,
        gens: vec![],
        from_branches: vec![],
        to_branches: vec![],
    };
    let mut buses = vec![bus(1, BusType::Ref, 0.0, 0.0), bus(2, BusType::Pq, load_p, load_q)];
    buses[0].gens.push(0);
    buses[0].from_branches.push(0);
    buses[1].to_branches.push(0);
    let (r, x, b) = (0.01, 0.1, 0.02);
    PowerNetwork {
        base_mva: 100.0,
        buses,
        generators: vec![Generator {
            bus: 0,
            pmin: 0.0,
            pmax: 2.0,
            qmin: -1.0,
            qmax: 1.0,
            cost: QuadraticCost { c2: 100.0, c1: 2000.0, c0: 0.0 },
            in_service: true,
        }],
        branches: vec![Branch {
            from: 0,
            to: 1,
            r,
            x,
            charging: b,
            tap: 1.0,
            shift: 0.0,
            rate,
            y: derive_admittances(r, x, b, 1.0, 0.0).unwrap(),
        }],
        bus_index: HashMap::from([(1, 0), (2, 1)]),
    }
}

/// Star network: bus 0 at the center, buses `1..=leaves` around it. Even
/// leaves are branch `from` ends, odd leaves `to` ends, so the center owns
/// both flow directions. The center carries `center_gens` generators and
/// every third leaf one more.
pub fn star(rng: &mut impl Rng, leaves: usize, center_gens: usize, center_kind: BusType) -> PowerNetwork {
    let n = leaves + 1;
    let mut buses: Vec<Bus> = (0..n)
        .map(|b| Bus {
            id: b as i64 + 1,
            kind: if b == 0 { center_kind } else { BusType::Pq },
            pd: rng.gen_range(-0.5..1.5),
            qd: rng.gen_range(-0.5..0.5),
            gs: if rng.gen_bool(0.5) { rng.gen_range(-0.2..0.2) } else { 0.0 },
            bs: if rng.gen_bool(0.5) { rng.gen_range(-0.3..0.3) } else { 0.0 },
            vmin: 0.9,
            vmax: 1.1,
            gens: vec![],
            from_branches: vec![],
            to_branches: vec![],
        })
        .collect();
    let gen_buses: Vec<usize> = std::iter::repeat(0).take(center_gens).chain((1..n).step_by(3)).collect();
    let mut generators = Vec::new();
    for bus in gen_buses {
        buses[bus].gens.push(generators.len());
        generators.push(Generator {
            bus,
            pmin: 0.0,
            pmax: 2.0,
            qmin: -1.0,
            qmax: 1.0,
            cost: QuadraticCost { c2: rng.gen_range(0.0..50.0), c1: rng.gen_range(0.0..40.0), c0: 0.0 },
            in_service: true,
        });
    }
    let mut branches = Vec::new();
    for leaf in 1..n {
        let (from, to) = if leaf % 2 == 0 { (leaf, 0) } else { (0, leaf) };
        let (r, x, b) = (rng.gen_range(0.0..0.05), rng.gen_range(0.02..0.3), rng.gen_range(0.0..0.2));
        buses[from].from_branches.push(branches.len());
        buses[to].to_branches.push(branches.len());
        branches.push(Branch {
            from,
            to,
            r,
            x,
            charging: b,
            tap: 1.0,
            shift: 0.0,
            rate: if leaf % 2 == 0 { 1.5 } else { 0.0 },
            y: derive_admittances(r, x, b, 1.0, 0.0).unwrap(),
        });
    }
    let bus_index = buses.iter().enumerate().map(|(b, bus)| (bus.id, b)).collect();
    PowerNetwork { base_mva: 100.0, buses, generators, branches, bus_index }
}

/// Complex power injected into a pi-model line at both ends (untapped),
/// written directly from `S = V (Y V)*`.
pub fn pi_line_power(r: f64, x: f64, b: f64, v1: f64, t1: f64, v2: f64, t2: f64) -> (Complex64, Complex64) {
    let ys = Complex64::new(1.0, 0.0) / Complex64::new(r, x);
    let ysh = Complex64::new(0.0, b / 2.0);
    let (e1, e2) = (Complex64::from_polar(v1, t1), Complex64::from_polar(v2, t2));
    let i1 = (ys + ysh) * e1 - ys * e2;
    let i2 = (ys + ysh) * e2 - ys * e1;
    (e1 * i1.conj(), e2 * i2.conj())
}

/// Optimum of the [`two_bus`] problem `(pg, qg, v1, v2, θ2)`: a 1e-5 grid over
/// `v1`; for each value Newton's method solves the two load-bus balance
/// equations for `(v2, θ2)`, and the cheapest point within all bounds wins.
pub fn two_bus_oracle(load_p: f64, load_q: f64) -> [f64; 5] {
    let (r, x, b) = (0.01, 0.1, 0.02);
    let mut best: Option<(f64, [f64; 5])> = None;
    let steps = 10_000;
    for i in 0..=steps {
        let v1 = 0.95 + 0.1 * i as f64 / steps as f64;
        let (mut v2, mut t2) = (1.0, -0.1);
        let resid = |v2: f64, t2: f64| {
            let (_, s2) = pi_line_power(r, x, b, v1, 0.0, v2, t2);
            [s2.re + load_p, s2.im + load_q]
        };
        let mut ok = false;
        for _ in 0..50 {
            let f = resid(v2, t2);
            if f[0].abs().max(f[1].abs()) < 1e-13 {
                ok = true;
                break;
            }
            let h = 1e-7;
            let fv = resid(v2 + h, t2);
            let ft = resid(v2, t2 + h);
            let j = [[(fv[0] - f[0]) / h, (ft[0] - f[0]) / h], [(fv[1] - f[1]) / h, (ft[1] - f[1]) / h]];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            v2 -= (j[1][1] * f[0] - j[0][1] * f[1]) / det;
            t2 -= (j[0][0] * f[1] - j[1][0] * f[0]) / det;
        }
        if !ok || !(0.95..=1.05).contains(&v2) {
            continue;
        }
        let (s1, _) = pi_line_power(r, x, b, v1, 0.0, v2, t2);
        let (pg, qg) = (s1.re, s1.im);
        if !(0.0..=2.0).contains(&pg) || !(-1.0..=1.0).contains(&qg) {
            continue;
        }
        let cost = 100.0 * pg * pg + 2000.0 * pg;
        if best.as_ref().map_or(true, |b| cost < b.0) {
            best = Some((cost, [pg, qg, v1, v2, t2]));
        }
    }
    best.expect("feasible two-bus point").1
}
