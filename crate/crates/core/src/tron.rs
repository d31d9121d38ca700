//! Trust-region Newton method for small dense bound-constrained problems.
//!
//! Each iteration follows the projected-Newton scheme of TRON:
//!
//! 1. a generalized Cauchy step along the projected steepest-descent path,
//!    found by extrapolation/interpolation on the step length with
//!    sufficient decrease of the quadratic model;
//! 2. refinement on the subspace of free variables with a preconditioned
//!    Steihaug conjugate-gradient solve that stops on the trust-region
//!    boundary or on a direction of nonpositive curvature, followed by a
//!    projected backtracking search along the resulting direction;
//! 3. the usual acceptance test on actual vs. predicted reduction.
//!
//! Problems are at most [`MAX_DIM`] variables, so everything lives in fixed
//! stack arrays and Hessians are dense.

use rayon::prelude::*;
use rayon::ThreadPool;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 16;

type Vector = [f64; MAX_DIM];
type Matrix = [f64; MAX_DIM * MAX_DIM];

const MU0: f64 = 0.01;
const INTERP: f64 = 0.1;
const EXTRAP: f64 = 10.0;
const ETA0: f64 = 1e-4;
const ETA1: f64 = 0.25;
const ETA2: f64 = 0.75;
const SHRINK: f64 = 0.25;
const GROW: f64 = 2.0;

/// A bound-constrained smooth problem `min f(x) s.t. l ≤ x ≤ u`.
pub trait BoxNlp {
    fn dim(&self) -> usize;
    fn lower(&self) -> &[f64];
    fn upper(&self) -> &[f64];
    fn objective(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], g: &mut [f64]);
    /// Writes the dense symmetric Hessian, row-major, into `h[..n*n]`.
    fn hessian(&self, x: &[f64], h: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TronSettings {
    /// Stop when the projected gradient's ∞-norm is at most this.
    pub gtol: f64,
    pub max_iter: usize,
    /// Relative residual reduction that ends a CG solve.
    pub cg_tol: f64,
    /// CG iteration cap per subspace solve; 0 means the subspace dimension.
    pub max_cg: usize,
    /// Lower bound on the initial trust radius `‖g(x0)‖`.
    pub min_initial_radius: f64,
}

impl Default for TronSettings {
    fn default() -> Self {
        Self { gtol: 1e-6, max_iter: 200, cg_tol: 0.1, max_cg: 0, min_initial_radius: 1e-3 }
    }
}

impl TronSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.gtol > 0.0 && self.cg_tol > 0.0 && self.min_initial_radius > 0.0) {
            return Err(Error::InvalidConfig("TRON tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("TRON max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TronStatus {
    Converged,
    IterationLimit,
    /// The trust radius collapsed before the gradient test was met.
    Stalled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TronReport {
    pub status: TronStatus,
    pub iterations: usize,
    pub objective: f64,
    pub projected_gradient: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TronSolution {
    pub x: Vec<f64>,
    pub report: TronReport,
}

/// Solves one problem from `x0` (clipped into the box first).
pub fn solve_one<P: BoxNlp + ?Sized>(
    problem: &P,
    x0: &[f64],
    settings: &TronSettings,
) -> Result<TronSolution> {
    let mut x = x0.to_vec();
    let report = solve_in_place(problem, &mut x, settings)?;
    Ok(TronSolution { x, report })
}

/// Solves independent problems on a pool of `workers` threads.
///
/// Result `k` is bit-identical to `solve_one(&problems[k], &starts[k], ..)`.
pub fn solve_batch<P: BoxNlp + Sync>(
    problems: &[P],
    starts: &[Vec<f64>],
    settings: &TronSettings,
    workers: usize,
) -> Result<Vec<Result<TronSolution>>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
    Ok(solve_batch_in(&pool, problems, starts, settings))
}

pub fn solve_batch_in<P: BoxNlp + Sync>(
    pool: &ThreadPool,
    problems: &[P],
    starts: &[Vec<f64>],
    settings: &TronSettings,
) -> Vec<Result<TronSolution>> {
    assert_eq!(problems.len(), starts.len(), "one start per problem");
    pool.install(|| {
        problems
            .par_iter()
            .zip(starts.par_iter())
            .map(|(p, x0)| solve_one(p, x0, settings))
            .collect()
    })
}

/// Projected-gradient ∞-norm at `x`.
pub fn projected_gradient_norm(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    let mut norm: f64 = 0.0;
    for i in 0..x.len() {
        let gi = if x[i] <= lower[i] {
            g[i].min(0.0)
        } else if x[i] >= upper[i] {
            g[i].max(0.0)
        } else {
            g[i]
        };
        norm = norm.max(gi.abs());
    }
    norm
}

/// Runs TRON, overwriting `x` with the final iterate.
pub fn solve_in_place<P: BoxNlp + ?Sized>(
    problem: &P,
    x: &mut [f64],
    settings: &TronSettings,
) -> Result<TronReport> {
    let n = problem.dim();
    assert!(n <= MAX_DIM, "problem dimension {n} exceeds {MAX_DIM}");
    assert_eq!(x.len(), n);
    let (lo, hi) = (problem.lower(), problem.upper());
    for i in 0..n {
        x[i] = x[i].clamp(lo[i], hi[i]);
        if !x[i].is_finite() {
            return Err(Error::NonFinite { what: "start point" });
        }
    }

    let mut f = problem.objective(x);
    if !f.is_finite() {
        return Err(Error::NonFinite { what: "objective" });
    }
    let mut g: Vector = [0.0; MAX_DIM];
    problem.gradient(x, &mut g[..n]);
    if g[..n].iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "gradient" });
    }
    let mut h: Matrix = [0.0; MAX_DIM * MAX_DIM];
    let mut need_hessian = true;

    let mut delta = norm(&g[..n]).max(settings.min_initial_radius);
    let mut alpha_c = 1.0;
    let mut iterations = 0;
    let mut x_trial: Vector = [0.0; MAX_DIM];

    loop {
        let pg = projected_gradient_norm(x, &g[..n], lo, hi);
        if pg <= settings.gtol {
            return Ok(TronReport {
                status: TronStatus::Converged,
                iterations,
                objective: f,
                projected_gradient: pg,
            });
        }
        if iterations >= settings.max_iter {
            return Ok(TronReport {
                status: TronStatus::IterationLimit,
                iterations,
                objective: f,
                projected_gradient: pg,
            });
        }
        if delta <= 1e-15 * (1.0 + norm(x)) {
            return Ok(TronReport {
                status: TronStatus::Stalled,
                iterations,
                objective: f,
                projected_gradient: pg,
            });
        }
        iterations += 1;

        if need_hessian {
            problem.hessian(x, &mut h[..n * n]);
            need_hessian = false;
        }
        let ctx = Model { n, x, g: &g, h: &h, lo, hi };

        let mut step = ctx.cauchy_step(delta, &mut alpha_c);
        ctx.refine(&mut step, delta, settings);

        let pred = -ctx.value(&step);
        let snorm = norm(&step[..n]);
        for i in 0..n {
            x_trial[i] = (x[i] + step[i]).clamp(lo[i], hi[i]);
        }
        let f_trial = problem.objective(&x_trial[..n]);
        if !f_trial.is_finite() {
            return Err(Error::NonFinite { what: "objective" });
        }
        let actred = f - f_trial;

        // Reductions at the level of rounding noise carry no information.
        let noise = 1e2 * f64::EPSILON * f.abs().max(1.0);
        let ratio = if pred <= noise && actred.abs() <= noise { 1.0 } else { actred / pred };

        if ratio < ETA1 {
            delta = SHRINK * delta.min(snorm);
        } else if ratio > ETA2 {
            delta = delta.max(GROW * snorm);
        }

        if ratio > ETA0 && f_trial <= f && snorm > 0.0 {
            x.copy_from_slice(&x_trial[..n]);
            f = f_trial;
            problem.gradient(x, &mut g[..n]);
            if g[..n].iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { what: "gradient" });
            }
            need_hessian = true;
        }
    }
}

/// Quadratic model `q(s) = gᵀs + ½ sᵀHs` around `x` on the box.
struct Model<'a> {
    n: usize,
    x: &'a [f64],
    g: &'a Vector,
    h: &'a Matrix,
    lo: &'a [f64],
    hi: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CgExit {
    Converged,
    Boundary,
    NegativeCurvature,
    IterationLimit,
}

impl Model<'_> {
    fn hv(&self, v: &Vector) -> Vector {
        let n = self.n;
        let mut out = [0.0; MAX_DIM];
        for i in 0..n {
            let row = &self.h[i * n..i * n + n];
            out[i] = row.iter().zip(&v[..n]).map(|(a, b)| a * b).sum();
        }
        out
    }

    fn value(&self, s: &Vector) -> f64 {
        let hs = self.hv(s);
        (0..self.n).map(|i| s[i] * (self.g[i] + 0.5 * hs[i])).sum()
    }

    /// `P(x + d) - x`.
    fn project_step(&self, d: &Vector) -> Vector {
        let mut s = [0.0; MAX_DIM];
        for i in 0..self.n {
            s[i] = (self.x[i] + d[i]).clamp(self.lo[i], self.hi[i]) - self.x[i];
        }
        s
    }

    fn gradient_path(&self, alpha: f64) -> Vector {
        let mut d = [0.0; MAX_DIM];
        for i in 0..self.n {
            d[i] = -alpha * self.g[i];
        }
        self.project_step(&d)
    }

    fn cauchy_ok(&self, s: &Vector, delta: f64) -> bool {
        let gts: f64 = (0..self.n).map(|i| self.g[i] * s[i]).sum();
        norm(&s[..self.n]) <= delta && self.value(s) <= MU0 * gts
    }

    /// Largest step length at which the projected gradient path still bends.
    fn max_breakpoint(&self) -> f64 {
        let mut brpt: f64 = 0.0;
        for i in 0..self.n {
            let gi = self.g[i];
            let t = if gi > 0.0 {
                (self.x[i] - self.lo[i]) / gi
            } else if gi < 0.0 {
                (self.x[i] - self.hi[i]) / gi
            } else {
                0.0
            };
            brpt = brpt.max(t);
        }
        brpt
    }

    fn cauchy_step(&self, delta: f64, alpha: &mut f64) -> Vector {
        let mut s = self.gradient_path(*alpha);
        if self.cauchy_ok(&s, delta) {
            let brpt = self.max_breakpoint();
            for _ in 0..60 {
                if *alpha >= brpt {
                    break;
                }
                let trial_alpha = *alpha * EXTRAP;
                let trial = self.gradient_path(trial_alpha);
                if !self.cauchy_ok(&trial, delta) {
                    break;
                }
                *alpha = trial_alpha;
                s = trial;
            }
        } else {
            for _ in 0..200 {
                *alpha *= INTERP;
                s = self.gradient_path(*alpha);
                if self.cauchy_ok(&s, delta) {
                    break;
                }
            }
        }
        s
    }

    /// Improves `w` on the free subspace with CG plus projected search.
    fn refine(&self, w: &mut Vector, delta: f64, settings: &TronSettings) {
        let n = self.n;
        let g_free_norm0 = {
            let mut acc = 0.0;
            for i in 0..n {
                let xi = self.x[i] + w[i];
                if xi > self.lo[i] && xi < self.hi[i] {
                    acc += self.g[i] * self.g[i];
                }
            }
            acc.sqrt()
        };

        for _ in 0..n {
            let mut free = [0usize; MAX_DIM];
            let mut nfree = 0;
            for i in 0..n {
                let xi = self.x[i] + w[i];
                if xi > self.lo[i] && xi < self.hi[i] {
                    free[nfree] = i;
                    nfree += 1;
                }
            }
            if nfree == 0 {
                return;
            }

            // Model gradient at w, restricted to the free set.
            let hw = self.hv(w);
            let mut r = [0.0; MAX_DIM];
            for (a, &i) in free[..nfree].iter().enumerate() {
                r[a] = -(self.g[i] + hw[i]);
            }
            if norm(&r[..nfree]) <= settings.cg_tol * g_free_norm0 {
                return;
            }

            let mut reduced = [0.0; MAX_DIM * MAX_DIM];
            for (a, &i) in free[..nfree].iter().enumerate() {
                for (b, &j) in free[..nfree].iter().enumerate() {
                    reduced[a * nfree + b] = self.h[i * n + j];
                }
            }
            let mut w_free = [0.0; MAX_DIM];
            let mut fixed_sq = 0.0;
            let mut is_free = [false; MAX_DIM];
            for (a, &i) in free[..nfree].iter().enumerate() {
                w_free[a] = w[i];
                is_free[i] = true;
            }
            for i in 0..n {
                if !is_free[i] {
                    fixed_sq += w[i] * w[i];
                }
            }

            let max_cg = if settings.max_cg == 0 { nfree } else { settings.max_cg };
            let (d_free, exit) = steihaug(
                &reduced,
                nfree,
                &r,
                &w_free,
                fixed_sq,
                delta,
                settings.cg_tol * norm(&r[..nfree]),
                max_cg,
            );

            let mut d = [0.0; MAX_DIM];
            for (a, &i) in free[..nfree].iter().enumerate() {
                d[i] = d_free[a];
            }

            // Projected backtracking along d from x + w.
            let q_w = self.value(w);
            let mut beta = 1.0;
            let mut w_new = *w;
            for _ in 0..30 {
                let mut trial = [0.0; MAX_DIM];
                for i in 0..n {
                    trial[i] = w[i] + beta * d[i];
                }
                w_new = self.project_step(&trial);
                let mut slope = 0.0;
                for (a, &i) in free[..nfree].iter().enumerate() {
                    slope -= r[a] * (w_new[i] - w[i]);
                }
                if self.value(&w_new) <= q_w + MU0 * slope {
                    break;
                }
                beta *= 0.5;
            }
            let mut new_active = false;
            for &i in &free[..nfree] {
                let xi = self.x[i] + w_new[i];
                if xi <= self.lo[i] || xi >= self.hi[i] {
                    new_active = true;
                }
            }
            if self.value(&w_new) <= q_w {
                *w = w_new;
            } else {
                return;
            }
            if exit != CgExit::Converged && exit != CgExit::IterationLimit {
                return;
            }
            if !new_active {
                return;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Dense Cholesky `A = L Lᵀ` in place (lower triangle). `false` if not PD.
fn cholesky(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    true
}

fn cholesky_solve(l: &[f64], n: usize, b: &Vector) -> Vector {
    let mut y = [0.0; MAX_DIM];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    y
}

/// Step length `τ ≥ 0` with `‖base + τp‖² + fixed_sq = Δ²`.
fn to_boundary(base: &[f64], p: &[f64], fixed_sq: f64, delta: f64) -> f64 {
    let pp = dot(p, p);
    if pp == 0.0 {
        return 0.0;
    }
    let bp = dot(base, p);
    let rad = delta * delta - fixed_sq - dot(base, base);
    let disc = bp * bp + pp * rad.max(0.0);
    let root = disc.sqrt();
    // Numerically stable positive root of pp τ² + 2 bp τ - rad = 0.
    let tau = if bp >= 0.0 { rad.max(0.0) / (bp + root) } else { (root - bp) / pp };
    if tau.is_finite() {
        tau.max(0.0)
    } else {
        0.0
    }
}

/// Preconditioned Steihaug CG on `min -rᵀd + ½ dᵀAd` with `‖w + d‖ ≤ Δ`.
#[allow(clippy::too_many_arguments)]
fn steihaug(
    a: &Matrix,
    n: usize,
    r0: &Vector,
    w: &Vector,
    fixed_sq: f64,
    delta: f64,
    tol: f64,
    max_iter: usize,
) -> (Vector, CgExit) {
    let mut factor = [0.0; MAX_DIM * MAX_DIM];
    factor[..n * n].copy_from_slice(&a[..n * n]);
    let preconditioned = cholesky(&mut factor[..n * n], n);
    let precondition = |v: &Vector| -> Vector {
        if preconditioned {
            cholesky_solve(&factor[..n * n], n, v)
        } else {
            *v
        }
    };
    let matvec = |v: &Vector| -> Vector {
        let mut out = [0.0; MAX_DIM];
        for i in 0..n {
            out[i] = dot(&a[i * n..i * n + n], &v[..n]);
        }
        out
    };

    let mut d = [0.0; MAX_DIM];
    let mut r = *r0;
    let mut zv = precondition(&r);
    let mut p = zv;
    let mut rz = dot(&r[..n], &zv[..n]);
    let mut pos = *w;

    for _ in 0..max_iter.max(1) {
        let ap = matvec(&p);
        let curv = dot(&p[..n], &ap[..n]);
        if curv <= 0.0 {
            let tau = to_boundary(&pos[..n], &p[..n], fixed_sq, delta);
            for i in 0..n {
                d[i] += tau * p[i];
            }
            return (d, CgExit::NegativeCurvature);
        }
        let alpha = rz / curv;
        let mut next = [0.0; MAX_DIM];
        for i in 0..n {
            next[i] = pos[i] + alpha * p[i];
        }
        if dot(&next[..n], &next[..n]) + fixed_sq >= delta * delta {
            let tau = to_boundary(&pos[..n], &p[..n], fixed_sq, delta);
            for i in 0..n {
                d[i] += tau * p[i];
            }
            return (d, CgExit::Boundary);
        }
        for i in 0..n {
            d[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        pos = next;
        if norm(&r[..n]) <= tol {
            return (d, CgExit::Converged);
        }
        zv = precondition(&r);
        let rz_next = dot(&r[..n], &zv[..n]);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = zv[i] + beta * p[i];
        }
    }
    (d, CgExit::IterationLimit)
}

/// Convex or nonconvex quadratic `½xᵀQx - cᵀx` on a box; handy for tests
/// and benchmarks.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxQuadratic {
    pub q: Vec<f64>,
    pub c: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxNlp for BoxQuadratic {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn lower(&self) -> &[f64] {
        &self.lower
    }

    fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let mut f = 0.0;
        for i in 0..n {
            f += x[i] * (0.5 * dot(&self.q[i * n..i * n + n], x) - self.c[i]);
        }
        f
    }

    fn gradient(&self, x: &[f64], g: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            g[i] = dot(&self.q[i * n..i * n + n], x) - self.c[i];
        }
    }

    fn hessian(&self, _x: &[f64], h: &mut [f64]) {
        h.copy_from_slice(&self.q);
    }
}
