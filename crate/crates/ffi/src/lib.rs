//! C ABI for the `gridadmm` solver.
//!
//! Networks and solve results are opaque heap handles released with their
//! `*_free` function. Every fallible call returns a `GaStatus`; on failure a
//! message is kept per thread and can be copied out with
//! [`ga_last_error_message`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gridadmm::driver::{SolveReport, SolveStatus, SolverConfig};
use gridadmm::netdata::{parse_matpower, parse_matpower_file, PowerNetwork};
use gridadmm::report::report_gap;
use gridadmm::Error;

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    InvalidNetwork = 5,
    InvalidConfig = 6,
    Numerical = 7,
    BufferSize = 8,
    Panic = 9,
}

/// Opaque parsed network.
pub struct GaNetwork {
    net: PowerNetwork,
}

/// Opaque solve result, also usable as a warm start.
pub struct GaSolution {
    report: SolveReport,
}

/// Solver settings exposed over the C ABI. Fields not listed keep their defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaConfig {
    pub rho_pq: f64,
    pub rho_va: f64,
    pub beta0: f64,
    pub eps: f64,
    pub inner_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub workers: usize,
}

impl From<&SolverConfig> for GaConfig {
    fn from(c: &SolverConfig) -> Self {
        Self {
            rho_pq: c.rho_pq,
            rho_va: c.rho_va,
            beta0: c.beta0,
            eps: c.eps,
            inner_tol: c.inner_tol,
            max_outer: c.max_outer,
            max_inner: c.max_inner,
            workers: c.workers,
        }
    }
}

impl GaConfig {
    fn to_solver(self) -> SolverConfig {
        SolverConfig {
            rho_pq: self.rho_pq,
            rho_va: self.rho_va,
            beta0: self.beta0,
            eps: self.eps,
            inner_tol: self.inner_tol,
            max_outer: self.max_outer,
            max_inner: self.max_inner,
            workers: self.workers,
            ..SolverConfig::default()
        }
    }
}

/// Scalar summary of a solve.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GaSummary {
    /// 1 when `‖z‖` met the tolerance, 0 when the outer limit was hit.
    pub converged: i32,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub objective: f64,
    pub max_violation: f64,
    pub elapsed_s: f64,
}

/// Per-element result arrays.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaField {
    /// Real generation, one per generator (p.u.).
    Pg = 0,
    /// Reactive generation, one per generator (p.u.).
    Qg = 1,
    /// Voltage magnitude, one per bus (p.u.).
    Vm = 2,
    /// Voltage angle, one per bus (rad).
    Va = 3,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> GaStatus {
    match err {
        Error::Io(_) => GaStatus::Io,
        Error::Parse { .. }
        | Error::MissingMatrix(_)
        | Error::UnsupportedCost { .. }
        | Error::UnsupportedCostDegree { .. }
        | Error::UnknownBus { .. }
        | Error::Csv(_)
        | Error::Json(_) => GaStatus::Parse,
        Error::MissingReferenceBus | Error::InvalidNetwork(_) | Error::ZeroImpedance { .. } => {
            GaStatus::InvalidNetwork
        }
        Error::InvalidConfig(_) | Error::InvalidProfile(_) => GaStatus::InvalidConfig,
        Error::SingularBus { .. } | Error::NonFinite { .. } | Error::Diverged { .. } | Error::InfeasibleRamp { .. } => {
            GaStatus::Numerical
        }
    }
}

fn guard(f: impl FnOnce() -> Result<(), (GaStatus, String)>) -> GaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GaStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GaStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (GaStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (GaStatus, String) {
    (GaStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (GaStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (GaStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length excluding the NUL,
/// or 0 when there is no message.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ga_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ga_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a MATPOWER case file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ga_network_from_file(path: *const c_char, out: *mut *mut GaNetwork) -> GaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = read_str(path, "path")?;
        let net = parse_matpower_file(path).map_err(|e| {
            let (s, m) = lib_err(e);
            (s, format!("{path}: {m}"))
        })?;
        *out = Box::into_raw(Box::new(GaNetwork { net }));
        Ok(())
    })
}

/// Parses MATPOWER case text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ga_network_from_string(text: *const c_char, out: *mut *mut GaNetwork) -> GaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let net = parse_matpower(read_str(text, "text")?).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(GaNetwork { net }));
        Ok(())
    })
}

/// Element counts of a network.
///
/// # Safety
/// `net` must come from `ga_network_from_*`; output pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn ga_network_counts(
    net: *const GaNetwork,
    buses: *mut usize,
    generators: *mut usize,
    branches: *mut usize,
) -> GaStatus {
    guard(|| {
        let net = &net.as_ref().ok_or_else(|| null("net"))?.net;
        for (p, v) in [(buses, net.buses.len()), (generators, net.generators.len()), (branches, net.branches.len())] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Releases a network; null is ignored.
///
/// # Safety
/// `net` must be null or come from `ga_network_from_*`, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ga_network_free(net: *mut GaNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Fills `out` with the default settings.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ga_config_default(out: *mut GaConfig) -> GaStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = GaConfig::from(&SolverConfig::default());
        Ok(())
    })
}

/// Fills `out` with the defaults plus the named case's penalty preset.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ga_config_preset(name: *const c_char, out: *mut GaConfig) -> GaStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let name = read_str(name, "name")?;
        let cfg = SolverConfig::with_preset(name)
            .ok_or_else(|| (GaStatus::InvalidConfig, format!("unknown preset `{name}`")))?;
        *out = GaConfig::from(&cfg);
        Ok(())
    })
}

/// Solves from a cold start, or from `warm` when it is not null.
///
/// # Safety
/// `net` and `config` must be valid; `warm` null or a solution of the same
/// network layout; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ga_solve(
    net: *const GaNetwork,
    config: *const GaConfig,
    warm: *const GaSolution,
    out: *mut *mut GaSolution,
) -> GaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let net = &net.as_ref().ok_or_else(|| null("net"))?.net;
        let cfg = config.as_ref().ok_or_else(|| null("config"))?.to_solver();
        let warm = warm.as_ref().map(|w| &w.report.state);
        let report = gridadmm::solve(net, &cfg, warm).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(GaSolution { report }));
        Ok(())
    })
}

/// Scalar summary of a solution.
///
/// # Safety
/// `sol` must come from `ga_solve`; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ga_solution_summary(sol: *const GaSolution, out: *mut GaSummary) -> GaStatus {
    guard(|| {
        let r = &sol.as_ref().ok_or_else(|| null("sol"))?.report;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = GaSummary {
            converged: i32::from(r.status == SolveStatus::Converged),
            outer_iterations: r.outer_iterations,
            inner_iterations: r.inner_iterations,
            objective: r.metrics.objective,
            max_violation: r.metrics.max_violation,
            elapsed_s: r.elapsed_s,
        };
        Ok(())
    })
}

/// Copies one result array into `buf`, which must hold exactly the element
/// count (generators for `Pg`/`Qg`, buses for `Vm`/`Va`).
///
/// # Safety
/// `sol` must come from `ga_solve`; `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ga_solution_values(
    sol: *const GaSolution,
    field: GaField,
    buf: *mut f64,
    len: usize,
) -> GaStatus {
    guard(|| {
        let s = &sol.as_ref().ok_or_else(|| null("sol"))?.report.solution;
        let src = match field {
            GaField::Pg => &s.pg,
            GaField::Qg => &s.qg,
            GaField::Vm => &s.vm,
            GaField::Va => &s.va,
        };
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len != src.len() {
            return Err((GaStatus::BufferSize, format!("buffer holds {len} values, need {}", src.len())));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, len);
        Ok(())
    })
}

/// Releases a solution; null is ignored.
///
/// # Safety
/// `sol` must be null or come from `ga_solve`, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ga_solution_free(sol: *mut GaSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Relative objective gap `|f - f*| / f*`; `reference` must be positive.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ga_report_gap(objective: f64, reference: f64, out: *mut f64) -> GaStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = report_gap(objective, reference).map_err(lib_err)?;
        Ok(())
    })
}
