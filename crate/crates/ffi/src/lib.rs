//! C ABI over `sshqb`.
//!
//! A battery is an opaque handle created with [`sshqb_battery_new`] and
//! released with [`sshqb_battery_free`]. Every fallible call returns an
//! [`SshqbStatus`]; on failure [`sshqb_last_error_message`] describes the
//! most recent error on the calling thread. Output pointers are written
//! only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sshqb::dynamics::ChargingSimulation;
use sshqb::observables::occupations;
use sshqb::{BondRule, CavityCutoff, ChargingOptions, Error, ExecutionMode, ModelParams};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SshqbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    NoPeakFound = 3,
    BufferTooSmall = 4,
    Numerical = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SshqbMode {
    Sector = 0,
    Full = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SshqbBondRule {
    Corrected = 0,
    AsPrinted = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SshqbCavityCutoff {
    Exact = 0,
    Fock = 1,
}

/// Model parameters. Enum-valued fields are plain integers holding the
/// values of `SshqbMode`, `SshqbBondRule` and `SshqbCavityCutoff`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SshqbParams {
    pub n: u32,
    pub omega_a: f64,
    pub omega_c: f64,
    pub g: f64,
    pub j: f64,
    pub delta: f64,
    pub n_c: u32,
    pub mode: u32,
    pub bond_rule: u32,
    pub cavity_cutoff: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SshqbSample {
    pub t: f64,
    pub e_b: f64,
    pub d_e: f64,
    pub ergotropy: f64,
    pub norm_error: f64,
    pub n_exc: f64,
    pub total_energy: f64,
}

/// Search settings for [`sshqb_battery_charge`]; `t_max <= 0` selects the
/// automatic window.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SshqbChargingOptions {
    pub dt: f64,
    pub safety: f64,
    pub t_max: f64,
    pub refine_tol: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SshqbChargingResult {
    pub tau_c: f64,
    pub d_e_max: f64,
    pub ergotropy: f64,
    /// Capacity from the charged energy.
    pub r_eb: f64,
    /// Capacity from the ergotropy.
    pub r_epb: f64,
    /// Largest conservation diagnostic observed.
    pub conservation_error: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SshqbGround {
    pub e_ground: f64,
    pub e_max: f64,
    pub k_g: u32,
    pub degenerate: bool,
}

/// Opaque simulation handle.
pub struct SshqbBattery {
    sim: ChargingSimulation,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> SshqbStatus {
    match err {
        Error::InvalidParameter { .. }
        | Error::InvalidGrid(_)
        | Error::Config(_)
        | Error::GeometryTooSmall { .. }
        | Error::SiteOutOfRange { .. } => SshqbStatus::InvalidParameter,
        Error::NoPeakFound { .. } => SshqbStatus::NoPeakFound,
        _ => SshqbStatus::Numerical,
    }
}

/// Runs `body`, converting errors and panics into status codes.
fn guard<F>(body: F) -> SshqbStatus
where
    F: FnOnce() -> Result<(), (SshqbStatus, String)>,
{
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => SshqbStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SshqbStatus::Panic
        }
    }
}

fn core_err(e: Error) -> (SshqbStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (SshqbStatus, String) {
    (SshqbStatus::NullPointer, format!("{what} is null"))
}

fn to_core(p: &SshqbParams) -> Result<(ModelParams, ExecutionMode), (SshqbStatus, String)> {
    let invalid = |what: &str, v: u32| (SshqbStatus::InvalidParameter, format!("unknown {what} value {v}"));
    let mode = match p.mode {
        0 => ExecutionMode::Sector,
        1 => ExecutionMode::Full,
        v => return Err(invalid("mode", v)),
    };
    let bond_rule = match p.bond_rule {
        0 => BondRule::Corrected,
        1 => BondRule::AsPrinted,
        v => return Err(invalid("bond rule", v)),
    };
    let cavity_cutoff = match p.cavity_cutoff {
        0 => CavityCutoff::Exact,
        1 => CavityCutoff::Fock,
        v => return Err(invalid("cavity cutoff", v)),
    };
    let params = ModelParams {
        n: p.n as usize,
        omega_a: p.omega_a,
        omega_c: p.omega_c,
        g: p.g,
        j: p.j,
        delta: p.delta,
        n_c: p.n_c as usize,
        bond_rule,
        cavity_cutoff,
    };
    params.validate().map_err(core_err)?;
    Ok((params, mode))
}

/// Fills `out` with the defaults for an `n`-site chain: unit frequencies,
/// coupling and hopping, no dimerization, `n_c = 2n + 1`, sector mode.
///
/// # Safety
/// `out` must be null or point to writable memory for one `SshqbParams`.
#[no_mangle]
pub unsafe extern "C" fn sshqb_params_default(n: u32, out: *mut SshqbParams) -> SshqbStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let d = ModelParams::new(n as usize);
        *out = SshqbParams {
            n,
            omega_a: d.omega_a,
            omega_c: d.omega_c,
            g: d.g,
            j: d.j,
            delta: d.delta,
            n_c: d.n_c as u32,
            mode: SshqbMode::Sector as u32,
            bond_rule: SshqbBondRule::Corrected as u32,
            cavity_cutoff: SshqbCavityCutoff::Exact as u32,
        };
        Ok(())
    })
}

/// Default charging-time search settings.
///
/// # Safety
/// `out` must be null or point to writable memory for one
/// `SshqbChargingOptions`.
#[no_mangle]
pub unsafe extern "C" fn sshqb_charging_options_default(out: *mut SshqbChargingOptions) -> SshqbStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let d = ChargingOptions::default();
        *out = SshqbChargingOptions {
            dt: d.dt,
            safety: d.safety,
            t_max: 0.0,
            refine_tol: d.refine_tol,
        };
        Ok(())
    })
}

/// Builds the battery spectrum, initial state and propagator.
///
/// # Safety
/// `params` must be null or valid for reads; `out` must be null or valid for
/// one pointer write. The handle written to `out` must be released with
/// [`sshqb_battery_free`].
#[no_mangle]
pub unsafe extern "C" fn sshqb_battery_new(params: *const SshqbParams, out: *mut *mut SshqbBattery) -> SshqbStatus {
    guard(|| {
        let params = params.as_ref().ok_or_else(|| null("params"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let (p, mode) = to_core(params)?;
        let sim = ChargingSimulation::new(&p, mode).map_err(core_err)?;
        *out = Box::into_raw(Box::new(SshqbBattery { sim }));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `battery` must be null or a handle from [`sshqb_battery_new`] not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn sshqb_battery_free(battery: *mut SshqbBattery) {
    if !battery.is_null() {
        drop(Box::from_raw(battery));
    }
}

/// Ground-state energy, largest battery level and ground sector.
///
/// # Safety
/// `battery` must be null or a live handle; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn sshqb_battery_ground(battery: *const SshqbBattery, out: *mut SshqbGround) -> SshqbStatus {
    guard(|| {
        let b = battery.as_ref().ok_or_else(|| null("battery"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let spectrum = b.sim.battery();
        *out = SshqbGround {
            e_ground: spectrum.e_ground(),
            e_max: spectrum.e_max(),
            k_g: spectrum.ground.k_g as u32,
            degenerate: spectrum.ground.is_degenerate(),
        };
        Ok(())
    })
}

/// Observables at time `t`.
///
/// # Safety
/// `battery` must be null or a live handle; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn sshqb_battery_sample(
    battery: *const SshqbBattery,
    t: f64,
    out: *mut SshqbSample,
) -> SshqbStatus {
    guard(|| {
        let b = battery.as_ref().ok_or_else(|| null("battery"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if !t.is_finite() {
            return Err((SshqbStatus::InvalidParameter, format!("time {t} is not finite")));
        }
        let s = b.sim.sample(t).map_err(core_err)?;
        *out = SshqbSample {
            t: s.t,
            e_b: s.e_b,
            d_e: s.d_e,
            ergotropy: s.ergotropy,
            norm_error: s.norm_error,
            n_exc: s.n_exc,
            total_energy: s.total_energy,
        };
        Ok(())
    })
}

/// Samples at `0, dt, 2dt, …, t_max`. The number of samples is always
/// written to `needed`; `buffer` is filled only when `capacity` suffices,
/// otherwise `SSHQB_STATUS_BUFFER_TOO_SMALL` is returned.
///
/// # Safety
/// `battery` must be null or a live handle; `needed` null or writable;
/// `buffer` must be valid for `capacity` writes when `capacity > 0`.
#[no_mangle]
pub unsafe extern "C" fn sshqb_battery_trajectory(
    battery: *const SshqbBattery,
    t_max: f64,
    dt: f64,
    buffer: *mut SshqbSample,
    capacity: usize,
    needed: *mut usize,
) -> SshqbStatus {
    guard(|| {
        let b = battery.as_ref().ok_or_else(|| null("battery"))?;
        let needed = needed.as_mut().ok_or_else(|| null("needed"))?;
        let traj = b.sim.trajectory(t_max, dt).map_err(core_err)?;
        *needed = traj.samples.len();
        if capacity < traj.samples.len() {
            return Err((
                SshqbStatus::BufferTooSmall,
                format!("trajectory has {} samples, buffer holds {capacity}", traj.samples.len()),
            ));
        }
        if buffer.is_null() {
            return Err(null("buffer"));
        }
        let slots = std::slice::from_raw_parts_mut(buffer, capacity);
        for (slot, s) in slots.iter_mut().zip(&traj.samples) {
            *slot = SshqbSample {
                t: s.t,
                e_b: s.e_b,
                d_e: s.d_e,
                ergotropy: s.ergotropy,
                norm_error: s.norm_error,
                n_exc: s.n_exc,
                total_energy: s.total_energy,
            };
        }
        Ok(())
    })
}

/// First-peak charging time with capacities.
///
/// # Safety
/// `battery` must be null or a live handle; `options` null (defaults) or
/// readable; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn sshqb_battery_charge(
    battery: *const SshqbBattery,
    options: *const SshqbChargingOptions,
    out: *mut SshqbChargingResult,
) -> SshqbStatus {
    guard(|| {
        let b = battery.as_ref().ok_or_else(|| null("battery"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let opts = match options.as_ref() {
            None => ChargingOptions::default(),
            Some(o) => ChargingOptions {
                dt: o.dt,
                safety: o.safety,
                t_max: (o.t_max > 0.0).then_some(o.t_max),
                refine_tol: o.refine_tol,
            },
        };
        let r = b.sim.find_charging_time(&opts).map_err(core_err)?;
        let spectrum = b.sim.battery();
        let caps = sshqb::observables::capacities(r.d_e_max, r.ergotropy_at_tau, spectrum.e_max(), spectrum.e_ground())
            .map_err(core_err)?;
        *out = SshqbChargingResult {
            tau_c: r.tau_c,
            d_e_max: r.d_e_max,
            ergotropy: r.ergotropy_at_tau,
            r_eb: caps.r_eb,
            r_epb: caps.r_epb,
            conservation_error: r.conservation.worst(),
        };
        Ok(())
    })
}

/// Site occupations `⟨σ+_i σ−_i⟩` at time `t`, sites in order. Writes
/// `N` values; `capacity` must be at least `N`.
///
/// # Safety
/// `battery` must be null or a live handle; `buffer` valid for `capacity`
/// writes.
#[no_mangle]
pub unsafe extern "C" fn sshqb_battery_occupations(
    battery: *const SshqbBattery,
    t: f64,
    buffer: *mut f64,
    capacity: usize,
) -> SshqbStatus {
    guard(|| {
        let b = battery.as_ref().ok_or_else(|| null("battery"))?;
        let n = b.sim.params().n;
        if capacity < n {
            return Err((SshqbStatus::BufferTooSmall, format!("need {n} slots, got {capacity}")));
        }
        if buffer.is_null() {
            return Err(null("buffer"));
        }
        let occ = occupations(&b.sim.reduced_state(t));
        std::slice::from_raw_parts_mut(buffer, n).copy_from_slice(&occ);
        Ok(())
    })
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sshqb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn sshqb_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version has no interior nul"),
    };
    VERSION.as_ptr()
}
