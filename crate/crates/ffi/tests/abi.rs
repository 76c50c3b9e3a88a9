use std::f64::consts::PI;
use std::ffi::CStr;
use std::ptr;

use approx::assert_abs_diff_eq;
use sshqb_ffi::*;

fn params(n: u32) -> SshqbParams {
    let mut p = std::mem::MaybeUninit::uninit();
    assert_eq!(unsafe { sshqb_params_default(n, p.as_mut_ptr()) }, SshqbStatus::Ok);
    unsafe { p.assume_init() }
}

fn battery(p: &SshqbParams) -> *mut SshqbBattery {
    let mut handle = ptr::null_mut();
    let status = unsafe { sshqb_battery_new(p, &mut handle) };
    assert_eq!(status, SshqbStatus::Ok, "{:?}", last_error());
    assert!(!handle.is_null());
    handle
}

fn last_error() -> Option<String> {
    let msg = sshqb_last_error_message();
    (!msg.is_null()).then(|| unsafe { CStr::from_ptr(msg) }.to_string_lossy().into_owned())
}

#[test]
fn defaults_match_core() {
    let p = params(5);
    assert_eq!(p.n_c, 11);
    assert_eq!((p.omega_a, p.omega_c, p.g, p.j, p.delta), (1.0, 1.0, 1.0, 1.0, 0.0));
    assert_eq!(p.mode, SshqbMode::Sector as u32);
}

#[test]
fn single_spin_charging_time() {
    let mut p = params(1);
    p.n_c = 3;
    let b = battery(&p);
    let mut r = SshqbChargingResult::default();
    assert_eq!(unsafe { sshqb_battery_charge(b, ptr::null(), &mut r) }, SshqbStatus::Ok);
    assert_abs_diff_eq!(r.tau_c, PI / (2.0 * 3f64.sqrt()), epsilon = 1e-9);
    assert_abs_diff_eq!(r.d_e_max, 1.0, epsilon = 1e-10);
    assert_abs_diff_eq!(r.r_eb, 1.0, epsilon = 1e-10);
    assert!(r.conservation_error < 1e-10);
    unsafe { sshqb_battery_free(b) };
}

#[test]
fn matches_core_library() {
    let mut p = params(4);
    p.j = 1.7;
    p.delta = -0.3;
    let b = battery(&p);
    let core = sshqb::dynamics::find_charging_time(
        &sshqb::ModelParams::new(4).with_hopping(1.7).with_delta(-0.3),
        sshqb::ExecutionMode::Sector,
        &sshqb::ChargingOptions::default(),
    )
    .unwrap();
    let mut r = SshqbChargingResult::default();
    assert_eq!(unsafe { sshqb_battery_charge(b, ptr::null(), &mut r) }, SshqbStatus::Ok);
    assert_eq!(r.tau_c, core.tau_c);
    assert_eq!(r.d_e_max, core.d_e_max);
    assert_eq!(r.ergotropy, core.ergotropy_at_tau);

    let mut ground = SshqbGround::default();
    assert_eq!(unsafe { sshqb_battery_ground(b, &mut ground) }, SshqbStatus::Ok);
    assert!(ground.e_max > ground.e_ground);

    let mut occ = [0.0; 4];
    assert_eq!(
        unsafe { sshqb_battery_occupations(b, r.tau_c, occ.as_mut_ptr(), 4) },
        SshqbStatus::Ok
    );
    let mut s = SshqbSample::default();
    assert_eq!(unsafe { sshqb_battery_sample(b, r.tau_c, &mut s) }, SshqbStatus::Ok);
    assert_abs_diff_eq!(s.d_e, r.d_e_max, epsilon = 1e-12);
    assert!(occ.iter().all(|&x| (0.0..=1.0 + 1e-12).contains(&x)));
    unsafe { sshqb_battery_free(b) };
}

#[test]
fn trajectory_buffer_protocol() {
    let b = battery(&params(2));
    let mut needed = 0usize;
    let status = unsafe { sshqb_battery_trajectory(b, 1.0, 0.1, ptr::null_mut(), 0, &mut needed) };
    assert_eq!(status, SshqbStatus::BufferTooSmall);
    assert_eq!(needed, 11);
    let mut buf = vec![SshqbSample::default(); needed];
    let status = unsafe { sshqb_battery_trajectory(b, 1.0, 0.1, buf.as_mut_ptr(), buf.len(), &mut needed) };
    assert_eq!(status, SshqbStatus::Ok);
    assert_eq!(buf[0].t, 0.0);
    assert_abs_diff_eq!(buf[10].t, 1.0, epsilon = 1e-12);
    assert!(buf.iter().all(|s| s.norm_error < 1e-12));
    unsafe { sshqb_battery_free(b) };
}

#[test]
fn errors_are_reported() {
    let mut p = params(3);
    p.delta = 1.5;
    let mut handle = ptr::null_mut();
    assert_eq!(
        unsafe { sshqb_battery_new(&p, &mut handle) },
        SshqbStatus::InvalidParameter
    );
    assert!(handle.is_null());
    assert!(last_error().unwrap().contains("delta"));

    assert_eq!(
        unsafe { sshqb_battery_new(ptr::null(), &mut handle) },
        SshqbStatus::NullPointer
    );
    assert_eq!(
        unsafe { sshqb_battery_charge(ptr::null(), ptr::null(), ptr::null_mut()) },
        SshqbStatus::NullPointer
    );

    let mut p = params(2);
    p.g = 0.0;
    let b = battery(&p);
    let mut r = SshqbChargingResult::default();
    assert_eq!(
        unsafe { sshqb_battery_charge(b, ptr::null(), &mut r) },
        SshqbStatus::NoPeakFound
    );
    let mut occ = [0.0; 1];
    assert_eq!(
        unsafe { sshqb_battery_occupations(b, 0.0, occ.as_mut_ptr(), 1) },
        SshqbStatus::BufferTooSmall
    );
    unsafe { sshqb_battery_free(b) };
    unsafe { sshqb_battery_free(ptr::null_mut()) };
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(sshqb_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
