//! C interface to the ferrosim device model.
//!
//! Objects are opaque handles created by `fs_*_new` functions and released
//! with the matching `fs_*_free`. Every fallible call returns an `FsStatus`
//! code and, on failure, stores a message readable with `fs_last_error`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use ferrosim::circuits::{simulate_ring_oscillator, CircuitConfig};
use ferrosim::device::{drain_current, threshold_voltage, window_between, write_state, StoredState};
use ferrosim::electrostatics::solve_operating_point;
use ferrosim::polarization::{apply_waveform, init_ensemble, DomainEnsemble, DtPolicy, InitialState, WaveformBuilder};
use ferrosim::protocols::{fit_nls, retention_time_seeded};
use ferrosim::{build_device, default_fdsoi22, ConfigMap, DeviceParams, Error, PortId};

/// Call status. Values match the command-line exit codes where they overlap.
pub type FsStatus = i32;

pub const FS_OK: FsStatus = 0;
/// Null pointer or out-of-range enum argument.
pub const FS_ERR_ARGUMENT: FsStatus = 1;
/// Invalid configuration or parameter.
pub const FS_ERR_CONFIG: FsStatus = 2;
/// Solver, extraction, fit or transient failure.
pub const FS_ERR_NUMERICAL: FsStatus = 3;
pub const FS_ERR_IO: FsStatus = 4;
/// A Rust panic was caught at the boundary.
pub const FS_ERR_PANIC: FsStatus = 5;

pub const FS_PORT_WG: i32 = 0;
pub const FS_PORT_RG: i32 = 1;

pub const FS_STATE_LOW_VTH: i32 = 0;
pub const FS_STATE_HIGH_VTH: i32 = 1;

/// Device parameter set.
pub struct FsDevice {
    params: DeviceParams,
}

/// Domain ensemble bound to the device it was created from.
pub struct FsEnsemble {
    dev: DeviceParams,
    ens: DomainEnsemble,
}

/// Switching-time law fitted by `fs_fit_nls`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct FsNlsFit {
    pub tau0: f64,
    pub alpha: f64,
    pub v_offset: f64,
    pub rms_log_residual: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

enum Fail {
    Arg(String),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn guard<F>(f: F) -> FsStatus
where
    F: FnOnce() -> Result<(), Fail>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            FS_OK
        }
        Ok(Err(Fail::Arg(m))) => {
            set_last_error(&m);
            FS_ERR_ARGUMENT
        }
        Ok(Err(Fail::Core(e))) => {
            set_last_error(&e.to_string());
            match e.exit_code() {
                2 => FS_ERR_CONFIG,
                4 => FS_ERR_IO,
                _ => FS_ERR_NUMERICAL,
            }
        }
        Err(_) => {
            set_last_error("internal panic");
            FS_ERR_PANIC
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail::Arg(format!("`{name}` is null")))
}

unsafe fn deref_mut<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| Fail::Arg(format!("`{name}` is null")))
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Arg(format!("`{name}` is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Arg(format!("`{name}` is not UTF-8")))
}

fn port(v: i32) -> Result<PortId, Fail> {
    match v {
        FS_PORT_WG => Ok(PortId::WriteGate),
        FS_PORT_RG => Ok(PortId::ReadGate),
        _ => Err(Fail::Arg(format!("unknown port {v}"))),
    }
}

fn state(v: i32) -> Result<StoredState, Fail> {
    match v {
        FS_STATE_LOW_VTH => Ok(StoredState::LowVth),
        FS_STATE_HIGH_VTH => Ok(StoredState::HighVth),
        _ => Err(Fail::Arg(format!("unknown state {v}"))),
    }
}

fn write_out<T>(out: *mut T, v: T, name: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Arg(format!("`{name}` is null")));
    }
    unsafe { out.write(v) };
    Ok(())
}

/// Message of the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn fs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// New device with the calibrated default parameters.
#[no_mangle]
pub extern "C" fn fs_device_new_default() -> *mut FsDevice {
    Box::into_raw(Box::new(FsDevice {
        params: default_fdsoi22(),
    }))
}

/// Loads a TOML parameter file into a new device stored in `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fs_device_from_config(path: *const c_char, out: *mut *mut FsDevice) -> FsStatus {
    guard(|| {
        let path = text(path, "path")?;
        let map = ConfigMap::from_path(Path::new(path))?;
        let params = build_device(&map)?;
        write_out(out, Box::into_raw(Box::new(FsDevice { params })), "out")
    })
}

/// # Safety
/// `dev` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn fs_device_free(dev: *mut FsDevice) {
    if !dev.is_null() {
        drop(Box::from_raw(dev));
    }
}

/// Sets one named parameter (SI units) and revalidates the device. On
/// failure the device is left unchanged.
///
/// # Safety
/// `dev` must be a live handle and `key` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fs_device_set(dev: *mut FsDevice, key: *const c_char, value: f64) -> FsStatus {
    guard(|| {
        let dev = deref_mut(dev, "dev")?;
        let key = text(key, "key")?;
        let mut map = dev.params.to_config();
        if map.get(key).is_none() {
            return Err(Error::Config(format!("unknown parameter `{key}`")).into());
        }
        map.set(key, value);
        dev.params = build_device(&map)?;
        Ok(())
    })
}

/// Reads one named parameter (SI units).
///
/// # Safety
/// `dev` must be a live handle, `key` a NUL-terminated string, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn fs_device_get(dev: *const FsDevice, key: *const c_char, out: *mut f64) -> FsStatus {
    guard(|| {
        let dev = deref(dev, "dev")?;
        let key = text(key, "key")?;
        let v = dev
            .params
            .to_config()
            .num(key)?
            .ok_or_else(|| Error::Config(format!("unknown parameter `{key}`")))?;
        write_out(out, v, "out")
    })
}

/// Solves the stack at frozen polarization `p` (C/m^2) and gate biases (V).
/// Writes the ferroelectric field (V/m) and body potential (V); either
/// output may be null.
///
/// # Safety
/// `dev` must be a live handle; outputs must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn fs_solve(
    dev: *const FsDevice,
    p: f64,
    v_wg: f64,
    v_rg: f64,
    e_fe: *mut f64,
    psi_s: *mut f64,
) -> FsStatus {
    guard(|| {
        let dev = deref(dev, "dev")?;
        let sol = solve_operating_point(&dev.params, p, v_wg, v_rg)?;
        if !e_fe.is_null() {
            e_fe.write(sol.e_fe);
        }
        if !psi_s.is_null() {
            psi_s.write(sol.psi_s);
        }
        Ok(())
    })
}

/// Drain current (A) at frozen polarization and terminal biases (V).
///
/// # Safety
/// `dev` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn fs_drain_current(
    dev: *const FsDevice,
    p: f64,
    v_wg: f64,
    v_rg: f64,
    v_ds: f64,
    out: *mut f64,
) -> FsStatus {
    guard(|| {
        let dev = deref(dev, "dev")?;
        let sol = solve_operating_point(&dev.params, p, v_wg, v_rg)?;
        write_out(out, drain_current(&dev.params, &sol, v_ds)?, "out")
    })
}

/// Threshold voltage (V) read from `port` at frozen polarization `p`.
///
/// # Safety
/// `dev` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn fs_threshold_voltage(dev: *const FsDevice, p: f64, port_id: i32, out: *mut f64) -> FsStatus {
    guard(|| {
        let dev = deref(dev, "dev")?;
        write_out(out, threshold_voltage(&dev.params, p, port(port_id)?)?, "out")
    })
}

/// Programs both states with the standard write pulse and reads the
/// thresholds (V) from `port`.
///
/// # Safety
/// `dev` must be a live handle and both outputs valid.
#[no_mangle]
pub unsafe extern "C" fn fs_memory_window(
    dev: *const FsDevice,
    port_id: i32,
    seed: u64,
    vth_low: *mut f64,
    vth_high: *mut f64,
) -> FsStatus {
    guard(|| {
        let dev = deref(dev, "dev")?;
        let port = port(port_id)?;
        let p_lo = write_state(&dev.params, StoredState::LowVth, seed)?.polarization();
        let p_hi = write_state(&dev.params, StoredState::HighVth, seed)?.polarization();
        let mw = window_between(&dev.params, port, p_lo, p_hi)?;
        write_out(vth_low, mw.vth_low, "vth_low")?;
        write_out(vth_high, mw.vth_high, "vth_high")
    })
}

/// Stress time (s) on `port` until `fraction` of the window is lost, capped at `cap`.
///
/// # Safety
/// `dev` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn fs_retention_time(
    dev: *const FsDevice,
    port_id: i32,
    state_id: i32,
    stress_v: f64,
    fraction: f64,
    cap: f64,
    seed: u64,
    out: *mut f64,
) -> FsStatus {
    guard(|| {
        let dev = deref(dev, "dev")?;
        let t = retention_time_seeded(&dev.params, port(port_id)?, state(state_id)?, stress_v, fraction, cap, seed)?;
        write_out(out, t, "out")
    })
}

/// Oscillation frequency (Hz) of an `n_stages` ring whose FeFET stage was
/// erased and then programmed with `write_amp` (V).
///
/// # Safety
/// `dev` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn fs_ring_frequency(
    dev: *const FsDevice,
    n_stages: usize,
    write_amp: f64,
    seed: u64,
    out: *mut f64,
) -> FsStatus {
    guard(|| {
        let dev = deref(dev, "dev")?;
        let mut cfg = CircuitConfig::ring(dev.params, n_stages);
        cfg.seed = seed;
        let res = simulate_ring_oscillator(&cfg, write_amp)?;
        write_out(out, res.frequency, "out")
    })
}

/// Fits `pw = tau0 * exp((alpha / (v - v_offset))^2)` to `n` points.
///
/// # Safety
/// `v_app` and `pw` must point to `n` values each; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fs_fit_nls(v_app: *const f64, pw: *const f64, n: usize, out: *mut FsNlsFit) -> FsStatus {
    guard(|| {
        if v_app.is_null() || pw.is_null() {
            return Err(Fail::Arg("point arrays are null".into()));
        }
        let v = std::slice::from_raw_parts(v_app, n);
        let t = std::slice::from_raw_parts(pw, n);
        let pts: Vec<(f64, f64)> = v.iter().copied().zip(t.iter().copied()).collect();
        let f = fit_nls(&pts)?;
        write_out(
            out,
            FsNlsFit {
                tau0: f.tau0,
                alpha: f.alpha,
                v_offset: f.v_offset,
                rms_log_residual: f.rms_log_residual,
            },
            "out",
        )
    })
}

/// New ensemble with every domain up (`initial` = 1), down (-1) or a seeded
/// half/half mix (0).
///
/// # Safety
/// `dev` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn fs_ensemble_new(
    dev: *const FsDevice,
    initial: i32,
    seed: u64,
    out: *mut *mut FsEnsemble,
) -> FsStatus {
    guard(|| {
        let dev = deref(dev, "dev")?;
        let init = match initial {
            1 => InitialState::AllUp,
            -1 => InitialState::AllDown,
            0 => InitialState::Mixed(0.5),
            other => return Err(Fail::Arg(format!("unknown initial state {other}"))),
        };
        let ens = init_ensemble(&dev.params, init, seed)?;
        write_out(
            out,
            Box::into_raw(Box::new(FsEnsemble { dev: dev.params, ens })),
            "out",
        )
    })
}

/// # Safety
/// `ens` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn fs_ensemble_free(ens: *mut FsEnsemble) {
    if !ens.is_null() {
        drop(Box::from_raw(ens));
    }
}

/// Applies a trapezoidal pulse of `amp` (V) and flat-top `width` (s) on
/// `port` with the other gate grounded.
///
/// # Safety
/// `ens` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fs_ensemble_apply_pulse(ens: *mut FsEnsemble, port_id: i32, amp: f64, width: f64) -> FsStatus {
    guard(|| {
        let h = deref_mut(ens, "ens")?;
        if !(width >= 0.0) {
            return Err(Error::Domain(format!("pulse width must be non-negative, got {width}")).into());
        }
        let wf = WaveformBuilder::new().pulse(port(port_id)?, amp, width).build();
        let (next, _) = apply_waveform(&h.dev, h.ens.clone(), &wf, DtPolicy::default())?;
        h.ens = next;
        Ok(())
    })
}

/// Net polarization (C/m^2).
///
/// # Safety
/// `ens` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn fs_ensemble_polarization(ens: *const FsEnsemble, out: *mut f64) -> FsStatus {
    guard(|| {
        let h = deref(ens, "ens")?;
        write_out(out, h.ens.polarization(), "out")
    })
}
