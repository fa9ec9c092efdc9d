use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use ferrosim::device::{threshold_voltage, write_state, StoredState, DEFAULT_SEED};
use ferrosim::{default_fdsoi22, PortId};
use ferrosim_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(fs_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn device_lifecycle_and_params() {
    let dev = fs_device_new_default();
    let key = CString::new("t_fe").unwrap();
    let mut v = 0.0;
    unsafe {
        assert_eq!(fs_device_get(dev, key.as_ptr(), &mut v), FS_OK);
        assert_eq!(v, default_fdsoi22().t_fe);
        assert_eq!(fs_device_set(dev, key.as_ptr(), 12e-9), FS_OK);
        assert_eq!(fs_device_get(dev, key.as_ptr(), &mut v), FS_OK);
        assert_eq!(v, 12e-9);

        assert_eq!(fs_device_set(dev, key.as_ptr(), -1.0), FS_ERR_CONFIG);
        assert!(last_error().contains("t_fe"), "{}", last_error());
        assert_eq!(fs_device_get(dev, key.as_ptr(), &mut v), FS_OK);
        assert_eq!(v, 12e-9, "failed set must leave the device unchanged");

        let bogus = CString::new("nope").unwrap();
        assert_eq!(fs_device_set(dev, bogus.as_ptr(), 1.0), FS_ERR_CONFIG);
        assert_eq!(fs_device_get(dev, bogus.as_ptr(), &mut v), FS_ERR_CONFIG);
        fs_device_free(dev);
        fs_device_free(ptr::null_mut());
    }
}

#[test]
fn null_and_enum_arguments_are_rejected() {
    let dev = fs_device_new_default();
    let mut v = 0.0;
    unsafe {
        assert_eq!(fs_threshold_voltage(ptr::null(), 0.0, FS_PORT_WG, &mut v), FS_ERR_ARGUMENT);
        assert_eq!(fs_threshold_voltage(dev, 0.0, 7, &mut v), FS_ERR_ARGUMENT);
        assert!(last_error().contains("port"));
        assert_eq!(fs_threshold_voltage(dev, 0.0, FS_PORT_WG, ptr::null_mut()), FS_ERR_ARGUMENT);
        assert_eq!(fs_threshold_voltage(dev, 0.0, FS_PORT_WG, &mut v), FS_OK);
        assert_eq!(last_error(), "");
        assert_eq!(fs_fit_nls(ptr::null(), ptr::null(), 0, ptr::null_mut()), FS_ERR_ARGUMENT);
        fs_device_free(dev);
    }
}

#[test]
fn results_match_the_library() {
    let d = default_fdsoi22();
    let dev = fs_device_new_default();
    let (mut lo, mut hi) = (0.0, 0.0);
    unsafe {
        assert_eq!(fs_memory_window(dev, FS_PORT_RG, DEFAULT_SEED, &mut lo, &mut hi), FS_OK);
    }
    let p_lo = write_state(&d, StoredState::LowVth, DEFAULT_SEED).unwrap().polarization();
    let p_hi = write_state(&d, StoredState::HighVth, DEFAULT_SEED).unwrap().polarization();
    assert_eq!(lo, threshold_voltage(&d, p_lo, PortId::ReadGate).unwrap());
    assert_eq!(hi, threshold_voltage(&d, p_hi, PortId::ReadGate).unwrap());

    let mut e = f64::NAN;
    let mut id = f64::NAN;
    unsafe {
        assert_eq!(fs_solve(dev, d.p_r, 0.0, 5.0, &mut e, ptr::null_mut()), FS_OK);
        assert_eq!(fs_drain_current(dev, d.p_r, 0.0, 5.0, 0.1, &mut id), FS_OK);
        fs_device_free(dev);
    }
    let sol = ferrosim::electrostatics::solve_operating_point(&d, d.p_r, 0.0, 5.0).unwrap();
    assert_eq!(e, sol.e_fe);
    assert_eq!(id, ferrosim::device::drain_current(&d, &sol, 0.1).unwrap());
}

#[test]
fn ensemble_switches_under_pulses() {
    let dev = fs_device_new_default();
    let mut ens = ptr::null_mut();
    let mut p = 0.0;
    let p_r = default_fdsoi22().p_r;
    unsafe {
        assert_eq!(fs_ensemble_new(dev, 1, 3, &mut ens), FS_OK);
        assert_eq!(fs_ensemble_polarization(ens, &mut p), FS_OK);
        assert_eq!(p, p_r);
        assert_eq!(fs_ensemble_apply_pulse(ens, FS_PORT_WG, -4.0, 1e-6), FS_OK);
        assert_eq!(fs_ensemble_polarization(ens, &mut p), FS_OK);
        assert_eq!(p, -p_r);
        assert_eq!(fs_ensemble_apply_pulse(ens, FS_PORT_WG, 4.0, -1.0), FS_ERR_CONFIG);
        assert_eq!(fs_ensemble_new(dev, 5, 3, &mut ens), FS_ERR_ARGUMENT);
        fs_ensemble_free(ens);
        fs_device_free(dev);
    }
}

#[test]
fn fit_recovers_generator() {
    let (tau0, alpha, vo) = (2e-10, 4.0, -0.3);
    let v: Vec<f64> = (0..8).map(|k| 1.0 + 0.4 * k as f64).collect();
    let pw: Vec<f64> = v.iter().map(|&x| tau0 * ((alpha / (x - vo)) as f64).powi(2).exp()).collect();
    let mut out = FsNlsFit::default();
    unsafe {
        assert_eq!(fs_fit_nls(v.as_ptr(), pw.as_ptr(), v.len(), &mut out), FS_OK);
        assert_eq!(fs_fit_nls(v.as_ptr(), pw.as_ptr(), 2, &mut out), FS_ERR_NUMERICAL);
    }
    let mut good = FsNlsFit::default();
    unsafe { fs_fit_nls(v.as_ptr(), pw.as_ptr(), v.len(), &mut good) };
    assert!((good.tau0 / tau0 - 1.0).abs() < 1e-3);
    assert!((good.alpha / alpha - 1.0).abs() < 1e-3);
    assert!((good.v_offset - vo).abs() < 1e-3);
}

#[test]
fn config_file_loading() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dev.toml");
    std::fs::write(&path, "defaults = \"fdsoi22\"\n[device]\nt_box = 1.5e-8\n").unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut dev = ptr::null_mut();
    let mut v = 0.0;
    let key = CString::new("t_box").unwrap();
    unsafe {
        assert_eq!(fs_device_from_config(c.as_ptr(), &mut dev), FS_OK);
        assert_eq!(fs_device_get(dev, key.as_ptr(), &mut v), FS_OK);
        fs_device_free(dev);
    }
    assert_eq!(v, 1.5e-8);
    let missing = CString::new(dir.path().join("none.toml").to_str().unwrap()).unwrap();
    unsafe {
        assert_eq!(fs_device_from_config(missing.as_ptr(), &mut dev), FS_ERR_IO);
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(fs_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

fn profile_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_declares_every_entry_point() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/ferrosim.h")).unwrap();
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    for line in src.lines().filter(|l| l.contains("extern \"C\" fn ")) {
        let name = line.split("fn ").nth(1).unwrap().split('(').next().unwrap();
        assert!(h.contains(&format!("{name}(")), "{name} missing from header");
    }
}

#[test]
fn c_program_links_against_static_library() {
    let lib = profile_dir().join("libferrosim_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let manifest = env!("CARGO_MANIFEST_DIR");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(format!("{manifest}/include"))
        .arg(format!("{manifest}/tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let nums: Vec<f64> = text.split_whitespace().take(2).map(|s| s.parse().unwrap()).collect();
    assert!(nums[1] - nums[0] > 1.0, "window too small: {text}");
}
