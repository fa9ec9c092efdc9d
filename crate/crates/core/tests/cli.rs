use std::path::Path;
use std::process::{Command, Output};

use ferrosim::cli::{parse_report, RunManifest, MANIFEST_FILE};

fn ferrosim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ferrosim"))
        .args(args)
        .env_remove("FERROSIM_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = ferrosim(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn report_value(text: &str, key: &str) -> f64 {
    parse_report(text)
        .into_iter()
        .find(|(k, _)| k == key)
        .unwrap_or_else(|| panic!("no `{key}` in report"))
        .1
        .parse()
        .unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn disturb_shows_high_state_decay() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    ok(&["disturb", "--port", "wg", "--state", "high", "--vread", "1.4", "--tmax", "1e3", "--out-dir", out]);
    let text = read(&dir.path().join("retention_trace.csv"));
    assert!(text.starts_with("port,state,stress_V,stress_t_s,vth_V\n"));
    assert!(!text.contains('\r'));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 81);
    let ts: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(ts.windows(2).all(|w| w[1] > w[0]));
    assert!((ts[0] - 1e-7).abs() < 1e-20 && (ts[80] - 1e3).abs() < 1e-9);
    let first: f64 = rows[0][4].parse().unwrap();
    let last: f64 = rows[80][4].parse().unwrap();
    assert!(first - last > 0.75, "vth {first} -> {last}");
    assert!(rows.iter().all(|r| r[0] == "wg" && r[1] == "high"));
}

#[test]
fn fit_nls_recovers_generator() {
    let dir = tempfile::tempdir().unwrap();
    let (tau0, alpha, vo) = (3e-10, 4.5, -0.2);
    let mut csv = String::from("v_app_V,pw_s\n");
    for k in 0..10 {
        let v = 1.0 + 0.3 * k as f64;
        let x = alpha / (v - vo);
        csv.push_str(&format!("{v},{:e}\n", tau0 * (x * x).exp()));
    }
    let input = dir.path().join("points.csv");
    std::fs::write(&input, csv).unwrap();
    let out = dir.path().join("out");
    ok(&["fit-nls", "--input", input.to_str().unwrap(), "--out-dir", out.to_str().unwrap(), "--plot"]);
    let report = read(&out.join("nls_fit.txt"));
    assert!((report_value(&report, "tau0_s") / tau0 - 1.0).abs() < 0.01);
    assert!((report_value(&report, "alpha_V") / alpha - 1.0).abs() < 0.01);
    assert!((report_value(&report, "v_offset_V") / vo - 1.0).abs() < 0.01);
    assert!(report.contains("v_app_V,pw_s,pw_fit_s,ln_residual\n"));
    assert!(out.join("nls_fit.svg").exists());
}

#[test]
fn ring_oscillator_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    ok(&["circuit-ro", "--stages", "3", "--write", "4.0", "--out-dir", out]);
    let f = report_value(&read(&dir.path().join("ro_report.txt")), "frequency_Hz");
    assert!((f / 121e3 - 1.0).abs() < 0.2, "{f}");
    let trace = read(&dir.path().join("ro_trace.csv"));
    assert!(trace.starts_with("t_s,n1_V,n2_V,n3_V\n"));
}

#[test]
fn identical_invocations_and_manifest_replay() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let args = |d: &Path| {
        vec![
            "iv-sweep".to_string(),
            "--port".into(),
            "rg".into(),
            "--seed".into(),
            "11".into(),
            "--out-dir".into(),
            d.to_str().unwrap().into(),
        ]
    };
    let run = |d: &Path| {
        let v = args(d);
        ok(&v.iter().map(String::as_str).collect::<Vec<_>>());
    };
    run(&a);
    run(&b);
    for f in ["iv_low.csv", "iv_high.csv", "mw.csv", "write_low_trajectory.csv"] {
        assert_eq!(read(&a.join(f)), read(&b.join(f)), "{f}");
    }
    let traj = read(&a.join("write_high_trajectory.csv"));
    assert!(traj.starts_with("t_s,P_Cpm2,e_fe_Vpm,psi_s_V\n"));

    let m: RunManifest = serde_json::from_str(&read(&a.join(MANIFEST_FILE))).unwrap();
    assert_eq!(m.subcommand, "iv-sweep");
    assert_eq!(m.seed, 11);
    assert_eq!(m.version, env!("CARGO_PKG_VERSION"));
    assert!(m.wall_clock_s >= 0.0);
    assert!(m.outputs.contains(&"mw.csv".to_string()));
    assert_eq!(m.config["device"]["t_box"], 20e-9);
    let before = read(&a.join("iv_low.csv"));
    std::fs::remove_file(a.join("iv_low.csv")).unwrap();
    let replay: Vec<&str> = m.argv[1..].iter().map(String::as_str).collect();
    ok(&replay);
    assert_eq!(read(&a.join("iv_low.csv")), before);
}

#[test]
fn seed_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("1");
    let two = dir.path().join("2");
    ok(&["iv-sweep", "--seed", "1", "--out-dir", one.to_str().unwrap()]);
    ok(&["iv-sweep", "--seed", "2", "--out-dir", two.to_str().unwrap()]);
    let f = "write_low_trajectory.csv";
    assert_ne!(read(&one.join(f)), read(&two.join(f)));
}

#[test]
fn thread_cap_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let args = ["mw-map", "--amp-min", "2", "--amp-max", "3", "--pw-min", "1e-8", "--pw-max", "1e-5", "--plot"];
    let mut one = args.to_vec();
    one.extend(["--out-dir", a.to_str().unwrap()]);
    let status = Command::new(env!("CARGO_BIN_EXE_ferrosim"))
        .args(&one)
        .env("FERROSIM_THREADS", "1")
        .status()
        .unwrap();
    assert!(status.success());
    let mut many = args.to_vec();
    many.extend(["--out-dir", b.to_str().unwrap()]);
    ok(&many);
    let text = read(&a.join("mw_map.csv"));
    assert_eq!(text, read(&b.join("mw_map.csv")));
    assert!(text.starts_with("amp_V,pw_s,mw_V,scenario\n"));
    assert_eq!(csv_rows(&text).len(), 5 * 13);
    assert!(read(&a.join("mw_map.svg")).starts_with("<svg"));

    let bad = Command::new(env!("CARGO_BIN_EXE_ferrosim"))
        .args(["fit-nls", "--input", "x.csv"])
        .env("FERROSIM_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn other_subcommands_write_their_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let d = |s: &str| dir.path().join(s).to_str().unwrap().to_string();
    ok(&["efe-sweep", "--out-dir", &d("efe"), "--plot"]);
    assert!(read(&dir.path().join("efe/efe_sweep.csv")).starts_with("v_read,e_fe_Vpm\n"));
    assert!(read(&dir.path().join("efe/band_profile.csv")).starts_with("depth_m,potential_V\n"));
    assert!(dir.path().join("efe/band_profile.svg").exists());

    ok(&["iv-sweep", "--out-dir", &d("iv")]);
    let mw = read(&dir.path().join("iv/mw.csv"));
    assert!(mw.starts_with("port,vth_low_V,vth_high_V,mw_V\n"));
    let w: f64 = csv_rows(&mw)[0][3].parse().unwrap();
    assert!((w - 1.5).abs() < 0.15);
    assert!(read(&dir.path().join("iv/iv_low.csv")).starts_with("v_g,i_d_A\n"));

    ok(&["iso-mw", "--amp-min", "2", "--amp-max", "4", "--amp-step", "0.5", "--out-dir", &d("iso")]);
    let iso = read(&dir.path().join("iso/iso_mw.csv"));
    assert!(iso.starts_with("v_app_V,pw_s\n"));
    assert_eq!(csv_rows(&iso).len(), 5);
    let map = dir.path().join("iso/mw_map.csv");
    ok(&["iso-mw", "--map-csv", map.to_str().unwrap(), "--out-dir", &d("iso2")]);
    assert_eq!(read(&dir.path().join("iso2/iso_mw.csv")), iso);

    ok(&["retention", "--port", "rg", "--vread", "14", "--out-dir", &d("ret")]);
    let ret = read(&dir.path().join("ret/retention_time.csv"));
    assert_eq!(ret, "port,state,stress_V,retention_s,capped\nrg,high,1.4e1,3.15e8,true\n");

    ok(&["circuit-switch", "--port", "rg", "--out-dir", &d("sw")]);
    assert!(read(&dir.path().join("sw/switch_trace.csv")).starts_with("t_s,out_V\n"));
    let ratio = report_value(&read(&dir.path().join("sw/switch_report.txt")), "swing_ratio");
    assert!(ratio >= 0.8);

    ok(&["circuit-lut", "--logic", "0", "--out-dir", &d("lut")]);
    let frac = report_value(&read(&dir.path().join("lut/lut_report.txt")), "output_fraction");
    assert!(frac <= 0.2);
}

#[test]
fn config_files_are_honored() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let dir = tempfile::tempdir().unwrap();
    let d = |s: &str| dir.path().join(s).to_str().unwrap().to_string();
    let full = root.join("fdsoi22.toml");
    ok(&["iv-sweep", "--config", full.to_str().unwrap(), "--out-dir", &d("full")]);
    ok(&["iv-sweep", "--out-dir", &d("default")]);
    assert_eq!(read(&dir.path().join("full/mw.csv")), read(&dir.path().join("default/mw.csv")));

    let thin = root.join("thin_box.toml");
    ok(&["iv-sweep", "--port", "rg", "--config", thin.to_str().unwrap(), "--out-dir", &d("thin")]);
    let w: f64 = csv_rows(&read(&dir.path().join("thin/mw.csv")))[0][3].parse().unwrap();
    assert!(w > 5.0 && w < 7.0, "{w}");

    let partial = dir.path().join("partial.toml");
    std::fs::write(&partial, "t_fe = 10e-9\n").unwrap();
    let out = ferrosim(&["iv-sweep", "--config", partial.to_str().unwrap(), "--out-dir", &d("p")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing required key"));

    let invalid = dir.path().join("invalid.toml");
    std::fs::write(&invalid, "defaults = \"fdsoi22\"\nt_box = -1\n").unwrap();
    let out = ferrosim(&["iv-sweep", "--config", invalid.to_str().unwrap(), "--out-dir", &d("i")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("t_box"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ferrosim(&["frobnicate"]).status.code(), Some(2));
    let bad_flag = ferrosim(&["disturb", "--volts", "3"]);
    assert_eq!(bad_flag.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_flag.stderr).contains("Usage"));
    assert_eq!(ferrosim(&["fit-nls"]).status.code(), Some(2));

    let missing = dir.path().join("none.csv");
    assert_eq!(ferrosim(&["fit-nls", "--input", missing.to_str().unwrap()]).status.code(), Some(4));

    let headerless = dir.path().join("h.csv");
    std::fs::write(&headerless, "1.0,1e-6\n2.0,1e-7\n").unwrap();
    assert_eq!(ferrosim(&["fit-nls", "--input", headerless.to_str().unwrap()]).status.code(), Some(2));

    let few = dir.path().join("few.csv");
    std::fs::write(&few, "v_app_V,pw_s\n1.0,1e-6\n2.0,1e-7\n").unwrap();
    let out = ferrosim(&["fit-nls", "--input", few.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));

    let blocked = dir.path().join("file");
    std::fs::write(&blocked, "").unwrap();
    let out = ferrosim(&["circuit-ro", "--out-dir", blocked.join("sub").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn help_lists_flags_with_units() {
    let subs = [
        ("efe-sweep", "[V]"),
        ("iv-sweep", "[V]"),
        ("mw-map", "[s]"),
        ("iso-mw", "[V]"),
        ("fit-nls", "v_app_V,pw_s"),
        ("disturb", "[s]"),
        ("retention", "[s]"),
        ("circuit-switch", "[V]"),
        ("circuit-lut", "[s]"),
        ("circuit-ro", "[V]"),
    ];
    for (sub, unit) in subs {
        let out = ok(&[sub, "--help"]);
        let text = String::from_utf8(out.stdout).unwrap();
        for flag in ["--config", "--seed", "--out-dir", "--plot"] {
            assert!(text.contains(flag), "{sub} help lacks {flag}");
        }
        assert!(text.contains(unit), "{sub} help lacks units");
    }
}
