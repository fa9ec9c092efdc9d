//! Command-line front end: argument parsing, output files and run manifests.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuits::{
    activation_bias, gate_pulse, lut_gate_levels, simulate_lut, simulate_ring_oscillator, simulate_switch,
    square_wave, CircuitConfig, TransientTrace,
};
use crate::device::{default_read_range, id_vg_sweep, window_between, StoredState, DEFAULT_SEED, WRITE_PW};
use crate::electrostatics::{band_profile, efe_vs_vread, solve_operating_point};
use crate::error::{Error, Result};
use crate::params::{build_device, default_fdsoi22, ConfigMap, ConfigValue, DeviceParams, PortId};
use crate::polarization::{apply_waveform, init_ensemble, DtPolicy, InitialState, Trajectory, Waveform};
use crate::protocols::{
    fit_nls, iso_mw_curve, log_times, mw_contour_seeded, read_disturb_seeded, retention_time_seeded, MwMap,
    Scenario, TEN_YEARS,
};
use crate::svg::{CellMap, LineChart, Scale, Series};
use crate::table::{read_pairs, Cell, Table};

#[derive(Debug, Parser)]
#[command(name = "ferrosim", version, about = "Ferroelectric FDSOI transistor simulator")]
struct Cli {
    /// Device/circuit parameter file (TOML, SI units)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for domain offsets
    #[arg(long, global = true, value_name = "U64", default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Directory receiving CSV, SVG and manifest files
    #[arg(long, global = true, value_name = "PATH", default_value = ".")]
    out_dir: PathBuf,
    /// Also write an SVG chart per result table
    #[arg(long, global = true)]
    plot: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ferroelectric field versus read voltage for a programmed state
    EfeSweep(EfeArgs),
    /// Transfer curves of both stored states and the memory window
    IvSweep(IvArgs),
    /// Memory window after single pulses over an amplitude/width grid
    MwMap(MapArgs),
    /// Pulse width needed for a given window at each amplitude
    IsoMw(IsoArgs),
    /// Fit the switching-time law to (amplitude, width) points
    FitNls(FitArgs),
    /// Threshold drift under a constant read stress
    Disturb(DisturbArgs),
    /// Stress time until a fraction of the window is lost
    Retention(RetentionArgs),
    /// Pass-transistor routing switch transient
    CircuitSwitch(SwitchArgs),
    /// Two-transistor look-up table cell transient
    CircuitLut(LutArgs),
    /// Ring oscillator with one FeFET stage
    CircuitRo(RingArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::EfeSweep(_) => "efe-sweep",
            Command::IvSweep(_) => "iv-sweep",
            Command::MwMap(_) => "mw-map",
            Command::IsoMw(_) => "iso-mw",
            Command::FitNls(_) => "fit-nls",
            Command::Disturb(_) => "disturb",
            Command::Retention(_) => "retention",
            Command::CircuitSwitch(_) => "circuit-switch",
            Command::CircuitLut(_) => "circuit-lut",
            Command::CircuitRo(_) => "circuit-ro",
        }
    }
}

#[derive(Debug, Args)]
struct EfeArgs {
    /// Swept port, wg or rg (the other gate is grounded)
    #[arg(long, default_value = "rg")]
    port: PortId,
    /// Stored state written before the sweep, low or high
    #[arg(long, default_value = "low")]
    state: StoredState,
    /// First read voltage [V]
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    vmin: f64,
    /// Last read voltage [V]
    #[arg(long, default_value_t = 20.0, allow_negative_numbers = true)]
    vmax: f64,
    /// Number of sweep points
    #[arg(long, default_value_t = 81)]
    n: usize,
    /// Read voltage of the exported band profile [V] (default: --vmax)
    #[arg(long, allow_negative_numbers = true)]
    band_at: Option<f64>,
}

#[derive(Debug, Args)]
struct IvArgs {
    /// Swept port, wg or rg (the other gate is grounded)
    #[arg(long, default_value = "wg")]
    port: PortId,
    /// First gate voltage [V] (default: -4 on wg, -20 on rg)
    #[arg(long, allow_negative_numbers = true)]
    vstart: Option<f64>,
    /// Last gate voltage [V] (default: 4 on wg, 25 on rg)
    #[arg(long, allow_negative_numbers = true)]
    vstop: Option<f64>,
    /// Number of sweep points
    #[arg(long, default_value_t = 161)]
    n: usize,
    /// Drain bias [V]
    #[arg(long, default_value_t = 0.1)]
    vds: f64,
}

#[derive(Debug, Args, Clone)]
struct MapArgs {
    /// Starting state, from-low or from-high
    #[arg(long, default_value = "from-high")]
    scenario: Scenario,
    /// Smallest pulse amplitude [V]
    #[arg(long, default_value_t = 1.0)]
    amp_min: f64,
    /// Largest pulse amplitude [V]
    #[arg(long, default_value_t = 4.0)]
    amp_max: f64,
    /// Amplitude step [V]
    #[arg(long, default_value_t = 0.25)]
    amp_step: f64,
    /// Shortest pulse width [s]
    #[arg(long, default_value_t = 1e-9)]
    pw_min: f64,
    /// Longest pulse width [s]
    #[arg(long, default_value_t = 1e3)]
    pw_max: f64,
    /// Pulse widths per decade
    #[arg(long, default_value_t = 4)]
    pw_per_decade: usize,
}

#[derive(Debug, Args)]
struct IsoArgs {
    #[command(flatten)]
    map: MapArgs,
    /// Window level traced through the map [V]
    #[arg(long, default_value_t = 1.0)]
    level: f64,
    /// Existing map CSV (amp_V,pw_s,mw_V,scenario) instead of computing one
    #[arg(long, value_name = "PATH")]
    map_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Point table with header v_app_V,pw_s (V, s)
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
}

#[derive(Debug, Args)]
struct DisturbArgs {
    /// Stressed port, wg or rg
    #[arg(long, default_value = "wg")]
    port: PortId,
    /// Stored state, low or high
    #[arg(long, default_value = "high")]
    state: StoredState,
    /// Stress voltages, comma separated [V]
    #[arg(long, value_delimiter = ',', default_value = "1.4", allow_negative_numbers = true)]
    vread: Vec<f64>,
    /// First checkpoint [s]
    #[arg(long, default_value_t = 1e-7)]
    tmin: f64,
    /// Last checkpoint [s]
    #[arg(long, default_value_t = 1e3)]
    tmax: f64,
    /// Checkpoints per decade
    #[arg(long, default_value_t = 8)]
    per_decade: usize,
}

#[derive(Debug, Args)]
struct RetentionArgs {
    /// Stressed port, wg or rg
    #[arg(long, default_value = "wg")]
    port: PortId,
    /// Stored state, low or high
    #[arg(long, default_value = "high")]
    state: StoredState,
    /// Stress voltages, comma separated [V]
    #[arg(long, value_delimiter = ',', default_value = "1.2,1.4,1.6,1.8,2.0", allow_negative_numbers = true)]
    vread: Vec<f64>,
    /// Lost fraction of the fresh window that ends retention
    #[arg(long, default_value_t = 0.5)]
    fraction: f64,
    /// Longest stress considered [s]
    #[arg(long, default_value_t = TEN_YEARS)]
    cap: f64,
}

#[derive(Debug, Args)]
struct SwitchArgs {
    /// Gate holding the activation bias, wg or rg
    #[arg(long, default_value = "wg")]
    port: PortId,
    /// Stored state, low or high
    #[arg(long, default_value = "low")]
    state: StoredState,
    /// Activation bias [V] (default: midway between the state thresholds)
    #[arg(long, allow_negative_numbers = true)]
    activation: Option<f64>,
    /// Input square-wave amplitude [V]
    #[arg(long, default_value_t = 0.1)]
    amp: f64,
    /// Input period [s]
    #[arg(long, default_value_t = 20e-6)]
    period: f64,
    /// Number of input periods
    #[arg(long, default_value_t = 3)]
    periods: usize,
}

#[derive(Debug, Args)]
struct LutArgs {
    /// Read gate, wg or rg
    #[arg(long, default_value = "wg")]
    port: PortId,
    /// Stored logic value, 0 or 1
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(0..=1))]
    logic: u8,
    /// Gate level outside the read pulse [V] (default: one window below the low threshold)
    #[arg(long, allow_negative_numbers = true)]
    idle: Option<f64>,
    /// Gate level during the read pulse [V] (default: midway between the thresholds)
    #[arg(long, allow_negative_numbers = true)]
    read: Option<f64>,
    /// Read pulse start [s]
    #[arg(long, default_value_t = 5e-6)]
    t_on: f64,
    /// Read pulse width [s]
    #[arg(long, default_value_t = 20e-6)]
    t_read: f64,
}

#[derive(Debug, Args)]
struct RingArgs {
    /// Number of stages (odd, at least 3)
    #[arg(long, default_value_t = 3)]
    stages: usize,
    /// Program pulse amplitude applied to the FeFET stage after an erase [V]
    #[arg(long, default_value_t = 4.0, allow_negative_numbers = true)]
    write: f64,
    /// FeFET stages in the ring (default 1)
    #[arg(long)]
    fefet_stages: Option<usize>,
}

/// Record of one invocation, written as `manifest.json` next to the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// Full argument vector; re-running it regenerates the outputs.
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub version: String,
    pub wall_clock_s: f64,
    pub outputs: Vec<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

enum Payload {
    Csv(Table),
    Text(String),
    Svg(String),
}

struct Output {
    file: String,
    payload: Payload,
}

impl Output {
    fn csv(file: &str, t: Table) -> Self {
        Output {
            file: file.into(),
            payload: Payload::Csv(t),
        }
    }

    fn text(file: &str, s: String) -> Self {
        Output {
            file: file.into(),
            payload: Payload::Text(s),
        }
    }

    fn svg(file: &str, s: String) -> Self {
        Output {
            file: file.into(),
            payload: Payload::Svg(s),
        }
    }
}

struct Ctx {
    dev: DeviceParams,
    config: ConfigMap,
    seed: u64,
    plot: bool,
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let argv: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(&cli, argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("FERROSIM_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("FERROSIM_THREADS must be a positive integer, got `{v}`")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn execute(cli: &Cli, argv: Vec<String>) -> Result<()> {
    let start = Instant::now();
    let config = match &cli.config {
        Some(p) => ConfigMap::from_path(p)?,
        None => ConfigMap::with_defaults("fdsoi22"),
    };
    let dev = if cli.config.is_some() {
        build_device(&config)?
    } else {
        default_fdsoi22()
    };
    let ctx = Ctx {
        dev,
        config,
        seed: cli.seed,
        plot: cli.plot,
    };
    let pool = thread_pool()?;
    let outputs = pool.install(|| dispatch(&cli.command, &ctx))?;

    std::fs::create_dir_all(&cli.out_dir)
        .map_err(|e| Error::Io(e).context(format!("creating {}", cli.out_dir.display())))?;
    let mut names = Vec::new();
    for o in &outputs {
        let path = cli.out_dir.join(&o.file);
        match &o.payload {
            Payload::Csv(t) => t.save(&path)?,
            Payload::Text(s) | Payload::Svg(s) => write_file(&path, s)?,
        }
        names.push(o.file.clone());
    }
    let manifest = RunManifest {
        subcommand: cli.command.name().into(),
        argv,
        config: config_snapshot(&ctx),
        seed: ctx.seed,
        out_dir: cli.out_dir.clone(),
        version: env!("CARGO_PKG_VERSION").into(),
        wall_clock_s: start.elapsed().as_secs_f64(),
        outputs: names,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Consistency(e.to_string()))?;
    write_file(&cli.out_dir.join(MANIFEST_FILE), &(json + "\n"))
}

fn write_file(path: &Path, s: &str) -> Result<()> {
    std::fs::write(path, s).map_err(|e| Error::Io(e).context(format!("writing {}", path.display())))
}

fn config_snapshot(ctx: &Ctx) -> serde_json::Value {
    let mut entries = serde_json::Map::new();
    for k in ctx.config.keys() {
        let v = match ctx.config.get(k) {
            Some(ConfigValue::Num(x)) => serde_json::json!(x),
            Some(ConfigValue::Text(t)) => serde_json::json!(t),
            None => continue,
        };
        entries.insert(k.to_string(), v);
    }
    serde_json::json!({ "device": ctx.dev, "entries": entries })
}

fn dispatch(cmd: &Command, ctx: &Ctx) -> Result<Vec<Output>> {
    match cmd {
        Command::EfeSweep(a) => efe_sweep(a, ctx),
        Command::IvSweep(a) => iv_sweep(a, ctx),
        Command::MwMap(a) => mw_map(a, ctx),
        Command::IsoMw(a) => iso_mw(a, ctx),
        Command::FitNls(a) => fit(a, ctx),
        Command::Disturb(a) => disturb(a, ctx),
        Command::Retention(a) => retention(a, ctx),
        Command::CircuitSwitch(a) => circuit_switch(a, ctx),
        Command::CircuitLut(a) => circuit_lut(a, ctx),
        Command::CircuitRo(a) => circuit_ro(a, ctx),
    }
}

fn pairs_table(headers: &[&str; 2], rows: &[(f64, f64)]) -> Table {
    let mut t = Table::new(headers);
    for &(a, b) in rows {
        t.push(vec![a.into(), b.into()]);
    }
    t
}

fn line_chart(title: &str, x: &str, y: &str, xs: Scale, ys: Scale, series: Vec<Series>) -> String {
    LineChart {
        title: title.into(),
        x_label: x.into(),
        y_label: y.into(),
        x_scale: xs,
        y_scale: ys,
        series,
    }
    .render()
}

fn series(label: impl Into<String>, points: Vec<(f64, f64)>) -> Series {
    Series {
        label: label.into(),
        points,
    }
}

/// Programs `state` from a depolarized ensemble and keeps the trajectory.
fn write_with_trajectory(ctx: &Ctx, state: StoredState) -> Result<(f64, Trajectory)> {
    let ens = init_ensemble(&ctx.dev, InitialState::Mixed(0.5), ctx.seed)?;
    let pulse = Waveform::write_pulse(state.write_amp(), WRITE_PW);
    let (ens, traj) = apply_waveform(&ctx.dev, ens, &pulse, DtPolicy::default())?;
    Ok((ens.polarization(), traj))
}

fn trajectory_table(traj: &Trajectory) -> Table {
    let mut t = Table::new(&["t_s", "P_Cpm2", "e_fe_Vpm", "psi_s_V"]);
    for r in &traj.rows {
        t.push(vec![r.t.into(), r.p.into(), r.e_fe.into(), r.psi_s.into()]);
    }
    t
}

fn efe_sweep(a: &EfeArgs, ctx: &Ctx) -> Result<Vec<Output>> {
    let (p, _) = write_with_trajectory(ctx, a.state)?;
    let sweep = efe_vs_vread(&ctx.dev, p, a.port, a.vmin, a.vmax, a.n)?;
    let v_band = a.band_at.unwrap_or(a.vmax);
    let (wg, rg) = a.port.biases(v_band);
    let sol = solve_operating_point(&ctx.dev, p, wg, rg)?;
    let band = band_profile(&ctx.dev, &sol, wg, rg)?;
    let mut out = vec![
        Output::csv("efe_sweep.csv", pairs_table(&["v_read", "e_fe_Vpm"], &sweep.rows)),
        Output::csv("band_profile.csv", pairs_table(&["depth_m", "potential_V"], &band.points)),
    ];
    if ctx.plot {
        out.push(Output::svg(
            "efe_sweep.svg",
            line_chart(
                "Ferroelectric field",
                &format!("{} read voltage (V)", a.port),
                "E_FE (V/m)",
                Scale::Linear,
                Scale::Linear,
                vec![series(a.state.to_string(), sweep.rows.clone())],
            ),
        ));
        out.push(Output::svg(
            "band_profile.svg",
            line_chart(
                &format!("Potential at {v_band} V on {}", a.port),
                "depth (m)",
                "potential (V)",
                Scale::Linear,
                Scale::Linear,
                vec![series(a.state.to_string(), band.points.clone())],
            ),
        ));
    }
    Ok(out)
}

fn iv_sweep(a: &IvArgs, ctx: &Ctx) -> Result<Vec<Output>> {
    let (lo, hi) = default_read_range(a.port);
    let (v0, v1) = (a.vstart.unwrap_or(lo), a.vstop.unwrap_or(hi));
    let mut out = Vec::new();
    let mut curves = Vec::new();
    let mut ps = Vec::new();
    for state in [StoredState::LowVth, StoredState::HighVth] {
        let (p, traj) = write_with_trajectory(ctx, state)?;
        let curve = id_vg_sweep(&ctx.dev, p, a.port, v0, v1, a.n, a.vds)?;
        out.push(Output::csv(
            &format!("iv_{}.csv", state.short()),
            pairs_table(&["v_g", "i_d_A"], &curve.rows),
        ));
        out.push(Output::csv(
            &format!("write_{}_trajectory.csv", state.short()),
            trajectory_table(&traj),
        ));
        curves.push(series(state.to_string(), curve.rows));
        ps.push(p);
    }
    let mw = window_between(&ctx.dev, a.port, ps[0], ps[1])?;
    let mut t = Table::new(&["port", "vth_low_V", "vth_high_V", "mw_V"]);
    t.push(vec![a.port.short().into(), mw.vth_low.into(), mw.vth_high.into(), mw.mw.into()]);
    out.push(Output::csv("mw.csv", t));
    if ctx.plot {
        out.push(Output::svg(
            "iv.svg",
            line_chart(
                "Transfer curves",
                &format!("{} voltage (V)", a.port),
                "I_D (A)",
                Scale::Linear,
                Scale::Log,
                curves,
            ),
        ));
    }
    Ok(out)
}

fn map_axes(a: &MapArgs) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(a.amp_step > 0.0) || !(a.amp_max >= a.amp_min) {
        return Err(Error::Config(format!(
            "amplitude axis needs amp_step > 0 and amp_max >= amp_min (got {}..{} step {})",
            a.amp_min, a.amp_max, a.amp_step
        )));
    }
    if !(a.pw_min > 0.0) || !(a.pw_max > a.pw_min) || a.pw_per_decade == 0 {
        return Err(Error::Config(format!(
            "pulse-width axis needs 0 < pw_min < pw_max and pw_per_decade >= 1 (got {}..{})",
            a.pw_min, a.pw_max
        )));
    }
    let n = ((a.amp_max - a.amp_min) / a.amp_step + 1e-9).floor() as usize + 1;
    let amps = (0..n).map(|k| a.amp_min + k as f64 * a.amp_step).collect();
    Ok((amps, log_times(a.pw_min, a.pw_max, a.pw_per_decade)))
}

fn map_table(map: &MwMap) -> Table {
    let mut t = Table::new(&["amp_V", "pw_s", "mw_V", "scenario"]);
    for (amp, row) in map.amp_axis.iter().zip(&map.mw) {
        for (pw, mw) in map.pw_axis.iter().zip(row) {
            t.push(vec![(*amp).into(), (*pw).into(), (*mw).into(), map.scenario.short().into()]);
        }
    }
    t
}

fn map_plot(map: &MwMap) -> String {
    CellMap {
        title: format!("Memory window ({})", map.scenario.short()),
        x_label: "pulse amplitude (V)".into(),
        y_label: "pulse width (s)".into(),
        x: map.amp_axis.clone(),
        y: map.pw_axis.clone(),
        y_scale: Scale::Log,
        z: map.mw.clone(),
    }
    .render()
}

fn compute_map(a: &MapArgs, ctx: &Ctx) -> Result<MwMap> {
    let (amps, pws) = map_axes(a)?;
    mw_contour_seeded(&ctx.dev, &amps, &pws, a.scenario, ctx.seed)
}

fn mw_map(a: &MapArgs, ctx: &Ctx) -> Result<Vec<Output>> {
    let map = compute_map(a, ctx)?;
    let mut out = vec![Output::csv("mw_map.csv", map_table(&map))];
    if ctx.plot {
        out.push(Output::svg("mw_map.svg", map_plot(&map)));
    }
    Ok(out)
}

/// Rebuilds a map from its long-format CSV.
fn read_map(path: &Path) -> Result<MwMap> {
    let ctx = |e: csv::Error| Error::Config(format!("{}: {e}", path.display()));
    let mut rd = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(ctx)?;
    let headers = rd.headers().map_err(ctx)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["amp_V", "pw_s", "mw_V", "scenario"] {
        return Err(Error::Config(format!(
            "{}: expected header `amp_V,pw_s,mw_V,scenario`",
            path.display()
        )));
    }
    let mut amps: Vec<f64> = Vec::new();
    let mut pws: Vec<f64> = Vec::new();
    let mut cells = Vec::new();
    let mut scenario = None;
    for rec in rd.records() {
        let rec = rec.map_err(ctx)?;
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("{}: `{}` is not a number", path.display(), &rec[k])))
        };
        let (amp, pw, mw) = (num(0)?, num(1)?, num(2)?);
        scenario = Some(rec[3].parse::<Scenario>()?);
        if !amps.contains(&amp) {
            amps.push(amp);
        }
        if !pws.contains(&pw) {
            pws.push(pw);
        }
        cells.push((amp, pw, mw));
    }
    let scenario = scenario.ok_or_else(|| Error::Config(format!("{}: map is empty", path.display())))?;
    let mut mw = vec![vec![f64::NAN; pws.len()]; amps.len()];
    for (amp, pw, v) in cells {
        let i = amps.iter().position(|&x| x == amp).expect("amplitude recorded");
        let j = pws.iter().position(|&x| x == pw).expect("width recorded");
        mw[i][j] = v;
    }
    Ok(MwMap {
        amp_axis: amps,
        pw_axis: pws,
        mw,
        scenario,
    })
}

fn iso_mw(a: &IsoArgs, ctx: &Ctx) -> Result<Vec<Output>> {
    let mut out = Vec::new();
    let map = match &a.map_csv {
        Some(p) => read_map(p)?,
        None => {
            let m = compute_map(&a.map, ctx)?;
            out.push(Output::csv("mw_map.csv", map_table(&m)));
            m
        }
    };
    let curve = iso_mw_curve(&map, a.level);
    if let Some(r) = &curve.reason {
        log::warn!("empty iso-window curve: {r}");
    }
    out.push(Output::csv("iso_mw.csv", pairs_table(&["v_app_V", "pw_s"], &curve.points)));
    if ctx.plot {
        out.push(Output::svg(
            "iso_mw.svg",
            line_chart(
                &format!("Iso-window {} V", a.level),
                "pulse amplitude (V)",
                "pulse width (s)",
                Scale::Linear,
                Scale::Log,
                vec![series(map.scenario.short(), curve.points.clone())],
            ),
        ));
    }
    Ok(out)
}

fn fit(a: &FitArgs, ctx: &Ctx) -> Result<Vec<Output>> {
    let f = std::fs::File::open(&a.input)
        .map_err(|e| Error::Io(e).context(format!("opening {}", a.input.display())))?;
    let points = read_pairs(f, ["v_app_V", "pw_s"]).map_err(|e| e.context(a.input.display().to_string()))?;
    let fit = fit_nls(&points)?;
    let mut s = String::new();
    let _ = writeln!(s, "tau0_s = {:e}", fit.tau0);
    let _ = writeln!(s, "alpha_V = {:e}", fit.alpha);
    let _ = writeln!(s, "v_offset_V = {:e}", fit.v_offset);
    let _ = writeln!(s, "rms_log_residual = {:e}", fit.rms_log_residual);
    let _ = writeln!(s, "points = {}", points.len());
    let _ = writeln!(s);
    let mut t = Table::new(&["v_app_V", "pw_s", "pw_fit_s", "ln_residual"]);
    for &(v, pw) in &points {
        let model = fit.predict(v);
        t.push(vec![v.into(), pw.into(), model.into(), (pw.ln() - model.ln()).into()]);
    }
    s.push_str(&t.to_csv_string());
    let mut out = vec![Output::text("nls_fit.txt", s)];
    if ctx.plot {
        let model: Vec<(f64, f64)> = points.iter().map(|&(v, _)| (v, fit.predict(v))).collect();
        out.push(Output::svg(
            "nls_fit.svg",
            line_chart(
                "Switching-time fit",
                "pulse amplitude (V)",
                "pulse width (s)",
                Scale::Linear,
                Scale::Log,
                vec![series("data", points), series("fit", model)],
            ),
        ));
    }
    Ok(out)
}

fn disturb(a: &DisturbArgs, ctx: &Ctx) -> Result<Vec<Output>> {
    if !(a.tmin > 0.0) || !(a.tmax > a.tmin) || a.per_decade == 0 {
        return Err(Error::Config(format!(
            "checkpoints need 0 < tmin < tmax and per_decade >= 1 (got {}..{})",
            a.tmin, a.tmax
        )));
    }
    let ts = log_times(a.tmin, a.tmax, a.per_decade);
    let traces = read_disturb_seeded(&ctx.dev, a.port, a.state, &a.vread, &ts, ctx.seed)?;
    let mut t = Table::new(&["port", "state", "stress_V", "stress_t_s", "vth_V"]);
    for tr in &traces {
        for &(ts, vth) in &tr.rows {
            t.push(vec![
                tr.port.short().into(),
                tr.state.short().into(),
                tr.stress_v.into(),
                ts.into(),
                vth.into(),
            ]);
        }
    }
    let mut out = vec![Output::csv("retention_trace.csv", t)];
    if ctx.plot {
        let s = traces
            .iter()
            .map(|tr| series(format!("{} V", tr.stress_v), tr.rows.clone()))
            .collect();
        out.push(Output::svg(
            "retention_trace.svg",
            line_chart(
                &format!("Read disturb on {} ({} state)", a.port, a.state),
                "stress time (s)",
                "V_TH (V)",
                Scale::Log,
                Scale::Linear,
                s,
            ),
        ));
    }
    Ok(out)
}

fn retention(a: &RetentionArgs, ctx: &Ctx) -> Result<Vec<Output>> {
    let times = a
        .vread
        .par_iter()
        .map(|&v| retention_time_seeded(&ctx.dev, a.port, a.state, v, a.fraction, a.cap, ctx.seed))
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(&["port", "state", "stress_V", "retention_s", "capped"]);
    for (&v, &r) in a.vread.iter().zip(&times) {
        t.push(vec![
            a.port.short().into(),
            a.state.short().into(),
            v.into(),
            r.into(),
            Cell::Text((r >= a.cap).to_string()),
        ]);
    }
    let mut out = vec![Output::csv("retention_time.csv", t)];
    if ctx.plot {
        let pts = a.vread.iter().copied().zip(times).collect();
        out.push(Output::svg(
            "retention_time.svg",
            line_chart(
                &format!("Retention on {} ({} state)", a.port, a.state),
                "stress voltage (V)",
                "retention time (s)",
                Scale::Linear,
                Scale::Log,
                vec![series(a.state.to_string(), pts)],
            ),
        ));
    }
    Ok(out)
}

fn trace_table(tr: &TransientTrace) -> Table {
    let mut headers = vec!["t_s".to_string()];
    headers.extend(tr.names.iter().map(|n| format!("{n}_V")));
    let mut t = Table {
        headers,
        rows: Vec::with_capacity(tr.rows.len()),
    };
    for (time, v) in &tr.rows {
        let mut row = vec![Cell::Num(*time)];
        row.extend(v.iter().map(|&x| Cell::Num(x)));
        t.rows.push(row);
    }
    t
}

fn trace_plot(title: &str, tr: &TransientTrace) -> String {
    let stride = (tr.rows.len() / 4000).max(1);
    let s = tr
        .names
        .iter()
        .enumerate()
        .map(|(k, n)| {
            let pts = tr.rows.iter().step_by(stride).map(|(t, v)| (*t, v[k])).collect();
            series(n.as_str(), pts)
        })
        .collect();
    line_chart(title, "time (s)", "voltage (V)", Scale::Linear, Scale::Linear, s)
}

fn circuit_config(base: CircuitConfig, ctx: &Ctx) -> Result<CircuitConfig> {
    let mut cfg = base;
    cfg.seed = ctx.seed;
    cfg.apply_overrides(&ctx.config)?;
    Ok(cfg)
}

fn circuit_switch(a: &SwitchArgs, ctx: &Ctx) -> Result<Vec<Output>> {
    let cfg = circuit_config(CircuitConfig::switch(ctx.dev), ctx)?;
    let act = match a.activation {
        Some(v) => v,
        None => activation_bias(&ctx.dev, a.port)?,
    };
    let input = square_wave(a.amp, a.period, a.periods, a.period / 200.0)?;
    let t_end = a.period * a.periods as f64;
    let tr = simulate_switch(&cfg, a.state, (a.port, act), &input, t_end)?;
    let swing = tr.swing(0, a.period.min(0.5 * t_end));
    let mut s = String::new();
    let _ = writeln!(s, "port = {}", a.port.short());
    let _ = writeln!(s, "state = {}", a.state.short());
    let _ = writeln!(s, "activation_V = {act:e}");
    let _ = writeln!(s, "input_amplitude_V = {:e}", a.amp);
    let _ = writeln!(s, "output_swing_V = {swing:e}");
    let _ = writeln!(s, "swing_ratio = {:e}", swing / a.amp);
    let mut out = vec![
        Output::csv("switch_trace.csv", trace_table(&tr)),
        Output::text("switch_report.txt", s),
    ];
    if ctx.plot {
        out.push(Output::svg(
            "switch_trace.svg",
            trace_plot(&format!("Switch, {} state", a.state), &tr),
        ));
    }
    Ok(out)
}

fn circuit_lut(a: &LutArgs, ctx: &Ctx) -> Result<Vec<Output>> {
    let cfg = circuit_config(CircuitConfig::lut(ctx.dev), ctx)?;
    let (idle, read) = match (a.idle, a.read) {
        (Some(i), Some(r)) => (i, r),
        (i, r) => {
            let (di, dr) = lut_gate_levels(&ctx.dev, a.port)?;
            (i.unwrap_or(di), r.unwrap_or(dr))
        }
    };
    let (upper, lower) = if a.logic == 1 {
        (StoredState::LowVth, StoredState::HighVth)
    } else {
        (StoredState::HighVth, StoredState::LowVth)
    };
    let edge = a.t_read / 2000.0;
    let pulse = gate_pulse(idle, read, a.t_on, a.t_read, edge)?;
    let t_end = 2.0 * a.t_on + a.t_read;
    let tr = simulate_lut(&cfg, upper, lower, a.port, &pulse, t_end, false)?;
    let t_sample = a.t_on + a.t_read;
    let v_read = tr
        .rows
        .iter()
        .take_while(|r| r.0 <= t_sample)
        .last()
        .map_or(f64::NAN, |r| r.1[0]);
    let mut s = String::new();
    let _ = writeln!(s, "port = {}", a.port.short());
    let _ = writeln!(s, "logic = {}", a.logic);
    let _ = writeln!(s, "idle_V = {idle:e}");
    let _ = writeln!(s, "read_V = {read:e}");
    let _ = writeln!(s, "vdd_V = {:e}", cfg.vdd);
    let _ = writeln!(s, "output_V = {v_read:e}");
    let _ = writeln!(s, "output_fraction = {:e}", v_read / cfg.vdd);
    let mut out = vec![
        Output::csv("lut_trace.csv", trace_table(&tr)),
        Output::text("lut_report.txt", s),
    ];
    if ctx.plot {
        out.push(Output::svg(
            "lut_trace.svg",
            trace_plot(&format!("Look-up table cell, logic {}", a.logic), &tr),
        ));
    }
    Ok(out)
}

fn circuit_ro(a: &RingArgs, ctx: &Ctx) -> Result<Vec<Output>> {
    let mut cfg = circuit_config(CircuitConfig::ring(ctx.dev, a.stages), ctx)?;
    if let Some(n) = a.fefet_stages {
        cfg.fefet_stages = n;
        cfg.validate()?;
    }
    let res = simulate_ring_oscillator(&cfg, a.write)?;
    let mut s = String::new();
    let _ = writeln!(s, "stages = {}", a.stages);
    let _ = writeln!(s, "fefet_stages = {}", cfg.fefet_stages);
    let _ = writeln!(s, "write_V = {:e}", a.write);
    let _ = writeln!(s, "polarization_Cpm2 = {:e}", res.p);
    let _ = writeln!(s, "frequency_Hz = {:e}", res.frequency);
    let _ = writeln!(s, "period_s = {:e}", 1.0 / res.frequency);
    let mut out = vec![
        Output::csv("ro_trace.csv", trace_table(&res.trace)),
        Output::text("ro_report.txt", s),
    ];
    if ctx.plot {
        out.push(Output::svg(
            "ro_trace.svg",
            trace_plot(&format!("{}-stage ring, {} V write", a.stages, a.write), &res.trace),
        ));
    }
    Ok(out)
}

/// Reads `key = value` lines of a report written by this module.
pub fn parse_report(text: &str) -> Vec<(String, String)> {
    text.lines()
        .take_while(|l| !l.trim().is_empty())
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}
