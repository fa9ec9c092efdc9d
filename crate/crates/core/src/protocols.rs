//! Characterization protocols: pulse maps, iso-window curves, switching-law
//! fits, read-stress experiments and retention extraction.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::device::{threshold_voltage, write_state, StoredState, DEFAULT_SEED};
use crate::error::{Error, Result};
use crate::params::{DeviceParams, PortId};
use crate::polarization::{apply_waveform, DomainEnsemble, DtPolicy, Evolver, Waveform};

/// Ten years in seconds.
pub const TEN_YEARS: f64 = 3.15e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Scenario {
    /// Start in the low-threshold state and apply reset pulses.
    FromLow,
    /// Start in the high-threshold state and apply set pulses.
    FromHigh,
}

impl Scenario {
    pub fn short(self) -> &'static str {
        match self {
            Scenario::FromLow => "from_low",
            Scenario::FromHigh => "from_high",
        }
    }

    pub fn initial(self) -> StoredState {
        match self {
            Scenario::FromLow => StoredState::LowVth,
            Scenario::FromHigh => StoredState::HighVth,
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "from_low" | "low" => Ok(Scenario::FromLow),
            "from_high" | "high" => Ok(Scenario::FromHigh),
            other => Err(Error::Config(format!(
                "unknown scenario `{other}` (expected from-low or from-high)"
            ))),
        }
    }
}

/// Window opened by a single write pulse, indexed `mw[amp][pw]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MwMap {
    pub amp_axis: Vec<f64>,
    pub pw_axis: Vec<f64>,
    pub mw: Vec<Vec<f64>>,
    pub scenario: Scenario,
}

fn strictly_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] > w[0])
}

/// Threshold voltages keyed by net domain count; the ensemble only ever
/// realizes `n + 1` distinct polarizations.
struct VthCache<'a> {
    dev: &'a DeviceParams,
    port: PortId,
    map: HashMap<i64, f64>,
}

impl<'a> VthCache<'a> {
    fn new(dev: &'a DeviceParams, port: PortId) -> Self {
        VthCache {
            dev,
            port,
            map: HashMap::new(),
        }
    }

    fn get(&mut self, ens: &DomainEnsemble) -> Result<f64> {
        let key = ens.net_sign();
        if let Some(&v) = self.map.get(&key) {
            return Ok(v);
        }
        let v = threshold_voltage(self.dev, ens.polarization(), self.port)?;
        self.map.insert(key, v);
        Ok(v)
    }
}

fn map_cell(dev: &DeviceParams, start: &DomainEnsemble, vth0: f64, scenario: Scenario, amp: f64, pw: f64) -> Result<f64> {
    let pulse = Waveform::write_pulse(amp, pw);
    let (ens, _) = apply_waveform(dev, start.clone(), &pulse, DtPolicy::default())?;
    let vth = threshold_voltage(dev, ens.polarization(), PortId::WriteGate)?;
    Ok(match scenario {
        Scenario::FromLow => vth - vth0,
        Scenario::FromHigh => vth0 - vth,
    })
}

/// Write-gate window opened by every (amplitude, width) pulse from the
/// scenario's initial state. Failed cells become NaN and are logged.
pub fn mw_contour(dev: &DeviceParams, amps: &[f64], pws: &[f64], scenario: Scenario) -> Result<MwMap> {
    mw_contour_seeded(dev, amps, pws, scenario, DEFAULT_SEED)
}

pub fn mw_contour_seeded(
    dev: &DeviceParams,
    amps: &[f64],
    pws: &[f64],
    scenario: Scenario,
    seed: u64,
) -> Result<MwMap> {
    if amps.is_empty() || pws.is_empty() {
        return Err(Error::Domain("map axes must be non-empty".into()));
    }
    if !strictly_increasing(amps) || !strictly_increasing(pws) || pws[0] <= 0.0 {
        return Err(Error::Domain(
            "map axes must be strictly increasing with positive pulse widths".into(),
        ));
    }
    let start = write_state(dev, scenario.initial(), seed)?;
    let vth0 = threshold_voltage(dev, start.polarization(), PortId::WriteGate)?;
    let cells: Vec<(usize, usize)> = (0..amps.len())
        .flat_map(|i| (0..pws.len()).map(move |j| (i, j)))
        .collect();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(i, j)| {
            map_cell(dev, &start, vth0, scenario, amps[i], pws[j]).unwrap_or_else(|e| {
                log::warn!("map cell amp = {} V, pw = {:e} s failed: {e}", amps[i], pws[j]);
                f64::NAN
            })
        })
        .collect();
    let mw = values.chunks(pws.len()).map(|r| r.to_vec()).collect();
    Ok(MwMap {
        amp_axis: amps.to_vec(),
        pw_axis: pws.to_vec(),
        mw,
        scenario,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsoCurve {
    pub level: f64,
    pub points: Vec<(f64, f64)>,
    /// Why the curve is empty, when it is.
    pub reason: Option<String>,
}

/// Pulse width needed to reach `level` for each amplitude row, interpolated
/// linearly in log time. Rows that never cross are left out.
pub fn iso_mw_curve(map: &MwMap, level: f64) -> IsoCurve {
    let mut points = Vec::new();
    for (amp, row) in map.amp_axis.iter().zip(&map.mw) {
        let crossing = row.windows(2).zip(map.pw_axis.windows(2)).find_map(|(m, t)| {
            if m[0] < level && m[1] >= level {
                let s = (level - m[0]) / (m[1] - m[0]);
                let lt = t[0].ln() + s * (t[1].ln() - t[0].ln());
                Some(lt.exp())
            } else {
                None
            }
        });
        if let Some(pw) = crossing {
            points.push((*amp, pw));
        }
    }
    let reason = if points.is_empty() {
        let max = map
            .mw
            .iter()
            .flatten()
            .copied()
            .filter(|v| v.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        Some(format!("no row crosses {level} V (largest window {max} V)"))
    } else {
        None
    };
    IsoCurve { level, points, reason }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NlsFit {
    pub tau0: f64,
    pub alpha: f64,
    pub v_offset: f64,
    pub rms_log_residual: f64,
}

impl NlsFit {
    pub fn predict(&self, v: f64) -> f64 {
        crate::polarization::nls_switching_time(self.tau0, self.alpha, self.v_offset, v)
    }
}

/// Linear least squares of `y = a + b x` at one offset. Returns (a, b, sse).
fn fit_at_offset(points: &[(f64, f64)], vo: f64) -> Option<(f64, f64, f64)> {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| (p.0 - vo).powi(-2)).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let b = sxy / sxx;
    if !(b > 0.0) {
        return None;
    }
    let a = my - b * mx;
    let sse = xs.iter().zip(&ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    Some((a, b, sse))
}

/// Least-squares fit of `pw = tau0 * exp((alpha / (v - v_offset))^2)` in log time.
///
/// The offset is scanned on a grid below the smallest amplitude; at each
/// candidate the model is linear in `ln tau0` and `alpha^2`. The best grid
/// point is polished with a golden-section search.
pub fn fit_nls(points: &[(f64, f64)]) -> Result<NlsFit> {
    if points.len() < 4 {
        return Err(Error::Fit(format!(
            "need at least 4 points, got {}",
            points.len()
        )));
    }
    if let Some(p) = points.iter().find(|p| !(p.1 > 0.0) || !p.0.is_finite()) {
        return Err(Error::Domain(format!("pulse widths must be positive, got {:?}", p)));
    }
    let vmin = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let vmax = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let span = vmax - vmin;
    if !(span > 0.0) {
        return Err(Error::Fit("all amplitudes are equal".into()));
    }
    let hi = vmin - 1e-3 * span;
    let lo = (vmin - 4.0 * span - 1.0).min(0.0);
    const GRID: usize = 600;
    let grid: Vec<f64> = (0..GRID)
        .map(|k| lo + (hi - lo) * k as f64 / (GRID - 1) as f64)
        .collect();
    let sse = |vo: f64| fit_at_offset(points, vo).map_or(f64::INFINITY, |f| f.2);
    let (kbest, _) = grid
        .iter()
        .enumerate()
        .map(|(k, &vo)| (k, sse(vo)))
        .fold((usize::MAX, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    if kbest == usize::MAX {
        return Err(Error::Fit("no offset gives a positive alpha".into()));
    }
    let mut a = grid[kbest.saturating_sub(1)];
    let mut b = grid[(kbest + 1).min(GRID - 1)];
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (sse(c), sse(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-13 * (1.0 + a.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = sse(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = sse(d);
        }
    }
    let mut vo = 0.5 * (a + b);
    if sse(vo) > sse(grid[kbest]) {
        vo = grid[kbest];
    }
    let (ln_tau0, alpha2, s) =
        fit_at_offset(points, vo).ok_or_else(|| Error::Fit("refinement left the feasible region".into()))?;
    Ok(NlsFit {
        tau0: ln_tau0.exp(),
        alpha: alpha2.sqrt(),
        v_offset: vo,
        rms_log_residual: (s / points.len() as f64).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetentionTrace {
    pub stress_v: f64,
    pub port: PortId,
    pub state: StoredState,
    /// Threshold right after programming, before any stress.
    pub vth_initial: f64,
    /// (stress time, threshold voltage) at each checkpoint.
    pub rows: Vec<(f64, f64)>,
}

impl RetentionTrace {
    pub fn max_shift(&self) -> f64 {
        let v0 = self.vth_initial;
        self.rows.iter().map(|r| (r.1 - v0).abs()).fold(0.0, f64::max)
    }

    pub fn shift_at_end(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.1 - self.vth_initial)
    }

    /// Absolute threshold shift at the last checkpoint not after `t`.
    pub fn shift_at(&self, t: f64) -> f64 {
        self.rows
            .iter()
            .take_while(|r| r.0 <= t * (1.0 + 1e-12))
            .last()
            .map_or(0.0, |r| (r.1 - self.vth_initial).abs())
    }
}

/// `per_decade` log-spaced times from `t_min` to `t_max` inclusive.
pub fn log_times(t_min: f64, t_max: f64, per_decade: usize) -> Vec<f64> {
    let decades = (t_max / t_min).log10();
    let n = (decades * per_decade as f64).round() as usize;
    (0..=n)
        .map(|k| t_min * 10f64.powf(decades * k as f64 / n.max(1) as f64))
        .collect()
}

/// Eight checkpoints per decade from 0.1 us to 1000 s.
pub fn default_stress_times() -> Vec<f64> {
    log_times(1e-7, 1e3, 8)
}

fn check_times(ts: &[f64]) -> Result<()> {
    if ts.is_empty() || !(ts[0] > 0.0) || !strictly_increasing(ts) {
        return Err(Error::Domain(
            "stress times must be positive and strictly increasing".into(),
        ));
    }
    Ok(())
}

fn stress_trace(
    dev: &DeviceParams,
    port: PortId,
    state: StoredState,
    stress_v: f64,
    stress_ts: &[f64],
    seed: u64,
) -> Result<RetentionTrace> {
    let ens = write_state(dev, state, seed)?;
    let mut vth = VthCache::new(dev, PortId::WriteGate);
    let vth_initial = vth.get(&ens)?;
    let mut rows = Vec::with_capacity(stress_ts.len());
    let mut ev = Evolver::new(dev, ens, DtPolicy::default())?;
    let (wg, rg) = port.biases(stress_v);
    for &t in stress_ts {
        ev.hold(wg, rg, t, 0.0)
            .map_err(|e| e.context(format!("stress {stress_v} V up to {t:e} s")))?;
        let v = vth
            .get(&ev.ens)
            .map_err(|e| e.context(format!("stress {stress_v} V at {t:e} s")))?;
        rows.push((t, v));
    }
    Ok(RetentionTrace {
        stress_v,
        port,
        state,
        vth_initial,
        rows,
    })
}

/// Writes `state`, then holds each stress on `port` and samples the
/// write-gate threshold at every checkpoint.
pub fn read_disturb_experiment(
    dev: &DeviceParams,
    port: PortId,
    state: StoredState,
    stress_vs: &[f64],
    stress_ts: &[f64],
) -> Result<Vec<RetentionTrace>> {
    read_disturb_seeded(dev, port, state, stress_vs, stress_ts, DEFAULT_SEED)
}

pub fn read_disturb_seeded(
    dev: &DeviceParams,
    port: PortId,
    state: StoredState,
    stress_vs: &[f64],
    stress_ts: &[f64],
    seed: u64,
) -> Result<Vec<RetentionTrace>> {
    check_times(stress_ts)?;
    stress_vs
        .par_iter()
        .map(|&v| stress_trace(dev, port, state, v, stress_ts, seed))
        .collect()
}

/// First stress time at which the threshold has moved by
/// `vth_loss_fraction` of the fresh window, or `cap` if it never does.
pub fn retention_time(
    dev: &DeviceParams,
    port: PortId,
    state: StoredState,
    stress_v: f64,
    vth_loss_fraction: f64,
    cap: f64,
) -> Result<f64> {
    retention_time_seeded(dev, port, state, stress_v, vth_loss_fraction, cap, DEFAULT_SEED)
}

pub fn retention_time_seeded(
    dev: &DeviceParams,
    port: PortId,
    state: StoredState,
    stress_v: f64,
    vth_loss_fraction: f64,
    cap: f64,
    seed: u64,
) -> Result<f64> {
    if !(vth_loss_fraction > 0.0 && vth_loss_fraction < 1.0) {
        return Err(Error::Domain(format!(
            "loss fraction must lie in (0, 1), got {vth_loss_fraction}"
        )));
    }
    if !(cap > 0.0) {
        return Err(Error::Domain(format!("horizon must be positive, got {cap}")));
    }
    let ens = write_state(dev, state, seed)?;
    let other = write_state(dev, state.complement(), seed)?;
    let mut vth = VthCache::new(dev, PortId::WriteGate);
    let v0 = vth.get(&ens)?;
    let mw0 = (vth.get(&other)? - v0).abs();
    let limit = vth_loss_fraction * mw0;
    let (wg, rg) = port.biases(stress_v);
    let mut ev = Evolver::new(dev, ens, DtPolicy::default())?;
    let hit = ev
        .hold_until(wg, rg, cap, 0.0, |e, _| Ok((vth.get(e)? - v0).abs() >= limit))
        .map_err(|e| e.context(format!("retention at {stress_v} V")))?;
    Ok(hit.unwrap_or(cap))
}
