//! Linear-region drain current, transfer sweeps and threshold extraction.

use rayon::prelude::*;
use serde::Serialize;

use crate::electrostatics::{linspace, solve_operating_point, ElectrostaticSolution};
use crate::error::{Error, Result};
use crate::params::{DeviceParams, PortId};
use crate::polarization::{apply_waveform, init_ensemble, DtPolicy, DomainEnsemble, InitialState, Waveform};

/// Drain bias used for every read in the crate.
pub const READ_VDS: f64 = 0.1;

/// Seed for ensembles created internally when the caller does not supply one.
pub const DEFAULT_SEED: u64 = 0x5eed;

pub fn drain_current(dev: &DeviceParams, sol: &ElectrostaticSolution, v_ds: f64) -> Result<f64> {
    if !(v_ds >= 0.0) {
        return Err(Error::Domain(format!("drain bias must be non-negative, got {v_ds}")));
    }
    Ok(dev.mobility_factor * dev.w_over_l() * sol.q_ch.abs() / dev.q_ch_scale * v_ds)
}

/// Programmed memory state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
pub enum StoredState {
    LowVth,
    HighVth,
}

impl StoredState {
    pub fn short(self) -> &'static str {
        match self {
            StoredState::LowVth => "low",
            StoredState::HighVth => "high",
        }
    }

    /// Write-gate amplitude of the standard 1 us program pulse.
    pub fn write_amp(self) -> f64 {
        match self {
            StoredState::LowVth => 4.0,
            StoredState::HighVth => -4.0,
        }
    }

    pub fn ideal_polarization(self, dev: &DeviceParams) -> f64 {
        match self {
            StoredState::LowVth => dev.p_r,
            StoredState::HighVth => -dev.p_r,
        }
    }

    pub fn complement(self) -> Self {
        match self {
            StoredState::LowVth => StoredState::HighVth,
            StoredState::HighVth => StoredState::LowVth,
        }
    }
}

impl std::fmt::Display for StoredState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.short())
    }
}

impl std::str::FromStr for StoredState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "low" | "lowvth" | "low-vth" => Ok(StoredState::LowVth),
            "high" | "highvth" | "high-vth" => Ok(StoredState::HighVth),
            other => Err(Error::Config(format!("unknown state `{other}` (expected low or high)"))),
        }
    }
}

/// Width of the standard program pulse.
pub const WRITE_PW: f64 = 1e-6;

/// Programs `state` into a fresh depolarized ensemble with the standard write-gate pulse.
pub fn write_state(dev: &DeviceParams, state: StoredState, seed: u64) -> Result<DomainEnsemble> {
    let ens = init_ensemble(dev, InitialState::Mixed(0.5), seed)?;
    let pulse = Waveform::write_pulse(state.write_amp(), WRITE_PW);
    let (mut ens, _) = apply_waveform(dev, ens, &pulse, DtPolicy::default())?;
    ens.reset_accumulators();
    Ok(ens)
}

/// Current level that defines the threshold voltage.
pub fn vth_criterion(dev: &DeviceParams) -> f64 {
    1e-7 * dev.w_over_l()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IVCurve {
    pub port: PortId,
    pub rows: Vec<(f64, f64)>,
    pub v_ds: f64,
    pub p: f64,
}

impl IVCurve {
    pub fn current_range(&self) -> (f64, f64) {
        self.rows
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.1), hi.max(r.1)))
    }
}

pub fn id_vg_sweep(
    dev: &DeviceParams,
    p: f64,
    port: PortId,
    v_start: f64,
    v_stop: f64,
    n: usize,
    v_ds: f64,
) -> Result<IVCurve> {
    if n < 2 || !(v_stop > v_start) {
        return Err(Error::Domain(format!(
            "sweep needs n >= 2 and v_stop > v_start (got n = {n}, {v_start}..{v_stop})"
        )));
    }
    let rows = linspace(v_start, v_stop, n)
        .into_par_iter()
        .map(|v| {
            let (wg, rg) = port.biases(v);
            let sol = solve_operating_point(dev, p, wg, rg)
                .map_err(|e| e.context(format!("{port} sweep at {v} V")))?;
            Ok((v, drain_current(dev, &sol, v_ds)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IVCurve { port, rows, v_ds, p })
}

/// Gate voltage at which the curve first crosses `1e-7 * width / length`.
pub fn extract_vth(curve: &IVCurve, width: f64, length: f64) -> Result<f64> {
    let target = 1e-7 * width / length;
    let rows = &curve.rows;
    if let Some(r) = rows.iter().find(|r| r.1 == target) {
        return Ok(r.0);
    }
    for w in rows.windows(2) {
        let ((v0, i0), (v1, i1)) = (w[0], w[1]);
        if i0 < target && i1 > target {
            if i0 > 0.0 {
                let s = (target.ln() - i0.ln()) / (i1.ln() - i0.ln());
                return Ok(v0 + s * (v1 - v0));
            }
            return Ok(v0 + (target - i0) / (i1 - i0) * (v1 - v0));
        }
    }
    let (lo, hi) = curve.current_range();
    Err(Error::Extraction(format!(
        "criterion {target:e} A not crossed; curve spans {lo:e}..{hi:e} A"
    )))
}

pub fn default_read_range(port: PortId) -> (f64, f64) {
    match port {
        PortId::WriteGate => (-4.0, 4.0),
        PortId::ReadGate => (-20.0, 25.0),
    }
}

/// Threshold voltage of a frozen polarization, read from `port` with the other gate grounded.
///
/// A coarse sweep brackets the crossing (widening the range when needed) and
/// a fine sweep across the bracket sets the final value.
pub fn threshold_voltage(dev: &DeviceParams, p: f64, port: PortId) -> Result<f64> {
    let (mut lo, mut hi) = default_read_range(port);
    let target = vth_criterion(dev);
    for _ in 0..6 {
        let coarse = id_vg_sweep(dev, p, port, lo, hi, 65, READ_VDS)?;
        let (imin, imax) = coarse.current_range();
        if imin < target && imax > target {
            let k = coarse.rows.partition_point(|r| r.1 < target);
            let a = coarse.rows[k.saturating_sub(1)].0;
            let b = coarse.rows[k.min(coarse.rows.len() - 1)].0;
            let fine = id_vg_sweep(dev, p, port, a, b.max(a + 1e-9), 65, READ_VDS)?;
            return extract_vth(&fine, dev.width, dev.length);
        }
        let span = hi - lo;
        if imin >= target {
            lo -= span;
        }
        if imax <= target {
            hi += span;
        }
    }
    let curve = id_vg_sweep(dev, p, port, lo, hi, 65, READ_VDS)?;
    extract_vth(&curve, dev.width, dev.length)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MemoryWindow {
    pub vth_low: f64,
    pub vth_high: f64,
    pub mw: f64,
}

impl MemoryWindow {
    pub fn new(vth_low: f64, vth_high: f64) -> Self {
        MemoryWindow {
            vth_low,
            vth_high,
            mw: vth_high - vth_low,
        }
    }
}

/// Window between two frozen polarizations read from `port`.
pub fn window_between(dev: &DeviceParams, port: PortId, p_low: f64, p_high: f64) -> Result<MemoryWindow> {
    let lo = threshold_voltage(dev, p_low, port).map_err(|e| e.context("low-threshold state"))?;
    let hi = threshold_voltage(dev, p_high, port).map_err(|e| e.context("high-threshold state"))?;
    Ok(MemoryWindow::new(lo, hi))
}

/// Applies `write_plus` and `write_minus` to copies of `ens` and reads both states.
pub fn memory_window_from(
    dev: &DeviceParams,
    port: PortId,
    ens: &DomainEnsemble,
    write_plus: &Waveform,
    write_minus: &Waveform,
) -> Result<MemoryWindow> {
    let policy = DtPolicy::default();
    let (plus, _) = apply_waveform(dev, ens.clone(), write_plus, policy)?;
    let (minus, _) = apply_waveform(dev, ens.clone(), write_minus, policy)?;
    window_between(dev, port, plus.polarization(), minus.polarization())
}

/// Writes each state into a fresh depolarized ensemble and reads the window.
pub fn memory_window(
    dev: &DeviceParams,
    port: PortId,
    write_plus: &Waveform,
    write_minus: &Waveform,
) -> Result<MemoryWindow> {
    let ens = init_ensemble(dev, InitialState::Mixed(0.5), DEFAULT_SEED)?;
    memory_window_from(dev, port, &ens, write_plus, write_minus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{default_fdsoi22, EPS0};
    use proptest::prelude::*;

    /// Closed-form threshold: invert the transport law for the inversion
    /// charge, then close the potential loop at that surface potential.
    fn analytic_vth(d: &DeviceParams, p: f64, port: PortId) -> f64 {
        let vt = 1.380_649e-23 * d.temperature / 1.602_176_634e-19;
        let q_needed = 1e-7 * d.q_ch_scale / (d.mobility_factor * READ_VDS);
        // softplus inverse
        let x = (q_needed / (d.q_ch_scale * vt)).exp_m1().ln();
        let psi = d.psi_on + vt * x;
        let q_acc = d.q_ch_scale * vt * ((d.psi_acc - psi) / vt).exp().ln_1p();
        let q_body = -q_needed + q_acc;
        let c_fe = EPS0 * d.eps_fe / d.t_fe;
        let c_il = EPS0 * d.eps_il / d.t_il;
        let c_box = EPS0 * d.eps_box / d.t_box;
        match port {
            PortId::WriteGate => {
                let d_il = c_box * (psi + d.vfb_back) - q_body;
                d.vfb_front + (d_il - p) / c_fe + d_il / c_il + psi
            }
            PortId::ReadGate => {
                // D_il fixed by the grounded write gate
                let d_il = (-d.vfb_front - psi + p / c_fe) / (1.0 / c_fe + 1.0 / c_il);
                let v_b = psi - (d_il + q_body) / c_box;
                v_b + d.vfb_back
            }
        }
    }

    #[test]
    fn zero_channel_gives_zero_current() {
        let d = default_fdsoi22();
        let mut s = solve_operating_point(&d, 0.0, -3.0, 0.0).unwrap();
        s.q_ch = 0.0;
        assert_eq!(drain_current(&d, &s, 0.1).unwrap(), 0.0);
        assert!(drain_current(&d, &s, -0.1).is_err());
    }

    #[test]
    fn current_linear_in_vds() {
        let d = default_fdsoi22();
        let s = solve_operating_point(&d, 0.0, 1.5, 0.0).unwrap();
        let a = drain_current(&d, &s, 0.05).unwrap();
        let b = drain_current(&d, &s, 0.1).unwrap();
        assert!((b - 2.0 * a).abs() <= 1e-12 * b);
    }

    #[test]
    fn deep_inversion_in_microamp_range() {
        let d = default_fdsoi22();
        let s = solve_operating_point(&d, d.p_r, 2.0, 0.0).unwrap();
        let i = drain_current(&d, &s, 0.1).unwrap();
        let expected = d.mobility_factor * s.q_ch.abs() / d.q_ch_scale * 0.1;
        assert!((i - expected).abs() < 1e-12 * expected);
        assert!((1e-7..1e-4).contains(&i), "i = {i}");
    }

    #[test]
    fn vth_matches_closed_form() {
        let d = default_fdsoi22();
        for port in [PortId::WriteGate, PortId::ReadGate] {
            for p in [-d.p_r, 0.0, d.p_r] {
                let got = threshold_voltage(&d, p, port).unwrap();
                let want = analytic_vth(&d, p, port);
                assert!((got - want).abs() < 2e-3, "{port} p={p}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn window_widths() {
        let d = default_fdsoi22();
        let wg = window_between(&d, PortId::WriteGate, d.p_r, -d.p_r).unwrap();
        assert!((wg.mw - 1.5).abs() < 0.1, "{wg:?}");
        let rg = window_between(&d, PortId::ReadGate, d.p_r, -d.p_r).unwrap();
        let ratio = rg.mw / wg.mw;
        assert!((ratio / d.eot_ratio() - 1.0).abs() < 0.15);
        let mid = threshold_voltage(&d, 0.0, PortId::WriteGate).unwrap();
        assert!(wg.vth_low < mid && mid < wg.vth_high);
    }

    #[test]
    fn extraction_on_sample_and_error() {
        let c = IVCurve {
            port: PortId::WriteGate,
            rows: vec![(0.0, 1e-9), (0.1, 1e-7), (0.2, 1e-5)],
            v_ds: 0.1,
            p: 0.0,
        };
        assert_eq!(extract_vth(&c, 1.0, 1.0).unwrap(), 0.1);
        let low = IVCurve {
            rows: vec![(0.0, 1e-12), (1.0, 1e-11)],
            ..c
        };
        match extract_vth(&low, 1.0, 1.0) {
            Err(Error::Extraction(m)) => assert!(m.contains("1e-11")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn standard_writes_saturate() {
        let d = default_fdsoi22();
        let lo = write_state(&d, StoredState::LowVth, 1).unwrap();
        let hi = write_state(&d, StoredState::HighVth, 1).unwrap();
        assert_eq!(lo.polarization(), d.p_r);
        assert_eq!(hi.polarization(), -d.p_r);
        assert_eq!("HIGH".parse::<StoredState>().unwrap(), StoredState::HighVth);
    }

    #[test]
    fn identical_writes_give_zero_window() {
        let d = default_fdsoi22();
        let w = Waveform::write_pulse(4.0, 1e-6);
        let m = memory_window(&d, PortId::WriteGate, &w, &w).unwrap();
        assert_eq!(m.mw, 0.0);
    }

    #[test]
    fn sweep_density_invariance() {
        let d = default_fdsoi22();
        let a = id_vg_sweep(&d, 0.0, PortId::WriteGate, -2.0, 2.0, 65, READ_VDS).unwrap();
        let b = id_vg_sweep(&d, 0.0, PortId::WriteGate, -2.0, 2.0, 257, READ_VDS).unwrap();
        let va = extract_vth(&a, d.width, d.length).unwrap();
        let vb = extract_vth(&b, d.width, d.length).unwrap();
        assert!((va - vb).abs() < 5e-3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn vth_decreases_with_polarization(a in -1.0f64..1.0, b in -1.0f64..1.0) {
            prop_assume!((a - b).abs() > 0.05);
            let d = default_fdsoi22();
            let va = threshold_voltage(&d, a * d.p_r, PortId::WriteGate).unwrap();
            let vb = threshold_voltage(&d, b * d.p_r, PortId::WriteGate).unwrap();
            prop_assert_eq!(a < b, va > vb);
        }

        #[test]
        fn curves_monotone(p in -1.0f64..1.0, rg in proptest::bool::ANY) {
            let d = default_fdsoi22();
            let port = if rg { PortId::ReadGate } else { PortId::WriteGate };
            let (lo, hi) = default_read_range(port);
            let c = id_vg_sweep(&d, p * d.p_r, port, lo, hi, 33, READ_VDS).unwrap();
            for w in c.rows.windows(2) {
                prop_assert!(w[1].0 > w[0].0);
                prop_assert!(w[0].1 >= 0.0 && w[1].1 >= w[0].1);
            }
        }

        #[test]
        fn translation_equivariance(shift in -1.0f64..1.0) {
            let d = default_fdsoi22();
            let c = id_vg_sweep(&d, 0.0, PortId::WriteGate, -2.0, 2.0, 81, READ_VDS).unwrap();
            let base = extract_vth(&c, d.width, d.length).unwrap();
            let moved = IVCurve { rows: c.rows.iter().map(|r| (r.0 + shift, r.1)).collect(), ..c.clone() };
            let v = extract_vth(&moved, d.width, d.length).unwrap();
            prop_assert!((v - base - shift).abs() < 1e-9);
        }
    }
}
