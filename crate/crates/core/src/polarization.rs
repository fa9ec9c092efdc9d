//! Multi-domain ferroelectric state driven by nucleation-limited switching.
//!
//! Each domain carries a fixed offset voltage drawn once per ensemble and a
//! hazard accumulator. Under a field opposing its polarization the
//! accumulator grows by `dt / tau(v_fe)`; the domain flips when it reaches 1.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::electrostatics::{solve_with_guess, ElectrostaticSolution};
use crate::error::{Error, Result};
use crate::params::{DeviceParams, PortId};

/// Switching time `tau0 * exp((alpha / (v_app - v_offset))^2)`; infinite when
/// there is no overdrive.
pub fn nls_switching_time(tau0: f64, alpha: f64, v_offset: f64, v_app: f64) -> f64 {
    let over = v_app - v_offset;
    if over <= 0.0 || over.is_nan() {
        return f64::INFINITY;
    }
    let x = alpha / over;
    tau0 * (x * x).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitialState {
    AllUp,
    AllDown,
    /// Fraction of domains pointing up (toward the channel).
    Mixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainEnsemble {
    pub sign: Vec<i8>,
    pub v_offset: Vec<f64>,
    pub accum: Vec<f64>,
    pub seed: u64,
    p_r: f64,
    field_dir: i8,
}

impl DomainEnsemble {
    pub fn n(&self) -> usize {
        self.sign.len()
    }

    pub fn net_sign(&self) -> i64 {
        self.sign.iter().map(|&s| s as i64).sum()
    }

    /// Net polarization, C/m^2.
    pub fn polarization(&self) -> f64 {
        self.p_r * self.net_sign() as f64 / self.n() as f64
    }

    /// Clears every accumulator, e.g. before handing the ensemble to a new protocol.
    pub fn reset_accumulators(&mut self) {
        self.accum.iter_mut().for_each(|a| *a = 0.0);
        self.field_dir = 0;
    }
}

pub fn init_ensemble(dev: &DeviceParams, initial: InitialState, seed: u64) -> Result<DomainEnsemble> {
    let n = dev.n_domains;
    let sign = match initial {
        InitialState::AllUp => vec![1; n],
        InitialState::AllDown => vec![-1; n],
        InitialState::Mixed(f) => {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Domain(format!("mixed fraction {f} outside [0, 1]")));
            }
            let n_up = (f * n as f64).round() as usize;
            (0..n).map(|i| if i < n_up { 1 } else { -1 }).collect()
        }
    };
    let v_offset = sample_offsets(dev, seed);
    Ok(DomainEnsemble {
        sign,
        v_offset,
        accum: vec![0.0; n],
        seed,
        p_r: dev.p_r,
        field_dir: 0,
    })
}

fn sample_offsets(dev: &DeviceParams, seed: u64) -> Vec<f64> {
    let n = dev.n_domains;
    let mean = dev.v_offset_mean;
    let sigma = dev.v_offset_sigma;
    if sigma == 0.0 {
        return vec![mean; n];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(mean, sigma).expect("sigma validated >= 0");
    (0..n)
        .map(|_| loop {
            let v: f64 = normal.sample(&mut rng);
            if (v - mean).abs() <= 3.0 * sigma {
                break v;
            }
        })
        .collect()
}

/// Advances every domain by `dt` under the FE voltage `v_fe = e_fe * t_fe`.
pub fn step_ensemble(dev: &DeviceParams, ens: &mut DomainEnsemble, v_fe: f64, dt: f64) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("time step must be positive, got {dt}")));
    }
    if v_fe == 0.0 || v_fe.is_nan() {
        return Ok(());
    }
    let dir: i8 = if v_fe > 0.0 { 1 } else { -1 };
    if ens.field_dir != 0 && ens.field_dir != dir {
        ens.accum.iter_mut().for_each(|a| *a = 0.0);
    }
    ens.field_dir = dir;
    let v = v_fe.abs();
    for i in 0..ens.sign.len() {
        if ens.sign[i] == dir {
            continue;
        }
        let tau = nls_switching_time(dev.tau0, dev.alpha, ens.v_offset[i], v);
        if !tau.is_finite() {
            continue;
        }
        ens.accum[i] += dt / tau;
        if ens.accum[i] >= 1.0 {
            ens.sign[i] = dir;
            ens.accum[i] = 0.0;
        }
    }
    Ok(())
}

/// Piecewise-linear voltage against time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pwl {
    pub points: Vec<(f64, f64)>,
}

impl Pwl {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Domain("waveform needs at least one breakpoint".into()));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Domain(format!(
                    "breakpoints must be strictly increasing in time ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::Domain("non-finite breakpoint".into()));
        }
        Ok(Pwl { points })
    }

    pub fn constant(v: f64) -> Self {
        Pwl { points: vec![(0.0, v)] }
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let pts = &self.points;
        if t <= pts[0].0 {
            return pts[0].1;
        }
        let last = pts[pts.len() - 1];
        if t >= last.0 {
            return last.1;
        }
        let k = pts.partition_point(|p| p.0 <= t);
        let (t0, v0) = pts[k - 1];
        let (t1, v1) = pts[k];
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    pub fn last_time(&self) -> f64 {
        self.points[self.points.len() - 1].0
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.1), hi.max(p.1)))
    }
}

/// Write-gate and read-gate stimulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub wg: Pwl,
    pub rg: Pwl,
    pub duration: f64,
}

/// Edge time used for rectangular pulses built by [`WaveformBuilder`].
pub const DEFAULT_EDGE: f64 = 1e-9;

impl Waveform {
    pub fn new(wg: Pwl, rg: Pwl, duration: f64) -> Result<Self> {
        let last = wg.last_time().max(rg.last_time());
        if !(duration >= last) || !duration.is_finite() {
            return Err(Error::Domain(format!(
                "duration {duration} shorter than last breakpoint {last}"
            )));
        }
        Ok(Waveform { wg, rg, duration })
    }

    pub fn zero(duration: f64) -> Self {
        Waveform {
            wg: Pwl::constant(0.0),
            rg: Pwl::constant(0.0),
            duration,
        }
    }

    pub fn at(&self, t: f64) -> (f64, f64) {
        (self.wg.value_at(t), self.rg.value_at(t))
    }

    /// Rectangular write-gate pulse with `edge` rise and fall times.
    pub fn write_pulse(amp: f64, width: f64) -> Self {
        WaveformBuilder::new().pulse(PortId::WriteGate, amp, width).build()
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self
            .wg
            .points
            .iter()
            .chain(self.rg.points.iter())
            .map(|p| p.0)
            .filter(|&t| t > 0.0 && t < self.duration)
            .collect();
        ts.push(0.0);
        ts.push(self.duration);
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }
}

/// Sequential construction of piecewise-linear stimuli on both gates.
#[derive(Debug, Clone)]
pub struct WaveformBuilder {
    t: f64,
    wg: Vec<(f64, f64)>,
    rg: Vec<(f64, f64)>,
    edge: f64,
}

impl Default for WaveformBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl WaveformBuilder {
    pub fn new() -> Self {
        WaveformBuilder {
            t: 0.0,
            wg: vec![(0.0, 0.0)],
            rg: vec![(0.0, 0.0)],
            edge: DEFAULT_EDGE,
        }
    }

    pub fn edge(mut self, edge: f64) -> Self {
        self.edge = edge;
        self
    }

    fn level(&self, port: PortId) -> f64 {
        match port {
            PortId::WriteGate => self.wg.last().unwrap().1,
            PortId::ReadGate => self.rg.last().unwrap().1,
        }
    }

    /// Ramps `port` to `v` over one edge time while holding the other port.
    pub fn ramp(mut self, port: PortId, v: f64) -> Self {
        let t1 = self.t + self.edge;
        let (wg, rg) = match port {
            PortId::WriteGate => (v, self.level(PortId::ReadGate)),
            PortId::ReadGate => (self.level(PortId::WriteGate), v),
        };
        self.wg.push((t1, wg));
        self.rg.push((t1, rg));
        self.t = t1;
        self
    }

    pub fn hold(mut self, duration: f64) -> Self {
        if duration > 0.0 {
            let t1 = self.t + duration;
            let (wg, rg) = (self.level(PortId::WriteGate), self.level(PortId::ReadGate));
            self.wg.push((t1, wg));
            self.rg.push((t1, rg));
            self.t = t1;
        }
        self
    }

    /// Edge up to `amp`, flat top of `width`, edge back to the previous level.
    pub fn pulse(self, port: PortId, amp: f64, width: f64) -> Self {
        let base = self.level(port);
        self.ramp(port, amp).hold(width).ramp(port, base)
    }

    pub fn now(&self) -> f64 {
        self.t
    }

    pub fn build(self) -> Waveform {
        let duration = self.t;
        Waveform {
            wg: Pwl { points: self.wg },
            rg: Pwl { points: self.rg },
            duration,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtPolicy {
    /// Largest step while a bias is ramping.
    pub max_step: f64,
    /// First step of a constant-bias segment.
    pub min_step: f64,
    /// Logarithmic sampling density during constant-bias segments.
    pub steps_per_decade: usize,
}

impl Default for DtPolicy {
    fn default() -> Self {
        DtPolicy {
            max_step: 1e-10,
            min_step: 1e-11,
            steps_per_decade: 32,
        }
    }
}

impl DtPolicy {
    pub fn refined(&self) -> Self {
        DtPolicy {
            max_step: self.max_step / 2.0,
            min_step: self.min_step / 2.0,
            steps_per_decade: self.steps_per_decade * 2,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.max_step > 0.0 && self.min_step > 0.0 && self.steps_per_decade >= 1) {
            return Err(Error::Domain(format!("invalid time-step policy {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub p: f64,
    pub e_fe: f64,
    pub psi_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
}

/// Time-marching state shared by waveform application and stress protocols.
pub struct Evolver<'a> {
    pub dev: &'a DeviceParams,
    pub ens: DomainEnsemble,
    pub t: f64,
    pub policy: DtPolicy,
    pub trajectory: Option<Trajectory>,
    psi_guess: Option<f64>,
}

impl<'a> Evolver<'a> {
    pub fn new(dev: &'a DeviceParams, ens: DomainEnsemble, policy: DtPolicy) -> Result<Self> {
        policy.validate()?;
        Ok(Evolver {
            dev,
            ens,
            t: 0.0,
            policy,
            trajectory: None,
            psi_guess: None,
        })
    }

    pub fn recording(mut self) -> Self {
        self.trajectory = Some(Trajectory::default());
        self
    }

    fn solve(&mut self, v_wg: f64, v_rg: f64) -> Result<ElectrostaticSolution> {
        let p = self.ens.polarization();
        let sol = solve_with_guess(self.dev, p, v_wg, v_rg, self.psi_guess)
            .map_err(|e| e.context(format!("t = {:e} s", self.t)))?;
        self.psi_guess = Some(sol.psi_s);
        Ok(sol)
    }

    fn step(&mut self, v_wg: f64, v_rg: f64, dt: f64) -> Result<()> {
        let sol = self.solve(v_wg, v_rg)?;
        if let Some(tr) = self.trajectory.as_mut() {
            tr.rows.push(TrajectoryRow {
                t: self.t,
                p: sol.p,
                e_fe: sol.e_fe,
                psi_s: sol.psi_s,
            });
        }
        step_ensemble(self.dev, &mut self.ens, sol.v_fe(self.dev), dt)?;
        self.t += dt;
        Ok(())
    }

    /// Holds constant biases from `self.t` to `until`, stepping on a
    /// logarithmic grid measured from `hold_start`.
    pub fn hold(&mut self, v_wg: f64, v_rg: f64, until: f64, hold_start: f64) -> Result<()> {
        self.hold_until(v_wg, v_rg, until, hold_start, |_, _| Ok(false))
            .map(|_| ())
    }

    /// Like [`Evolver::hold`], but checks `stop` after every step whose
    /// update changed the net polarization and returns the time it first
    /// answered true.
    pub fn hold_until<F>(
        &mut self,
        v_wg: f64,
        v_rg: f64,
        until: f64,
        hold_start: f64,
        mut stop: F,
    ) -> Result<Option<f64>>
    where
        F: FnMut(&DomainEnsemble, f64) -> Result<bool>,
    {
        let ratio = 10f64.powf(1.0 / self.policy.steps_per_decade as f64);
        let min_step = self.policy.min_step;
        let grid = |k: i32| hold_start + min_step * ratio.powi(k);
        let mut k = 0i32;
        while self.t < until {
            while grid(k) <= self.t * (1.0 + 1e-14) {
                k += 1;
            }
            let next = grid(k).min(until);
            let dt = next - self.t;
            let before = self.ens.net_sign();
            self.step(v_wg, v_rg, dt)?;
            self.t = next;
            if self.ens.net_sign() != before && stop(&self.ens, self.t)? {
                return Ok(Some(self.t));
            }
        }
        Ok(None)
    }

    /// Follows a linear ramp between two bias pairs using uniform steps.
    pub fn ramp(&mut self, from: (f64, f64), to: (f64, f64), until: f64) -> Result<()> {
        let t0 = self.t;
        let span = until - t0;
        if span <= 0.0 {
            return Ok(());
        }
        let n = ((span / self.policy.max_step).ceil() as usize).max(4);
        let dt = span / n as f64;
        for k in 0..n {
            let s = k as f64 / n as f64;
            let wg = from.0 + (to.0 - from.0) * s;
            let rg = from.1 + (to.1 - from.1) * s;
            self.step(wg, rg, dt)?;
        }
        self.t = until;
        Ok(())
    }

    /// Applies a waveform starting at the current time.
    pub fn run(&mut self, wf: &Waveform) -> Result<()> {
        let offset = self.t;
        let bps = wf.breakpoints();
        for seg in bps.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let va = wf.at(a);
            let vb = wf.at(b);
            if va == vb {
                self.hold(va.0, va.1, offset + b, offset + a)?;
            } else {
                self.ramp(va, vb, offset + b)?;
            }
        }
        Ok(())
    }

    /// Records the closing row and hands back the state.
    pub fn finish(mut self, final_bias: (f64, f64)) -> Result<(DomainEnsemble, Trajectory)> {
        if self.trajectory.is_some() {
            let sol = self.solve(final_bias.0, final_bias.1)?;
            let t = self.t;
            let tr = self.trajectory.as_mut().unwrap();
            if tr.rows.last().map_or(true, |r| r.t < t) {
                tr.rows.push(TrajectoryRow {
                    t,
                    p: sol.p,
                    e_fe: sol.e_fe,
                    psi_s: sol.psi_s,
                });
            }
        }
        Ok((self.ens, self.trajectory.unwrap_or_default()))
    }
}

/// Evolves `ens` under `wf`, returning the final ensemble and sampled trajectory.
pub fn apply_waveform(
    dev: &DeviceParams,
    ens: DomainEnsemble,
    wf: &Waveform,
    dt_policy: DtPolicy,
) -> Result<(DomainEnsemble, Trajectory)> {
    let mut ev = Evolver::new(dev, ens, dt_policy)?.recording();
    ev.run(wf)?;
    ev.finish(wf.at(wf.duration))
}
