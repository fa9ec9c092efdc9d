//! Small fixed-topology transient engine and the FeFET logic circuits built on it.
//!
//! Every free node has a grounded capacitor; branch currents come from
//! resistors, FeFET channels (linear conductance at frozen polarization) and
//! behavioral inverters. Integration is explicit midpoint RK2 on a uniform grid.

use serde::Serialize;

use crate::device::{drain_current, threshold_voltage, write_state, StoredState, WRITE_PW};
use crate::electrostatics::{sigmoid, solve_with_guess};
use crate::error::{Error, Result};
use crate::params::{ConfigMap, DeviceParams, PortId};
use crate::polarization::{apply_waveform, DtPolicy, Pwl, Waveform};

/// Where an element pin is connected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Terminal {
    Node(usize),
    Source(usize),
    Fixed(f64),
}

pub const GROUND: Terminal = Terminal::Fixed(0.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InverterModel {
    pub v_switch: f64,
    pub r_on: f64,
}

#[derive(Debug, Clone)]
pub struct FeFetElement {
    pub drain: Terminal,
    pub source: Terminal,
    pub wg: Terminal,
    pub rg: Terminal,
    pub dev: DeviceParams,
    pub p: f64,
}

#[derive(Debug, Clone)]
pub enum Element {
    Resistor { a: Terminal, b: Terminal, r: f64 },
    FeFet(Box<FeFetElement>),
    /// Drives `output` toward `vdd` or ground through `r_on`, switching
    /// smoothly around `v_switch`.
    Inverter {
        input: Terminal,
        output: usize,
        model: InverterModel,
        vdd: f64,
    },
}

#[derive(Debug, Clone, Default)]
pub struct Circuit {
    pub node_names: Vec<String>,
    pub caps: Vec<f64>,
    pub initial: Vec<f64>,
    pub sources: Vec<Pwl>,
    pub elements: Vec<Element>,
}

impl Circuit {
    pub fn add_node(&mut self, name: &str, cap: f64) -> usize {
        self.node_names.push(name.to_string());
        self.caps.push(cap);
        self.initial.push(0.0);
        self.caps.len() - 1
    }

    pub fn add_source(&mut self, wave: Pwl) -> Terminal {
        self.sources.push(wave);
        Terminal::Source(self.sources.len() - 1)
    }

    pub fn add(&mut self, e: Element) {
        self.elements.push(e);
    }

    fn validate(&self) -> Result<()> {
        for (name, &c) in self.node_names.iter().zip(&self.caps) {
            if !(c > 0.0) {
                return Err(Error::Config(format!("node `{name}` capacitance must be positive, got {c}")));
            }
        }
        for e in &self.elements {
            match e {
                Element::Resistor { r, .. } if !(*r > 0.0) => {
                    return Err(Error::Config(format!("resistance must be positive, got {r}")))
                }
                Element::Inverter { model, vdd, .. } if !(model.r_on > 0.0 && *vdd > 0.0) => {
                    return Err(Error::Config("inverter needs r_on > 0 and vdd > 0".into()))
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn terminal_max(&self, t: Terminal, v_hi: f64) -> f64 {
        match t {
            Terminal::Node(_) => v_hi,
            Terminal::Source(k) => self.sources[k].min_max().1,
            Terminal::Fixed(v) => v,
        }
    }

    /// Largest conductance each element can present, used for the step check.
    fn max_conductances(&self, v_hi: f64) -> Result<Vec<f64>> {
        self.elements
            .iter()
            .map(|e| match e {
                Element::Resistor { r, .. } => Ok(1.0 / r),
                Element::Inverter { model, .. } => Ok(1.0 / model.r_on),
                Element::FeFet(f) => {
                    let wg = self.terminal_max(f.wg, v_hi);
                    let rg = self.terminal_max(f.rg, v_hi);
                    let sol = solve_with_guess(&f.dev, f.p, wg, rg, None)?;
                    drain_current(&f.dev, &sol, 1.0)
                }
            })
            .collect()
    }

    /// Shortest node time constant `C / sum(G_max)` over all nodes.
    pub fn min_time_constant(&self, v_hi: f64) -> Result<f64> {
        let g = self.max_conductances(v_hi)?;
        let mut g_node = vec![0.0; self.caps.len()];
        let mut touch = |t: Terminal, g: f64| {
            if let Terminal::Node(i) = t {
                g_node[i] += g;
            }
        };
        for (e, &ge) in self.elements.iter().zip(&g) {
            match e {
                Element::Resistor { a, b, .. } => {
                    touch(*a, ge);
                    touch(*b, ge);
                }
                Element::FeFet(f) => {
                    touch(f.drain, ge);
                    touch(f.source, ge);
                }
                Element::Inverter { output, .. } => touch(Terminal::Node(*output), ge),
            }
        }
        Ok(self
            .caps
            .iter()
            .zip(&g_node)
            .filter(|(_, &g)| g > 0.0)
            .map(|(c, g)| c / g)
            .fold(f64::INFINITY, f64::min))
    }
}

struct Evaluator<'a> {
    ckt: &'a Circuit,
    guesses: Vec<Option<f64>>,
}

impl<'a> Evaluator<'a> {
    fn value(&self, t: Terminal, time: f64, v: &[f64]) -> f64 {
        match t {
            Terminal::Node(i) => v[i],
            Terminal::Source(k) => self.ckt.sources[k].value_at(time),
            Terminal::Fixed(x) => x,
        }
    }

    /// Node voltage derivatives.
    fn rhs(&mut self, time: f64, v: &[f64], out: &mut [f64]) -> Result<()> {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (k, e) in self.ckt.elements.iter().enumerate() {
            match e {
                Element::Resistor { a, b, r } => {
                    let i = (self.value(*a, time, v) - self.value(*b, time, v)) / r;
                    inject(out, *a, -i);
                    inject(out, *b, i);
                }
                Element::FeFet(f) => {
                    let vd = self.value(f.drain, time, v);
                    let vs = self.value(f.source, time, v);
                    let v_ref = vd.min(vs);
                    let wg = self.value(f.wg, time, v) - v_ref;
                    let rg = self.value(f.rg, time, v) - v_ref;
                    let sol = solve_with_guess(&f.dev, f.p, wg, rg, self.guesses[k])?;
                    self.guesses[k] = Some(sol.psi_s);
                    let i = drain_current(&f.dev, &sol, 1.0)? * (vd - vs);
                    inject(out, f.drain, -i);
                    inject(out, f.source, i);
                }
                Element::Inverter {
                    input,
                    output,
                    model,
                    vdd,
                } => {
                    let vin = self.value(*input, time, v);
                    let target = vdd * (1.0 - sigmoid((vin - model.v_switch) / (vdd / 100.0)));
                    out[*output] += (target - v[*output]) / model.r_on;
                }
            }
        }
        for (d, c) in out.iter_mut().zip(&self.ckt.caps) {
            *d /= c;
        }
        Ok(())
    }
}

fn inject(out: &mut [f64], t: Terminal, i: f64) {
    if let Terminal::Node(n) = t {
        out[n] += i;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransientTrace {
    pub names: Vec<String>,
    /// Spacing of the recorded rows.
    pub dt: f64,
    /// (t, node voltages in `names` order), uniform in t.
    pub rows: Vec<(f64, Vec<f64>)>,
}

impl TransientTrace {
    pub fn node(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, idx: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.1[idx]).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.0).collect()
    }

    /// Max minus min of one node over rows with `t >= t_from`.
    pub fn swing(&self, idx: usize, t_from: f64) -> f64 {
        let (lo, hi) = self
            .rows
            .iter()
            .filter(|r| r.0 >= t_from)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.1[idx]), hi.max(r.1[idx])));
        hi - lo
    }

    pub fn within(&self, lo: f64, hi: f64) -> bool {
        self.rows.iter().all(|r| r.1.iter().all(|&v| v >= lo && v <= hi))
    }
}

/// Integrates the circuit from its initial node voltages up to `t_end`.
///
/// `dt` must not exceed a tenth of the shortest node time constant; `v_hi`
/// bounds the node voltages used to estimate that constant.
pub fn transient_solve(ckt: &Circuit, t_end: f64, dt: f64, v_hi: f64) -> Result<TransientTrace> {
    transient_solve_strided(ckt, t_end, dt, v_hi, 1)
}

/// [`transient_solve`] keeping every `stride`-th step in the trace.
pub fn transient_solve_strided(ckt: &Circuit, t_end: f64, dt: f64, v_hi: f64, stride: u64) -> Result<TransientTrace> {
    let mut run = Transient::new(ckt, dt, v_hi)?;
    run.stride = stride.max(1);
    run.advance_to(t_end)?;
    Ok(run.into_trace())
}

/// Incremental integration, so callers can stop once they have seen enough.
pub struct Transient<'a> {
    eval: Evaluator<'a>,
    v: Vec<f64>,
    t: f64,
    step: u64,
    dt: f64,
    stride: u64,
    trace: TransientTrace,
}

impl<'a> Transient<'a> {
    pub fn new(ckt: &'a Circuit, dt: f64, v_hi: f64) -> Result<Self> {
        ckt.validate()?;
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("time step must be positive, got {dt}")));
        }
        let tau = ckt.min_time_constant(v_hi)?;
        if dt > tau / 10.0 {
            return Err(Error::Stability(format!(
                "dt = {dt:e} s exceeds a tenth of the shortest time constant {tau:e} s"
            )));
        }
        let v = ckt.initial.clone();
        let trace = TransientTrace {
            names: ckt.node_names.clone(),
            dt: 0.0,
            rows: vec![(0.0, v.clone())],
        };
        Ok(Transient {
            eval: Evaluator {
                ckt,
                guesses: vec![None; ckt.elements.len()],
            },
            v,
            t: 0.0,
            step: 0,
            dt,
            stride: 1,
            trace,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn voltages(&self) -> &[f64] {
        &self.v
    }

    pub fn trace(&self) -> &TransientTrace {
        &self.trace
    }

    pub fn advance_to(&mut self, t_end: f64) -> Result<()> {
        let n = self.v.len();
        let mut k1 = vec![0.0; n];
        let mut k2 = vec![0.0; n];
        let mut mid = vec![0.0; n];
        let dt = self.dt;
        while self.t + 0.5 * dt < t_end {
            self.eval.rhs(self.t, &self.v, &mut k1)?;
            for i in 0..n {
                mid[i] = self.v[i] + 0.5 * dt * k1[i];
            }
            self.eval.rhs(self.t + 0.5 * dt, &mid, &mut k2)?;
            for i in 0..n {
                self.v[i] += dt * k2[i];
            }
            self.step += 1;
            self.t = self.step as f64 * dt;
            if let Some(i) = self.v.iter().position(|x| !x.is_finite()) {
                return Err(Error::Divergence {
                    t: self.t,
                    node: self.eval.ckt.node_names[i].clone(),
                });
            }
            if self.step % self.stride == 0 {
                self.trace.rows.push((self.t, self.v.clone()));
            }
        }
        Ok(())
    }

    pub fn into_trace(mut self) -> TransientTrace {
        self.trace.dt = self.dt * self.stride as f64;
        self.trace
    }
}

/// Times at which `xs` crosses `level` upward, linearly interpolated.
pub fn rising_crossings(ts: &[f64], xs: &[f64], level: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for k in 1..xs.len() {
        if xs[k - 1] < level && xs[k] >= level {
            let s = (level - xs[k - 1]) / (xs[k] - xs[k - 1]);
            out.push(ts[k - 1] + s * (ts[k] - ts[k - 1]));
        }
    }
    out
}

/// Mean reciprocal period over the last `last` periods.
pub fn frequency_from_crossings(crossings: &[f64], last: usize) -> Option<f64> {
    if crossings.len() < last + 1 {
        return None;
    }
    let tail = &crossings[crossings.len() - last - 1..];
    let f: f64 = tail.windows(2).map(|w| 1.0 / (w[1] - w[0])).sum();
    Some(f / last as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Topology {
    Switch,
    LutCell,
    RingOscillator { n_stages: usize },
}

/// One FeFET with its DC gate biases. The gate carrying a signal overrides
/// its DC value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeFetBias {
    pub dev: DeviceParams,
    pub v_wg: f64,
    pub v_rg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitConfig {
    pub topology: Topology,
    pub r_load: f64,
    pub r_pull: f64,
    pub c_node: f64,
    pub vdd: f64,
    pub inverter: InverterModel,
    pub fefet: FeFetBias,
    /// FeFET stages in a ring oscillator; the rest are inverters.
    pub fefet_stages: usize,
    /// Integration step; `None` picks a fiftieth of the shortest time constant.
    pub dt: Option<f64>,
    pub seed: u64,
}

impl CircuitConfig {
    /// Routing switch: 1 MOhm load, 1 pF node, 0.1 V signal.
    pub fn switch(dev: DeviceParams) -> Self {
        CircuitConfig {
            topology: Topology::Switch,
            r_load: 1e6,
            r_pull: 1e6,
            c_node: 1e-12,
            vdd: 0.1,
            inverter: InverterModel {
                v_switch: 0.05,
                r_on: 1e3,
            },
            fefet: FeFetBias {
                dev,
                v_wg: 0.0,
                v_rg: 0.0,
            },
            fefet_stages: 1,
            dt: None,
            seed: crate::device::DEFAULT_SEED,
        }
    }

    pub fn lut(dev: DeviceParams) -> Self {
        CircuitConfig {
            topology: Topology::LutCell,
            vdd: 0.5,
            ..Self::switch(dev)
        }
    }

    /// Ring oscillator with the fitted pull-up and node capacitance.
    pub fn ring(dev: DeviceParams, n_stages: usize) -> Self {
        CircuitConfig {
            topology: Topology::RingOscillator { n_stages },
            r_load: 1e6,
            r_pull: RING_R_PULL,
            c_node: RING_C_NODE,
            vdd: 5.0,
            inverter: InverterModel {
                v_switch: 2.5,
                r_on: RING_INV_R_ON,
            },
            fefet: FeFetBias {
                dev,
                v_wg: RING_WG_BIAS,
                v_rg: 0.0,
            },
            fefet_stages: 1,
            dt: None,
            seed: crate::device::DEFAULT_SEED,
        }
    }

    /// Overrides fields from a flat config (`r_load`, `r_pull`, `c_node`,
    /// `vdd`, `inv_v_switch`, `inv_r_on`, `wg_bias`, `rg_bias`, `dt`,
    /// `fefet_stages`).
    pub fn apply_overrides(&mut self, map: &ConfigMap) -> Result<()> {
        let set = |key: &str, slot: &mut f64| -> Result<()> {
            if let Some(v) = map.num(key)? {
                *slot = v;
            }
            Ok(())
        };
        set("r_load", &mut self.r_load)?;
        set("r_pull", &mut self.r_pull)?;
        set("c_node", &mut self.c_node)?;
        set("vdd", &mut self.vdd)?;
        set("inv_v_switch", &mut self.inverter.v_switch)?;
        set("inv_r_on", &mut self.inverter.r_on)?;
        set("wg_bias", &mut self.fefet.v_wg)?;
        set("rg_bias", &mut self.fefet.v_rg)?;
        if let Some(dt) = map.num("dt")? {
            self.dt = Some(dt);
        }
        if let Some(n) = map.num("fefet_stages")? {
            if n < 1.0 || n.fract() != 0.0 {
                return Err(Error::Config(format!("fefet_stages must be a positive integer, got {n}")));
            }
            self.fefet_stages = n as usize;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("r_load", self.r_load),
            ("r_pull", self.r_pull),
            ("c_node", self.c_node),
            ("vdd", self.vdd),
            ("inv_r_on", self.inverter.r_on),
        ];
        for (name, v) in pos {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("`{name}` must be positive, got {v}")));
            }
        }
        if let Topology::RingOscillator { n_stages } = self.topology {
            if n_stages < 3 || n_stages % 2 == 0 {
                return Err(Error::Config(format!(
                    "ring oscillator needs an odd stage count >= 3, got {n_stages}"
                )));
            }
            if self.fefet_stages > n_stages {
                return Err(Error::Config("more FeFET stages than ring stages".into()));
            }
        }
        Ok(())
    }

    fn fefet(&self, p: f64, drain: Terminal, source: Terminal, wg: Terminal, rg: Terminal) -> Element {
        Element::FeFet(Box::new(FeFetElement {
            drain,
            source,
            wg,
            rg,
            dev: self.fefet.dev,
            p,
        }))
    }

    fn pick_dt(&self, ckt: &Circuit) -> Result<f64> {
        match self.dt {
            Some(dt) => Ok(dt),
            None => Ok(ckt.min_time_constant(self.vdd)? / 50.0),
        }
    }
}

/// Gate terminals for a FeFET whose `port` carries `signal` and whose other
/// gate sits at its DC bias.
fn gates(bias: &FeFetBias, port: PortId, signal: Terminal) -> (Terminal, Terminal) {
    match port {
        PortId::WriteGate => (signal, Terminal::Fixed(bias.v_rg)),
        PortId::ReadGate => (Terminal::Fixed(bias.v_wg), signal),
    }
}

/// Polarization left by the standard program pulse for `state`.
pub fn stored_polarization(dev: &DeviceParams, state: StoredState, seed: u64) -> Result<f64> {
    Ok(write_state(dev, state, seed)?.polarization())
}

/// Pass-transistor switch: `input` drives the source, the drain node is
/// loaded by `r_load` and `c_node` to ground, and `activation` holds one gate.
pub fn simulate_switch(
    cfg: &CircuitConfig,
    state: StoredState,
    activation: (PortId, f64),
    input: &Pwl,
    t_end: f64,
) -> Result<TransientTrace> {
    cfg.validate()?;
    let p = stored_polarization(&cfg.fefet.dev, state, cfg.seed)?;
    let mut ckt = Circuit::default();
    let out = ckt.add_node("out", cfg.c_node);
    let src = ckt.add_source(input.clone());
    let (wg, rg) = gates(&cfg.fefet, activation.0, Terminal::Fixed(activation.1));
    ckt.add(cfg.fefet(p, Terminal::Node(out), src, wg, rg));
    ckt.add(Element::Resistor {
        a: Terminal::Node(out),
        b: GROUND,
        r: cfg.r_load,
    });
    let dt = cfg.pick_dt(&ckt)?;
    transient_solve_strided(&ckt, t_end, dt, cfg.vdd, stride_for(t_end, dt))
}

/// Keeps recorded traces near [`TRACE_ROWS`] rows.
fn stride_for(t_end: f64, dt: f64) -> u64 {
    ((t_end / dt) / TRACE_ROWS as f64).ceil().max(1.0) as u64
}

/// Target row count for switch and look-up table traces.
pub const TRACE_ROWS: usize = 4000;

/// Gate bias halfway between the two stored-state thresholds on `port`.
pub fn activation_bias(dev: &DeviceParams, port: PortId) -> Result<f64> {
    let lo = threshold_voltage(dev, dev.p_r, port)?;
    let hi = threshold_voltage(dev, -dev.p_r, port)?;
    Ok(0.5 * (lo + hi))
}

/// Idle and read levels for a look-up table cell: the read level sits
/// between the state thresholds, the idle level one window below the low one.
pub fn lut_gate_levels(dev: &DeviceParams, port: PortId) -> Result<(f64, f64)> {
    let lo = threshold_voltage(dev, dev.p_r, port)?;
    let hi = threshold_voltage(dev, -dev.p_r, port)?;
    Ok((lo - (hi - lo), 0.5 * (lo + hi)))
}

/// Square wave between 0 and `amp` starting high, with linear edges.
pub fn square_wave(amp: f64, period: f64, periods: usize, edge: f64) -> Result<Pwl> {
    if !(period > 0.0) || !(edge > 0.0) || 2.0 * edge >= period || periods == 0 {
        return Err(Error::Config(format!(
            "square wave needs 0 < 2 * edge < period and at least one period (period {period}, edge {edge})"
        )));
    }
    let mut pts = vec![(0.0, 0.0)];
    for k in 0..periods {
        let t = k as f64 * period;
        pts.push((t + edge, amp));
        pts.push((t + 0.5 * period, amp));
        pts.push((t + 0.5 * period + edge, 0.0));
        pts.push((t + period, 0.0));
    }
    pts.dedup_by(|a, b| a.0 == b.0);
    Pwl::new(pts)
}

/// Gate level that sits at `idle`, steps to `read` at `t_on` for `width`, then returns.
pub fn gate_pulse(idle: f64, read: f64, t_on: f64, width: f64, edge: f64) -> Result<Pwl> {
    Pwl::new(vec![
        (0.0, idle),
        (t_on, idle),
        (t_on + edge, read),
        (t_on + width, read),
        (t_on + width + edge, idle),
    ])
}

/// Two FeFETs in series between `vdd` and ground with the shared node as
/// output; `read_pulse` drives the `read_port` gate of both.
pub fn simulate_lut(
    cfg: &CircuitConfig,
    upper: StoredState,
    lower: StoredState,
    read_port: PortId,
    read_pulse: &Pwl,
    t_end: f64,
    allow_same_states: bool,
) -> Result<TransientTrace> {
    cfg.validate()?;
    if upper == lower && !allow_same_states {
        return Err(Error::Config(
            "look-up table cell needs complementary stored states".into(),
        ));
    }
    let dev = &cfg.fefet.dev;
    let p_up = stored_polarization(dev, upper, cfg.seed)?;
    let p_lo = stored_polarization(dev, lower, cfg.seed)?;
    let mut ckt = Circuit::default();
    let out = ckt.add_node("out", cfg.c_node);
    ckt.initial[out] = 0.5 * cfg.vdd;
    let read = ckt.add_source(read_pulse.clone());
    let (wg, rg) = gates(&cfg.fefet, read_port, read);
    ckt.add(cfg.fefet(p_up, Terminal::Fixed(cfg.vdd), Terminal::Node(out), wg, rg));
    ckt.add(cfg.fefet(p_lo, Terminal::Node(out), GROUND, wg, rg));
    let dt = cfg.pick_dt(&ckt)?;
    transient_solve_strided(&ckt, t_end, dt, cfg.vdd, stride_for(t_end, dt))
}

/// Polarization after an erase followed by a `write_amp` program pulse.
pub fn programmed_polarization(dev: &DeviceParams, write_amp: f64, seed: u64) -> Result<f64> {
    let erased = write_state(dev, StoredState::HighVth, seed)?;
    let (ens, _) = apply_waveform(dev, erased, &Waveform::write_pulse(write_amp, WRITE_PW), DtPolicy::default())?;
    Ok(ens.polarization())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RingResult {
    pub trace: TransientTrace,
    pub frequency: f64,
    pub p: f64,
}

/// Periods required before the frequency is read.
pub const RING_PERIODS: usize = 20;
/// Fitted pull-up resistance for the FeFET stage.
pub const RING_R_PULL: f64 = 130e3;
/// Fitted node capacitance.
pub const RING_C_NODE: f64 = 45e-12;
/// Output resistance of the ring inverters.
pub const RING_INV_R_ON: f64 = 50e3;
/// Write-gate DC bias that centers the read-gate threshold inside the 0..vdd swing.
pub const RING_WG_BIAS: f64 = -0.8;

/// Ring of `n_stages` stages whose first `fefet_stages` are FeFET pull-downs
/// with resistor pull-ups (signal on the read gate); the rest are inverters.
pub fn build_ring(cfg: &CircuitConfig, p: f64) -> Result<Circuit> {
    cfg.validate()?;
    let n = match cfg.topology {
        Topology::RingOscillator { n_stages } => n_stages,
        _ => return Err(Error::Config("configuration is not a ring oscillator".into())),
    };
    let mut ckt = Circuit::default();
    let nodes: Vec<usize> = (0..n).map(|k| ckt.add_node(&format!("n{}", k + 1), cfg.c_node)).collect();
    for k in 0..n {
        let input = Terminal::Node(nodes[(k + n - 1) % n]);
        let out = nodes[k];
        if k < cfg.fefet_stages {
            let (wg, rg) = gates(&cfg.fefet, PortId::ReadGate, input);
            ckt.add(cfg.fefet(p, Terminal::Node(out), GROUND, wg, rg));
            ckt.add(Element::Resistor {
                a: Terminal::Fixed(cfg.vdd),
                b: Terminal::Node(out),
                r: cfg.r_pull,
            });
        } else {
            ckt.add(Element::Inverter {
                input,
                output: out,
                model: cfg.inverter,
                vdd: cfg.vdd,
            });
        }
    }
    Ok(ckt)
}

/// Programs the FeFET stage with `write_amp`, runs the ring until
/// [`RING_PERIODS`] rising edges are seen on the first node, and reads the
/// frequency from the last ten.
pub fn simulate_ring_oscillator(cfg: &CircuitConfig, write_amp: f64) -> Result<RingResult> {
    let p = programmed_polarization(&cfg.fefet.dev, write_amp, cfg.seed)?;
    ring_at_polarization(cfg, p)
}

pub fn ring_at_polarization(cfg: &CircuitConfig, p: f64) -> Result<RingResult> {
    let ckt = build_ring(cfg, p)?;
    let dt = cfg.pick_dt(&ckt)?;
    let mut run = Transient::new(&ckt, dt, cfg.vdd)?;
    let chunk = 2000.0 * dt;
    let max_t = 4e5 * dt;
    let level = 0.5 * cfg.vdd;
    loop {
        let t_next = run.time() + chunk;
        run.advance_to(t_next)?;
        let tr = run.trace();
        let crossings = rising_crossings(&tr.times(), &tr.column(0), level);
        if crossings.len() > RING_PERIODS {
            let f = frequency_from_crossings(&crossings, 10).expect("enough crossings");
            return Ok(RingResult {
                trace: run.into_trace(),
                frequency: f,
                p,
            });
        }
        if run.time() >= max_t {
            return Err(Error::Stagnation(format!(
                "{} rising edges by t = {:e} s; final node voltages {:?}",
                crossings.len(),
                run.time(),
                run.voltages()
            )));
        }
    }
}
