//! Device stack parameters, validation and the calibrated FDSOI 22 nm defaults.
//!
//! Sign conventions used across the crate: depth and fields point from the
//! write gate (front) toward the read gate (back); polarization is positive
//! when it points toward the channel, which is the low-V_TH direction.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EPS0: f64 = 8.854_187_812_8e-12;
pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const Q_E: f64 = 1.602_176_634e-19;
pub const EPS_SIO2: f64 = 3.9;

/// One dual-port FeFET. Immutable after construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    pub t_fe: f64,
    pub eps_fe: f64,
    pub t_il: f64,
    pub eps_il: f64,
    pub t_box: f64,
    pub eps_box: f64,
    pub t_body: f64,
    pub p_r: f64,
    pub n_domains: usize,
    pub v_offset_mean: f64,
    pub v_offset_sigma: f64,
    pub tau0: f64,
    pub alpha: f64,
    pub vfb_front: f64,
    pub vfb_back: f64,
    pub mobility_factor: f64,
    pub width: f64,
    pub length: f64,
    pub temperature: f64,
    pub q_ch_scale: f64,
    pub psi_on: f64,
    /// Onset potential of hole accumulation in the body (below it the body
    /// supplies positive compensating charge).
    pub psi_acc: f64,
}

/// Which gate a bias or read is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PortId {
    WriteGate,
    ReadGate,
}

impl PortId {
    pub fn short(self) -> &'static str {
        match self {
            PortId::WriteGate => "wg",
            PortId::ReadGate => "rg",
        }
    }

    /// (v_wg, v_rg) with this port at `v` and the other grounded.
    pub fn biases(self, v: f64) -> (f64, f64) {
        match self {
            PortId::WriteGate => (v, 0.0),
            PortId::ReadGate => (0.0, v),
        }
    }
}

impl fmt::Display for PortId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

impl std::str::FromStr for PortId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wg" | "write" | "writegate" | "front" => Ok(PortId::WriteGate),
            "rg" | "read" | "readgate" | "back" => Ok(PortId::ReadGate),
            other => Err(Error::Config(format!("unknown port `{other}` (expected wg|rg)"))),
        }
    }
}

/// A scalar entry of a key-value configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigValue {
    Num(f64),
    Text(String),
}

/// Flat key-value configuration. Parsed from TOML with at most one level of
/// tables; keys of a table are merged into the flat namespace.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigMap {
    entries: BTreeMap<String, ConfigValue>,
}

impl ConfigMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_defaults(name: &str) -> Self {
        let mut m = Self::new();
        m.set_text("defaults", name);
        m
    }

    pub fn set(&mut self, key: &str, v: f64) -> &mut Self {
        self.entries.insert(key.to_string(), ConfigValue::Num(v));
        self
    }

    pub fn set_text(&mut self, key: &str, v: &str) -> &mut Self {
        self.entries
            .insert(key.to_string(), ConfigValue::Text(v.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&ConfigValue> {
        self.entries.get(key)
    }

    pub fn num(&self, key: &str) -> Result<Option<f64>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(ConfigValue::Num(v)) => Ok(Some(*v)),
            Some(ConfigValue::Text(t)) => t
                .trim()
                .parse::<f64>()
                .map(Some)
                .map_err(|_| Error::Config(format!("key `{key}` expects a number, got `{t}`"))),
        }
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        match self.entries.get(key) {
            Some(ConfigValue::Text(t)) => Some(t.as_str()),
            _ => None,
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn from_toml_str(src: &str) -> Result<Self> {
        let table: toml::Table =
            toml::from_str(src).map_err(|e| Error::Config(format!("malformed config: {e}")))?;
        let mut map = Self::new();
        for (k, v) in table {
            match v {
                toml::Value::Table(inner) => {
                    for (ik, iv) in inner {
                        map.insert_scalar(&ik, iv)?;
                    }
                }
                other => map.insert_scalar(&k, other)?,
            }
        }
        Ok(map)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path)?;
        Self::from_toml_str(&src).map_err(|e| e.context(format!("reading {}", path.display())))
    }

    fn insert_scalar(&mut self, key: &str, v: toml::Value) -> Result<()> {
        let value = match v {
            toml::Value::Float(f) => ConfigValue::Num(f),
            toml::Value::Integer(i) => ConfigValue::Num(i as f64),
            toml::Value::String(s) => ConfigValue::Text(s),
            toml::Value::Boolean(b) => ConfigValue::Text(b.to_string()),
            _ => {
                return Err(Error::Config(format!(
                    "key `{key}`: nested tables and arrays are not supported"
                )))
            }
        };
        self.entries.insert(key.to_string(), value);
        Ok(())
    }
}

pub const FIELD_NAMES: [&str; 22] = [
    "t_fe",
    "eps_fe",
    "t_il",
    "eps_il",
    "t_box",
    "eps_box",
    "t_body",
    "p_r",
    "n_domains",
    "v_offset_mean",
    "v_offset_sigma",
    "tau0",
    "alpha",
    "vfb_front",
    "vfb_back",
    "mobility_factor",
    "width",
    "length",
    "temperature",
    "q_ch_scale",
    "psi_on",
    "psi_acc",
];

/// Calibrated defaults for the 22 nm FDSOI FeFET (10 nm doped HfO2 on the
/// front, 20 nm SiO2 buried oxide on the back). See `configs/fdsoi22.toml`
/// for the calibration notes.
pub fn default_fdsoi22() -> DeviceParams {
    let t_fe = 10e-9;
    let eps_fe = 20.0;
    DeviceParams {
        t_fe,
        eps_fe,
        t_il: 0.8e-9,
        eps_il: 5.7,
        t_box: 20e-9,
        eps_box: EPS_SIO2,
        t_body: 6e-9,
        // Half of a 1.5 V front-gate window across the FE background capacitance.
        p_r: 0.75 * EPS0 * eps_fe / t_fe,
        n_domains: 256,
        v_offset_mean: -0.12,
        v_offset_sigma: 0.05,
        tau0: 1e-10,
        alpha: 5.4,
        vfb_front: 0.0,
        vfb_back: 0.0,
        mobility_factor: 0.72,
        width: 1e-6,
        length: 1e-6,
        temperature: 300.0,
        q_ch_scale: 200.0,
        psi_on: 0.35,
        psi_acc: -0.35,
    }
}

impl DeviceParams {
    pub fn thermal_voltage(&self) -> f64 {
        BOLTZMANN * self.temperature / Q_E
    }

    pub fn c_fe(&self) -> f64 {
        EPS0 * self.eps_fe / self.t_fe
    }

    pub fn c_il(&self) -> f64 {
        EPS0 * self.eps_il / self.t_il
    }

    pub fn c_box(&self) -> f64 {
        EPS0 * self.eps_box / self.t_box
    }

    /// Series capacitance of the ferroelectric background and interfacial layer.
    pub fn c_front(&self) -> f64 {
        1.0 / (1.0 / self.c_fe() + 1.0 / self.c_il())
    }

    pub fn eot_front(&self) -> f64 {
        EPS_SIO2 * (self.t_fe / self.eps_fe + self.t_il / self.eps_il)
    }

    pub fn eot_back(&self) -> f64 {
        EPS_SIO2 * self.t_box / self.eps_box
    }

    pub fn eot_ratio(&self) -> f64 {
        self.eot_back() / self.eot_front()
    }

    pub fn w_over_l(&self) -> f64 {
        self.width / self.length
    }

    pub fn validate(&self) -> Result<()> {
        fn check(field: &'static str, value: f64, ok: bool, bound: &'static str) -> Result<()> {
            if value.is_finite() && ok {
                Ok(())
            } else {
                Err(Error::Validation { field, bound, value })
            }
        }
        check("t_fe", self.t_fe, self.t_fe > 0.0, "> 0")?;
        check("t_il", self.t_il, self.t_il > 0.0, "> 0")?;
        check("t_box", self.t_box, self.t_box > 0.0, "> 0")?;
        check("t_body", self.t_body, self.t_body > 0.0, "> 0")?;
        check("eps_fe", self.eps_fe, self.eps_fe >= 1.0, ">= 1")?;
        check("eps_il", self.eps_il, self.eps_il >= 1.0, ">= 1")?;
        check("eps_box", self.eps_box, self.eps_box >= 1.0, ">= 1")?;
        check("p_r", self.p_r, self.p_r >= 0.0, ">= 0")?;
        check(
            "n_domains",
            self.n_domains as f64,
            self.n_domains >= 1,
            ">= 1",
        )?;
        check("v_offset_mean", self.v_offset_mean, true, "finite")?;
        check(
            "v_offset_sigma",
            self.v_offset_sigma,
            self.v_offset_sigma >= 0.0,
            ">= 0",
        )?;
        check("tau0", self.tau0, self.tau0 > 0.0, "> 0")?;
        check("alpha", self.alpha, self.alpha > 0.0, "> 0")?;
        check("vfb_front", self.vfb_front, true, "finite")?;
        check("vfb_back", self.vfb_back, true, "finite")?;
        check(
            "mobility_factor",
            self.mobility_factor,
            self.mobility_factor > 0.0,
            "> 0",
        )?;
        check("width", self.width, self.width > 0.0, "> 0")?;
        check("length", self.length, self.length > 0.0, "> 0")?;
        check("temperature", self.temperature, self.temperature > 0.0, "> 0")?;
        check("q_ch_scale", self.q_ch_scale, self.q_ch_scale > 0.0, "> 0")?;
        check("psi_on", self.psi_on, true, "finite")?;
        check(
            "psi_acc",
            self.psi_acc,
            self.psi_acc < self.psi_on,
            "< psi_on",
        )?;
        let ratio = self.eot_ratio();
        check("eot_ratio", ratio, ratio > 0.0, "finite and > 0")?;
        Ok(())
    }

    fn field_mut(&mut self, key: &str) -> Option<&mut f64> {
        Some(match key {
            "t_fe" => &mut self.t_fe,
            "eps_fe" => &mut self.eps_fe,
            "t_il" => &mut self.t_il,
            "eps_il" => &mut self.eps_il,
            "t_box" => &mut self.t_box,
            "eps_box" => &mut self.eps_box,
            "t_body" => &mut self.t_body,
            "p_r" => &mut self.p_r,
            "v_offset_mean" => &mut self.v_offset_mean,
            "v_offset_sigma" => &mut self.v_offset_sigma,
            "tau0" => &mut self.tau0,
            "alpha" => &mut self.alpha,
            "vfb_front" => &mut self.vfb_front,
            "vfb_back" => &mut self.vfb_back,
            "mobility_factor" => &mut self.mobility_factor,
            "width" => &mut self.width,
            "length" => &mut self.length,
            "temperature" => &mut self.temperature,
            "q_ch_scale" => &mut self.q_ch_scale,
            "psi_on" => &mut self.psi_on,
            "psi_acc" => &mut self.psi_acc,
            _ => return None,
        })
    }

    /// Flat key-value view, the inverse of [`build_device`].
    pub fn to_config(&self) -> ConfigMap {
        let mut m = ConfigMap::new();
        let mut copy = *self;
        for key in FIELD_NAMES {
            if key == "n_domains" {
                m.set(key, self.n_domains as f64);
            } else if let Some(v) = copy.field_mut(key) {
                m.set(key, *v);
            }
        }
        m
    }
}

/// Builds validated parameters from a key-value map. With `defaults =
/// "fdsoi22"` every field starts from the calibrated defaults and the map
/// only overrides; without it every field is required.
pub fn build_device(config: &ConfigMap) -> Result<DeviceParams> {
    let mut dev = match config.text("defaults") {
        Some("fdsoi22") => Some(default_fdsoi22()),
        Some(other) => {
            return Err(Error::Config(format!(
                "unknown defaults set `{other}` (known: fdsoi22)"
            )))
        }
        None => None,
    };
    let base_missing = dev.is_none();
    let mut params = dev.take().unwrap_or_else(default_fdsoi22);

    for key in FIELD_NAMES {
        let value = config.num(key)?;
        match (value, base_missing) {
            (None, true) => {
                return Err(Error::Config(format!("missing required key `{key}`")));
            }
            (None, false) => {}
            (Some(v), _) => {
                if key == "n_domains" {
                    if v < 1.0 || v.fract() != 0.0 || !v.is_finite() {
                        return Err(Error::Validation {
                            field: "n_domains",
                            bound: "integer >= 1",
                            value: v,
                        });
                    }
                    params.n_domains = v as usize;
                } else if let Some(slot) = params.field_mut(key) {
                    *slot = v;
                }
            }
        }
    }
    params.validate()?;
    Ok(params)
}
