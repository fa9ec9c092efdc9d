//! One-dimensional vertical electrostatics of the gate stack
//! write gate | FE | IL | thin body | BOX | read gate.
//!
//! The body is a single equipotential sheet at `psi_s` carrying a smooth
//! electron (inversion) charge above `psi_on` and a smooth hole charge below
//! `psi_acc`. Everything else follows from displacement continuity, so the
//! problem reduces to one monotone scalar equation in `psi_s`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{DeviceParams, PortId, EPS0};

const BRACKET_LO: f64 = -5.0;
const BRACKET_HI: f64 = 25.0;
const PSI_TOL: f64 = 1e-12;
const MAX_ITER: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ElectrostaticSolution {
    pub psi_s: f64,
    /// V/m, positive pointing from write gate toward read gate.
    pub e_fe: f64,
    pub e_il: f64,
    pub e_box: f64,
    /// Electron sheet charge, C/m^2, never positive.
    pub q_ch: f64,
    /// Hole sheet charge, C/m^2, never negative.
    pub q_acc: f64,
    pub residual: f64,
    pub p: f64,
    pub v_wg: f64,
    pub v_rg: f64,
}

impl ElectrostaticSolution {
    /// Field-equivalent voltage across the ferroelectric.
    pub fn v_fe(&self, dev: &DeviceParams) -> f64 {
        self.e_fe * dev.t_fe
    }

    pub fn q_body(&self) -> f64 {
        self.q_ch + self.q_acc
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Electron sheet charge at surface potential `psi`.
pub fn inversion_charge(dev: &DeviceParams, psi: f64) -> f64 {
    let vt = dev.thermal_voltage();
    -dev.q_ch_scale * vt * softplus((psi - dev.psi_on) / vt)
}

/// Hole sheet charge at surface potential `psi`.
pub fn accumulation_charge(dev: &DeviceParams, psi: f64) -> f64 {
    let vt = dev.thermal_voltage();
    dev.q_ch_scale * vt * softplus((dev.psi_acc - psi) / vt)
}

struct Stack {
    c_fe: f64,
    c_il: f64,
    c_box: f64,
    p: f64,
    vg: f64,
    vb: f64,
}

impl Stack {
    fn new(dev: &DeviceParams, p: f64, v_wg: f64, v_rg: f64) -> Self {
        Stack {
            c_fe: dev.c_fe(),
            c_il: dev.c_il(),
            c_box: dev.c_box(),
            p,
            vg: v_wg - dev.vfb_front,
            vb: v_rg - dev.vfb_back,
        }
    }

    fn d_il(&self, dev: &DeviceParams, psi: f64) -> f64 {
        let q = inversion_charge(dev, psi) + accumulation_charge(dev, psi);
        self.c_box * (psi - self.vb) - q
    }

    /// Potential-loop mismatch; strictly increasing in `psi`.
    fn loop_residual(&self, dev: &DeviceParams, psi: f64) -> f64 {
        let d = self.d_il(dev, psi);
        (d - self.p) / self.c_fe + d / self.c_il + psi - self.vg
    }

    fn loop_slope(&self, dev: &DeviceParams, psi: f64) -> f64 {
        let vt = dev.thermal_voltage();
        let dq_inv = dev.q_ch_scale * sigmoid((psi - dev.psi_on) / vt);
        let dq_acc = dev.q_ch_scale * sigmoid((dev.psi_acc - psi) / vt);
        (self.c_box + dq_inv + dq_acc) * (1.0 / self.c_fe + 1.0 / self.c_il) + 1.0
    }
}

/// Self-consistent operating point at polarization `p` and terminal biases.
pub fn solve_operating_point(
    dev: &DeviceParams,
    p: f64,
    v_wg: f64,
    v_rg: f64,
) -> Result<ElectrostaticSolution> {
    solve_with_guess(dev, p, v_wg, v_rg, None)
}

/// Same as [`solve_operating_point`], starting Newton from `guess` when it
/// lies inside the bracket. Used by time loops for warm starts.
pub fn solve_with_guess(
    dev: &DeviceParams,
    p: f64,
    v_wg: f64,
    v_rg: f64,
    guess: Option<f64>,
) -> Result<ElectrostaticSolution> {
    if !(v_wg.is_finite() && v_rg.is_finite() && p.is_finite()) {
        return Err(Error::Domain(format!(
            "non-finite input (p = {p}, v_wg = {v_wg}, v_rg = {v_rg})"
        )));
    }
    if p.abs() > dev.p_r * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "|p| = {:e} exceeds p_r = {:e}",
            p.abs(),
            dev.p_r
        )));
    }
    let st = Stack::new(dev, p, v_wg, v_rg);
    let f = |psi: f64| st.loop_residual(dev, psi);

    let (mut lo, mut hi) = (BRACKET_LO, BRACKET_HI);
    let mut widen = 0;
    while f(lo) > 0.0 {
        lo -= (hi - lo).max(1.0);
        widen += 1;
        if widen > 60 {
            return Err(Error::Numerical {
                message: "could not bracket surface potential from below".into(),
                residual: f(lo),
            });
        }
    }
    while f(hi) < 0.0 {
        hi += (hi - lo).max(1.0);
        widen += 1;
        if widen > 60 {
            return Err(Error::Numerical {
                message: "could not bracket surface potential from above".into(),
                residual: f(hi),
            });
        }
    }

    // Safeguarded Newton: fall back to bisection whenever the step leaves the bracket.
    let mut psi = match guess {
        Some(g) if g > lo && g < hi => g,
        _ => 0.5 * (lo + hi),
    };
    let mut fx = f(psi);
    let mut converged = false;
    for _ in 0..MAX_ITER {
        if fx > 0.0 {
            hi = psi;
        } else if fx < 0.0 {
            lo = psi;
        } else {
            converged = true;
            break;
        }
        let mut next = psi - fx / st.loop_slope(dev, psi);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - psi).abs();
        psi = next;
        fx = f(psi);
        if step < PSI_TOL || hi - lo < PSI_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical {
            message: format!("surface potential iteration cap reached (psi = {psi})"),
            residual: fx,
        });
    }

    let q_ch = inversion_charge(dev, psi);
    let q_acc = accumulation_charge(dev, psi);
    let d_box = st.c_box * (psi - st.vb);
    let d_il = d_box - (q_ch + q_acc);
    let e_box = d_box / (EPS0 * dev.eps_box);
    let e_il = d_il / (EPS0 * dev.eps_il);
    let e_fe = (d_il - p) / (EPS0 * dev.eps_fe);
    let scale = [d_il, d_box, p, q_ch, q_acc, d_il - p]
        .iter()
        .fold(1e-12_f64, |m, v| m.max(v.abs()));
    let residual = (fx * st.c_fe.min(st.c_il)).abs() / scale;
    Ok(ElectrostaticSolution {
        psi_s: psi,
        e_fe,
        e_il,
        e_box,
        q_ch,
        q_acc,
        residual,
        p,
        v_wg,
        v_rg,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfeSweep {
    pub port: PortId,
    pub p: f64,
    /// (v_read, e_fe) ordered by v_read.
    pub rows: Vec<(f64, f64)>,
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Sweeps one port with the other grounded and records the FE field.
pub fn efe_vs_vread(
    dev: &DeviceParams,
    p: f64,
    port: PortId,
    v_min: f64,
    v_max: f64,
    n: usize,
) -> Result<EfeSweep> {
    if n < 2 {
        return Err(Error::Domain(format!("sweep needs n >= 2, got {n}")));
    }
    if v_min.partial_cmp(&v_max) != Some(std::cmp::Ordering::Less) {
        return Err(Error::Domain(format!(
            "sweep bounds must satisfy v_min < v_max (got {v_min}, {v_max})"
        )));
    }
    let rows = linspace(v_min, v_max, n)
        .into_par_iter()
        .map(|v| {
            let (wg, rg) = port.biases(v);
            solve_operating_point(dev, p, wg, rg)
                .map(|s| (v, s.e_fe))
                .map_err(|e| e.context(format!("v_read = {v} V on {port}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EfeSweep { port, p, rows })
}

/// Named layer boundary in a [`BandProfile`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Layer {
    WriteGate,
    Ferroelectric,
    Interfacial,
    Body,
    BuriedOxide,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandProfile {
    /// (depth m, potential V), from write-gate metal to read-gate metal.
    pub points: Vec<(f64, f64)>,
    /// Layer that ends at each point (the first point is the gate surface).
    pub layers: Vec<Layer>,
}

impl BandProfile {
    /// Potential drop across the buried oxide.
    pub fn box_drop(&self) -> f64 {
        let n = self.points.len();
        self.points[n - 2].1 - self.points[n - 1].1
    }

    pub fn fe_drop(&self) -> f64 {
        self.points[0].1 - self.points[1].1
    }
}

/// Piecewise-linear potential through the stack for a solved operating point.
pub fn band_profile(
    dev: &DeviceParams,
    sol: &ElectrostaticSolution,
    v_wg: f64,
    v_rg: f64,
) -> Result<BandProfile> {
    let tol = 1e-12 * (1.0 + v_wg.abs().max(v_rg.abs()));
    if (sol.v_wg - v_wg).abs() > tol || (sol.v_rg - v_rg).abs() > tol {
        return Err(Error::Consistency(format!(
            "solution was computed at (v_wg, v_rg) = ({}, {}), profile requested at ({v_wg}, {v_rg})",
            sol.v_wg, sol.v_rg
        )));
    }
    let mut depth = 0.0;
    let mut phi = v_wg - dev.vfb_front;
    let mut points = vec![(depth, phi)];
    let mut layers = vec![Layer::WriteGate];
    for (layer, t, e) in [
        (Layer::Ferroelectric, dev.t_fe, sol.e_fe),
        (Layer::Interfacial, dev.t_il, sol.e_il),
        (Layer::Body, dev.t_body, 0.0),
        (Layer::BuriedOxide, dev.t_box, sol.e_box),
    ] {
        depth += t;
        phi -= e * t;
        if layer == Layer::Body {
            // pin the body exactly at psi_s, the sheet potential
            phi = sol.psi_s;
        }
        points.push((depth, phi));
        layers.push(layer);
    }
    Ok(BandProfile { points, layers })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::default_fdsoi22;
    use proptest::prelude::*;

    fn dev() -> DeviceParams {
        default_fdsoi22()
    }

    #[test]
    fn flat_band_gives_zero_field() {
        let d = dev();
        let s = solve_operating_point(&d, 0.0, d.vfb_front, d.vfb_back).unwrap();
        assert!(s.psi_s.abs() < 1e-9, "psi = {}", s.psi_s);
        assert!(s.e_fe.abs() < 1e3);
        assert!(s.q_ch.abs() < 1e-3 * d.p_r);
    }

    /// Closed-form three-capacitor divider with the body charge neglected.
    fn divider(d: &DeviceParams, vg: f64, vb: f64) -> (f64, f64, f64) {
        let cf = d.c_front();
        let cb = d.c_box();
        let psi = (cf * vg + cb * vb) / (cf + cb);
        let d_il = cf * (vg - psi);
        let e_fe = d_il / (EPS0 * d.eps_fe);
        let e_box = cb * (psi - vb) / (EPS0 * d.eps_box);
        (psi, e_fe, e_box)
    }

    #[test]
    fn subthreshold_matches_capacitor_divider() {
        let d = dev();
        // psi ~ 0 keeps both carrier charges negligible
        for &(vg, vb) in &[(1.0, -8.0), (-0.5, 4.0), (0.2, -1.6)] {
            let s = solve_operating_point(&d, 0.0, vg, vb).unwrap();
            let (psi, e_fe, e_box) = divider(&d, vg, vb);
            assert!((s.psi_s - psi).abs() < 1e-3 * vg.abs().max(vb.abs()));
            assert!((s.e_fe - e_fe).abs() <= 1e-3 * e_fe.abs(), "{} vs {}", s.e_fe, e_fe);
            assert!((s.e_box - e_box).abs() <= 1e-3 * e_box.abs());
        }
    }

    #[test]
    fn polarization_out_of_range() {
        let d = dev();
        assert!(matches!(
            solve_operating_point(&d, 2.0 * d.p_r, 0.0, 0.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn huge_bias_widens_bracket() {
        let d = dev();
        let s = solve_operating_point(&d, 0.0, 0.0, -400.0).unwrap();
        assert!(s.residual < 1e-9);
        let s = solve_operating_point(&d, 0.0, 0.0, 400.0).unwrap();
        assert!(s.residual < 1e-9);
    }

    #[test]
    fn high_state_read_gate_field_drops_then_saturates() {
        let d = dev();
        let sw = efe_vs_vread(&d, -d.p_r, PortId::ReadGate, 0.0, 20.0, 81).unwrap();
        let first = sw.rows[0].1;
        let last = sw.rows[80].1;
        assert!(last < first);
        // saturated over the last volts
        let near_end = sw.rows[76].1;
        assert!((last - near_end).abs() < 0.01 * first.abs());
        for w in sw.rows.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-6 * w[0].1.abs());
        }
    }

    #[test]
    fn single_port_high_state_field_grows() {
        let d = dev();
        let sw = efe_vs_vread(&d, -d.p_r, PortId::WriteGate, 0.0, 2.0, 41).unwrap();
        for w in sw.rows.windows(2) {
            assert!(w[1].1 > w[0].1);
        }
    }

    #[test]
    fn sweep_preconditions() {
        let d = dev();
        assert!(efe_vs_vread(&d, 0.0, PortId::WriteGate, 1.0, 1.0, 5).is_err());
        assert!(efe_vs_vread(&d, 0.0, PortId::WriteGate, 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn profile_flat_band_constant() {
        let d = dev();
        let s = solve_operating_point(&d, 0.0, 0.0, 0.0).unwrap();
        let b = band_profile(&d, &s, 0.0, 0.0).unwrap();
        for (_, v) in &b.points {
            assert!(v.abs() < 1e-6);
        }
    }

    #[test]
    fn profile_rejects_mismatched_bias() {
        let d = dev();
        let s = solve_operating_point(&d, 0.0, 1.0, 0.0).unwrap();
        assert!(matches!(
            band_profile(&d, &s, 0.5, 0.0),
            Err(Error::Consistency(_))
        ));
    }

    #[test]
    fn dual_port_read_drops_mostly_across_box() {
        let d = dev();
        let v = 14.0;
        let s = solve_operating_point(&d, -d.p_r, 0.0, v).unwrap();
        let b = band_profile(&d, &s, 0.0, v).unwrap();
        assert!(-b.box_drop() >= 0.8 * v, "box drop {}", b.box_drop());
    }

    #[test]
    fn single_port_fe_drop_grows_with_read() {
        let d = dev();
        let lo = solve_operating_point(&d, -d.p_r, 0.5, 0.0).unwrap();
        let hi = solve_operating_point(&d, -d.p_r, 1.5, 0.0).unwrap();
        let bl = band_profile(&d, &lo, 0.5, 0.0).unwrap();
        let bh = band_profile(&d, &hi, 1.5, 0.0).unwrap();
        assert!(bh.fe_drop() > bl.fe_drop());
    }

    proptest! {
        #[test]
        fn displacement_invariants(u in -1.0f64..=1.0, vg in -6.0f64..6.0, vb in -25.0f64..25.0) {
            let d = dev();
            let p = u * d.p_r;
            let s = solve_operating_point(&d, p, vg, vb).unwrap();
            let d_fe = EPS0 * d.eps_fe * s.e_fe + p;
            let d_il = EPS0 * d.eps_il * s.e_il;
            let d_box = EPS0 * d.eps_box * s.e_box;
            let scale = d_fe.abs().max(d_il.abs()).max(d_box.abs()).max(p.abs()).max(1e-12);
            prop_assert!((d_fe - d_il).abs() / scale <= 1e-9);
            prop_assert!((d_il - d_box + s.q_body()).abs() / scale <= 1e-9);
            prop_assert!(s.residual <= 1e-9);
            let b = band_profile(&d, &s, vg, vb).unwrap();
            let end = b.points.last().unwrap().1;
            prop_assert!((end - (vb - d.vfb_back)).abs() < 1e-6);
        }

        #[test]
        fn psi_monotone_in_both_gates(u in -1.0f64..=1.0, vg in -5.0f64..5.0, vb in -20.0f64..20.0) {
            let d = dev();
            let p = u * d.p_r;
            let base = solve_operating_point(&d, p, vg, vb).unwrap().psi_s;
            let up_g = solve_operating_point(&d, p, vg + 0.05, vb).unwrap().psi_s;
            let up_b = solve_operating_point(&d, p, vg, vb + 0.05).unwrap().psi_s;
            prop_assert!(up_g >= base - 1e-12);
            prop_assert!(up_b >= base - 1e-12);
        }
    }
}
