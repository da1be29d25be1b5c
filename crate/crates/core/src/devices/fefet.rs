//! Ferroelectric FET: hysteretic HZO polarization plus an analytic channel.
//!
//! The ferroelectric layer follows a tanh branch pair with loop width
//! `δ = Ec / (2·atanh(Pr/Ps))`, so the major loop crosses `P = 0` at `±Ec`
//! and `E = 0` at `±Pr`. Minor loops shift the active branch by a constant
//! offset at each field reversal and are clipped to the major loop.
//!
//! The channel is an EKV-style charge-sheet model: exponential below
//! threshold, square-law above, symmetric in drain and source. Its four
//! free parameters (specific current, slope factor, mid-gap threshold and
//! memory-window scale) are fitted so that the four (input, weight) corner
//! resistances at the read operating point are reproduced exactly.

use super::{CellResistances, OperatingPoint};
use crate::error::{check_range, Error, Result};
use crate::numeric::bisect;
use libm::{atanh, exp, log, log1p, tanh};

/// kT/q at 300 K (V).
pub const THERMAL_VOLTAGE: f64 = 0.025_852;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FefetParams {
    /// Ferroelectric thickness (nm).
    pub t_fe_nm: f64,
    /// Saturated polarization (µC/cm²).
    pub ps: f64,
    /// Remanent polarization (µC/cm²).
    pub pr: f64,
    pub eps_r: f64,
    /// Coercive field (MV/cm).
    pub ec: f64,
    /// Memory-window scale applied to the ideal `2·Ec·T_FE` window.
    pub k_mw: f64,
    /// Program pulse amplitudes (V).
    pub v_set: f64,
    pub v_reset: f64,
}

/// Ferroelectric thickness rows: (T_FE nm, relative permittivity, Ec MV/cm).
const THICKNESS_ROWS: [(f64, f64, f64); 3] = [(7.0, 22.0, 2.4), (6.0, 23.5, 2.525), (5.0, 25.0, 2.65)];

impl FefetParams {
    /// Parameters for one of the characterised thicknesses (5, 6 or 7 nm).
    pub fn for_thickness(t_fe_nm: f64) -> Result<Self> {
        let (t, eps_r, ec) = THICKNESS_ROWS
            .iter()
            .copied()
            .find(|r| (r.0 - t_fe_nm).abs() < 1e-9)
            .ok_or(Error::Domain {
                what: "FeFET thickness (nm), characterised rows are 5, 6, 7",
                value: t_fe_nm,
                min: 5.0,
                max: 7.0,
            })?;
        Ok(Self {
            t_fe_nm: t,
            ps: 30.0,
            pr: 27.0,
            eps_r,
            ec,
            k_mw: 1.0,
            v_set: 4.0,
            v_reset: -4.0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pr > 0.0 && self.pr < self.ps) {
            return Err(Error::Config("FeFET needs 0 < Pr < Ps".into()));
        }
        if !(self.ec > 0.0 && self.t_fe_nm > 0.0 && self.k_mw >= 0.0) {
            return Err(Error::Config("FeFET needs Ec > 0, T_FE > 0 and k_mw >= 0".into()));
        }
        Ok(())
    }

    /// Preisach loop width δ (MV/cm).
    pub fn loop_width(&self) -> f64 {
        self.ec / (2.0 * atanh(self.pr / self.ps))
    }

    fn ascending(&self, e: f64) -> f64 {
        self.ps * tanh((e - self.ec) / (2.0 * self.loop_width()))
    }

    fn descending(&self, e: f64) -> f64 {
        self.ps * tanh((e + self.ec) / (2.0 * self.loop_width()))
    }
}

/// Threshold-window in volts: `k_mw · 2 · Ec · T_FE` (1 MV/cm = 0.1 V/nm).
pub fn fefet_memory_window(p: &FefetParams) -> f64 {
    p.k_mw * 2.0 * (0.1 * p.ec) * p.t_fe_nm
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Branch {
    Ascending,
    Descending,
}

/// Hysteresis state of the ferroelectric layer. Starts negatively saturated.
#[derive(Debug, Clone, Copy)]
pub struct Preisach {
    params: FefetParams,
    branch: Branch,
    offset: f64,
    field: f64,
    polarization: f64,
}

impl Preisach {
    pub fn new(params: FefetParams) -> Self {
        Self {
            params,
            branch: Branch::Ascending,
            offset: 0.0,
            field: f64::NEG_INFINITY,
            polarization: -params.ps,
        }
    }

    pub fn polarization(&self) -> f64 {
        self.polarization
    }

    /// Moves the applied field to `e` (MV/cm) and returns the new polarization.
    pub fn apply(&mut self, e: f64) -> f64 {
        let p = &self.params;
        if e > self.field && self.branch == Branch::Descending {
            self.branch = Branch::Ascending;
            self.offset = self.polarization - p.ascending(self.field);
        } else if e < self.field && self.branch == Branch::Ascending {
            self.branch = Branch::Descending;
            self.offset = self.polarization - p.descending(self.field);
        }
        self.field = e;
        self.polarization = match self.branch {
            Branch::Ascending => (p.ascending(e) + self.offset).min(p.descending(e)),
            Branch::Descending => (p.descending(e) + self.offset).max(p.ascending(e)),
        };
        self.polarization
    }
}

/// Polarization (µC/cm²) after the field sequence `history` (MV/cm), starting
/// from negative saturation. An empty history leaves the layer at `-Ps`.
pub fn preisach_polarization(p: &FefetParams, history: &[f64]) -> f64 {
    let mut state = Preisach::new(*p);
    for &e in history {
        state.apply(e);
    }
    state.polarization()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FefetState {
    /// Low threshold, stores weight 1.
    Set,
    /// High threshold, stores weight 0.
    Reset,
}

impl FefetState {
    pub fn from_weight(weight: bool) -> Self {
        if weight {
            FefetState::Set
        } else {
            FefetState::Reset
        }
    }
}

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x + exp(-x)
    } else if x < -35.0 {
        exp(x)
    } else {
        log1p(exp(x))
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

/// Normalised charge-sheet current `ln(1 + e^(u/2))²` and its derivative.
#[inline]
fn sheet(u: f64) -> (f64, f64) {
    let s = softplus(0.5 * u);
    (s * s, s * sigmoid(0.5 * u))
}

/// One programmed channel. Terminal voltages are absolute, bulk grounded.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FetChannel {
    /// Specific current (A).
    pub k: f64,
    /// Subthreshold slope factor.
    pub slope: f64,
    /// Threshold voltage (V).
    pub vt: f64,
}

impl FetChannel {
    /// Drain-to-source current with `dI/dV_d` and `dI/dV_s`.
    #[inline]
    pub fn eval(&self, vg: f64, vd: f64, vs: f64) -> (f64, f64, f64) {
        let vp = (vg - self.vt) / self.slope;
        let (ff, dff) = sheet((vp - vs) / THERMAL_VOLTAGE);
        let (fr, dfr) = sheet((vp - vd) / THERMAL_VOLTAGE);
        let g = self.k / THERMAL_VOLTAGE;
        (self.k * (ff - fr), g * dfr, -g * dff)
    }

    fn current(&self, vgs: f64, vds: f64) -> f64 {
        self.eval(vgs, vds, 0.0).0
    }
}

/// Calibrated FeFET: ferroelectric parameters plus the fitted channel.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FefetDevice {
    pub params: FefetParams,
    pub k: f64,
    pub slope: f64,
    /// Threshold midway between the programmed states (V).
    pub vt_mid: f64,
}

impl FefetDevice {
    pub fn threshold(&self, state: FefetState) -> f64 {
        let half = 0.5 * fefet_memory_window(&self.params);
        match state {
            FefetState::Set => self.vt_mid - half,
            FefetState::Reset => self.vt_mid + half,
        }
    }

    pub fn channel(&self, state: FefetState) -> FetChannel {
        FetChannel {
            k: self.k,
            slope: self.slope,
            vt: self.threshold(state),
        }
    }

    /// Fits the channel so the corner resistances at `op` equal `targets`.
    /// `params.k_mw` is replaced by the fitted window scale.
    pub fn calibrate(params: FefetParams, targets: &CellResistances, op: OperatingPoint) -> Result<Self> {
        params.validate()?;
        targets.validate_positive()?;
        let (vg, vd) = (op.v_wl, op.v_read);
        let gate_ratio = |vt: f64, slope: f64| {
            let ch = FetChannel { k: 1.0, slope, vt };
            ch.current(vg, vd) / ch.current(0.0, vd)
        };
        let vt_for_ratio = |slope: f64, ratio: f64| {
            bisect(|vt| log(gate_ratio(vt, slope) / ratio), -5.0, 5.0, 200)
        };
        // For a given slope factor: both thresholds from the on/off ratios,
        // the specific current from R_ON, and the mismatch left in R_HRS.
        let fit = |slope: f64| -> Option<(f64, f64, f64, f64)> {
            let vt_reset = vt_for_ratio(slope, targets.off_h / targets.hrs)?;
            let vt_set = vt_for_ratio(slope, targets.off / targets.on)?;
            let unit = FetChannel { k: 1.0, slope, vt: vt_set };
            let k = vd / (targets.on * unit.current(vg, vd));
            let hrs = vd / (FetChannel { k, slope, vt: vt_reset }).current(vg, vd);
            Some((k, vt_set, vt_reset, log(hrs / targets.hrs)))
        };
        let mut bracket = None;
        let mut prev: Option<(f64, f64)> = None;
        let mut slope = 1.0;
        while slope <= 10.0 {
            if let Some((_, _, _, r)) = fit(slope) {
                if let Some((s0, r0)) = prev {
                    if r0 * r <= 0.0 {
                        bracket = Some((s0, slope));
                        break;
                    }
                }
                prev = Some((slope, r));
            }
            slope += 0.01;
        }
        let (lo, hi) = bracket.ok_or(Error::Uncalibrated("FeFET corners cannot be fitted by the channel model"))?;
        let slope = bisect(|s| fit(s).map_or(f64::NAN, |f| f.3), lo, hi, 200)
            .ok_or(Error::Uncalibrated("FeFET slope fit failed"))?;
        let (k, vt_set, vt_reset, _) = fit(slope).ok_or(Error::Uncalibrated("FeFET fit failed"))?;
        let ideal_window = 2.0 * 0.1 * params.ec * params.t_fe_nm;
        let params = FefetParams {
            k_mw: (vt_reset - vt_set) / ideal_window,
            ..params
        };
        Ok(Self {
            params,
            k,
            slope,
            vt_mid: 0.5 * (vt_set + vt_reset),
        })
    }

    /// Same channel at another characterised thickness, with the set-state
    /// threshold re-fitted so the ON resistance stays at `r_on`.
    pub fn with_thickness(&self, t_fe_nm: f64, r_on: f64, op: OperatingPoint) -> Result<Self> {
        let params = FefetParams {
            k_mw: self.params.k_mw,
            ..FefetParams::for_thickness(t_fe_nm)?
        };
        Self { params, ..*self }.with_ron(r_on, op)
    }

    /// Re-fits the set-state threshold for ON resistance `r_on` at `op`.
    pub fn with_ron(&self, r_on: f64, op: OperatingPoint) -> Result<Self> {
        if !(r_on > 0.0) {
            return Err(Error::Config("FeFET R_ON must be positive".into()));
        }
        let (k, slope) = (self.k, self.slope);
        let vt_set = bisect(
            |vt| log(op.v_read / (FetChannel { k, slope, vt }).current(op.v_wl, op.v_read) / r_on),
            -5.0,
            5.0,
            200,
        )
        .ok_or(Error::Uncalibrated("FeFET R_ON outside reachable range"))?;
        let half = 0.5 * fefet_memory_window(&self.params);
        Ok(Self {
            vt_mid: vt_set + half,
            ..*self
        })
    }

    /// Chord resistance `v_read / I` of the four (input, weight) corners.
    pub fn corner_resistances(&self, op: OperatingPoint) -> CellResistances {
        let r = |input: bool, weight: bool| {
            let ch = self.channel(FefetState::from_weight(weight));
            let vg = if input { op.v_wl } else { 0.0 };
            op.v_read / ch.current(vg, op.v_read)
        };
        CellResistances {
            on: r(true, true),
            hrs: r(true, false),
            off: r(false, true),
            off_h: r(false, false),
        }
    }

    /// Polarization left after a global reset pulse and, for the set state,
    /// a following set pulse.
    pub fn remanent_polarization(&self, state: FefetState) -> f64 {
        let p = &self.params;
        let e = |v: f64| 10.0 * v / p.t_fe_nm;
        match state {
            FefetState::Reset => preisach_polarization(p, &[e(p.v_reset), 0.0]),
            FefetState::Set => preisach_polarization(p, &[e(p.v_reset), 0.0, e(p.v_set), 0.0]),
        }
    }
}

/// Maximum gate and drain bias accepted by [`fefet_ids`].
pub const MAX_VGS: f64 = 0.7;
pub const MAX_VDS: f64 = 0.25;

/// Drain current with the source grounded.
pub fn fefet_ids(v_gs: f64, v_ds: f64, state: FefetState, dev: &FefetDevice) -> Result<f64> {
    check_range("FeFET V_GS (V)", v_gs, 0.0, MAX_VGS + 1e-12)?;
    check_range("FeFET V_DS (V)", v_ds, 0.0, MAX_VDS + 1e-12)?;
    Ok(dev.channel(state).current(v_gs, v_ds))
}
