use super::fefet::{FefetDevice, FefetParams, FefetState, FetChannel};
use super::reram::{ReramParams, GAP_MAX_NM, GAP_MIN_NM, MAX_BIAS};
use super::sot::{mtj_resistance, MtjState};
use super::sram::{ron_for_vbias, vbias_for_ron};
use super::{CellResistances, OperatingPoint, Technology};
use crate::error::{check_range, Error, Result};
use crate::numeric::bisect;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Fidelity {
    /// Linear resistor per (input, weight) state.
    #[default]
    Level0,
    /// Technology physics calibrated to the same corners.
    Level1,
}

/// Technology knobs. Fields that do not apply to `tech` are ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct DeviceConfig {
    pub tech: Technology,
    pub fidelity: Fidelity,
    /// ON resistance target (ohm). Bound to V_BIAS for SRAM, the gap for
    /// ReRAM and the set-state threshold for FeFET. Not tunable for SOT-MRAM.
    pub r_on: Option<f64>,
    /// SRAM read-port gate bias (V), used when `r_on` is unset.
    pub sram_v_bias: f64,
    /// ReRAM compact-model coefficients. `gap_nm` is ignored.
    pub reram: ReramParams,
    /// Fixed ON-state gap (nm). When unset the gap is fitted to `r_on`.
    pub reram_gap_nm: Option<f64>,
    /// ReRAM access transistor resistance when the word line is on (ohm).
    pub reram_access_ohm: f64,
    pub fefet_t_fe_nm: f64,
    pub sot_t_mgo_nm: f64,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self {
            tech: Technology::Fefet,
            fidelity: Fidelity::Level0,
            r_on: None,
            sram_v_bias: 0.52,
            reram: ReramParams::default(),
            reram_gap_nm: None,
            reram_access_ohm: 3e3,
            fefet_t_fe_nm: 7.0,
            sot_t_mgo_nm: 1.3,
        }
    }
}

impl DeviceConfig {
    pub fn new(tech: Technology) -> Self {
        Self { tech, ..Self::default() }
    }
}

/// Physical knob values a configuration resolved to.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KnobBindings {
    pub r_on: f64,
    pub sram_v_bias: Option<f64>,
    /// `None` when no gap reproduces the requested R_ON.
    pub reram_gap_nm: Option<f64>,
    pub fefet_t_fe_nm: Option<f64>,
    pub fefet_vt_set: Option<f64>,
    pub fefet_memory_window: Option<f64>,
    pub sot_t_mgo_nm: Option<f64>,
}

/// Circuit element realising one cell in one (input, weight) state.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum CellElement {
    Linear { r: f64 },
    /// Access resistance in series with a sinh element.
    Sinh { device: ReramParams, access: f64 },
    /// Channel with a fixed gate voltage; drain is the first terminal.
    Fet { channel: FetChannel, vg: f64 },
}

impl CellElement {
    /// Element whose current at every bias is multiplied by `factor`.
    pub fn scaled(self, factor: f64) -> Self {
        match self {
            CellElement::Linear { r } => CellElement::Linear { r: r / factor },
            CellElement::Sinh { device, access } => CellElement::Sinh {
                device: ReramParams {
                    i0: device.i0 * factor,
                    ..device
                },
                access: access / factor,
            },
            CellElement::Fet { channel, vg } => CellElement::Fet {
                channel: FetChannel {
                    k: channel.k * factor,
                    ..channel
                },
                vg,
            },
        }
    }

    /// Current and `dI/dV` with `v` across the element (second terminal at 0 V).
    pub fn current(&self, v: f64) -> (f64, f64) {
        match *self {
            CellElement::Linear { r } => (v / r, 1.0 / r),
            CellElement::Fet { channel, vg } => {
                let (i, gd, _) = channel.eval(vg, v, 0.0);
                (i, gd)
            }
            CellElement::Sinh { device, access } => {
                if v == 0.0 {
                    return (0.0, 1.0 / (access + 1.0 / device.eval(0.0).1));
                }
                // Voltage across the sinh part: vs + access·f(vs) = v.
                let (lo, hi) = if v > 0.0 { (0.0, v) } else { (v, 0.0) };
                let vs = bisect(|x| x + access * device.eval(x).0 - v, lo, hi, 200).unwrap_or(v);
                let (i, g) = device.eval(vs);
                (i, 1.0 / (access + 1.0 / g))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Physics {
    Table(CellResistances),
    Reram {
        on: ReramParams,
        off: ReramParams,
        access_on: f64,
        access_off: f64,
    },
    Fefet(FefetDevice),
    Sot {
        r_p: f64,
        r_ap: f64,
        access_off: f64,
    },
}

/// A calibrated bit-cell: the Level0 resistance table, the Level1 physics
/// (when the requested knobs are reachable) and the resolved knob values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BitCell {
    pub tech: Technology,
    pub fidelity: Fidelity,
    pub op: OperatingPoint,
    pub table: CellResistances,
    pub bindings: KnobBindings,
    physics: Option<Physics>,
}

impl BitCell {
    pub fn new(cfg: &DeviceConfig, op: OperatingPoint) -> Result<Self> {
        check_range("word-line voltage (V)", op.v_wl, 0.0, 0.7)?;
        check_range("read voltage (V)", op.v_read, 1e-6, 0.7)?;
        let published = CellResistances::published(cfg.tech);
        let mut bindings = KnobBindings::default();
        let (table, physics) = match cfg.tech {
            Technology::Sram => {
                let (r_on, v_bias) = match cfg.r_on {
                    Some(r) => (r, vbias_for_ron(r)?),
                    None => (ron_for_vbias(cfg.sram_v_bias)?, cfg.sram_v_bias),
                };
                bindings.sram_v_bias = Some(v_bias);
                let table = CellResistances { on: r_on, ..published };
                (table, Some(Physics::Table(table)))
            }
            Technology::Reram => {
                cfg.reram.with_gap(GAP_MIN_NM)?;
                let access_on = cfg.reram_access_ohm;
                if !(access_on >= 0.0) {
                    return Err(Error::Config("ReRAM access resistance must be non-negative".into()));
                }
                let chord = |gap: f64| {
                    let device = ReramParams { gap_nm: gap, ..cfg.reram };
                    op.v_read / CellElement::Sinh { device, access: access_on }.current(op.v_read).0
                };
                let (r_on, gap) = match cfg.reram_gap_nm {
                    Some(g) => {
                        check_range("ReRAM gap (nm)", g, GAP_MIN_NM, GAP_MAX_NM)?;
                        (chord(g), Some(g))
                    }
                    None => {
                        let target = cfg.r_on.unwrap_or(published.on);
                        if !(target > 0.0) {
                            return Err(Error::Config("R_ON must be positive".into()));
                        }
                        (target, bisect(|g| log_ratio(chord(g), target), GAP_MIN_NM, GAP_MAX_NM, 200))
                    }
                };
                bindings.reram_gap_nm = gap;
                let physics = gap.map(|g| {
                    let on = ReramParams { gap_nm: g, ..cfg.reram };
                    let off = ReramParams {
                        gap_nm: GAP_MAX_NM,
                        ..cfg.reram
                    };
                    Physics::Reram {
                        on,
                        off,
                        access_on,
                        access_off: (published.off - on.small_signal_resistance()).max(access_on),
                    }
                });
                (CellResistances { on: r_on, ..published }, physics)
            }
            Technology::Fefet => {
                let base = fefet_reference(op)?;
                let nominal = base.with_thickness(cfg.fefet_t_fe_nm, published.on, op)?;
                let corners = nominal.corner_resistances(op);
                let dev = match cfg.r_on {
                    Some(r) => nominal.with_ron(r, op)?,
                    None => nominal,
                };
                bindings.fefet_t_fe_nm = Some(cfg.fefet_t_fe_nm);
                bindings.fefet_vt_set = Some(dev.threshold(FefetState::Set));
                bindings.fefet_memory_window = Some(super::fefet_memory_window(&dev.params));
                let table = CellResistances {
                    on: cfg.r_on.unwrap_or(corners.on),
                    ..corners
                };
                (table, Some(Physics::Fefet(dev)))
            }
            Technology::SotMram => {
                if cfg.r_on.is_some() {
                    return Err(Error::Unsupported(
                        "SOT-MRAM R_ON is set by the MgO thickness, not tunable independently".into(),
                    ));
                }
                let r_p = mtj_resistance(cfg.sot_t_mgo_nm, MtjState::Parallel)?;
                let r_ap = mtj_resistance(cfg.sot_t_mgo_nm, MtjState::AntiParallel)?;
                bindings.sot_t_mgo_nm = Some(cfg.sot_t_mgo_nm);
                let table = CellResistances {
                    on: r_p,
                    hrs: r_ap,
                    ..published
                };
                let physics = Physics::Sot {
                    r_p,
                    r_ap,
                    access_off: published.off - published.on,
                };
                (table, Some(physics))
            }
        };
        table.validate_positive()?;
        bindings.r_on = table.on;
        Ok(Self {
            tech: cfg.tech,
            fidelity: cfg.fidelity,
            op,
            table,
            bindings,
            physics,
        })
    }

    /// Conductance of the (input=1, weight=1) state.
    pub fn g_on(&self) -> f64 {
        1.0 / self.table.on
    }

    /// Level0 conductance of a state.
    pub fn conductance(&self, input: bool, weight: bool) -> f64 {
        1.0 / self.table.get(input, weight)
    }

    pub fn level1_available(&self) -> bool {
        self.physics.is_some()
    }

    /// Element at the configured fidelity.
    pub fn element(&self, input: bool, weight: bool) -> Result<CellElement> {
        match self.fidelity {
            Fidelity::Level0 => Ok(CellElement::Linear {
                r: self.table.get(input, weight),
            }),
            Fidelity::Level1 => self.physical_element(input, weight),
        }
    }

    /// Level1 element regardless of the configured fidelity.
    pub fn physical_element(&self, input: bool, weight: bool) -> Result<CellElement> {
        let physics = self
            .physics
            .ok_or(Error::Uncalibrated("no physical setting reproduces the requested R_ON"))?;
        Ok(match physics {
            Physics::Table(t) => CellElement::Linear { r: t.get(input, weight) },
            Physics::Reram {
                on,
                off,
                access_on,
                access_off,
            } => CellElement::Sinh {
                device: if weight { on } else { off },
                access: if input { access_on } else { access_off },
            },
            Physics::Fefet(dev) => CellElement::Fet {
                channel: dev.channel(FefetState::from_weight(weight)),
                vg: if input { self.op.v_wl } else { 0.0 },
            },
            Physics::Sot { r_p, r_ap, access_off } => {
                let mtj = if weight { r_p } else { r_ap };
                CellElement::Linear {
                    r: if input { mtj } else { access_off + mtj },
                }
            }
        })
    }

    /// Level1 chord resistance `v_read / I` of each corner.
    pub fn level1_resistances(&self) -> Result<CellResistances> {
        let r = |i: bool, w: bool| -> Result<f64> {
            let el = self.physical_element(i, w)?;
            Ok(self.op.v_read / el.current(self.op.v_read).0)
        };
        Ok(CellResistances {
            on: r(true, true)?,
            hrs: r(true, false)?,
            off: r(false, true)?,
            off_h: r(false, false)?,
        })
    }

    pub fn fefet_device(&self) -> Option<FefetDevice> {
        match self.physics {
            Some(Physics::Fefet(d)) => Some(d),
            _ => None,
        }
    }
}

fn log_ratio(a: f64, b: f64) -> f64 {
    libm::log(a / b)
}

/// The 7 nm FeFET fitted to the published corners.
fn fefet_reference(op: OperatingPoint) -> Result<FefetDevice> {
    FefetDevice::calibrate(
        FefetParams::for_thickness(7.0)?,
        &CellResistances::published(Technology::Fefet),
        op,
    )
}

/// Cell current and `dI/dV` at `v_cell` across the cell, at the cell's fidelity.
pub fn bitcell_iv(cell: &BitCell, input: bool, weight: bool, v_cell: f64) -> Result<(f64, f64)> {
    check_range("cell voltage (V)", v_cell, -MAX_BIAS, MAX_BIAS)?;
    let el = cell.element(input, weight)?;
    Ok(el.current(v_cell))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(tech: Technology, fidelity: Fidelity) -> BitCell {
        BitCell::new(
            &DeviceConfig {
                fidelity,
                ..DeviceConfig::new(tech)
            },
            OperatingPoint::default(),
        )
        .unwrap()
    }

    #[test]
    fn level1_corners_within_five_percent() {
        for tech in Technology::ALL {
            let c = cell(tech, Fidelity::Level1);
            let l1 = c.level1_resistances().unwrap();
            let t = CellResistances::published(tech);
            for (a, b) in [(l1.on, t.on), (l1.hrs, t.hrs), (l1.off, t.off), (l1.off_h, t.off_h)] {
                assert!((a / b - 1.0).abs() <= 0.05, "{tech}: {a} vs {b}");
            }
            assert!(l1.ordering_holds(tech), "{tech}");
        }
    }

    #[test]
    fn sram_on_current_at_optimum_bias() {
        let c = cell(Technology::Sram, Fidelity::Level1);
        let (i, _) = bitcell_iv(&c, true, true, 0.25).unwrap();
        assert!((i - 0.25 / 60e3).abs() / i < 1e-9);
        assert_eq!(c.bindings.sram_v_bias, Some(0.52));
    }

    #[test]
    fn sot_hrs_current() {
        let c = cell(Technology::SotMram, Fidelity::Level1);
        let (i, _) = bitcell_iv(&c, true, false, 0.25).unwrap();
        assert!((i - 2.5e-6).abs() / i < 1e-9);
    }

    #[test]
    fn zero_bias_zero_current() {
        for tech in Technology::ALL {
            for fid in [Fidelity::Level0, Fidelity::Level1] {
                let c = cell(tech, fid);
                for (i, w) in [(false, false), (false, true), (true, false), (true, true)] {
                    assert_eq!(bitcell_iv(&c, i, w, 0.0).unwrap().0, 0.0);
                }
            }
        }
    }

    #[test]
    fn reram_gap_binding_near_half_nanometre() {
        let c = cell(Technology::Reram, Fidelity::Level1);
        let g = c.bindings.reram_gap_nm.unwrap();
        assert!((g - 0.53).abs() < 0.01, "{g}");
    }

    #[test]
    fn reram_low_ron_is_level0_only() {
        let cfg = DeviceConfig {
            r_on: Some(10e3),
            ..DeviceConfig::new(Technology::Reram)
        };
        let c = BitCell::new(&cfg, OperatingPoint::default()).unwrap();
        assert_eq!(c.table.on, 10e3);
        assert!(c.bindings.reram_gap_nm.is_none());
        assert!(matches!(c.physical_element(true, true), Err(Error::Uncalibrated(_))));
    }

    #[test]
    fn sot_ron_not_tunable() {
        let cfg = DeviceConfig {
            r_on: Some(60e3),
            ..DeviceConfig::new(Technology::SotMram)
        };
        assert!(matches!(BitCell::new(&cfg, OperatingPoint::default()), Err(Error::Unsupported(_))));
    }

    #[test]
    fn fefet_ron_override_refits_threshold() {
        let base = cell(Technology::Fefet, Fidelity::Level1);
        let cfg = DeviceConfig {
            r_on: Some(20e3),
            fidelity: Fidelity::Level1,
            ..DeviceConfig::new(Technology::Fefet)
        };
        let c = BitCell::new(&cfg, OperatingPoint::default()).unwrap();
        assert_eq!(c.table.on, 20e3);
        assert_eq!(c.table.hrs, base.table.hrs);
        let l1 = c.level1_resistances().unwrap();
        assert!((l1.on / 20e3 - 1.0).abs() < 1e-6);
        assert!(c.bindings.fefet_vt_set.unwrap() < base.bindings.fefet_vt_set.unwrap());
    }

    #[test]
    fn scaling_multiplies_current() {
        for tech in Technology::ALL {
            let c = cell(tech, Fidelity::Level1);
            for (i, w) in [(true, true), (false, false)] {
                let el = c.physical_element(i, w).unwrap();
                let a = el.current(0.2).0;
                let b = el.scaled(1.3).current(0.2).0;
                assert!((b / a - 1.3).abs() < 1e-9, "{tech}");
            }
        }
    }

    #[test]
    fn derivative_matches_central_difference() {
        for tech in Technology::ALL {
            for fid in [Fidelity::Level0, Fidelity::Level1] {
                let c = cell(tech, fid);
                for (i, w) in [(false, false), (false, true), (true, false), (true, true)] {
                    for &v in &[0.05, 0.17, 0.25, -0.1] {
                        let h = 1e-6;
                        let (_, g) = bitcell_iv(&c, i, w, v).unwrap();
                        let fd = (bitcell_iv(&c, i, w, v + h).unwrap().0 - bitcell_iv(&c, i, w, v - h).unwrap().0) / (2.0 * h);
                        assert!((g - fd).abs() <= 1e-5 * g.abs(), "{tech} {fid:?} ({i},{w}) v={v}: {g} vs {fd}");
                    }
                }
            }
        }
    }
}
