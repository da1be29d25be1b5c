//! Filamentary ReRAM: `I = I0 · exp(-g/g0) · sinh(V/V0)`, where `g` is the
//! tunnelling gap between filament tip and the opposite electrode.

use crate::error::{check_range, Error, Result};
use libm::{exp, log, sinh, cosh};

/// Shortest and longest gap supported by the compact-model calibration (nm).
pub const GAP_MIN_NM: f64 = 0.34;
pub const GAP_MAX_NM: f64 = 1.09;

/// Largest |V| accepted by [`reram_current`].
pub const MAX_BIAS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReramParams {
    /// Current prefactor (A).
    pub i0: f64,
    /// Gap decay length (nm).
    pub g0_nm: f64,
    /// Voltage scale of the sinh non-linearity (V).
    pub v0: f64,
    /// Gap length (nm).
    pub gap_nm: f64,
}

impl Default for ReramParams {
    /// Al-doped HfOx coefficients: 0.2 mA, 0.15 nm, 0.35 V, at the shortest gap.
    fn default() -> Self {
        Self {
            i0: 0.2e-3,
            g0_nm: 0.15,
            v0: 0.35,
            gap_nm: GAP_MIN_NM,
        }
    }
}

impl ReramParams {
    pub fn validate(&self) -> Result<()> {
        for (what, v) in [("reram.i0", self.i0), ("reram.g0", self.g0_nm), ("reram.v0", self.v0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain {
                    what,
                    value: v,
                    min: f64::MIN_POSITIVE,
                    max: f64::INFINITY,
                });
            }
        }
        check_range("reram gap (nm)", self.gap_nm, GAP_MIN_NM, GAP_MAX_NM)?;
        Ok(())
    }

    pub fn with_gap(self, gap_nm: f64) -> Result<Self> {
        let p = Self { gap_nm, ..self };
        p.validate()?;
        Ok(p)
    }

    #[inline]
    fn prefactor(&self) -> f64 {
        self.i0 * exp(-self.gap_nm / self.g0_nm)
    }

    /// `dV/dI` at zero bias.
    pub fn small_signal_resistance(&self) -> f64 {
        self.v0 / self.prefactor()
    }

    /// Current and `dI/dV` at bias `v`, without domain checks.
    #[inline]
    pub fn eval(&self, v: f64) -> (f64, f64) {
        let a = self.prefactor();
        let x = v / self.v0;
        (a * sinh(x), a * cosh(x) / self.v0)
    }
}

/// Device current at bias `v`.
pub fn reram_current(p: &ReramParams, v: f64) -> Result<f64> {
    p.validate()?;
    check_range("reram bias (V)", v, -MAX_BIAS, MAX_BIAS)?;
    Ok(p.eval(v).0)
}

/// Gap whose zero-bias resistance equals `r_target`: `g = g0 · ln(I0·R/V0)`.
/// The gap field of `p` is ignored.
pub fn reram_gap_for_resistance(p: &ReramParams, r_target: f64) -> Result<f64> {
    let lo = ReramParams { gap_nm: GAP_MIN_NM, ..*p }.small_signal_resistance();
    let hi = ReramParams { gap_nm: GAP_MAX_NM, ..*p }.small_signal_resistance();
    check_range("reram target resistance (ohm)", r_target, lo, hi)?;
    let g = p.g0_nm * log(p.i0 * r_target / p.v0);
    Ok(g.clamp(GAP_MIN_NM, GAP_MAX_NM))
}
