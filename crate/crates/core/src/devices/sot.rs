//! SOT-MRAM read path. Resistances are read-path effective values (MTJ plus
//! the read access transistor) tabulated against tunnel-oxide thickness.

use crate::error::{check_range, Result};
use libm::{exp, log};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtjState {
    Parallel,
    AntiParallel,
}

/// MgO thickness rows (nm) with parallel / anti-parallel resistance (ohm).
const ROWS: [(f64, f64, f64); 3] = [(1.1, 8e3, 28e3), (1.2, 12e3, 52e3), (1.3, 20e3, 100e3)];

pub const T_MGO_MIN_NM: f64 = 1.1;
pub const T_MGO_MAX_NM: f64 = 1.3;

/// Read resistance at MgO thickness `t_mgo_nm`, log-linear between rows.
pub fn mtj_resistance(t_mgo_nm: f64, state: MtjState) -> Result<f64> {
    check_range("MgO thickness (nm)", t_mgo_nm, T_MGO_MIN_NM - 1e-12, T_MGO_MAX_NM + 1e-12)?;
    let pick = |row: &(f64, f64, f64)| match state {
        MtjState::Parallel => row.1,
        MtjState::AntiParallel => row.2,
    };
    if let Some(row) = ROWS.iter().find(|r| r.0 == t_mgo_nm) {
        return Ok(pick(row));
    }
    let k = if t_mgo_nm <= ROWS[1].0 { 0 } else { 1 };
    let (a, b) = (&ROWS[k], &ROWS[k + 1]);
    let w = ((t_mgo_nm - a.0) / (b.0 - a.0)).clamp(0.0, 1.0);
    Ok(exp(log(pick(a)) * (1.0 - w) + log(pick(b)) * w))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SotParams {
    pub t_mgo_nm: f64,
    pub r_p: f64,
    pub r_ap: f64,
}

impl SotParams {
    pub fn for_thickness(t_mgo_nm: f64) -> Result<Self> {
        Ok(Self {
            t_mgo_nm,
            r_p: mtj_resistance(t_mgo_nm, MtjState::Parallel)?,
            r_ap: mtj_resistance(t_mgo_nm, MtjState::AntiParallel)?,
        })
    }

    pub fn tmr_ratio(&self) -> f64 {
        self.r_ap / self.r_p
    }
}
