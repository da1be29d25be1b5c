//! Bit-cell device models.
//!
//! Each technology exposes its physics (`reram`, `fefet`, `sot`, `sram`) and
//! a calibrated [`BitCell`] that turns an (input bit, weight bit) pair into a
//! circuit element for the crossbar netlist.

mod cell;
pub mod fefet;
pub mod reram;
pub mod sot;
pub mod sram;

pub use cell::{bitcell_iv, BitCell, CellElement, DeviceConfig, Fidelity, KnobBindings};
pub use fefet::{fefet_ids, fefet_memory_window, preisach_polarization, FefetDevice, FefetParams, FefetState};
pub use reram::{reram_current, reram_gap_for_resistance, ReramParams};
pub use sot::{mtj_resistance, MtjState, SotParams};
pub use sram::{ron_for_vbias, vbias_for_ron};

use crate::error::{Error, Result};
use alloc::format;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Technology {
    Sram,
    Reram,
    Fefet,
    SotMram,
}

impl Technology {
    pub const ALL: [Technology; 4] = [Technology::Sram, Technology::Reram, Technology::Fefet, Technology::SotMram];

    pub fn name(self) -> &'static str {
        match self {
            Technology::Sram => "sram",
            Technology::Reram => "reram",
            Technology::Fefet => "fefet",
            Technology::SotMram => "sot-mram",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "sram" => Ok(Technology::Sram),
            "reram" | "rram" => Ok(Technology::Reram),
            "fefet" => Ok(Technology::Fefet),
            "sot-mram" | "sot" | "sotmram" | "mram" => Ok(Technology::SotMram),
            _ => Err(Error::Config(format!("unknown technology `{s}` (sram, reram, fefet, sot-mram)"))),
        }
    }

    /// Bit-cell height along the column (µm): 2, 1.5, 1 and 2 gate pitches of 54 nm.
    pub fn vertical_pitch_um(self) -> f64 {
        match self {
            Technology::Sram => 0.108,
            Technology::Reram => 0.081,
            Technology::Fefet => 0.054,
            Technology::SotMram => 0.108,
        }
    }
}

impl core::fmt::Display for Technology {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Read bias: word-line voltage on active gates and the voltage across a cell.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OperatingPoint {
    pub v_wl: f64,
    pub v_read: f64,
}

impl Default for OperatingPoint {
    fn default() -> Self {
        Self { v_wl: 0.7, v_read: 0.25 }
    }
}

/// Cell resistance for each (input, weight) combination.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CellResistances {
    /// (1, 1)
    pub on: f64,
    /// (1, 0)
    pub hrs: f64,
    /// (0, 1)
    pub off: f64,
    /// (0, 0)
    pub off_h: f64,
}

impl CellResistances {
    /// Published per-technology corner resistances (ohm).
    pub fn published(tech: Technology) -> Self {
        let (on, hrs, off, off_h) = match tech {
            Technology::Sram => (60e3, 2.1e11, 1.5e11, 4.5e11),
            Technology::Fefet => (60e3, 4e6, 2.3e7, 4.6e9),
            Technology::Reram => (60e3, 2.3e6, 2.1e8, 2.1e8),
            Technology::SotMram => (20e3, 1e5, 2.1e8, 2.1e8),
        };
        Self { on, hrs, off, off_h }
    }

    pub fn get(&self, input: bool, weight: bool) -> f64 {
        match (input, weight) {
            (true, true) => self.on,
            (true, false) => self.hrs,
            (false, true) => self.off,
            (false, false) => self.off_h,
        }
    }

    pub fn validate_positive(&self) -> Result<()> {
        for r in [self.on, self.hrs, self.off, self.off_h] {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Config(format!("cell resistance must be positive and finite, got {r}")));
            }
        }
        Ok(())
    }

    /// The state orderings every technology is expected to respect.
    pub fn ordering_holds(&self, tech: Technology) -> bool {
        let non_sram = matches!(tech, Technology::Sram) || self.hrs < self.off;
        let leak = !matches!(tech, Technology::Sram | Technology::Fefet) || self.off_h > self.off;
        let flat = !matches!(tech, Technology::Reram | Technology::SotMram) || (self.off_h / self.off - 1.0).abs() <= 0.1;
        self.on < self.hrs && non_sram && leak && flat
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_tables_respect_orderings() {
        for t in Technology::ALL {
            let c = CellResistances::published(t);
            assert!(c.ordering_holds(t), "{t}");
        }
    }

    #[test]
    fn names_round_trip() {
        for t in Technology::ALL {
            assert_eq!(Technology::parse(t.name()).unwrap(), t);
        }
        assert!(Technology::parse("pcm").is_err());
    }
}
