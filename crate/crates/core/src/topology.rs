//! Crossbar netlists with distributed wire, via, driver and sink resistance.
//!
//! Node 0 is ground. Every current path crosses one via between the driver
//! and its rail and one via between the sense rail and its sink.
//!
//! Gate-input, per column `j`:
//!
//! ```text
//! src --R_D-- a --via-- b --seg-- bl[0] --seg-- ... bl[n-1]
//!                                  |                 |
//!                                cell              cell
//!                                  |                 |
//!                                sl[0] --seg-- ... sl[n-1] --seg-- c --via-- sense --R_S-- gnd
//! ```
//!
//! Drain-input: each row has a horizontal rail driven by `input[i]·V_BL`
//! (`src_i --R_D-- a_i --via-- b_i --hseg-- bl[i][0] ... bl[i][m-1]`), each
//! column a vertical sense rail as above, and every gate sits at `V_WL`.

use crate::devices::{BitCell, CellElement, DeviceConfig, OperatingPoint, Technology};
use crate::error::{check_range, Error, Result};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct Parasitics {
    /// Interconnect resistance per length (ohm/µm).
    pub wire_res: f64,
    /// Resistance of one via (ohm).
    pub via_res: f64,
    /// Driver resistance (ohm).
    pub r_driver: f64,
    /// Sink resistance (ohm).
    pub r_sink: f64,
    /// Cell height along a column (µm). `None` uses the technology's height.
    pub vertical_pitch: Option<f64>,
    /// Cell width along a row (µm). `None` uses the vertical pitch.
    pub horizontal_pitch: Option<f64>,
}

impl Default for Parasitics {
    /// 7 nm array values: 182 ohm/µm wires, 56 ohm vias, 500 ohm driver, 100 ohm sink.
    fn default() -> Self {
        Self {
            wire_res: 182.0,
            via_res: 56.0,
            r_driver: 500.0,
            r_sink: 100.0,
            vertical_pitch: None,
            horizontal_pitch: None,
        }
    }
}

impl Parasitics {
    pub fn zero() -> Self {
        Self::default().scaled(0.0)
    }

    /// Every parasitic resistance multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            wire_res: self.wire_res * k,
            via_res: self.via_res * k,
            r_driver: self.r_driver * k,
            r_sink: self.r_sink * k,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (what, v) in [
            ("parasitics.wire_res", self.wire_res),
            ("parasitics.via_res", self.via_res),
            ("parasitics.r_driver", self.r_driver),
            ("parasitics.r_sink", self.r_sink),
        ] {
            check_range(what, v, 0.0, f64::MAX)?;
        }
        for (what, v) in [
            ("parasitics.vertical_pitch", self.vertical_pitch),
            ("parasitics.horizontal_pitch", self.horizontal_pitch),
        ] {
            if let Some(p) = v {
                if !(p > 0.0 && p.is_finite()) {
                    return Err(Error::Config(format!("{what} must be positive, got {p}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Vertical,
    Horizontal,
}

/// Wire resistance of one cell pitch.
pub fn segment_resistance(tech: Technology, p: &Parasitics, axis: Axis) -> f64 {
    let vertical = p.vertical_pitch.unwrap_or(tech.vertical_pitch_um());
    let pitch = match axis {
        Axis::Vertical => vertical,
        Axis::Horizontal => p.horizontal_pitch.unwrap_or(vertical),
    };
    pitch * p.wire_res
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Topology {
    /// Inputs drive word lines; columns are independent.
    #[default]
    GateInput,
    /// Inputs drive horizontal bit lines; the whole array is coupled.
    DrainInput,
}

/// Word-line activation: all rows at once, or groups of `group` rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Activation {
    #[default]
    Fwa,
    Pwa(usize),
}

impl Activation {
    /// Row ranges activated together.
    pub fn groups(&self, rows: usize) -> Vec<core::ops::Range<usize>> {
        let g = match *self {
            Activation::Fwa => rows,
            Activation::Pwa(g) => g.min(rows).max(1),
        };
        (0..rows).step_by(g).map(|s| s..(s + g).min(rows)).collect()
    }

    pub fn active_rows(&self, rows: usize) -> usize {
        match *self {
            Activation::Fwa => rows,
            Activation::Pwa(g) => g.min(rows),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct CrossbarConfig {
    pub rows: usize,
    pub cols: usize,
    pub topology: Topology,
    /// Word-line voltage on active gates (V).
    pub v_wl: f64,
    /// Bit-line read voltage (V).
    pub v_bl: f64,
    pub activation: Activation,
    pub device: DeviceConfig,
    pub parasitics: Parasitics,
}

impl Default for CrossbarConfig {
    /// 64 x 64 array read at 0.7 V word line and 0.25 V bit line.
    fn default() -> Self {
        Self {
            rows: 64,
            cols: 64,
            topology: Topology::GateInput,
            v_wl: 0.7,
            v_bl: 0.25,
            activation: Activation::Fwa,
            device: DeviceConfig::default(),
            parasitics: Parasitics::default(),
        }
    }
}

impl CrossbarConfig {
    pub fn new(tech: Technology, rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            device: DeviceConfig::new(tech),
            ..Self::default()
        }
    }

    pub fn tech(&self) -> Technology {
        self.device.tech
    }

    pub fn operating_point(&self) -> OperatingPoint {
        OperatingPoint {
            v_wl: self.v_wl,
            v_read: self.v_bl,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Config("rows and cols must be at least 1".into()));
        }
        check_range("v_wl (V)", self.v_wl, 0.0, 0.7)?;
        check_range("v_bl (V)", self.v_bl, 0.0, 0.7)?;
        if let Activation::Pwa(g) = self.activation {
            if g == 0 || self.rows % g != 0 {
                return Err(Error::Config(format!(
                    "PWA group size {g} must divide the row count {}",
                    self.rows
                )));
            }
        }
        self.parasitics.validate()
    }

    /// Validates the configuration and calibrates its bit-cell.
    pub fn bit_cell(&self) -> Result<BitCell> {
        self.validate()?;
        BitCell::new(&self.device, self.operating_point())
    }

    pub fn segment(&self, axis: Axis) -> f64 {
        segment_resistance(self.tech(), &self.parasitics, axis)
    }
}

pub type NodeId = usize;
pub const GROUND: NodeId = 0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Element {
    /// Linear resistor; zero ohms is allowed and becomes a current unknown.
    Resistor { a: NodeId, b: NodeId, r: f64 },
    /// Bit-cell device from `a` (bit-line side) to `b` (sense side).
    Device { a: NodeId, b: NodeId, el: CellElement },
}

impl Element {
    pub fn terminals(&self) -> (NodeId, NodeId) {
        match *self {
            Element::Resistor { a, b, .. } | Element::Device { a, b, .. } => (a, b),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Netlist {
    /// Number of nodes including ground.
    pub node_count: usize,
    pub elements: Vec<Element>,
    /// Fixed-voltage nodes.
    pub sources: Vec<(NodeId, f64)>,
    /// Per column, the index of the sink resistor whose current is the column output.
    pub sense: Vec<usize>,
}

impl Netlist {
    fn new() -> Self {
        Self {
            node_count: 1,
            elements: Vec::new(),
            sources: Vec::new(),
            sense: Vec::new(),
        }
    }

    fn node(&mut self) -> NodeId {
        self.node_count += 1;
        self.node_count - 1
    }

    fn resistor(&mut self, a: NodeId, b: NodeId, r: f64) -> usize {
        self.elements.push(Element::Resistor { a, b, r });
        self.elements.len() - 1
    }

    fn source(&mut self, volts: f64) -> NodeId {
        let n = self.node();
        self.sources.push((n, volts));
        n
    }

    /// Nodes that are neither ground nor fixed by a source.
    pub fn free_node_count(&self) -> usize {
        self.node_count - 1 - self.sources.len()
    }

    /// Adds a cell between `a` and `b`, inserting an internal node for a
    /// series access resistance where the element has one.
    fn cell(&mut self, a: NodeId, b: NodeId, el: CellElement) {
        match el {
            CellElement::Sinh { device, access } => {
                let mid = self.node();
                self.resistor(a, mid, access);
                self.elements.push(Element::Device {
                    a: mid,
                    b,
                    el: CellElement::Sinh { device, access: 0.0 },
                });
            }
            _ => self.elements.push(Element::Device { a, b, el }),
        }
    }

    /// Plain-text element list: one line per node declaration, source or element.
    ///
    /// ```text
    /// nodes <count>
    /// V <node> <volts>
    /// R <a> <b> <ohms> [sense <column>]
    /// C <a> <b> <model>
    /// ```
    ///
    /// Models: `lin:<ohms>`, `sinh:<i0>:<g0_nm>:<v0>:<gap_nm>`,
    /// `fet:<k>:<slope>:<vt>:<vg>`. Numbers use Rust's shortest round-trip
    /// formatting, so parsing the text back gives the same netlist.
    pub fn export(&self) -> String {
        let mut sense_of = alloc::vec![None; self.elements.len()];
        for (col, &e) in self.sense.iter().enumerate() {
            sense_of[e] = Some(col);
        }
        let mut out = String::new();
        let _ = writeln!(out, "nodes {}", self.node_count);
        for &(n, v) in &self.sources {
            let _ = writeln!(out, "V {n} {v:?}");
        }
        for (k, e) in self.elements.iter().enumerate() {
            match *e {
                Element::Resistor { a, b, r } => {
                    let _ = write!(out, "R {a} {b} {r:?}");
                    if let Some(col) = sense_of[k] {
                        let _ = write!(out, " sense {col}");
                    }
                    out.push('\n');
                }
                Element::Device { a, b, el } => {
                    let model = match el {
                        CellElement::Linear { r } => format!("lin:{r:?}"),
                        CellElement::Sinh { device, .. } => format!(
                            "sinh:{:?}:{:?}:{:?}:{:?}",
                            device.i0, device.g0_nm, device.v0, device.gap_nm
                        ),
                        CellElement::Fet { channel, vg } => {
                            format!("fet:{:?}:{:?}:{:?}:{vg:?}", channel.k, channel.slope, channel.vt)
                        }
                    };
                    let _ = writeln!(out, "C {a} {b} {model}");
                }
            }
        }
        out
    }

    /// Parses the format written by [`Netlist::export`].
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Structure(format!("netlist line {}: {msg}", line + 1));
        let mut net = Netlist::new();
        let mut sense: Vec<(usize, usize)> = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let num = |k: usize| -> Result<f64> {
                f.get(k)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| bad(ln, "expected a number"))
            };
            let node = |k: usize| -> Result<usize> {
                f.get(k)
                    .and_then(|s| s.parse::<usize>().ok())
                    .ok_or_else(|| bad(ln, "expected a node index"))
            };
            match f[0] {
                "nodes" => net.node_count = node(1)?,
                "V" => net.sources.push((node(1)?, num(2)?)),
                "R" => {
                    let k = net.resistor(node(1)?, node(2)?, num(3)?);
                    if f.get(4) == Some(&"sense") {
                        sense.push((node(5)?, k));
                    }
                }
                "C" => {
                    let (a, b) = (node(1)?, node(2)?);
                    let model = f.get(3).ok_or_else(|| bad(ln, "missing model"))?;
                    let parts: Vec<&str> = model.split(':').collect();
                    let vals: Vec<f64> = parts[1..]
                        .iter()
                        .map(|s| s.parse::<f64>().map_err(|_| bad(ln, "bad model parameter")))
                        .collect::<Result<_>>()?;
                    let el = match (parts[0], vals.len()) {
                        ("lin", 1) => CellElement::Linear { r: vals[0] },
                        ("sinh", 4) => CellElement::Sinh {
                            device: crate::devices::ReramParams {
                                i0: vals[0],
                                g0_nm: vals[1],
                                v0: vals[2],
                                gap_nm: vals[3],
                            },
                            access: 0.0,
                        },
                        ("fet", 4) => CellElement::Fet {
                            channel: crate::devices::fefet::FetChannel {
                                k: vals[0],
                                slope: vals[1],
                                vt: vals[2],
                            },
                            vg: vals[3],
                        },
                        _ => return Err(bad(ln, "unknown device model")),
                    };
                    net.elements.push(Element::Device { a, b, el });
                }
                _ => return Err(bad(ln, "unknown record type")),
            }
        }
        sense.sort_unstable();
        for (i, &(col, _)) in sense.iter().enumerate() {
            if col != i {
                return Err(Error::Structure("sense columns must be numbered 0..m".into()));
            }
        }
        net.sense = sense.into_iter().map(|(_, k)| k).collect();
        net.check()?;
        Ok(net)
    }

    /// Node indices in range, ground present, every node touched by an element.
    pub fn check(&self) -> Result<()> {
        let mut seen = alloc::vec![false; self.node_count];
        for e in &self.elements {
            let (a, b) = e.terminals();
            if a >= self.node_count || b >= self.node_count {
                return Err(Error::Structure(format!("element node out of range ({a}, {b})")));
            }
            seen[a] = true;
            seen[b] = true;
        }
        for &(n, _) in &self.sources {
            if n == GROUND || n >= self.node_count {
                return Err(Error::Structure(format!("invalid source node {n}")));
            }
        }
        if !seen[GROUND] {
            return Err(Error::Structure("no element connects to ground".into()));
        }
        if let Some(n) = seen.iter().position(|s| !s) {
            return Err(Error::Structure(format!("node {n} is not connected to any element")));
        }
        for &k in &self.sense {
            if !matches!(self.elements.get(k), Some(Element::Resistor { b: GROUND, .. })) {
                return Err(Error::Structure(format!("sense element {k} must be a resistor to ground")));
            }
        }
        Ok(())
    }
}

/// Row-major `rows x cols` bit matrix check.
fn check_dims(cfg: &CrossbarConfig, weights: &[bool], inputs: &[bool], factors: Option<&[f64]>) -> Result<()> {
    if weights.len() != cfg.rows * cfg.cols {
        return Err(Error::Dimension(format!(
            "weights have {} entries, expected {}x{}",
            weights.len(),
            cfg.rows,
            cfg.cols
        )));
    }
    if inputs.len() != cfg.rows {
        return Err(Error::Dimension(format!("inputs have {} entries, expected {}", inputs.len(), cfg.rows)));
    }
    if let Some(f) = factors {
        if f.len() != weights.len() {
            return Err(Error::Dimension(format!("{} variation factors for {} cells", f.len(), weights.len())));
        }
    }
    Ok(())
}

fn cell_element(cell: &BitCell, input: bool, weight: bool, factor: Option<f64>) -> Result<CellElement> {
    let el = cell.element(input, weight)?;
    Ok(match factor {
        Some(f) if f != 1.0 => el.scaled(f),
        _ => el,
    })
}

/// Gate-input array. `weights` is row-major, `factors` optionally scales each
/// cell's current (device variation).
pub fn build_gate_input(
    cfg: &CrossbarConfig,
    cell: &BitCell,
    weights: &[bool],
    inputs: &[bool],
    factors: Option<&[f64]>,
) -> Result<Netlist> {
    check_dims(cfg, weights, inputs, factors)?;
    let (n, m) = (cfg.rows, cfg.cols);
    let p = &cfg.parasitics;
    let seg = cfg.segment(Axis::Vertical);
    let mut net = Netlist::new();
    for j in 0..m {
        let src = net.source(cfg.v_bl);
        let a = net.node();
        let b = net.node();
        net.resistor(src, a, p.r_driver);
        net.resistor(a, b, p.via_res);
        let bl: Vec<NodeId> = (0..n).map(|_| net.node()).collect();
        let sl: Vec<NodeId> = (0..n).map(|_| net.node()).collect();
        let c = net.node();
        let sense = net.node();
        net.resistor(b, bl[0], seg);
        for i in 1..n {
            net.resistor(bl[i - 1], bl[i], seg);
        }
        for i in 0..n {
            let k = i * m + j;
            let el = cell_element(cell, inputs[i], weights[k], factors.map(|f| f[k]))?;
            net.cell(bl[i], sl[i], el);
        }
        for i in 1..n {
            net.resistor(sl[i - 1], sl[i], seg);
        }
        net.resistor(sl[n - 1], c, seg);
        net.resistor(c, sense, p.via_res);
        let k = net.resistor(sense, GROUND, p.r_sink);
        net.sense.push(k);
    }
    Ok(net)
}

/// Drain-input array: every gate at `V_WL`, inputs select the row drive voltage.
pub fn build_drain_input(
    cfg: &CrossbarConfig,
    cell: &BitCell,
    weights: &[bool],
    inputs: &[bool],
    factors: Option<&[f64]>,
) -> Result<Netlist> {
    check_dims(cfg, weights, inputs, factors)?;
    let (n, m) = (cfg.rows, cfg.cols);
    let p = &cfg.parasitics;
    let vseg = cfg.segment(Axis::Vertical);
    let hseg = cfg.segment(Axis::Horizontal);
    let mut net = Netlist::new();
    let mut bl = alloc::vec![0; n * m];
    for i in 0..n {
        let src = net.source(if inputs[i] { cfg.v_bl } else { 0.0 });
        let a = net.node();
        let b = net.node();
        net.resistor(src, a, p.r_driver);
        net.resistor(a, b, p.via_res);
        let mut prev = b;
        for j in 0..m {
            let node = net.node();
            net.resistor(prev, node, hseg);
            bl[i * m + j] = node;
            prev = node;
        }
    }
    for j in 0..m {
        let sl: Vec<NodeId> = (0..n).map(|_| net.node()).collect();
        let c = net.node();
        let sense = net.node();
        for i in 0..n {
            let k = i * m + j;
            let el = cell_element(cell, true, weights[k], factors.map(|f| f[k]))?;
            net.cell(bl[k], sl[i], el);
        }
        for i in 1..n {
            net.resistor(sl[i - 1], sl[i], vseg);
        }
        net.resistor(sl[n - 1], c, vseg);
        net.resistor(c, sense, p.via_res);
        let k = net.resistor(sense, GROUND, p.r_sink);
        net.sense.push(k);
    }
    Ok(net)
}

/// Builds the netlist for the configured topology.
pub fn build(
    cfg: &CrossbarConfig,
    cell: &BitCell,
    weights: &[bool],
    inputs: &[bool],
    factors: Option<&[f64]>,
) -> Result<Netlist> {
    match cfg.topology {
        Topology::GateInput => build_gate_input(cfg, cell, weights, inputs, factors),
        Topology::DrainInput => build_drain_input(cfg, cell, weights, inputs, factors),
    }
}

/// Closed-form free-node count (excluding ground, sources and internal cell nodes).
pub fn expected_free_nodes(topology: Topology, rows: usize, cols: usize) -> usize {
    match topology {
        Topology::GateInput => cols * (2 * rows + 2) + 2 * cols,
        Topology::DrainInput => 2 * rows * cols + 2 * rows + 2 * cols,
    }
}

/// Closed-form element count (resistors plus cells, before internal-node expansion).
pub fn expected_elements(topology: Topology, rows: usize, cols: usize) -> usize {
    match topology {
        // R_D, 2 vias, R_S, n BL segments, n SL segments, n cells.
        Topology::GateInput => cols * (4 + 3 * rows),
        // Rows: R_D, via, m segments. Columns: n segments, via, R_S. Cells.
        Topology::DrainInput => rows * (2 + cols) + cols * (rows + 2) + rows * cols,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::devices::Fidelity;

    fn bits(n: usize, seed: u64) -> Vec<bool> {
        let mut rng = crate::rng::stream(seed, crate::rng::Purpose::Workload, 0);
        (0..n).map(|_| crate::rng::bernoulli(&mut rng, 0.5)).collect()
    }

    #[test]
    fn segment_values() {
        let p = Parasitics::default();
        assert!((segment_resistance(Technology::Fefet, &p, Axis::Vertical) - 9.828).abs() < 1e-9);
        assert!((segment_resistance(Technology::Sram, &p, Axis::Vertical) - 19.656).abs() < 1e-9);
        assert!((segment_resistance(Technology::Reram, &p, Axis::Vertical) - 14.742).abs() < 1e-9);
        assert_eq!(
            segment_resistance(Technology::Reram, &p, Axis::Horizontal),
            segment_resistance(Technology::Reram, &p, Axis::Vertical)
        );
    }

    #[test]
    fn one_by_one_series_sum() {
        let cfg = CrossbarConfig::new(Technology::Fefet, 1, 1);
        let cell = cfg.bit_cell().unwrap();
        let net = build_gate_input(&cfg, &cell, &[true], &[true], None).unwrap();
        let total: f64 = net
            .elements
            .iter()
            .map(|e| match *e {
                Element::Resistor { r, .. } => r,
                Element::Device { el: CellElement::Linear { r }, .. } => r,
                _ => unreachable!(),
            })
            .sum();
        assert!((total - 60731.656).abs() < 0.01, "{total}");
    }

    #[test]
    fn audit_counts() {
        for tech in [Technology::Fefet, Technology::Reram] {
            for fid in [Fidelity::Level0, Fidelity::Level1] {
                let mut base = CrossbarConfig::new(tech, 1, 1);
                base.device.fidelity = fid;
                let cell = base.bit_cell().unwrap();
                for n in 1..=8 {
                    for m in 1..=8 {
                        for topo in [Topology::GateInput, Topology::DrainInput] {
                            let cfg = CrossbarConfig {
                                rows: n,
                                cols: m,
                                topology: topo,
                                ..base
                            };
                            let w = bits(n * m, (n * 10 + m) as u64);
                            let x = bits(n, n as u64 + 3);
                            let net = build(&cfg, &cell, &w, &x, None).unwrap();
                            let internal = if matches!((tech, fid), (Technology::Reram, Fidelity::Level1)) { n * m } else { 0 };
                            assert_eq!(net.free_node_count(), expected_free_nodes(topo, n, m) + internal);
                            assert_eq!(net.elements.len(), expected_elements(topo, n, m) + internal);
                            assert_eq!(net.sources.len(), if topo == Topology::GateInput { m } else { n });
                            assert_eq!(net.sense.len(), m);
                            net.check().unwrap();
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn zero_inputs_only_change_states() {
        let cfg = CrossbarConfig::new(Technology::Sram, 3, 2);
        let cell = cfg.bit_cell().unwrap();
        let w = bits(6, 9);
        let a = build_gate_input(&cfg, &cell, &w, &[true; 3], None).unwrap();
        let b = build_gate_input(&cfg, &cell, &w, &[false; 3], None).unwrap();
        assert_eq!(a.node_count, b.node_count);
        for (x, y) in a.elements.iter().zip(&b.elements) {
            assert_eq!(x.terminals(), y.terminals());
        }
    }

    #[test]
    fn dimension_mismatch() {
        let cfg = CrossbarConfig::new(Technology::Sram, 2, 2);
        let cell = cfg.bit_cell().unwrap();
        assert!(matches!(build(&cfg, &cell, &[true; 3], &[true; 2], None), Err(Error::Dimension(_))));
        assert!(matches!(build(&cfg, &cell, &[true; 4], &[true; 3], None), Err(Error::Dimension(_))));
    }

    #[test]
    fn pwa_groups() {
        assert_eq!(Activation::Pwa(8).groups(64).len(), 8);
        assert_eq!(Activation::Fwa.groups(64), alloc::vec![0..64]);
        let mut cfg = CrossbarConfig::default();
        cfg.activation = Activation::Pwa(7);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn export_round_trip() {
        for tech in Technology::ALL {
            for topo in [Topology::GateInput, Topology::DrainInput] {
                let mut cfg = CrossbarConfig::new(tech, 3, 2);
                cfg.topology = topo;
                cfg.device.fidelity = Fidelity::Level1;
                let cell = cfg.bit_cell().unwrap();
                let net = build(&cfg, &cell, &bits(6, 1), &bits(3, 2), None).unwrap();
                let back = Netlist::parse(&net.export()).unwrap();
                assert_eq!(back, net);
            }
        }
    }
}
