//! Quantised MLP inference with matrix-vector products offloaded to
//! bit-sliced crossbar tiles.
//!
//! Weights are split into `W⁺ − W⁻`, each magnitude stored one bit per
//! device across `bits − 1` columns. Inputs stream one two's-complement bit
//! per cycle. Every column current is digitised by an ADC whose LSB is the
//! ideal ON-cell current, and the codes are combined by shift-add.

use crate::dse::{apply_variations, VariationConfig};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::metrics::{nonideality_factor, NfDistribution};
use crate::solver::{ArraySolver, SolverOptions};
use crate::surrogate::SurrogateNet;
use crate::topology::{CrossbarConfig, Topology};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

/// Symmetric fixed-point tensor: `real ≈ values · scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointTensor {
    pub shape: Vec<usize>,
    pub values: Vec<i32>,
    pub bits: u32,
    pub scale: f64,
}

impl FixedPointTensor {
    /// Largest magnitude representable: `2^(bits−1) − 1`, and 1 for one bit.
    pub fn q_max(bits: u32) -> i32 {
        ((1i64 << (bits - 1)) - 1).max(1) as i32
    }

    pub fn dequantize(&self) -> Vec<f64> {
        self.values.iter().map(|&q| q as f64 * self.scale).collect()
    }
}

/// Symmetric uniform quantisation with `scale = max|x| / q_max`; an all-zero
/// tensor gets scale 1.
pub fn quantize_tensor(x: &[f64], shape: &[usize], bits: u32) -> Result<FixedPointTensor> {
    if !(1..=31).contains(&bits) {
        return Err(Error::Config(format!("bit width {bits} must be in 1..=31")));
    }
    if shape.iter().product::<usize>() != x.len() {
        return Err(Error::Dimension(format!("{} values for shape {shape:?}", x.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("cannot quantise non-finite values".into()));
    }
    let q_max = FixedPointTensor::q_max(bits);
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak == 0.0 { 1.0 } else { peak / q_max as f64 };
    let values = x
        .iter()
        .map(|&v| (libm::round(v / scale) as i32).clamp(-q_max, q_max))
        .collect();
    Ok(FixedPointTensor {
        shape: shape.to_vec(),
        values,
        bits,
        scale,
    })
}

/// Column ADC: `code = ⌊I / I_LSB + ½⌋` clamped to `0..levels`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdcModel {
    pub i_lsb: f64,
    pub levels: usize,
}

impl AdcModel {
    pub fn new(i_lsb: f64, levels: usize) -> Result<Self> {
        if !(i_lsb > 0.0 && i_lsb.is_finite()) || levels < 2 {
            return Err(Error::Config(format!("ADC needs I_LSB > 0 and at least 2 levels (got {i_lsb}, {levels})")));
        }
        Ok(Self { i_lsb, levels })
    }

    /// Code and whether it was clamped.
    pub fn convert(&self, current: f64) -> (u32, bool) {
        let raw = libm::floor(current / self.i_lsb + 0.5);
        let top = (self.levels - 1) as f64;
        if raw > top {
            (top as u32, true)
        } else if raw < 0.0 || raw.is_nan() {
            (0, true)
        } else {
            (raw as u32, false)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum MvmMode {
    /// Column current `count · V_BL · G_ON`.
    #[default]
    Ideal,
    /// DC solution of the tile.
    Solver,
    /// Reference current corrected by the surrogate's predicted deviation.
    Surrogate,
}

impl MvmMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ideal" => Ok(Self::Ideal),
            "solver" => Ok(Self::Solver),
            "surrogate" => Ok(Self::Surrogate),
            _ => Err(Error::Config(format!("unknown mode '{s}' (ideal, solver, surrogate)"))),
        }
    }
}

/// Physical column of a layer: output neuron, sign half and magnitude bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnSlot {
    pub output: usize,
    pub negative: bool,
    pub bit: u32,
}

/// One crossbar tile of a mapped layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Tile {
    /// First input row held by the tile.
    pub row_start: usize,
    /// Row-major weight bits of the tile (`rows × cols`).
    pub weights: Vec<bool>,
    /// Slot of each tile column; `None` for padding.
    pub slots: Vec<Option<ColumnSlot>>,
    /// Per-device variation factors.
    pub factors: Option<Vec<f64>>,
    /// Surrogate conductance projections, `cols × hidden`.
    pub projection: Option<Vec<f64>>,
}

/// A quantised weight matrix laid out on tiles.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayMapping {
    pub in_dim: usize,
    pub out_dim: usize,
    pub bits: u32,
    pub rows: usize,
    pub cols: usize,
    pub tiles: Vec<Tile>,
}

impl ArrayMapping {
    /// Maps `w` (`out_dim × in_dim`, row-major integers within `±(2^(bits−1)−1)`).
    pub fn new(w: &[i32], out_dim: usize, in_dim: usize, bits: u32, rows: usize, cols: usize) -> Result<Self> {
        if w.len() != out_dim * in_dim || rows == 0 || cols == 0 || out_dim == 0 || in_dim == 0 {
            return Err(Error::Dimension(format!("{} weights for a {out_dim}x{in_dim} layer", w.len())));
        }
        if !(2..=31).contains(&bits) {
            return Err(Error::Config(format!("weight width {bits} must be in 2..=31")));
        }
        let q_max = FixedPointTensor::q_max(bits);
        if w.iter().any(|v| v.abs() > q_max) {
            return Err(Error::Config("weight outside the signed range of its bit width".into()));
        }
        let mag_bits = bits - 1;
        let slots: Vec<ColumnSlot> = (0..out_dim)
            .flat_map(|output| {
                [false, true]
                    .into_iter()
                    .flat_map(move |negative| (0..mag_bits).map(move |bit| ColumnSlot { output, negative, bit }))
            })
            .collect();
        let mut tiles = Vec::new();
        for row_start in (0..in_dim).step_by(rows) {
            for chunk in slots.chunks(cols) {
                let mut weights = vec![false; rows * cols];
                for (c, slot) in chunk.iter().enumerate() {
                    for r in 0..rows.min(in_dim - row_start) {
                        let v = w[slot.output * in_dim + row_start + r];
                        let part = if slot.negative { (-v).max(0) } else { v.max(0) };
                        weights[r * cols + c] = (part >> slot.bit) & 1 == 1;
                    }
                }
                let mut tile_slots: Vec<Option<ColumnSlot>> = chunk.iter().copied().map(Some).collect();
                tile_slots.resize(cols, None);
                tiles.push(Tile {
                    row_start,
                    weights,
                    slots: tile_slots,
                    factors: None,
                    projection: None,
                });
            }
        }
        Ok(Self {
            in_dim,
            out_dim,
            bits,
            rows,
            cols,
            tiles,
        })
    }

    /// Attaches device variation; tile `t` of layer `layer` uses array index `(layer << 32) | t`.
    pub fn with_variation(mut self, engine: &CrossbarEngine, vc: &VariationConfig, layer: usize) -> Result<Self> {
        for (t, tile) in self.tiles.iter_mut().enumerate() {
            let index = ((layer as u64) << 32) | t as u64;
            tile.factors = Some(apply_variations(&engine.solver.cell, &tile.weights, vc, index)?);
        }
        Ok(self)
    }

    /// Precomputes the surrogate projections of every tile (surrogate mode only).
    pub fn project(mut self, engine: &CrossbarEngine) -> Self {
        if let (MvmMode::Surrogate, Some(net)) = (engine.mode, &engine.surrogate) {
            for tile in &mut self.tiles {
                tile.projection = Some(engine.tile_projection(net, tile));
            }
        }
        self
    }
}

/// Column-current source plus ADC for one tile configuration.
#[derive(Debug, Clone)]
pub struct CrossbarEngine {
    pub mode: MvmMode,
    pub solver: ArraySolver,
    pub surrogate: Option<SurrogateNet>,
    /// ADC LSB current; levels follow the active-row count.
    pub i_lsb: f64,
}

impl CrossbarEngine {
    pub fn new(cfg: &CrossbarConfig, mode: MvmMode, surrogate: Option<SurrogateNet>, opts: &SolverOptions) -> Result<Self> {
        if cfg.topology != Topology::GateInput && mode == MvmMode::Surrogate {
            return Err(Error::Unsupported("surrogate mode needs a gate-input array".into()));
        }
        let solver = ArraySolver::new(cfg, opts)?;
        if mode == MvmMode::Surrogate {
            match &surrogate {
                Some(net) if net.inputs == 2 * cfg.rows => {}
                Some(net) => {
                    return Err(Error::Dimension(format!("surrogate takes {} features, tile has {} rows", net.inputs, cfg.rows)))
                }
                None => return Err(Error::Config("surrogate mode needs a trained surrogate".into())),
            }
        }
        let i_lsb = cfg.v_bl * solver.cell.g_on();
        Ok(Self {
            mode,
            solver,
            surrogate,
            i_lsb,
        })
    }

    pub fn rows(&self) -> usize {
        self.solver.cfg.rows
    }

    pub fn cols(&self) -> usize {
        self.solver.cfg.cols
    }

    pub fn adc(&self, active_rows: usize) -> AdcModel {
        AdcModel {
            i_lsb: self.i_lsb,
            levels: active_rows + 1,
        }
    }

    /// Column currents of `tile` driven by `inputs`, with their reference
    /// currents when the mode has one.
    fn currents(&self, tile: &Tile, inputs: &[bool], nf: &mut Vec<f64>, record_nf: bool) -> Result<Vec<f64>> {
        let (n, m) = (self.rows(), self.cols());
        let factors = tile.factors.as_deref();
        match self.mode {
            MvmMode::Ideal => {
                let unit = self.i_lsb;
                Ok((0..m)
                    .map(|j| (0..n).filter(|&i| inputs[i] && tile.weights[i * m + j]).count() as f64 * unit)
                    .collect())
            }
            MvmMode::Solver => {
                let actual = self.solver.column_currents(&tile.weights, inputs, factors)?;
                if record_nf {
                    let reference = self.solver.reference(&tile.weights, inputs, factors)?;
                    nf.extend(reference.iter().zip(&actual).filter_map(|(&r, &a)| nonideality_factor(r, a).map(|s| s.nf)));
                }
                Ok(actual)
            }
            MvmMode::Surrogate => {
                let net = self.surrogate.as_ref().expect("checked at construction");
                let reference = self.solver.reference(&tile.weights, inputs, factors)?;
                let h = net.hidden;
                let owned;
                let projection = match &tile.projection {
                    Some(p) => p,
                    None => {
                        owned = self.tile_projection(net, tile);
                        &owned
                    }
                };
                let mut a = vec![0.0; h];
                net.project_inputs(inputs, &mut a);
                let mut out = Vec::with_capacity(m);
                for (j, &r) in reference.iter().enumerate() {
                    let dev = net.predict_split(&a, &projection[j * h..(j + 1) * h]);
                    if record_nf {
                        nf.push(dev.abs());
                    }
                    out.push(if r == 0.0 { 0.0 } else { r * (1.0 - dev) });
                }
                Ok(out)
            }
        }
    }

    fn tile_projection(&self, net: &SurrogateNet, tile: &Tile) -> Vec<f64> {
        let (n, m, h) = (self.rows(), self.cols(), net.hidden);
        let cell = &self.solver.cell;
        let g_on = cell.g_on();
        let mut g = vec![0.0; n];
        let mut out = vec![0.0; m * h];
        for j in 0..m {
            for (i, gi) in g.iter_mut().enumerate() {
                let k = i * m + j;
                *gi = cell.conductance(true, tile.weights[k]) * tile.factors.as_ref().map_or(1.0, |f| f[k]) / g_on;
            }
            net.project_conductances(&g, &mut out[j * h..(j + 1) * h]);
        }
        out
    }
}

/// Per-call bookkeeping of [`crossbar_mvm`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MvmStats {
    pub conversions: u64,
    pub saturations: u64,
    pub skipped_cycles: u64,
    /// NF of sampled column reads (solver and surrogate modes).
    pub nf: Vec<f64>,
}

/// Integer matrix-vector product `W · x` computed on the tiles of `map`.
///
/// Each input bit cycle drives every activation group separately; a group
/// with no set input bit is skipped, as is a cycle with none. `nf_stride`
/// records the NF of one column read in every `nf_stride` (0 disables).
pub fn crossbar_mvm(x: &[i32], map: &ArrayMapping, engine: &CrossbarEngine, nf_stride: usize, stats: &mut MvmStats) -> Result<Vec<i64>> {
    if x.len() != map.in_dim {
        return Err(Error::Dimension(format!("input of length {} for a layer with {} inputs", x.len(), map.in_dim)));
    }
    if map.rows != engine.rows() || map.cols != engine.cols() {
        return Err(Error::Dimension(format!(
            "{}x{} tiles on a {}x{} array",
            map.rows,
            map.cols,
            engine.rows(),
            engine.cols()
        )));
    }
    let q_max = FixedPointTensor::q_max(map.bits) as i64;
    if x.iter().any(|&v| (v as i64).abs() > q_max) {
        return Err(Error::Config("input outside the signed range of its bit width".into()));
    }
    let (n, m) = (map.rows, map.cols);
    let groups = engine.solver.cfg.activation.groups(n);
    let mut acc = vec![0i64; map.out_dim];
    let mut inputs = vec![false; n];
    let mut reads = 0usize;
    for tile in &map.tiles {
        let used = n.min(map.in_dim - tile.row_start);
        for t in 0..map.bits {
            // Two's complement: the top bit carries weight −2^t.
            let cycle_weight: i64 = if t == map.bits - 1 { -(1i64 << t) } else { 1i64 << t };
            let mut any = false;
            for (i, b) in inputs.iter_mut().enumerate() {
                *b = i < used && ((x[tile.row_start + i] as u32) >> t) & 1 == 1;
                any |= *b;
            }
            if !any {
                stats.skipped_cycles += 1;
                continue;
            }
            for range in &groups {
                if !range.clone().any(|i| inputs[i]) {
                    continue;
                }
                let masked: Vec<bool> = (0..n).map(|i| inputs[i] && range.contains(&i)).collect();
                let record = nf_stride > 0 && reads % nf_stride == 0;
                reads += 1;
                let currents = engine.currents(tile, &masked, &mut stats.nf, record)?;
                let adc = engine.adc(range.len());
                for (j, slot) in tile.slots.iter().enumerate().take(m) {
                    let Some(slot) = slot else { continue };
                    let (code, sat) = adc.convert(currents[j]);
                    stats.conversions += 1;
                    stats.saturations += sat as u64;
                    let sign = if slot.negative { -1 } else { 1 };
                    acc[slot.output] += sign * cycle_weight * ((code as i64) << slot.bit);
                }
            }
        }
    }
    Ok(acc)
}

/// Direct integer product `W · x` (`W` is `out × in`, row-major).
pub fn integer_matvec(w: &[i32], x: &[i32], out_dim: usize) -> Vec<i64> {
    let in_dim = x.len();
    (0..out_dim)
        .map(|o| {
            w[o * in_dim..(o + 1) * in_dim]
                .iter()
                .zip(x)
                .map(|(&a, &b)| a as i64 * b as i64)
                .sum()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum LayerActivation {
    Identity,
    Relu,
}

impl LayerActivation {
    pub fn name(self) -> &'static str {
        match self {
            LayerActivation::Identity => "identity",
            LayerActivation::Relu => "relu",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Self::Identity),
            "relu" => Ok(Self::Relu),
            _ => Err(Error::Config(format!("unknown layer activation '{s}'"))),
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            LayerActivation::Identity => v,
            LayerActivation::Relu => v.max(0.0),
        }
    }
}

/// Fully connected layer, `weights` row-major `out_dim × in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
    pub activation: LayerActivation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
}

impl Mlp {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("model has no layers".into()));
        }
        for (k, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.in_dim * l.out_dim || l.bias.len() != l.out_dim {
                return Err(Error::Dimension(format!("layer {k} parameter sizes do not match {}x{}", l.out_dim, l.in_dim)));
            }
            if k > 0 && self.layers[k - 1].out_dim != l.in_dim {
                return Err(Error::Dimension(format!("layer {k} input {} follows output {}", l.in_dim, self.layers[k - 1].out_dim)));
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("layer {k} holds non-finite parameters")));
            }
        }
        Ok(())
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn classes(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    /// Floating-point forward pass.
    pub fn forward(&self, x: &[f32]) -> Vec<f64> {
        let mut h: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        for l in &self.layers {
            h = (0..l.out_dim)
                .map(|o| {
                    let row = &l.weights[o * l.in_dim..(o + 1) * l.in_dim];
                    let s: f64 = row.iter().zip(&h).map(|(&w, &v)| w as f64 * v).sum();
                    l.activation.apply(s + l.bias[o] as f64)
                })
                .collect();
        }
        h
    }
}

/// Labelled samples, features row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledData {
    pub features: usize,
    pub x: Vec<f32>,
    pub labels: Vec<u32>,
}

impl LabeledData {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample(&self, k: usize) -> &[f32] {
        &self.x[k * self.features..(k + 1) * self.features]
    }

    pub fn validate(&self) -> Result<()> {
        if self.features == 0 || self.x.len() != self.features * self.labels.len() {
            return Err(Error::Dimension(format!("{} values for {} samples of {} features", self.x.len(), self.labels.len(), self.features)));
        }
        if self.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("dataset holds non-finite features".into()));
        }
        Ok(())
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = k;
        }
    }
    best
}

/// Layer weights quantised once, with their tile mappings.
#[derive(Debug, Clone)]
pub struct QuantizedMlp {
    pub bits: u32,
    pub weights: Vec<FixedPointTensor>,
    pub mappings: Vec<ArrayMapping>,
    model: Mlp,
}

impl QuantizedMlp {
    pub fn new(model: &Mlp, bits: u32, rows: usize, cols: usize) -> Result<Self> {
        model.validate()?;
        let mut weights = Vec::new();
        let mut mappings = Vec::new();
        for l in &model.layers {
            let w: Vec<f64> = l.weights.iter().map(|&v| v as f64).collect();
            let q = quantize_tensor(&w, &[l.out_dim, l.in_dim], bits)?;
            mappings.push(ArrayMapping::new(&q.values, l.out_dim, l.in_dim, bits, rows, cols)?);
            weights.push(q);
        }
        Ok(Self {
            bits,
            weights,
            mappings,
            model: model.clone(),
        })
    }

    pub fn with_variation(mut self, engine: &CrossbarEngine, vc: &VariationConfig) -> Result<Self> {
        self.mappings = self
            .mappings
            .into_iter()
            .enumerate()
            .map(|(k, m)| m.with_variation(engine, vc, k))
            .collect::<Result<_>>()?;
        Ok(self)
    }

    /// See [`ArrayMapping::project`].
    pub fn project(mut self, engine: &CrossbarEngine) -> Self {
        self.mappings = self.mappings.into_iter().map(|m| m.project(engine)).collect();
        self
    }

    /// Forward pass where each layer's integer product comes from `matvec`.
    fn run<F>(&self, x: &[f32], mut matvec: F) -> Result<Vec<f64>>
    where
        F: FnMut(usize, &[i32]) -> Result<Vec<i64>>,
    {
        let mut h: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        for (k, l) in self.model.layers.iter().enumerate() {
            let xq = quantize_tensor(&h, &[h.len()], self.bits)?;
            let acc = matvec(k, &xq.values)?;
            let s = xq.scale * self.weights[k].scale;
            h = acc
                .iter()
                .zip(&l.bias)
                .map(|(&a, &b)| l.activation.apply(a as f64 * s + b as f64))
                .collect();
        }
        Ok(h)
    }

    /// Software reference: the same quantisation with exact integer products.
    pub fn forward_reference(&self, x: &[f32]) -> Result<Vec<f64>> {
        self.run(x, |k, xq| Ok(integer_matvec(&self.weights[k].values, xq, self.model.layers[k].out_dim)))
    }

    /// Forward pass on the crossbar engine.
    pub fn forward_crossbar(&self, x: &[f32], engine: &CrossbarEngine, nf_stride: usize, stats: &mut [MvmStats]) -> Result<Vec<f64>> {
        self.run(x, |k, xq| crossbar_mvm(xq, &self.mappings[k], engine, nf_stride, &mut stats[k]))
    }

    pub fn layer_count(&self) -> usize {
        self.model.layers.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct InferenceConfig {
    pub mode: MvmMode,
    pub bits: u32,
    /// Evaluate only the first `limit` samples.
    pub limit: Option<usize>,
    pub variation: Option<VariationConfig>,
    /// Record the NF of one column read in every `nf_stride`; 0 disables.
    pub nf_stride: usize,
    pub solver: SolverOptions,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            mode: MvmMode::Ideal,
            bits: 16,
            limit: None,
            variation: None,
            nf_stride: 64,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerSummary {
    pub conversions: u64,
    pub saturations: u64,
    pub skipped_cycles: u64,
    pub nf: Option<NfDistribution>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InferenceReport {
    pub mode: String,
    pub samples: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// Accuracy of the quantised software model on the same samples.
    pub reference_accuracy: f64,
    /// Samples whose predicted class differs from the software model's.
    pub disagreements: usize,
    pub layers: Vec<LayerSummary>,
}

impl InferenceReport {
    pub fn drop(&self) -> f64 {
        self.reference_accuracy - self.accuracy
    }
}

/// Classification accuracy of `model` on `data` with every layer product
/// computed on `cfg`-shaped tiles.
pub fn run_inference<E: Executor>(
    model: &Mlp,
    data: &LabeledData,
    cfg: &CrossbarConfig,
    ic: &InferenceConfig,
    surrogate: Option<&SurrogateNet>,
    exec: &E,
) -> Result<InferenceReport> {
    data.validate()?;
    model.validate()?;
    if data.features != model.in_dim() {
        return Err(Error::Dimension(format!("dataset has {} features, model expects {}", data.features, model.in_dim())));
    }
    if data.labels.iter().any(|&l| l as usize >= model.classes()) {
        return Err(Error::Config("label outside the model's class range".into()));
    }
    let engine = CrossbarEngine::new(cfg, ic.mode, surrogate.cloned(), &ic.solver)?;
    let mut q = QuantizedMlp::new(model, ic.bits, cfg.rows, cfg.cols)?;
    if let Some(vc) = &ic.variation {
        if ic.mode != MvmMode::Ideal {
            q = q.with_variation(&engine, vc)?;
        }
    }
    let q = q.project(&engine);
    let count = ic.limit.map_or(data.len(), |l| l.min(data.len()));
    if count == 0 {
        return Err(Error::Config("no samples to evaluate".into()));
    }
    let layers = q.layer_count();
    let results = exec.map(count, |k| -> Result<(usize, usize, Vec<MvmStats>)> {
        let x = data.sample(k);
        let mut stats = vec![MvmStats::default(); layers];
        let reference = argmax(&q.forward_reference(x)?);
        let predicted = argmax(&q.forward_crossbar(x, &engine, ic.nf_stride, &mut stats)?);
        Ok((predicted, reference, stats))
    });
    let (mut correct, mut ref_correct, mut disagreements) = (0, 0, 0);
    let mut totals = vec![MvmStats::default(); layers];
    for (k, r) in results.into_iter().enumerate() {
        let (p, r, stats) = r?;
        let label = data.labels[k] as usize;
        correct += (p == label) as usize;
        ref_correct += (r == label) as usize;
        disagreements += (p != r) as usize;
        for (t, s) in totals.iter_mut().zip(stats) {
            t.conversions += s.conversions;
            t.saturations += s.saturations;
            t.skipped_cycles += s.skipped_cycles;
            t.nf.extend(s.nf);
        }
    }
    let layers = totals
        .into_iter()
        .map(|t| LayerSummary {
            conversions: t.conversions,
            saturations: t.saturations,
            skipped_cycles: t.skipped_cycles,
            nf: NfDistribution::from_values(&t.nf, 0, 0).ok(),
        })
        .collect();
    let mode = match ic.mode {
        MvmMode::Ideal => "ideal",
        MvmMode::Solver => "solver",
        MvmMode::Surrogate => "surrogate",
    };
    Ok(InferenceReport {
        mode: mode.into(),
        samples: count,
        correct,
        accuracy: correct as f64 / count as f64,
        reference_accuracy: ref_correct as f64 / count as f64,
        disagreements,
        layers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::devices::Technology;
    use crate::exec::Sequential;
    use crate::rng::{stream, Purpose};
    use crate::topology::{Activation, Parasitics};
    use rand::Rng;

    fn engine(tech: Technology, n: usize, m: usize, mode: MvmMode) -> CrossbarEngine {
        CrossbarEngine::new(&CrossbarConfig::new(tech, n, m), mode, None, &SolverOptions::default()).unwrap()
    }

    #[test]
    fn quantize_examples() {
        let z = quantize_tensor(&[0.0; 4], &[4], 8).unwrap();
        assert_eq!(z.values, vec![0; 4]);
        assert_eq!(z.scale, 1.0);
        let b = quantize_tensor(&[-1.0, 1.0, 1.0, -1.0], &[4], 1).unwrap();
        assert_eq!(b.dequantize(), vec![-1.0, 1.0, 1.0, -1.0]);
        let mut rng = stream(2, Purpose::Dataset, 0);
        let x: Vec<f64> = (0..8).map(|_| rng.random_range(-3.0..3.0)).collect();
        let q = quantize_tensor(&x, &[8], 16).unwrap();
        for (a, b) in q.dequantize().iter().zip(&x) {
            assert!((a - b).abs() <= q.scale);
        }
        assert!(quantize_tensor(&[f64::NAN], &[1], 8).is_err());
        assert!(quantize_tensor(&[1.0, 2.0], &[3], 8).is_err());
    }

    #[test]
    fn adc_rounds_half_up_and_counts_saturation() {
        let adc = AdcModel::new(1.0, 5).unwrap();
        assert_eq!(adc.convert(2.5), (3, false));
        assert_eq!(adc.convert(2.49), (2, false));
        assert_eq!(adc.convert(4.6), (4, true));
        assert_eq!(adc.convert(-0.7), (0, true));
        assert!(AdcModel::new(0.0, 4).is_err());
        assert!(AdcModel::new(1.0, 1).is_err());
    }

    #[test]
    fn ideal_bit_sliced_product_is_exact() {
        let e = engine(Technology::Fefet, 8, 8, MvmMode::Ideal);
        let mut rng = stream(11, Purpose::Dataset, 1);
        for _ in 0..1000 {
            let w: Vec<i32> = (0..64).map(|_| rng.random_range(-127..=127)).collect();
            let x: Vec<i32> = (0..8).map(|_| rng.random_range(-127..=127)).collect();
            let map = ArrayMapping::new(&w, 8, 8, 8, 8, 8).unwrap();
            let mut st = MvmStats::default();
            assert_eq!(crossbar_mvm(&x, &map, &e, 0, &mut st).unwrap(), integer_matvec(&w, &x, 8));
            assert_eq!(st.saturations, 0);
        }
    }

    #[test]
    fn pwa_ideal_equals_fwa_ideal() {
        let mut cfg = CrossbarConfig::new(Technology::SotMram, 16, 8);
        let fwa = CrossbarEngine::new(&cfg, MvmMode::Ideal, None, &SolverOptions::default()).unwrap();
        cfg.activation = Activation::Pwa(4);
        let pwa = CrossbarEngine::new(&cfg, MvmMode::Ideal, None, &SolverOptions::default()).unwrap();
        let mut rng = stream(4, Purpose::Dataset, 2);
        let w: Vec<i32> = (0..40 * 5).map(|_| rng.random_range(-500..=500)).collect();
        let map = ArrayMapping::new(&w, 5, 40, 12, 16, 8).unwrap();
        for _ in 0..50 {
            let x: Vec<i32> = (0..40).map(|_| rng.random_range(-2047..=2047)).collect();
            let a = crossbar_mvm(&x, &map, &fwa, 0, &mut MvmStats::default()).unwrap();
            let b = crossbar_mvm(&x, &map, &pwa, 0, &mut MvmStats::default()).unwrap();
            assert_eq!(a, b);
            assert_eq!(a, integer_matvec(&w, &x, 5));
        }
    }

    #[test]
    fn zero_input_gives_zero_in_every_mode() {
        let w: Vec<i32> = (0..16).map(|k| k - 8).collect();
        let map = ArrayMapping::new(&w, 4, 4, 8, 4, 4).unwrap();
        for mode in [MvmMode::Ideal, MvmMode::Solver] {
            let mut st = MvmStats::default();
            assert_eq!(crossbar_mvm(&[0; 4], &map, &engine(Technology::Reram, 4, 4, mode), 1, &mut st).unwrap(), vec![0; 4]);
            assert_eq!(st.conversions, 0);
        }
    }

    #[test]
    fn zero_parasitic_solver_matches_ideal() {
        let mut cfg = CrossbarConfig::new(Technology::Sram, 4, 4);
        cfg.parasitics = Parasitics::zero();
        let solver = CrossbarEngine::new(&cfg, MvmMode::Solver, None, &SolverOptions::default()).unwrap();
        let ideal = CrossbarEngine::new(&cfg, MvmMode::Ideal, None, &SolverOptions::default()).unwrap();
        let mut rng = stream(8, Purpose::Dataset, 3);
        for _ in 0..100 {
            let w: Vec<i32> = (0..16).map(|_| rng.random_range(-127..=127)).collect();
            let x: Vec<i32> = (0..4).map(|_| rng.random_range(-127..=127)).collect();
            let map = ArrayMapping::new(&w, 4, 4, 8, 4, 4).unwrap();
            let a = crossbar_mvm(&x, &map, &solver, 0, &mut MvmStats::default()).unwrap();
            let b = crossbar_mvm(&x, &map, &ideal, 0, &mut MvmStats::default()).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn mapping_covers_matrix() {
        let w: Vec<i32> = (0..10 * 70).map(|k| (k % 200) as i32 - 100).collect();
        let map = ArrayMapping::new(&w, 10, 70, 16, 64, 64).unwrap();
        // 2 row tiles × ceil(10·30 / 64) column tiles.
        assert_eq!(map.tiles.len(), 2 * 5);
        let used: usize = map.tiles.iter().map(|t| t.slots.iter().flatten().count()).sum();
        assert_eq!(used, 2 * 10 * 30);
        assert!(ArrayMapping::new(&[40000], 1, 1, 16, 4, 4).is_err());
    }

    fn toy_model() -> (Mlp, LabeledData) {
        let mut rng = stream(5, Purpose::Dataset, 9);
        let layer = |i: usize, o: usize, act, rng: &mut rand_chacha::ChaCha8Rng| DenseLayer {
            in_dim: i,
            out_dim: o,
            weights: (0..i * o).map(|_| rng.random_range(-1.0f32..1.0)).collect(),
            bias: (0..o).map(|_| rng.random_range(-0.1f32..0.1)).collect(),
            activation: act,
        };
        let model = Mlp {
            layers: alloc::vec![layer(8, 6, LayerActivation::Relu, &mut rng), layer(6, 3, LayerActivation::Identity, &mut rng)],
        };
        let x: Vec<f32> = (0..8 * 40).map(|_| rng.random_range(0.0f32..1.0)).collect();
        let labels = (0..40)
            .map(|k| argmax(&model.forward(&x[k * 8..(k + 1) * 8])) as u32)
            .collect();
        (model, LabeledData { features: 8, x, labels })
    }

    #[test]
    fn ideal_inference_equals_quantised_software() {
        let (model, data) = toy_model();
        let cfg = CrossbarConfig::new(Technology::Fefet, 8, 8);
        let r = run_inference(&model, &data, &cfg, &InferenceConfig::default(), None, &Sequential).unwrap();
        assert_eq!(r.disagreements, 0);
        assert_eq!(r.accuracy, r.reference_accuracy);
        assert!(r.accuracy > 0.9);
        assert!(r.layers.iter().all(|l| l.saturations == 0 && l.nf.is_none()));
    }

    #[test]
    fn solver_inference_reports_nf_and_degrades_with_parasitics() {
        let (model, data) = toy_model();
        let ic = InferenceConfig {
            mode: MvmMode::Solver,
            bits: 8,
            nf_stride: 1,
            ..InferenceConfig::default()
        };
        let mut last = 2.0;
        for k in [0.0, 1.0, 2.0] {
            let mut cfg = CrossbarConfig::new(Technology::Reram, 8, 8);
            cfg.parasitics = Parasitics::default().scaled(k);
            let r = run_inference(&model, &data, &cfg, &ic, None, &Sequential).unwrap();
            assert!(r.accuracy <= last);
            last = r.accuracy;
            assert!(r.layers[0].nf.is_some());
        }
        let vc = VariationConfig { sigma_frac: 0.1, seed: 1 };
        let cfg = CrossbarConfig::new(Technology::Reram, 8, 8);
        let a = run_inference(&model, &data, &cfg, &InferenceConfig { variation: Some(vc), ..ic }, None, &Sequential).unwrap();
        let b = run_inference(&model, &data, &cfg, &InferenceConfig { variation: Some(vc), ..ic }, None, &Sequential).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn surrogate_mode_requires_a_matching_net() {
        let cfg = CrossbarConfig::new(Technology::Fefet, 8, 8);
        assert!(CrossbarEngine::new(&cfg, MvmMode::Surrogate, None, &SolverOptions::default()).is_err());
        let net = SurrogateNet::new(10, 4, Default::default(), 0).unwrap();
        assert!(CrossbarEngine::new(&cfg, MvmMode::Surrogate, Some(net), &SolverOptions::default()).is_err());
        let net = SurrogateNet::new(16, 4, Default::default(), 0).unwrap();
        let e = CrossbarEngine::new(&cfg, MvmMode::Surrogate, Some(net), &SolverOptions::default()).unwrap();
        // An untrained net predicts zero deviation: the reference current itself.
        let w: Vec<i32> = (0..64).map(|k| (k % 15) - 7).collect();
        let map = ArrayMapping::new(&w, 8, 8, 4, 8, 8).unwrap();
        let x = [3, 1, 0, 7, 2, 5, 6, 4];
        let out = crossbar_mvm(&x, &map, &e, 0, &mut MvmStats::default()).unwrap();
        assert_eq!(out, integer_matvec(&w, &x, 8));
    }
}
