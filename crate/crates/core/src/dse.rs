//! Design-space sweeps, device-variation Monte Carlo and the technology comparison.

use crate::devices::{BitCell, KnobBindings, Technology};
use crate::error::{check_range, Error, Result};
use crate::exec::Executor;
use crate::metrics::{nf_distribution_with, o_max, sense_margin_curve, NfDistribution, NfRequest, SmCurve, SmMode, SM_THRESHOLD};
use crate::rng::{normal, stream, Purpose};
use crate::solver::SolverOptions;
use crate::topology::{Activation, CrossbarConfig, Topology};
use crate::workload::WorkloadSampler;
use alloc::format;
use alloc::vec::Vec;

/// Smallest conductance a perturbed device may take (S).
pub const G_MIN: f64 = 1e-12;

/// Gaussian conductance variation with standard deviation `sigma_frac · G_ON`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct VariationConfig {
    pub sigma_frac: f64,
    pub seed: u64,
}

impl Default for VariationConfig {
    fn default() -> Self {
        Self { sigma_frac: 0.1, seed: 0 }
    }
}

impl VariationConfig {
    pub fn validate(&self) -> Result<()> {
        check_range("variation.sigma_frac", self.sigma_frac, 0.0, 1.0 - f64::EPSILON)?;
        Ok(())
    }
}

/// Conductance offsets `N(0, (s·G_ON)²)` for `count` devices of array instance `index`.
pub fn variation_deltas(g_on: f64, count: usize, vc: &VariationConfig, index: u64) -> Vec<f64> {
    let sigma = vc.sigma_frac * g_on;
    if sigma == 0.0 {
        return alloc::vec![0.0; count];
    }
    let mut rng = stream(vc.seed, Purpose::Variation, index);
    (0..count).map(|_| sigma * normal(&mut rng)).collect()
}

/// Per-device current scale factors for array instance `index`.
///
/// Device `k` stores `weights[k]`; its conductance `G = G(1, w)` becomes
/// `max(G + δ, G_MIN)` and the same ratio is applied to every (input) state
/// of that device.
pub fn apply_variations(cell: &BitCell, weights: &[bool], vc: &VariationConfig, index: u64) -> Result<Vec<f64>> {
    vc.validate()?;
    let deltas = variation_deltas(cell.g_on(), weights.len(), vc, index);
    Ok(weights
        .iter()
        .zip(deltas)
        .map(|(&w, d)| {
            let g = cell.conductance(true, w);
            (g + d).max(G_MIN) / g
        })
        .collect())
}

/// Design knob varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Knob {
    /// ON resistance (ohm); SRAM, ReRAM and FeFET.
    Ron,
    /// Ferroelectric thickness (nm); FeFET.
    Tfe,
    /// MgO thickness (nm); SOT-MRAM.
    Tmgo,
    /// Read-port gate bias (V); SRAM.
    VBias,
    /// ON-state filament gap (nm); ReRAM.
    Gap,
    Activation,
    Topology,
}

impl Knob {
    pub fn name(self) -> &'static str {
        match self {
            Knob::Ron => "r_on",
            Knob::Tfe => "t_fe",
            Knob::Tmgo => "t_mgo",
            Knob::VBias => "v_bias",
            Knob::Gap => "gap",
            Knob::Activation => "activation",
            Knob::Topology => "topology",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let all = [
            Knob::Ron,
            Knob::Tfe,
            Knob::Tmgo,
            Knob::VBias,
            Knob::Gap,
            Knob::Activation,
            Knob::Topology,
        ];
        let key = s.to_ascii_lowercase().replace('-', "_");
        all.into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::Config(format!("unknown knob '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum KnobValue {
    Number(f64),
    Activation(Activation),
    Topology(Topology),
}

impl core::fmt::Display for KnobValue {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            KnobValue::Number(v) => write!(f, "{v}"),
            KnobValue::Activation(Activation::Fwa) => f.write_str("fwa"),
            KnobValue::Activation(Activation::Pwa(g)) => write!(f, "pwa{g}"),
            KnobValue::Topology(Topology::GateInput) => f.write_str("gate"),
            KnobValue::Topology(Topology::DrainInput) => f.write_str("drain"),
        }
    }
}

/// FeFET thicknesses with a published ferroelectric parameter set (nm).
pub const TFE_ROWS_NM: [f64; 3] = [5.0, 6.0, 7.0];

fn require_tech(cfg: &CrossbarConfig, knob: Knob, allowed: &[Technology]) -> Result<()> {
    if allowed.contains(&cfg.tech()) {
        Ok(())
    } else {
        Err(Error::Unsupported(format!("knob {} does not apply to {}", knob.name(), cfg.tech())))
    }
}

/// `base` with `knob` set to `value`.
pub fn apply_knob(base: &CrossbarConfig, knob: Knob, value: KnobValue) -> Result<CrossbarConfig> {
    let mut cfg = *base;
    let number = |v: KnobValue| match v {
        KnobValue::Number(x) if x.is_finite() => Ok(x),
        other => Err(Error::Config(format!("knob {} needs a number, got {other}", knob.name()))),
    };
    match knob {
        Knob::Ron => {
            require_tech(&cfg, knob, &[Technology::Sram, Technology::Reram, Technology::Fefet])?;
            cfg.device.r_on = Some(number(value)?);
            cfg.device.reram_gap_nm = None;
        }
        Knob::Tfe => {
            require_tech(&cfg, knob, &[Technology::Fefet])?;
            let t = number(value)?;
            if !TFE_ROWS_NM.contains(&t) {
                return Err(Error::Config(format!("T_FE {t} nm has no parameter set (5, 6 or 7 nm)")));
            }
            cfg.device.fefet_t_fe_nm = t;
        }
        Knob::Tmgo => {
            require_tech(&cfg, knob, &[Technology::SotMram])?;
            cfg.device.sot_t_mgo_nm = number(value)?;
        }
        Knob::VBias => {
            require_tech(&cfg, knob, &[Technology::Sram])?;
            cfg.device.sram_v_bias = number(value)?;
            cfg.device.r_on = None;
        }
        Knob::Gap => {
            require_tech(&cfg, knob, &[Technology::Reram])?;
            cfg.device.reram_gap_nm = Some(number(value)?);
            cfg.device.r_on = None;
        }
        Knob::Activation => match value {
            KnobValue::Activation(a) => cfg.activation = a,
            other => return Err(Error::Config(format!("knob activation needs fwa or pwaN, got {other}"))),
        },
        Knob::Topology => match value {
            KnobValue::Topology(t) => cfg.topology = t,
            other => return Err(Error::Config(format!("knob topology needs gate or drain, got {other}"))),
        },
    }
    Ok(cfg)
}

/// Metrics evaluated at each sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct MetricSet {
    pub nf: bool,
    pub sm: bool,
}

impl Default for MetricSet {
    fn default() -> Self {
        Self { nf: true, sm: true }
    }
}

/// Evaluation settings shared by every point of a sweep or comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct Evaluation {
    pub metrics: MetricSet,
    pub sampler: WorkloadSampler,
    pub samples: usize,
    pub seed: u64,
    pub sm_x_max: usize,
    pub sm_mode: SmMode,
    pub sm_threshold: f64,
    pub solver: SolverOptions,
}

impl Default for Evaluation {
    fn default() -> Self {
        Self {
            metrics: MetricSet::default(),
            sampler: WorkloadSampler::default(),
            samples: 500,
            seed: 0,
            sm_x_max: 8,
            sm_mode: SmMode::Structured,
            sm_threshold: SM_THRESHOLD,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepSpec {
    pub knob: Knob,
    pub values: Vec<KnobValue>,
    pub base: CrossbarConfig,
    pub eval: Evaluation,
}

/// Metrics of one configuration.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PointMetrics {
    pub bindings: KnobBindings,
    pub level1_available: bool,
    pub nf: Option<NfDistribution>,
    pub sm: Option<SmCurve>,
    pub o_max: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepPoint {
    pub value: KnobValue,
    pub config: CrossbarConfig,
    pub metrics: PointMetrics,
}

/// NF distribution (optionally under variation), SM curve and O_MAX of `cfg`.
///
/// Every call with the same `eval` draws the same workload patterns, so
/// results of different configurations are paired.
pub fn evaluate<E: Executor>(cfg: &CrossbarConfig, eval: &Evaluation, variation: Option<VariationConfig>, exec: &E) -> Result<PointMetrics> {
    let cell = cfg.bit_cell()?;
    let nf = if eval.metrics.nf {
        let req = NfRequest {
            sampler: eval.sampler,
            samples: eval.samples,
            seed: eval.seed,
            variation,
            solver: eval.solver,
        };
        Some(nf_distribution_with(cfg, &req, exec)?.pooled)
    } else {
        None
    };
    let sm = if eval.metrics.sm {
        Some(sense_margin_curve(cfg, eval.sm_x_max, eval.sm_mode, &eval.solver, exec)?)
    } else {
        None
    };
    let o_max = sm.as_ref().map(|c| o_max(c, eval.sm_threshold));
    Ok(PointMetrics {
        bindings: cell.bindings,
        level1_available: cell.level1_available(),
        nf,
        sm,
        o_max,
    })
}

pub fn run_sweep<E: Executor>(spec: &SweepSpec, exec: &E) -> Result<Vec<SweepPoint>> {
    if spec.values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let configs = spec
        .values
        .iter()
        .map(|&v| apply_knob(&spec.base, spec.knob, v).and_then(|c| c.bit_cell().map(|_| (v, c))))
        .collect::<Result<Vec<_>>>()?;
    configs
        .into_iter()
        .map(|(value, config)| {
            Ok(SweepPoint {
                value,
                metrics: evaluate(&config, &spec.eval, None, exec)?,
                config,
            })
        })
        .collect()
}

fn numbers(values: &[f64]) -> Vec<KnobValue> {
    values.iter().map(|&v| KnobValue::Number(v)).collect()
}

/// ON-resistance sweep for SRAM, ReRAM or FeFET.
pub fn sweep_ron<E: Executor>(base: &CrossbarConfig, values: &[f64], eval: &Evaluation, exec: &E) -> Result<Vec<SweepPoint>> {
    if base.tech() == Technology::SotMram {
        return Err(Error::Unsupported("SOT-MRAM R_ON cannot be tuned independently".into()));
    }
    run_sweep(
        &SweepSpec {
            knob: Knob::Ron,
            values: numbers(values),
            base: *base,
            eval: *eval,
        },
        exec,
    )
}

/// Ferroelectric thickness sweep with R_ON held at the base value.
pub fn sweep_tfe<E: Executor>(base: &CrossbarConfig, values: &[f64], eval: &Evaluation, exec: &E) -> Result<Vec<SweepPoint>> {
    run_sweep(
        &SweepSpec {
            knob: Knob::Tfe,
            values: numbers(values),
            base: *base,
            eval: *eval,
        },
        exec,
    )
}

/// MgO thickness × activation grid, thickness-major.
pub fn sweep_tmgo<E: Executor>(
    base: &CrossbarConfig,
    values: &[f64],
    activations: &[Activation],
    eval: &Evaluation,
    exec: &E,
) -> Result<Vec<(Activation, SweepPoint)>> {
    let mut out = Vec::new();
    for &a in activations {
        let spec = SweepSpec {
            knob: Knob::Tmgo,
            values: numbers(values),
            base: CrossbarConfig { activation: a, ..*base },
            eval: *eval,
        };
        out.extend(run_sweep(&spec, exec)?.into_iter().map(|p| (a, p)));
    }
    out.sort_by(|a, b| {
        let key = |p: &SweepPoint| match p.value {
            KnobValue::Number(v) => v,
            _ => 0.0,
        };
        key(&a.1).total_cmp(&key(&b.1))
    });
    Ok(out)
}

/// The operating point chosen for each technology: 60 kΩ ON resistance
/// (ReRAM gap fitted to it, FeFET at 7 nm) and SOT-MRAM at 1.3 nm MgO read
/// eight rows at a time.
pub fn optimized_config(tech: Technology, rows: usize, cols: usize) -> CrossbarConfig {
    let mut cfg = CrossbarConfig::new(tech, rows, cols);
    match tech {
        Technology::Sram | Technology::Reram => cfg.device.r_on = Some(60e3),
        Technology::Fefet => cfg.device.fefet_t_fe_nm = 7.0,
        Technology::SotMram => {
            cfg.device.sot_t_mgo_nm = 1.3;
            if rows % 8 == 0 && rows > 8 {
                cfg.activation = Activation::Pwa(8);
            }
        }
    }
    cfg
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct CompareSpec {
    pub technologies: Vec<Technology>,
    pub rows: usize,
    pub cols: usize,
    pub eval: Evaluation,
    /// Variation applied in the second NF run; `seed` is shared by all technologies.
    pub variation: VariationConfig,
}

impl Default for CompareSpec {
    fn default() -> Self {
        Self {
            technologies: Technology::ALL.to_vec(),
            rows: 64,
            cols: 64,
            eval: Evaluation::default(),
            variation: VariationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AccuracyEntry {
    pub ideal: f64,
    pub nominal: f64,
    /// Mean over variation seeds.
    pub varied: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TechnologyEntry {
    pub tech: Technology,
    pub config: CrossbarConfig,
    pub nominal: PointMetrics,
    pub varied_nf: Option<NfDistribution>,
    pub accuracy: Option<AccuracyEntry>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComparisonReport {
    pub spec: CompareSpec,
    /// One entry per technology, in canonical technology order.
    pub entries: Vec<TechnologyEntry>,
}

impl ComparisonReport {
    pub fn entry(&self, tech: Technology) -> Option<&TechnologyEntry> {
        self.entries.iter().find(|e| e.tech == tech)
    }

    /// Technologies sorted by ascending median NF.
    pub fn nf_ranking(&self) -> Vec<(Technology, f64)> {
        let mut r: Vec<(Technology, f64)> = self
            .entries
            .iter()
            .filter_map(|e| e.nominal.nf.map(|d| (e.tech, d.median)))
            .collect();
        r.sort_by(|a, b| a.1.total_cmp(&b.1));
        r
    }
}

/// Evaluates every requested technology at its optimized setting on the
/// same workload and variation seeds.
pub fn compare_technologies<E: Executor>(spec: &CompareSpec, exec: &E) -> Result<ComparisonReport> {
    spec.variation.validate()?;
    let mut techs = spec.technologies.clone();
    techs.sort_by_key(|t| Technology::ALL.iter().position(|a| a == t));
    techs.dedup();
    if techs.is_empty() {
        return Err(Error::Config("comparison needs at least one technology".into()));
    }
    let mut entries = Vec::new();
    for tech in techs {
        let config = optimized_config(tech, spec.rows, spec.cols);
        let nominal = evaluate(&config, &spec.eval, None, exec)?;
        let varied_nf = if spec.eval.metrics.nf && spec.variation.sigma_frac > 0.0 {
            let eval = Evaluation {
                metrics: MetricSet { nf: true, sm: false },
                ..spec.eval
            };
            evaluate(&config, &eval, Some(spec.variation), exec)?.nf
        } else {
            None
        };
        entries.push(TechnologyEntry {
            tech,
            config,
            nominal,
            varied_nf,
            accuracy: None,
        });
    }
    Ok(ComparisonReport {
        spec: CompareSpec {
            technologies: entries.iter().map(|e| e.tech).collect(),
            ..spec.clone()
        },
        entries,
    })
}

#[cfg(test)]
mod tests {
    use crate::exec::Sequential;

    fn quick(samples: usize) -> Evaluation {
        Evaluation {
            samples,
            seed: 5,
            sm_x_max: 3,
            ..Evaluation::default()
        }
    }

    #[test]
    fn knob_domains() {
        let sot = CrossbarConfig::new(Technology::SotMram, 4, 4);
        assert!(matches!(apply_knob(&sot, Knob::Ron, KnobValue::Number(60e3)), Err(Error::Unsupported(_))));
        let fe = CrossbarConfig::new(Technology::Fefet, 4, 4);
        assert!(apply_knob(&fe, Knob::Tfe, KnobValue::Number(8.0)).is_err());
        assert!(apply_knob(&fe, Knob::Topology, KnobValue::Number(1.0)).is_err());
        let c = apply_knob(&fe, Knob::Activation, KnobValue::Activation(Activation::Pwa(2))).unwrap();
        assert_eq!(c.activation, Activation::Pwa(2));
        assert_eq!(Knob::parse("V-BIAS").unwrap(), Knob::VBias);
        assert!(Knob::parse("vbias").is_err());
        let e = sweep_ron(&sot, &[60e3], &quick(2), &Sequential);
        assert!(matches!(e, Err(Error::Unsupported(_))));
        let empty = SweepSpec {
            knob: Knob::Ron,
            values: Vec::new(),
            base: fe,
            eval: quick(2),
        };
        assert!(run_sweep(&empty, &Sequential).is_err());
    }

    #[test]
    fn single_point_sweep_equals_direct_evaluation() {
        let base = CrossbarConfig::new(Technology::Sram, 8, 8);
        let pts = sweep_ron(&base, &[20e3], &quick(20), &Sequential).unwrap();
        let mut direct = base;
        direct.device.r_on = Some(20e3);
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].metrics, evaluate(&direct, &quick(20), None, &Sequential).unwrap());
    }

    #[test]
    fn tfe_sweep_pins_ron() {
        let base = CrossbarConfig::new(Technology::Fefet, 4, 4);
        let eval = Evaluation {
            metrics: MetricSet { nf: false, sm: false },
            ..quick(1)
        };
        let pts = sweep_tfe(&base, &TFE_ROWS_NM, &eval, &Sequential).unwrap();
        for p in &pts {
            assert!((p.metrics.bindings.r_on / 60e3 - 1.0).abs() < 0.05);
        }
        let mw: Vec<f64> = pts.iter().map(|p| p.metrics.bindings.fefet_memory_window.unwrap()).collect();
        assert!(mw[0] < mw[1] && mw[1] < mw[2]);
    }

    #[test]
    fn tmgo_grid_shape() {
        let base = CrossbarConfig::new(Technology::SotMram, 8, 2);
        let eval = Evaluation {
            metrics: MetricSet { nf: true, sm: false },
            ..quick(4)
        };
        let grid = sweep_tmgo(&base, &[1.1, 1.2, 1.3], &[Activation::Fwa, Activation::Pwa(4)], &eval, &Sequential).unwrap();
        assert_eq!(grid.len(), 6);
        assert_eq!(grid[0].1.value, KnobValue::Number(1.1));
        assert_eq!(grid[5].1.value, KnobValue::Number(1.3));
    }

    #[test]
    fn comparison_is_order_independent() {
        let mut spec = CompareSpec {
            rows: 8,
            cols: 4,
            eval: quick(6),
            ..CompareSpec::default()
        };
        spec.technologies = Technology::ALL.to_vec();
        let a = compare_technologies(&spec, &Sequential).unwrap();
        spec.technologies.reverse();
        let b = compare_technologies(&spec, &Sequential).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.entries.len(), 4);
        assert!(a.entries.iter().all(|e| e.varied_nf.is_some()));
        assert_eq!(a.entry(Technology::SotMram).unwrap().config.activation, Activation::Fwa);
        assert_eq!(a.nf_ranking().len(), 4);
    }

    use super::*;
    use crate::devices::Technology;

    fn cell() -> BitCell {
        CrossbarConfig::new(Technology::SotMram, 64, 64).bit_cell().unwrap()
    }

    #[test]
    fn zero_sigma_is_identity() {
        let w: Vec<bool> = (0..4096).map(|k| k % 3 == 0).collect();
        let f = apply_variations(&cell(), &w, &VariationConfig { sigma_frac: 0.0, seed: 1 }, 0).unwrap();
        assert!(f.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn noise_mean_within_clt_bound() {
        let c = cell();
        let vc = VariationConfig { sigma_frac: 0.1, seed: 42 };
        let sigma = 0.1 * c.g_on();
        for index in 0..20 {
            let d = variation_deltas(c.g_on(), 4096, &vc, index);
            let mean = d.iter().sum::<f64>() / 4096.0;
            assert!(mean.abs() < 5.0 * sigma / 64.0);
        }
    }

    #[test]
    fn deterministic_and_floored() {
        let c = cell();
        let w: Vec<bool> = (0..4096).map(|k| k % 2 == 0).collect();
        let vc = VariationConfig { sigma_frac: 0.5, seed: 3 };
        let a = apply_variations(&c, &w, &vc, 7).unwrap();
        assert_eq!(a, apply_variations(&c, &w, &vc, 7).unwrap());
        for (k, f) in a.iter().enumerate() {
            assert!(c.conductance(true, w[k]) * f >= G_MIN * (1.0 - 1e-12));
        }
        assert!(apply_variations(&c, &w, &VariationConfig { sigma_frac: 1.0, seed: 0 }, 0).is_err());
    }
}
