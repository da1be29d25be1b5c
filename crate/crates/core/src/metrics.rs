//! Non-ideality factor, sense margin and related robustness metrics.

use crate::dse::{apply_variations, VariationConfig};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::rng::{bernoulli, stream, Purpose};
use crate::solver::{ArraySolver, SolverOptions};
use crate::topology::{CrossbarConfig, Topology};
use crate::workload::{column_digest, WorkloadSampler};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

/// Default sense-margin threshold for robust ADC sensing (A).
pub const SM_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NfSample {
    pub i_ideal: f64,
    pub i_nonideal: f64,
    pub nf: f64,
    /// `(I_ideal − I_nonideal) / I_ideal`
    pub signed_dev: f64,
    pub column: usize,
    pub sample: usize,
    /// Activation group within the sample.
    pub group: usize,
    pub digest: u64,
}

/// Relative deviation of a non-ideal current. `None` when `i_ideal` is zero.
pub fn nonideality_factor(i_ideal: f64, i_nonideal: f64) -> Option<NfSample> {
    if i_ideal == 0.0 || !i_ideal.is_finite() || !i_nonideal.is_finite() {
        return None;
    }
    let signed_dev = (i_ideal - i_nonideal) / i_ideal;
    Some(NfSample {
        i_ideal,
        i_nonideal,
        nf: signed_dev.abs(),
        signed_dev,
        column: 0,
        sample: 0,
        group: 0,
        digest: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NfDistribution {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    pub count: usize,
    /// Samples with zero ideal current.
    pub excluded: usize,
    /// Samples whose solve failed.
    pub failed: usize,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let t = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * t
}

impl NfDistribution {
    pub fn from_values(values: &[f64], excluded: usize, failed: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Config("no NF samples to summarise".into()));
        }
        let mut v: Vec<f64> = values.to_vec();
        v.sort_by(f64::total_cmp);
        Ok(Self {
            min: v[0],
            q1: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q3: quantile(&v, 0.75),
            max: v[v.len() - 1],
            mean: v.iter().sum::<f64>() / v.len() as f64,
            count: v.len(),
            excluded,
            failed,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NfRun {
    pub samples: Vec<NfSample>,
    pub pooled: NfDistribution,
}

impl NfRun {
    pub fn per_column(&self, cols: usize) -> Vec<Option<NfDistribution>> {
        (0..cols)
            .map(|c| {
                let v: Vec<f64> = self.samples.iter().filter(|s| s.column == c).map(|s| s.nf).collect();
                NfDistribution::from_values(&v, 0, 0).ok()
            })
            .collect()
    }
}

/// Parameters of an NF Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct NfRequest {
    pub sampler: WorkloadSampler,
    pub samples: usize,
    pub seed: u64,
    pub variation: Option<VariationConfig>,
    pub solver: SolverOptions,
}

impl Default for NfRequest {
    fn default() -> Self {
        Self {
            sampler: WorkloadSampler::default(),
            samples: 500,
            seed: 0,
            variation: None,
            solver: SolverOptions::default(),
        }
    }
}

/// Inputs of one activation group: rows outside `group` are switched off.
pub fn group_inputs(inputs: &[bool], group: &core::ops::Range<usize>) -> Vec<bool> {
    inputs.iter().enumerate().map(|(i, &x)| x && group.contains(&i)).collect()
}

/// NF samples over random patterns: every activation group of every sample
/// is solved and compared, column by column, with the parasitic-free
/// linear-cell current of the same pattern.
pub fn nf_distribution_with<E: Executor>(cfg: &CrossbarConfig, req: &NfRequest, exec: &E) -> Result<NfRun> {
    req.sampler.validate()?;
    if req.samples == 0 {
        return Err(Error::Config("NF run needs at least one sample".into()));
    }
    let solver = ArraySolver::new(cfg, &req.solver)?;
    let groups = cfg.activation.groups(cfg.rows);
    let (n, m) = (cfg.rows, cfg.cols);
    let per_sample = exec.map(req.samples, |s| {
        let pat = req.sampler.sample(n, m, req.seed, s as u64);
        let factors = match &req.variation {
            Some(vc) => match apply_variations(&solver.cell, &pat.weights, vc, s as u64) {
                Ok(f) => Some(f),
                Err(_) => return (Vec::new(), 0, 1),
            },
            None => None,
        };
        let mut out = Vec::new();
        let (mut excluded, mut failed) = (0, 0);
        for (g, range) in groups.iter().enumerate() {
            let x = group_inputs(&pat.inputs, range);
            let (reference, actual) = match (
                solver.reference(&pat.weights, &x, factors.as_deref()),
                solver.column_currents(&pat.weights, &x, factors.as_deref()),
            ) {
                (Ok(r), Ok(a)) => (r, a),
                _ => {
                    failed += 1;
                    continue;
                }
            };
            for j in 0..m {
                match nonideality_factor(reference[j], actual[j]) {
                    Some(mut smp) => {
                        smp.column = j;
                        smp.sample = s;
                        smp.group = g;
                        smp.digest = column_digest(&x, &pat.weights, m, j);
                        out.push(smp);
                    }
                    None => excluded += 1,
                }
            }
        }
        (out, excluded, failed)
    });
    let mut samples = Vec::new();
    let (mut excluded, mut failed) = (0, 0);
    for (s, e, f) in per_sample {
        samples.extend(s);
        excluded += e;
        failed += f;
    }
    let nf: Vec<f64> = samples.iter().map(|s| s.nf).collect();
    let pooled = NfDistribution::from_values(&nf, excluded, failed)?;
    Ok(NfRun { samples, pooled })
}

pub fn nf_distribution<E: Executor>(cfg: &CrossbarConfig, sampler: &WorkloadSampler, samples: usize, seed: u64, exec: &E) -> Result<NfRun> {
    nf_distribution_with(
        cfg,
        &NfRequest {
            sampler: *sampler,
            samples,
            seed,
            ..NfRequest::default()
        },
        exec,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum SmMode {
    /// Every input/weight combination, up to `budget` patterns.
    Exhaustive { budget: u64 },
    /// Constructed worst cases (ON-cell placement and leakage states).
    Structured,
    /// Structured plus `samples` random patterns.
    Random { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SmPoint {
    pub x: usize,
    pub i_x_min: f64,
    pub i_xm1_max: f64,
    pub sm: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SmCurve {
    pub points: Vec<SmPoint>,
    pub mode: String,
    pub patterns: usize,
}

impl SmCurve {
    pub fn sm(&self, x: usize) -> Option<f64> {
        self.points.iter().find(|p| p.x == x).map(|p| p.sm)
    }
}

/// `SM_x = (I_x,min − I_(x−1),max) / 2`
pub fn sense_margin(i_x_min: f64, i_xm1_max: f64) -> f64 {
    0.5 * (i_x_min - i_xm1_max)
}

/// Largest `x` with `SM_y > threshold` for every `y ≤ x`.
pub fn o_max(curve: &SmCurve, threshold: f64) -> usize {
    let mut points: Vec<&SmPoint> = curve.points.iter().collect();
    points.sort_by_key(|p| p.x);
    let mut best = 0;
    for p in points {
        if p.x != best + 1 || !(p.sm > threshold) {
            break;
        }
        best = p.x;
    }
    best
}

/// First-order estimates `(I_0,max, I_1,min) = (n·V/R_HRS, V/R_ON)`.
pub fn analytic_sm_estimate(n_active: usize, v: f64, r_on: f64, r_hrs: f64) -> (f64, f64) {
    (n_active as f64 * v / r_hrs, v / r_on)
}

/// One pattern to solve and the column whose output is recorded.
struct Probe {
    inputs: Vec<bool>,
    weights: Vec<bool>,
}

/// Running extrema of column current per output value.
struct Extrema {
    min: Vec<f64>,
    max: Vec<f64>,
}

impl Extrema {
    fn new(len: usize) -> Self {
        Self {
            min: vec![f64::INFINITY; len],
            max: vec![f64::NEG_INFINITY; len],
        }
    }

    fn record(&mut self, x: usize, i: f64) {
        if x < self.min.len() {
            self.min[x] = self.min[x].min(i);
            self.max[x] = self.max[x].max(i);
        }
    }
}

fn subsets(n: usize, k: usize, limit: usize) -> Option<Vec<Vec<usize>>> {
    let mut count: u128 = 1;
    for i in 0..k as u128 {
        count = count * (n as u128 - i) / (i + 1);
        if count > limit as u128 {
            return None;
        }
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        while i > 0 && idx[i - 1] == i - 1 + n - k {
            i -= 1;
        }
        if i == 0 {
            return Some(out);
        }
        idx[i - 1] += 1;
        for t in i..k {
            idx[t] = idx[t - 1] + 1;
        }
    }
}

/// ON-cell position sets of size `k` among `rows`: all subsets when few,
/// otherwise every contiguous window.
fn placements(rows: &core::ops::Range<usize>, k: usize) -> Vec<Vec<usize>> {
    let a = rows.len();
    if k == 0 {
        return vec![Vec::new()];
    }
    let local = subsets(a, k, 70).unwrap_or_else(|| (0..=a - k).map(|s| (s..s + k).collect()).collect());
    local.into_iter().map(|p| p.into_iter().map(|i| i + rows.start).collect()).collect()
}

/// Sense-margin curve up to output `x_max` (capped at the active row count).
///
/// Gate-input columns are independent and identical, so a single column is
/// analysed. Drain-input analyses the full array, probing the column farthest
/// from the drivers for minima and the nearest for maxima.
pub fn sense_margin_curve<E: Executor>(cfg: &CrossbarConfig, x_max: usize, mode: SmMode, opts: &SolverOptions, exec: &E) -> Result<SmCurve> {
    let acfg = match cfg.topology {
        Topology::GateInput => CrossbarConfig { cols: 1, ..*cfg },
        Topology::DrainInput => *cfg,
    };
    let solver = ArraySolver::new(&acfg, opts)?;
    let (n, m) = (acfg.rows, acfg.cols);
    let groups = acfg.activation.groups(n);
    let active = acfg.activation.active_rows(n);
    let x_max = x_max.min(active);
    if x_max == 0 {
        return Err(Error::Config("sense margin needs x_max >= 1".into()));
    }
    let table = solver.cell.table;
    // Weight giving the larger / smaller leakage for a switched-off row.
    let off_weight_low = table.off_h < table.off;
    let off_weight_high = !off_weight_low;

    let count_outputs = |p: &Probe, range: &core::ops::Range<usize>, col: usize| {
        range.clone().filter(|&i| p.inputs[i] && p.weights[i * m + col]).count()
    };

    let mut ext = Extrema::new(x_max + 1);
    let mut examined = 0usize;
    let mode_name;

    let evaluate = |probes: Vec<(Probe, core::ops::Range<usize>)>, ext: &mut Extrema| -> Result<usize> {
        let results = exec.map(probes.len(), |k| solver.column_currents(&probes[k].0.weights, &probes[k].0.inputs, None));
        for ((p, range), r) in probes.iter().zip(results) {
            let currents = r?;
            for (col, &i) in currents.iter().enumerate() {
                ext.record(count_outputs(p, range, col), i);
            }
        }
        Ok(probes.len())
    };

    match mode {
        SmMode::Exhaustive { budget } => {
            mode_name = "exhaustive";
            let range = groups[0].clone();
            let free_inputs = range.len();
            let free_weights = n * m;
            let bits = free_inputs + free_weights;
            let needed: u128 = if bits >= 128 { u128::MAX } else { 1u128 << bits };
            if needed > budget as u128 {
                return Err(Error::Budget { needed, budget });
            }
            let total = needed as usize;
            let chunk = 4096;
            let mut start = 0;
            while start < total {
                let end = (start + chunk).min(total);
                let probes = (start..end)
                    .map(|code| {
                        let mut inputs = vec![false; n];
                        for (b, i) in range.clone().enumerate() {
                            inputs[i] = (code >> b) & 1 == 1;
                        }
                        let weights = (0..free_weights).map(|b| (code >> (free_inputs + b)) & 1 == 1).collect();
                        (Probe { inputs, weights }, range.clone())
                    })
                    .collect();
                examined += evaluate(probes, &mut ext)?;
                start = end;
            }
        }
        SmMode::Structured | SmMode::Random { .. } => {
            mode_name = if matches!(mode, SmMode::Structured) { "structured" } else { "random" };
            let mut probes = Vec::new();
            let targets: Vec<usize> = if m == 1 { vec![0] } else { vec![0, m - 1] };
            for range in &groups {
                for x in 0..=x_max {
                    for pos in placements(range, x) {
                        // (min-side, fill input, fill weight, other-column weight, inactive-row weight)
                        let variants = [
                            (true, false, false, true, off_weight_high),
                            (true, false, true, true, off_weight_high),
                            (false, true, false, false, off_weight_low),
                        ];
                        for &(min_side, fill_in, fill_w, other_w, idle_w) in &variants {
                            if (min_side && x == 0) || (!min_side && x == x_max) {
                                continue;
                            }
                            for &col in &targets {
                                let mut inputs = vec![false; n];
                                let mut weights = vec![other_w; n * m];
                                for i in 0..n {
                                    let k = i * m + col;
                                    if range.contains(&i) {
                                        inputs[i] = fill_in;
                                        weights[k] = fill_w;
                                    } else {
                                        weights[k] = idle_w;
                                    }
                                }
                                for &i in &pos {
                                    inputs[i] = true;
                                    weights[i * m + col] = true;
                                }
                                probes.push((Probe { inputs, weights }, range.clone()));
                            }
                        }
                    }
                }
            }
            examined += evaluate(probes, &mut ext)?;
            if let SmMode::Random { samples, seed } = mode {
                let probes = (0..samples)
                    .map(|s| {
                        let mut rng = stream(seed, Purpose::SenseMargin, s as u64);
                        let range = groups[s % groups.len()].clone();
                        let mut inputs = vec![false; n];
                        for i in range.clone() {
                            inputs[i] = bernoulli(&mut rng, 0.5);
                        }
                        let weights = (0..n * m).map(|_| bernoulli(&mut rng, 0.5)).collect();
                        (Probe { inputs, weights }, range)
                    })
                    .collect();
                examined += evaluate(probes, &mut ext)?;
            }
        }
    }

    let points = (1..=x_max)
        .filter(|&x| ext.min[x].is_finite() && ext.max[x - 1].is_finite())
        .map(|x| SmPoint {
            x,
            i_x_min: ext.min[x],
            i_xm1_max: ext.max[x - 1],
            sm: sense_margin(ext.min[x], ext.max[x - 1]),
        })
        .collect();
    Ok(SmCurve {
        points,
        mode: mode_name.into(),
        patterns: examined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::devices::Technology;
    use crate::exec::Sequential;
    use crate::topology::Parasitics;

    #[test]
    fn nf_arithmetic() {
        let s = nonideality_factor(266.67e-6, 240e-6).unwrap();
        assert!((s.nf - 0.1000).abs() < 1e-4);
        assert!((s.signed_dev - 0.1000).abs() < 1e-4);
        assert_eq!(nonideality_factor(3e-6, 3e-6).unwrap().nf, 0.0);
        assert!((nonideality_factor(4.17e-6, 4.1165e-6).unwrap().nf - 0.0128).abs() < 1e-4);
        assert!(nonideality_factor(0.0, 1e-6).is_none());
    }

    #[test]
    fn sm_and_omax_arithmetic() {
        assert!((sense_margin(4e-6, 1e-6) - 1.5e-6).abs() < 1e-18);
        let curve = |sm: &[f64]| SmCurve {
            points: sm
                .iter()
                .enumerate()
                .map(|(k, &s)| SmPoint { x: k + 1, i_x_min: 0.0, i_xm1_max: 0.0, sm: s })
                .collect(),
            mode: "test".into(),
            patterns: 0,
        };
        assert_eq!(o_max(&curve(&[1.5e-6, 1.2e-6, 0.8e-6, 2e-6]), 1e-6), 2);
        assert_eq!(o_max(&curve(&[0.5e-6, 0.2e-6]), 1e-6), 0);
        assert_eq!(o_max(&curve(&[0.5e-6, 0.2e-6, 1e-9]), 0.0), 3);
    }

    #[test]
    fn analytic_estimates() {
        let (i0, i1) = analytic_sm_estimate(8, 0.25, 20e3, 100e3);
        assert!((i0 - 20e-6).abs() < 1e-15 && (i1 - 12.5e-6).abs() < 1e-15);
        let (i0, _) = analytic_sm_estimate(64, 0.25, 20e3, 100e3);
        assert!((i0 - 160e-6).abs() < 1e-15);
        let (a, b) = analytic_sm_estimate(1, 0.3, 5e3, 5e3);
        assert_eq!(a, b);
    }

    #[test]
    fn quantiles_ordered() {
        let d = NfDistribution::from_values(&[0.4, 0.1, 0.3, 0.2, 0.5], 1, 0).unwrap();
        assert_eq!((d.min, d.q1, d.median, d.q3, d.max), (0.1, 0.2, 0.3, 0.4, 0.5));
        assert!((d.mean - 0.3).abs() < 1e-15);
        assert!(NfDistribution::from_values(&[], 0, 0).is_err());
    }

    #[test]
    fn subsets_enumerate_combinations() {
        assert_eq!(subsets(4, 2, 100).unwrap().len(), 6);
        assert_eq!(subsets(5, 3, 100).unwrap().len(), 10);
        assert_eq!(subsets(3, 1, 100).unwrap(), vec![vec![0], vec![1], vec![2]]);
        assert_eq!(subsets(4, 4, 100).unwrap(), vec![vec![0, 1, 2, 3]]);
        assert!(subsets(64, 10, 100).is_none());
    }

    #[test]
    fn zero_parasitic_nf_vanishes() {
        let mut cfg = CrossbarConfig::new(Technology::Reram, 8, 4);
        cfg.parasitics = Parasitics::zero();
        let run = nf_distribution(&cfg, &WorkloadSampler::default(), 20, 1, &Sequential).unwrap();
        assert!(run.pooled.max <= 1e-9);
        let again = nf_distribution(&cfg, &WorkloadSampler::default(), 20, 1, &Sequential).unwrap();
        assert_eq!(run, again);
    }

    #[test]
    fn structured_matches_exhaustive_on_four_rows() {
        let cfg = CrossbarConfig::new(Technology::Fefet, 4, 1);
        let opts = SolverOptions::default();
        let ex = sense_margin_curve(&cfg, 4, SmMode::Exhaustive { budget: 1 << 10 }, &opts, &Sequential).unwrap();
        let st = sense_margin_curve(&cfg, 4, SmMode::Structured, &opts, &Sequential).unwrap();
        assert_eq!(ex.points.len(), 4);
        for (a, b) in ex.points.iter().zip(&st.points) {
            assert_eq!(a.x, b.x);
            assert!((a.i_x_min - b.i_x_min).abs() <= 1e-12 * a.i_x_min, "{a:?} {b:?}");
            assert!((a.i_xm1_max - b.i_xm1_max).abs() <= 1e-12 * a.i_xm1_max.abs().max(1e-18), "{a:?} {b:?}");
        }
    }

    #[test]
    fn exhaustive_budget_enforced() {
        let cfg = CrossbarConfig::new(Technology::Fefet, 8, 2);
        let r = sense_margin_curve(&cfg, 2, SmMode::Exhaustive { budget: 1000 }, &SolverOptions::default(), &Sequential);
        assert!(matches!(r, Err(Error::Budget { .. })));
    }
}
