//! Per-column MLP emulating the signed current deviation of a gate-input
//! column from its input bits and cell conductances.

use crate::devices::BitCell;
use crate::dse::{apply_variations, VariationConfig};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::metrics::{group_inputs, nonideality_factor};
use crate::rng::{stream, Purpose};
use crate::solver::{ArraySolver, SolverOptions};
use crate::topology::{CrossbarConfig, Topology};
use crate::workload::WorkloadSampler;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use libm::{exp, sqrt, tanh};
use rand::seq::SliceRandom;
use rand::Rng;

/// One column observation: `n` input bits followed by `n` conductances / G_ON.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainRecord {
    pub features: Vec<f64>,
    /// `(I_ideal − I_nonideal) / I_ideal`
    pub target: f64,
    pub nf: f64,
}

/// Feature vector of one column. `factors` are the per-row variation factors.
pub fn column_features(cell: &BitCell, inputs: &[bool], weights: &[bool], factors: Option<&[f64]>, out: &mut Vec<f64>) {
    out.clear();
    out.extend(inputs.iter().map(|&x| if x { 1.0 } else { 0.0 }));
    let g_on = cell.g_on();
    out.extend(
        weights
            .iter()
            .enumerate()
            .map(|(i, &w)| cell.conductance(true, w) * factors.map_or(1.0, |f| f[i]) / g_on),
    );
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct DatasetSpec {
    /// Column observations to draw, before excluding zero-reference columns.
    pub records: usize,
    pub seed: u64,
    pub sampler: WorkloadSampler,
    /// When set, each array sample draws its input and weight densities
    /// uniformly from this range instead of using `sampler`.
    pub density_range: Option<(f64, f64)>,
    pub train_fraction: f64,
    pub variation: Option<VariationConfig>,
    pub solver: SolverOptions,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            records: 20_000,
            seed: 0,
            sampler: WorkloadSampler::default(),
            density_range: Some((0.05, 0.95)),
            train_fraction: 0.8,
            variation: None,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Dataset {
    pub rows: usize,
    pub train: Vec<TrainRecord>,
    pub test: Vec<TrainRecord>,
    /// Observations dropped because their reference current is zero.
    pub excluded: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.train.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Solver-labelled column observations with a deterministic train/test split.
pub fn generate_dataset<E: Executor>(cfg: &CrossbarConfig, spec: &DatasetSpec, exec: &E) -> Result<Dataset> {
    if cfg.topology != Topology::GateInput {
        return Err(Error::Unsupported("per-column surrogate needs independent (gate-input) columns".into()));
    }
    spec.sampler.validate()?;
    if !(spec.train_fraction > 0.0 && spec.train_fraction <= 1.0) {
        return Err(Error::Config(format!("train fraction {} must be in (0, 1]", spec.train_fraction)));
    }
    if let Some((lo, hi)) = spec.density_range {
        WorkloadSampler { p_input: lo, p_weight: hi }.validate()?;
        if lo > hi {
            return Err(Error::Config("density range is reversed".into()));
        }
    }
    let solver = ArraySolver::new(cfg, &spec.solver)?;
    let (n, m) = (cfg.rows, cfg.cols);
    let groups = cfg.activation.groups(n);
    let per_sample = groups.len() * m;
    let samples = spec.records.div_ceil(per_sample);
    let chunks = exec.map(samples, |s| -> Result<Vec<Option<TrainRecord>>> {
        let sampler = match spec.density_range {
            Some((lo, hi)) => {
                let mut rng = stream(spec.seed, Purpose::Dataset, s as u64);
                WorkloadSampler {
                    p_input: rng.random_range(lo..=hi),
                    p_weight: rng.random_range(lo..=hi),
                }
            }
            None => spec.sampler,
        };
        let pat = sampler.sample(n, m, spec.seed, s as u64);
        let factors = match &spec.variation {
            Some(vc) => Some(apply_variations(&solver.cell, &pat.weights, vc, s as u64)?),
            None => None,
        };
        let mut out = Vec::with_capacity(per_sample);
        let mut col_w = vec![false; n];
        let mut col_f = vec![1.0; n];
        for range in &groups {
            let x = group_inputs(&pat.inputs, range);
            let reference = solver.reference(&pat.weights, &x, factors.as_deref())?;
            let actual = solver.column_currents(&pat.weights, &x, factors.as_deref())?;
            for j in 0..m {
                out.push(nonideality_factor(reference[j], actual[j]).map(|smp| {
                    for i in 0..n {
                        col_w[i] = pat.weights[i * m + j];
                        col_f[i] = factors.as_ref().map_or(1.0, |f| f[i * m + j]);
                    }
                    let mut features = Vec::with_capacity(2 * n);
                    column_features(&solver.cell, &x, &col_w, factors.as_ref().map(|_| col_f.as_slice()), &mut features);
                    TrainRecord {
                        features,
                        target: smp.signed_dev,
                        nf: smp.nf,
                    }
                }));
            }
        }
        Ok(out)
    });
    let mut records = Vec::with_capacity(spec.records);
    let mut excluded = 0;
    'outer: for chunk in chunks {
        for r in chunk? {
            if records.len() + excluded == spec.records {
                break 'outer;
            }
            match r {
                Some(r) => records.push(r),
                None => excluded += 1,
            }
        }
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(&mut stream(spec.seed, Purpose::Split, 0));
    let n_train = libm::round(records.len() as f64 * spec.train_fraction) as usize;
    let mut slots: Vec<Option<TrainRecord>> = records.into_iter().map(Some).collect();
    let mut take = |ix: &[usize]| ix.iter().map(|&k| slots[k].take().expect("index used once")).collect::<Vec<_>>();
    let train = take(&order[..n_train]);
    let test = take(&order[n_train..]);
    Ok(Dataset { rows: n, train, test, excluded })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum HiddenActivation {
    #[default]
    Tanh,
    Sigmoid,
}

impl HiddenActivation {
    pub fn name(self) -> &'static str {
        match self {
            HiddenActivation::Tanh => "tanh",
            HiddenActivation::Sigmoid => "sigmoid",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Self::Tanh),
            "sigmoid" => Ok(Self::Sigmoid),
            _ => Err(Error::Config(format!("unknown activation '{s}'"))),
        }
    }

    /// Value and derivative.
    #[inline]
    fn eval(self, z: f64) -> (f64, f64) {
        match self {
            HiddenActivation::Tanh => {
                let a = tanh(z);
                (a, 1.0 - a * a)
            }
            HiddenActivation::Sigmoid => {
                let a = 1.0 / (1.0 + exp(-z));
                (a, a * (1.0 - a))
            }
        }
    }
}

/// `[d, H, 1]` network on standardised features and targets.
///
/// Parameters are laid out as `w1` (H×d, row-major), `b1` (H), `w2` (H), `b2`;
/// normalisation as `in_mean` (d), `in_scale` (d), `out_mean`, `out_scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateNet {
    pub inputs: usize,
    pub hidden: usize,
    pub activation: HiddenActivation,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
    pub in_mean: Vec<f64>,
    pub in_scale: Vec<f64>,
    pub out_mean: f64,
    pub out_scale: f64,
}

/// Surrogate output for one column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub signed_dev: f64,
    pub nf: f64,
}

impl Prediction {
    /// Non-ideal current implied for a column whose reference current is `i_ideal`.
    pub fn reconstruct(&self, i_ideal: f64) -> f64 {
        if i_ideal == 0.0 {
            0.0
        } else {
            i_ideal * (1.0 - self.signed_dev)
        }
    }
}

impl SurrogateNet {
    /// Uniform Glorot hidden weights; output layer and biases start at zero,
    /// so an untrained net predicts the target mean. Normalisation is identity.
    pub fn new(inputs: usize, hidden: usize, activation: HiddenActivation, seed: u64) -> Result<Self> {
        if inputs == 0 || hidden == 0 {
            return Err(Error::Config("network layers must be non-empty".into()));
        }
        let mut rng = stream(seed, Purpose::Training, u64::MAX);
        let a1 = sqrt(6.0 / (inputs + hidden) as f64);
        Ok(Self {
            inputs,
            hidden,
            activation,
            w1: (0..hidden * inputs).map(|_| rng.random_range(-a1..a1)).collect(),
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
            in_mean: vec![0.0; inputs],
            in_scale: vec![1.0; inputs],
            out_mean: 0.0,
            out_scale: 1.0,
        })
    }

    pub fn param_count(&self) -> usize {
        self.hidden * self.inputs + 2 * self.hidden + 1
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        p.extend_from_slice(&self.w1);
        p.extend_from_slice(&self.b1);
        p.extend_from_slice(&self.w2);
        p.push(self.b2);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.param_count() {
            return Err(Error::Dimension(format!("{} parameters for a net with {}", p.len(), self.param_count())));
        }
        let (h, d) = (self.hidden, self.inputs);
        self.w1.copy_from_slice(&p[..h * d]);
        self.b1.copy_from_slice(&p[h * d..h * d + h]);
        self.w2.copy_from_slice(&p[h * d + h..h * d + 2 * h]);
        self.b2 = p[h * d + 2 * h];
        Ok(())
    }

    /// Parameters followed by normalisation constants, as little-endian f64.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut all = self.params();
        all.extend_from_slice(&self.in_mean);
        all.extend_from_slice(&self.in_scale);
        all.push(self.out_mean);
        all.push(self.out_scale);
        all.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    /// Inverse of [`SurrogateNet::to_le_bytes`].
    pub fn from_le_bytes(inputs: usize, hidden: usize, activation: HiddenActivation, bytes: &[u8]) -> Result<Self> {
        let mut net = Self::new(inputs, hidden, activation, 0)?;
        let count = net.param_count() + 2 * inputs + 2;
        if bytes.len() != 8 * count {
            return Err(Error::Dimension(format!("parameter blob has {} bytes, expected {}", bytes.len(), 8 * count)));
        }
        let v: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let p = net.param_count();
        net.set_params(&v[..p])?;
        net.in_mean.copy_from_slice(&v[p..p + inputs]);
        net.in_scale.copy_from_slice(&v[p + inputs..p + 2 * inputs]);
        net.out_mean = v[p + 2 * inputs];
        net.out_scale = v[p + 2 * inputs + 1];
        if v.iter().any(|x| !x.is_finite()) || net.in_scale.iter().any(|&s| s == 0.0) || net.out_scale == 0.0 {
            return Err(Error::Config("parameter blob holds non-finite or zero-scale values".into()));
        }
        Ok(net)
    }

    /// Normalised output for raw features, with hidden activations and slopes.
    fn forward(&self, features: &[f64], z: &mut [f64], act: &mut [f64], slope: &mut [f64]) -> f64 {
        let d = self.inputs;
        for k in 0..self.hidden {
            let row = &self.w1[k * d..(k + 1) * d];
            let mut s = self.b1[k];
            for i in 0..d {
                s += row[i] * (features[i] - self.in_mean[i]) / self.in_scale[i];
            }
            z[k] = s;
            let (a, da) = self.activation.eval(s);
            act[k] = a;
            slope[k] = da;
        }
        self.b2 + self.w2.iter().zip(act.iter()).map(|(w, a)| w * a).sum::<f64>()
    }

    /// Predicted signed deviation for a raw feature vector.
    pub fn predict_features(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.inputs {
            return Err(Error::Dimension(format!("{} features for a net with {} inputs", features.len(), self.inputs)));
        }
        let h = self.hidden;
        let (mut z, mut a, mut s) = (vec![0.0; h], vec![0.0; h], vec![0.0; h]);
        Ok(self.forward(features, &mut z, &mut a, &mut s) * self.out_scale + self.out_mean)
    }

    /// Hidden pre-activations split by feature half: `b1` plus the input-bit
    /// terms, and the conductance terms. Summing the two and calling
    /// [`SurrogateNet::predict_split`] equals [`SurrogateNet::predict`] up to
    /// rounding, but lets a tile reuse the conductance half across cycles.
    pub fn project_inputs(&self, inputs: &[bool], out: &mut [f64]) {
        let d = self.inputs;
        for (k, o) in out.iter_mut().enumerate().take(self.hidden) {
            let row = &self.w1[k * d..];
            *o = self.b1[k]
                + inputs
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| row[i] * ((x as u8 as f64) - self.in_mean[i]) / self.in_scale[i])
                    .sum::<f64>();
        }
    }

    /// See [`SurrogateNet::project_inputs`]; `conductances` are in units of G_ON.
    pub fn project_conductances(&self, conductances: &[f64], out: &mut [f64]) {
        let d = self.inputs;
        let n = d - conductances.len();
        for (k, o) in out.iter_mut().enumerate().take(self.hidden) {
            let row = &self.w1[k * d + n..(k + 1) * d];
            *o = conductances
                .iter()
                .enumerate()
                .map(|(i, &g)| row[i] * (g - self.in_mean[n + i]) / self.in_scale[n + i])
                .sum::<f64>();
        }
    }

    /// Signed deviation from the two projected halves.
    pub fn predict_split(&self, inputs_part: &[f64], conductance_part: &[f64]) -> f64 {
        let y = self.b2
            + self
                .w2
                .iter()
                .zip(inputs_part.iter().zip(conductance_part))
                .map(|(w, (a, b))| w * self.activation.eval(a + b).0)
                .sum::<f64>();
        y * self.out_scale + self.out_mean
    }

    /// Prediction for a column given its input bits and cell conductances / G_ON.
    pub fn predict(&self, inputs: &[bool], conductances: &[f64]) -> Result<Prediction> {
        if inputs.len() + conductances.len() != self.inputs {
            return Err(Error::Dimension(format!(
                "{} bits and {} conductances for a net with {} inputs",
                inputs.len(),
                conductances.len(),
                self.inputs
            )));
        }
        let mut f: Vec<f64> = inputs.iter().map(|&x| if x { 1.0 } else { 0.0 }).collect();
        f.extend_from_slice(conductances);
        let signed_dev = self.predict_features(&f)?;
        Ok(Prediction {
            signed_dev,
            nf: signed_dev.abs(),
        })
    }

    /// Mean squared error in normalised target units and its gradient with
    /// respect to [`SurrogateNet::params`].
    pub fn loss_and_gradient(&self, batch: &[TrainRecord]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::Config("empty batch".into()));
        }
        let (h, d) = (self.hidden, self.inputs);
        let mut grad = vec![0.0; self.param_count()];
        let (mut z, mut a, mut s) = (vec![0.0; h], vec![0.0; h], vec![0.0; h]);
        let mut xn = vec![0.0; d];
        let mut loss = 0.0;
        let scale = 1.0 / batch.len() as f64;
        for r in batch {
            if r.features.len() != d {
                return Err(Error::Dimension(format!("record with {} features for {d} inputs", r.features.len())));
            }
            let y = self.forward(&r.features, &mut z, &mut a, &mut s);
            let t = (r.target - self.out_mean) / self.out_scale;
            let e = y - t;
            loss += e * e * scale;
            let dy = 2.0 * e * scale;
            for i in 0..d {
                xn[i] = (r.features[i] - self.in_mean[i]) / self.in_scale[i];
            }
            let (gw1, rest) = grad.split_at_mut(h * d);
            let (gb1, rest) = rest.split_at_mut(h);
            let (gw2, gb2) = rest.split_at_mut(h);
            gb2[0] += dy;
            for k in 0..h {
                gw2[k] += dy * a[k];
                let dz = dy * self.w2[k] * s[k];
                gb1[k] += dz;
                let row = &mut gw1[k * d..(k + 1) * d];
                for i in 0..d {
                    row[i] += dz * xn[i];
                }
            }
        }
        Ok((loss, grad))
    }

    /// Mean squared error of predictions in target units.
    pub fn mse(&self, records: &[TrainRecord]) -> Result<f64> {
        if records.is_empty() {
            return Err(Error::Config("no records to score".into()));
        }
        let mut sum = 0.0;
        for r in records {
            let e = self.predict_features(&r.features)? - r.target;
            sum += e * e;
        }
        Ok(sum / records.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    pub hidden: usize,
    pub activation: HiddenActivation,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            activation: HiddenActivation::Tanh,
            learning_rate: 0.01,
            momentum: 0.9,
            epochs: 40,
            batch_size: 32,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainReport {
    /// Training-set MSE (target units) after each epoch, non-increasing.
    pub epoch_train_mse: Vec<f64>,
    pub train_mse: f64,
    /// `None` when the dataset has no test records.
    pub test_mse: Option<f64>,
    /// Epochs whose update was rolled back with a halved step.
    pub rejected_epochs: usize,
}

/// Momentum SGD on the MSE of standardised targets.
///
/// After every epoch the training loss is re-measured; an epoch that raises
/// it is undone and the step halved, so the recorded loss never increases.
pub fn train(data: &Dataset, tc: &TrainConfig) -> Result<(SurrogateNet, TrainReport)> {
    if data.train.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    if tc.batch_size == 0 || !(tc.learning_rate > 0.0) || !(0.0..1.0).contains(&tc.momentum) {
        return Err(Error::Config("batch size, learning rate and momentum must be positive (momentum < 1)".into()));
    }
    let d = data.train[0].features.len();
    let mut net = SurrogateNet::new(d, tc.hidden, tc.activation, tc.seed)?;
    let count = data.train.len() as f64;
    for i in 0..d {
        let mean = data.train.iter().map(|r| r.features[i]).sum::<f64>() / count;
        let var = data.train.iter().map(|r| (r.features[i] - mean) * (r.features[i] - mean)).sum::<f64>() / count;
        net.in_mean[i] = mean;
        net.in_scale[i] = if var > 1e-24 { sqrt(var) } else { 1.0 };
    }
    let t_mean = data.train.iter().map(|r| r.target).sum::<f64>() / count;
    let t_var = data.train.iter().map(|r| (r.target - t_mean) * (r.target - t_mean)).sum::<f64>() / count;
    net.out_mean = t_mean;
    net.out_scale = if t_var > 1e-24 { sqrt(t_var) } else { 1.0 };

    let mut lr = tc.learning_rate;
    let mut best = net.mse(&data.train)?;
    let mut history = Vec::with_capacity(tc.epochs);
    let mut rejected = 0;
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut batch = Vec::with_capacity(tc.batch_size);
    for epoch in 0..tc.epochs {
        let saved = net.params();
        let mut params = saved.clone();
        let mut velocity = vec![0.0; params.len()];
        order.shuffle(&mut stream(tc.seed, Purpose::Training, epoch as u64));
        for chunk in order.chunks(tc.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&k| data.train[k].clone()));
            let (loss, grad) = net.loss_and_gradient(&batch)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            for ((p, v), g) in params.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
                *v = tc.momentum * *v - lr * g;
                *p += *v;
            }
            net.set_params(&params)?;
        }
        let mse = net.mse(&data.train)?;
        if !mse.is_finite() {
            return Err(Error::Diverged { epoch, loss: mse });
        }
        if mse > best {
            net.set_params(&saved)?;
            lr *= 0.5;
            rejected += 1;
        } else {
            best = mse;
        }
        history.push(best);
    }
    let test_mse = if data.test.is_empty() { None } else { Some(net.mse(&data.test)?) };
    Ok((
        net,
        TrainReport {
            epoch_train_mse: history,
            train_mse: best,
            test_mse,
            rejected_epochs: rejected,
        },
    ))
}
