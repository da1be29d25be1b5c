//! Procedural 10-class dataset and the small MLP trained on it.

use rand::seq::SliceRandom;
use rand::Rng;
use xbar_core::inference::{argmax, DenseLayer, LabeledData, LayerActivation, Mlp};
use xbar_core::rng::{normal, stream, Purpose};

#[derive(Debug, Clone, Copy)]
pub struct DeskSpec {
    pub samples: usize,
    pub features: usize,
    pub classes: usize,
    /// Per-feature Gaussian noise around the class template.
    pub noise: f64,
    pub seed: u64,
}

impl Default for DeskSpec {
    fn default() -> Self {
        Self {
            samples: 2000,
            features: 64,
            classes: 10,
            noise: 0.3,
            seed: 2024,
        }
    }
}

/// Samples are a class template plus noise, clipped to `[0, 1]`. Templates
/// share a common background so classes differ in a minority of features.
pub fn generate(spec: &DeskSpec) -> LabeledData {
    let mut rng = stream(spec.seed, Purpose::Dataset, 0);
    let background: Vec<f64> = (0..spec.features).map(|_| rng.random_range(0.2..0.8)).collect();
    let templates: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| {
            background
                .iter()
                .map(|&b| if rng.random::<f64>() < 0.3 { rng.random_range(0.0..1.0) } else { b })
                .collect()
        })
        .collect();
    let mut x = Vec::with_capacity(spec.samples * spec.features);
    let mut labels = Vec::with_capacity(spec.samples);
    for k in 0..spec.samples {
        let mut r = stream(spec.seed, Purpose::Dataset, 1 + k as u64);
        let class = k % spec.classes;
        for &t in &templates[class] {
            x.push((t + spec.noise * normal(&mut r)).clamp(0.0, 1.0) as f32);
        }
        labels.push(class as u32);
    }
    LabeledData {
        features: spec.features,
        x,
        labels,
    }
}

/// Splits off the last `test` samples.
pub fn split(data: &LabeledData, test: usize) -> (LabeledData, LabeledData) {
    let n = data.len() - test.min(data.len());
    let f = data.features;
    let part = |a: usize, b: usize| LabeledData {
        features: f,
        x: data.x[a * f..b * f].to_vec(),
        labels: data.labels[a..b].to_vec(),
    };
    (part(0, n), part(n, data.len()))
}

#[derive(Debug, Clone, Copy)]
pub struct FitConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            epochs: 60,
            learning_rate: 0.05,
            momentum: 0.9,
            batch_size: 32,
            seed: 7,
        }
    }
}

struct Dense {
    i: usize,
    o: usize,
    w: Vec<f64>,
    b: Vec<f64>,
}

impl Dense {
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.o)
            .map(|o| self.b[o] + self.w[o * self.i..(o + 1) * self.i].iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let top = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - top).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Softmax cross-entropy training of an `in → hidden (ReLU) → classes` MLP.
pub fn fit(train: &LabeledData, classes: usize, fc: &FitConfig) -> Mlp {
    let mut rng = stream(fc.seed, Purpose::Training, 0);
    let mut init = |i: usize, o: usize| {
        let a = (6.0 / (i + o) as f64).sqrt();
        Dense {
            i,
            o,
            w: (0..i * o).map(|_| rng.random_range(-a..a)).collect(),
            b: vec![0.0; o],
        }
    };
    let mut l1 = init(train.features, fc.hidden);
    let mut l2 = init(fc.hidden, classes);
    let mut v1 = (vec![0.0; l1.w.len()], vec![0.0; l1.b.len()]);
    let mut v2 = (vec![0.0; l2.w.len()], vec![0.0; l2.b.len()]);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..fc.epochs {
        order.shuffle(&mut stream(fc.seed, Purpose::Training, 1 + epoch as u64));
        let lr = fc.learning_rate * 0.5 * (1.0 + (core::f64::consts::PI * epoch as f64 / fc.epochs as f64).cos());
        for batch in order.chunks(fc.batch_size) {
            let mut g1 = (vec![0.0; l1.w.len()], vec![0.0; l1.b.len()]);
            let mut g2 = (vec![0.0; l2.w.len()], vec![0.0; l2.b.len()]);
            for &k in batch {
                let x: Vec<f64> = train.sample(k).iter().map(|&v| v as f64).collect();
                let z1 = l1.forward(&x);
                let h: Vec<f64> = z1.iter().map(|v| v.max(0.0)).collect();
                let mut dz2 = softmax(&l2.forward(&h));
                dz2[train.labels[k] as usize] -= 1.0;
                let mut dh = vec![0.0; l1.o];
                for o in 0..l2.o {
                    g2.1[o] += dz2[o];
                    for i in 0..l2.i {
                        g2.0[o * l2.i + i] += dz2[o] * h[i];
                        dh[i] += dz2[o] * l2.w[o * l2.i + i];
                    }
                }
                for o in 0..l1.o {
                    let dz = if z1[o] > 0.0 { dh[o] } else { 0.0 };
                    g1.1[o] += dz;
                    for i in 0..l1.i {
                        g1.0[o * l1.i + i] += dz * x[i];
                    }
                }
            }
            let scale = lr / batch.len() as f64;
            let step = |p: &mut [f64], v: &mut [f64], g: &[f64]| {
                for ((p, v), g) in p.iter_mut().zip(v.iter_mut()).zip(g) {
                    *v = fc.momentum * *v - scale * g;
                    *p += *v;
                }
            };
            step(&mut l1.w, &mut v1.0, &g1.0);
            step(&mut l1.b, &mut v1.1, &g1.1);
            step(&mut l2.w, &mut v2.0, &g2.0);
            step(&mut l2.b, &mut v2.1, &g2.1);
        }
    }
    let to_layer = |d: &Dense, activation| DenseLayer {
        in_dim: d.i,
        out_dim: d.o,
        weights: d.w.iter().map(|&v| v as f32).collect(),
        bias: d.b.iter().map(|&v| v as f32).collect(),
        activation,
    };
    Mlp {
        layers: vec![to_layer(&l1, LayerActivation::Relu), to_layer(&l2, LayerActivation::Identity)],
    }
}

/// Test samples held out by [`bundle`].
pub const TEST_SAMPLES: usize = 400;

pub struct Bundle {
    pub train: LabeledData,
    pub test: LabeledData,
    pub classes: usize,
    pub model: Mlp,
}

/// The bundled assets: generated data, its split and the fitted model.
pub fn bundle(spec: &DeskSpec, fc: &FitConfig) -> Bundle {
    let data = generate(spec);
    let (train, test) = split(&data, TEST_SAMPLES);
    let model = fit(&train, spec.classes, fc);
    Bundle {
        train,
        test,
        classes: spec.classes,
        model,
    }
}

/// Floating-point accuracy.
pub fn accuracy(model: &Mlp, data: &LabeledData) -> f64 {
    let correct = (0..data.len())
        .filter(|&k| argmax(&model.forward(data.sample(k))) == data.labels[k] as usize)
        .count();
    correct as f64 / data.len() as f64
}
