//! On-disk model, dataset and surrogate files: a JSON manifest next to a
//! little-endian binary blob. Blob paths are relative to the manifest.

use crate::emit::{create, write_json};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};
use xbar_core::inference::{DenseLayer, LabeledData, LayerActivation, Mlp};
use xbar_core::surrogate::{HiddenActivation, SurrogateNet, TrainReport};
use xbar_core::topology::CrossbarConfig;

pub const MODEL_FORMAT: &str = "xbar-mlp";
pub const DATASET_FORMAT: &str = "xbar-dataset";
pub const SURROGATE_FORMAT: &str = "xbar-surrogate";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerEntry {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: String,
    /// Byte offset of the `out_dim × in_dim` row-major weights.
    pub weights_offset: usize,
    /// Byte offset of the `out_dim` biases.
    pub bias_offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelManifest {
    pub format: String,
    pub version: u32,
    pub dtype: String,
    pub blob: String,
    pub blob_bytes: usize,
    pub layers: Vec<LayerEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u32,
    pub blob: String,
    pub blob_bytes: usize,
    pub samples: usize,
    pub features: usize,
    pub classes: usize,
    /// `samples × features` f32 values, row-major, at offset 0.
    pub features_dtype: String,
    /// Byte offset of the `samples` u32 labels.
    pub labels_offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateManifest {
    pub format: String,
    pub version: u32,
    pub dtype: String,
    pub blob: String,
    pub blob_bytes: usize,
    pub inputs: usize,
    pub hidden: usize,
    pub activation: String,
    pub param_count: usize,
    /// Order of the arrays in the blob.
    pub layout: Vec<String>,
    /// Array the net was trained on.
    pub config: CrossbarConfig,
    pub train_mse: f64,
    pub test_mse: Option<f64>,
}

fn blob_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("bin")
}

fn blob_name(manifest: &Path) -> String {
    blob_path(manifest)
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn save(manifest_path: &Path, manifest: &impl Serialize, blob: &[u8], force: bool) -> Result<()> {
    let bp = blob_path(manifest_path);
    create(&bp, force)?.write_all(blob).map_err(|e| Error::io(&bp, e))?;
    write_json(manifest_path, manifest, force)
}

fn load_manifest<T: for<'de> Deserialize<'de>>(path: &Path, format: &str) -> Result<(T, Vec<u8>, PathBuf)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let head: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    let found = head.get("format").and_then(|f| f.as_str()).unwrap_or("<none>");
    if found != format {
        return Err(Error::format(path, format!("expected format `{format}`, found `{found}`")));
    }
    if head.get("version").and_then(|v| v.as_u64()) != Some(VERSION as u64) {
        return Err(Error::format(path, format!("unsupported version (expected {VERSION})")));
    }
    let manifest: T = serde_json::from_value(head.clone()).map_err(|e| Error::format(path, e.to_string()))?;
    let blob = head.get("blob").and_then(|b| b.as_str()).unwrap_or_default();
    let bp = path.parent().unwrap_or(Path::new(".")).join(blob);
    let bytes = std::fs::read(&bp).map_err(|e| Error::io(&bp, e))?;
    let want = head.get("blob_bytes").and_then(|b| b.as_u64()).unwrap_or(0) as usize;
    if bytes.len() != want {
        return Err(Error::format(&bp, format!("blob has {} bytes, manifest says {want}", bytes.len())));
    }
    Ok((manifest, bytes, bp))
}

fn f32s(bytes: &[u8]) -> Vec<f32> {
    bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect()
}

/// Manifest and blob of `model`; `blob` names the blob file.
pub fn encode_model(model: &Mlp, blob: &str) -> Result<(ModelManifest, Vec<u8>)> {
    model.validate()?;
    let mut bytes = Vec::new();
    let mut layers = Vec::new();
    for l in &model.layers {
        let weights_offset = bytes.len();
        bytes.extend(l.weights.iter().flat_map(|v| v.to_le_bytes()));
        let bias_offset = bytes.len();
        bytes.extend(l.bias.iter().flat_map(|v| v.to_le_bytes()));
        layers.push(LayerEntry {
            in_dim: l.in_dim,
            out_dim: l.out_dim,
            activation: l.activation.name().to_string(),
            weights_offset,
            bias_offset,
        });
    }
    let m = ModelManifest {
        format: MODEL_FORMAT.into(),
        version: VERSION,
        dtype: "f32-le".into(),
        blob: blob.into(),
        blob_bytes: bytes.len(),
        layers,
    };
    Ok((m, bytes))
}

pub fn decode_model(m: &ModelManifest, bytes: &[u8], path: &Path) -> Result<Mlp> {
    if m.dtype != "f32-le" {
        return Err(Error::format(path, format!("unsupported dtype `{}`", m.dtype)));
    }
    let mut layers = Vec::new();
    for (k, e) in m.layers.iter().enumerate() {
        let nw = e.in_dim * e.out_dim * 4;
        let nb = e.out_dim * 4;
        let slice = |off: usize, len: usize| {
            bytes
                .get(off..off + len)
                .ok_or_else(|| Error::format(path, format!("layer {k} extends past the blob")))
        };
        layers.push(DenseLayer {
            in_dim: e.in_dim,
            out_dim: e.out_dim,
            weights: f32s(slice(e.weights_offset, nw)?),
            bias: f32s(slice(e.bias_offset, nb)?),
            activation: LayerActivation::parse(&e.activation)?,
        });
    }
    let model = Mlp { layers };
    model.validate().map_err(|e| Error::format(path, e.to_string()))?;
    Ok(model)
}

pub fn save_model(path: &Path, model: &Mlp, force: bool) -> Result<()> {
    let (m, bytes) = encode_model(model, &blob_name(path))?;
    save(path, &m, &bytes, force)
}

pub fn load_model(path: &Path) -> Result<Mlp> {
    let (m, bytes, _) = load_manifest::<ModelManifest>(path, MODEL_FORMAT)?;
    decode_model(&m, &bytes, path)
}

pub fn encode_dataset(data: &LabeledData, classes: usize, blob: &str) -> Result<(DatasetManifest, Vec<u8>)> {
    data.validate()?;
    let mut bytes: Vec<u8> = data.x.iter().flat_map(|v| v.to_le_bytes()).collect();
    let labels_offset = bytes.len();
    bytes.extend(data.labels.iter().flat_map(|v| v.to_le_bytes()));
    let m = DatasetManifest {
        format: DATASET_FORMAT.into(),
        version: VERSION,
        blob: blob.into(),
        blob_bytes: bytes.len(),
        samples: data.len(),
        features: data.features,
        classes,
        features_dtype: "f32-le".into(),
        labels_offset,
    };
    Ok((m, bytes))
}

pub fn decode_dataset(m: &DatasetManifest, bytes: &[u8], path: &Path) -> Result<LabeledData> {
    let nx = m.samples * m.features * 4;
    if m.features_dtype != "f32-le" || m.labels_offset != nx || bytes.len() != nx + m.samples * 4 {
        return Err(Error::format(path, "blob layout does not match samples × features"));
    }
    let labels: Vec<u32> = bytes[nx..]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if labels.iter().any(|&l| l as usize >= m.classes) {
        return Err(Error::format(path, "label outside the declared class count"));
    }
    Ok(LabeledData {
        features: m.features,
        x: f32s(&bytes[..nx]),
        labels,
    })
}

pub fn save_dataset(path: &Path, data: &LabeledData, classes: usize, force: bool) -> Result<()> {
    let (m, bytes) = encode_dataset(data, classes, &blob_name(path))?;
    save(path, &m, &bytes, force)
}

pub fn load_dataset(path: &Path) -> Result<LabeledData> {
    let (m, bytes, _) = load_manifest::<DatasetManifest>(path, DATASET_FORMAT)?;
    decode_dataset(&m, &bytes, path)
}

pub fn save_surrogate(path: &Path, net: &SurrogateNet, config: &CrossbarConfig, report: &TrainReport, force: bool) -> Result<()> {
    let bytes = net.to_le_bytes();
    let m = SurrogateManifest {
        format: SURROGATE_FORMAT.into(),
        version: VERSION,
        dtype: "f64-le".into(),
        blob: blob_name(path),
        blob_bytes: bytes.len(),
        inputs: net.inputs,
        hidden: net.hidden,
        activation: net.activation.name().into(),
        param_count: net.param_count(),
        layout: ["w1", "b1", "w2", "b2", "in_mean", "in_scale", "out_mean", "out_scale"]
            .map(String::from)
            .to_vec(),
        config: *config,
        train_mse: report.train_mse,
        test_mse: report.test_mse,
    };
    save(path, &m, &bytes, force)
}

pub fn load_surrogate(path: &Path) -> Result<(SurrogateNet, SurrogateManifest)> {
    let (m, bytes, bp) = load_manifest::<SurrogateManifest>(path, SURROGATE_FORMAT)?;
    let act = HiddenActivation::parse(&m.activation)?;
    let net = SurrogateNet::from_le_bytes(m.inputs, m.hidden, act, &bytes).map_err(|e| Error::format(bp, e.to_string()))?;
    Ok((net, m))
}

/// Directory of the bundled desk model and dataset.
pub fn assets_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets")
}

#[cfg(test)]
mod tests {
    use super::*;
    use xbar_core::exec::Sequential;
    use xbar_core::surrogate::{generate_dataset, train, DatasetSpec, TrainConfig};

    fn tiny_model() -> Mlp {
        Mlp {
            layers: vec![
                DenseLayer {
                    in_dim: 3,
                    out_dim: 2,
                    weights: vec![0.5, -1.25, 3.0, 1e-8, -0.0, f32::MAX],
                    bias: vec![0.1, -0.2],
                    activation: LayerActivation::Relu,
                },
                DenseLayer {
                    in_dim: 2,
                    out_dim: 2,
                    weights: vec![1.0, 2.0, 3.0, 4.0],
                    bias: vec![0.0, 1.0],
                    activation: LayerActivation::Identity,
                },
            ],
        }
    }

    #[test]
    fn model_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        let m = tiny_model();
        save_model(&p, &m, false).unwrap();
        assert!(dir.path().join("m.bin").exists());
        let back = load_model(&p).unwrap();
        assert_eq!(back, m);
        assert!(matches!(save_model(&p, &m, false), Err(Error::Exists(_))));
    }

    #[test]
    fn dataset_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.json");
        let d = LabeledData {
            features: 2,
            x: vec![0.0, 1.0, 0.25, 0.5, 1e-3, 0.75],
            labels: vec![0, 2, 1],
        };
        save_dataset(&p, &d, 3, false).unwrap();
        assert_eq!(load_dataset(&p).unwrap(), d);
        std::fs::write(dir.path().join("d.bin"), [0u8; 7]).unwrap();
        assert!(matches!(load_dataset(&p), Err(Error::Format { .. })));
        assert!(matches!(load_model(&p), Err(Error::Format { .. })));
    }

    #[test]
    fn truncated_model_blob_is_rejected() {
        let (mut m, bytes) = encode_model(&tiny_model(), "x.bin").unwrap();
        m.layers[1].bias_offset = bytes.len() - 4;
        assert!(decode_model(&m, &bytes, Path::new("x.json")).is_err());
    }

    #[test]
    fn surrogate_round_trip_predicts_identically() {
        let cfg = CrossbarConfig::new(xbar_core::devices::Technology::Fefet, 8, 4);
        let ds = generate_dataset(&cfg, &DatasetSpec { records: 64, seed: 2, ..Default::default() }, &Sequential).unwrap();
        let (net, rep) = train(&ds, &TrainConfig { hidden: 5, epochs: 2, seed: 2, ..Default::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.json");
        save_surrogate(&p, &net, &cfg, &rep, false).unwrap();
        let (back, m) = load_surrogate(&p).unwrap();
        assert_eq!(m.config, cfg);
        for r in &ds.test {
            assert_eq!(back.predict_features(&r.features).unwrap().to_bits(), net.predict_features(&r.features).unwrap().to_bits());
        }
    }
}
