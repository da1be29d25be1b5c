//! Layered run configuration: built-in defaults, then a JSON file (comments
//! allowed), then `dotted.key=value` overrides. Unknown keys are rejected.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::io::Read;
use std::path::{Path, PathBuf};
use xbar_core::devices::DeviceConfig;
use xbar_core::dse::{Evaluation, VariationConfig};
use xbar_core::inference::InferenceConfig;
use xbar_core::surrogate::{DatasetSpec, TrainConfig};
use xbar_core::topology::{Activation, CrossbarConfig, Parasitics, Topology};

/// Every tunable of a run. Units are fixed per key: ohm, volt, nm, µm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Master seed, copied into every stochastic stage by [`Settings::seeded`].
    pub seed: Option<u64>,
    pub rows: usize,
    pub cols: usize,
    pub topology: Topology,
    pub v_wl: f64,
    pub v_bl: f64,
    pub activation: Activation,
    pub device: DeviceConfig,
    pub parasitics: Parasitics,
    pub eval: Evaluation,
    pub variation: VariationConfig,
    /// Number of variation instances drawn by `variations` and `compare --accuracy`.
    pub variation_seeds: usize,
    pub dataset: DatasetSpec,
    pub training: TrainConfig,
    pub inference: InferenceConfig,
}

impl Default for Settings {
    fn default() -> Self {
        let x = CrossbarConfig::default();
        Self {
            seed: None,
            rows: x.rows,
            cols: x.cols,
            topology: x.topology,
            v_wl: x.v_wl,
            v_bl: x.v_bl,
            activation: x.activation,
            device: x.device,
            parasitics: x.parasitics,
            eval: Evaluation::default(),
            variation: VariationConfig::default(),
            variation_seeds: 10,
            dataset: DatasetSpec::default(),
            training: TrainConfig::default(),
            inference: InferenceConfig::default(),
        }
    }
}

impl Settings {
    pub fn crossbar(&self) -> CrossbarConfig {
        CrossbarConfig {
            rows: self.rows,
            cols: self.cols,
            topology: self.topology,
            v_wl: self.v_wl,
            v_bl: self.v_bl,
            activation: self.activation,
            device: self.device,
            parasitics: self.parasitics,
        }
    }

    pub fn set_crossbar(&mut self, c: &CrossbarConfig) {
        self.rows = c.rows;
        self.cols = c.cols;
        self.topology = c.topology;
        self.v_wl = c.v_wl;
        self.v_bl = c.v_bl;
        self.activation = c.activation;
        self.device = c.device;
        self.parasitics = c.parasitics;
    }

    /// Copy of `self` with the master seed pushed into every stage; the
    /// variation stream uses the same seed.
    pub fn seeded(&self) -> Self {
        let mut s = self.clone();
        if let Some(seed) = s.seed {
            s.eval.seed = seed;
            s.variation.seed = seed;
            s.dataset.seed = seed;
            s.training.seed = seed;
        }
        s
    }

    pub fn require_seed(&self, command: &str) -> Result<u64, ConfigError> {
        self.seed.ok_or_else(|| ConfigError::MissingSeed(command.to_string()))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config {path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("unknown config key `{key}`{}", suggestion.as_ref().map(|s| format!(" (did you mean `{s}`?)")).unwrap_or_default())]
    UnknownKey { key: String, suggestion: Option<String> },
    #[error("override `{0}` is not of the form dotted.key=value")]
    BadOverride(String),
    #[error("invalid config value: {0}")]
    Type(String),
    #[error("`{0}` is stochastic and needs a seed (--seed, `seed` in the config file, or -s seed=N)")]
    MissingSeed(String),
}

/// Resolves defaults ← `path` ← `overrides`. A run manifest is accepted as
/// the file, in which case its recorded settings are used.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<Settings, ConfigError> {
    let defaults = serde_json::to_value(Settings::default()).expect("settings serialise");
    let known = key_paths(&defaults);
    let mut tree = defaults;
    if let Some(path) = path {
        let file = read_json(path)?;
        let file = match file {
            Value::Object(mut m) if m.get("format").and_then(Value::as_str) == Some(crate::manifest::FORMAT) => {
                m.remove("settings").ok_or_else(|| ConfigError::Parse {
                    path: path.to_path_buf(),
                    msg: "run manifest has no `settings`".into(),
                })?
            }
            v => v,
        };
        if !file.is_object() {
            return Err(ConfigError::Parse {
                path: path.to_path_buf(),
                msg: "top level must be an object".into(),
            });
        }
        merge(&mut tree, file, "", &known)?;
    }
    for o in overrides {
        let (key, raw) = o.split_once('=').ok_or_else(|| ConfigError::BadOverride(o.clone()))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::BadOverride(o.clone()));
        }
        let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
        let mut nested = value;
        for part in key.rsplit('.') {
            let mut m = Map::new();
            m.insert(part.to_string(), nested);
            nested = Value::Object(m);
        }
        merge(&mut tree, nested, "", &known)?;
    }
    serde_json::from_value(tree).map_err(|e| ConfigError::Type(e.to_string()))
}

fn read_json(path: &Path) -> Result<Value, ConfigError> {
    let io = |source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    };
    let raw = std::fs::read(path).map_err(io)?;
    let mut text = String::new();
    json_comments::StripComments::new(raw.as_slice())
        .read_to_string(&mut text)
        .map_err(io)?;
    if text.trim().is_empty() {
        return Ok(Value::Object(Map::new()));
    }
    serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

fn key_paths(v: &Value) -> Vec<String> {
    fn walk(v: &Value, prefix: &str, out: &mut Vec<String>) {
        if let Value::Object(m) = v {
            for (k, child) in m {
                let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                out.push(p.clone());
                walk(child, &p, out);
            }
        }
    }
    let mut out = Vec::new();
    walk(v, "", &mut out);
    out
}

fn merge(base: &mut Value, overlay: Value, prefix: &str, known: &[String]) -> Result<(), ConfigError> {
    let (Value::Object(b), Value::Object(o)) = (&mut *base, &overlay) else {
        *base = overlay;
        return Ok(());
    };
    for (k, v) in o {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match b.get_mut(k) {
            // Optional sections have no default shape; the typed pass checks them.
            Some(slot) if slot.is_null() || !slot.is_object() => *slot = v.clone(),
            Some(slot) => merge(slot, v.clone(), &path, known)?,
            None => {
                return Err(ConfigError::UnknownKey {
                    suggestion: nearest(&path, known),
                    key: path,
                })
            }
        }
    }
    Ok(())
}

fn nearest(key: &str, known: &[String]) -> Option<String> {
    known
        .iter()
        .map(|k| (strsim::levenshtein(key, k), k))
        .min()
        .filter(|(d, _)| *d <= 3.max(key.len() / 3))
        .map(|(_, k)| k.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn empty_file_gives_defaults() {
        let f = file("");
        assert_eq!(load_config(Some(f.path()), &[]).unwrap(), Settings::default());
        let f = file("// nothing\n{ /* still nothing */ }");
        let s = load_config(Some(f.path()), &[]).unwrap();
        assert_eq!(s, Settings::default());
        assert_eq!(s.crossbar(), CrossbarConfig::default());
        assert_eq!((s.rows, s.cols, s.v_wl, s.v_bl), (64, 64, 0.7, 0.25));
    }

    #[test]
    fn file_then_overrides() {
        let f = file(
            r#"{
              // 16 x 16 SRAM
              "rows": 16, "cols": 16,
              "device": { "tech": "sram" },
              "parasitics": { "wire_res": 100.0 }
            }"#,
        );
        let s = load_config(Some(f.path()), &["parasitics.wire_res=0".into(), "seed=3".into()]).unwrap();
        assert_eq!(s.rows, 16);
        assert_eq!(s.device.tech, xbar_core::devices::Technology::Sram);
        assert_eq!(s.parasitics.wire_res, 0.0);
        assert_eq!(s.parasitics.via_res, 56.0);
        assert_eq!(s.seeded().eval.seed, 3);
    }

    #[test]
    fn zero_parasitic_override() {
        let s = load_config(None, &["parasitics.wire_res=0".into()]).unwrap();
        assert_eq!(s.parasitics.wire_res, 0.0);
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_suggestion() {
        let e = load_config(None, &["parasitcs.wire_res=0".into()]).unwrap_err();
        match e {
            ConfigError::UnknownKey { key, suggestion } => {
                assert_eq!(key, "parasitcs");
                assert_eq!(suggestion.as_deref(), Some("parasitics"));
            }
            e => panic!("{e}"),
        }
        let f = file(r#"{"parasitics": {"wire_rez": 1}}"#);
        let e = load_config(Some(f.path()), &[]).unwrap_err().to_string();
        assert!(e.contains("parasitics.wire_res"), "{e}");
    }

    #[test]
    fn type_mismatch_and_optional_sections() {
        assert!(matches!(load_config(None, &["rows=many".into()]), Err(ConfigError::Type(_))));
        let s = load_config(None, &["inference.variation={\"sigma_frac\":0.1,\"seed\":2}".into()]).unwrap();
        assert_eq!(s.inference.variation.unwrap().seed, 2);
        assert!(matches!(
            load_config(None, &["inference.variation={\"sigma\":0.1}".into()]),
            Err(ConfigError::Type(_))
        ));
        assert!(matches!(load_config(None, &["rows".into()]), Err(ConfigError::BadOverride(_))));
    }

    #[test]
    fn settings_round_trip() {
        let s = load_config(None, &["seed=9".into(), "activation={\"pwa\":8}".into()]).unwrap();
        let f = file(&serde_json::to_string_pretty(&s).unwrap());
        assert_eq!(load_config(Some(f.path()), &[]).unwrap(), s);
        assert_eq!(s.activation, Activation::Pwa(8));
    }
}
