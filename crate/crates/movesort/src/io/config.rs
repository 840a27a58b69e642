//! Run configuration (TOML) and run manifests.
//!
//! A config file is a TOML document with optional sections; command-line
//! flags override config values, which override built-in defaults:
//!
//! ```toml
//! seed = 7
//!
//! [gen]            # synthetic scene recipe
//! kind = "sinusoidal"
//! objects = 2
//! frames = 100
//! speed = 0.005
//! amplitude = 0.1
//! period = 40.0
//! cross-frame = 50
//! sigma = 0.05
//! fn-prob = 0.1
//!
//! [train]          # model training
//! epochs = 10
//! lr = 0.001
//! weight-decay = 0.0001
//! batch-size = 256
//! drop-prob = 0.2
//! shorten-prob = 0.05
//! history = 8
//! hidden = 32
//! horizon = 5
//! mode = "rloc"
//! standardize = true
//!
//! [tracker]
//! t-lost = 30
//! init-hits = 3
//! iou-min = 0.25
//! lambda = 5.0
//! assoc = "hybrid"
//! interp-max-gap = 5
//! min-track-len = 20
//!
//! [filter]
//! kind = "kalman"      # kalman | bayes | e2e
//! model = "model.bin"
//! sigma-m = 0.05
//!
//! [image]          # pixel→normalized conversion of MOT files
//! width = 1920.0
//! height = 1080.0
//! ```
//!
//! Every CLI run writes `<out>.manifest.toml` beside its primary output: the
//! command, the resolved seed, the effective configuration and SHA-256 hashes
//! of the model files it read or wrote. A run is reproducible from its
//! manifest alone.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::IoError;

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gen: Option<GenSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tracker: Option<TrackerSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image: Option<ImageSection>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct GenSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objects: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frames: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_frame: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fn_prob: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenes: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct TrainSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight_decay: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drop_prob: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shorten_prob: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub history: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub standardize: Option<bool>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct TrackerSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_lost: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_hits: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iou_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assoc: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interp_max_gap: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_track_len: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FilterSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_m: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ImageSection {
    pub width: f64,
    pub height: f64,
}

impl RunConfig {
    pub fn from_str(text: &str, label: &str) -> Result<Self, IoError> {
        toml::from_str(text).map_err(|e| IoError::Config(format!("{label}: {e}")))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, IoError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| IoError::File {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_str(&text, &path.display().to_string())
    }
}

/// SHA-256 of a file's bytes as lowercase hex.
pub fn sha256_file(path: impl AsRef<Path>) -> Result<String, IoError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })?;
    Ok(sha256_hex(&bytes))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
    /// file name → SHA-256 of every model file read or written.
    pub hashes: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config: RunConfig) -> Self {
        Self { command: command.to_string(), seed, config, hashes: BTreeMap::new() }
    }

    pub fn add_hash(&mut self, name: &str, hash: String) {
        self.hashes.insert(name.to_string(), hash);
    }

    pub fn add_file_hash(&mut self, path: impl AsRef<Path>) -> Result<(), IoError> {
        let path = path.as_ref();
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let hash = sha256_file(path)?;
        self.hashes.insert(name, hash);
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("manifest serializes")
    }

    /// Writes `<out>.manifest.toml` next to the run's primary output.
    pub fn write_for(&self, primary_output: impl AsRef<Path>) -> Result<(), IoError> {
        let out = primary_output.as_ref();
        let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".manifest.toml");
        let path = out.with_file_name(name);
        std::fs::write(&path, self.to_toml()).map_err(|source| IoError::File {
            path: path.display().to_string(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_through_toml() {
        let text = r#"
seed = 7

[gen]
kind = "sinusoidal"
objects = 2
frames = 120
sigma = 0.1

[tracker]
t-lost = 10
assoc = "iou"

[filter]
kind = "bayes"
model = "m.bin"
sigma-m = 0.05
"#;
        let cfg = RunConfig::from_str(text, "mem").unwrap();
        assert_eq!(cfg.seed, Some(7));
        let gen = cfg.gen.as_ref().unwrap();
        assert_eq!(gen.kind.as_deref(), Some("sinusoidal"));
        assert_eq!(gen.frames, Some(120));
        assert_eq!(cfg.tracker.as_ref().unwrap().t_lost, Some(10));
        assert_eq!(cfg.filter.as_ref().unwrap().sigma_m, Some(0.05));

        let back = RunConfig::from_str(&toml::to_string(&cfg).unwrap(), "mem").unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_str("[gen]\nbogus = 1\n", "mem").unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn sha256_matches_the_known_empty_and_abc_digests() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_serialization_is_deterministic() {
        let mut m = Manifest::new("train-motion", 7, RunConfig::default());
        m.add_hash("model.bin", sha256_hex(b"abc"));
        let a = m.to_toml();
        let b = m.to_toml();
        assert_eq!(a, b);
        assert!(a.contains("command = \"train-motion\""));
        assert!(a.contains("model.bin"));
    }
}
