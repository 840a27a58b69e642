//! File formats and data plumbing: MOT rows, trajectory datasets, binary
//! model files, synthetic scene generation, run configs and manifests.

pub mod config;
pub mod dataset;
pub mod model;
pub mod mot;
pub mod synth;

pub use config::{sha256_file, sha256_hex, Manifest, RunConfig};
pub use dataset::{read_trajectories, write_trajectories};
pub use model::{load_model, save_model, ModelFile};
pub use mot::{read_mot, write_mot, MotRow};
pub use synth::{generate, Scene, SceneKind, SyntheticSpec};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("bad model file: {0}")]
    Model(String),
    #[error("bad config: {0}")]
    Config(String),
}
