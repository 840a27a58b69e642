//! A small, self-contained neural-network core.
//!
//! Everything the learned filters need lives here: a named [`ParamStore`],
//! dense / layer-norm / leaky-ReLU / gated-recurrent layers with hand-written
//! backward passes, fixed-step RK4 integration with gradients through the
//! unrolled solver, and an AdamW optimizer with step decay. All math is `f64`
//! and single-threaded; training runs seeded by a `ChaCha8Rng` are exactly
//! reproducible.

pub mod gradcheck;
mod layers;
mod ode;
mod optim;
mod params;

pub use layers::{
    leaky_relu, leaky_relu_backward, Dense, GruCache, GruCell, LayerNorm, LayerNormCache, Mlp,
    MlpCache, LAYER_NORM_EPS, LEAKY_RELU_SLOPE,
};
pub use ode::{rk4_backward, rk4_forward, rk4_integrate, OdeField, Rk4Tape, RK4_STEP};
pub use optim::{AdamW, AdamWConfig};
pub use params::{Grads, ParamId, ParamStore, Tensor};

/// The layer vocabulary a serialized model is composed of.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Dense,
    LayerNorm,
    LeakyRelu,
    GatedRecurrentCell,
}

impl LayerKind {
    pub fn tag(&self) -> u8 {
        match self {
            LayerKind::Dense => 0,
            LayerKind::LayerNorm => 1,
            LayerKind::LeakyRelu => 2,
            LayerKind::GatedRecurrentCell => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(LayerKind::Dense),
            1 => Some(LayerKind::LayerNorm),
            2 => Some(LayerKind::LeakyRelu),
            3 => Some(LayerKind::GatedRecurrentCell),
            _ => None,
        }
    }
}

/// One entry of a model's layer listing: kind plus its shape
/// (`[in, out]` for dense and recurrent layers, `[dim]` otherwise).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub dims: Vec<usize>,
}

impl LayerSpec {
    pub fn new(kind: LayerKind, dims: Vec<usize>) -> Self {
        Self { kind, dims }
    }
}
