//! MoveSORT: tracking-by-detection with learnable probabilistic motion filters.
//!
//! The crate follows the classic SORT pipeline (predict, associate, update,
//! manage track lifecycle) but replaces the Kalman filter with a family of
//! interchangeable probabilistic filters:
//!
//! * [`kalman`] — a Bot-Sort-style constant-velocity Kalman baseline,
//! * Bayes-family deep filters — a learned motion model ([`motion`]) combined
//!   with a Gaussian measurement heuristic through exact Bayes fusion,
//! * end-to-end filters — recurrent (GRU) or neural-ODE latent filters trained
//!   on a denoising objective ([`filters`]).
//!
//! Supporting modules: [`geom`] (boxes, IoU), [`gaussian`] (diagonal/full
//! Gaussian states and fusion), [`features`] (measurement buffers and feature
//! codecs), [`nn`] (a small self-contained neural network core with explicit
//! reverse-mode gradients), [`assoc`] (gated Hungarian association),
//! [`tracker`] (track lifecycle), [`metrics`] (filter accuracy and CLEAR/ID
//! MOT metrics) and [`io`] (MOT files, synthetic scenes, model files, run
//! configs and manifests).
//!
//! Runnable demonstrations of every major capability live in `examples/`; the
//! `movesort` binary exposes the same functionality as subcommands.

pub mod assoc;
pub mod cli;
pub mod eval;
pub mod features;
pub mod filters;
pub mod gaussian;
pub mod geom;
pub mod io;
pub mod kalman;
pub mod metrics;
pub mod motion;
pub mod nn;
pub mod tracker;

pub use geom::Box;
pub use gaussian::GaussianState;
