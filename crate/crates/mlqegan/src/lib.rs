//! Mixed-supervision multilevel GAN framework for image quality enhancement.
//!
//! A chain of per-level super-resolution GANs (MLQEGAN) is trained on paired
//! data at multiple quality levels simultaneously: plentiful medium-quality
//! pairs inform the early levels of the chain while scarce high-quality pairs
//! drive the top. The crate bundles everything needed to run the experiments
//! at desk scale on procedurally generated data:
//!
//! - [`config`] / [`image`] — run configuration, resolution-chain arithmetic
//!   and the unit-range image container shared by all other modules.
//! - [`degrade`] — dataset fabrication: anti-aliased downsampling, smoke
//!   simulation, patch extraction, procedural textures and the expansion of
//!   raw pairs into the per-level effective training set.
//! - [`nn`] / [`models`] — a small CPU tensor backend with hand-written
//!   backprop, and the per-level generator/discriminator architectures.
//! - [`losses`] — per-level fidelity and adversarial losses and their
//!   weighted totals.
//! - [`optim`] / [`trainer`] — Adam with cosine annealing, the two-phase
//!   training scheme (sequential per-level initialization, then joint
//!   optimization) and checkpointing.
//! - [`metrics`] — RRMSE, multiscale SSIM and QILV with manifest evaluation.
//! - [`dataset`] / [`harness`] — manifest I/O, dataset synthesis, the
//!   data-scarcity sweep comparing the multilevel model against the
//!   single-level baseline, and CSV/SVG reporting.

pub mod config;
pub mod dataset;
pub mod degrade;
pub mod error;
pub mod harness;
pub mod image;
pub mod losses;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod optim;
pub mod rng;
pub mod trainer;

pub use config::{validate_config, RunConfig};
pub use error::{Error, Result};
pub use image::ImageTensor;
