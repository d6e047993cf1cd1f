//! Desk-scale CNN training engine with temperature-softened teacher/student
//! distillation, plus a spatial-domain residual feature pipeline for
//! steganalysis experiments.
//!
//! Everything runs on `f64` and on the CPU. The crate is organised as:
//!
//! - [`tensor`]: dense tensors, convolution / pooling / dense / ReLU layers with
//!   hand-written backward passes, the momentum optimizer, softmax and
//!   cross-entropy, and checkpoint files.
//! - [`distill`]: soft targets, the combined distillation objective, the
//!   minibatch training loop and the temperature sweep harness.
//! - [`residual`]: the ±1 embedding simulator, residual filters, quantization,
//!   co-occurrence features, learnable directional filters and a logistic
//!   detector.
//! - [`metrics`]: confusion matrices, evaluation reports and report deltas.
//! - [`data`]: grayscale image I/O, resizing, manifests, stratified splits and
//!   the synthetic two-class image generator.

pub mod data;
pub mod distill;
pub mod error;
pub mod metrics;
pub mod residual;
pub mod tensor;

pub use error::{Error, Result};
