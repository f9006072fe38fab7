//! Document-level sentiment classification with incrementally updated
//! user/product memory.
//!
//! The crate provides, bottom to top:
//!
//! - [`tensor`]: a dense f64 tensor engine with reverse-mode autodiff;
//! - [`optim`]: named parameters and AdamW with decoupled weight decay;
//! - [`gradcheck`]: finite-difference gradient verification;
//! - [`text`]: tokenization, vocabulary, dataset import/export, attribute
//!   statistics and the low-resource filter;
//! - [`encoder`]: a small trainable transformer producing per-token and
//!   pooled document representations;
//! - [`head`]: attribute memory, stacked attention injection, gated fusion,
//!   classification, and the incremental memory update;
//! - [`model`]: variant assembly (vanilla / no-update / full);
//! - [`train`]: training loop, metrics, variant comparison and the
//!   low-resource analysis;
//! - [`checkpoint`]: binary checkpoint format and run manifests;
//! - [`synth`]: synthetic datasets used by the verification suites.

pub mod checkpoint;
pub mod encoder;
pub mod gradcheck;
pub mod head;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod synth;
pub mod tensor;
pub mod text;
pub mod train;

pub use gradcheck::grad_check;
pub use optim::{AdamWState, NamedParams, OptimError, ParamSnapshot};
pub use tensor::{concat_cols, concat_rows, Tensor, TensorError};
