//! Transfer-learning toolkit and benchmark harness.
//!
//! The crate compares three families of transfer approaches on a common
//! footing:
//!
//! * subspace transfer: diffusion-map embeddings ([`diffusion`]) and the
//!   transfer diffusion map ([`transfer`]), which learns an orthonormal
//!   projection trading graph smoothness against a closed-form quadratic
//!   KDE divergence between projected source and target samples;
//! * margin classifiers: linear and RBF soft-margin SVMs solved with SMO
//!   ([`classify::svm`]);
//! * neural classifiers: a linear-ReLU-linear network and its
//!   domain-adversarial variant trained with gradient reversal
//!   ([`classify::mlp`]).
//!
//! The [`harness`] module runs the three transfer protocols
//! (high-quality to degraded, cross-class, cross-domain) from a JSON
//! config and aggregates per-iteration accuracies.
//!
//! Start with the runnable programs in `examples/`; each covers one
//! capability end to end.

pub mod classify;
pub mod dataset;
pub mod diffusion;
pub mod error;
pub mod harness;
pub mod imageprep;
pub mod kernels;
pub mod linalg;
pub mod rng;
pub mod transfer;

pub use error::{Error, Result};
