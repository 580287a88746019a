//! Decision rules: k-nearest neighbors (including the one-exemplar-per-class
//! rule), soft-margin SVMs, and the fully connected network with its
//! domain-adversarial variant.

pub mod checkpoint;
pub mod knn;
pub mod mlp;
pub mod svm;

pub use knn::{knn_predict, one_known_rule, KnnModel};
pub use mlp::{
    da_mlp_train, mlp_predict, mlp_train, softmax_rows, DaConfig, DaMlpModel, MlpConfig, MlpModel,
    TrainReport,
};
pub use svm::{svm_predict, svm_train, SvmClassifier, SvmKind, SvmModel, SvmParams};
