//! Numeric reference of the superpoint transformer: forward pass,
//! attention gradients, loss and augmentations.

pub mod attention;
pub mod augment;
pub mod diagnostics;
pub mod loss;
pub mod matrix;
pub mod network;
pub mod norm;
pub mod params;

pub use attention::{attention_backward, attention_forward, AttentionCache, AttentionGrads, AttentionInput, AttentionShape};
pub use augment::{sample_count, sample_superpoint_points, superpoint_dropout, DropoutView};
pub use loss::{hierarchical_loss, LossReport};
pub use matrix::DenseMatrix;
pub use network::{
    decode_level, encode_level, forward_full, init_params, relative_positions, ForwardOutput, KernelConfig,
    KernelInput, ModelShape,
};
pub use norm::graph_norm;
pub use params::{load_params, save_params, ParamBundle};
