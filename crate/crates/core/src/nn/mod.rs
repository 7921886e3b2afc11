//! Minimal reverse-mode differentiable tensor core.
//!
//! Layers are generic over [`Scalar`] so the same code runs in f32 for
//! training and in f64 as the oracle side of finite-difference checks.

mod act;
mod adam;
mod checkpoint;
mod concat;
mod conv;
mod convt;
mod gradcheck;
mod params;
mod scalar;
mod tensor;

pub use act::{leaky_relu, leaky_relu_backward, tanh, tanh_backward, LEAKY_SLOPE};
pub use adam::Adam;
pub use checkpoint::{
    collect_entries, load_params, read_checkpoint, save_params, write_checkpoint, CheckpointEntry,
};
pub use concat::{concat_channels, concat_channels_backward, concat_freq, concat_freq_backward};
pub use conv::{Conv2d, Conv2dCtx};
pub use convt::{ConvTranspose1d, ConvTranspose1dCtx};
pub use gradcheck::{
    check_gradients, concat_suite, conv2d_suite, conv_transpose_suite, leaky_relu_suite,
    negative_control, projected_loss, projection_grad, CheckConfig, ConvTarget, DiffTarget,
    GradCheckReport,
};
pub use params::ParamSet;
pub use scalar::Scalar;
pub use tensor::Tensor4;

pub(crate) use gradcheck::rel_err;
