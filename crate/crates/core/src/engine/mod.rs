//! Efficient octave-stacked CQT: 2x pre-upsampling, recursive downsampling,
//! and the three-scale transform set used by the discriminators.

mod fast;
mod plan;
mod resample;

pub use fast::{
    cqt_fast, cqt_fast_adjoint, cqt_fast_with, multi_scale_cqt, multi_scale_cqt_with, Alignment,
    MultiScaleCqt, MULTI_SCALE_BINS_PER_OCTAVE, MULTI_SCALE_HOP,
};
pub use plan::{build_octave_plan, OctavePlan, DEFAULT_F1};
pub use resample::{downsample_2x, resample_2x_up, resample_2x_up_adjoint};
