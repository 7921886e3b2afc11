//! Sub-band processing and the multi-scale CQT / STFT discriminators.

mod gradcheck;
mod msd;
mod sbp;
mod subband;
mod subdisc;

pub use gradcheck::{cqt_disc_end_to_end, sbp_suite, subdisc_suite};
pub use msd::{CqtDiscCtx, CqtDiscriminator, CqtScale, StftDiscCtx, StftDiscriminator, StftScale, STFT_SCALES};
pub use sbp::{SbpCtx, SbpModule, SBP_CHANNELS, SBP_KERNEL};
pub use subband::{octave_of_bin, split_octaves, OctaveBand, SubBandSet};
pub use subdisc::{
    shared_front, DiscGrads, DiscriminatorOutput, Front, SpecBatch, SubDiscCtx, SubDiscriminator,
    TRUNK_CHANNELS, TRUNK_DILATIONS,
};
