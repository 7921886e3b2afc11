//! Adversarial, feature-matching, and mel-reconstruction losses and their
//! weighted composition.

mod gan;
mod melrec;
mod report;

pub use gan::{
    adv_loss_d, adv_loss_d_grads, adv_loss_g, adv_loss_g_grad, feature_matching_grads,
    feature_matching_loss,
};
pub use melrec::{mel_l1, mel_l1_with_grad};
pub use report::{compose_losses, DiscTerms, LossReport, FM_WEIGHT, MEL_WEIGHT};
