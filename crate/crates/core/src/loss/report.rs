//! Loss composition and the per-step training report.

/// Weight of the feature-matching term in the generator loss.
pub const FM_WEIGHT: f64 = 2.0;

/// Weight of the mel-reconstruction term in the generator loss.
pub const MEL_WEIGHT: f64 = 45.0;

/// Loss terms contributed by one discriminator.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscTerms {
    pub label: String,
    pub adv_g: f64,
    pub adv_d: f64,
    pub fm: f64,
}

/// Decomposed losses for one training step:
/// `total_g = sum_m (adv_g_m + 2 fm_m) + 45 mel`, `total_d = sum_m adv_d_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub step: usize,
    pub per_disc: Vec<DiscTerms>,
    pub adv_g: f64,
    pub adv_d: f64,
    pub fm: f64,
    pub mel: f64,
    pub total_g: f64,
    pub total_d: f64,
}

/// Composes the weighted totals. Adding a discriminator adds exactly its
/// `adv_g + 2 fm` to the generator total and its `adv_d` to the
/// discriminator total.
pub fn compose_losses(per_disc: Vec<DiscTerms>, mel: f64, step: usize) -> LossReport {
    let mut adv_g = 0.0;
    let mut adv_d = 0.0;
    let mut fm = 0.0;
    let mut total_g = 0.0;
    for d in &per_disc {
        adv_g += d.adv_g;
        adv_d += d.adv_d;
        fm += d.fm;
        total_g += d.adv_g + FM_WEIGHT * d.fm;
    }
    total_g += MEL_WEIGHT * mel;
    LossReport {
        step,
        per_disc,
        adv_g,
        adv_d,
        fm,
        mel,
        total_g,
        total_d: adv_d,
    }
}

impl LossReport {
    pub const CSV_HEADER: &'static str = "step,adv_g,adv_d,fm,mel,total_g,total_d";

    /// One CSV row; f64 values use shortest round-trip formatting so logs
    /// compare bitwise across runs.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.step, self.adv_g, self.adv_d, self.fm, self.mel, self.total_g, self.total_d
        )
    }
}
