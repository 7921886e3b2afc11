use std::f64::consts::PI;

/// Hann window evaluated on the unit interval: `w(t) = 0.5 - 0.5 cos(2 pi t)`.
///
/// Kernel construction samples this at `t = n / N_k`, which is the periodic
/// Hann convention (the window returns to zero at `t = 1`).
pub fn hann(t: f64) -> f64 {
    0.5 - 0.5 * (2.0 * PI * t).cos()
}

#[cfg(test)]
mod tests {
    use super::hann;

    #[test]
    fn hann_endpoints_and_peak() {
        assert_eq!(hann(0.0), 0.0);
        assert!((hann(0.5) - 1.0).abs() < 1e-15);
        assert!(hann(1.0).abs() < 1e-15);
    }

    #[test]
    fn hann_symmetry() {
        for i in 0..50 {
            let t = i as f64 / 100.0;
            assert!((hann(t) - hann(1.0 - t)).abs() < 1e-12);
        }
    }
}
