//! Central finite-difference gradient checking.
//!
//! Analytic gradients come from the module under test at its own precision;
//! the numeric side evaluates a structurally identical f64 twin of the same
//! module at the same parameter values, so the check stays meaningful even
//! for single-precision layers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::act::{leaky_relu, leaky_relu_backward, LEAKY_SLOPE};
use super::concat::{concat_channels, concat_channels_backward};
use super::conv::Conv2d;
use super::convt::ConvTranspose1d;
use super::scalar::Scalar;
use super::tensor::Tensor4;
use crate::error::Result;

/// Outcome of one gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub name: String,
    pub max_rel_err: f64,
    pub n_checked: usize,
    pub tolerance: f64,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn summary(&self) -> String {
        format!(
            "{:<40} max rel err {:>12.3e}  ({} coords, tol {:.0e}) {}",
            self.name,
            self.max_rel_err,
            self.n_checked,
            self.tolerance,
            if self.passed { "ok" } else { "FAIL" }
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CheckConfig {
    pub tolerance: f64,
    /// Base step; per-coordinate step is `eps * max(1, |theta|)`.
    pub eps: f64,
    /// Coordinates sampled per tensor.
    pub max_coords: usize,
    pub seed: u64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            tolerance: 1e-3,
            eps: 1e-5,
            max_coords: 16,
            seed: 0x5eed,
        }
    }
}

/// A module wired for checking: a scalar projected loss plus the analytic
/// gradients of that loss.
pub trait DiffTarget<T: Scalar> {
    /// Forward pass, returning the projected scalar loss.
    fn loss(&mut self, input: &Tensor4<T>) -> Result<f64>;
    /// Forward + backward; leaves parameter gradients inside and returns the
    /// input gradient.
    fn grads(&mut self, input: &Tensor4<T>) -> Result<Tensor4<T>>;
    fn visit_params(&mut self, _f: &mut dyn FnMut(&str, &[usize], &mut [T], &mut [T])) {}
}

/// Deterministic +-1 projection so the scalar loss exercises sign structure.
pub fn projected_loss<T: Scalar>(y: &Tensor4<T>, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    y.data
        .iter()
        .map(|v| if rng.gen::<bool>() { v.to_f64() } else { -v.to_f64() })
        .sum()
}

/// Upstream gradient matching [`projected_loss`].
pub fn projection_grad<T: Scalar>(shape: (usize, usize, usize, usize), seed: u64) -> Tensor4<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tensor4::zeros(shape.0, shape.1, shape.2, shape.3);
    for v in &mut t.data {
        *v = if rng.gen::<bool>() { T::ONE } else { -T::ONE };
    }
    t
}

/// Relative error with an absolute floor of 1% of the tensor's gradient
/// scale, so coordinates that are zero by cancellation are judged against
/// the tensor's magnitude rather than their own rounding noise.
pub(crate) fn rel_err(analytic: f64, numeric: f64, scale: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()) + 1e-2 * scale + 1e-12;
    (analytic - numeric).abs() / denom
}

struct ParamSnapshot {
    name: String,
    grads: Vec<f64>,
}

/// Runs the check: analytic gradients from `target`, numeric differences from
/// `twin` (an f64 copy at identical parameter values).
pub fn check_gradients<T, M, N>(
    name: &str,
    target: &mut M,
    twin: &mut N,
    input: &Tensor4<T>,
    cfg: CheckConfig,
) -> Result<GradCheckReport>
where
    T: Scalar,
    M: DiffTarget<T>,
    N: DiffTarget<f64>,
{
    let input64: Tensor4<f64> = input.cast();
    let analytic_input = target.grads(input)?;
    let mut params: Vec<ParamSnapshot> = Vec::new();
    target.visit_params(&mut |pname, _, _, grad| {
        params.push(ParamSnapshot {
            name: pname.to_string(),
            grads: grad.iter().map(|g| g.to_f64()).collect(),
        });
    });

    let mut max_err = 0.0f64;
    let mut n_checked = 0usize;
    let mut pick = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e3779b97f4a7c15);

    // Input coordinates.
    {
        let scale = analytic_input
            .data
            .iter()
            .map(|g| g.to_f64().abs())
            .fold(0.0, f64::max);
        let count = analytic_input.numel().min(cfg.max_coords);
        for _ in 0..count {
            let i = pick.gen_range(0..analytic_input.numel());
            let theta = input64.data[i];
            let eps = cfg.eps * theta.abs().max(1.0);
            let mut probe = input64.clone();
            probe.data[i] = theta + eps;
            let lp = twin.loss(&probe)?;
            probe.data[i] = theta - eps;
            let lm = twin.loss(&probe)?;
            let numeric = (lp - lm) / (2.0 * eps);
            max_err = max_err.max(rel_err(analytic_input.data[i].to_f64(), numeric, scale));
            n_checked += 1;
        }
    }

    // Parameter coordinates, matched by position in the visit order.
    for (p_idx, snap) in params.iter().enumerate() {
        let scale = snap.grads.iter().map(|g| g.abs()).fold(0.0, f64::max);
        let count = snap.grads.len().min(cfg.max_coords);
        for _ in 0..count {
            let i = pick.gen_range(0..snap.grads.len());
            let mut numeric = None;
            // Perturb coordinate i of parameter tensor p_idx inside the twin.
            let mut theta = 0.0;
            let mut visit_idx = 0;
            twin.visit_params(&mut |_, _, data, _| {
                if visit_idx == p_idx {
                    theta = data[i];
                }
                visit_idx += 1;
            });
            let eps = cfg.eps * theta.abs().max(1.0);
            for (sign, slot) in [(1.0, 0), (-1.0, 1)] {
                let mut visit_idx = 0;
                twin.visit_params(&mut |_, _, data, _| {
                    if visit_idx == p_idx {
                        data[i] = theta + sign * eps;
                    }
                    visit_idx += 1;
                });
                let l = twin.loss(&input64)?;
                numeric = match (numeric, slot) {
                    (None, 0) => Some(l),
                    (Some(lp), 1) => Some((lp - l) / (2.0 * eps)),
                    _ => unreachable!(),
                };
            }
            let mut visit_idx = 0;
            twin.visit_params(&mut |_, _, data, _| {
                if visit_idx == p_idx {
                    data[i] = theta;
                }
                visit_idx += 1;
            });
            max_err = max_err.max(rel_err(snap.grads[i], numeric.unwrap(), scale));
            n_checked += 1;
        }
    }

    Ok(GradCheckReport {
        name: name.to_string(),
        max_rel_err: max_err,
        n_checked,
        tolerance: cfg.tolerance,
        passed: max_err < cfg.tolerance,
    })
}

// ---------------------------------------------------------------------------
// Concrete targets for the elementary layers.

/// Conv2d followed by the projection loss.
pub struct ConvTarget<T: Scalar> {
    pub layer: Conv2d<T>,
    pub proj_seed: u64,
    /// Multiplies grad_v after backward; 1.0 for an honest check, anything
    /// else corrupts the analytic gradient (negative control).
    pub corrupt_v: f64,
}

impl<T: Scalar> DiffTarget<T> for ConvTarget<T> {
    fn loss(&mut self, input: &Tensor4<T>) -> Result<f64> {
        let (y, _) = self.layer.forward(input)?;
        Ok(projected_loss(&y, self.proj_seed))
    }

    fn grads(&mut self, input: &Tensor4<T>) -> Result<Tensor4<T>> {
        self.layer.zero_grads();
        let (y, ctx) = self.layer.forward(input)?;
        let dy = projection_grad(y.shape(), self.proj_seed);
        let dx = self.layer.backward(&ctx, &dy)?;
        if self.corrupt_v != 1.0 {
            let c = T::from_f64(self.corrupt_v);
            self.layer.grad_v.iter_mut().for_each(|g| *g *= c);
        }
        Ok(dx)
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &[usize], &mut [T], &mut [T])) {
        self.layer.visit_params("conv", f);
    }
}

/// Leaky ReLU followed by the projection loss.
pub struct LeakyTarget {
    pub proj_seed: u64,
}

impl<T: Scalar> DiffTarget<T> for LeakyTarget {
    fn loss(&mut self, input: &Tensor4<T>) -> Result<f64> {
        Ok(projected_loss(&leaky_relu(input, LEAKY_SLOPE)?, self.proj_seed))
    }

    fn grads(&mut self, input: &Tensor4<T>) -> Result<Tensor4<T>> {
        let y = leaky_relu(input, LEAKY_SLOPE)?;
        let dy = projection_grad(y.shape(), self.proj_seed);
        Ok(leaky_relu_backward(input, &dy, LEAKY_SLOPE))
    }
}

/// Channel concatenation with a fixed second operand.
pub struct ConcatTarget<T: Scalar> {
    pub other: Tensor4<T>,
    pub proj_seed: u64,
}

impl<T: Scalar> DiffTarget<T> for ConcatTarget<T> {
    fn loss(&mut self, input: &Tensor4<T>) -> Result<f64> {
        let y = concat_channels(&[input, &self.other])?;
        Ok(projected_loss(&y, self.proj_seed))
    }

    fn grads(&mut self, input: &Tensor4<T>) -> Result<Tensor4<T>> {
        let y = concat_channels(&[input, &self.other])?;
        let dy = projection_grad(y.shape(), self.proj_seed);
        let mut parts = concat_channels_backward(&dy, &[input.c, self.other.c]);
        Ok(parts.swap_remove(0))
    }
}

/// Transposed conv1d followed by the projection loss.
pub struct ConvTransposeTarget<T: Scalar> {
    pub layer: ConvTranspose1d<T>,
    pub proj_seed: u64,
}

impl<T: Scalar> DiffTarget<T> for ConvTransposeTarget<T> {
    fn loss(&mut self, input: &Tensor4<T>) -> Result<f64> {
        let (y, _) = self.layer.forward(input)?;
        Ok(projected_loss(&y, self.proj_seed))
    }

    fn grads(&mut self, input: &Tensor4<T>) -> Result<Tensor4<T>> {
        self.layer.zero_grads();
        let (y, ctx) = self.layer.forward(input)?;
        let dy = projection_grad(y.shape(), self.proj_seed);
        self.layer.backward(&ctx, &dy)
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &[usize], &mut [T], &mut [T])) {
        self.layer.visit_params("convt", f);
    }
}

fn random_input(rng: &mut ChaCha8Rng, shape: (usize, usize, usize, usize)) -> Tensor4<f32> {
    let mut t = Tensor4::zeros(shape.0, shape.1, shape.2, shape.3);
    for v in &mut t.data {
        *v = rng.gen_range(-1.0..1.0);
    }
    t
}

/// Conv2d gradient checks over assorted shapes, including degenerate H/W.
pub fn conv2d_suite(cfg: CheckConfig) -> Result<Vec<GradCheckReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // (input shape, out_ch, kernel, stride, dilation, padding)
    let cases: [((usize, usize, usize, usize), usize, (usize, usize), (usize, usize), (usize, usize), (usize, usize)); 6] = [
        ((2, 3, 6, 8), 4, (3, 3), (1, 1), (1, 1), (1, 1)),
        ((1, 2, 1, 9), 3, (1, 4), (1, 1), (1, 2), (0, 3)),
        ((1, 2, 5, 1), 2, (3, 1), (2, 1), (1, 1), (1, 0)),
        ((2, 4, 7, 6), 4, (3, 5), (2, 1), (1, 2), (1, 4)),
        ((1, 1, 3, 3), 1, (3, 3), (1, 1), (1, 1), (1, 1)),
        ((2, 2, 8, 10), 3, (3, 8), (2, 1), (1, 4), (1, 14)),
    ];
    let mut reports = Vec::new();
    for (i, (shape, out_ch, kernel, stride, dilation, padding)) in cases.into_iter().enumerate() {
        let layer = Conv2d::<f32>::new(shape.1, out_ch, kernel, stride, dilation, padding, &mut rng);
        let mut target = ConvTarget { layer: layer.clone(), proj_seed: cfg.seed + i as u64, corrupt_v: 1.0 };
        let mut twin = ConvTarget { layer: layer.cast::<f64>(), proj_seed: cfg.seed + i as u64, corrupt_v: 1.0 };
        let input = random_input(&mut rng, shape);
        reports.push(check_gradients(
            &format!("conv2d[{i}] {shape:?} k{kernel:?} s{stride:?} d{dilation:?}"),
            &mut target,
            &mut twin,
            &input,
            cfg,
        )?);
    }
    Ok(reports)
}

pub fn leaky_relu_suite(cfg: CheckConfig) -> Result<Vec<GradCheckReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed + 101);
    let shapes = [(1, 1, 1, 7), (2, 3, 4, 5), (1, 2, 6, 1), (3, 1, 1, 1), (2, 2, 5, 5)];
    let mut reports = Vec::new();
    for (i, shape) in shapes.into_iter().enumerate() {
        let mut target = LeakyTarget { proj_seed: cfg.seed + 200 + i as u64 };
        let mut twin = LeakyTarget { proj_seed: cfg.seed + 200 + i as u64 };
        let input = random_input(&mut rng, shape);
        reports.push(check_gradients(
            &format!("leaky_relu[{i}] {shape:?}"),
            &mut target,
            &mut twin,
            &input,
            cfg,
        )?);
    }
    Ok(reports)
}

pub fn concat_suite(cfg: CheckConfig) -> Result<Vec<GradCheckReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed + 303);
    let mut reports = Vec::new();
    for (i, (c_a, c_b)) in [(1usize, 1usize), (2, 3), (4, 1), (1, 6), (3, 3)].into_iter().enumerate() {
        let input = random_input(&mut rng, (2, c_a, 3, 4));
        let other = random_input(&mut rng, (2, c_b, 3, 4));
        let mut target = ConcatTarget { other: other.clone(), proj_seed: cfg.seed + 400 + i as u64 };
        let mut twin = ConcatTarget { other: other.cast::<f64>(), proj_seed: cfg.seed + 400 + i as u64 };
        reports.push(check_gradients(
            &format!("concat_channels[{i}] {c_a}+{c_b}"),
            &mut target,
            &mut twin,
            &input,
            cfg,
        )?);
    }
    Ok(reports)
}

pub fn conv_transpose_suite(cfg: CheckConfig) -> Result<Vec<GradCheckReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed + 505);
    let cases = [
        ((1usize, 2usize, 1usize, 6usize), 3usize, 8usize, 4usize, 2usize),
        ((2, 3, 1, 5), 2, 4, 2, 1),
        ((1, 1, 1, 1), 1, 8, 4, 2),
        ((2, 4, 1, 9), 3, 6, 2, 2),
        ((1, 2, 1, 12), 2, 7, 3, 2),
    ];
    let mut reports = Vec::new();
    for (i, (shape, out_ch, kernel, stride, padding)) in cases.into_iter().enumerate() {
        let layer = ConvTranspose1d::<f32>::new(shape.1, out_ch, kernel, stride, padding, &mut rng);
        let mut target = ConvTransposeTarget { layer: layer.clone(), proj_seed: cfg.seed + 600 + i as u64 };
        let mut twin = ConvTransposeTarget { layer: layer.cast::<f64>(), proj_seed: cfg.seed + 600 + i as u64 };
        let input = random_input(&mut rng, shape);
        reports.push(check_gradients(
            &format!("conv_transpose1d[{i}] {shape:?} k{kernel} s{stride}"),
            &mut target,
            &mut twin,
            &input,
            cfg,
        )?);
    }
    Ok(reports)
}

/// Negative control: a deliberately corrupted backward pass must fail.
pub fn negative_control(cfg: CheckConfig) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed + 707);
    let layer = Conv2d::<f32>::new(2, 3, (3, 3), (1, 1), (1, 1), (1, 1), &mut rng);
    let mut target = ConvTarget { layer: layer.clone(), proj_seed: cfg.seed, corrupt_v: 1.05 };
    let mut twin = ConvTarget { layer: layer.cast::<f64>(), proj_seed: cfg.seed, corrupt_v: 1.0 };
    let input = random_input(&mut rng, (2, 2, 5, 6));
    check_gradients("conv2d corrupted backward (must fail)", &mut target, &mut twin, &input, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elementary_layers_pass_at_single_precision() {
        let cfg = CheckConfig::default();
        for report in conv2d_suite(cfg)
            .unwrap()
            .into_iter()
            .chain(leaky_relu_suite(cfg).unwrap())
            .chain(concat_suite(cfg).unwrap())
            .chain(conv_transpose_suite(cfg).unwrap())
        {
            assert!(report.passed, "{}", report.summary());
        }
    }

    #[test]
    fn double_precision_conv_reaches_tighter_tolerance() {
        let cfg = CheckConfig { tolerance: 1e-6, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let layer = Conv2d::<f64>::new(2, 3, (3, 3), (1, 1), (1, 1), (1, 1), &mut rng);
        let mut target = ConvTarget { layer: layer.clone(), proj_seed: 9, corrupt_v: 1.0 };
        let mut twin = ConvTarget { layer, proj_seed: 9, corrupt_v: 1.0 };
        let input64: Tensor4<f64> = {
            let mut t = Tensor4::<f64>::zeros(2, 2, 5, 6);
            for v in &mut t.data {
                *v = rng.gen_range(-1.0..1.0);
            }
            t
        };
        let report = check_gradients("conv2d f64", &mut target, &mut twin, &input64, cfg).unwrap();
        assert!(report.passed, "{}", report.summary());
    }

    #[test]
    fn corrupted_backward_is_caught() {
        let report = negative_control(CheckConfig::default()).unwrap();
        assert!(!report.passed, "negative control unexpectedly passed: {}", report.summary());
    }
}
