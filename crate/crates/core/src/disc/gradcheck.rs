//! Gradient checks for the discriminator stacks, including the end-to-end
//! waveform-to-score path through the CQT.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::msd::CqtDiscriminator;
use super::sbp::SbpModule;
use super::subdisc::{shared_front, DiscGrads, Front, SpecBatch, SubDiscriminator};
use crate::error::Result;
use crate::nn::{
    check_gradients, projected_loss, projection_grad, CheckConfig, DiffTarget, GradCheckReport,
    Scalar, Tensor4,
};

/// Sub-band module (split + per-octave convs + activation + concat).
struct SbpTarget<T: Scalar> {
    module: SbpModule<T>,
    proj_seed: u64,
}

impl<T: Scalar> DiffTarget<T> for SbpTarget<T> {
    fn loss(&mut self, input: &Tensor4<T>) -> Result<f64> {
        let (y, _) = self.module.forward(input)?;
        Ok(projected_loss(&y, self.proj_seed))
    }

    fn grads(&mut self, input: &Tensor4<T>) -> Result<Tensor4<T>> {
        self.module.zero_grads();
        let (y, ctx) = self.module.forward(input)?;
        let dy = projection_grad(y.shape(), self.proj_seed);
        self.module.backward(&ctx, &dy)
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &[usize], &mut [T], &mut [T])) {
        self.module.visit_params("sbp", f);
    }
}

/// Whole sub-discriminator; the input tensor packs real/imag as two channels
/// and the loss projects the score and every feature map, exercising the
/// feature-matching gradient path.
struct SubDiscTarget<T: Scalar> {
    disc: SubDiscriminator<T>,
    proj_seed: u64,
}

impl<T: Scalar> SubDiscTarget<T> {
    fn unpack(input: &Tensor4<T>) -> SpecBatch<T> {
        let mut real = Tensor4::zeros(input.n, 1, input.h, input.w);
        let mut imag = Tensor4::zeros(input.n, 1, input.h, input.w);
        for n in 0..input.n {
            for h in 0..input.h {
                for w in 0..input.w {
                    real.set(n, 0, h, w, input.get(n, 0, h, w));
                    imag.set(n, 0, h, w, input.get(n, 1, h, w));
                }
            }
        }
        SpecBatch { real, imag }
    }

    fn pack_grads(dreal: &Tensor4<T>, dimag: &Tensor4<T>) -> Tensor4<T> {
        let mut out = Tensor4::zeros(dreal.n, 2, dreal.h, dreal.w);
        for n in 0..dreal.n {
            for h in 0..dreal.h {
                for w in 0..dreal.w {
                    out.set(n, 0, h, w, dreal.get(n, 0, h, w));
                    out.set(n, 1, h, w, dimag.get(n, 0, h, w));
                }
            }
        }
        out
    }
}

impl<T: Scalar> DiffTarget<T> for SubDiscTarget<T> {
    fn loss(&mut self, input: &Tensor4<T>) -> Result<f64> {
        let spec = Self::unpack(input);
        let (out, _) = self.disc.forward(&spec)?;
        let mut loss = projected_loss(&out.score, self.proj_seed);
        for (i, feat) in out.features.iter().enumerate() {
            loss += projected_loss(feat, self.proj_seed + 1 + i as u64);
        }
        Ok(loss)
    }

    fn grads(&mut self, input: &Tensor4<T>) -> Result<Tensor4<T>> {
        let spec = Self::unpack(input);
        self.disc.zero_grads();
        let (out, ctx) = self.disc.forward(&spec)?;
        let grads = DiscGrads {
            dscore: projection_grad(out.score.shape(), self.proj_seed),
            dfeatures: out
                .features
                .iter()
                .enumerate()
                .map(|(i, f)| Some(projection_grad(f.shape(), self.proj_seed + 1 + i as u64)))
                .collect(),
        };
        let (dreal, dimag) = self.disc.backward(&ctx, &grads)?;
        Ok(Self::pack_grads(&dreal, &dimag))
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &[usize], &mut [T], &mut [T])) {
        self.disc.visit_params("sub", f);
    }
}

fn random_input(rng: &mut ChaCha8Rng, shape: (usize, usize, usize, usize)) -> Tensor4<f32> {
    let mut t = Tensor4::zeros(shape.0, shape.1, shape.2, shape.3);
    for v in &mut t.data {
        *v = rng.gen_range(-1.0..1.0);
    }
    t
}

/// Smallest post-activation magnitude across the given maps, relative to
/// each map's own scale. Gradients are undefined at leaky-ReLU kinks, so
/// check points must keep every unit a safe margin away from zero; the
/// caller re-draws inputs otherwise.
fn activation_margin<T: Scalar>(features: &[Tensor4<T>]) -> f64 {
    features
        .iter()
        .map(|f| {
            let mut lo = f64::INFINITY;
            let mut hi = 0.0f64;
            for v in &f.data {
                let a = v.to_f64().abs();
                lo = lo.min(a);
                hi = hi.max(a);
            }
            if hi > 0.0 {
                lo / hi
            } else {
                f64::INFINITY
            }
        })
        .fold(f64::INFINITY, f64::min)
}

/// Relative clearance every activation unit must keep from its kink: larger
/// than both single-precision forward noise and the finite-difference probe
/// shifts, both of which scale with the tensor's magnitude.
const KINK_MARGIN: f64 = 1e-4;

const MAX_DRAWS: usize = 500;

/// Draws candidates until `margin_of` clears [`KINK_MARGIN`], falling back to
/// the best candidate seen if the bound is hit.
fn draw_clear_of_kinks<I>(
    mut draw: impl FnMut() -> I,
    mut margin_of: impl FnMut(&I) -> Result<f64>,
) -> Result<I> {
    let mut best: Option<(f64, I)> = None;
    for _ in 0..MAX_DRAWS {
        let candidate = draw();
        let margin = margin_of(&candidate)?;
        if margin > KINK_MARGIN {
            return Ok(candidate);
        }
        if best.as_ref().map(|(m, _)| margin > *m).unwrap_or(true) {
            best = Some((margin, candidate));
        }
    }
    Ok(best.unwrap().1)
}

/// Gradient checks for the sub-band module over a few shapes.
pub fn sbp_suite(cfg: CheckConfig) -> Result<Vec<GradCheckReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed + 9001);
    let cases = [(2usize, 4usize, 1usize, 6usize), (3, 4, 2, 5), (1, 6, 1, 1), (4, 2, 1, 8), (2, 8, 2, 3)];
    let mut reports = Vec::new();
    for (i, (n_oct, b, n, t)) in cases.into_iter().enumerate() {
        let module = SbpModule::<f32>::new(n_oct, b, &mut rng);
        let twin_module = module.cast::<f64>();
        let input = draw_clear_of_kinks(
            || random_input(&mut rng, (n, 1, n_oct * b, t)),
            |candidate| {
                let (y, _) = twin_module.forward(&candidate.cast::<f64>())?;
                Ok(activation_margin(&[y]))
            },
        )?;
        let mut target = SbpTarget { module, proj_seed: cfg.seed + 30 + i as u64 };
        let mut twin = SbpTarget { module: twin_module, proj_seed: cfg.seed + 30 + i as u64 };
        reports.push(check_gradients(
            &format!("sbp[{i}] {n_oct} octaves x {b} bins, {n}x{t}"),
            &mut target,
            &mut twin,
            &input,
            cfg,
        )?);
    }
    Ok(reports)
}

/// Gradient checks for complete sub-discriminators with every front variant.
pub fn subdisc_suite(cfg: CheckConfig) -> Result<Vec<GradCheckReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed + 7007);
    let mut reports = Vec::new();

    let fronts: Vec<(&str, Front<f32>)> = vec![
        (
            "sub-band",
            Front::SubBand {
                real: SbpModule::new(2, 4, &mut rng),
                imag: SbpModule::new(2, 4, &mut rng),
            },
        ),
        ("shared-conv", shared_front(&mut rng)),
        ("channels", Front::Channels),
    ];
    for (i, (name, front)) in fronts.into_iter().enumerate() {
        let disc = SubDiscriminator::new(front, &mut rng);
        let twin_disc = disc.cast::<f64>();
        let input = draw_clear_of_kinks(
            || random_input(&mut rng, (1, 2, 8, 6)),
            |candidate| {
                let spec = SubDiscTarget::unpack(&candidate.cast::<f64>());
                let (out, _) = twin_disc.forward(&spec)?;
                // All features but the final score map are post-activation.
                Ok(activation_margin(&out.features[..out.features.len() - 1]))
            },
        )?;
        let mut target = SubDiscTarget { disc, proj_seed: cfg.seed + 50 + i as u64 };
        let mut twin = SubDiscTarget { disc: twin_disc, proj_seed: cfg.seed + 50 + i as u64 };
        reports.push(check_gradients(
            &format!("sub-discriminator ({name})"),
            &mut target,
            &mut twin,
            &input,
            cfg,
        )?);
    }
    Ok(reports)
}

/// End-to-end check of the waveform -> CQT -> sub-band discriminator chain,
/// run in double precision on a tiny three-octave plan.
pub fn cqt_disc_end_to_end(cfg: CheckConfig) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed + 31337);
    let mut disc: CqtDiscriminator<f64> =
        CqtDiscriminator::<f32>::new_sub_band(2000.0, 150.0, 8, &mut rng)?.cast();
    // One scale keeps the unit count small enough that a kink-free check
    // point exists; the multi-scale structure is exercised elsewhere.
    disc.scales.truncate(1);
    let len = 48usize;
    let disc_ref = &disc;
    let signal: Vec<f64> = draw_clear_of_kinks(
        || (0..len).map(|_| rng.gen_range(-0.5..0.5)).collect::<Vec<f64>>(),
        |candidate| {
            let outs = disc_ref.forward_signal(candidate)?;
            Ok(outs
                .iter()
                .map(|o| activation_margin(&o.features[..o.features.len() - 1]))
                .fold(f64::INFINITY, f64::min))
        },
    )?;
    let eps_base = 1e-6f64;
    let proj_seed = cfg.seed + 99;

    let loss_of = |disc: &CqtDiscriminator<f64>, signal: &[f64]| -> Result<f64> {
        let outs = disc.forward_signal(signal)?;
        let mut loss = 0.0;
        for (si, out) in outs.iter().enumerate() {
            loss += projected_loss(&out.score, proj_seed + 1000 * si as u64);
            for (fi, feat) in out.features.iter().enumerate() {
                loss += projected_loss(feat, proj_seed + 1000 * si as u64 + 1 + fi as u64);
            }
        }
        Ok(loss)
    };

    // Analytic gradients.
    disc.zero_grads();
    let refs: [&[f64]; 1] = [&signal];
    let (outs, ctx) = disc.forward_batch(&refs)?;
    let grads: Vec<DiscGrads<f64>> = outs
        .iter()
        .enumerate()
        .map(|(si, out)| DiscGrads {
            dscore: projection_grad(out.score.shape(), proj_seed + 1000 * si as u64),
            dfeatures: out
                .features
                .iter()
                .enumerate()
                .map(|(fi, f)| {
                    Some(projection_grad(
                        f.shape(),
                        proj_seed + 1000 * si as u64 + 1 + fi as u64,
                    ))
                })
                .collect(),
        })
        .collect();
    let analytic_signal = disc.backward(&ctx, &grads, true)?.unwrap().remove(0);
    let mut param_grads: Vec<(String, Vec<f64>)> = Vec::new();
    crate::nn::ParamSet::visit_params(&mut disc, &mut |name: &str, _: &[usize], _: &mut [f64], grad: &mut [f64]| {
        param_grads.push((name.to_string(), grad.to_vec()));
    });

    // Numeric side: central differences on the same f64 model.
    let mut max_err = 0.0f64;
    let mut n_checked = 0usize;
    let mut pick = ChaCha8Rng::seed_from_u64(cfg.seed + 424242);
    let sig_scale = analytic_signal.iter().map(|g| g.abs()).fold(0.0, f64::max);
    for _ in 0..cfg.max_coords {
        let i = pick.gen_range(0..len);
        let eps = eps_base * signal[i].abs().max(1.0);
        let mut probe = signal.clone();
        probe[i] = signal[i] + eps;
        let lp = loss_of(&disc, &probe)?;
        probe[i] = signal[i] - eps;
        let lm = loss_of(&disc, &probe)?;
        let numeric = (lp - lm) / (2.0 * eps);
        max_err = max_err.max(crate::nn::rel_err(analytic_signal[i], numeric, sig_scale));
        n_checked += 1;
    }
    // A few parameters from each scale.
    let n_params = param_grads.len();
    for p_idx in (0..n_params).step_by((n_params / 6).max(1)) {
        let (ref pname, ref pgrads) = param_grads[p_idx];
        let scale = pgrads.iter().map(|g| g.abs()).fold(0.0, f64::max);
        for _ in 0..4 {
            let i = pick.gen_range(0..pgrads.len());
            let mut theta = 0.0;
            let mut idx = 0;
            crate::nn::ParamSet::visit_params(&mut disc, &mut |_: &str, _: &[usize], data: &mut [f64], _: &mut [f64]| {
                if idx == p_idx {
                    theta = data[i];
                }
                idx += 1;
            });
            let eps = eps_base * theta.abs().max(1.0);
            let mut eval_at = |v: f64, disc: &mut CqtDiscriminator<f64>| -> Result<f64> {
                let mut idx = 0;
                crate::nn::ParamSet::visit_params(disc, &mut |_: &str, _: &[usize], data: &mut [f64], _: &mut [f64]| {
                    if idx == p_idx {
                        data[i] = v;
                    }
                    idx += 1;
                });
                loss_of(disc, &signal)
            };
            let lp = eval_at(theta + eps, &mut disc)?;
            let lm = eval_at(theta - eps, &mut disc)?;
            eval_at(theta, &mut disc)?;
            let numeric = (lp - lm) / (2.0 * eps);
            let err = crate::nn::rel_err(pgrads[i], numeric, scale);
            if err > max_err {
                max_err = err;
            }
            let _ = pname;
            n_checked += 1;
        }
    }

    Ok(GradCheckReport {
        name: "cqt discriminator end-to-end (waveform input, f64)".into(),
        max_rel_err: max_err,
        n_checked,
        tolerance: 1e-4,
        passed: max_err < 1e-4,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sbp_and_subdisc_pass_at_single_precision() {
        let cfg = CheckConfig { max_coords: 10, ..Default::default() };
        for r in sbp_suite(cfg).unwrap().into_iter().chain(subdisc_suite(cfg).unwrap()) {
            assert!(r.passed, "{}", r.summary());
        }
    }

    #[test]
    fn waveform_to_score_chain_is_consistent() {
        let cfg = CheckConfig { max_coords: 12, ..Default::default() };
        let r = cqt_disc_end_to_end(cfg).unwrap();
        assert!(r.passed, "{}", r.summary());
    }
}
