//! Named-parameter traversal shared by the optimizer, checkpoints, and the
//! gradient checker.

use super::scalar::Scalar;

/// Anything owning named parameter tensors with paired gradients.
pub trait ParamSet<T: Scalar> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &[usize], &mut [T], &mut [T]));

    fn param_count(&mut self) -> usize {
        let mut count = 0;
        self.visit_params(&mut |_, _, data, _| count += data.len());
        count
    }

    fn zero_grads(&mut self) {
        self.visit_params(&mut |_, _, _, grad| grad.iter_mut().for_each(|g| *g = T::ZERO));
    }
}
