//! AdamW over a flat parameter vector.

use crate::scalar::Scalar;

/// Decoupled-weight-decay Adam. Decay is applied only where the mask is
/// set (weights, not biases), multiplicatively before the moment update,
/// so regularization is independent of the gradient scale.
pub struct AdamW<T> {
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
    beta1: T,
    beta2: T,
    eps: T,
    weight_decay: T,
}

impl<T: Scalar> AdamW<T> {
    pub fn new(n_params: usize, weight_decay: f64) -> Self {
        AdamW {
            m: vec![T::zero(); n_params],
            v: vec![T::zero(); n_params],
            t: 0,
            beta1: T::cast(0.9),
            beta2: T::cast(0.999),
            eps: T::cast(1e-8),
            weight_decay: T::cast(weight_decay),
        }
    }

    pub fn step(&mut self, params: &mut [T], grads: &[T], lr: T, decay: &[bool]) {
        debug_assert_eq!(params.len(), self.m.len());
        debug_assert_eq!(grads.len(), self.m.len());
        debug_assert_eq!(decay.len(), self.m.len());
        self.t += 1;
        let one = T::one();
        let bc1 = one - self.beta1.powi(self.t);
        let bc2 = one - self.beta2.powi(self.t);
        for i in 0..params.len() {
            if decay[i] {
                params[i] = params[i] * (one - lr * self.weight_decay);
            }
            self.m[i] = self.beta1 * self.m[i] + (one - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (one - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] = params[i] - lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}
