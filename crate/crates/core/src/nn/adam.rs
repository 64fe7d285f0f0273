use crate::error::{Error, Result};
use crate::nn::weights::WeightSet;

/// Adam optimizer state: first/second moment estimates and the step count.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(param_count: usize) -> AdamState {
        AdamState {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    /// One bias-corrected Adam update in place.
    pub fn apply(&mut self, weights: &mut WeightSet, grads: &[f64], lr: f64) -> Result<()> {
        if grads.len() != weights.len() || grads.len() != self.m.len() {
            return Err(Error::shape(format!(
                "adam: {} grads vs {} weights vs {} moments",
                grads.len(),
                weights.len(),
                self.m.len()
            )));
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let w = weights.as_mut_slice();
        for i in 0..grads.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            w[i] = (w[i] as f64 - lr * m_hat / (v_hat.sqrt() + self.epsilon)) as f32;
        }
        Ok(())
    }
}
