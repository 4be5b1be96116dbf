use ndarray::{Array2, Zip};

use crate::model::Parameterized;

/// Adam with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    moments: Vec<(Array2<f32>, Array2<f32>)>,
}

impl Adam {
    pub fn new(learning_rate: f64, weight_decay: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            moments: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update from the accumulated gradients.
    pub fn step<M: Parameterized<f32>>(&mut self, model: &mut M) {
        if self.moments.is_empty() {
            model.visit("", &mut |_, p| {
                self.moments.push((
                    Array2::zeros(p.value.raw_dim()),
                    Array2::zeros(p.value.raw_dim()),
                ));
            });
        }
        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        let step_size = (self.learning_rate / bias1) as f32;
        let (b1, b2) = (self.beta1 as f32, self.beta2 as f32);
        let eps = self.eps as f32;
        let decay = (1.0 - self.learning_rate * self.weight_decay) as f32;
        let sqrt_bias2 = bias2.sqrt() as f32;
        let mut moments = self.moments.iter_mut();
        model.visit_mut("", &mut |_, p| {
            let (m, v) = moments.next().expect("parameter layout is fixed");
            Zip::from(&mut p.value)
                .and(&p.grad)
                .and(m)
                .and(v)
                .for_each(|w, &g, m, v| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *w *= decay;
                    *w -= step_size * *m / (v.sqrt() / sqrt_bias2 + eps);
                });
        });
    }
}
