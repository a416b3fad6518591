use ndarray::{Array2, Zip};

use crate::nnet::{Gradients, ParamStore};

/// `peak · min(step / warmup, sqrt(warmup / step))` for `step ≥ 1`.
pub fn learning_rate(step: usize, peak: f64, warmup: usize) -> f64 {
    let t = step.max(1) as f64;
    let w = warmup.max(1) as f64;
    peak * (t / w).min((w / t).sqrt())
}

/// Adam with bias correction. Parameters without a gradient are treated as
/// having a zero gradient.
#[derive(Clone, Debug)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    first: Vec<Array2<f32>>,
    second: Vec<Array2<f32>>,
}

impl Adam {
    pub fn new(store: &ParamStore<f32>, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros: Vec<Array2<f32>> = store.iter().map(|(_, _, v)| Array2::zeros(v.raw_dim())).collect();
        Self {
            beta1,
            beta2,
            eps,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn steps(&self) -> i32 {
        self.step
    }

    pub fn update(&mut self, store: &mut ParamStore<f32>, grads: &Gradients<f32>, lr: f64) {
        self.step += 1;
        let (b1, b2) = (self.beta1 as f32, self.beta2 as f32);
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let step_size = (lr * c2.sqrt() / c1) as f32;
        let eps = (self.eps * c2.sqrt()) as f32;
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let i = id.index();
            let (m, v) = (&mut self.first[i], &mut self.second[i]);
            match grads.get(id) {
                Some(g) => Zip::from(&mut *m).and(&mut *v).and(g).for_each(|m, v, &g| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                }),
                None => Zip::from(&mut *m).and(&mut *v).for_each(|m, v| {
                    *m *= b1;
                    *v *= b2;
                }),
            }
            Zip::from(store.get_mut(id)).and(&*m).and(&*v).for_each(|p, &m, &v| {
                *p -= step_size * m / (v.sqrt() + eps);
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::{Init, ParamBuilder, ParamSink};

    #[test]
    fn schedule_values() {
        assert!((learning_rate(10_000, 5e-4, 10_000) - 5e-4).abs() < 1e-15);
        assert!((learning_rate(40_000, 5e-4, 10_000) - 2.5e-4).abs() < 1e-15);
        assert!((learning_rate(5_000, 5e-4, 10_000) - 2.5e-4).abs() < 1e-15);
    }

    #[test]
    fn adam_descends_a_quadratic() {
        let mut b = ParamBuilder::<f32>::new(0);
        let x = b.add("x".into(), 1, 1, Init::Ones);
        let mut store = b.finish();
        let mut adam = Adam::new(&store, 0.9, 0.98, 1e-8);
        for _ in 0..500 {
            let mut g = Gradients::zeros_like(&store);
            g.accumulate(x, &(store.get(x) * 2.0));
            adam.update(&mut store, &g, 0.05);
        }
        assert!(store.get(x)[[0, 0]].abs() < 0.05);
    }
}
