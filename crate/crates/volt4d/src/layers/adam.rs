//! Adam optimizer with bias correction.

use crate::error::{Error, Result};
use crate::layers::ParamStore;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Per-parameter first and second moment estimates plus the step counter.
/// Second moments are sums of squares and never go negative.
#[derive(Debug, Clone)]
pub struct AdamState {
    step_count: u64,
    first_moment: Vec<Tensor>,
    second_moment: Vec<Tensor>,
    pub hyper: AdamHyper,
}

impl AdamState {
    pub fn new(store: &ParamStore, hyper: AdamHyper) -> Self {
        AdamState {
            step_count: 0,
            first_moment: store.grad_buffers(),
            second_moment: store.grad_buffers(),
            hyper,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Apply one update from the gradients currently accumulated in the
    /// store. Exclusive access: moments, counter, and parameter values all
    /// advance together.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        if self.first_moment.len() != store.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} parameter tensors", self.first_moment.len()),
                got: format!("{}", store.len()),
            });
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let h = self.hyper;
        let bc1 = 1.0 - h.beta1.powi(t);
        let bc2 = 1.0 - h.beta2.powi(t);
        for (idx, id) in store.ids().enumerate().collect::<Vec<_>>() {
            let grad = store.grad(id).clone();
            let m = &mut self.first_moment[idx];
            let v = &mut self.second_moment[idx];
            let p = store.value_mut(id);
            for (((pv, &g), mv), vv) in p
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mv = h.beta1 * *mv + (1.0 - h.beta1) * g;
                *vv = h.beta2 * *vv + (1.0 - h.beta2) * g * g;
                debug_assert!(*vv >= 0.0);
                let m_hat = *mv / bc1;
                let v_hat = *vv / bc2;
                *pv -= h.learning_rate * m_hat / (v_hat.sqrt() + h.epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Fill;

    fn store_with(values: Vec<f64>, grads: Vec<f64>) -> (ParamStore, crate::layers::ParamId) {
        let n = values.len();
        let mut store = ParamStore::new();
        let id = store.add("p", Tensor::from_vec(&[n], values).unwrap());
        let g = Tensor::from_vec(&[n], grads).unwrap();
        let bufs = vec![g];
        store.accumulate_buffers(&bufs).unwrap();
        (store, id)
    }

    #[test]
    fn zero_gradients_leave_parameters_unchanged() {
        let (mut store, id) = store_with(vec![1.0, -2.0, 3.0], vec![0.0, 0.0, 0.0]);
        let before = store.value(id).clone();
        let mut adam = AdamState::new(&store, AdamHyper::default());
        adam.step(&mut store).unwrap();
        assert_eq!(store.value(id), &before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let lr = 1e-3;
        let (mut store, id) = store_with(vec![0.7], vec![0.5]);
        let mut adam = AdamState::new(&store, AdamHyper::default());
        adam.step(&mut store).unwrap();
        let moved = 0.7 - store.value(id).data()[0];
        assert!((moved - lr).abs() < 1e-6 * lr, "moved {moved}");

        let (mut store_n, id_n) = store_with(vec![0.7], vec![-0.5]);
        let mut adam_n = AdamState::new(&store_n, AdamHyper::default());
        adam_n.step(&mut store_n).unwrap();
        let moved_n = 0.7 - store_n.value(id_n).data()[0];
        assert!((moved_n + lr).abs() < 1e-6 * lr);
    }

    #[test]
    fn matches_scripted_recurrence_over_two_steps() {
        let h = AdamHyper::default();
        let (g1, g2) = (0.3f64, -0.8f64);
        let p0 = 1.5f64;

        // scripted reference
        let mut m = 0.0;
        let mut v = 0.0;
        let mut p = p0;
        for (t, g) in [(1, g1), (2, g2)] {
            m = h.beta1 * m + (1.0 - h.beta1) * g;
            v = h.beta2 * v + (1.0 - h.beta2) * g * g;
            let m_hat = m / (1.0 - h.beta1.powi(t));
            let v_hat = v / (1.0 - h.beta2.powi(t));
            p -= h.learning_rate * m_hat / (v_hat.sqrt() + h.epsilon);
        }

        let (mut store, id) = store_with(vec![p0], vec![g1]);
        let mut adam = AdamState::new(&store, h);
        adam.step(&mut store).unwrap();
        store.zero_grad();
        store
            .accumulate_buffers(&[Tensor::from_vec(&[1], vec![g2]).unwrap()])
            .unwrap();
        adam.step(&mut store).unwrap();
        assert!((store.value(id).data()[0] - p).abs() < 1e-12);
        assert_eq!(adam.step_count(), 2);
    }

    #[test]
    fn update_is_deterministic() {
        let run = || {
            let vals = Tensor::new(
                &[16],
                Fill::Uniform {
                    seed: 1,
                    lo: -1.0,
                    hi: 1.0,
                },
            )
            .unwrap();
            let grads = Tensor::new(
                &[16],
                Fill::Uniform {
                    seed: 2,
                    lo: -1.0,
                    hi: 1.0,
                },
            )
            .unwrap();
            let (mut store, id) = store_with(vals.data().to_vec(), grads.data().to_vec());
            let mut adam = AdamState::new(&store, AdamHyper::default());
            adam.step(&mut store).unwrap();
            store.value(id).data().to_vec()
        };
        assert_eq!(run(), run());
    }
}
