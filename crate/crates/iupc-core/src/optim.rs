//! Named parameter collection and the AdamW optimizer.

use indexmap::IndexMap;
use thiserror::Error;

use crate::tensor::Tensor;

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("missing gradient for parameter '{name}'")]
    MissingGrad { name: String },
    #[error("no optimizer state for parameter '{name}' (state built from a different set)")]
    UnknownParam { name: String },
    #[error("non-finite gradient for parameter '{name}'")]
    NonFiniteGrad { name: String },
}

/// Ordered name -> tensor map for everything the optimizer and checkpoints
/// touch. Insertion order is stable, which keeps serialized layouts and
/// update order deterministic.
#[derive(Clone, Default)]
pub struct NamedParams {
    entries: IndexMap<String, Tensor>,
}

impl NamedParams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        let name = name.into();
        debug_assert!(
            !self.entries.contains_key(&name),
            "duplicate parameter name {name}"
        );
        self.entries.insert(name, tensor);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }

    /// Total number of scalar values across all tensors.
    pub fn num_values(&self) -> usize {
        self.entries.values().map(Tensor::numel).sum()
    }

    pub fn zero_grads(&self) {
        for t in self.entries.values() {
            t.zero_grad();
        }
    }

    /// Plain-data copy (no graph, no `Rc`) that can cross threads.
    pub fn snapshot(&self) -> ParamSnapshot {
        ParamSnapshot {
            entries: self
                .entries
                .iter()
                .map(|(n, t)| (n.clone(), t.shape(), t.data()))
                .collect(),
        }
    }

    /// Overwrite matching tensors from a snapshot.
    pub fn restore(&self, snapshot: &ParamSnapshot) {
        for (name, _shape, data) in &snapshot.entries {
            if let Some(t) = self.entries.get(name) {
                t.set_data(data);
            }
        }
    }
}

/// Detached copy of a parameter set: `(name, shape, values)` triples.
#[derive(Clone, Debug)]
pub struct ParamSnapshot {
    pub entries: Vec<(String, Vec<usize>, Vec<f64>)>,
}

struct Moments {
    first: Vec<f64>,
    second: Vec<f64>,
}

/// AdamW with decoupled weight decay: the decay multiplies the parameter
/// directly and never enters the moment estimates.
pub struct AdamWState {
    pub step_count: u64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    moments: IndexMap<String, Moments>,
}

impl AdamWState {
    pub fn new(params: &NamedParams, learning_rate: f64, weight_decay: f64) -> Self {
        assert!(learning_rate > 0.0, "learning rate must be positive");
        assert!(weight_decay >= 0.0, "weight decay must be non-negative");
        let moments = params
            .iter()
            .map(|(name, t)| {
                let n = t.numel();
                (
                    name.clone(),
                    Moments {
                        first: vec![0.0; n],
                        second: vec![0.0; n],
                    },
                )
            })
            .collect();
        AdamWState {
            step_count: 0,
            learning_rate,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            moments,
        }
    }

    /// One optimizer step over every trainable parameter.
    pub fn step(&mut self, params: &NamedParams) -> Result<(), OptimError> {
        self.step_count += 1;
        let t = self.step_count as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);

        for (name, tensor) in params.iter() {
            if !tensor.requires_grad() {
                continue;
            }
            let grad = tensor.grad().ok_or_else(|| OptimError::MissingGrad {
                name: name.clone(),
            })?;
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(OptimError::NonFiniteGrad { name: name.clone() });
            }
            let moments = self
                .moments
                .get_mut(name)
                .ok_or_else(|| OptimError::UnknownParam { name: name.clone() })?;

            let mut value = tensor.data();
            for i in 0..value.len() {
                if self.weight_decay > 0.0 {
                    value[i] *= 1.0 - self.learning_rate * self.weight_decay;
                }
                let g = grad[i];
                moments.first[i] = self.beta1 * moments.first[i] + (1.0 - self.beta1) * g;
                moments.second[i] = self.beta2 * moments.second[i] + (1.0 - self.beta2) * g * g;
                let m_hat = moments.first[i] / bias1;
                let v_hat = moments.second[i] / bias2;
                value[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
            tensor.set_data(&value);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_param(value: &[f64]) -> (NamedParams, Tensor) {
        let t = Tensor::param(&[value.len()], value.to_vec()).unwrap();
        let mut params = NamedParams::new();
        params.insert("w", t.clone());
        (params, t)
    }

    #[test]
    fn zero_grad_zero_decay_leaves_param_unchanged() {
        let (params, w) = single_param(&[1.5, -0.25]);
        params.zero_grads();
        let mut state = AdamWState::new(&params, 1e-3, 0.0);
        state.step(&params).unwrap();
        assert_eq!(w.data(), vec![1.5, -0.25]);
        assert_eq!(state.step_count, 1);
    }

    #[test]
    fn zero_grad_with_decay_shrinks_by_closed_form() {
        let (params, w) = single_param(&[2.0, -4.0]);
        params.zero_grads();
        let lr = 0.1;
        let wd = 0.05;
        let mut state = AdamWState::new(&params, lr, wd);
        state.step(&params).unwrap();
        let factor = 1.0 - lr * wd;
        let got = w.data();
        assert!((got[0] - 2.0 * factor).abs() < 1e-15);
        assert!((got[1] + 4.0 * factor).abs() < 1e-15);
    }

    #[test]
    fn first_step_reduces_to_signed_learning_rate() {
        // With bias correction, m̂ = g and v̂ = g² on step one, so the update
        // is −lr·g/(|g| + eps) ≈ −lr·sign(g) when eps ≪ |g|.
        let (params, w) = single_param(&[10.0, 10.0]);
        let lr = 1e-3;
        let mut state = AdamWState::new(&params, lr, 0.0);
        state.epsilon = 1e-12;
        w.zero_grad();
        w.accumulate_grad(&[0.5, -2.0]);
        state.step(&params).unwrap();
        let got = w.data();
        assert!((got[0] - (10.0 - lr)).abs() < 1e-6);
        assert!((got[1] - (10.0 + lr)).abs() < 1e-6);
    }

    #[test]
    fn missing_grad_error_names_the_parameter() {
        let t = Tensor::param(&[2], vec![0.0, 0.0]).unwrap();
        let mut params = NamedParams::new();
        params.insert("encoder.token_embedding", t);
        let mut state = AdamWState::new(&params, 1e-3, 0.0);
        let err = state.step(&params).unwrap_err();
        assert!(err.to_string().contains("encoder.token_embedding"));
    }

    #[test]
    fn step_count_increments_by_one() {
        let (params, _) = single_param(&[0.0]);
        params.zero_grads();
        let mut state = AdamWState::new(&params, 1e-3, 0.0);
        for expected in 1..=5u64 {
            state.step(&params).unwrap();
            assert_eq!(state.step_count, expected);
        }
    }

    #[test]
    fn snapshot_restore_round_trips() {
        let (params, w) = single_param(&[1.0, 2.0, 3.0]);
        let snap = params.snapshot();
        w.set_data(&[9.0, 9.0, 9.0]);
        params.restore(&snap);
        assert_eq!(w.data(), vec![1.0, 2.0, 3.0]);
    }
}
