//! Adam optimizer over named parameter arrays.

use alloc::string::String;
use alloc::vec::Vec;

use crate::tape::{Gradients, ParamSet, Tensor};

/// Adam hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment estimates plus the step counter, shaped like the
/// parameters they update.
#[derive(Clone, Debug)]
pub struct AdamState {
    cfg: AdamConfig,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    names: Vec<String>,
    step: u64,
}

/// Shape disagreement between parameters, gradients, and optimizer state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShapeMismatch {
    pub name: String,
}

impl core::fmt::Display for ShapeMismatch {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "shape mismatch for parameter {}", self.name)
    }
}

impl core::error::Error for ShapeMismatch {}

impl AdamState {
    pub fn new(cfg: AdamConfig, params: &ParamSet) -> Self {
        AdamState {
            cfg,
            m: params.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect(),
            v: params.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect(),
            names: params.iter().map(|(n, _)| String::from(n)).collect(),
            step: 0,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.cfg
    }

    /// Number of steps taken so far.
    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update, in place. The step counter advances by 1.
pub fn adam_step(
    params: &mut ParamSet,
    grads: &Gradients,
    state: &mut AdamState,
) -> Result<(), ShapeMismatch> {
    state.step += 1;
    let t = state.step;
    let cfg = state.cfg;
    let bias1 = 1.0 - libm::pow(cfg.beta1, t as f64);
    let bias2 = 1.0 - libm::pow(cfg.beta2, t as f64);

    for (slot, name) in state.names.clone().iter().enumerate() {
        let grad = grads.get(name).ok_or_else(|| ShapeMismatch {
            name: name.clone(),
        })?;
        let param = params.get_mut(name).ok_or_else(|| ShapeMismatch {
            name: name.clone(),
        })?;
        if grad.shape() != param.shape() || state.m[slot].shape() != param.shape() {
            return Err(ShapeMismatch { name: name.clone() });
        }
        let m = state.m[slot].data_mut();
        let v = state.v[slot].data_mut();
        let p = param.data_mut();
        for ((p_i, g_i), (m_i, v_i)) in p
            .iter_mut()
            .zip(grad.data().iter())
            .zip(m.iter_mut().zip(v.iter_mut()))
        {
            *m_i = cfg.beta1 * *m_i + (1.0 - cfg.beta1) * g_i;
            *v_i = cfg.beta2 * *v_i + (1.0 - cfg.beta2) * g_i * g_i;
            let m_hat = *m_i / bias1;
            let v_hat = *v_i / bias2;
            *p_i -= cfg.learning_rate * m_hat / (libm::sqrt(v_hat) + cfg.epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tape::{Tape, Tensor};

    fn params_with(values: Vec<f64>) -> ParamSet {
        let mut p = ParamSet::new();
        p.insert("w", Tensor::vector(values));
        p
    }

    fn constant_grads(params: &ParamSet, g: f64) -> Gradients {
        // Builds gradients through a tape so the layout matches.
        let mut tape = Tape::new();
        let ids = tape.bind(params);
        let c = tape.constant(Tensor::scalar(g));
        let scaled = tape.mul(ids[0], c);
        let root = tape.sum(scaled);
        tape.evaluate(root).unwrap().1
    }

    #[test]
    fn first_step_magnitude_is_learning_rate() {
        let mut params = params_with(vec![1.0, -2.0, 0.5]);
        let grads = constant_grads(&params, 0.37);
        let mut state = AdamState::new(
            AdamConfig {
                learning_rate: 0.01,
                ..AdamConfig::default()
            },
            &params,
        );
        adam_step(&mut params, &grads, &mut state).unwrap();
        // Bias-corrected m_hat / sqrt(v_hat) equals sign(g) on the first step.
        let got = params.get("w").unwrap().data().to_vec();
        for (new, old) in got.iter().zip([1.0, -2.0, 0.5]) {
            assert!(((old - new) - 0.01).abs() < 1e-6, "update {}", old - new);
        }
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut params = params_with(vec![1.0, -2.0]);
        let grads = constant_grads(&params, 0.0);
        let mut state = AdamState::new(AdamConfig::default(), &params);
        adam_step(&mut params, &grads, &mut state).unwrap();
        assert_eq!(params.get("w").unwrap().data(), &[1.0, -2.0]);
    }

    #[test]
    fn identical_calls_identical_results() {
        let run = || {
            let mut params = params_with(vec![0.2, 0.4, -0.8]);
            let grads = constant_grads(&params, 1.5);
            let mut state = AdamState::new(AdamConfig::default(), &params);
            for _ in 0..5 {
                adam_step(&mut params, &grads, &mut state).unwrap();
            }
            params.get("w").unwrap().data().to_vec()
        };
        let a = run();
        let b = run();
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn shape_mismatch_detected() {
        let mut params = params_with(vec![1.0, 2.0]);
        let grads = constant_grads(&params, 1.0);
        let other = params_with(vec![1.0, 2.0, 3.0]);
        let mut state = AdamState::new(AdamConfig::default(), &other);
        assert!(adam_step(&mut params, &grads, &mut state).is_err());
    }
}
