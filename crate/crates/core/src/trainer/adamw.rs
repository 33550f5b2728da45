use crate::encoder::{ModelParams, Scalar};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct AdamWConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// Moment estimates, one flat buffer per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamWState<F> {
    pub m: Vec<Vec<F>>,
    pub v: Vec<Vec<F>>,
    pub step: u64,
}

impl<F: Scalar> AdamWState<F> {
    pub fn new(params: &ModelParams<F>) -> Self {
        let zeros: Vec<Vec<F>> = params.tensors().iter().map(|(_, t)| vec![F::zero(); t.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }
}

/// One decoupled-weight-decay Adam update. The parameters are left untouched
/// if any gradient entry is not finite.
pub fn adamw_step<F: Scalar>(
    params: &mut ModelParams<F>,
    grads: &ModelParams<F>,
    state: &mut AdamWState<F>,
    config: &AdamWConfig,
) -> Result<()> {
    let grad_tensors = grads.tensors();
    if grad_tensors.len() != state.m.len() || params.config() != grads.config() {
        return Err(Error::Shape("optimizer state, gradients and parameters disagree".into()));
    }
    for (name, g) in &grad_tensors {
        if let Some((index, v)) = g.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteGradient {
                tensor: name.clone(),
                index,
                value: v.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let lr = F::of(config.learning_rate);
    let decay = F::one() - F::of(config.learning_rate * config.weight_decay);
    let (b1, b2) = (F::of(config.beta1), F::of(config.beta2));
    let bc1 = F::of(1.0 - config.beta1.powi(t));
    let bc2 = F::of(1.0 - config.beta2.powi(t));
    let eps = F::of(config.eps);
    for (k, (_, p)) in params.tensors_mut().into_iter().enumerate() {
        let g = &grad_tensors[k].1;
        let (m, v) = (&mut state.m[k], &mut state.v[k]);
        if m.len() != p.len() {
            return Err(Error::Shape(format!("optimizer state for tensor {k} has the wrong size")));
        }
        for (i, (pi, &gi)) in p.iter_mut().zip(g.iter()).enumerate() {
            *pi *= decay;
            m[i] = b1 * m[i] + (F::one() - b1) * gi;
            v[i] = b2 * v[i] + (F::one() - b2) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            *pi -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
