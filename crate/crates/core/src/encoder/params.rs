use ndarray::{Array1, Array2, ArrayViewD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EncoderConfig, Scalar};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams<F> {
    pub ln1_gain: Array1<F>,
    pub ln1_bias: Array1<F>,
    pub w_q: Array2<F>,
    pub b_q: Array1<F>,
    pub w_k: Array2<F>,
    pub b_k: Array1<F>,
    pub w_v: Array2<F>,
    pub b_v: Array1<F>,
    pub w_o: Array2<F>,
    pub b_o: Array1<F>,
    pub ln2_gain: Array1<F>,
    pub ln2_bias: Array1<F>,
    pub w_ff1: Array2<F>,
    pub b_ff1: Array1<F>,
    pub w_ff2: Array2<F>,
    pub b_ff2: Array1<F>,
}

/// All trainable weights. Weight matrices are stored `fan_in × fan_out`, so
/// a linear layer is `x · W + b`.
///
/// The same type carries gradients. Every mutable access bumps `version`,
/// which tapes use to refuse stale replays. Equality ignores the version.
#[derive(Clone, Debug)]
pub struct ModelParams<F> {
    config: EncoderConfig,
    pub embed_weight: Array2<F>,
    pub embed_bias: Array1<F>,
    pub embed_ln_gain: Array1<F>,
    pub embed_ln_bias: Array1<F>,
    pub layers: Vec<LayerParams<F>>,
    pub proj_weight: Option<Array2<F>>,
    pub proj_bias: Option<Array1<F>>,
    version: u64,
}

impl<F: Scalar> PartialEq for ModelParams<F> {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.tensors() == other.tensors()
    }
}

macro_rules! layer_tensors {
    ($layer:expr, $prefix:expr, $push:ident) => {{
        let l = $layer;
        let p = $prefix;
        $push(format!("{p}.ln1_gain"), &l.ln1_gain);
        $push(format!("{p}.ln1_bias"), &l.ln1_bias);
        $push(format!("{p}.w_q"), &l.w_q);
        $push(format!("{p}.b_q"), &l.b_q);
        $push(format!("{p}.w_k"), &l.w_k);
        $push(format!("{p}.b_k"), &l.b_k);
        $push(format!("{p}.w_v"), &l.w_v);
        $push(format!("{p}.b_v"), &l.b_v);
        $push(format!("{p}.w_o"), &l.w_o);
        $push(format!("{p}.b_o"), &l.b_o);
        $push(format!("{p}.ln2_gain"), &l.ln2_gain);
        $push(format!("{p}.ln2_bias"), &l.ln2_bias);
        $push(format!("{p}.w_ff1"), &l.w_ff1);
        $push(format!("{p}.b_ff1"), &l.b_ff1);
        $push(format!("{p}.w_ff2"), &l.w_ff2);
        $push(format!("{p}.b_ff2"), &l.b_ff2);
    }};
}

impl<F: Scalar> ModelParams<F> {
    pub fn zeros(config: &EncoderConfig) -> Result<Self> {
        config.validate()?;
        let (i, h, f) = (config.input_dim, config.hidden_dim, config.ff_dim);
        let v = |n| Array1::zeros(n);
        let m = |r, c| Array2::zeros((r, c));
        let layers = (0..config.n_layers)
            .map(|_| LayerParams {
                ln1_gain: v(h),
                ln1_bias: v(h),
                w_q: m(h, h),
                b_q: v(h),
                w_k: m(h, h),
                b_k: v(h),
                w_v: m(h, h),
                b_v: v(h),
                w_o: m(h, h),
                b_o: v(h),
                ln2_gain: v(h),
                ln2_bias: v(h),
                w_ff1: m(h, f),
                b_ff1: v(f),
                w_ff2: m(f, h),
                b_ff2: v(h),
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            embed_weight: m(i, h),
            embed_bias: v(h),
            embed_ln_gain: v(h),
            embed_ln_bias: v(h),
            layers,
            proj_weight: config.use_projection_head.then(|| m(h, h)),
            proj_bias: config.use_projection_head.then(|| v(h)),
            version: 0,
        })
    }

    /// Uniform `±1/√fan_in` for linear weights and biases; layer-norm gains
    /// one and biases zero. Deterministic under `seed`.
    pub fn init(config: &EncoderConfig, seed: u64) -> Result<Self> {
        let mut params = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fill = |a: &mut [F], fan_in: usize, rng: &mut ChaCha8Rng| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for x in a {
                *x = F::of(rng.random_range(-bound..bound));
            }
        };
        let (i, h, f) = (config.input_dim, config.hidden_dim, config.ff_dim);
        fill(params.embed_weight.as_slice_mut().unwrap(), i, &mut rng);
        fill(params.embed_bias.as_slice_mut().unwrap(), i, &mut rng);
        params.embed_ln_gain.fill(F::one());
        for l in &mut params.layers {
            l.ln1_gain.fill(F::one());
            l.ln2_gain.fill(F::one());
            for (w, b) in [
                (&mut l.w_q, &mut l.b_q),
                (&mut l.w_k, &mut l.b_k),
                (&mut l.w_v, &mut l.b_v),
                (&mut l.w_o, &mut l.b_o),
            ] {
                fill(w.as_slice_mut().unwrap(), h, &mut rng);
                fill(b.as_slice_mut().unwrap(), h, &mut rng);
            }
            fill(l.w_ff1.as_slice_mut().unwrap(), h, &mut rng);
            fill(l.b_ff1.as_slice_mut().unwrap(), h, &mut rng);
            fill(l.w_ff2.as_slice_mut().unwrap(), f, &mut rng);
            fill(l.b_ff2.as_slice_mut().unwrap(), f, &mut rng);
        }
        if let (Some(w), Some(b)) = (params.proj_weight.as_mut(), params.proj_bias.as_mut()) {
            fill(w.as_slice_mut().unwrap(), h, &mut rng);
            fill(b.as_slice_mut().unwrap(), h, &mut rng);
        }
        Ok(params)
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Named read-only views in canonical order.
    pub fn tensors<'a>(&'a self) -> Vec<(String, ArrayViewD<'a, F>)> {
        let mut out = Vec::new();
        {
            let mut push = |name: String, a: &'a dyn AsDynView<F>| out.push((name, a.dyn_view()));
            push("embed_weight".into(), &self.embed_weight);
            push("embed_bias".into(), &self.embed_bias);
            push("embed_ln_gain".into(), &self.embed_ln_gain);
            push("embed_ln_bias".into(), &self.embed_ln_bias);
            for (k, l) in self.layers.iter().enumerate() {
                layer_tensors!(l, format!("layer{k}"), push);
            }
            if let (Some(w), Some(b)) = (&self.proj_weight, &self.proj_bias) {
                push("proj_weight".into(), w);
                push("proj_bias".into(), b);
            }
        }
        out
    }

    /// Named mutable slices in canonical order; bumps the version.
    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [F])> {
        self.version += 1;
        let mut out: Vec<(String, &mut [F])> = Vec::new();
        out.push(("embed_weight".into(), self.embed_weight.as_slice_mut().unwrap()));
        out.push(("embed_bias".into(), self.embed_bias.as_slice_mut().unwrap()));
        out.push(("embed_ln_gain".into(), self.embed_ln_gain.as_slice_mut().unwrap()));
        out.push(("embed_ln_bias".into(), self.embed_ln_bias.as_slice_mut().unwrap()));
        for (k, l) in self.layers.iter_mut().enumerate() {
            let p = format!("layer{k}");
            out.push((format!("{p}.ln1_gain"), l.ln1_gain.as_slice_mut().unwrap()));
            out.push((format!("{p}.ln1_bias"), l.ln1_bias.as_slice_mut().unwrap()));
            out.push((format!("{p}.w_q"), l.w_q.as_slice_mut().unwrap()));
            out.push((format!("{p}.b_q"), l.b_q.as_slice_mut().unwrap()));
            out.push((format!("{p}.w_k"), l.w_k.as_slice_mut().unwrap()));
            out.push((format!("{p}.b_k"), l.b_k.as_slice_mut().unwrap()));
            out.push((format!("{p}.w_v"), l.w_v.as_slice_mut().unwrap()));
            out.push((format!("{p}.b_v"), l.b_v.as_slice_mut().unwrap()));
            out.push((format!("{p}.w_o"), l.w_o.as_slice_mut().unwrap()));
            out.push((format!("{p}.b_o"), l.b_o.as_slice_mut().unwrap()));
            out.push((format!("{p}.ln2_gain"), l.ln2_gain.as_slice_mut().unwrap()));
            out.push((format!("{p}.ln2_bias"), l.ln2_bias.as_slice_mut().unwrap()));
            out.push((format!("{p}.w_ff1"), l.w_ff1.as_slice_mut().unwrap()));
            out.push((format!("{p}.b_ff1"), l.b_ff1.as_slice_mut().unwrap()));
            out.push((format!("{p}.w_ff2"), l.w_ff2.as_slice_mut().unwrap()));
            out.push((format!("{p}.b_ff2"), l.b_ff2.as_slice_mut().unwrap()));
        }
        if let (Some(w), Some(b)) = (self.proj_weight.as_mut(), self.proj_bias.as_mut()) {
            out.push(("proj_weight".into(), w.as_slice_mut().unwrap()));
            out.push(("proj_bias".into(), b.as_slice_mut().unwrap()));
        }
        out
    }

    pub fn shape_of(&self, name: &str) -> Option<Vec<usize>> {
        self.tensors()
            .into_iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t.shape().to_vec())
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.config).expect("config already validated")
    }

    /// Converts to another precision (e.g. `f32` weights into `f64` for a
    /// gradient check).
    pub fn cast<G: Scalar>(&self) -> ModelParams<G> {
        let c1 = |a: &Array1<F>| a.mapv(|x| G::of(x.to_f64().unwrap()));
        let c2 = |a: &Array2<F>| a.mapv(|x| G::of(x.to_f64().unwrap()));
        ModelParams {
            config: self.config.clone(),
            embed_weight: c2(&self.embed_weight),
            embed_bias: c1(&self.embed_bias),
            embed_ln_gain: c1(&self.embed_ln_gain),
            embed_ln_bias: c1(&self.embed_ln_bias),
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    ln1_gain: c1(&l.ln1_gain),
                    ln1_bias: c1(&l.ln1_bias),
                    w_q: c2(&l.w_q),
                    b_q: c1(&l.b_q),
                    w_k: c2(&l.w_k),
                    b_k: c1(&l.b_k),
                    w_v: c2(&l.w_v),
                    b_v: c1(&l.b_v),
                    w_o: c2(&l.w_o),
                    b_o: c1(&l.b_o),
                    ln2_gain: c1(&l.ln2_gain),
                    ln2_bias: c1(&l.ln2_bias),
                    w_ff1: c2(&l.w_ff1),
                    b_ff1: c1(&l.b_ff1),
                    w_ff2: c2(&l.w_ff2),
                    b_ff2: c1(&l.b_ff2),
                })
                .collect(),
            proj_weight: self.proj_weight.as_ref().map(c2),
            proj_bias: self.proj_bias.as_ref().map(c1),
            version: 0,
        }
    }

    /// Copies flat tensor data in canonical order; shapes must match.
    pub(crate) fn load_flat(&mut self, named: Vec<(String, Vec<F>)>) -> Result<()> {
        let mut slots = self.tensors_mut();
        if slots.len() != named.len() {
            return Err(Error::Shape(format!("expected {} tensors, got {}", slots.len(), named.len())));
        }
        for ((name, slot), (given, data)) in slots.iter_mut().zip(named) {
            if *name != given {
                return Err(Error::Shape(format!("expected tensor {name}, got {given}")));
            }
            if slot.len() != data.len() {
                return Err(Error::Shape(format!(
                    "tensor {name} has {} values, expected {}",
                    data.len(),
                    slot.len()
                )));
            }
            slot.copy_from_slice(&data);
        }
        Ok(())
    }

    /// Largest absolute entry over all tensors.
    pub fn max_abs(&self) -> F {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.iter().copied())
            .fold(F::zero(), |m, x| m.max(x.abs()))
    }
}

trait AsDynView<F> {
    fn dyn_view(&self) -> ArrayViewD<'_, F>;
}

impl<F> AsDynView<F> for Array1<F> {
    fn dyn_view(&self) -> ArrayViewD<'_, F> {
        self.view().into_dyn()
    }
}

impl<F> AsDynView<F> for Array2<F> {
    fn dyn_view(&self) -> ArrayViewD<'_, F> {
        self.view().into_dyn()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_count_and_determinism() {
        let cfg = EncoderConfig::default();
        let p = ModelParams::<f32>::init(&cfg, 7).unwrap();
        assert_eq!(p.param_count(), 866_304);
        assert_eq!(p.param_count(), cfg.param_count());
        assert!(p.embed_ln_gain.iter().all(|&g| g == 1.0));
        assert!(p.layers[0].ln2_gain.iter().all(|&g| g == 1.0));
        assert!(p.layers[0].ln1_bias.iter().all(|&b| b == 0.0));
        let q = ModelParams::<f32>::init(&cfg, 7).unwrap();
        assert_eq!(p, q);
        let r = ModelParams::<f32>::init(&cfg, 8).unwrap();
        assert_ne!(p, r);
        let bound = 1.0 / (39f32).sqrt();
        assert!(p.embed_weight.iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn counts_match_formula_on_ablation_grid() {
        for layers in [1, 2, 4] {
            for head in [true, false] {
                for input_dim in [39, 57] {
                    let cfg = EncoderConfig {
                        n_layers: layers,
                        use_projection_head: head,
                        input_dim,
                        ..EncoderConfig::default()
                    };
                    let p = ModelParams::<f32>::zeros(&cfg).unwrap();
                    assert_eq!(p.param_count(), cfg.param_count());
                }
            }
        }
    }

    #[test]
    fn mutation_bumps_version() {
        let mut p = ModelParams::<f64>::zeros(&EncoderConfig::default()).unwrap();
        let v = p.version();
        p.tensors_mut()[0].1[0] = 1.0;
        assert!(p.version() > v);
        assert_eq!(p.embed_weight[[0, 0]], 1.0);
    }
}
