//! Central finite-difference oracle for the encoder and the contrastive loss.

use loanword::encoder::{backward, forward, Batch, EncoderConfig, Mode, ModelParams};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-4;
/// Relative error is |a − n| / max(|a|, |n|, FLOOR). Entries whose true
/// gradient is essentially zero would otherwise divide roundoff by roundoff.
pub const FLOOR: f64 = 1e-6;

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(FLOOR)
}

pub struct Instance {
    pub params: ModelParams<f64>,
    pub batch: Batch<f64>,
    pub up_projected: Array2<f64>,
    pub up_hidden: Array2<f64>,
    pub rng_seed: u64,
}

pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hidden = [8, 12, 16][rng.random_range(0..3)];
    let heads = if hidden == 12 { [1, 2, 3][rng.random_range(0..3)] } else { [1, 2, 4][rng.random_range(0..3)] };
    let config = EncoderConfig {
        input_dim: rng.random_range(3..7),
        hidden_dim: hidden,
        n_heads: heads,
        n_layers: rng.random_range(1..3),
        ff_dim: 2 * hidden,
        use_projection_head: rng.random_bool(0.8),
        ..EncoderConfig::default()
    };
    let params = ModelParams::<f64>::init(&config, seed).unwrap();
    let rows = rng.random_range(2..4);
    let seqs: Vec<Array2<f64>> = (0..rows)
        .map(|_| {
            let len = rng.random_range(1..6);
            Array2::from_shape_simple_fn((len, config.input_dim), || rng.random_range(0..3) as f64)
        })
        .collect();
    let ids: Vec<String> = (0..rows).map(|i| i.to_string()).collect();
    let mut batch = Batch::padded(&seqs, ids.clone(), ids, 6).unwrap();
    batch.noise = (0..rows).map(|_| rng.random_bool(0.5)).collect();
    let up_projected = Array2::from_shape_simple_fn((rows, hidden), || rng.random_range(-1.0..1.0));
    let up_hidden = Array2::from_shape_simple_fn((rows, hidden), || rng.random_range(-1.0..1.0));
    Instance {
        params,
        batch,
        up_projected,
        up_hidden,
        rng_seed: seed ^ 0x5eed,
    }
}

impl Instance {
    /// Scalar objective: a fixed random linear functional of both outputs.
    /// The rng is reseeded so dropout masks and noise repeat exactly.
    pub fn objective(&self, params: &ModelParams<f64>) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        let f = forward(params, &self.batch, Mode::Train { noise_sigma: 0.1 }, &mut rng).unwrap();
        (&f.projected * &self.up_projected).sum() + (&f.hidden * &self.up_hidden).sum()
    }

    pub fn analytic(&self) -> ModelParams<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        let f = forward(&self.params, &self.batch, Mode::Train { noise_sigma: 0.1 }, &mut rng).unwrap();
        backward(&self.params, &f.tape, &self.up_projected, &self.up_hidden).unwrap()
    }

    /// Worst relative error per tensor over every entry.
    pub fn check(&self) -> Vec<(String, f64)> {
        let grads = self.analytic();
        let analytic: Vec<(String, Vec<f64>)> = grads
            .tensors()
            .into_iter()
            .map(|(n, t)| (n, t.iter().copied().collect()))
            .collect();
        let mut probe = self.params.clone();
        let mut out = Vec::new();
        for (k, (name, a)) in analytic.iter().enumerate() {
            let mut worst: f64 = 0.0;
            for (i, &ai) in a.iter().enumerate() {
                let orig = probe.tensors_mut()[k].1[i];
                probe.tensors_mut()[k].1[i] = orig + STEP;
                let plus = self.objective(&probe);
                probe.tensors_mut()[k].1[i] = orig - STEP;
                let minus = self.objective(&probe);
                probe.tensors_mut()[k].1[i] = orig;
                let numeric = (plus - minus) / (2.0 * STEP);
                worst = worst.max(rel_err(ai, numeric));
            }
            out.push((name.clone(), worst));
        }
        out
    }
}

/// Worst relative error of the NT-Xent gradient over a random `2n × d`
/// input at temperature `tau`.
pub fn nt_xent_check(seed: u64, n: usize, d: usize, tau: f64) -> f64 {
    use loanword::trainer::nt_xent_loss;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = Array2::from_shape_simple_fn((2 * n, d), || rng.random_range(-1.0..1.0));
    let (_, grad) = nt_xent_loss(&z, tau).unwrap();
    let mut worst: f64 = 0.0;
    let mut probe = z.clone();
    for idx in 0..z.len() {
        let (r, c) = (idx / d, idx % d);
        let orig = z[[r, c]];
        probe[[r, c]] = orig + STEP;
        let plus = nt_xent_loss(&probe, tau).unwrap().0;
        probe[[r, c]] = orig - STEP;
        let minus = nt_xent_loss(&probe, tau).unwrap().0;
        probe[[r, c]] = orig;
        worst = worst.max(rel_err(grad[[r, c]], (plus - minus) / (2.0 * STEP)));
    }
    worst
}
