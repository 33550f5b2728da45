//! Contrastive training: augmented views, concept-balanced batches, NT-Xent
//! and AdamW.

mod adamw;
mod augment;
mod batching;
mod loss;

use std::fmt::Write as _;

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use adamw::{adamw_step, AdamWConfig, AdamWState};
pub use augment::{augment, AugmentConfig, View};
pub use batching::{make_batches, Sampler};
pub use loss::nt_xent_loss;

use crate::corpus::Wordlist;
use crate::encoder::{backward, forward, Batch, EncoderConfig, InputEncoder, Mode, ModelParams};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub temperature: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub sampler: Sampler,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            temperature: 0.05,
            learning_rate: 1e-3,
            weight_decay: 0.01,
            batch_size: 128,
            epochs: 4,
            seed: 42,
            sampler: Sampler::ConceptBalanced,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!("temperature {} must be positive", self.temperature)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate {} must be positive", self.learning_rate)));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config(format!("weight_decay {} must be ≥ 0", self.weight_decay)));
        }
        if self.batch_size < 2 {
            return Err(Error::Config("batch_size must be at least 2".into()));
        }
        Ok(())
    }

    fn optimizer(&self) -> AdamWConfig {
        AdamWConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            ..AdamWConfig::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    pub loss: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub steps: Vec<StepRecord>,
}

impl TrainingLog {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("STEP\tEPOCH\tLOSS\n");
        for s in &self.steps {
            let _ = writeln!(out, "{}\t{}\t{}", s.step, s.epoch, s.loss);
        }
        out
    }

    /// Mean step loss per epoch, in epoch order.
    pub fn epoch_means(&self) -> Vec<f64> {
        let epochs = self.steps.iter().map(|s| s.epoch + 1).max().unwrap_or(0);
        (0..epochs)
            .map(|e| {
                let losses: Vec<f64> = self.steps.iter().filter(|s| s.epoch == e).map(|s| s.loss).collect();
                losses.iter().sum::<f64>() / losses.len().max(1) as f64
            })
            .collect()
    }
}

/// Encodes every form of the wordlist into its input matrix.
pub fn encode_wordlist(wordlist: &Wordlist, input: &InputEncoder) -> Result<Vec<Array2<f32>>> {
    wordlist.forms().iter().map(|f| input.encode(&f.segments)).collect()
}

/// Initializes from `train.seed` and trains for `train.epochs` epochs.
pub fn train(
    wordlist: &Wordlist,
    input: &InputEncoder,
    encoder: &EncoderConfig,
    train: &TrainConfig,
    augment_cfg: &AugmentConfig,
) -> Result<(ModelParams<f32>, TrainingLog)> {
    let params = ModelParams::<f32>::init(encoder, train.seed)?;
    train_from(params, wordlist, input, train, augment_cfg)
}

/// Trains starting from `params`.
pub fn train_from(
    mut params: ModelParams<f32>,
    wordlist: &Wordlist,
    input: &InputEncoder,
    train: &TrainConfig,
    augment_cfg: &AugmentConfig,
) -> Result<(ModelParams<f32>, TrainingLog)> {
    train.validate()?;
    augment_cfg.validate()?;
    if input.input_dim() != params.config().input_dim {
        return Err(Error::Config(format!(
            "input encoder produces {} features but the model expects {}",
            input.input_dim(),
            params.config().input_dim
        )));
    }
    let mut log = TrainingLog::default();
    if train.epochs == 0 {
        return Ok((params, log));
    }
    let encoded = encode_wordlist(wordlist, input)?;
    let mut rng = ChaCha8Rng::seed_from_u64(train.seed);
    rng.set_stream(1);
    let mut state = AdamWState::new(&params);
    let opt = train.optimizer();
    let mut step = 0;
    for epoch in 0..train.epochs {
        let batches = make_batches(wordlist, train.batch_size, train.sampler, rng.random())?;
        for batch_ids in batches {
            let batch = views_batch(wordlist, &encoded, &batch_ids, augment_cfg, &mut rng)?;
            let fwd = forward(
                &params,
                &batch,
                Mode::Train {
                    noise_sigma: augment_cfg.noise_sigma,
                },
                &mut rng,
            )?;
            let (loss, d_proj) = nt_xent_loss(&fwd.projected, train.temperature)?;
            let d_hidden = Array2::zeros(fwd.hidden.raw_dim());
            let grads = backward(&params, &fwd.tape, &d_proj, &d_hidden)?;
            adamw_step(&mut params, &grads, &mut state, &opt)?;
            log.steps.push(StepRecord { step, epoch, loss });
            log::debug!("epoch {epoch} step {step} loss {loss:.6}");
            step += 1;
        }
    }
    Ok((params, log))
}

/// Two augmented views per form: rows `0..n` first views, `n..2n` second.
fn views_batch<R: Rng>(
    wordlist: &Wordlist,
    encoded: &[Array2<f32>],
    ids: &[usize],
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<Batch<f32>> {
    let mut seqs = Vec::with_capacity(2 * ids.len());
    let mut noise = Vec::with_capacity(2 * ids.len());
    for _ in 0..2 {
        for &i in ids {
            let positions: Vec<usize> = (0..encoded[i].nrows()).collect();
            let view = augment(&positions, cfg, rng);
            seqs.push(encoded[i].select(Axis(0), &view.items));
            noise.push(view.noise);
        }
    }
    let form_ids: Vec<String> = (0..2).flat_map(|_| ids.iter().map(|&i| wordlist.forms()[i].id.clone())).collect();
    let concepts: Vec<String> = (0..2)
        .flat_map(|_| ids.iter().map(|&i| wordlist.forms()[i].concept.clone()))
        .collect();
    let mut batch = Batch::from_sequences(&seqs, form_ids, concepts)?;
    batch.noise = noise;
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::synthetic;
    use crate::encoder::EncodingMode;

    fn small() -> EncoderConfig {
        EncoderConfig {
            hidden_dim: 16,
            n_heads: 2,
            ff_dim: 32,
            ..EncoderConfig::default()
        }
    }

    #[test]
    fn zero_epochs_returns_initial_params() {
        let wl = synthetic(4, 2, 0);
        let tc = TrainConfig {
            epochs: 0,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let (p, log) = train(&wl, &InputEncoder::Features, &small(), &tc, &AugmentConfig::default()).unwrap();
        assert_eq!(p, ModelParams::init(&small(), tc.seed).unwrap());
        assert!(log.steps.is_empty());
    }

    #[test]
    fn deterministic_under_seed() {
        let wl = synthetic(6, 2, 0);
        let tc = TrainConfig {
            epochs: 2,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let run = || train(&wl, &InputEncoder::Features, &small(), &tc, &AugmentConfig::default()).unwrap();
        let (p1, l1) = run();
        let (p2, l2) = run();
        assert_eq!(p1, p2);
        assert_eq!(l1, l2);
        assert_eq!(l1.steps.len(), 2 * 3);
        assert!(l1.to_tsv().starts_with("STEP\tEPOCH\tLOSS\n0\t0\t"));
        assert_eq!(l1.epoch_means().len(), 2);
    }

    #[test]
    fn one_hot_input_dimension_checked() {
        let wl = synthetic(4, 2, 0);
        let enc = InputEncoder::one_hot_over(wl.forms().iter().flat_map(|f| f.symbols()));
        let cfg = EncoderConfig {
            input_dim: enc.input_dim(),
            encoding_mode: EncodingMode::OneHotIpa,
            ..small()
        };
        let tc = TrainConfig {
            epochs: 1,
            batch_size: 4,
            ..TrainConfig::default()
        };
        assert!(train(&wl, &enc, &cfg, &tc, &AugmentConfig::default()).is_ok());
        assert!(train(&wl, &InputEncoder::Features, &cfg, &tc, &AugmentConfig::default()).is_err());
    }
}
