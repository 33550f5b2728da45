//! The word encoder: linear embedding of phonetic feature vectors, layer
//! norm, feature dropout, optional Gaussian noise, additive sinusoidal
//! positions, pre-norm Transformer layers with rotary attention, masked mean
//! pooling and a tanh projection head.
//!
//! Forward and backward passes are written out by hand; `forward` returns a
//! [`Tape`] holding every intermediate that `backward` needs.

mod checkpoint;
mod model;
mod ops;
mod params;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Array3, NdFloat};
use num_traits::FromPrimitive;

pub use checkpoint::Checkpoint;
pub use model::{backward, encode, forward, Forward, Tape};
pub use ops::{rotary_apply, sinusoidal_pe};
pub use params::{LayerParams, ModelParams};

use crate::error::{Error, Result};
use crate::phon::{Segment, FEATURE_DIM};

/// Floating point types the encoder runs on: `f32` for training, `f64` for
/// gradient checks.
pub trait Scalar: NdFloat + FromPrimitive + std::iter::Sum {
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite conversion")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum EncodingMode {
    #[default]
    FeatureVectors,
    OneHotIpa,
}

impl fmt::Display for EncodingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncodingMode::FeatureVectors => "feature_vectors",
            EncodingMode::OneHotIpa => "one_hot_ipa",
        })
    }
}

impl FromStr for EncodingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "feature_vectors" | "features" => Ok(Self::FeatureVectors),
            "one_hot_ipa" | "ipa" => Ok(Self::OneHotIpa),
            other => Err(Error::Config(format!("unknown encoding mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub ff_dim: usize,
    pub feature_dropout: f64,
    pub attention_dropout: f64,
    pub use_projection_head: bool,
    pub encoding_mode: EncodingMode,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            input_dim: FEATURE_DIM,
            hidden_dim: 256,
            n_layers: 1,
            n_heads: 4,
            ff_dim: 1024,
            feature_dropout: 0.1,
            attention_dropout: 0.1,
            use_projection_head: true,
            encoding_mode: EncodingMode::FeatureVectors,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.input_dim == 0 || self.hidden_dim == 0 || self.ff_dim == 0 || self.n_heads == 0 {
            return bad("dimensions must be positive".into());
        }
        if !self.hidden_dim.is_multiple_of(self.n_heads) {
            return bad(format!(
                "hidden_dim {} is not divisible by n_heads {}",
                self.hidden_dim, self.n_heads
            ));
        }
        if !(self.hidden_dim / self.n_heads).is_multiple_of(2) {
            return bad("rotary attention needs an even head dimension".into());
        }
        if !self.hidden_dim.is_multiple_of(2) {
            return bad("sinusoidal positions need an even hidden_dim".into());
        }
        for (name, p) in [
            ("feature_dropout", self.feature_dropout),
            ("attention_dropout", self.attention_dropout),
        ] {
            if !(0.0..1.0).contains(&p) {
                return bad(format!("{name} = {p} is outside [0, 1)"));
            }
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.n_heads
    }

    /// Closed-form trainable parameter count.
    pub fn param_count(&self) -> usize {
        let (i, h, f) = (self.input_dim, self.hidden_dim, self.ff_dim);
        let embed = i * h + h + 2 * h;
        let attention = 4 * (h * h + h);
        let feed_forward = h * f + f + f * h + h;
        let norms = 4 * h;
        let head = if self.use_projection_head { h * h + h } else { 0 };
        embed + self.n_layers * (attention + feed_forward + norms) + head
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mode {
    Eval,
    /// Dropout active; rows flagged in [`Batch::noise`] receive Gaussian
    /// noise with this standard deviation after the embedding dropout.
    Train { noise_sigma: f64 },
}

/// A padded batch of encoded word forms.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch<F> {
    pub inputs: Array3<F>,
    pub mask: Array2<bool>,
    pub lengths: Vec<usize>,
    pub concept_ids: Vec<String>,
    pub form_ids: Vec<String>,
    /// Per-row Gaussian-noise flag, used only in train mode.
    pub noise: Vec<bool>,
}

impl<F: Scalar> Batch<F> {
    /// Pads `sequences` (each `len × input_dim`) to the longest one.
    pub fn from_sequences(
        sequences: &[Array2<F>],
        form_ids: Vec<String>,
        concept_ids: Vec<String>,
    ) -> Result<Self> {
        Self::padded(sequences, form_ids, concept_ids, 0)
    }

    /// Like [`Batch::from_sequences`], padding to at least `min_len` columns.
    pub fn padded(
        sequences: &[Array2<F>],
        form_ids: Vec<String>,
        concept_ids: Vec<String>,
        min_len: usize,
    ) -> Result<Self> {
        if sequences.is_empty() {
            return Err(Error::Invalid("empty batch".into()));
        }
        if form_ids.len() != sequences.len() || concept_ids.len() != sequences.len() {
            return Err(Error::Shape("ids do not match the number of sequences".into()));
        }
        let dim = sequences[0].ncols();
        let max_len = sequences.iter().map(|s| s.nrows()).max().unwrap_or(0).max(min_len);
        let mut inputs = Array3::zeros((sequences.len(), max_len, dim));
        let mut mask = Array2::from_elem((sequences.len(), max_len), false);
        for (r, seq) in sequences.iter().enumerate() {
            if seq.ncols() != dim {
                return Err(Error::Shape(format!("row {r} has {} features, expected {dim}", seq.ncols())));
            }
            for (p, v) in seq.outer_iter().enumerate() {
                inputs.slice_mut(ndarray::s![r, p, ..]).assign(&v);
                mask[[r, p]] = true;
            }
        }
        Ok(Self {
            inputs,
            mask,
            lengths: sequences.iter().map(|s| s.nrows()).collect(),
            noise: vec![false; sequences.len()],
            concept_ids,
            form_ids,
        })
    }

    pub fn rows(&self) -> usize {
        self.inputs.dim().0
    }

    pub fn validate(&self, input_dim: usize) -> Result<()> {
        let (b, len, dim) = self.inputs.dim();
        if dim != input_dim {
            return Err(Error::Shape(format!("batch has {dim} input features, model expects {input_dim}")));
        }
        if self.mask.dim() != (b, len) || self.lengths.len() != b || self.noise.len() != b {
            return Err(Error::Shape("mask, lengths and noise flags must cover every row".into()));
        }
        for r in 0..b {
            let valid = self.mask.row(r).iter().filter(|&&m| m).count();
            if valid != self.lengths[r] {
                return Err(Error::Shape(format!(
                    "row {r}: mask has {valid} valid positions but length is {}",
                    self.lengths[r]
                )));
            }
        }
        Ok(())
    }
}

/// Turns segments into model input rows: either their phonetic feature
/// vectors or one-hot vectors over a fixed symbol inventory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InputEncoder {
    Features,
    OneHot {
        inventory: Vec<String>,
        index: HashMap<String, usize>,
    },
}

impl InputEncoder {
    pub fn one_hot(inventory: Vec<String>) -> Self {
        let index = inventory.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        InputEncoder::OneHot { inventory, index }
    }

    /// Builds a one-hot encoder over every symbol in `forms`, sorted.
    pub fn one_hot_over<'a>(symbols: impl IntoIterator<Item = &'a str>) -> Self {
        let set: std::collections::BTreeSet<&str> = symbols.into_iter().collect();
        Self::one_hot(set.into_iter().map(str::to_string).collect())
    }

    pub fn mode(&self) -> EncodingMode {
        match self {
            InputEncoder::Features => EncodingMode::FeatureVectors,
            InputEncoder::OneHot { .. } => EncodingMode::OneHotIpa,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            InputEncoder::Features => FEATURE_DIM,
            InputEncoder::OneHot { inventory, .. } => inventory.len(),
        }
    }

    pub fn inventory(&self) -> &[String] {
        match self {
            InputEncoder::Features => &[],
            InputEncoder::OneHot { inventory, .. } => inventory,
        }
    }

    pub fn encode_segment<F: Scalar>(&self, segment: &Segment, out: &mut [F]) -> Result<()> {
        match self {
            InputEncoder::Features => {
                for (o, &v) in out.iter_mut().zip(segment.features.iter()) {
                    *o = F::of(v as f64);
                }
            }
            InputEncoder::OneHot { index, .. } => {
                out.iter_mut().for_each(|o| *o = F::zero());
                let i = index
                    .get(&segment.symbol)
                    .ok_or_else(|| Error::Invalid(format!("symbol {:?} not in the one-hot inventory", segment.symbol)))?;
                out[*i] = F::one();
            }
        }
        Ok(())
    }

    pub fn encode<F: Scalar>(&self, segments: &[Segment]) -> Result<Array2<F>> {
        let mut out = Array2::zeros((segments.len(), self.input_dim()));
        for (seg, mut row) in segments.iter().zip(out.outer_iter_mut()) {
            self.encode_segment(seg, row.as_slice_mut().expect("standard layout"))?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_param_count() {
        let cfg = EncoderConfig::default();
        assert_eq!(cfg.param_count(), 866_304);
        assert_eq!(
            cfg.param_count(),
            10_240 + 512 + 263_168 + 525_568 + 1_024 + 65_792
        );
        let no_head = EncoderConfig {
            use_projection_head: false,
            ..cfg.clone()
        };
        assert_eq!(no_head.param_count(), 866_304 - 65_792);
    }

    #[test]
    fn config_validation() {
        assert!(EncoderConfig::default().validate().is_ok());
        let bad_heads = EncoderConfig {
            n_heads: 3,
            ..EncoderConfig::default()
        };
        assert!(bad_heads.validate().is_err());
        let bad_p = EncoderConfig {
            feature_dropout: 1.0,
            ..EncoderConfig::default()
        };
        assert!(bad_p.validate().is_err());
    }

    #[test]
    fn batch_padding() {
        let seqs = vec![Array2::<f32>::ones((2, 3)), Array2::<f32>::ones((4, 3))];
        let b = Batch::from_sequences(&seqs, vec!["a".into(), "b".into()], vec!["x".into(), "y".into()]).unwrap();
        assert_eq!(b.inputs.dim(), (2, 4, 3));
        assert_eq!(b.lengths, [2, 4]);
        assert!(b.validate(3).is_ok());
        assert_eq!(b.inputs[[0, 3, 0]], 0.0);
        assert!(!b.mask[[0, 2]]);
        assert!(b.validate(4).is_err());
    }

    #[test]
    fn one_hot_encoding() {
        let enc = InputEncoder::one_hot_over(["b", "a", "b"]);
        assert_eq!(enc.input_dim(), 2);
        let seg = Segment {
            symbol: "b".into(),
            features: [0; FEATURE_DIM],
        };
        let m: Array2<f64> = enc.encode(&[seg]).unwrap();
        assert_eq!(m.row(0).to_vec(), [0.0, 1.0]);
    }
}
