use std::fmt::Write as _;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;

use super::{EncoderConfig, EncodingMode, InputEncoder, ModelParams};
use crate::error::{Error, Result};

const MAGIC: &str = "# loanword encoder checkpoint";

/// Trained weights plus everything needed to rebuild the encoder.
///
/// Text layout: a `key = value` header (every [`EncoderConfig`] field, seed,
/// code version, parameter count, and the one-hot inventory if any), then
/// one `[tensor NAME DIMS]` line per array followed by a single line of
/// base64 little-endian `f32` data.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams<f32>,
    pub seed: u64,
    pub inventory: Vec<String>,
}

impl Checkpoint {
    pub fn new(params: ModelParams<f32>, seed: u64, input: &InputEncoder) -> Self {
        Self {
            params,
            seed,
            inventory: input.inventory().to_vec(),
        }
    }

    pub fn config(&self) -> &EncoderConfig {
        self.params.config()
    }

    pub fn input_encoder(&self) -> InputEncoder {
        match self.config().encoding_mode {
            EncodingMode::FeatureVectors => InputEncoder::Features,
            EncodingMode::OneHotIpa => InputEncoder::one_hot(self.inventory.clone()),
        }
    }

    pub fn to_text(&self) -> String {
        let c = self.config();
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "code_version = {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "param_count = {}", self.params.param_count());
        let _ = writeln!(out, "input_dim = {}", c.input_dim);
        let _ = writeln!(out, "hidden_dim = {}", c.hidden_dim);
        let _ = writeln!(out, "n_layers = {}", c.n_layers);
        let _ = writeln!(out, "n_heads = {}", c.n_heads);
        let _ = writeln!(out, "ff_dim = {}", c.ff_dim);
        let _ = writeln!(out, "feature_dropout = {}", c.feature_dropout);
        let _ = writeln!(out, "attention_dropout = {}", c.attention_dropout);
        let _ = writeln!(out, "use_projection_head = {}", c.use_projection_head);
        let _ = writeln!(out, "encoding_mode = {}", c.encoding_mode);
        if !self.inventory.is_empty() {
            let _ = writeln!(out, "inventory = {}", self.inventory.join("\t"));
        }
        for (name, t) in self.params.tensors() {
            let dims: Vec<String> = t.shape().iter().map(usize::to_string).collect();
            let bytes: Vec<u8> = t.iter().flat_map(|v| v.to_le_bytes()).collect();
            let _ = writeln!(out, "[tensor {name} {}]", dims.join("x"));
            let _ = writeln!(out, "{}", STANDARD.encode(bytes));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::error::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Checkpoint(m);
        let mut lines = text.lines().enumerate().peekable();
        match lines.next() {
            Some((_, l)) if l.trim() == MAGIC => {}
            _ => return Err(bad("missing checkpoint header line".into())),
        }
        let mut config = EncoderConfig::default();
        let mut seed = None;
        let mut param_count = None;
        let mut inventory = Vec::new();
        while let Some(&(n, line)) = lines.peek() {
            if line.starts_with("[tensor ") {
                break;
            }
            lines.next();
            if line.trim().is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once(" = ")
                .ok_or_else(|| bad(format!("line {}: expected `key = value`", n + 1)))?;
            let num = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| bad(format!("line {}: {key} has non-numeric value {v:?}", n + 1)))
            };
            let int = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| bad(format!("line {}: {key} has non-integer value {v:?}", n + 1)))
            };
            match key {
                "code_version" => {}
                "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad(format!("bad seed {value:?}")))?),
                "param_count" => param_count = Some(int(value)?),
                "input_dim" => config.input_dim = int(value)?,
                "hidden_dim" => config.hidden_dim = int(value)?,
                "n_layers" => config.n_layers = int(value)?,
                "n_heads" => config.n_heads = int(value)?,
                "ff_dim" => config.ff_dim = int(value)?,
                "feature_dropout" => config.feature_dropout = num(value)?,
                "attention_dropout" => config.attention_dropout = num(value)?,
                "use_projection_head" => {
                    config.use_projection_head = value
                        .parse()
                        .map_err(|_| bad(format!("bad use_projection_head {value:?}")))?
                }
                "encoding_mode" => config.encoding_mode = value.parse()?,
                "inventory" => inventory = value.split('\t').map(str::to_string).collect(),
                other => return Err(bad(format!("line {}: unknown header key {other:?}", n + 1))),
            }
        }
        let seed = seed.ok_or_else(|| bad("header has no seed".into()))?;
        let mut params = ModelParams::<f32>::zeros(&config)?;
        if let Some(count) = param_count {
            if count != params.param_count() {
                return Err(bad(format!(
                    "header says {count} parameters but the config has {}",
                    params.param_count()
                )));
            }
        }
        if config.encoding_mode == EncodingMode::OneHotIpa && inventory.len() != config.input_dim {
            return Err(bad(format!(
                "one-hot inventory has {} symbols but input_dim is {}",
                inventory.len(),
                config.input_dim
            )));
        }

        let mut named = Vec::new();
        while let Some((n, header)) = lines.next() {
            if header.trim().is_empty() {
                continue;
            }
            let inner = header
                .strip_prefix("[tensor ")
                .and_then(|h| h.strip_suffix(']'))
                .ok_or_else(|| bad(format!("line {}: expected a tensor header", n + 1)))?;
            let (name, dims) = inner
                .split_once(' ')
                .ok_or_else(|| bad(format!("line {}: tensor header needs a shape", n + 1)))?;
            let shape: Vec<usize> = dims
                .split('x')
                .map(|d| d.parse().map_err(|_| bad(format!("line {}: bad dimension {d:?}", n + 1))))
                .collect::<Result<_>>()?;
            let expected = params
                .shape_of(name)
                .ok_or_else(|| bad(format!("tensor {name} does not belong to this config")))?;
            if shape != expected {
                return Err(bad(format!("tensor {name} has shape {shape:?}, config expects {expected:?}")));
            }
            let (_, data) = lines.next().ok_or_else(|| bad(format!("tensor {name} has no data")))?;
            let bytes = STANDARD
                .decode(data.trim())
                .map_err(|e| bad(format!("tensor {name}: {e}")))?;
            if bytes.len() % 4 != 0 {
                return Err(bad(format!("tensor {name}: byte length {} is not a multiple of 4", bytes.len())));
            }
            let values = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            named.push((name.to_string(), values));
        }
        params.load_flat(named).map_err(|e| bad(e.to_string()))?;
        Ok(Self {
            params,
            seed,
            inventory,
        })
    }

    /// Errors unless this checkpoint was trained with exactly `config`.
    pub fn check_compatible(&self, config: &EncoderConfig) -> Result<()> {
        if self.config() != config {
            return Err(Error::Checkpoint(format!(
                "checkpoint config {:?} does not match the requested config {:?}",
                self.config(),
                config
            )));
        }
        Ok(())
    }
}
