//! Run configuration: every tunable of a run in one flat key space.
//!
//! The same `key = value` syntax is used by configuration files, the
//! `--set` flag and ablation grid overrides.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::corpus::{
    ColexNetwork, Phonology, RoleAssignment, UnknownSymbolPolicy, Wordlist, DEFAULT_COLEX_MIN_PROPORTION,
};
use crate::detector::{CandidateMode, DetectConfig, Scorer, ThresholdPopulation, DEFAULT_COLEX_PENALTY, DEFAULT_COSINE_WEIGHT};
use crate::encoder::{EncoderConfig, EncodingMode, InputEncoder};
use crate::error::{read_to_string, Error, Result};
use crate::phon::{AsjpMapping, FeatureTable, FEATURE_DIM};
use crate::pmialign::{NedNormalization, PmiMatrix};
use crate::trainer::{AugmentConfig, TrainConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub wordlist: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub asjp_map: Option<PathBuf>,
    pub pmi: Option<PathBuf>,
    pub colex: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: PathBuf,
    pub donor: Option<String>,
    pub mode: CandidateMode,
    pub cosine_weight: f64,
    pub threshold: Option<f64>,
    pub colex_min_proportion: f64,
    pub colex_penalty: f64,
    pub threshold_population: ThresholdPopulation,
    pub ned_normalization: NedNormalization,
    pub unknown_symbols: UnknownSymbolPolicy,
    pub runs: usize,
    pub workers: usize,
    pub encoder: EncoderConfig,
    /// Also holds the run seed.
    pub train: TrainConfig,
    pub augment: AugmentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            wordlist: None,
            features: None,
            asjp_map: None,
            pmi: None,
            colex: None,
            checkpoint: None,
            out: PathBuf::from("out"),
            donor: None,
            mode: CandidateMode::DonorFixed,
            cosine_weight: DEFAULT_COSINE_WEIGHT,
            threshold: None,
            colex_min_proportion: DEFAULT_COLEX_MIN_PROPORTION,
            colex_penalty: DEFAULT_COLEX_PENALTY,
            threshold_population: ThresholdPopulation::AllPairs,
            ned_normalization: NedNormalization::MaxLength,
            unknown_symbols: UnknownSymbolPolicy::Error,
            runs: 1,
            workers: 1,
            encoder: EncoderConfig::default(),
            train: TrainConfig::default(),
            augment: AugmentConfig::default(),
        }
    }
}

/// Every key accepted by [`RunConfig::set`], in canonical order.
pub const KEYS: &[&str] = &[
    "wordlist",
    "features",
    "asjp_map",
    "pmi",
    "colex",
    "checkpoint",
    "out",
    "donor",
    "mode",
    "cosine_weight",
    "threshold",
    "colex_min_proportion",
    "colex_penalty",
    "threshold_population",
    "ned_normalization",
    "unknown_symbols",
    "seed",
    "runs",
    "workers",
    "hidden_dim",
    "n_layers",
    "n_heads",
    "ff_dim",
    "feature_dropout",
    "attention_dropout",
    "projection_head",
    "encoding",
    "temperature",
    "learning_rate",
    "weight_decay",
    "batch_size",
    "epochs",
    "sampler",
    "noise_prob",
    "noise_sigma",
    "duplication_prob",
    "swap_prob",
    "deletion_prob",
    "min_len_for_destructive",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {value:?}"))),
    }
}

fn optional(value: &str) -> Option<&str> {
    match value {
        "" | "none" => None,
        v => Some(v),
    }
}

impl RunConfig {
    pub fn seed(&self) -> u64 {
        self.train.seed
    }

    /// Sets one key. Dashes in `key` are read as underscores.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        let k = key.as_str();
        let path = |v: &str| optional(v).map(PathBuf::from);
        match k {
            "wordlist" => self.wordlist = path(value),
            "features" => self.features = path(value),
            "asjp_map" => self.asjp_map = path(value),
            "pmi" => self.pmi = path(value),
            "colex" => self.colex = path(value),
            "checkpoint" => self.checkpoint = path(value),
            "out" => self.out = PathBuf::from(value),
            "donor" => self.donor = optional(value).map(str::to_string),
            "mode" => self.mode = value.parse()?,
            "cosine_weight" => self.cosine_weight = parse(k, value)?,
            "threshold" => self.threshold = optional(value).map(|v| parse(k, v)).transpose()?,
            "colex_min_proportion" => self.colex_min_proportion = parse(k, value)?,
            "colex_penalty" => self.colex_penalty = parse(k, value)?,
            "threshold_population" => self.threshold_population = value.parse()?,
            "ned_normalization" => self.ned_normalization = value.parse()?,
            "unknown_symbols" => self.unknown_symbols = value.parse()?,
            "seed" => self.train.seed = parse(k, value)?,
            "runs" => self.runs = parse(k, value)?,
            "workers" => self.workers = parse(k, value)?,
            "hidden_dim" => self.encoder.hidden_dim = parse(k, value)?,
            "n_layers" => self.encoder.n_layers = parse(k, value)?,
            "n_heads" => self.encoder.n_heads = parse(k, value)?,
            "ff_dim" => self.encoder.ff_dim = parse(k, value)?,
            "feature_dropout" => self.encoder.feature_dropout = parse(k, value)?,
            "attention_dropout" => self.encoder.attention_dropout = parse(k, value)?,
            "projection_head" => self.encoder.use_projection_head = parse_bool(k, value)?,
            "encoding" => self.encoder.encoding_mode = value.parse()?,
            "temperature" => self.train.temperature = parse(k, value)?,
            "learning_rate" => self.train.learning_rate = parse(k, value)?,
            "weight_decay" => self.train.weight_decay = parse(k, value)?,
            "batch_size" => self.train.batch_size = parse(k, value)?,
            "epochs" => self.train.epochs = parse(k, value)?,
            "sampler" => self.train.sampler = value.parse()?,
            "noise_prob" => self.augment.noise_prob = parse(k, value)?,
            "noise_sigma" => self.augment.noise_sigma = parse(k, value)?,
            "duplication_prob" => self.augment.duplication_prob = parse(k, value)?,
            "swap_prob" => self.augment.swap_prob = parse(k, value)?,
            "deletion_prob" => self.augment.deletion_prob = parse(k, value)?,
            "min_len_for_destructive" => self.augment.min_len_for_destructive = parse(k, value)?,
            _ => return Err(Error::UnknownKey(key)),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Result<String> {
        let p = |v: &Option<PathBuf>| v.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let key = key.replace('-', "_");
        Ok(match key.as_str() {
            "wordlist" => p(&self.wordlist),
            "features" => p(&self.features),
            "asjp_map" => p(&self.asjp_map),
            "pmi" => p(&self.pmi),
            "colex" => p(&self.colex),
            "checkpoint" => p(&self.checkpoint),
            "out" => self.out.display().to_string(),
            "donor" => self.donor.clone().unwrap_or_default(),
            "mode" => self.mode.to_string(),
            "cosine_weight" => self.cosine_weight.to_string(),
            "threshold" => self.threshold.map(|t| t.to_string()).unwrap_or_default(),
            "colex_min_proportion" => self.colex_min_proportion.to_string(),
            "colex_penalty" => self.colex_penalty.to_string(),
            "threshold_population" => self.threshold_population.to_string(),
            "ned_normalization" => self.ned_normalization.to_string(),
            "unknown_symbols" => self.unknown_symbols.to_string(),
            "seed" => self.train.seed.to_string(),
            "runs" => self.runs.to_string(),
            "workers" => self.workers.to_string(),
            "hidden_dim" => self.encoder.hidden_dim.to_string(),
            "n_layers" => self.encoder.n_layers.to_string(),
            "n_heads" => self.encoder.n_heads.to_string(),
            "ff_dim" => self.encoder.ff_dim.to_string(),
            "feature_dropout" => self.encoder.feature_dropout.to_string(),
            "attention_dropout" => self.encoder.attention_dropout.to_string(),
            "projection_head" => self.encoder.use_projection_head.to_string(),
            "encoding" => self.encoder.encoding_mode.to_string(),
            "temperature" => self.train.temperature.to_string(),
            "learning_rate" => self.train.learning_rate.to_string(),
            "weight_decay" => self.train.weight_decay.to_string(),
            "batch_size" => self.train.batch_size.to_string(),
            "epochs" => self.train.epochs.to_string(),
            "sampler" => self.train.sampler.to_string(),
            "noise_prob" => self.augment.noise_prob.to_string(),
            "noise_sigma" => self.augment.noise_sigma.to_string(),
            "duplication_prob" => self.augment.duplication_prob.to_string(),
            "swap_prob" => self.augment.swap_prob.to_string(),
            "deletion_prob" => self.augment.deletion_prob.to_string(),
            "min_len_for_destructive" => self.augment.min_len_for_destructive.to_string(),
            _ => return Err(Error::UnknownKey(key)),
        })
    }

    /// Applies a `key = value` file. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str, source: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(source, i + 1, "expected key = value"))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = read_to_string(path)?;
        self.apply_text(&text, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for k in KEYS {
            let _ = writeln!(out, "{k} = {}", self.get(k).expect("canonical key"));
        }
        out
    }

    /// SHA-256 of the canonical text, first 16 hex digits.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Checks values and that every configured path exists.
    pub fn validate(&self) -> Result<()> {
        let mut encoder = self.encoder.clone();
        if encoder.encoding_mode == EncodingMode::OneHotIpa {
            // the inventory size is only known once data is loaded
            encoder.input_dim = encoder.input_dim.max(1);
        }
        encoder.validate()?;
        self.train.validate()?;
        self.augment.validate()?;
        self.detect_config().validate()?;
        if !(0.0..=1.0).contains(&self.colex_min_proportion) {
            return Err(Error::Config(format!(
                "colex_min_proportion {} is outside [0, 1]",
                self.colex_min_proportion
            )));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.mode == CandidateMode::DonorFixed && self.donor.is_none() && self.wordlist.is_some() {
            return Err(Error::Config("donor_fixed mode needs --donor".into()));
        }
        for (key, path) in [
            ("wordlist", &self.wordlist),
            ("features", &self.features),
            ("asjp_map", &self.asjp_map),
            ("pmi", &self.pmi),
            ("colex", &self.colex),
            ("checkpoint", &self.checkpoint),
        ] {
            if let Some(p) = path {
                if !p.exists() {
                    return Err(Error::Config(format!("{key} path {} does not exist", p.display())));
                }
            }
        }
        Ok(())
    }

    pub fn require<'a>(&self, key: &str, value: &'a Option<PathBuf>) -> Result<&'a Path> {
        value
            .as_deref()
            .ok_or_else(|| Error::Config(format!("missing --{}", key.replace('_', "-"))))
    }

    pub fn roles(&self) -> RoleAssignment {
        match (&self.donor, self.mode) {
            (Some(d), CandidateMode::DonorFixed) => RoleAssignment::donor_fixed(d.clone()),
            _ => RoleAssignment::unrestricted(),
        }
    }

    /// The configured tables, or the bundled ones when none are set.
    pub fn phonology(&self) -> Result<Phonology> {
        let bundled = crate::bundled::phonology();
        Ok(Phonology {
            features: match &self.features {
                Some(p) => FeatureTable::load(p)?,
                None => bundled.features,
            },
            asjp: match &self.asjp_map {
                Some(p) => AsjpMapping::load(p)?,
                None => bundled.asjp,
            },
        })
    }

    pub fn load_wordlist(&self, phonology: &Phonology) -> Result<Wordlist> {
        let wl = Wordlist::load(
            self.require("wordlist", &self.wordlist)?,
            &self.roles(),
            phonology,
            self.unknown_symbols,
        )?;
        if let (Some(d), CandidateMode::DonorFixed) = (&self.donor, self.mode) {
            if wl.role(d).is_none() {
                return Err(Error::Config(format!("donor language {d:?} is not in the wordlist")));
            }
        }
        Ok(wl)
    }

    pub fn pmi_matrix(&self) -> Result<PmiMatrix> {
        match &self.pmi {
            Some(p) => PmiMatrix::load(p),
            None => Ok(crate::bundled::pmi()),
        }
    }

    pub fn colex_network(&self) -> Result<Option<ColexNetwork>> {
        self.colex
            .as_deref()
            .map(|p| ColexNetwork::load(p, self.colex_min_proportion))
            .transpose()
    }

    /// The input encoder for `wordlist`; fixes `encoder.input_dim` to match.
    pub fn input_encoder(&mut self, wordlist: &Wordlist) -> InputEncoder {
        let input = match self.encoder.encoding_mode {
            EncodingMode::FeatureVectors => InputEncoder::Features,
            EncodingMode::OneHotIpa => InputEncoder::one_hot_over(wordlist.forms().iter().flat_map(|f| f.symbols())),
        };
        self.encoder.input_dim = match &input {
            InputEncoder::Features => FEATURE_DIM,
            other => other.input_dim(),
        };
        input
    }

    pub fn detect_config(&self) -> DetectConfig {
        DetectConfig {
            mode: self.mode,
            scorer: Scorer::Combined {
                cosine_weight: self.cosine_weight,
            },
            colex_penalty: self.colex_penalty,
            population: self.threshold_population,
            global_threshold: self.threshold,
            seed: self.train.seed,
            workers: self.workers,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_published_settings() {
        let c = RunConfig::default();
        assert_eq!(c.cosine_weight, 0.25);
        assert_eq!(c.colex_min_proportion, 0.05);
        assert_eq!(c.colex_penalty, 0.1);
        assert_eq!(c.encoder.hidden_dim, 256);
        assert_eq!(c.train.temperature, 0.05);
        assert_eq!(c.train.batch_size, 128);
        assert_eq!(c.encoder.param_count(), 866_304);
    }

    #[test]
    fn every_key_round_trips() {
        let c = RunConfig::default();
        let mut d = RunConfig::default();
        d.apply_text(&c.to_text(), "canonical").unwrap();
        assert_eq!(c, d);
        for k in KEYS {
            let v = c.get(k).unwrap();
            d.set(k, &v).unwrap();
        }
        assert_eq!(c, d);
    }

    #[test]
    fn file_then_set_precedence() {
        let mut c = RunConfig::default();
        c.apply_text("# comment\ntemperature = 0.5\nn-layers=2\n\nprojection_head = false\n", "f")
            .unwrap();
        assert_eq!(c.train.temperature, 0.5);
        assert_eq!(c.encoder.n_layers, 2);
        assert!(!c.encoder.use_projection_head);
        c.set("temperature", "0.1").unwrap();
        assert_eq!(c.train.temperature, 0.1);
        assert_ne!(c.hash(), RunConfig::default().hash());
    }

    #[test]
    fn bad_keys_and_values() {
        let mut c = RunConfig::default();
        match c.set("no_such_key", "1") {
            Err(Error::UnknownKey(k)) => assert_eq!(k, "no_such_key"),
            other => panic!("{other:?}"),
        }
        assert!(c.set("epochs", "four").is_err());
        assert!(c.apply_text("epochs 4", "f").is_err());
        c.set("features", "/definitely/not/here.tsv").unwrap();
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("/definitely/not/here.tsv"), "{err}");
    }
}
