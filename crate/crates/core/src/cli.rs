//! Command-line surface. `main` only parses arguments and calls [`run`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::corpus::{ColexNetwork, Wordlist};
use crate::detector::{
    detect_from_table, explain, hidden_representations, parse_similarity, predictions_tsv, score_pairs,
    similarity_tsv, thresholds, with_pool, Detection, ExplainContext, ScoreTable, ScoringInputs, SimilarityRecord,
    ThresholdPopulation,
};
use crate::encoder::{Checkpoint, InputEncoder};
use crate::error::{read_to_string, Error, Result};
use crate::evalrep::{
    ablate, ablation_tsv, aggregate_runs, evaluate_detection, evaluate_donor_fixed, linear_grid,
    parse_ablation_grid, sweep, sweep_tsv, AblationData, EvalReport, SweepAxis, DEFAULT_ABLATION_GRID,
    REPORT_HEADER,
};
use crate::gmmthresh::{threshold_report_tsv, ThresholdDecision};
use crate::plot::render_svg;
use crate::pmialign::PmiMatrix;
use crate::trainer::train;

#[derive(Parser, Debug)]
#[command(name = "loanword", version, about = "Self-supervised borrowing detection on IPA wordlists")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every command. Unset flags fall back to the config
/// file, then to built-in defaults.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Wordlist TSV (ID, LANGUAGE, CONCEPT, FORM; optional FAMILY, BORROWED, DONOR_LANGUAGE)
    #[arg(long, value_name = "TSV")]
    pub wordlist: Option<PathBuf>,
    /// Phonetic feature table [default: bundled]
    #[arg(long, value_name = "TSV")]
    pub features: Option<PathBuf>,
    /// IPA to ASJP mapping [default: bundled]
    #[arg(long = "asjp-map", value_name = "TSV")]
    pub asjp_map: Option<PathBuf>,
    /// ASJP PMI matrix with gap parameters [default: bundled]
    #[arg(long, value_name = "TSV")]
    pub pmi: Option<PathBuf>,
    /// Colexification proportions (CONCEPT_A, CONCEPT_B, PROPORTION) [default: none]
    #[arg(long, value_name = "TSV")]
    pub colex: Option<PathBuf>,
    /// Donor language in donor_fixed mode
    #[arg(long, value_name = "LANGUAGE")]
    pub donor: Option<String>,
    /// Candidate mode: donor_fixed or cross_family [default: donor_fixed]
    #[arg(long, value_name = "MODE")]
    pub mode: Option<String>,
    /// Weight of cosine similarity in the combined score [default: 0.25]
    #[arg(long = "cosine-weight", value_name = "W")]
    pub cosine_weight: Option<f64>,
    /// Global threshold replacing the automatic per-language thresholds [default: automatic]
    #[arg(long, value_name = "T")]
    pub threshold: Option<f64>,
    /// Random seed [default: 42]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Independent runs (seeds seed, seed+1, ...) [default: 1]
    #[arg(long)]
    pub runs: Option<usize>,
    /// Worker threads [default: 1]
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory [default: out]
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Flat key = value configuration file
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Encoder checkpoint [default: train one from the configuration]
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
    /// Any configuration key, e.g. --set temperature=0.1 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train the encoder and write a checkpoint
    Train {
        #[command(flatten)]
        common: Common,
        /// Training epochs [default: 4]
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Classify every form and write predictions and thresholds
    Detect {
        #[command(flatten)]
        common: Common,
        /// Also write every scored candidate pair
        #[arg(long = "dump-similarities")]
        dump_similarities: bool,
    },
    /// Score predictions against the gold annotation
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Evaluate an existing predictions file instead of running detection
        #[arg(long, value_name = "TSV")]
        predictions: Option<PathBuf>,
    },
    /// Evaluate over a grid of cosine weights or global thresholds
    Sweep {
        #[command(flatten)]
        common: Common,
        /// cosine_weight or global_threshold
        #[arg(long, default_value = "cosine_weight")]
        axis: String,
        /// Comma-separated grid values [default: evenly spaced over 0..1]
        #[arg(long, value_name = "V,V,...")]
        grid: Option<String>,
        /// Points of the default grid [default: 21 for cosine_weight, 20 for global_threshold]
        #[arg(long)]
        points: Option<usize>,
    },
    /// Train and evaluate one configuration per ablation grid row
    Ablate {
        #[command(flatten)]
        common: Common,
        /// Grid file (FACTOR, SETTING, OVERRIDES as k=v;k=v) [default: bundled ablation grid]
        #[arg(long = "grid-file", value_name = "TSV")]
        grid_file: Option<PathBuf>,
    },
    /// Print the alignment and scores behind one form pair
    Explain {
        #[command(flatten)]
        common: Common,
        /// First form ID
        a: String,
        /// Second form ID
        b: String,
    },
    /// Render a score histogram with the mixture fit and threshold as SVG
    Plot {
        #[command(flatten)]
        common: Common,
        /// Similarity dump from detect --dump-similarities [default: score live]
        #[arg(long, value_name = "TSV")]
        similarities: Option<PathBuf>,
        /// Only scores of queries in this language (needs --wordlist)
        #[arg(long)]
        language: Option<String>,
        /// Output SVG [default: OUT/plot.svg]
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Train { common, .. }
            | Command::Detect { common, .. }
            | Command::Evaluate { common, .. }
            | Command::Sweep { common, .. }
            | Command::Ablate { common, .. }
            | Command::Explain { common, .. }
            | Command::Plot { common, .. } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Train { .. } => "train",
            Command::Detect { .. } => "detect",
            Command::Evaluate { .. } => "evaluate",
            Command::Sweep { .. } => "sweep",
            Command::Ablate { .. } => "ablate",
            Command::Explain { .. } => "explain",
            Command::Plot { .. } => "plot",
        }
    }
}

/// Defaults, then the config file, then flags.
pub fn resolve(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(p) = &common.config {
        cfg.apply_file(p)?;
    }
    let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    let flags: [(&str, Option<String>); 14] = [
        ("wordlist", path(&common.wordlist)),
        ("features", path(&common.features)),
        ("asjp_map", path(&common.asjp_map)),
        ("pmi", path(&common.pmi)),
        ("colex", path(&common.colex)),
        ("checkpoint", path(&common.checkpoint)),
        ("out", path(&common.out)),
        ("donor", common.donor.clone()),
        ("mode", common.mode.clone()),
        ("cosine_weight", common.cosine_weight.map(|v| v.to_string())),
        ("threshold", common.threshold.map(|v| v.to_string())),
        ("seed", common.seed.map(|v| v.to_string())),
        ("runs", common.runs.map(|v| v.to_string())),
        ("workers", common.workers.map(|v| v.to_string())),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, &v)?;
        }
    }
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k, v)?;
    }
    Ok(cfg)
}

/// 2 for usage and validation errors, 1 for everything else.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::UnknownKey(_) => 2,
        _ => 1,
    }
}

/// Runs a parsed command line and returns the process exit code, printing
/// failures as one `error:` line on stderr.
pub fn run(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            exit_code(&e)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let mut cfg = resolve(cli.command.common())?;
    let name = cli.command.name();
    match cli.command {
        Command::Train { epochs, .. } => {
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            cfg.validate()?;
            cmd_train(&mut cfg)
        }
        Command::Detect { dump_similarities, .. } => {
            cfg.validate()?;
            cmd_detect(&mut cfg, dump_similarities)
        }
        Command::Evaluate { predictions, .. } => {
            cfg.validate()?;
            cmd_evaluate(&mut cfg, predictions.as_deref())
        }
        Command::Sweep { axis, grid, points, .. } => {
            cfg.validate()?;
            let axis: SweepAxis = axis.parse()?;
            let grid = match grid {
                Some(g) => g
                    .split(',')
                    .map(|v| {
                        v.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::Config(format!("bad grid value {v:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?,
                None => {
                    let n = points.unwrap_or(match axis {
                        SweepAxis::CosineWeight => 21,
                        SweepAxis::GlobalThreshold => 20,
                    });
                    linear_grid(0.0, 1.0, n)
                }
            };
            cmd_sweep(&mut cfg, axis, &grid)
        }
        Command::Ablate { grid_file, .. } => {
            cfg.validate()?;
            let grid = match &grid_file {
                Some(p) => parse_ablation_grid(&read_to_string(p)?, &p.display().to_string())?,
                None => parse_ablation_grid(DEFAULT_ABLATION_GRID, "bundled ablation grid")?,
            };
            cmd_ablate(&cfg, &grid)
        }
        Command::Explain { a, b, .. } => {
            cfg.validate()?;
            let text = cmd_explain(&mut cfg, &a, &b)?;
            println!("{text}");
            Ok(())
        }
        Command::Plot {
            similarities,
            language,
            output,
            ..
        } => {
            cfg.validate()?;
            cmd_plot(&mut cfg, similarities.as_deref(), language.as_deref(), output.as_deref())
        }
    }
    .and_then(|()| write_manifest(&cfg, name))
}

fn write_out(dir: &Path, name: &str, content: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
    log::info!("wrote {}", path.display());
    Ok(path)
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Manifest of a run: command, resolved configuration and resource
/// checksums. The only place a timestamp appears.
pub fn manifest(cfg: &RunConfig, command: &str) -> Result<String> {
    let mut out = String::from("KEY\tVALUE\n");
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let _ = writeln!(out, "command\t{command}");
    let _ = writeln!(out, "code_version\t{}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "timestamp_unix\t{secs}");
    let _ = writeln!(out, "config_hash\t{}", cfg.hash());
    for line in cfg.to_text().lines() {
        if let Some((k, v)) = line.split_once(" = ") {
            let _ = writeln!(out, "config.{k}\t{v}");
        }
    }
    let bundled = [
        ("features", crate::bundled::FEATURES_TSV),
        ("asjp_map", crate::bundled::ASJP_TSV),
        ("pmi", crate::bundled::PMI_TSV),
    ];
    for (key, path) in [
        ("wordlist", &cfg.wordlist),
        ("features", &cfg.features),
        ("asjp_map", &cfg.asjp_map),
        ("pmi", &cfg.pmi),
        ("colex", &cfg.colex),
        ("checkpoint", &cfg.checkpoint),
    ] {
        let sum = match path {
            Some(p) => sha256_hex(&fs::read(p).map_err(|e| Error::io(p, e))?),
            None => match bundled.iter().find(|(k, _)| *k == key) {
                Some((_, text)) => format!("bundled:{}", sha256_hex(text.as_bytes())),
                None => continue,
            },
        };
        let _ = writeln!(out, "sha256.{key}\t{sum}");
    }
    Ok(out)
}

fn write_manifest(cfg: &RunConfig, command: &str) -> Result<()> {
    if command == "explain" {
        return Ok(());
    }
    write_out(&cfg.out, "manifest.tsv", &manifest(cfg, command)?).map(|_| ())
}

/// Data and resources every scoring command needs.
struct Loaded {
    wordlist: Wordlist,
    pmi: PmiMatrix,
    colex: Option<ColexNetwork>,
}

fn load(cfg: &RunConfig) -> Result<Loaded> {
    let phon = cfg.phonology()?;
    Ok(Loaded {
        wordlist: cfg.load_wordlist(&phon)?,
        pmi: cfg.pmi_matrix()?,
        colex: cfg.colex_network()?,
    })
}

fn train_checkpoint(cfg: &RunConfig, wordlist: &Wordlist, seed: u64) -> Result<(Checkpoint, String)> {
    let mut cfg = cfg.clone();
    cfg.train.seed = seed;
    let input = cfg.input_encoder(wordlist);
    let (params, log) = train(wordlist, &input, &cfg.encoder, &cfg.train, &cfg.augment)?;
    Ok((Checkpoint::new(params, seed, &input), log.to_tsv()))
}

/// The configured checkpoint, or one model per run trained from the
/// configuration.
fn models(cfg: &mut RunConfig, wordlist: &Wordlist) -> Result<Vec<(u64, Checkpoint)>> {
    if let Some(p) = &cfg.checkpoint {
        let ckpt = Checkpoint::load(p)?;
        let input = ckpt.input_encoder();
        let mut expected = cfg.encoder.clone();
        if let InputEncoder::OneHot { .. } = input {
            expected.input_dim = input.input_dim();
        }
        ckpt.check_compatible(&expected)?;
        return Ok(vec![(ckpt.seed, ckpt)]);
    }
    log::info!("no checkpoint given; training {} model(s)", cfg.runs);
    let seeds: Vec<u64> = (0..cfg.runs as u64).map(|r| cfg.seed() + r).collect();
    let cfg = &*cfg;
    with_pool(cfg.workers, || {
        seeds
            .par_iter()
            .map(|&s| train_checkpoint(cfg, wordlist, s).map(|(c, _)| (s, c)))
            .collect::<Result<Vec<_>>>()
    })?
}

fn hidden(cfg: &RunConfig, ckpt: &Checkpoint, wordlist: &Wordlist) -> Result<Array2<f32>> {
    hidden_representations(&ckpt.params, &ckpt.input_encoder(), wordlist, cfg.workers)
}

fn table(cfg: &RunConfig, data: &Loaded, hidden: Option<&Array2<f32>>) -> Result<ScoreTable> {
    let inputs = ScoringInputs {
        wordlist: &data.wordlist,
        hidden,
        pmi: Some(&data.pmi),
        colex: data.colex.as_ref(),
        ned_norm: cfg.ned_normalization,
    };
    score_pairs(inputs, cfg.mode, cfg.workers)
}

/// Scores and classifies with the first model; PMI-only runs need none.
fn run_detection(cfg: &mut RunConfig, data: &Loaded) -> Result<(ScoreTable, Detection, Option<Array2<f32>>)> {
    let h = if cfg.cosine_weight > 0.0 {
        let (_, ckpt) = models(cfg, &data.wordlist)?.swap_remove(0);
        Some(hidden(cfg, &ckpt, &data.wordlist)?)
    } else {
        None
    };
    let t = table(cfg, data, h.as_ref())?;
    let d = detect_from_table(&data.wordlist, &t, &cfg.detect_config())?;
    Ok((t, d, h))
}

fn thresholds_tsv(d: &Detection) -> String {
    let decisions: Vec<ThresholdDecision> = d.thresholds.values().cloned().collect();
    threshold_report_tsv(&decisions)
}

pub fn cmd_train(cfg: &mut RunConfig) -> Result<()> {
    let phon = cfg.phonology()?;
    let wl = cfg.load_wordlist(&phon)?;
    let (ckpt, log) = train_checkpoint(cfg, &wl, cfg.seed())?;
    cfg.encoder = ckpt.config().clone();
    let path = write_out(&cfg.out, "checkpoint.txt", &ckpt.to_text())?;
    write_out(&cfg.out, "training_log.tsv", &log)?;
    let mut reuse = cfg.clone();
    reuse.checkpoint = Some(path);
    write_out(&cfg.out, "config.txt", &reuse.to_text())?;
    Ok(())
}

pub fn cmd_detect(cfg: &mut RunConfig, dump: bool) -> Result<()> {
    let data = load(cfg)?;
    let (_, d, _) = run_detection(cfg, &data)?;
    write_out(&cfg.out, "predictions.tsv", &predictions_tsv(&d.predictions))?;
    write_out(&cfg.out, "thresholds.tsv", &thresholds_tsv(&d))?;
    if dump {
        write_out(&cfg.out, "similarities.tsv", &similarity_tsv(&d.records))?;
    }
    Ok(())
}

pub fn cmd_evaluate(cfg: &mut RunConfig, predictions: Option<&Path>) -> Result<()> {
    let data = load(cfg)?;
    let hash = cfg.hash();
    let report = match predictions {
        Some(p) => {
            let preds = crate::detector::parse_predictions(&read_to_string(p)?, &p.display().to_string())?;
            let counts = evaluate_donor_fixed(&data.wordlist, &preds)?;
            EvalReport::from_counts("predictions", &counts, cfg.seed(), &hash)?.to_tsv()
        }
        None => {
            let methods = [("pmi", 0.0), ("cosine", 1.0), ("combined", cfg.cosine_weight)];
            let models = models(cfg, &data.wordlist)?;
            let mut per_method: Vec<Vec<EvalReport>> = vec![Vec::new(); methods.len()];
            for (seed, ckpt) in &models {
                let h = hidden(cfg, ckpt, &data.wordlist)?;
                let t = table(cfg, &data, Some(&h))?;
                for (m, (name, w)) in methods.iter().enumerate() {
                    let mut dc = cfg.detect_config();
                    dc.scorer = crate::detector::Scorer::Combined { cosine_weight: *w };
                    let d = detect_from_table(&data.wordlist, &t, &dc)?;
                    let counts = evaluate_detection(&data.wordlist, &d, cfg.mode)?;
                    per_method[m].push(EvalReport::from_counts(name, &counts, *seed, &hash)?);
                }
            }
            let mut out = String::new();
            for (m, reports) in per_method.iter().enumerate() {
                let agg = aggregate_runs(reports)?;
                let text = agg.to_tsv();
                let mut lines = text.lines();
                if m == 0 {
                    let _ = writeln!(out, "{}", lines.next().unwrap_or_default());
                    let _ = writeln!(out, "{REPORT_HEADER}");
                } else {
                    lines.next();
                }
                for l in lines.skip(1) {
                    let _ = writeln!(out, "{l}");
                }
            }
            out
        }
    };
    write_out(&cfg.out, "report.tsv", &report)?;
    Ok(())
}

pub fn cmd_sweep(cfg: &mut RunConfig, axis: SweepAxis, grid: &[f64]) -> Result<()> {
    let data = load(cfg)?;
    let needs_model = axis == SweepAxis::CosineWeight || cfg.cosine_weight > 0.0;
    let h = if needs_model {
        let (_, ckpt) = models(cfg, &data.wordlist)?.swap_remove(0);
        Some(hidden(cfg, &ckpt, &data.wordlist)?)
    } else {
        None
    };
    let t = table(cfg, &data, h.as_ref())?;
    let rows = sweep(&data.wordlist, &t, &cfg.detect_config(), axis, grid)?;
    write_out(&cfg.out, "sweep.tsv", &sweep_tsv(axis, &rows))?;
    Ok(())
}

pub fn cmd_ablate(cfg: &RunConfig, grid: &[crate::evalrep::AblationCell]) -> Result<()> {
    let data = load(cfg)?;
    let rows = ablate(
        &AblationData {
            wordlist: &data.wordlist,
            pmi: &data.pmi,
            colex: data.colex.as_ref(),
            base: cfg,
        },
        grid,
        cfg.runs,
        cfg.seed(),
        cfg.workers,
    )?;
    let temp = |t: &str| rows.iter().find(|r| r.factor == "Temperature" && r.setting == t).map(|r| r.cosine_f1);
    if let (Some(hi), Some(base)) = (temp("1"), rows.first().map(|r| r.cosine_f1)) {
        if hi > base {
            log::warn!("cosine-only F1 at temperature 1 ({hi:.3}) exceeds the baseline ({base:.3})");
        }
    }
    write_out(&cfg.out, "ablation.tsv", &ablation_tsv(&rows))?;
    Ok(())
}

pub fn cmd_explain(cfg: &mut RunConfig, a: &str, b: &str) -> Result<String> {
    let data = load(cfg)?;
    let (t, d, h) = run_detection(cfg, &data)?;
    let ctx = ExplainContext {
        wordlist: &data.wordlist,
        pmi: &data.pmi,
        hidden: h.as_ref(),
        pmi_scale: t.pmi_scale.as_ref(),
        colex: data.colex.as_ref(),
        cosine_weight: cfg.cosine_weight,
        penalty: cfg.colex_penalty,
        thresholds: Some(&d.thresholds),
    };
    Ok(explain(&ctx, a, b)?.to_string())
}

/// Scores feeding a threshold, grouped the way detection groups them.
fn plot_scores(records: &[SimilarityRecord], population: ThresholdPopulation) -> Vec<f64> {
    match population {
        ThresholdPopulation::AllPairs => records.iter().map(|r| r.combined).collect(),
        ThresholdPopulation::WordMaxima => {
            let mut best: BTreeMap<&str, f64> = BTreeMap::new();
            for r in records {
                let slot = best.entry(r.query_id.as_str()).or_insert(f64::NEG_INFINITY);
                *slot = slot.max(r.combined);
            }
            best.into_values().collect()
        }
    }
}

pub fn cmd_plot(
    cfg: &mut RunConfig,
    similarities: Option<&Path>,
    language: Option<&str>,
    output: Option<&Path>,
) -> Result<()> {
    let (records, wordlist) = match similarities {
        Some(p) => {
            let records = parse_similarity(&read_to_string(p)?, &p.display().to_string())?;
            let wl = match cfg.wordlist {
                Some(_) => Some(cfg.load_wordlist(&cfg.phonology()?)?),
                None => None,
            };
            (records, wl)
        }
        None => {
            let data = load(cfg)?;
            let (_, d, _) = run_detection(cfg, &data)?;
            (d.records, Some(data.wordlist))
        }
    };
    let records: Vec<SimilarityRecord> = match language {
        Some(lang) => {
            let wl = wordlist
                .as_ref()
                .ok_or_else(|| Error::Config("--language needs --wordlist".into()))?;
            records
                .into_iter()
                .filter(|r| wl.get(&r.query_id).is_some_and(|f| f.language == lang))
                .collect()
        }
        None => records,
    };
    let scores = plot_scores(&records, cfg.threshold_population);
    if scores.is_empty() {
        return Err(Error::Invalid("no similarity scores to plot".into()));
    }
    let label = language.unwrap_or("all languages").to_string();
    let samples: BTreeMap<String, Vec<f64>> = [(label.clone(), scores.clone())].into();
    let decision = thresholds(&samples, cfg.threshold, cfg.seed(), 1)?
        .remove(&label)
        .expect("threshold for the only language");
    let svg = render_svg(&scores, &decision, &label)?;
    match output {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            fs::write(p, svg).map_err(|e| Error::io(p, e))?;
        }
        None => {
            let name = match language {
                Some(l) => format!("plot_{l}.svg"),
                None => "plot.svg".into(),
            };
            write_out(&cfg.out, &name, &svg)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_line_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn help_defaults_match_config_defaults() {
        let d = RunConfig::default();
        let mut cmd = Cli::command();
        let help = cmd
            .find_subcommand_mut("detect")
            .expect("detect exists")
            .render_long_help()
            .to_string();
        for (flag, default) in [
            ("--cosine-weight", d.cosine_weight.to_string()),
            ("--mode", d.mode.to_string()),
            ("--seed", d.seed().to_string()),
            ("--runs", d.runs.to_string()),
            ("--workers", d.workers.to_string()),
            ("--out", d.out.display().to_string()),
        ] {
            let at = help.find(flag).unwrap_or_else(|| panic!("{flag} missing"));
            let section = &help[at..];
            let end = section.find("\n  -").unwrap_or(section.len());
            assert!(
                section[..end].contains(&format!("[default: {default}]")),
                "{flag}: {}",
                &section[..end]
            );
        }
        let train_help = cmd.find_subcommand_mut("train").unwrap().render_long_help().to_string();
        assert!(train_help.contains(&format!("[default: {}]", d.train.epochs)));
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.cfg");
        fs::write(&file, "cosine_weight = 0.5\ntemperature = 0.2\n").unwrap();
        let common = Common {
            config: Some(file),
            cosine_weight: Some(0.75),
            set: vec!["epochs=2".into()],
            ..Common::default()
        };
        let cfg = resolve(&common).unwrap();
        assert_eq!(cfg.cosine_weight, 0.75);
        assert_eq!(cfg.train.temperature, 0.2);
        assert_eq!(cfg.train.epochs, 2);
        let bad = Common {
            set: vec!["nope=1".into()],
            ..Common::default()
        };
        assert_eq!(exit_code(&resolve(&bad).unwrap_err()), 2);
    }

    #[test]
    fn plot_scores_by_population() {
        let rec = |q: &str, s: f64| SimilarityRecord {
            query_id: q.into(),
            candidate_id: "c".into(),
            same_concept: true,
            cosine: None,
            pmi_scaled: None,
            combined: s,
            penalty_applied: false,
        };
        let rs = [rec("a", 0.1), rec("a", 0.4), rec("b", 0.2)];
        assert_eq!(plot_scores(&rs, ThresholdPopulation::AllPairs).len(), 3);
        assert_eq!(plot_scores(&rs, ThresholdPopulation::WordMaxima), vec![0.4, 0.2]);
    }
}
