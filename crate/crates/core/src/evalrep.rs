//! Metrics, evaluation protocols, multi-run aggregation, sweeps and
//! ablations.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::corpus::{ColexNetwork, Wordlist};
use crate::detector::{
    detect, detect_from_table, hidden_representations, score_pairs, with_pool, CandidateMode, DetectConfig,
    Detection, Prediction, Scorer, ScoreTable, ScoringInputs, SimilarityRecord,
};
use crate::error::{Error, Result};
use crate::pmialign::PmiMatrix;
use crate::trainer::train;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

impl std::ops::AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.tn += o.tn;
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

impl Metrics {
    fn as_array(&self) -> [f64; 4] {
        [self.precision, self.recall, self.f1, self.accuracy]
    }

    fn from_array(a: [f64; 4]) -> Self {
        Self {
            precision: a[0],
            recall: a[1],
            f1: a[2],
            accuracy: a[3],
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall, F1 and accuracy; a zero denominator gives 0.
pub fn metrics(c: &ConfusionCounts) -> Result<Metrics> {
    if c.total() == 0 {
        return Err(Error::Invalid("metrics of an empty confusion table".into()));
    }
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Metrics {
        precision,
        recall,
        f1,
        accuracy: ratio(c.tp + c.tn, c.total()),
    })
}

/// Per-language counts where a hit needs both the right status and the
/// right donor language. A flagged borrowing attributed to the wrong donor
/// counts as a false positive and a false negative.
pub fn evaluate_donor_fixed(
    wordlist: &Wordlist,
    predictions: &[Prediction],
) -> Result<BTreeMap<String, ConfusionCounts>> {
    let mut out: BTreeMap<String, ConfusionCounts> = BTreeMap::new();
    for p in predictions {
        let form = wordlist.get(&p.id).ok_or_else(|| Error::UnknownId(p.id.clone()))?;
        let gold = form.gold_borrowed.ok_or_else(|| Error::MissingGold(p.id.clone()))?;
        let c = out.entry(p.language.clone()).or_default();
        match (p.predicted_borrowed, gold) {
            (true, true) => {
                let predicted_donor = p.best_candidate.as_ref().map(|b| b.language.as_str());
                // no recorded donor: status alone decides
                let donor_ok = match &form.gold_donor_language {
                    Some(d) => predicted_donor == Some(d.as_str()),
                    None => true,
                };
                if donor_ok {
                    c.tp += 1;
                } else {
                    c.fp += 1;
                    c.fn_ += 1;
                }
            }
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(out)
}

/// Gold label of an unordered form pair: borrowed when either form is a
/// borrowing from the other's language. `None` when a needed annotation
/// is missing.
pub fn pair_gold(wordlist: &Wordlist, a: &str, b: &str) -> Option<bool> {
    let fa = wordlist.get(a)?;
    let fb = wordlist.get(b)?;
    let from = |x: &crate::corpus::WordForm, y: &crate::corpus::WordForm| match x.gold_borrowed? {
        false => Some(false),
        true => Some(x.gold_donor_language.as_deref()? == y.language),
    };
    match (from(fa, fb), from(fb, fa)) {
        (Some(true), _) | (_, Some(true)) => Some(true),
        (Some(false), Some(false)) => Some(false),
        _ => None,
    }
}

/// Confusion counts over unordered pairs. A pair scored in both directions
/// is predicted borrowed if either direction is above its threshold.
fn count_pairs(
    records: &[SimilarityRecord],
    gold: impl Fn(&str, &str) -> Option<bool>,
    threshold: impl Fn(&SimilarityRecord) -> Option<f64>,
) -> Result<ConfusionCounts> {
    let mut predicted: BTreeMap<(&str, &str), bool> = BTreeMap::new();
    for r in records {
        let key = if r.query_id <= r.candidate_id {
            (r.query_id.as_str(), r.candidate_id.as_str())
        } else {
            (r.candidate_id.as_str(), r.query_id.as_str())
        };
        let above = threshold(r).is_some_and(|t| r.combined > t);
        *predicted.entry(key).or_insert(false) |= above;
    }
    let mut c = ConfusionCounts::default();
    for ((a, b), pred) in predicted {
        let label = gold(a, b).ok_or_else(|| Error::MissingGold(format!("{a}/{b}")))?;
        match (pred, label) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// Pairwise protocol: every scored pair above `threshold` is a predicted
/// borrowing.
pub fn evaluate_all_pairs(
    records: &[SimilarityRecord],
    gold: impl Fn(&str, &str) -> Option<bool>,
    threshold: f64,
) -> Result<ConfusionCounts> {
    count_pairs(records, gold, |_| Some(threshold))
}

/// Counts for a detection run under the protocol matching its mode:
/// per-language form counts for donor_fixed, a single pooled pair table
/// keyed `ALL` for cross_family.
pub fn evaluate_detection(
    wordlist: &Wordlist,
    detection: &Detection,
    mode: CandidateMode,
) -> Result<BTreeMap<String, ConfusionCounts>> {
    match mode {
        CandidateMode::DonorFixed => evaluate_donor_fixed(wordlist, &detection.predictions),
        CandidateMode::CrossFamily => {
            let lang_of: HashMap<&str, &str> = wordlist
                .forms()
                .iter()
                .map(|f| (f.id.as_str(), f.language.as_str()))
                .collect();
            let c = count_pairs(
                &detection.records,
                |a, b| pair_gold(wordlist, a, b),
                |r| {
                    let lang = lang_of.get(r.query_id.as_str())?;
                    detection.thresholds.get(*lang).map(|d| d.value)
                },
            )?;
            Ok([(ALL.to_string(), c)].into())
        }
    }
}

pub const ALL: &str = "ALL";

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub method: String,
    pub supervision: String,
    pub language: String,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
    /// Population standard deviation across runs.
    pub std: Option<Metrics>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    /// Per-language rows followed by the aggregate row.
    pub rows: Vec<EvalRow>,
    pub seeds: Vec<u64>,
    pub config_hash: String,
}

impl EvalReport {
    /// Builds per-language rows plus an `ALL` row over the summed counts.
    pub fn from_counts(
        method: &str,
        per_language: &BTreeMap<String, ConfusionCounts>,
        seed: u64,
        config_hash: &str,
    ) -> Result<Self> {
        let mut rows = Vec::new();
        let mut total = ConfusionCounts::default();
        for (lang, c) in per_language {
            if lang != ALL {
                rows.push(row(method, lang, *c)?);
            }
            total += *c;
        }
        rows.push(row(method, ALL, total)?);
        Ok(Self {
            rows,
            seeds: vec![seed],
            config_hash: config_hash.to_string(),
        })
    }

    pub fn aggregate(&self) -> &EvalRow {
        self.rows.last().expect("report has an aggregate row")
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "# seeds={} config={}", seeds.join(","), self.config_hash);
        out.push_str(REPORT_HEADER);
        out.push('\n');
        for r in &self.rows {
            write_row(&mut out, r);
        }
        out
    }
}

pub const REPORT_HEADER: &str = "METHOD\tSUPERVISION\tLANGUAGE\tTP\tFP\tFN\tTN\tPRECISION\tRECALL\tF1\tACCURACY\tSTD_PRECISION\tSTD_RECALL\tSTD_F1\tSTD_ACCURACY";

fn write_row(out: &mut String, r: &EvalRow) {
    let m = r.metrics;
    let s = r.std.unwrap_or_default();
    let _ = writeln!(
        out,
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
        r.method,
        r.supervision,
        r.language,
        r.counts.tp,
        r.counts.fp,
        r.counts.fn_,
        r.counts.tn,
        m.precision,
        m.recall,
        m.f1,
        m.accuracy,
        s.precision,
        s.recall,
        s.f1,
        s.accuracy
    );
}

fn row(method: &str, language: &str, counts: ConfusionCounts) -> Result<EvalRow> {
    Ok(EvalRow {
        method: method.to_string(),
        supervision: "unsupervised".into(),
        language: language.to_string(),
        counts,
        metrics: metrics(&counts)?,
        std: None,
    })
}

/// Mean and population standard deviation of every metric across runs.
/// Counts are summed.
pub fn aggregate_runs(reports: &[EvalReport]) -> Result<EvalReport> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Invalid("no reports to aggregate".into()))?;
    for r in reports {
        let same = r.rows.len() == first.rows.len()
            && r.rows
                .iter()
                .zip(&first.rows)
                .all(|(a, b)| a.method == b.method && a.language == b.language);
        if !same {
            return Err(Error::Shape("reports cover different rows".into()));
        }
    }
    let n = reports.len() as f64;
    let rows = (0..first.rows.len())
        .map(|i| {
            let values: Vec<[f64; 4]> = reports.iter().map(|r| r.rows[i].metrics.as_array()).collect();
            let mut mean = [0.0; 4];
            let mut std = [0.0; 4];
            for k in 0..4 {
                mean[k] = values.iter().map(|v| v[k]).sum::<f64>() / n;
                std[k] = (values.iter().map(|v| (v[k] - mean[k]).powi(2)).sum::<f64>() / n).sqrt();
            }
            let mut counts = ConfusionCounts::default();
            for r in reports {
                counts += r.rows[i].counts;
            }
            EvalRow {
                counts,
                metrics: Metrics::from_array(mean),
                std: Some(Metrics::from_array(std)),
                ..first.rows[i].clone()
            }
        })
        .collect();
    Ok(EvalReport {
        rows,
        seeds: reports.iter().flat_map(|r| r.seeds.iter().copied()).collect(),
        config_hash: first.config_hash.clone(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    CosineWeight,
    GlobalThreshold,
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepAxis::CosineWeight => "cosine_weight",
            SweepAxis::GlobalThreshold => "global_threshold",
        })
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine_weight" => Ok(Self::CosineWeight),
            "global_threshold" | "threshold" => Ok(Self::GlobalThreshold),
            other => Err(Error::Config(format!("unknown sweep axis {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
}

impl SweepRow {
    /// Precision is undefined when nothing was flagged.
    pub fn precision_defined(&self) -> bool {
        self.counts.tp + self.counts.fp > 0
    }
}

fn configure(base: &DetectConfig, axis: SweepAxis, value: f64) -> DetectConfig {
    let mut cfg = base.clone();
    match axis {
        SweepAxis::CosineWeight => cfg.scorer = Scorer::Combined { cosine_weight: value },
        SweepAxis::GlobalThreshold => cfg.global_threshold = Some(value),
    }
    cfg.workers = 1;
    cfg
}

fn sweep_row(wordlist: &Wordlist, detection: &Detection, mode: CandidateMode, value: f64) -> Result<SweepRow> {
    let mut counts = ConfusionCounts::default();
    for c in evaluate_detection(wordlist, detection, mode)?.values() {
        counts += *c;
    }
    Ok(SweepRow {
        value,
        counts,
        metrics: metrics(&counts)?,
    })
}

/// One evaluation per grid value over cached pair scores; only weighting,
/// thresholds and classification are recomputed.
pub fn sweep(
    wordlist: &Wordlist,
    table: &ScoreTable,
    base: &DetectConfig,
    axis: SweepAxis,
    grid: &[f64],
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    with_pool(base.workers, || {
        grid.par_iter()
            .map(|&v| {
                let d = detect_from_table(wordlist, table, &configure(base, axis, v))?;
                sweep_row(wordlist, &d, base.mode, v)
            })
            .collect::<Result<Vec<_>>>()
    })?
}

/// The same sweep with every grid value scored from scratch.
pub fn sweep_uncached(
    inputs: ScoringInputs<'_>,
    base: &DetectConfig,
    axis: SweepAxis,
    grid: &[f64],
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    grid.iter()
        .map(|&v| {
            let d = detect(inputs, &configure(base, axis, v))?;
            sweep_row(inputs.wordlist, &d, base.mode, v)
        })
        .collect()
}

pub fn sweep_tsv(axis: SweepAxis, rows: &[SweepRow]) -> String {
    let mut out = String::from("AXIS\tVALUE\tTP\tFP\tFN\tTN\tPRECISION\tRECALL\tF1\tACCURACY\n");
    for r in rows {
        let m = r.metrics;
        let _ = writeln!(
            out,
            "{axis}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            r.value, r.counts.tp, r.counts.fp, r.counts.fn_, r.counts.tn, m.precision, m.recall, m.f1, m.accuracy
        );
    }
    out
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// A named set of configuration overrides.
#[derive(Clone, Debug, PartialEq)]
pub struct AblationCell {
    pub factor: String,
    pub setting: String,
    pub overrides: Vec<(String, String)>,
}

pub const DEFAULT_ABLATION_GRID: &str = crate::bundled::ABLATION_GRID_TSV;

/// Reads `FACTOR  SETTING  OVERRIDES` rows, overrides as `k=v;k=v`.
pub fn parse_ablation_grid(text: &str, source: &str) -> Result<Vec<AblationCell>> {
    let mut cells = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') || (i == 0 && line.starts_with("FACTOR")) {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::parse(source, i + 1, format!("expected 3 columns, got {}", cols.len())));
        }
        let overrides = cols[2]
            .split(';')
            .filter(|s| !s.trim().is_empty())
            .map(|kv| {
                kv.split_once('=')
                    .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                    .ok_or_else(|| Error::parse(source, i + 1, format!("override {kv:?} is not key=value")))
            })
            .collect::<Result<_>>()?;
        cells.push(AblationCell {
            factor: cols[0].to_string(),
            setting: cols[1].to_string(),
            overrides,
        });
    }
    Ok(cells)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub factor: String,
    pub setting: String,
    pub cosine_f1: f64,
    pub cosine_f1_std: f64,
    pub combined_f1: f64,
    pub combined_f1_std: f64,
}

/// Fixed inputs of an ablation: data, alignment resources and the base
/// configuration every cell's overrides apply to.
pub struct AblationData<'a> {
    pub wordlist: &'a Wordlist,
    pub pmi: &'a PmiMatrix,
    pub colex: Option<&'a ColexNetwork>,
    pub base: &'a RunConfig,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
}

/// F1 of the cosine-only and the combined scorer for one trained model.
fn evaluate_cell(data: &AblationData<'_>, cfg: &RunConfig) -> Result<(f64, f64)> {
    let mut cfg = cfg.clone();
    let input = cfg.input_encoder(data.wordlist);
    let (params, _) = train(data.wordlist, &input, &cfg.encoder, &cfg.train, &cfg.augment)?;
    let hidden = hidden_representations(&params, &input, data.wordlist, 1)?;
    let inputs = ScoringInputs {
        wordlist: data.wordlist,
        hidden: Some(&hidden),
        pmi: Some(data.pmi),
        colex: data.colex,
        ned_norm: cfg.ned_normalization,
    };
    let mut detect_cfg = cfg.detect_config();
    detect_cfg.workers = 1;
    let table = score_pairs(inputs, detect_cfg.mode, 1)?;
    let f1 = |w: f64| -> Result<f64> {
        let d = detect_from_table(data.wordlist, &table, &configure(&detect_cfg, SweepAxis::CosineWeight, w))?;
        Ok(sweep_row(data.wordlist, &d, detect_cfg.mode, w)?.metrics.f1)
    };
    Ok((f1(1.0)?, f1(cfg.cosine_weight)?))
}

/// Trains and evaluates the baseline and every cell over `runs` seeds
/// `seed_base, seed_base + 1, …`. All overrides are checked before any
/// training starts.
pub fn ablate(
    data: &AblationData<'_>,
    grid: &[AblationCell],
    runs: usize,
    seed_base: u64,
    workers: usize,
) -> Result<Vec<AblationRow>> {
    if runs == 0 {
        return Err(Error::Config("runs must be at least 1".into()));
    }
    let baseline = AblationCell {
        factor: "-".into(),
        setting: "Original".into(),
        overrides: Vec::new(),
    };
    let cells: Vec<&AblationCell> = std::iter::once(&baseline).chain(grid).collect();
    let configs: Vec<RunConfig> = cells
        .iter()
        .map(|cell| {
            let mut cfg = data.base.clone();
            for (k, v) in &cell.overrides {
                cfg.set(k, v)?;
            }
            cfg.validate()?;
            Ok(cfg)
        })
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| (0..runs as u64).map(move |r| (c, seed_base + r)))
        .collect();
    let results: Vec<(f64, f64)> = with_pool(workers, || {
        jobs.par_iter()
            .map(|&(c, seed)| {
                let mut cfg = configs[c].clone();
                cfg.train.seed = seed;
                evaluate_cell(data, &cfg)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(cells
        .iter()
        .enumerate()
        .map(|(c, cell)| {
            let cell_results = &results[c * runs..(c + 1) * runs];
            let cos: Vec<f64> = cell_results.iter().map(|r| r.0).collect();
            let comb: Vec<f64> = cell_results.iter().map(|r| r.1).collect();
            let (cosine_f1, cosine_f1_std) = mean_std(&cos);
            let (combined_f1, combined_f1_std) = mean_std(&comb);
            AblationRow {
                factor: cell.factor.clone(),
                setting: cell.setting.clone(),
                cosine_f1,
                cosine_f1_std,
                combined_f1,
                combined_f1_std,
            }
        })
        .collect())
}

pub fn ablation_tsv(rows: &[AblationRow]) -> String {
    let mut out = String::from("FACTOR\tSETTING\tCOSINE_F1\tSTD_COSINE_F1\tCOMBINED_F1\tSTD_COMBINED_F1\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            r.factor, r.setting, r.cosine_f1, r.cosine_f1_std, r.combined_f1, r.combined_f1_std
        );
    }
    out
}
