//! Candidate generation, similarity scoring and borrowing classification.
//!
//! Scoring is split in two stages so sweeps can reuse the expensive part:
//! [`score_pairs`] computes cosine, raw PMI and NED once per candidate pair,
//! and [`ScoreTable::records`] combines them under a given weighting.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use ndarray::{s, Array2, ArrayView1};
use rayon::prelude::*;

use crate::corpus::{ColexNetwork, Role, Wordlist};
use crate::encoder::{encode, InputEncoder, ModelParams};
use crate::error::{Error, Result};
use crate::gmmthresh::{auto_threshold, fallback_threshold, ThresholdDecision, ThresholdMethod, MIN_AUTO_SAMPLES};
use crate::pmialign::{align, align_score, ned_similarity, scale_scores, Alignment, NedNormalization, PmiMatrix, ScaledScoreSet};

pub const DEFAULT_COSINE_WEIGHT: f64 = 0.25;
pub const DEFAULT_COLEX_PENALTY: f64 = 0.1;
const ENCODE_CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CandidateMode {
    /// Candidates are the donor language's forms.
    #[default]
    DonorFixed,
    /// Candidates are all forms of other families.
    CrossFamily,
}

impl fmt::Display for CandidateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CandidateMode::DonorFixed => "donor_fixed",
            CandidateMode::CrossFamily => "cross_family",
        })
    }
}

impl FromStr for CandidateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "donor_fixed" => Ok(Self::DonorFixed),
            "cross_family" => Ok(Self::CrossFamily),
            other => Err(Error::Config(format!("unknown candidate mode {other:?}"))),
        }
    }
}

/// How a candidate pair is scored.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scorer {
    /// `w·cosine + (1 − w)·scaled PMI`.
    Combined { cosine_weight: f64 },
    /// Normalized edit distance similarity over segments.
    Ned(NedNormalization),
}

impl Default for Scorer {
    fn default() -> Self {
        Scorer::Combined {
            cosine_weight: DEFAULT_COSINE_WEIGHT,
        }
    }
}

impl Scorer {
    pub fn name(&self) -> String {
        match self {
            Scorer::Combined { cosine_weight } if *cosine_weight == 0.0 => "pmi".into(),
            Scorer::Combined { cosine_weight } if *cosine_weight == 1.0 => "cosine".into(),
            Scorer::Combined { cosine_weight } => format!("combined_{cosine_weight}"),
            Scorer::Ned(_) => "ned".into(),
        }
    }
}

/// Which scores feed a language's automatic threshold.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ThresholdPopulation {
    #[default]
    AllPairs,
    WordMaxima,
}

impl fmt::Display for ThresholdPopulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ThresholdPopulation::AllPairs => "all_pairs",
            ThresholdPopulation::WordMaxima => "word_maxima",
        })
    }
}

impl FromStr for ThresholdPopulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all_pairs" => Ok(Self::AllPairs),
            "word_maxima" => Ok(Self::WordMaxima),
            other => Err(Error::Config(format!("unknown threshold population {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectConfig {
    pub mode: CandidateMode,
    pub scorer: Scorer,
    pub colex_penalty: f64,
    pub population: ThresholdPopulation,
    /// Overrides every per-language threshold.
    pub global_threshold: Option<f64>,
    pub seed: u64,
    pub workers: usize,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            mode: CandidateMode::DonorFixed,
            scorer: Scorer::default(),
            colex_penalty: DEFAULT_COLEX_PENALTY,
            population: ThresholdPopulation::AllPairs,
            global_threshold: None,
            seed: 42,
            workers: 1,
        }
    }
}

impl DetectConfig {
    pub fn validate(&self) -> Result<()> {
        if let Scorer::Combined { cosine_weight } = self.scorer {
            if !(0.0..=1.0).contains(&cosine_weight) {
                return Err(Error::Config(format!("cosine weight {cosine_weight} is outside [0, 1]")));
            }
        }
        if !self.colex_penalty.is_finite() {
            return Err(Error::Config("colexification penalty must be finite".into()));
        }
        if let Some(t) = self.global_threshold {
            if !t.is_finite() {
                return Err(Error::Config(format!("threshold {t} is not finite")));
            }
        }
        Ok(())
    }
}

pub fn cosine_similarity(u: ArrayView1<f32>, v: ArrayView1<f32>) -> Result<f64> {
    let (mut dot, mut nu, mut nv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v.iter()) {
        let (a, b) = (f64::from(a), f64::from(b));
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Invalid("cosine similarity of a zero vector".into()));
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

pub fn combined_similarity(cosine: f64, pmi_scaled: f64, cosine_weight: f64, cross_concept: bool, penalty: f64) -> f64 {
    let base = cosine_weight * cosine + (1.0 - cosine_weight) * pmi_scaled;
    if cross_concept {
        base - penalty
    } else {
        base
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub index: usize,
    pub cross_concept: bool,
}

/// Forms that `query` may have been borrowed from, sorted by form id.
pub fn candidates(
    wordlist: &Wordlist,
    query: usize,
    colex: Option<&ColexNetwork>,
    mode: CandidateMode,
) -> Vec<Candidate> {
    let by_concept = concept_index(wordlist);
    candidates_indexed(wordlist, &by_concept, query, colex, mode)
}

fn concept_index(wordlist: &Wordlist) -> HashMap<&str, Vec<usize>> {
    let mut map: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, f) in wordlist.forms().iter().enumerate() {
        map.entry(f.concept.as_str()).or_default().push(i);
    }
    map
}

fn candidates_indexed(
    wordlist: &Wordlist,
    by_concept: &HashMap<&str, Vec<usize>>,
    query: usize,
    colex: Option<&ColexNetwork>,
    mode: CandidateMode,
) -> Vec<Candidate> {
    let forms = wordlist.forms();
    let q = &forms[query];
    let mut concepts: Vec<(&str, bool)> = vec![(q.concept.as_str(), false)];
    if let Some(net) = colex {
        concepts.extend(net.related(&q.concept).map(|c| (c, true)));
    }
    let mut out = Vec::new();
    for (concept, cross) in concepts {
        for &i in by_concept.get(concept).map(Vec::as_slice).unwrap_or(&[]) {
            let f = &forms[i];
            if i == query || f.language == q.language {
                continue;
            }
            let admissible = match mode {
                CandidateMode::DonorFixed => wordlist.role(&f.language) == Some(Role::Donor),
                CandidateMode::CrossFamily => f.family() != q.family(),
            };
            if admissible {
                out.push(Candidate {
                    index: i,
                    cross_concept: cross,
                });
            }
        }
    }
    out.sort_by(|a, b| forms[a.index].id.cmp(&forms[b.index].id));
    out
}

/// Forms that are classified: everything outside the donor languages,
/// ordered by form id.
pub fn query_forms(wordlist: &Wordlist, mode: CandidateMode) -> Vec<usize> {
    let mut q: Vec<usize> = (0..wordlist.len())
        .filter(|&i| match mode {
            CandidateMode::DonorFixed => wordlist.role(&wordlist.forms()[i].language) != Some(Role::Donor),
            CandidateMode::CrossFamily => true,
        })
        .collect();
    q.sort_by(|&a, &b| wordlist.forms()[a].id.cmp(&wordlist.forms()[b].id));
    q
}

/// Eval-mode hidden representations of every form, row `i` for form `i`.
pub fn hidden_representations(
    params: &ModelParams<f32>,
    input: &InputEncoder,
    wordlist: &Wordlist,
    workers: usize,
) -> Result<Array2<f32>> {
    let seqs: Vec<Array2<f32>> = wordlist
        .forms()
        .iter()
        .map(|f| input.encode(&f.segments))
        .collect::<Result<_>>()?;
    let parts: Vec<Array2<f32>> = with_pool(workers, || {
        seqs.par_chunks(ENCODE_CHUNK)
            .map(|chunk| encode(params, chunk, ENCODE_CHUNK))
            .collect::<Result<Vec<_>>>()
    })??;
    let mut out = Array2::zeros((wordlist.len(), params.config().hidden_dim));
    for (k, part) in parts.iter().enumerate() {
        let start = k * ENCODE_CHUNK;
        out.slice_mut(s![start..start + part.nrows(), ..]).assign(part);
    }
    Ok(out)
}

pub(crate) fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

/// Per-pair raw scores, independent of weighting and thresholds.
#[derive(Clone, Debug, PartialEq)]
pub struct PairScore {
    pub query: usize,
    pub candidate: usize,
    pub cross_concept: bool,
    pub cosine: Option<f64>,
    pub pmi_raw: Option<f64>,
    pub ned: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTable {
    pub mode: CandidateMode,
    /// Classified forms, in id order.
    pub queries: Vec<usize>,
    /// Grouped by query in `queries` order, candidates in id order.
    pub pairs: Vec<PairScore>,
    /// Min-max scaling of every raw PMI score in this run.
    pub pmi_scale: Option<ScaledScoreSet>,
    pub ned_norm: NedNormalization,
}

/// What scoring may draw on. Hidden representations are needed for any
/// cosine weight above 0, the PMI matrix for any weight below 1.
#[derive(Clone, Copy)]
pub struct ScoringInputs<'a> {
    pub wordlist: &'a Wordlist,
    pub hidden: Option<&'a Array2<f32>>,
    pub pmi: Option<&'a PmiMatrix>,
    pub colex: Option<&'a ColexNetwork>,
    pub ned_norm: NedNormalization,
}

pub fn score_pairs(inputs: ScoringInputs<'_>, mode: CandidateMode, workers: usize) -> Result<ScoreTable> {
    let wl = inputs.wordlist;
    if let Some(h) = inputs.hidden {
        if h.nrows() != wl.len() {
            return Err(Error::Shape(format!(
                "{} hidden rows for {} forms",
                h.nrows(),
                wl.len()
            )));
        }
    }
    let queries = query_forms(wl, mode);
    let by_concept = concept_index(wl);
    let per_query: Vec<Vec<PairScore>> = with_pool(workers, || {
        queries
            .par_iter()
            .map(|&q| {
                candidates_indexed(wl, &by_concept, q, inputs.colex, mode)
                    .into_iter()
                    .map(|c| {
                        let (fq, fc) = (&wl.forms()[q], &wl.forms()[c.index]);
                        let cosine = inputs
                            .hidden
                            .map(|h| cosine_similarity(h.row(q), h.row(c.index)))
                            .transpose()?;
                        let pmi_raw = inputs.pmi.map(|m| align_score(&fq.asjp, &fc.asjp, m)).transpose()?;
                        let ned = ned_similarity(&fq.segments, &fc.segments, inputs.ned_norm);
                        Ok(PairScore {
                            query: q,
                            candidate: c.index,
                            cross_concept: c.cross_concept,
                            cosine,
                            pmi_raw,
                            ned,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let pairs: Vec<PairScore> = per_query.into_iter().flatten().collect();
    let raw: Vec<f64> = pairs.iter().filter_map(|p| p.pmi_raw).collect();
    let pmi_scale = if raw.is_empty() {
        None
    } else {
        let mut set = scale_scores(&raw)?;
        // keep the fitted map, not the per-pair copies
        set.raw.clear();
        set.scaled.clear();
        Some(set)
    };
    Ok(ScoreTable {
        mode,
        queries,
        pairs,
        pmi_scale,
        ned_norm: inputs.ned_norm,
    })
}

/// One scored candidate pair.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityRecord {
    pub query_id: String,
    pub candidate_id: String,
    pub same_concept: bool,
    pub cosine: Option<f64>,
    pub pmi_scaled: Option<f64>,
    pub combined: f64,
    pub penalty_applied: bool,
}

impl ScoreTable {
    pub fn records(&self, wordlist: &Wordlist, scorer: Scorer, penalty: f64) -> Result<Vec<SimilarityRecord>> {
        self.pairs
            .iter()
            .map(|p| {
                let pmi_scaled = match (&self.pmi_scale, p.pmi_raw) {
                    (Some(s), Some(raw)) => Some(s.scale(raw)),
                    _ => None,
                };
                let combined = match scorer {
                    Scorer::Combined { cosine_weight } => {
                        let cos = match p.cosine {
                            Some(c) => c,
                            None if cosine_weight == 0.0 => 0.0,
                            None => return Err(Error::Config("cosine weight > 0 needs hidden representations".into())),
                        };
                        let pmi = match pmi_scaled {
                            Some(v) => v,
                            None if cosine_weight == 1.0 => 0.0,
                            None => return Err(Error::Config("cosine weight < 1 needs a PMI matrix".into())),
                        };
                        combined_similarity(cos, pmi, cosine_weight, p.cross_concept, penalty)
                    }
                    Scorer::Ned(_) => p.ned - if p.cross_concept { penalty } else { 0.0 },
                };
                Ok(SimilarityRecord {
                    query_id: wordlist.forms()[p.query].id.clone(),
                    candidate_id: wordlist.forms()[p.candidate].id.clone(),
                    same_concept: !p.cross_concept,
                    cosine: p.cosine,
                    pmi_scaled,
                    combined,
                    penalty_applied: p.cross_concept,
                })
            })
            .collect()
    }
}

/// Languages that have classified forms, with the scores feeding their
/// thresholds under `population`.
pub fn threshold_samples(
    wordlist: &Wordlist,
    table: &ScoreTable,
    records: &[SimilarityRecord],
    population: ThresholdPopulation,
) -> BTreeMap<String, Vec<f64>> {
    let mut out: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for &q in &table.queries {
        out.entry(wordlist.forms()[q].language.clone()).or_default();
    }
    let mut k = 0;
    while k < table.pairs.len() {
        let q = table.pairs[k].query;
        let start = k;
        while k < table.pairs.len() && table.pairs[k].query == q {
            k += 1;
        }
        let lang = &wordlist.forms()[q].language;
        let scores = records[start..k].iter().map(|r| r.combined);
        let slot = out.entry(lang.clone()).or_default();
        match population {
            ThresholdPopulation::AllPairs => slot.extend(scores),
            ThresholdPopulation::WordMaxima => slot.push(scores.fold(f64::NEG_INFINITY, f64::max)),
        }
    }
    out
}

/// Automatic per-language thresholds, or `global` for every language.
///
/// Languages with fewer than the mixture fit's minimum sample count fall
/// back to mean + std; languages with no scored pairs get no threshold,
/// since none of their forms can be flagged.
pub fn thresholds(
    samples: &BTreeMap<String, Vec<f64>>,
    global: Option<f64>,
    seed: u64,
    workers: usize,
) -> Result<BTreeMap<String, ThresholdDecision>> {
    if let Some(t) = global {
        return Ok(samples
            .keys()
            .map(|l| (l.clone(), ThresholdDecision::manual(l.clone(), t)))
            .collect());
    }
    let entries: Vec<(&String, &Vec<f64>)> = samples.iter().filter(|(_, v)| !v.is_empty()).collect();
    let decided: Vec<ThresholdDecision> = with_pool(workers, || {
        entries
            .par_iter()
            .map(|(lang, xs)| {
                if xs.len() >= MIN_AUTO_SAMPLES {
                    auto_threshold(lang, xs, seed)
                } else {
                    log::info!(
                        "{lang}: {} scores are too few for a mixture fit; using mean + std",
                        xs.len()
                    );
                    let value = if xs.len() >= 2 { fallback_threshold(xs)? } else { xs[0] };
                    Ok(ThresholdDecision {
                        language: lang.to_string(),
                        value,
                        method: ThresholdMethod::FallbackMeanStd,
                        fits: None,
                    })
                }
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(decided.into_iter().map(|d| (d.language.clone(), d)).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct BestCandidate {
    pub id: String,
    pub language: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub id: String,
    pub language: String,
    pub concept: String,
    pub predicted_borrowed: bool,
    pub best_candidate: Option<BestCandidate>,
    pub threshold: Option<f64>,
    pub method: Option<ThresholdMethod>,
}

/// Flags each query whose best candidate scores strictly above its
/// language's threshold. Ties for best go to the smallest candidate id.
pub fn classify_records(
    wordlist: &Wordlist,
    table: &ScoreTable,
    records: &[SimilarityRecord],
    thresholds: &BTreeMap<String, ThresholdDecision>,
) -> Result<Vec<Prediction>> {
    let mut best: HashMap<usize, (f64, usize)> = HashMap::new();
    for (p, r) in table.pairs.iter().zip(records) {
        let forms = wordlist.forms();
        match best.get(&p.query) {
            Some(&(score, cand))
                if score > r.combined || (score == r.combined && forms[cand].id <= forms[p.candidate].id) => {}
            _ => {
                best.insert(p.query, (r.combined, p.candidate));
            }
        }
    }
    table
        .queries
        .iter()
        .map(|&q| {
            let f = &wordlist.forms()[q];
            let decision = thresholds.get(&f.language);
            let best_candidate = best.get(&q).map(|&(score, c)| BestCandidate {
                id: wordlist.forms()[c].id.clone(),
                language: wordlist.forms()[c].language.clone(),
                score,
            });
            let predicted = match (&best_candidate, decision) {
                (Some(b), Some(d)) => b.score > d.value,
                (Some(_), None) => return Err(Error::MissingThreshold(f.language.clone())),
                (None, _) => false,
            };
            Ok(Prediction {
                id: f.id.clone(),
                language: f.language.clone(),
                concept: f.concept.clone(),
                predicted_borrowed: predicted,
                best_candidate,
                threshold: decision.map(|d| d.value),
                method: decision.map(|d| d.method),
            })
        })
        .collect()
}

/// Complete output of one detection run.
#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub records: Vec<SimilarityRecord>,
    pub thresholds: BTreeMap<String, ThresholdDecision>,
    pub predictions: Vec<Prediction>,
}

/// Weighting, thresholding and classification over cached scores.
pub fn detect_from_table(wordlist: &Wordlist, table: &ScoreTable, config: &DetectConfig) -> Result<Detection> {
    config.validate()?;
    let records = table.records(wordlist, config.scorer, config.colex_penalty)?;
    let samples = threshold_samples(wordlist, table, &records, config.population);
    let thresholds = thresholds(&samples, config.global_threshold, config.seed, config.workers)?;
    let predictions = classify_records(wordlist, table, &records, &thresholds)?;
    Ok(Detection {
        records,
        thresholds,
        predictions,
    })
}

/// Scores every candidate pair and classifies every query form.
pub fn detect(inputs: ScoringInputs<'_>, config: &DetectConfig) -> Result<Detection> {
    config.validate()?;
    let table = score_pairs(inputs, config.mode, config.workers)?;
    detect_from_table(inputs.wordlist, &table, config)
}

/// Classification with given thresholds: encodes the wordlist with the
/// checkpoint, scores candidates and compares against `thresholds`.
pub fn classify(
    wordlist: &Wordlist,
    params: &ModelParams<f32>,
    input: &InputEncoder,
    pmi: &PmiMatrix,
    colex: Option<&ColexNetwork>,
    thresholds: &BTreeMap<String, ThresholdDecision>,
    config: &DetectConfig,
) -> Result<(Vec<Prediction>, Vec<SimilarityRecord>)> {
    config.validate()?;
    let hidden = hidden_representations(params, input, wordlist, config.workers)?;
    let inputs = ScoringInputs {
        wordlist,
        hidden: Some(&hidden),
        pmi: Some(pmi),
        colex,
        ned_norm: NedNormalization::default(),
    };
    let table = score_pairs(inputs, config.mode, config.workers)?;
    let records = table.records(wordlist, config.scorer, config.colex_penalty)?;
    let predictions = classify_records(wordlist, &table, &records, thresholds)?;
    Ok((predictions, records))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn predictions_tsv(predictions: &[Prediction]) -> String {
    let mut out = String::from(
        "ID\tLANGUAGE\tCONCEPT\tPREDICTED\tSCORE\tBEST_CANDIDATE_ID\tBEST_CANDIDATE_LANGUAGE\tTHRESHOLD\tMETHOD\n",
    );
    for p in predictions {
        let (score, id, lang) = match &p.best_candidate {
            Some(b) => (b.score.to_string(), b.id.as_str(), b.language.as_str()),
            None => (String::new(), "", ""),
        };
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            p.id,
            p.language,
            p.concept,
            p.predicted_borrowed,
            score,
            id,
            lang,
            opt(p.threshold),
            p.method.map(|m| m.to_string()).unwrap_or_default()
        );
    }
    out
}

fn header_index(header: &[&str], name: &str, source: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| *h == name)
        .ok_or_else(|| Error::parse(source, 1, format!("missing column {name}")))
}

fn parse_f64(cell: &str, source: &str, line: usize) -> Result<Option<f64>> {
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse()
        .map(Some)
        .map_err(|_| Error::parse(source, line, format!("bad number {cell:?}")))
}

fn parse_bool(cell: &str, source: &str, line: usize) -> Result<bool> {
    match cell {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        other => Err(Error::parse(source, line, format!("bad boolean {other:?}"))),
    }
}

pub fn parse_predictions(text: &str, source: &str) -> Result<Vec<Prediction>> {
    let mut lines = text.lines().enumerate();
    let header: Vec<&str> = lines.next().map(|(_, h)| h.split('\t').collect()).unwrap_or_default();
    let col = |n: &str| header_index(&header, n, source);
    let cols = [
        col("ID")?,
        col("LANGUAGE")?,
        col("CONCEPT")?,
        col("PREDICTED")?,
        col("SCORE")?,
        col("BEST_CANDIDATE_ID")?,
        col("BEST_CANDIDATE_LANGUAGE")?,
        col("THRESHOLD")?,
        col("METHOD")?,
    ];
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let n = i + 1;
        let cells: Vec<&str> = line.split('\t').collect();
        let get = |k: usize| cells.get(cols[k]).copied().unwrap_or("");
        let best_candidate = parse_f64(get(4), source, n)?.map(|score| BestCandidate {
                id: get(5).to_string(),
                language: get(6).to_string(),
                score,
            });
        out.push(Prediction {
            id: get(0).to_string(),
            language: get(1).to_string(),
            concept: get(2).to_string(),
            predicted_borrowed: parse_bool(get(3), source, n)?,
            best_candidate,
            threshold: parse_f64(get(7), source, n)?,
            method: match get(8) {
                "" => None,
                m => Some(m.parse()?),
            },
        });
    }
    Ok(out)
}

pub fn similarity_tsv(records: &[SimilarityRecord]) -> String {
    let mut out = String::from("QUERY_ID\tCANDIDATE_ID\tSAME_CONCEPT\tCOSINE\tPMI_SCALED\tCOMBINED\tPENALTY_APPLIED\n");
    for r in records {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.query_id,
            r.candidate_id,
            r.same_concept,
            opt(r.cosine),
            opt(r.pmi_scaled),
            r.combined,
            r.penalty_applied
        );
    }
    out
}

pub fn parse_similarity(text: &str, source: &str) -> Result<Vec<SimilarityRecord>> {
    let mut lines = text.lines().enumerate();
    let header: Vec<&str> = lines.next().map(|(_, h)| h.split('\t').collect()).unwrap_or_default();
    let col = |n: &str| header_index(&header, n, source);
    let cols = [
        col("QUERY_ID")?,
        col("CANDIDATE_ID")?,
        col("SAME_CONCEPT")?,
        col("COSINE")?,
        col("PMI_SCALED")?,
        col("COMBINED")?,
        col("PENALTY_APPLIED")?,
    ];
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let n = i + 1;
        let cells: Vec<&str> = line.split('\t').collect();
        let get = |k: usize| cells.get(cols[k]).copied().unwrap_or("");
        out.push(SimilarityRecord {
            query_id: get(0).to_string(),
            candidate_id: get(1).to_string(),
            same_concept: parse_bool(get(2), source, n)?,
            cosine: parse_f64(get(3), source, n)?,
            pmi_scaled: parse_f64(get(4), source, n)?,
            combined: parse_f64(get(5), source, n)?
                .ok_or_else(|| Error::parse(source, n, "COMBINED is empty"))?,
            penalty_applied: parse_bool(get(6), source, n)?,
        });
    }
    Ok(out)
}

/// Everything known about one form pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Explanation {
    pub a_id: String,
    pub b_id: String,
    pub asjp_a: String,
    pub asjp_b: String,
    pub alignment: Alignment,
    pub pmi_raw: f64,
    pub pmi_scaled: Option<f64>,
    pub cosine: Option<f64>,
    pub cross_concept: bool,
    pub combined: Option<f64>,
    pub threshold: Option<f64>,
}

impl Explanation {
    pub fn margin(&self) -> Option<f64> {
        Some(self.combined? - self.threshold?)
    }
}

impl fmt::Display for Explanation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let num = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "n/a".into());
        writeln!(f, "pair\t{}\t{}", self.a_id, self.b_id)?;
        writeln!(f, "asjp\t{}\t{}", self.asjp_a, self.asjp_b)?;
        writeln!(f, "alignment")?;
        for c in &self.alignment.columns {
            writeln!(
                f,
                "  {}\t{}\t{:+.4}",
                c.a.unwrap_or('-'),
                c.b.unwrap_or('-'),
                c.score
            )?;
        }
        writeln!(f, "pmi_raw\t{:.6}", self.pmi_raw)?;
        writeln!(f, "pmi_scaled\t{}", num(self.pmi_scaled))?;
        writeln!(f, "cosine\t{}", num(self.cosine))?;
        writeln!(f, "cross_concept\t{}", self.cross_concept)?;
        writeln!(f, "combined\t{}", num(self.combined))?;
        writeln!(f, "threshold\t{}", num(self.threshold))?;
        write!(f, "margin\t{}", num(self.margin()))
    }
}

/// Context for [`explain`]: the run's PMI scaling, hidden representations
/// and thresholds, any of which may be absent.
pub struct ExplainContext<'a> {
    pub wordlist: &'a Wordlist,
    pub pmi: &'a PmiMatrix,
    pub hidden: Option<&'a Array2<f32>>,
    pub pmi_scale: Option<&'a ScaledScoreSet>,
    pub colex: Option<&'a ColexNetwork>,
    pub cosine_weight: f64,
    pub penalty: f64,
    pub thresholds: Option<&'a BTreeMap<String, ThresholdDecision>>,
}

pub fn explain(ctx: &ExplainContext<'_>, a: &str, b: &str) -> Result<Explanation> {
    let wl = ctx.wordlist;
    let ia = wl.position(a).ok_or_else(|| Error::UnknownId(a.to_string()))?;
    let ib = wl.position(b).ok_or_else(|| Error::UnknownId(b.to_string()))?;
    let (fa, fb) = (&wl.forms()[ia], &wl.forms()[ib]);
    let alignment = align(&fa.asjp, &fb.asjp, ctx.pmi)?;
    let pmi_raw = alignment.score;
    let pmi_scaled = ctx.pmi_scale.map(|s| s.scale(pmi_raw));
    let cosine = ctx
        .hidden
        .map(|h| cosine_similarity(h.row(ia), h.row(ib)))
        .transpose()?;
    let cross_concept = fa.concept != fb.concept;
    let combined = match (cosine, pmi_scaled) {
        (Some(c), Some(p)) => Some(combined_similarity(c, p, ctx.cosine_weight, cross_concept, ctx.penalty)),
        _ => None,
    };
    let threshold = ctx.thresholds.and_then(|t| t.get(&fa.language)).map(|d| d.value);
    Ok(Explanation {
        a_id: fa.id.clone(),
        b_id: fb.id.clone(),
        asjp_a: fa.asjp.clone(),
        asjp_b: fb.asjp.clone(),
        alignment,
        pmi_raw,
        pmi_scaled,
        cosine,
        cross_concept,
        combined,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{tests::toy_phonology, RoleAssignment, UnknownSymbolPolicy};
    use ndarray::array;

    const FIXTURE: &str = "ID\tLANGUAGE\tCONCEPT\tFORM
d1\tDonor\tHAND\tmano
d2\tDonor\tHAND\tpata
d3\tDonor\tFOOT\tpie
r1\tRecip\tHAND\tmanu
r2\tRecip\tFOOT\tkalo
r3\tRecip\tEYE\tsuli
o1\tOther\tHAND\ttiko
";

    fn wordlist() -> Wordlist {
        Wordlist::parse(
            FIXTURE,
            "fixture",
            &RoleAssignment::donor_fixed("Donor"),
            &toy_phonology(),
            UnknownSymbolPolicy::Error,
        )
        .unwrap()
    }

    fn ids(wl: &Wordlist, c: &[Candidate]) -> Vec<String> {
        c.iter().map(|c| wl.forms()[c.index].id.clone()).collect()
    }

    #[test]
    fn cosine_examples() {
        let u = array![1.0f32, 1.0];
        let v = array![1.0f32, 0.0];
        assert!((cosine_similarity(u.view(), u.view()).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine_similarity(v.view(), array![0.0f32, 1.0].view()).unwrap(), 0.0);
        assert!((cosine_similarity(u.view(), v.view()).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-7);
        assert!(cosine_similarity(u.view(), array![0.0f32, 0.0].view()).is_err());
    }

    #[test]
    fn combination_examples() {
        assert!((combined_similarity(0.8, 0.4, 0.25, false, 0.1) - 0.5).abs() < 1e-12);
        assert!((combined_similarity(0.8, 0.4, 0.25, true, 0.1) - 0.4).abs() < 1e-12);
        assert_eq!(combined_similarity(0.8, 0.4, 0.0, false, 0.1), 0.4);
        // slopes
        let base = combined_similarity(0.3, 0.6, 0.25, false, 0.1);
        assert!((combined_similarity(0.4, 0.6, 0.25, false, 0.1) - base - 0.025).abs() < 1e-12);
        assert!((combined_similarity(0.3, 0.7, 0.25, false, 0.1) - base - 0.075).abs() < 1e-12);
    }

    #[test]
    fn donor_fixed_candidates() {
        let wl = wordlist();
        let r1 = wl.position("r1").unwrap();
        assert_eq!(ids(&wl, &candidates(&wl, r1, None, CandidateMode::DonorFixed)), ["d1", "d2"]);
        let r3 = wl.position("r3").unwrap();
        assert!(candidates(&wl, r3, None, CandidateMode::DonorFixed).is_empty());
        let colex = ColexNetwork::from_pairs(
            [("HAND".into(), "FOOT".into(), 0.07), ("HAND".into(), "EYE".into(), 0.03)],
            0.05,
        )
        .unwrap();
        let c = candidates(&wl, r1, Some(&colex), CandidateMode::DonorFixed);
        assert_eq!(ids(&wl, &c), ["d1", "d2", "d3"]);
        assert!(c.iter().find(|c| wl.forms()[c.index].id == "d3").unwrap().cross_concept);
        assert!(candidates(&wl, r3, Some(&colex), CandidateMode::DonorFixed).is_empty());
    }

    #[test]
    fn cross_family_candidates() {
        let wl = wordlist();
        let r1 = wl.position("r1").unwrap();
        let c = candidates(&wl, r1, None, CandidateMode::CrossFamily);
        assert_eq!(ids(&wl, &c), ["d1", "d2", "o1"]);
        assert_eq!(query_forms(&wl, CandidateMode::DonorFixed).len(), 4);
    }

    fn ned_run(global: Option<f64>) -> Detection {
        let wl = wordlist();
        let inputs = ScoringInputs {
            wordlist: &wl,
            hidden: None,
            pmi: None,
            colex: None,
            ned_norm: NedNormalization::MaxLength,
        };
        let cfg = DetectConfig {
            scorer: Scorer::Ned(NedNormalization::MaxLength),
            global_threshold: global,
            ..DetectConfig::default()
        };
        detect(inputs, &cfg).unwrap()
    }

    #[test]
    fn strict_threshold_and_empty_candidates() {
        // manu vs mano: ned 0.75
        let at = ned_run(Some(0.75));
        let r1 = at.predictions.iter().find(|p| p.id == "r1").unwrap();
        assert_eq!(r1.best_candidate.as_ref().unwrap().score, 0.75);
        assert!(!r1.predicted_borrowed);
        let below = ned_run(Some(0.7));
        let r1 = below.predictions.iter().find(|p| p.id == "r1").unwrap();
        assert!(r1.predicted_borrowed);
        assert_eq!(r1.best_candidate.as_ref().unwrap().id, "d1");
        let r3 = below.predictions.iter().find(|p| p.id == "r3").unwrap();
        assert!(!r3.predicted_borrowed && r3.best_candidate.is_none());
        let ids: Vec<&str> = below.predictions.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, ["o1", "r1", "r2", "r3"]);
    }

    #[test]
    fn tsv_round_trips() {
        let d = ned_run(Some(0.5));
        let text = predictions_tsv(&d.predictions);
        assert_eq!(parse_predictions(&text, "p").unwrap(), d.predictions);
        let sim = similarity_tsv(&d.records);
        assert_eq!(parse_similarity(&sim, "s").unwrap(), d.records);
    }

    #[test]
    fn tie_goes_to_smallest_id() {
        let wl = wordlist();
        let table = ScoreTable {
            mode: CandidateMode::DonorFixed,
            queries: vec![wl.position("r1").unwrap()],
            pairs: ["d2", "d1"]
                .iter()
                .map(|id| PairScore {
                    query: wl.position("r1").unwrap(),
                    candidate: wl.position(id).unwrap(),
                    cross_concept: false,
                    cosine: None,
                    pmi_raw: None,
                    ned: 0.5,
                })
                .collect(),
            pmi_scale: None,
            ned_norm: NedNormalization::MaxLength,
        };
        let records = table.records(&wl, Scorer::Ned(NedNormalization::MaxLength), 0.1).unwrap();
        let th: BTreeMap<String, ThresholdDecision> =
            [("Recip".to_string(), ThresholdDecision::manual("Recip", 0.1))].into();
        let p = classify_records(&wl, &table, &records, &th).unwrap();
        assert_eq!(p[0].best_candidate.as_ref().unwrap().id, "d1");
        assert!(classify_records(&wl, &table, &records, &BTreeMap::new()).is_err());
    }

    #[test]
    fn explain_identical_and_unknown() {
        let wl = wordlist();
        let pmi = PmiMatrix::new(vec!['m', 'a', 'n', 'o', 'p', 't', 'u', 'i', 'e', 'k', 'l', 's'],
            (0..144).map(|k| if k / 12 == k % 12 { 2.0 } else { -1.0 }).collect(), -1.0, -0.5).unwrap();
        let hidden = Array2::from_shape_fn((wl.len(), 3), |(i, j)| (i + j + 1) as f32);
        let ctx = ExplainContext {
            wordlist: &wl,
            pmi: &pmi,
            hidden: Some(&hidden),
            pmi_scale: None,
            colex: None,
            cosine_weight: 0.25,
            penalty: 0.1,
            thresholds: None,
        };
        let e = explain(&ctx, "d1", "d1").unwrap();
        assert!((e.cosine.unwrap() - 1.0).abs() < 1e-12);
        assert!(e.alignment.columns.iter().all(|c| c.a == c.b));
        assert!(e.to_string().contains("margin\tn/a"));
        assert!(matches!(explain(&ctx, "d1", "zz"), Err(Error::UnknownId(_))));
    }

    proptest::proptest! {
        #[test]
        fn raising_the_threshold_never_adds_borrowings(t1 in -0.5..1.0f64, dt in 0.0..1.0f64) {
            let low = ned_run(Some(t1));
            let high = ned_run(Some(t1 + dt));
            for (a, b) in low.predictions.iter().zip(&high.predictions) {
                proptest::prop_assert!(a.predicted_borrowed || !b.predicted_borrowed);
            }
        }
    }

    #[test]
    fn zero_cosine_weight_is_pmi_only() {
        let wl = wordlist();
        let pmi = PmiMatrix::new(vec!['m', 'a', 'n', 'o', 'p', 't', 'u', 'i', 'e', 'k', 'l', 's'],
            (0..144).map(|k| if k / 12 == k % 12 { 2.0 } else { -1.0 }).collect(), -1.0, -0.5).unwrap();
        let hidden = Array2::from_shape_fn((wl.len(), 3), |(i, j)| ((i * 7 + j * 3) % 5) as f32 + 0.5);
        let run = |hidden: Option<&Array2<f32>>| {
            let inputs = ScoringInputs { wordlist: &wl, hidden, pmi: Some(&pmi), colex: None, ned_norm: NedNormalization::MaxLength };
            let cfg = DetectConfig { scorer: Scorer::Combined { cosine_weight: 0.0 }, global_threshold: Some(0.5), ..DetectConfig::default() };
            detect(inputs, &cfg).unwrap()
        };
        let with = run(Some(&hidden));
        let without = run(None);
        assert_eq!(with.predictions, without.predictions);
        for (a, b) in with.records.iter().zip(&without.records) {
            assert_eq!(a.combined, b.combined);
            assert_eq!(Some(a.combined), a.pmi_scaled);
        }
    }
}
