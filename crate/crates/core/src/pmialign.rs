//! PMI-weighted global alignment of ASJP strings, min-max scaling and the
//! normalized-edit-distance baseline.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{read_to_string, Error, Result};
use crate::phon::is_asjp_symbol;

const LOAD_SYMMETRY_TOL: f64 = 1e-6;

/// Sound-correspondence scores over an ordered symbol inventory, plus affine
/// gap penalties (a gap of length `L` costs `gap_open + (L − 1)·gap_extend`).
#[derive(Clone, Debug, PartialEq)]
pub struct PmiMatrix {
    symbols: Vec<char>,
    index: HashMap<char, usize>,
    scores: Vec<f64>,
    pub gap_open: f64,
    pub gap_extend: f64,
}

impl PmiMatrix {
    /// Any square symmetric matrix; `scores` is row-major.
    pub fn new(symbols: Vec<char>, scores: Vec<f64>, gap_open: f64, gap_extend: f64) -> Result<Self> {
        let n = symbols.len();
        if n == 0 || scores.len() != n * n {
            return Err(Error::Shape(format!("{} scores for {n} symbols", scores.len())));
        }
        if !(gap_open <= 0.0 && gap_extend <= 0.0) {
            return Err(Error::Config(format!(
                "gap penalties must be ≤ 0 (open {gap_open}, extend {gap_extend})"
            )));
        }
        let mut index = HashMap::new();
        for (i, &c) in symbols.iter().enumerate() {
            if index.insert(c, i).is_some() {
                return Err(Error::Invalid(format!("symbol {c:?} listed twice")));
            }
        }
        for i in 0..n {
            for j in 0..i {
                if scores[i * n + j] != scores[j * n + i] {
                    return Err(Error::Invalid(format!(
                        "matrix is not symmetric at ({}, {})",
                        symbols[i], symbols[j]
                    )));
                }
            }
        }
        Ok(Self {
            symbols,
            index,
            scores,
            gap_open,
            gap_extend,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&read_to_string(path)?, &path.display().to_string())
    }

    /// Parses the 41×41 resource format. Entries that differ from their
    /// transpose by at most 1e-6 are averaged so scoring is exactly symmetric.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::EmptyTable(source.to_string()))?;
        let symbols: Vec<char> = header
            .split('\t')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                let mut it = s.chars();
                match (it.next(), it.next()) {
                    (Some(c), None) if is_asjp_symbol(c) => Ok(c),
                    _ => Err(Error::parse(source, 1, format!("{s:?} is not an ASJP symbol"))),
                }
            })
            .collect::<Result<_>>()?;
        if symbols.len() != 41 {
            return Err(Error::parse(source, 1, format!("header has {} symbols, expected 41", symbols.len())));
        }
        let n = symbols.len();
        let mut scores = vec![f64::NAN; n * n];
        let mut seen = vec![false; n];
        let mut rows = 0;
        let (mut gap_open, mut gap_extend) = (None, None);
        for (ln, line) in lines {
            let line_no = ln + 1;
            if let Some(rest) = line.strip_prefix('#') {
                let mut parts = rest.split_whitespace();
                let key = parts.next().unwrap_or("");
                let slot = match key {
                    "gap_open" => &mut gap_open,
                    "gap_extend" => &mut gap_extend,
                    _ => continue,
                };
                let v: f64 = parts
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::parse(source, line_no, format!("{key} needs a numeric value")))?;
                *slot = Some(v);
                continue;
            }
            let cells: Vec<&str> = line.split('\t').collect();
            if cells.len() != n + 1 {
                return Err(Error::parse(
                    source,
                    line_no,
                    format!("row has {} score cells, expected {n}", cells.len() - 1),
                ));
            }
            let label = cells[0].trim();
            let r = symbols
                .iter()
                .position(|c| label.len() == c.len_utf8() && label.starts_with(*c))
                .ok_or_else(|| Error::parse(source, line_no, format!("row label {label:?} is not in the header")))?;
            if std::mem::replace(&mut seen[r], true) {
                return Err(Error::parse(source, line_no, format!("row {label:?} appears twice")));
            }
            for (c, cell) in cells[1..].iter().enumerate() {
                let v: f64 = cell
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(source, line_no, format!("bad score {cell:?}")))?;
                if !v.is_finite() {
                    return Err(Error::parse(source, line_no, format!("non-finite score {cell:?}")));
                }
                scores[r * n + c] = v;
            }
            rows += 1;
        }
        if rows != n {
            return Err(Error::parse(source, 0, format!("{rows} score rows, expected {n}")));
        }
        for i in 0..n {
            for j in 0..i {
                let (a, b) = (scores[i * n + j], scores[j * n + i]);
                if (a - b).abs() > LOAD_SYMMETRY_TOL {
                    return Err(Error::parse(
                        source,
                        0,
                        format!("asymmetric entries ({}, {}) = {a} vs {b}", symbols[i], symbols[j]),
                    ));
                }
                let mean = 0.5 * (a + b);
                scores[i * n + j] = mean;
                scores[j * n + i] = mean;
            }
        }
        let missing = |k: &str| Error::parse(source, 0, format!("missing #{k} footer"));
        let gap_open = gap_open.ok_or_else(|| missing("gap_open"))?;
        let gap_extend = gap_extend.ok_or_else(|| missing("gap_extend"))?;
        Self::new(symbols, scores, gap_open, gap_extend)
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn score(&self, a: char, b: char) -> Option<f64> {
        let n = self.symbols.len();
        Some(self.scores[self.index.get(&a)? * n + self.index.get(&b)?])
    }

    fn indices(&self, s: &str) -> Result<Vec<usize>> {
        s.chars()
            .map(|c| {
                self.index
                    .get(&c)
                    .copied()
                    .ok_or_else(|| Error::Invalid(format!("symbol {c:?} in {s:?} is not in the PMI matrix")))
            })
            .collect()
    }
}

/// One alignment column: a symbol pair, or a symbol against a gap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Column {
    pub a: Option<char>,
    pub b: Option<char>,
    /// This column's contribution to the total.
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Alignment {
    pub score: f64,
    pub columns: Vec<Column>,
}

impl fmt::Display for Alignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cell = |c: Option<char>| c.unwrap_or('-');
        let top: String = self.columns.iter().map(|c| cell(c.a)).collect();
        let bottom: String = self.columns.iter().map(|c| cell(c.b)).collect();
        write!(f, "{top}\n{bottom}")
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum State {
    Match,
    GapB,
    GapA,
}

struct Tables {
    m: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
    cols: usize,
}

/// Three-state Gotoh recurrence. `x` ends with `a_i` against a gap, `y` with
/// `b_j` against a gap. Every state may follow every other.
fn fill(a: &[usize], b: &[usize], m: &PmiMatrix) -> Tables {
    let n = m.symbols.len();
    let (go, ge) = (m.gap_open, m.gap_extend);
    let cols = b.len() + 1;
    let size = (a.len() + 1) * cols;
    let ninf = f64::NEG_INFINITY;
    let mut t = Tables {
        m: vec![ninf; size],
        x: vec![ninf; size],
        y: vec![ninf; size],
        cols,
    };
    t.m[0] = 0.0;
    for i in 1..=a.len() {
        t.x[i * cols] = go + (i - 1) as f64 * ge;
    }
    for j in 1..=b.len() {
        t.y[j] = go + (j - 1) as f64 * ge;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let k = i * cols + j;
            let d = k - cols - 1;
            t.m[k] = m.scores[a[i - 1] * n + b[j - 1]] + t.m[d].max(t.x[d]).max(t.y[d]);
            let u = k - cols;
            t.x[k] = (t.m[u] + go).max(t.x[u] + ge).max(t.y[u] + go);
            let l = k - 1;
            t.y[k] = (t.m[l] + go).max(t.y[l] + ge).max(t.x[l] + go);
        }
    }
    t
}

fn best_end(t: &Tables, k: usize) -> (f64, State) {
    let mut best = (t.m[k], State::Match);
    if t.x[k] > best.0 {
        best = (t.x[k], State::GapB);
    }
    if t.y[k] > best.0 {
        best = (t.y[k], State::GapA);
    }
    best
}

/// Best global alignment score.
pub fn align_score(a: &str, b: &str, m: &PmiMatrix) -> Result<f64> {
    let (ai, bi) = (m.indices(a)?, m.indices(b)?);
    if ai.is_empty() || bi.is_empty() {
        return Err(Error::Invalid("cannot align an empty string".into()));
    }
    let t = fill(&ai, &bi, m);
    Ok(best_end(&t, t.m.len() - 1).0)
}

/// Best global alignment with its column-by-column trace.
pub fn align(a: &str, b: &str, m: &PmiMatrix) -> Result<Alignment> {
    let (ai, bi) = (m.indices(a)?, m.indices(b)?);
    if ai.is_empty() || bi.is_empty() {
        return Err(Error::Invalid("cannot align an empty string".into()));
    }
    let (ac, bc): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
    let t = fill(&ai, &bi, m);
    let n = m.symbols.len();
    let (go, ge) = (m.gap_open, m.gap_extend);
    let (score, mut state) = best_end(&t, t.m.len() - 1);
    let (mut i, mut j) = (ai.len(), bi.len());
    let mut columns = Vec::new();
    // first state holding the maximum, mirroring the recurrence
    let pick = |cands: [(f64, State); 3]| {
        let mut best = cands[0];
        for c in &cands[1..] {
            if c.0 > best.0 {
                best = *c;
            }
        }
        best.1
    };
    while i > 0 || j > 0 {
        let k = i * t.cols + j;
        match state {
            State::Match => {
                let s = m.scores[ai[i - 1] * n + bi[j - 1]];
                columns.push(Column {
                    a: Some(ac[i - 1]),
                    b: Some(bc[j - 1]),
                    score: s,
                });
                let d = k - t.cols - 1;
                state = pick([(t.m[d], State::Match), (t.x[d], State::GapB), (t.y[d], State::GapA)]);
                i -= 1;
                j -= 1;
            }
            State::GapB => {
                let u = k - t.cols;
                let prev = pick([(t.m[u] + go, State::Match), (t.x[u] + ge, State::GapB), (t.y[u] + go, State::GapA)]);
                let opens = prev != State::GapB;
                columns.push(Column {
                    a: Some(ac[i - 1]),
                    b: None,
                    score: if opens { go } else { ge },
                });
                state = prev;
                i -= 1;
            }
            State::GapA => {
                let l = k - 1;
                let prev = pick([(t.m[l] + go, State::Match), (t.y[l] + ge, State::GapA), (t.x[l] + go, State::GapB)]);
                let opens = prev != State::GapA;
                columns.push(Column {
                    a: None,
                    b: Some(bc[j - 1]),
                    score: if opens { go } else { ge },
                });
                state = prev;
                j -= 1;
            }
        }
    }
    columns.reverse();
    Ok(Alignment { score, columns })
}

/// Min-max scaling fitted on a score population.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledScoreSet {
    pub raw: Vec<f64>,
    pub min: f64,
    pub max: f64,
    pub scaled: Vec<f64>,
}

impl ScaledScoreSet {
    /// Maps any value with this population's affine map; 0.5 when the
    /// population has a single distinct value.
    pub fn scale(&self, x: f64) -> f64 {
        if self.max > self.min {
            (x - self.min) / (self.max - self.min)
        } else {
            0.5
        }
    }
}

pub fn scale_scores(raw: &[f64]) -> Result<ScaledScoreSet> {
    if raw.is_empty() {
        return Err(Error::Invalid("cannot scale an empty score set".into()));
    }
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut set = ScaledScoreSet {
        raw: raw.to_vec(),
        min,
        max,
        scaled: Vec::new(),
    };
    set.scaled = raw.iter().map(|&x| set.scale(x)).collect();
    Ok(set)
}

pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// How edit distance is normalized before turning it into a similarity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NedNormalization {
    /// `d / max(|a|, |b|)`.
    #[default]
    MaxLength,
    /// `2d / (|a| + |b| + d)`, which is a metric.
    Metric,
}

impl fmt::Display for NedNormalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NedNormalization::MaxLength => "max_length",
            NedNormalization::Metric => "metric",
        })
    }
}

impl FromStr for NedNormalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max_length" => Ok(Self::MaxLength),
            "metric" => Ok(Self::Metric),
            other => Err(Error::Config(format!("unknown NED normalization {other:?}"))),
        }
    }
}

/// One minus normalized Levenshtein distance over segments.
pub fn ned_similarity<T: PartialEq>(a: &[T], b: &[T], norm: NedNormalization) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let d = levenshtein(a, b) as f64;
    let dist = match norm {
        NedNormalization::MaxLength => d / a.len().max(b.len()) as f64,
        NedNormalization::Metric => 2.0 * d / ((a.len() + b.len()) as f64 + d),
    };
    1.0 - dist
}
