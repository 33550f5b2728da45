//! IPA segmentation, phonetic feature vectors and ASJP conversion.
//!
//! Both resources are plain TSV files. The feature table maps IPA symbols
//! (possibly several codepoints, e.g. `tʃ` or `pʰ`) to 39 ternary features;
//! the ASJP mapping maps symbols onto the 41-letter ASJP alphabet, with
//! `#rule` lines describing which diacritic classes may be stripped when a
//! segment has no direct entry.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use crate::error::{read_to_string, Error, Result};

pub const FEATURE_DIM: usize = 39;

/// The 41 ASJP symbols, in the conventional order.
pub const ASJP_SYMBOLS: [char; 41] = [
    'p', 'b', 'f', 'v', 'm', 'w', '8', 't', 'd', 's', 'z', 'c', 'n', 'r', 'l', 'S', 'Z', 'C', 'j',
    'T', '5', 'y', 'k', 'g', 'x', 'N', 'q', 'G', 'X', '7', 'h', 'L', '4', '!', 'i', 'e', 'E', '3',
    'a', 'u', 'o',
];

pub fn is_asjp_symbol(c: char) -> bool {
    ASJP_SYMBOLS.contains(&c)
}

/// Ternary feature values: 0 does not apply, 1 not applicable, 2 applies.
pub type FeatureVector = [u8; FEATURE_DIM];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureTable {
    entries: HashMap<String, FeatureVector>,
    longest_key: usize,
}

impl FeatureTable {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&read_to_string(path)?, &path.display().to_string())
    }

    /// Parses the TSV body. `source` is only used in error messages.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.split('\t').next() == Some("SYMBOL") => {}
            Some(_) => return Err(Error::parse(source, 1, "expected header starting with SYMBOL")),
            None => return Err(Error::EmptyTable(source.to_string())),
        }
        let mut entries = HashMap::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut cells = line.split('\t');
            let symbol = cells.next().unwrap_or_default();
            if symbol.is_empty() {
                return Err(Error::parse(source, lineno, "empty symbol"));
            }
            let values: Vec<&str> = cells.collect();
            if values.len() != FEATURE_DIM {
                return Err(Error::parse(
                    source,
                    lineno,
                    format!("expected {FEATURE_DIM} feature values, found {}", values.len()),
                ));
            }
            let mut vector = [0u8; FEATURE_DIM];
            for (slot, raw) in vector.iter_mut().zip(&values) {
                *slot = match raw.trim() {
                    "0" => 0,
                    "1" => 1,
                    "2" => 2,
                    other => {
                        return Err(Error::parse(
                            source,
                            lineno,
                            format!("feature value {other:?} not in {{0,1,2}}"),
                        ))
                    }
                };
            }
            if entries.insert(symbol.to_string(), vector).is_some() {
                return Err(Error::parse(source, lineno, format!("duplicate symbol {symbol:?}")));
            }
        }
        if entries.is_empty() {
            return Err(Error::EmptyTable(source.to_string()));
        }
        Ok(Self::from_map(entries))
    }

    pub fn from_entries<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, FeatureVector)>,
        S: Into<String>,
    {
        let mut map = HashMap::new();
        for (symbol, vector) in entries {
            let symbol = symbol.into();
            if let Some(bad) = vector.iter().find(|&&v| v > 2) {
                return Err(Error::Invalid(format!("feature value {bad} for {symbol:?}")));
            }
            if map.insert(symbol.clone(), vector).is_some() {
                return Err(Error::Invalid(format!("duplicate symbol {symbol:?}")));
            }
        }
        if map.is_empty() {
            return Err(Error::EmptyTable("<entries>".into()));
        }
        Ok(Self::from_map(map))
    }

    fn from_map(entries: HashMap<String, FeatureVector>) -> Self {
        let longest_key = entries.keys().map(|k| k.chars().count()).max().unwrap_or(0);
        Self {
            entries,
            longest_key,
        }
    }

    pub fn get(&self, symbol: &str) -> Option<&FeatureVector> {
        self.entries.get(symbol)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// One tokenized IPA segment with its feature vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub symbol: String,
    pub features: FeatureVector,
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.symbol)
    }
}

/// Greedy longest-match segmentation against the table's key set.
///
/// Offsets in errors count codepoints from the start of `form`.
pub fn tokenize_ipa(form: &str, table: &FeatureTable) -> Result<Vec<Segment>> {
    let chars: Vec<char> = form.chars().collect();
    if chars.is_empty() {
        return Err(Error::Invalid("cannot tokenize an empty form".into()));
    }
    let mut segments = Vec::new();
    let mut pos = 0;
    let mut candidate = String::new();
    while pos < chars.len() {
        let max = table.longest_key.min(chars.len() - pos);
        let mut matched = None;
        for len in (1..=max).rev() {
            candidate.clear();
            candidate.extend(&chars[pos..pos + len]);
            if let Some(features) = table.get(&candidate) {
                matched = Some((len, *features));
                break;
            }
        }
        let Some((len, features)) = matched else {
            return Err(Error::UnknownSymbol {
                form: form.to_string(),
                symbol: chars[pos],
                codepoint: chars[pos] as u32,
                offset: pos,
            });
        };
        segments.push(Segment {
            symbol: chars[pos..pos + len].iter().collect(),
            features,
        });
        pos += len;
    }
    Ok(segments)
}

/// Codepoint classes that fallback rules can act on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CodepointClass {
    /// Combining diacritics (nasalization tilde, tone accents, ...).
    Combining,
    /// Spacing modifier letters (ʰ ʷ ʲ ʼ ː ...), excluding tone letters.
    Modifier,
    /// Chao tone letters and superscript tone digits.
    Tone,
}

impl CodepointClass {
    pub fn contains(self, c: char) -> bool {
        let cp = c as u32;
        match self {
            CodepointClass::Combining => matches!(
                cp,
                0x0300..=0x036F | 0x1AB0..=0x1AFF | 0x1DC0..=0x1DFF | 0x20D0..=0x20FF | 0xFE20..=0xFE2F
            ),
            CodepointClass::Modifier => {
                matches!(cp, 0x02B0..=0x02FF | 0x1D2C..=0x1D6A) && !CodepointClass::Tone.contains(c)
            }
            CodepointClass::Tone => matches!(
                cp,
                0x02E5..=0x02E9 | 0xA700..=0xA716 | 0x00B9 | 0x00B2 | 0x00B3 | 0x2070..=0x2079
            ),
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "combining" => Some(Self::Combining),
            "modifier" => Some(Self::Modifier),
            "tone" => Some(Self::Tone),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleAction {
    Strip,
    Reject,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FallbackRule {
    pub class: CodepointClass,
    pub action: RuleAction,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AsjpMapping {
    entries: BTreeMap<String, char>,
    rules: Vec<FallbackRule>,
}

impl AsjpMapping {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&read_to_string(path)?, &path.display().to_string())
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut rules = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split('\t').collect();
            if idx == 0 && cells.first() == Some(&"IPA") {
                continue;
            }
            if cells[0] == "#rule" {
                if cells.len() != 3 {
                    return Err(Error::parse(source, lineno, "rule lines need a class and an action"));
                }
                let class = CodepointClass::parse(cells[1]).ok_or_else(|| {
                    Error::parse(source, lineno, format!("unknown codepoint class {:?}", cells[1]))
                })?;
                let action = match cells[2] {
                    "strip" => RuleAction::Strip,
                    "reject" => RuleAction::Reject,
                    other => {
                        return Err(Error::parse(source, lineno, format!("unknown rule action {other:?}")))
                    }
                };
                rules.push(FallbackRule { class, action });
                continue;
            }
            if cells[0].starts_with('#') {
                continue;
            }
            if cells.len() != 2 {
                return Err(Error::parse(source, lineno, "expected IPA<TAB>ASJP"));
            }
            let mut target = cells[1].chars();
            let symbol = match (target.next(), target.next()) {
                (Some(c), None) if is_asjp_symbol(c) => c,
                _ => {
                    return Err(Error::parse(
                        source,
                        lineno,
                        format!("{:?} is not an ASJP symbol", cells[1]),
                    ))
                }
            };
            if entries.insert(cells[0].to_string(), symbol).is_some() {
                return Err(Error::parse(source, lineno, format!("duplicate symbol {:?}", cells[0])));
            }
        }
        if entries.is_empty() {
            return Err(Error::EmptyTable(source.to_string()));
        }
        Ok(Self { entries, rules })
    }

    pub fn new(entries: impl IntoIterator<Item = (String, char)>, rules: Vec<FallbackRule>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (ipa, asjp) in entries {
            if !is_asjp_symbol(asjp) {
                return Err(Error::Invalid(format!("{asjp:?} is not an ASJP symbol")));
            }
            map.insert(ipa, asjp);
        }
        Ok(Self { entries: map, rules })
    }

    pub fn rules(&self) -> &[FallbackRule] {
        &self.rules
    }

    /// Maps one segment. `Ok(None)` means the segment consisted only of
    /// strippable marks and is dropped.
    pub fn map_segment(&self, symbol: &str) -> Result<Option<char>> {
        if let Some(&c) = self.entries.get(symbol) {
            return Ok(Some(c));
        }
        let mut reduced: String = symbol.to_string();
        for rule in &self.rules {
            match rule.action {
                RuleAction::Reject => {
                    if reduced.chars().any(|c| rule.class.contains(c)) {
                        return Err(Error::UnmappedSegment(symbol.to_string()));
                    }
                }
                RuleAction::Strip => {
                    reduced.retain(|c| !rule.class.contains(c));
                    if reduced.is_empty() {
                        return Ok(None);
                    }
                    if let Some(&c) = self.entries.get(&reduced) {
                        return Ok(Some(c));
                    }
                }
            }
        }
        Err(Error::UnmappedSegment(symbol.to_string()))
    }
}

/// Converts a tokenized form to its ASJP transcription, one symbol per
/// surviving segment.
pub fn to_asjp(segments: &[Segment], mapping: &AsjpMapping) -> Result<String> {
    let mut out = String::with_capacity(segments.len());
    for seg in segments {
        if let Some(c) = mapping.map_segment(&seg.symbol)? {
            out.push(c);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vec_of(v: u8) -> FeatureVector {
        [v; FEATURE_DIM]
    }

    fn toy_table(symbols: &[&str]) -> FeatureTable {
        FeatureTable::from_entries(symbols.iter().enumerate().map(|(i, s)| (*s, vec_of((i % 3) as u8))))
            .unwrap()
    }

    fn row(symbol: &str, n: usize) -> String {
        let values: Vec<String> = (0..n).map(|i| (i % 3).to_string()).collect();
        format!("{symbol}\t{}", values.join("\t"))
    }

    fn header() -> String {
        let cols: Vec<String> = (1..=FEATURE_DIM).map(|i| format!("F{i}")).collect();
        format!("SYMBOL\t{}", cols.join("\t"))
    }

    #[test]
    fn parses_rows() {
        let text = format!("{}\n{}\n{}\n", header(), row("p", 39), row("a", 39));
        let table = FeatureTable::parse(&text, "t").unwrap();
        assert_eq!(table.len(), 2);
        assert_eq!(table.get("p").unwrap()[1], 1);
        assert_eq!(table.get("p").unwrap()[2], 2);
    }

    #[test]
    fn arity_error_reports_line() {
        let text = format!("{}\n{}\n{}\n", header(), row("p", 39), row("a", 38));
        match FeatureTable::parse(&text, "t") {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("38"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_value_and_duplicates_rejected() {
        let bad = format!("{}\n{}\n", header(), row("p", 39).replacen("\t0", "\t3", 1));
        assert!(matches!(FeatureTable::parse(&bad, "t"), Err(Error::Parse { line: 2, .. })));
        let dup = format!("{}\n{}\n{}\n", header(), row("p", 39), row("p", 39));
        assert!(matches!(FeatureTable::parse(&dup, "t"), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn header_only_is_empty_table() {
        assert!(matches!(FeatureTable::parse(&header(), "t"), Err(Error::EmptyTable(_))));
    }

    #[test]
    fn tokenizes_single_codepoints() {
        let table = toy_table(&["p", "a"]);
        let segs = tokenize_ipa("pa", &table).unwrap();
        let symbols: Vec<_> = segs.iter().map(|s| s.symbol.as_str()).collect();
        assert_eq!(symbols, ["p", "a"]);
    }

    #[test]
    fn longest_match_wins() {
        let table = toy_table(&["tʃ", "t", "a"]);
        let symbols: Vec<_> = tokenize_ipa("tʃa", &table)
            .unwrap()
            .into_iter()
            .map(|s| s.symbol)
            .collect();
        assert_eq!(symbols, ["tʃ", "a"]);
    }

    #[test]
    fn unknown_symbol_offset() {
        let table = toy_table(&["p", "a"]);
        match tokenize_ipa("pX", &table) {
            Err(Error::UnknownSymbol { symbol, offset, .. }) => {
                assert_eq!(symbol, 'X');
                assert_eq!(offset, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    fn toy_mapping(rules: Vec<FallbackRule>) -> AsjpMapping {
        AsjpMapping::new([("p".to_string(), 'p'), ("a".to_string(), 'a')], rules).unwrap()
    }

    #[test]
    fn asjp_identity_subset() {
        let table = toy_table(&["p", "a"]);
        let segs = tokenize_ipa("pa", &table).unwrap();
        assert_eq!(to_asjp(&segs, &toy_mapping(vec![])).unwrap(), "pa");
    }

    #[test]
    fn aspiration_stripped_to_base() {
        let table = toy_table(&["pʰ", "p", "a"]);
        let segs = tokenize_ipa("pʰa", &table).unwrap();
        assert_eq!(segs.len(), 2);
        let mapping = toy_mapping(vec![FallbackRule {
            class: CodepointClass::Modifier,
            action: RuleAction::Strip,
        }]);
        assert_eq!(to_asjp(&segs, &mapping).unwrap(), "pa");
    }

    #[test]
    fn pure_tone_segment_dropped() {
        let table = toy_table(&["p", "a", "˥"]);
        let segs = tokenize_ipa("pa˥", &table).unwrap();
        let mapping = toy_mapping(vec![FallbackRule {
            class: CodepointClass::Tone,
            action: RuleAction::Strip,
        }]);
        assert_eq!(to_asjp(&segs, &mapping).unwrap(), "pa");
    }

    #[test]
    fn unmapped_click_is_error() {
        let table = toy_table(&["p", "a", "ǃ"]);
        let segs = tokenize_ipa("ǃa", &table).unwrap();
        assert!(matches!(
            to_asjp(&segs, &toy_mapping(vec![])),
            Err(Error::UnmappedSegment(s)) if s == "ǃ"
        ));
    }

    #[test]
    fn reject_rule_blocks_stripping() {
        let mapping = toy_mapping(vec![
            FallbackRule {
                class: CodepointClass::Modifier,
                action: RuleAction::Reject,
            },
            FallbackRule {
                class: CodepointClass::Modifier,
                action: RuleAction::Strip,
            },
        ]);
        assert!(mapping.map_segment("pʰ").is_err());
    }

    #[test]
    fn mapping_rejects_non_asjp_target() {
        let err = AsjpMapping::parse("IPA\tASJP\np\tQ\n", "m").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    const INVENTORY: &[&str] = &["p", "t", "k", "tʃ", "ts", "a", "i", "u", "aː", "ʃ", "s", "pʰ", "ŋ"];

    proptest! {
        #[test]
        fn tokenization_partitions_input(
            mask in prop::collection::vec(any::<bool>(), INVENTORY.len()),
            picks in prop::collection::vec(0usize..INVENTORY.len(), 1..12),
        ) {
            let chosen: Vec<&str> = INVENTORY.iter().zip(&mask).filter(|(_, &m)| m).map(|(s, _)| *s).collect();
            prop_assume!(!chosen.is_empty());
            let table = toy_table(&chosen);
            let form: String = picks.iter().map(|&i| chosen[i % chosen.len()]).collect();
            let segs = tokenize_ipa(&form, &table).unwrap();
            let joined: String = segs.iter().map(|s| s.symbol.as_str()).collect();
            prop_assert_eq!(&joined, &form);
            prop_assert_eq!(&segs, &tokenize_ipa(&form, &table).unwrap());
            for seg in &segs {
                prop_assert_eq!(seg.features.len(), FEATURE_DIM);
                prop_assert!(seg.features.iter().all(|&v| v <= 2));
            }
        }
    }
}
