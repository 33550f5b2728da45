//! Wordlist ingestion, cleanup, colexification networks and data splits.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{read_to_string, Error, Result};
use crate::phon::{to_asjp, tokenize_ipa, AsjpMapping, FeatureTable, Segment};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Donor,
    Recipient,
    Unrestricted,
}

/// How languages that are not named explicitly are treated.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RoleAssignment {
    pub donors: Vec<String>,
    pub recipients: Vec<String>,
    /// Role for languages named in neither list; `None` means recipient when
    /// any donor is named, unrestricted otherwise.
    pub default: Option<Role>,
}

impl RoleAssignment {
    pub fn donor_fixed(donor: impl Into<String>) -> Self {
        Self {
            donors: vec![donor.into()],
            recipients: Vec::new(),
            default: Some(Role::Recipient),
        }
    }

    pub fn unrestricted() -> Self {
        Self {
            default: Some(Role::Unrestricted),
            ..Self::default()
        }
    }

    pub fn role_of(&self, language: &str) -> Role {
        if self.donors.iter().any(|d| d == language) {
            Role::Donor
        } else if self.recipients.iter().any(|r| r == language) {
            Role::Recipient
        } else {
            self.default.unwrap_or(if self.donors.is_empty() {
                Role::Unrestricted
            } else {
                Role::Recipient
            })
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum UnknownSymbolPolicy {
    #[default]
    Error,
    /// Drop the offending form and log it.
    Skip,
}

impl std::fmt::Display for UnknownSymbolPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            UnknownSymbolPolicy::Error => "error",
            UnknownSymbolPolicy::Skip => "skip",
        })
    }
}

impl std::str::FromStr for UnknownSymbolPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "error" => Ok(Self::Error),
            "skip" => Ok(Self::Skip),
            other => Err(Error::Config(format!("unknown symbol policy {other:?}"))),
        }
    }
}

/// Resources needed to turn raw IPA strings into segments and ASJP strings.
#[derive(Clone, Debug)]
pub struct Phonology {
    pub features: FeatureTable,
    pub asjp: AsjpMapping,
}

impl Phonology {
    pub fn load(features: impl AsRef<Path>, asjp: impl AsRef<Path>) -> Result<Self> {
        Ok(Self {
            features: FeatureTable::load(features)?,
            asjp: AsjpMapping::load(asjp)?,
        })
    }

    pub fn analyze(&self, form: &str) -> Result<(Vec<Segment>, String)> {
        let segments = tokenize_ipa(form, &self.features)?;
        let asjp = to_asjp(&segments, &self.asjp)?;
        if asjp.is_empty() {
            return Err(Error::Invalid(format!("{form:?} has no ASJP symbols")));
        }
        Ok((segments, asjp))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WordForm {
    pub id: String,
    pub language: String,
    pub family: Option<String>,
    pub concept: String,
    /// The FORM cell as read.
    pub raw_form: String,
    pub segments: Vec<Segment>,
    pub asjp: String,
    pub gold_borrowed: Option<bool>,
    pub gold_donor_language: Option<String>,
}

impl WordForm {
    /// Family name, defaulting to the language itself.
    pub fn family(&self) -> &str {
        self.family.as_deref().unwrap_or(&self.language)
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.segments.iter().map(|s| s.symbol.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Wordlist {
    forms: Vec<WordForm>,
    languages: BTreeMap<String, Role>,
    concepts: BTreeSet<String>,
    index: HashMap<String, usize>,
}

/// Removes the multi-word separators `+` and `_`.
pub fn clean_form(raw: &str) -> Result<String> {
    let cleaned: String = raw.chars().filter(|&c| c != '+' && c != '_').collect();
    if cleaned.trim().is_empty() {
        return Err(Error::EmptyForm { id: raw.to_string() });
    }
    Ok(cleaned)
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "1" => Some(true),
        "false" | "0" => Some(false),
        _ => None,
    }
}

fn non_empty(s: Option<&&str>) -> Option<String> {
    s.map(|v| v.trim()).filter(|v| !v.is_empty()).map(str::to_string)
}

impl Wordlist {
    pub fn new(forms: Vec<WordForm>, roles: &RoleAssignment) -> Result<Self> {
        let mut index = HashMap::with_capacity(forms.len());
        let mut languages = BTreeMap::new();
        let mut concepts = BTreeSet::new();
        for (i, form) in forms.iter().enumerate() {
            if form.segments.is_empty() {
                return Err(Error::EmptyForm { id: form.id.clone() });
            }
            if form.gold_donor_language.is_some() && form.gold_borrowed != Some(true) {
                return Err(Error::Invalid(format!(
                    "form {:?} has a donor language but is not marked borrowed",
                    form.id
                )));
            }
            if index.insert(form.id.clone(), i).is_some() {
                return Err(Error::Invalid(format!("duplicate ID {:?}", form.id)));
            }
            languages
                .entry(form.language.clone())
                .or_insert_with(|| roles.role_of(&form.language));
            concepts.insert(form.concept.clone());
        }
        Ok(Self {
            forms,
            languages,
            concepts,
            index,
        })
    }

    pub fn load(
        path: impl AsRef<Path>,
        roles: &RoleAssignment,
        phonology: &Phonology,
        policy: UnknownSymbolPolicy,
    ) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&read_to_string(path)?, &path.display().to_string(), roles, phonology, policy)
    }

    pub fn parse(
        text: &str,
        source: &str,
        roles: &RoleAssignment,
        phonology: &Phonology,
        policy: UnknownSymbolPolicy,
    ) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let header: Vec<&str> = match lines.next() {
            Some((_, h)) => h.split('\t').map(str::trim).collect(),
            None => return Err(Error::parse(source, 1, "missing header")),
        };
        let col = |name: &str| header.iter().position(|h| *h == name);
        let required = |name: &str| {
            col(name).ok_or_else(|| Error::parse(source, 1, format!("missing required column {name}")))
        };
        let (c_id, c_lang, c_concept, c_form) =
            (required("ID")?, required("LANGUAGE")?, required("CONCEPT")?, required("FORM")?);
        let (c_family, c_borrowed, c_donor) = (col("FAMILY"), col("BORROWED"), col("DONOR_LANGUAGE"));

        let mut forms = Vec::new();
        let mut seen = HashSet::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split('\t').collect();
            let cell = |c: usize| cells.get(c).map(|s| s.trim()).unwrap_or("");
            let id = cell(c_id).to_string();
            if id.is_empty() {
                return Err(Error::parse(source, lineno, "empty ID"));
            }
            if !seen.insert(id.clone()) {
                return Err(Error::parse(source, lineno, format!("duplicate ID {id:?}")));
            }
            let raw_form = cell(c_form).to_string();
            let cleaned = clean_form(&raw_form)
                .map_err(|_| Error::parse(source, lineno, format!("form {id:?} is empty after cleanup")))?;
            let gold_borrowed = match c_borrowed.map(cell).filter(|s| !s.is_empty()) {
                None => None,
                Some(v) => Some(parse_bool(v).ok_or_else(|| {
                    Error::parse(source, lineno, format!("BORROWED value {v:?} is not a boolean"))
                })?),
            };
            let gold_donor_language = non_empty(c_donor.and_then(|c| cells.get(c)));
            if gold_donor_language.is_some() && gold_borrowed != Some(true) {
                return Err(Error::parse(source, lineno, "DONOR_LANGUAGE set on a form not marked borrowed"));
            }
            let (segments, asjp) = match phonology.analyze(&cleaned) {
                Ok(v) => v,
                Err(e) => match policy {
                    UnknownSymbolPolicy::Error => {
                        return Err(Error::parse(source, lineno, format!("form {id:?}: {e}")))
                    }
                    UnknownSymbolPolicy::Skip => {
                        log::warn!("{source}:{lineno}: skipping form {id:?}: {e}");
                        continue;
                    }
                },
            };
            forms.push(WordForm {
                id,
                language: cell(c_lang).to_string(),
                family: non_empty(c_family.and_then(|c| cells.get(c))),
                concept: cell(c_concept).to_string(),
                raw_form,
                segments,
                asjp,
                gold_borrowed,
                gold_donor_language,
            });
        }
        Self::new(forms, roles)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("ID\tLANGUAGE\tFAMILY\tCONCEPT\tFORM\tBORROWED\tDONOR_LANGUAGE\n");
        for f in &self.forms {
            let borrowed = match f.gold_borrowed {
                Some(true) => "true",
                Some(false) => "false",
                None => "",
            };
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                f.id,
                f.language,
                f.family.as_deref().unwrap_or(""),
                f.concept,
                f.raw_form,
                borrowed,
                f.gold_donor_language.as_deref().unwrap_or("")
            );
        }
        out
    }

    pub fn forms(&self) -> &[WordForm] {
        &self.forms
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&WordForm> {
        self.index.get(id).map(|&i| &self.forms[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn languages(&self) -> &BTreeMap<String, Role> {
        &self.languages
    }

    pub fn role(&self, language: &str) -> Option<Role> {
        self.languages.get(language).copied()
    }

    pub fn concepts(&self) -> &BTreeSet<String> {
        &self.concepts
    }

    pub fn languages_with_role(&self, role: Role) -> impl Iterator<Item = &str> {
        self.languages
            .iter()
            .filter(move |(_, r)| **r == role)
            .map(|(l, _)| l.as_str())
    }

    pub fn has_gold(&self) -> bool {
        self.forms.iter().any(|f| f.gold_borrowed.is_some())
    }

    /// Keeps only the forms whose ids are listed, preserving order and roles.
    pub fn subset(&self, ids: &[String]) -> Result<Self> {
        let keep: HashSet<&str> = ids.iter().map(String::as_str).collect();
        for id in &keep {
            if !self.index.contains_key(*id) {
                return Err(Error::UnknownId(id.to_string()));
            }
        }
        let forms: Vec<WordForm> = self.forms.iter().filter(|f| keep.contains(f.id.as_str())).cloned().collect();
        self.rebuild(forms)
    }

    fn rebuild(&self, forms: Vec<WordForm>) -> Result<Self> {
        let roles = RoleAssignment {
            donors: self.languages_with_role(Role::Donor).map(str::to_string).collect(),
            recipients: self.languages_with_role(Role::Recipient).map(str::to_string).collect(),
            default: Some(Role::Unrestricted),
        };
        Self::new(forms, &roles)
    }
}

/// Concept pairs with their colexification proportion.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ColexNetwork {
    pairs: BTreeMap<(String, String), f64>,
    neighbours: BTreeMap<String, BTreeSet<String>>,
}

fn unordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

pub const DEFAULT_COLEX_MIN_PROPORTION: f64 = 0.05;

impl ColexNetwork {
    pub fn load(path: impl AsRef<Path>, min_proportion: f64) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&read_to_string(path)?, &path.display().to_string(), min_proportion)
    }

    pub fn parse(text: &str, source: &str, min_proportion: f64) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let header: Vec<&str> = lines
            .next()
            .map(|(_, h)| h.split('\t').map(str::trim).collect())
            .unwrap_or_default();
        let col = |name: &str| {
            header
                .iter()
                .position(|h| *h == name)
                .ok_or_else(|| Error::parse(source, 1, format!("missing column {name}")))
        };
        let (ca, cb, cp) = (col("CONCEPT_A")?, col("CONCEPT_B")?, col("PROPORTION")?);
        let mut entries = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split('\t').map(str::trim).collect();
            let get = |c: usize| cells.get(c).copied().unwrap_or("");
            let p: f64 = get(cp)
                .parse()
                .map_err(|_| Error::parse(source, idx + 1, format!("bad proportion {:?}", get(cp))))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::parse(source, idx + 1, format!("proportion {p} outside [0, 1]")));
            }
            entries.push((get(ca).to_string(), get(cb).to_string(), p));
        }
        Self::from_pairs(entries, min_proportion)
    }

    pub fn from_pairs(
        entries: impl IntoIterator<Item = (String, String, f64)>,
        min_proportion: f64,
    ) -> Result<Self> {
        let mut net = Self::default();
        for (a, b, p) in entries {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Invalid(format!("proportion {p} outside [0, 1]")));
            }
            if p < min_proportion || a == b {
                continue;
            }
            let key = unordered(&a, &b);
            let slot = net.pairs.entry(key).or_insert(p);
            *slot = slot.max(p);
            net.neighbours.entry(a.clone()).or_default().insert(b.clone());
            net.neighbours.entry(b).or_default().insert(a);
        }
        Ok(net)
    }

    pub fn proportion(&self, a: &str, b: &str) -> Option<f64> {
        self.pairs.get(&unordered(a, b)).copied()
    }

    pub fn related(&self, concept: &str) -> impl Iterator<Item = &str> {
        self.neighbours
            .get(concept)
            .into_iter()
            .flat_map(|s| s.iter().map(String::as_str))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Concept-stratified folds: concepts in shuffled order, each concept's
/// forms dealt round-robin onto the folds from a running counter.
pub fn make_splits(wordlist: &Wordlist, n_folds: usize, seed: u64) -> Result<Vec<Fold>> {
    if n_folds < 2 {
        return Err(Error::Invalid("need at least 2 folds".into()));
    }
    if n_folds > wordlist.concepts().len() {
        return Err(Error::Invalid(format!(
            "{n_folds} folds requested but only {} concepts",
            wordlist.concepts().len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_concept: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for f in wordlist.forms() {
        by_concept.entry(&f.concept).or_default().push(&f.id);
    }
    let mut groups: Vec<Vec<&str>> = by_concept.into_values().collect();
    groups.shuffle(&mut rng);
    let mut fold_of: HashMap<&str, usize> = HashMap::new();
    let mut counter = 0usize;
    for group in &mut groups {
        group.shuffle(&mut rng);
        for id in group.iter() {
            fold_of.insert(id, counter % n_folds);
            counter += 1;
        }
    }
    Ok((0..n_folds)
        .map(|k| {
            let (test, train): (Vec<&WordForm>, Vec<&WordForm>) =
                wordlist.forms().iter().partition(|f| fold_of[f.id.as_str()] == k);
            Fold {
                train: train.into_iter().map(|f| f.id.clone()).collect(),
                test: test.into_iter().map(|f| f.id.clone()).collect(),
            }
        })
        .collect())
}

/// Nested folds for the reduced-data setting: each outer test portion is
/// itself split into `n_folds` sub-folds.
pub fn nested_splits(wordlist: &Wordlist, n_folds: usize, seed: u64) -> Result<Vec<(Wordlist, Vec<Fold>)>> {
    make_splits(wordlist, n_folds, seed)?
        .into_iter()
        .enumerate()
        .map(|(k, outer)| {
            let portion = wordlist.subset(&outer.test)?;
            let inner = make_splits(&portion, n_folds, seed.wrapping_add(k as u64 + 1))?;
            Ok((portion, inner))
        })
        .collect()
}

pub fn split_manifest(folds: &[Fold]) -> String {
    let mut out = String::from("FOLD\tROLE\tID\n");
    for (k, fold) in folds.iter().enumerate() {
        for id in &fold.train {
            let _ = writeln!(out, "{k}\ttrain\t{id}");
        }
        for id in &fold.test {
            let _ = writeln!(out, "{k}\ttest\t{id}");
        }
    }
    out
}

/// Drops `round(fraction * #borrowed)` gold-borrowed forms chosen uniformly.
pub fn remove_borrowings(wordlist: &Wordlist, fraction: f64, seed: u64) -> Result<Wordlist> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Invalid(format!("fraction {fraction} outside [0, 1]")));
    }
    if !wordlist.has_gold() {
        return Err(Error::MissingGold("wordlist carries no BORROWED annotations".into()));
    }
    let mut borrowed: Vec<&str> = wordlist
        .forms()
        .iter()
        .filter(|f| f.gold_borrowed == Some(true))
        .map(|f| f.id.as_str())
        .collect();
    let n_remove = (fraction * borrowed.len() as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    borrowed.shuffle(&mut rng);
    let removed: HashSet<&str> = borrowed.into_iter().take(n_remove).collect();
    let forms = wordlist
        .forms()
        .iter()
        .filter(|f| !removed.contains(f.id.as_str()))
        .cloned()
        .collect();
    wordlist.rebuild(forms)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::phon::{CodepointClass, FallbackRule, RuleAction, FEATURE_DIM};
    use proptest::prelude::*;

    pub(crate) fn toy_phonology() -> Phonology {
        let symbols = ["p", "t", "k", "s", "m", "n", "l", "a", "e", "i", "o", "u", "b", "d", "g"];
        let features =
            FeatureTable::from_entries(symbols.iter().enumerate().map(|(i, s)| (*s, [(i % 3) as u8; FEATURE_DIM])))
                .unwrap();
        let asjp = AsjpMapping::new(
            symbols.iter().map(|s| (s.to_string(), s.chars().next().unwrap())),
            vec![FallbackRule {
                class: CodepointClass::Modifier,
                action: RuleAction::Strip,
            }],
        )
        .unwrap();
        Phonology { features, asjp }
    }

    const FIXTURE: &str = "ID\tLANGUAGE\tCONCEPT\tFORM\tBORROWED\tDONOR_LANGUAGE
1\tSpanish\tHAND\tmano\t\t
2\tQuechua\tHAND\tmaki\tfalse\t
3\tQuechua\tCOW\tbaka\ttrue\tSpanish
";

    fn load(text: &str) -> Result<Wordlist> {
        Wordlist::parse(
            text,
            "fixture",
            &RoleAssignment::donor_fixed("Spanish"),
            &toy_phonology(),
            UnknownSymbolPolicy::Error,
        )
    }

    #[test]
    fn loads_three_rows() {
        let wl = load(FIXTURE).unwrap();
        assert_eq!(wl.len(), 3);
        assert_eq!(wl.role("Spanish"), Some(Role::Donor));
        assert_eq!(wl.role("Quechua"), Some(Role::Recipient));
        let cow = wl.get("3").unwrap();
        assert_eq!(cow.gold_borrowed, Some(true));
        assert_eq!(cow.gold_donor_language.as_deref(), Some("Spanish"));
        assert_eq!(cow.family(), "Quechua");
        assert_eq!(cow.asjp, "baka");
    }

    #[test]
    fn separator_only_form_rejected() {
        let text = "ID\tLANGUAGE\tCONCEPT\tFORM\n1\tA\tX\t+_\n";
        assert!(matches!(load(text), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn missing_column_and_duplicate_id() {
        assert!(load("ID\tLANGUAGE\tFORM\n1\tA\tpa\n").is_err());
        let dup = "ID\tLANGUAGE\tCONCEPT\tFORM\n1\tA\tX\tpa\n1\tB\tX\tpa\n";
        assert!(matches!(load(dup), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn unknown_symbols_can_be_skipped() {
        let text = "ID\tLANGUAGE\tCONCEPT\tFORM\n1\tA\tX\tpa\n2\tA\tY\tpʘa\n";
        assert!(load(text).is_err());
        let wl = Wordlist::parse(
            text,
            "t",
            &RoleAssignment::unrestricted(),
            &toy_phonology(),
            UnknownSymbolPolicy::Skip,
        )
        .unwrap();
        assert_eq!(wl.len(), 1);
    }

    #[test]
    fn clean_form_examples() {
        assert_eq!(clean_form("abo+kato").unwrap(), "abokato");
        assert_eq!(clean_form("kasa").unwrap(), "kasa");
        assert_eq!(clean_form("a_b").unwrap(), "ab");
        assert!(clean_form("+_").is_err());
    }

    #[test]
    fn colex_threshold() {
        let text = "CONCEPT_A\tCONCEPT_B\tPROPORTION\nA\tB\t0.07\nA\tC\t0.03\n";
        let net = ColexNetwork::parse(text, "c", DEFAULT_COLEX_MIN_PROPORTION).unwrap();
        assert_eq!(net.proportion("B", "A"), Some(0.07));
        assert_eq!(net.proportion("A", "C"), None);
        assert_eq!(net.related("B").collect::<Vec<_>>(), ["A"]);
        let bad = "CONCEPT_A\tCONCEPT_B\tPROPORTION\nA\tB\t1.5\n";
        assert!(ColexNetwork::parse(bad, "c", 0.05).is_err());
    }

    pub(crate) fn synthetic(concepts: usize, per_concept: usize, borrowed_every: usize) -> Wordlist {
        let syll = ["pa", "ti", "ku", "so", "me", "na", "lo", "bi", "du", "ge"];
        let mut forms = Vec::new();
        let phon = toy_phonology();
        for c in 0..concepts {
            for k in 0..per_concept {
                let i = c * per_concept + k;
                let text = format!("{}{}", syll[i % 10], syll[(i / 10 + c) % 10]);
                let (segments, asjp) = phon.analyze(&text).unwrap();
                let borrowed = borrowed_every > 0 && i.is_multiple_of(borrowed_every);
                forms.push(WordForm {
                    id: format!("f{i:04}"),
                    language: format!("L{k}"),
                    family: None,
                    concept: format!("C{c:03}"),
                    raw_form: text,
                    segments,
                    asjp,
                    gold_borrowed: Some(borrowed),
                    gold_donor_language: borrowed.then(|| "L0".to_string()),
                });
            }
        }
        Wordlist::new(forms, &RoleAssignment::unrestricted()).unwrap()
    }

    #[test]
    fn one_form_per_fold() {
        let wl = synthetic(10, 1, 0);
        let folds = make_splits(&wl, 10, 3).unwrap();
        assert!(folds.iter().all(|f| f.test.len() == 1 && f.train.len() == 9));
        assert_eq!(folds, make_splits(&wl, 10, 3).unwrap());
    }

    #[test]
    fn hundred_forms_ten_folds() {
        let wl = synthetic(25, 4, 0);
        for f in make_splits(&wl, 10, 11).unwrap() {
            assert!((9..=11).contains(&f.test.len()), "{}", f.test.len());
        }
        assert!(make_splits(&wl, 26, 0).is_err());
        assert!(make_splits(&wl, 1, 0).is_err());
    }

    #[test]
    fn nested_splits_cover_each_portion() {
        let wl = synthetic(40, 5, 0);
        let nested = nested_splits(&wl, 2, 5).unwrap();
        assert_eq!(nested.len(), 2);
        let total: usize = nested.iter().map(|(p, _)| p.len()).sum();
        assert_eq!(total, wl.len());
        for (portion, inner) in &nested {
            let tested: usize = inner.iter().map(|f| f.test.len()).sum();
            assert_eq!(tested, portion.len());
        }
    }

    #[test]
    fn removes_exact_count() {
        let wl = synthetic(20, 2, 2);
        let borrowed = |w: &Wordlist| w.forms().iter().filter(|f| f.gold_borrowed == Some(true)).count();
        assert_eq!(borrowed(&wl), 20);
        let reduced = remove_borrowings(&wl, 0.75, 1).unwrap();
        assert_eq!(borrowed(&reduced), 5);
        assert_eq!(reduced.len(), 25);
        assert_eq!(remove_borrowings(&wl, 0.0, 1).unwrap(), wl);
        assert_eq!(borrowed(&remove_borrowings(&wl, 1.0, 1).unwrap()), 0);
        for f in reduced.forms() {
            assert_eq!(f, wl.get(&f.id).unwrap());
        }
        let no_gold = Wordlist::new(
            wl.forms()
                .iter()
                .cloned()
                .map(|mut f| {
                    f.gold_borrowed = None;
                    f.gold_donor_language = None;
                    f
                })
                .collect(),
            &RoleAssignment::unrestricted(),
        )
        .unwrap();
        assert!(matches!(remove_borrowings(&no_gold, 0.5, 0), Err(Error::MissingGold(_))));
    }

    #[test]
    fn tsv_round_trip() {
        let wl = load(FIXTURE).unwrap();
        let again = load(&wl.to_tsv()).unwrap();
        assert_eq!(wl, again);
        let manifest = split_manifest(&make_splits(&synthetic(4, 1, 0), 2, 0).unwrap());
        assert!(manifest.starts_with("FOLD\tROLE\tID\n"));
        assert_eq!(manifest.lines().count(), 1 + 2 * 4);
    }

    proptest! {
        #[test]
        fn splits_partition_ids(concepts in 2usize..15, per in 1usize..5, folds in 2usize..6, seed in any::<u64>()) {
            prop_assume!(folds <= concepts);
            let wl = synthetic(concepts, per, 0);
            let splits = make_splits(&wl, folds, seed).unwrap();
            let mut seen = HashSet::new();
            for f in &splits {
                prop_assert_eq!(f.train.len() + f.test.len(), wl.len());
                for id in &f.test {
                    prop_assert!(seen.insert(id.clone()));
                    prop_assert!(!f.train.contains(id));
                }
            }
            prop_assert_eq!(seen.len(), wl.len());
        }
    }
}
