//! Deterministic synthetic wordlists with planted borrowings, over the
//! bundled IPA inventory.

use std::fmt::Write as _;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bundled;
use crate::corpus::{RoleAssignment, UnknownSymbolPolicy, Wordlist};

const CONSONANTS: &[&str] = &["p", "t", "k", "m", "n", "s", "l", "r", "b", "d", "g", "f", "h", "j", "v", "z", "x", "ŋ", "ʃ"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];

/// Sound pairs that stay close under substitution.
const NEIGHBOURS: &[(&str, &str)] = &[
    ("p", "b"),
    ("t", "d"),
    ("k", "g"),
    ("f", "v"),
    ("s", "z"),
    ("m", "n"),
    ("l", "r"),
    ("e", "i"),
    ("o", "u"),
    ("a", "e"),
];

pub const HEADER: &str = "ID\tLANGUAGE\tCONCEPT\tFORM\tBORROWED\tDONOR_LANGUAGE\n";

/// A random CV form of `syllables` syllables, returned as segments.
pub fn random_form<R: Rng>(rng: &mut R, syllables: usize) -> Vec<&'static str> {
    let mut out = Vec::with_capacity(2 * syllables);
    for _ in 0..syllables {
        out.push(*CONSONANTS.choose(rng).expect("non-empty"));
        out.push(*VOWELS.choose(rng).expect("non-empty"));
    }
    out
}

fn neighbour(s: &'static str) -> Option<&'static str> {
    NEIGHBOURS
        .iter()
        .find_map(|&(a, b)| if a == s { Some(b) } else if b == s { Some(a) } else { None })
}

/// `form` with one segment swapped for a close sound, when one exists.
pub fn near_copy<R: Rng>(form: &[&'static str], rng: &mut R) -> Vec<&'static str> {
    let mut out = form.to_vec();
    let options: Vec<usize> = (0..out.len()).filter(|&i| neighbour(out[i]).is_some()).collect();
    if let Some(&i) = options.choose(rng) {
        out[i] = neighbour(out[i]).expect("filtered");
    }
    out
}

fn push_row(out: &mut String, id: &str, lang: &str, concept: &str, form: &[&str], donor: Option<&str>) {
    let _ = writeln!(
        out,
        "{id}\t{lang}\t{concept}\t{}\t{}\t{}",
        form.concat(),
        donor.is_some(),
        donor.unwrap_or("")
    );
}

/// `clusters` concepts, each with one form per language. Every form of a
/// concept is a near-copy of a shared base form; language `L00` is the
/// donor of all the others.
pub fn cluster_corpus_tsv(seed: u64, clusters: usize, languages: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::from(HEADER);
    for c in 0..clusters {
        let base = random_form(&mut rng, 3);
        for l in 0..languages {
            let form = if l == 0 || rng.random_bool(0.3) {
                base.clone()
            } else {
                near_copy(&base, &mut rng)
            };
            let donor = (l > 0).then_some("L00");
            push_row(&mut out, &format!("c{c:02}l{l:02}"), &format!("L{l:02}"), &format!("C{c:02}"), &form, donor);
        }
    }
    out
}

/// Parses a synthetic TSV with the bundled phonology, L00 as donor.
pub fn load(tsv: &str, donor: &str) -> Wordlist {
    Wordlist::parse(
        tsv,
        "synthetic",
        &RoleAssignment::donor_fixed(donor),
        &bundled::phonology(),
        UnknownSymbolPolicy::Error,
    )
    .expect("synthetic wordlists use the bundled inventory")
}

/// 200 forms in 20 clusters of 10.
pub fn cluster_corpus(seed: u64) -> Wordlist {
    load(&cluster_corpus_tsv(seed, 20, 10), "L00")
}

pub const FIXTURE_DONOR: &str = "Donor";

/// Donor plus two recipients over 12 concepts. Each recipient holds two
/// near-copies of donor forms; every other recipient form is independent.
pub fn planted_fixture_tsv(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::from(HEADER);
    let planted = |lang: usize, c: usize| (lang == 1 && c < 2) || (lang == 2 && (2..4).contains(&c));
    for c in 0..12 {
        let concept = format!("C{c:02}");
        let donor_form = random_form(&mut rng, 3);
        push_row(&mut out, &format!("d{c:02}"), FIXTURE_DONOR, &concept, &donor_form, None);
        for (lang, name) in [(1, "RecipA"), (2, "RecipB")] {
            let id = format!("{}{c:02}", if lang == 1 { "a" } else { "b" });
            if planted(lang, c) {
                let copy = near_copy(&donor_form, &mut rng);
                push_row(&mut out, &id, name, &concept, &copy, Some(FIXTURE_DONOR));
            } else {
                let syllables = rng.random_range(2..=3);
                let form = random_form(&mut rng, syllables);
                push_row(&mut out, &id, name, &concept, &form, None);
            }
        }
    }
    out
}

pub fn planted_fixture(seed: u64) -> Wordlist {
    load(&planted_fixture_tsv(seed), FIXTURE_DONOR)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cluster_corpus_shape() {
        let wl = cluster_corpus(1);
        assert_eq!(wl.len(), 200);
        assert_eq!(wl.concepts().len(), 20);
        assert_eq!(wl.forms().iter().filter(|f| f.gold_borrowed == Some(true)).count(), 180);
        assert_eq!(cluster_corpus_tsv(1, 20, 10), cluster_corpus_tsv(1, 20, 10));
    }

    #[test]
    fn planted_fixture_shape() {
        let wl = planted_fixture(7);
        assert_eq!(wl.len(), 36);
        assert_eq!(wl.languages().len(), 3);
        let planted: Vec<&str> = wl
            .forms()
            .iter()
            .filter(|f| f.gold_borrowed == Some(true))
            .map(|f| f.id.as_str())
            .collect();
        assert_eq!(planted, ["a00", "a01", "b02", "b03"]);
    }

    #[test]
    fn near_copy_changes_one_segment() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let f = random_form(&mut rng, 3);
            let g = near_copy(&f, &mut rng);
            assert_eq!(f.len(), g.len());
            assert!(f.iter().zip(&g).filter(|(a, b)| a != b).count() <= 1);
        }
    }
}
