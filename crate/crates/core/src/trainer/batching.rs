use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Wordlist;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Sampler {
    #[default]
    ConceptBalanced,
    Random,
}

impl fmt::Display for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sampler::ConceptBalanced => "concept_balanced",
            Sampler::Random => "random",
        })
    }
}

impl FromStr for Sampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "concept_balanced" => Ok(Sampler::ConceptBalanced),
            "random" => Ok(Sampler::Random),
            other => Err(Error::Config(format!("unknown sampler {other:?}"))),
        }
    }
}

/// Splits the wordlist's form indices into batches for one epoch.
///
/// `ConceptBalanced` shuffles the concept order and the forms inside each
/// concept, then deals forms onto `ceil(n / batch_size)` batches with one
/// running counter, so forms of one concept land in different batches
/// whenever there are enough batches.
pub fn make_batches(wordlist: &Wordlist, batch_size: usize, sampler: Sampler, seed: u64) -> Result<Vec<Vec<usize>>> {
    let n = wordlist.len();
    if batch_size < 2 {
        return Err(Error::Config(format!("batch_size {batch_size} is below 2")));
    }
    if batch_size > n {
        return Err(Error::Config(format!("batch_size {batch_size} exceeds the {n} forms in the dataset")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_batches = n.div_ceil(batch_size);
    match sampler {
        Sampler::Random => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            // equal split, sizes within one of each other
            let mut batches = vec![Vec::new(); n_batches];
            for (k, i) in order.into_iter().enumerate() {
                batches[k * n_batches / n].push(i);
            }
            Ok(batches)
        }
        Sampler::ConceptBalanced => {
            let mut by_concept: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, f) in wordlist.forms().iter().enumerate() {
                by_concept.entry(f.concept.as_str()).or_default().push(i);
            }
            let mut groups: Vec<Vec<usize>> = by_concept.into_values().collect();
            groups.shuffle(&mut rng);
            let mut batches = vec![Vec::new(); n_batches];
            let mut slot = 0;
            for mut g in groups {
                g.shuffle(&mut rng);
                for i in g {
                    batches[slot % n_batches].push(i);
                    slot += 1;
                }
            }
            Ok(batches)
        }
    }
}
