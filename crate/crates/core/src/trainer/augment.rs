use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentConfig {
    pub noise_prob: f64,
    pub noise_sigma: f64,
    pub duplication_prob: f64,
    pub swap_prob: f64,
    pub deletion_prob: f64,
    /// Swap and deletion only touch words at least this long.
    pub min_len_for_destructive: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            noise_prob: 0.5,
            noise_sigma: 0.1,
            duplication_prob: 0.1,
            swap_prob: 0.0,
            deletion_prob: 0.0,
            min_len_for_destructive: 4,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("noise_prob", self.noise_prob),
            ("duplication_prob", self.duplication_prob),
            ("swap_prob", self.swap_prob),
            ("deletion_prob", self.deletion_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} is outside [0, 1]")));
            }
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(format!("noise_sigma = {} must be finite and ≥ 0", self.noise_sigma)));
        }
        if self.min_len_for_destructive < 2 {
            return Err(Error::Config("min_len_for_destructive must be at least 2".into()));
        }
        Ok(())
    }
}

/// One augmented view: the edited sequence and whether Gaussian noise is to
/// be added to its embedding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct View<T> {
    pub items: Vec<T>,
    pub noise: bool,
}

/// Duplicates, swaps and deletes segments independently with the configured
/// probabilities. The length floor for swap and deletion is checked against
/// the original length.
pub fn augment<T: Clone, R: Rng + ?Sized>(items: &[T], config: &AugmentConfig, rng: &mut R) -> View<T> {
    let mut out = items.to_vec();
    let long_enough = items.len() >= config.min_len_for_destructive;
    if !out.is_empty() && rng.random_bool(config.duplication_prob) {
        let i = rng.random_range(0..out.len());
        out.insert(i, out[i].clone());
    }
    if long_enough && rng.random_bool(config.swap_prob) {
        let i = rng.random_range(0..out.len() - 1);
        out.swap(i, i + 1);
    }
    if long_enough && rng.random_bool(config.deletion_prob) {
        let i = rng.random_range(0..out.len());
        out.remove(i);
    }
    View {
        items: out,
        noise: rng.random_bool(config.noise_prob),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn off() -> AugmentConfig {
        AugmentConfig {
            noise_prob: 0.0,
            duplication_prob: 0.0,
            ..AugmentConfig::default()
        }
    }

    #[test]
    fn zero_probabilities_are_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let v = augment(&['a', 'b', 'c', 'd', 'e'], &off(), &mut rng);
        assert_eq!(v.items, ['a', 'b', 'c', 'd', 'e']);
        assert!(!v.noise);
    }

    #[test]
    fn duplication_in_place() {
        let cfg = AugmentConfig {
            duplication_prob: 1.0,
            ..off()
        };
        // find a seed whose draw picks index 0
        let mut seen_first = false;
        for seed in 0..64 {
            let v = augment(&['a', 'b'], &cfg, &mut ChaCha8Rng::seed_from_u64(seed));
            assert!(v.items == ['a', 'a', 'b'] || v.items == ['a', 'b', 'b']);
            seen_first |= v.items == ['a', 'a', 'b'];
        }
        assert!(seen_first);
    }

    #[test]
    fn destructive_edits_respect_length_floor() {
        let cfg = AugmentConfig {
            deletion_prob: 1.0,
            swap_prob: 1.0,
            ..off()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(augment(&[1, 2, 3], &cfg, &mut rng).items, [1, 2, 3]);
        let v = augment(&[1, 2, 3, 4], &cfg, &mut rng);
        assert_eq!(v.items.len(), 3);
    }

    #[test]
    fn validation() {
        assert!(AugmentConfig::default().validate().is_ok());
        assert!(AugmentConfig {
            swap_prob: 1.5,
            ..off()
        }
        .validate()
        .is_err());
        assert!(AugmentConfig {
            min_len_for_destructive: 1,
            ..off()
        }
        .validate()
        .is_err());
    }

    proptest! {
        #[test]
        fn preserves_alphabet(items in prop::collection::vec(0u8..6, 1..10), seed: u64,
                              dup in 0.0..=1.0f64, swap in 0.0..=1.0f64, del in 0.0..=1.0f64) {
            let cfg = AugmentConfig { duplication_prob: dup, swap_prob: swap, deletion_prob: del, ..off() };
            let v = augment(&items, &cfg, &mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert!(!v.items.is_empty());
            prop_assert!(v.items.iter().all(|x| items.contains(x)));
            prop_assert!(v.items.len() + 1 >= items.len() && v.items.len() <= items.len() + 1);
        }
    }
}
