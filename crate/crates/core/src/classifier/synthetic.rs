//! Seeded linearly separable sequences for exercising the classifiers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::Condition;

use super::{FeatureSequence, CLASSES};

pub const SEPARABLE_DIM: usize = 36;
pub const SEPARABLE_NOISE_SD: f64 = 0.05;

/// Prototype step for class `k`: ones on the k-th block of nine features.
pub fn prototype(class: usize) -> Vec<f64> {
    let block = SEPARABLE_DIM / CLASSES;
    (0..SEPARABLE_DIM)
        .map(|j| if j / block == class { 1.0 } else { 0.0 })
        .collect()
}

/// `per_class` sequences per condition, classes interleaved, each with
/// 3..=`max_len` valid steps of prototype plus Gaussian noise.
pub fn separable_dataset(per_class: usize, max_len: usize, seed: u64) -> Vec<FeatureSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, SEPARABLE_NOISE_SD).expect("valid sd");
    let min_len = 3.min(max_len);
    let mut out = Vec::with_capacity(per_class * CLASSES);
    for i in 0..per_class * CLASSES {
        let class = i % CLASSES;
        let proto = prototype(class);
        let len = rng.gen_range(min_len..=max_len);
        let rows = (0..len)
            .map(|_| proto.iter().map(|&p| p + noise.sample(&mut rng)).collect())
            .collect();
        out.push(
            FeatureSequence::from_rows(format!("synthetic-{i:04}"), Condition::ALL[class], rows, max_len)
                .expect("non-empty rows"),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_and_seeded() {
        let d = separable_dataset(5, 10, 1);
        assert_eq!(d.len(), 20);
        for c in Condition::ALL {
            assert_eq!(d.iter().filter(|s| s.label == c).count(), 5);
        }
        assert!(d.iter().all(|s| s.len() == 10 && s.valid_steps() >= 3));
        assert_eq!(d, separable_dataset(5, 10, 1));
        assert_ne!(d, separable_dataset(5, 10, 2));
    }

    #[test]
    fn prototypes_are_disjoint() {
        for a in 0..CLASSES {
            assert_eq!(prototype(a).iter().sum::<f64>(), 9.0);
            for b in (a + 1)..CLASSES {
                let overlap: f64 = prototype(a).iter().zip(prototype(b)).map(|(x, y)| x * y).sum();
                assert_eq!(overlap, 0.0);
            }
        }
    }
}
