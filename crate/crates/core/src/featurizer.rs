//! Normalized word feature vectors.
//!
//! Component `j` of a word's vector is `λ_j·n_j·x_j / Σ_k λ_k·n_k·x_k`, where
//! `x_j` is the word's membership in feature `j`'s keyword set and `n_j` is
//! the number of labels that feature groups. Words without any membership
//! get the all-zero vector.

use std::fmt::Write as _;

use crate::corpus::Sentence;
use crate::features::{FeatureRegistry, Membership, NUM_FEATURES};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; NUM_FEATURES]);

impl FeatureVector {
    pub const ZERO: FeatureVector = FeatureVector([0.0; NUM_FEATURES]);

    pub fn components(&self) -> &[f64; NUM_FEATURES] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&b| b == 0.0)
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Comma-separated components with six decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(NUM_FEATURES * 9);
        for (j, b) in self.0.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{b:.6}").unwrap();
        }
        out
    }
}

/// Weighted, label-count-scaled normalization of a membership pattern.
pub fn normalized_vector(
    membership: &Membership,
    label_counts: &[usize; NUM_FEATURES],
    weights: &[f64; NUM_FEATURES],
) -> FeatureVector {
    let raw: [f64; NUM_FEATURES] = std::array::from_fn(|j| {
        if membership[j] {
            weights[j] * label_counts[j] as f64
        } else {
            0.0
        }
    });
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        FeatureVector(raw.map(|r| r / total))
    } else {
        FeatureVector::ZERO
    }
}

pub fn feature_vector(registry: &FeatureRegistry, word: &str) -> FeatureVector {
    normalized_vector(
        &registry.membership(word),
        &registry.label_counts(),
        &registry.weights().0,
    )
}

pub fn featurize_sentence(registry: &FeatureRegistry, sentence: &Sentence) -> Vec<FeatureVector> {
    featurize_words(registry, sentence.tokens().iter().map(|t| t.norm.as_str()))
}

pub fn featurize_words<'a>(
    registry: &FeatureRegistry,
    words: impl IntoIterator<Item = &'a str>,
) -> Vec<FeatureVector> {
    let counts = registry.label_counts();
    let weights = registry.weights().0;
    words
        .into_iter()
        .map(|w| normalized_vector(&registry.membership(w), &counts, &weights))
        .collect()
}
