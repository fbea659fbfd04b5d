//! Slot filling with gazetteer-derived word feature vectors and a small
//! convolutional sequence labeler.
//!
//! The pipeline: [`corpus`] reads labeled sentences, [`features`] partitions
//! the label inventory into 18 features and builds their keyword sets,
//! [`featurizer`] turns keyword-set membership into a normalized vector per
//! word, [`nn`] trains a convolutional tagger on embeddings optionally
//! concatenated with those vectors, and [`metrics`] scores its output.

pub mod bundle;
pub mod corpus;
pub mod eval;
pub mod features;
pub mod featurizer;
pub mod metrics;
pub mod nn;
pub mod synth;

pub use corpus::{
    context_window, parse_corpus, Corpus, CorpusError, LabelId, LabelInventory, Sentence, Token,
    Vocabulary, WindowMode,
};
pub use features::{
    build_keyword_sets, load_feature_spec, split_multiword, FeatureError, FeatureRegistry,
    FeatureSpec, GazetteerBundle, GazetteerFile, Weights, NUM_FEATURES,
};
pub use featurizer::{feature_vector, featurize_sentence, FeatureVector};
pub use metrics::{confusion_counts, ConfusionCounts, Report};
pub use nn::{Model, NetConfig, NetError, Prediction, Variant};
pub use synth::{gen_synthetic, SynthConfig, SyntheticData};
