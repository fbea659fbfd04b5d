//! Seeded generator for template-based slot-filling corpora with matching
//! gazetteers.
//!
//! Every lexicon is split into a train-visible and a test-only partition.
//! The train split draws slot values from the former, the test split from
//! the latter, and the emitted gazetteers contain both.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{normalize, Corpus, LabelId, LabelInventory, Sentence, Token};
use crate::features::{FeatureSpec, GazetteerFile, MANIFEST_FILE};

pub const DEFAULT_CONFIG: &str = include_str!("../data/synth/default.toml");

pub const TRAIN_FILE: &str = "train.txt";
pub const TEST_FILE: &str = "test.txt";
pub const LABELS_FILE: &str = "labels.txt";
pub const GAZETTEER_DIR: &str = "gazetteers";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("bad generator config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("generator config has no templates")]
    NoTemplates,
    #[error("template {template:?}: malformed placeholder {placeholder:?}")]
    BadPlaceholder {
        template: String,
        placeholder: String,
    },
    #[error("template {template:?} references unknown lexicon {lexicon:?}")]
    UnknownLexicon { template: String, lexicon: String },
    #[error("lexicon {lexicon:?} has an empty {partition} partition")]
    EmptyLexicon {
        lexicon: String,
        partition: &'static str,
    },
    #[error("label {0:?} is not in the label inventory")]
    UnknownLabel(String),
    #[error("lexicon {lexicon:?} targets unknown feature {feature:?}")]
    UnknownFeature { lexicon: String, feature: String },
    #[error("test-only word {word:?} also appears in training material")]
    Leak { word: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    /// Feature whose gazetteer file receives this lexicon's entries.
    pub gazetteer: String,
    pub train: Vec<String>,
    #[serde(default)]
    pub test: Vec<String>,
}

/// Templates are space-separated words; `{lexicon:label}` marks a slot filled
/// from `lexicon` and tagged `B-label` / `I-label`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub train_sentences: usize,
    #[serde(default)]
    pub test_sentences: usize,
    pub templates: Vec<String>,
    pub lexicons: BTreeMap<String, Lexicon>,
}

impl SynthConfig {
    pub fn parse(text: &str) -> Result<Self, SynthError> {
        Ok(toml::from_str(text)?)
    }

    pub fn default_benchmark() -> Self {
        Self::parse(DEFAULT_CONFIG).expect("shipped generator config is valid")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub train: Corpus,
    pub test: Corpus,
    pub gazetteers: Vec<GazetteerFile>,
}

enum Piece {
    Word(String),
    Slot {
        lexicon: String,
        begin: LabelId,
        inside: Option<LabelId>,
    },
}

fn compile(
    template: &str,
    config: &SynthConfig,
    inventory: &LabelInventory,
) -> Result<Vec<Piece>, SynthError> {
    let mut pieces = Vec::new();
    for word in template.split_whitespace() {
        let Some(inner) = word.strip_prefix('{').and_then(|w| w.strip_suffix('}')) else {
            if word.contains(['{', '}']) {
                return Err(SynthError::BadPlaceholder {
                    template: template.into(),
                    placeholder: word.into(),
                });
            }
            pieces.push(Piece::Word(word.to_string()));
            continue;
        };
        let Some((lexicon, label)) = inner
            .split_once(':')
            .filter(|(l, b)| !l.is_empty() && !b.is_empty())
        else {
            return Err(SynthError::BadPlaceholder {
                template: template.into(),
                placeholder: word.into(),
            });
        };
        let lex = config
            .lexicons
            .get(lexicon)
            .ok_or_else(|| SynthError::UnknownLexicon {
                template: template.into(),
                lexicon: lexicon.into(),
            })?;
        let resolve = |prefix: &str| {
            let name = format!("{prefix}-{label}");
            inventory.id(&name).ok_or(SynthError::UnknownLabel(name))
        };
        let multiword = lex
            .train
            .iter()
            .chain(&lex.test)
            .any(|e| e.split_whitespace().count() > 1);
        pieces.push(Piece::Slot {
            lexicon: lexicon.to_string(),
            begin: resolve("B")?,
            inside: if multiword { Some(resolve("I")?) } else { None },
        });
    }
    Ok(pieces)
}

fn words_of(entries: &[String]) -> impl Iterator<Item = String> + '_ {
    entries
        .iter()
        .flat_map(|e| e.split_whitespace().map(normalize))
}

/// Generates train and test corpora plus gazetteers; the same `seed` always
/// yields the same output.
pub fn gen_synthetic(
    config: &SynthConfig,
    seed: u64,
    inventory: &LabelInventory,
    spec: &FeatureSpec,
) -> Result<SyntheticData, SynthError> {
    if config.templates.is_empty() {
        return Err(SynthError::NoTemplates);
    }
    let templates = config
        .templates
        .iter()
        .map(|t| compile(t, config, inventory))
        .collect::<Result<Vec<_>, _>>()?;

    let referenced: BTreeSet<&str> = templates
        .iter()
        .flatten()
        .filter_map(|p| match p {
            Piece::Slot { lexicon, .. } => Some(lexicon.as_str()),
            Piece::Word(_) => None,
        })
        .collect();
    for name in &referenced {
        let lex = &config.lexicons[*name];
        for (partition, entries, needed) in [
            ("train", &lex.train, config.train_sentences > 0),
            ("test", &lex.test, config.test_sentences > 0),
        ] {
            if needed && entries.iter().all(|e| e.trim().is_empty()) {
                return Err(SynthError::EmptyLexicon {
                    lexicon: name.to_string(),
                    partition,
                });
            }
        }
    }
    for (name, lex) in &config.lexicons {
        if spec.position(&lex.gazetteer).is_none() {
            return Err(SynthError::UnknownFeature {
                lexicon: name.clone(),
                feature: lex.gazetteer.clone(),
            });
        }
    }

    let mut seen: BTreeSet<String> = config
        .lexicons
        .values()
        .flat_map(|l| words_of(&l.train))
        .collect();
    seen.extend(templates.iter().flatten().filter_map(|p| match p {
        Piece::Word(w) => Some(normalize(w)),
        Piece::Slot { .. } => None,
    }));
    if let Some(word) = config
        .lexicons
        .values()
        .flat_map(|l| words_of(&l.test))
        .find(|w| seen.contains(w))
    {
        return Err(SynthError::Leak { word });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let outside = inventory.outside();
    let mut generate = |count: usize, test: bool| -> Corpus {
        let sentences = (0..count)
            .map(|_| {
                let template = templates.choose(&mut rng).expect("templates non-empty");
                let mut tokens = Vec::new();
                for piece in template {
                    match piece {
                        Piece::Word(w) => tokens.push(Token::new(w.as_str(), outside)),
                        Piece::Slot {
                            lexicon,
                            begin,
                            inside,
                        } => {
                            let lex = &config.lexicons[lexicon];
                            let pool = if test { &lex.test } else { &lex.train };
                            let entry = pool.choose(&mut rng).expect("partition non-empty");
                            for (k, word) in entry.split_whitespace().enumerate() {
                                let label = if k == 0 {
                                    *begin
                                } else {
                                    inside.unwrap_or(*begin)
                                };
                                tokens.push(Token::new(word, label));
                            }
                        }
                    }
                }
                Sentence::new(tokens).expect("templates produce tokens")
            })
            .collect();
        Corpus::new(sentences)
    };
    let train = generate(config.train_sentences, false);
    let test = generate(config.test_sentences, true);

    let mut by_feature: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for lex in config.lexicons.values() {
        by_feature.entry(&lex.gazetteer).or_default().extend(
            lex.train
                .iter()
                .chain(&lex.test)
                .map(|e| normalize(&e.split_whitespace().collect::<Vec<_>>().join(" ")))
                .filter(|e| !e.is_empty()),
        );
    }
    let gazetteers = by_feature
        .into_iter()
        .map(|(name, entries)| GazetteerFile {
            feature_name: name.to_string(),
            entries: entries.into_iter().collect(),
        })
        .collect();
    Ok(SyntheticData {
        train,
        test,
        gazetteers,
    })
}

impl SyntheticData {
    /// Writes `train.txt`, `test.txt`, `labels.txt` and a `gazetteers/`
    /// directory holding the feature manifest and one file per feature.
    pub fn write(
        &self,
        dir: &Path,
        inventory: &LabelInventory,
        manifest: &str,
    ) -> Result<(), SynthError> {
        let gaz_dir = dir.join(GAZETTEER_DIR);
        fs::create_dir_all(&gaz_dir)?;
        fs::write(dir.join(TRAIN_FILE), self.train.to_conll(inventory))?;
        fs::write(dir.join(TEST_FILE), self.test.to_conll(inventory))?;
        fs::write(dir.join(LABELS_FILE), inventory.to_text())?;
        fs::write(gaz_dir.join(MANIFEST_FILE), manifest)?;
        for g in &self.gazetteers {
            fs::write(gaz_dir.join(format!("{}.txt", g.feature_name)), g.to_text())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle;

    fn run(config: &SynthConfig, seed: u64) -> Result<SyntheticData, SynthError> {
        gen_synthetic(
            config,
            seed,
            &bundle::atis_labels(),
            &bundle::atis_feature_spec(),
        )
    }

    #[test]
    fn deterministic_for_a_seed() {
        let config = SynthConfig::default_benchmark();
        let inv = bundle::atis_labels();
        let a = run(&config, 7).unwrap();
        let b = run(&config, 7).unwrap();
        assert_eq!(a.train.to_conll(&inv), b.train.to_conll(&inv));
        assert_eq!(a, b);
        assert_ne!(a.train, run(&config, 8).unwrap().train);
    }

    #[test]
    fn sentence_counts() {
        let mut config = SynthConfig::default_benchmark();
        config.train_sentences = 30;
        config.test_sentences = 5;
        let data = run(&config, 1).unwrap();
        assert_eq!(data.train.stats().sentences, 30);
        assert_eq!(data.test.stats().sentences, 5);
    }

    #[test]
    fn test_only_words_stay_out_of_training() {
        let config = SynthConfig::default_benchmark();
        let data = run(&config, 3).unwrap();
        let train_words: BTreeSet<&str> = data.train.tokens().map(|t| t.norm.as_str()).collect();
        let gaz_words: BTreeSet<String> = data
            .gazetteers
            .iter()
            .flat_map(|g| words_of(&g.entries).collect::<Vec<_>>())
            .collect();
        for lex in config.lexicons.values() {
            for word in words_of(&lex.test) {
                assert!(!train_words.contains(word.as_str()), "{word} leaked");
                assert!(gaz_words.contains(&word), "{word} missing from gazetteers");
            }
        }
        let outside = bundle::atis_labels().outside();
        let test_slot_words: BTreeSet<&str> = data
            .test
            .tokens()
            .filter(|t| t.label != outside)
            .map(|t| t.norm.as_str())
            .collect();
        assert!(!test_slot_words.is_empty());
        assert!(test_slot_words.is_disjoint(&train_words));
    }

    #[test]
    fn multiword_entries_get_inside_labels() {
        let inv = bundle::atis_labels();
        let config = SynthConfig::parse(
            r#"
            train_sentences = 4
            templates = ["from {c:fromloc.city_name}"]
            [lexicons.c]
            gazetteer = "city_name_1"
            train = ["new york"]
            "#,
        )
        .unwrap();
        let data = run(&config, 0).unwrap();
        let s = &data.train.sentences()[0];
        assert_eq!(inv.name(s.tokens()[1].label), Some("B-fromloc.city_name"));
        assert_eq!(inv.name(s.tokens()[2].label), Some("I-fromloc.city_name"));
    }

    #[test]
    fn config_errors() {
        let parse = |t: &str| SynthConfig::parse(t).unwrap();
        let empty = parse(
            r#"
            train_sentences = 2
            templates = ["to {c:toloc.city_name}"]
            [lexicons.c]
            gazetteer = "city_name_1"
            train = []
            "#,
        );
        assert!(matches!(
            run(&empty, 0),
            Err(SynthError::EmptyLexicon {
                partition: "train",
                ..
            })
        ));

        let mut no_test = parse(
            r#"
            train_sentences = 2
            templates = ["to {c:toloc.city_name}"]
            [lexicons.c]
            gazetteer = "city_name_1"
            train = ["boston"]
            "#,
        );
        assert!(run(&no_test, 0).is_ok());
        no_test.test_sentences = 1;
        assert!(matches!(
            run(&no_test, 0),
            Err(SynthError::EmptyLexicon {
                partition: "test",
                ..
            })
        ));

        let mut bad = no_test.clone();
        bad.templates = vec!["to {x:toloc.city_name}".into()];
        assert!(matches!(
            run(&bad, 0),
            Err(SynthError::UnknownLexicon { .. })
        ));
        bad.templates = vec!["to {c:toloc.nowhere}".into()];
        assert!(matches!(run(&bad, 0), Err(SynthError::UnknownLabel(_))));
        bad.templates = vec!["to {c}".into()];
        assert!(matches!(
            run(&bad, 0),
            Err(SynthError::BadPlaceholder { .. })
        ));
        bad.templates = vec![];
        assert!(matches!(run(&bad, 0), Err(SynthError::NoTemplates)));

        let mut leak = no_test.clone();
        leak.lexicons.get_mut("c").unwrap().test = vec!["to".into()];
        assert!(matches!(run(&leak, 0), Err(SynthError::Leak { .. })));

        let mut feature = no_test.clone();
        feature.test_sentences = 0;
        feature.lexicons.get_mut("c").unwrap().gazetteer = "planets".into();
        assert!(matches!(
            run(&feature, 0),
            Err(SynthError::UnknownFeature { .. })
        ));
    }

    #[test]
    fn written_bundle_loads_back() {
        use crate::corpus::parse_corpus;
        use crate::features::GazetteerBundle;

        let inv = bundle::atis_labels();
        let data = run(&SynthConfig::default_benchmark(), 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        data.write(dir.path(), &inv, bundle::ATIS_MANIFEST).unwrap();
        let labels: LabelInventory = fs::read_to_string(dir.path().join(LABELS_FILE))
            .unwrap()
            .parse()
            .unwrap();
        assert_eq!(labels, inv);
        let train = parse_corpus(
            &fs::read_to_string(dir.path().join(TRAIN_FILE)).unwrap(),
            &inv,
        )
        .unwrap();
        assert_eq!(train, data.train);
        let loaded = GazetteerBundle::load(&dir.path().join(GAZETTEER_DIR), &inv).unwrap();
        let reg = loaded.build(Some(&train)).unwrap();
        assert!(reg.membership("tacoma")[0]);
        assert!(reg.membership("vegas")[1]);
        assert!(reg.membership("laguardia")[6]);
    }
}
