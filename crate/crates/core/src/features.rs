//! The label-to-feature partition, per-feature keyword sets and
//! word-membership queries.
//!
//! A feature groups similar slot labels (all city-name labels, all
//! day-name labels, ...). Each feature owns a keyword set built from two
//! sources: an external gazetteer and the words the training corpus tags
//! with one of the feature's labels. Membership of a word in these sets is
//! what the featurizer turns into a normalized vector.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::corpus::{normalize, Corpus, LabelId, LabelInventory};

/// Number of features in the partition.
pub const NUM_FEATURES: usize = 18;

/// Manifest file inside a gazetteer directory.
pub const MANIFEST_FILE: &str = "features.tsv";
/// Optional weights file inside a gazetteer directory.
pub const WEIGHTS_FILE: &str = "weights.tsv";

const REMAINDER: &str = "remainder";
const REGISTRY_HEADER: &str = "# slotfill feature registry v1";

/// `x_i1..x_i18`: whether a word belongs to each feature's keyword set.
pub type Membership = [bool; NUM_FEATURES];

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("manifest declares {found} features, expected {NUM_FEATURES}")]
    FeatureCount { found: usize },
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("label {label} is assigned to both {first:?} and {second:?}")]
    DuplicateLabel {
        label: usize,
        first: String,
        second: String,
    },
    #[error("manifest has no remainder feature")]
    MissingRemainder,
    #[error("manifest has more than one remainder feature ({first:?}, {second:?})")]
    MultipleRemainder { first: String, second: String },
    #[error("gazetteer {file:?} names a feature that is not in the manifest")]
    UnknownFeature { file: String },
    #[error("empty gazetteer entry")]
    EmptyEntry,
    #[error("weights line {line}: {message}")]
    Weights { line: usize, message: String },
    #[error("feature index {index} out of range 1..={NUM_FEATURES}")]
    FeatureIndex { index: usize },
    #[error("registry line {line}: {message}")]
    Registry { line: usize, message: String },
    #[error("{}: {cause}", path.display())]
    Io { path: PathBuf, cause: io::Error },
}

fn read(path: &Path) -> Result<String, FeatureError> {
    fs::read_to_string(path).map_err(|cause| FeatureError::Io {
        path: path.to_path_buf(),
        cause,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feature {
    /// 1-based position in the manifest.
    pub index: usize,
    pub name: String,
    /// Resolved label set; for the remainder feature, every label no other
    /// feature claims.
    pub labels: BTreeSet<LabelId>,
    pub remainder: bool,
}

/// An 18-way partition of a label inventory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSpec {
    features: Vec<Feature>,
    /// Feature offset for each label offset.
    owner: Vec<usize>,
}

impl FeatureSpec {
    /// Builds a partition from explicit label sets; exactly one entry must be
    /// `None`, which receives every unclaimed label.
    pub fn new(
        rows: Vec<(String, Option<BTreeSet<LabelId>>)>,
        inventory: &LabelInventory,
    ) -> Result<Self, FeatureError> {
        if rows.len() != NUM_FEATURES {
            return Err(FeatureError::FeatureCount { found: rows.len() });
        }
        let mut claimed: Vec<Option<usize>> = vec![None; inventory.len()];
        let mut remainder: Option<usize> = None;
        for (j, (name, labels)) in rows.iter().enumerate() {
            if rows[..j].iter().any(|(other, _)| other == name) {
                return Err(FeatureError::Manifest {
                    line: j + 1,
                    message: format!("duplicate feature name {name:?}"),
                });
            }
            match labels {
                None => {
                    if let Some(r) = remainder {
                        return Err(FeatureError::MultipleRemainder {
                            first: rows[r].0.clone(),
                            second: name.clone(),
                        });
                    }
                    remainder = Some(j);
                }
                Some(labels) => {
                    for &label in labels {
                        if !inventory.contains(label) {
                            return Err(FeatureError::Manifest {
                                line: j + 1,
                                message: format!(
                                    "label index {label} outside inventory of {}",
                                    inventory.len()
                                ),
                            });
                        }
                        if let Some(prev) = claimed[label.offset()].replace(j) {
                            return Err(FeatureError::DuplicateLabel {
                                label: label.get(),
                                first: rows[prev].0.clone(),
                                second: name.clone(),
                            });
                        }
                    }
                }
            }
        }
        let remainder = remainder.ok_or(FeatureError::MissingRemainder)?;
        let owner: Vec<usize> = claimed.iter().map(|c| c.unwrap_or(remainder)).collect();
        let features = rows
            .into_iter()
            .enumerate()
            .map(|(j, (name, _))| Feature {
                index: j + 1,
                name,
                labels: owner
                    .iter()
                    .enumerate()
                    .filter(|&(_, &f)| f == j)
                    .map(|(m, _)| LabelId::from_offset(m))
                    .collect(),
                remainder: j == remainder,
            })
            .collect();
        Ok(FeatureSpec { features, owner })
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn feature(&self, index: usize) -> Result<&Feature, FeatureError> {
        index
            .checked_sub(1)
            .and_then(|j| self.features.get(j))
            .ok_or(FeatureError::FeatureIndex { index })
    }

    /// Zero-based offset of the feature with this name.
    pub fn position(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Zero-based offset of the feature owning `label`.
    pub fn owner(&self, label: LabelId) -> Option<usize> {
        self.owner.get(label.offset()).copied()
    }

    pub fn num_labels(&self) -> usize {
        self.owner.len()
    }

    /// `n_j`: how many labels feature `index` (1-based) groups.
    pub fn label_count(&self, index: usize) -> Result<usize, FeatureError> {
        self.feature(index).map(|f| f.labels.len())
    }

    pub fn label_counts(&self) -> [usize; NUM_FEATURES] {
        std::array::from_fn(|j| self.features[j].labels.len())
    }

    /// Name of the other half of a `<base>_1`/`<base>_2` pair, if both halves
    /// exist.
    fn pair_of(&self, offset: usize) -> Option<(usize, usize)> {
        let name = &self.features[offset].name;
        let base = name
            .strip_suffix("_1")
            .or_else(|| name.strip_suffix("_2"))?;
        let first = self.position(&format!("{base}_1"))?;
        let rest = self.position(&format!("{base}_2"))?;
        Some((first, rest))
    }
}

/// Parses a `features.tsv` manifest: `index<TAB>name<TAB>labels` where
/// labels is a comma-separated index list or `remainder`.
pub fn load_feature_spec(
    manifest: &str,
    inventory: &LabelInventory,
) -> Result<FeatureSpec, FeatureError> {
    let mut rows = Vec::new();
    for (i, raw) in manifest.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| FeatureError::Manifest {
            line: line_no,
            message,
        };
        let mut fields = line.splitn(3, char::is_whitespace);
        let (Some(index), Some(name), Some(labels)) = (fields.next(), fields.next(), fields.next())
        else {
            return Err(bad("expected `index<TAB>name<TAB>labels`".into()));
        };
        let index: usize = index
            .parse()
            .map_err(|_| bad(format!("bad feature index {index:?}")))?;
        if index != rows.len() + 1 {
            return Err(bad(format!(
                "feature index {index} out of order, expected {}",
                rows.len() + 1
            )));
        }
        let labels = labels.trim();
        let set = if labels == REMAINDER {
            None
        } else {
            let mut set = BTreeSet::new();
            for field in labels.split(',').map(str::trim).filter(|f| !f.is_empty()) {
                let id = field
                    .parse::<usize>()
                    .ok()
                    .and_then(LabelId::new)
                    .ok_or_else(|| bad(format!("bad label index {field:?}")))?;
                if !inventory.contains(id) {
                    return Err(bad(format!(
                        "label index {id} outside inventory of {}",
                        inventory.len()
                    )));
                }
                set.insert(id);
            }
            if set.is_empty() {
                return Err(bad(format!("feature {name:?} has no labels")));
            }
            Some(set)
        };
        rows.push((name.to_string(), set));
    }
    FeatureSpec::new(rows, inventory)
}

/// Raw gazetteer content for one feature; entries may be multi-word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GazetteerFile {
    pub feature_name: String,
    pub entries: Vec<String>,
}

impl GazetteerFile {
    /// One entry per line; blank lines and `#` comments are skipped.
    pub fn parse(feature_name: impl Into<String>, text: &str) -> Self {
        let entries = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| normalize(&l.split_whitespace().collect::<Vec<_>>().join(" ")))
            .collect();
        GazetteerFile {
            feature_name: feature_name.into(),
            entries,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for entry in &self.entries {
            out.push_str(entry);
            out.push('\n');
        }
        out
    }
}

/// Normalized single-word keyword set of one feature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gazetteer {
    pub feature_name: String,
    pub keywords: BTreeSet<String>,
}

/// Splits multi-word names: the first word of every entry goes to the first
/// set, every later word to the second. Shared words collapse.
pub fn split_multiword<S: AsRef<str>>(
    entries: &[S],
) -> Result<(BTreeSet<String>, BTreeSet<String>), FeatureError> {
    let mut first = BTreeSet::new();
    let mut rest = BTreeSet::new();
    for entry in entries {
        let mut words = entry.as_ref().split_whitespace().map(normalize);
        first.insert(words.next().ok_or(FeatureError::EmptyEntry)?);
        rest.extend(words);
    }
    Ok((first, rest))
}

/// Per-feature weights `λ_j`; all default to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights(pub [f64; NUM_FEATURES]);

impl Default for Weights {
    fn default() -> Self {
        Weights([1.0; NUM_FEATURES])
    }
}

impl Weights {
    /// Parses `name<TAB>weight` lines; unlisted features keep weight 1.
    pub fn parse(text: &str, spec: &FeatureSpec) -> Result<Self, FeatureError> {
        let mut weights = Weights::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |message: String| FeatureError::Weights {
                line: i + 1,
                message,
            };
            let mut fields = line.split_whitespace();
            let (Some(name), Some(value), None) = (fields.next(), fields.next(), fields.next())
            else {
                return Err(bad("expected `name<TAB>weight`".into()));
            };
            let j = spec
                .position(name)
                .ok_or_else(|| bad(format!("unknown feature {name:?}")))?;
            let value: f64 = value
                .parse()
                .map_err(|_| bad(format!("bad weight {value:?}")))?;
            if !(value.is_finite() && value > 0.0) {
                return Err(bad(format!("weight must be positive, got {value}")));
            }
            weights.0[j] = value;
        }
        Ok(weights)
    }
}

/// Feature partition, keyword sets and weights: everything needed to answer
/// membership queries and build feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRegistry {
    spec: FeatureSpec,
    keyword_sets: Vec<BTreeSet<String>>,
    weights: Weights,
    index: HashMap<String, u32>,
}

/// `S_j = gazetteer_j ∪ {norms of corpus tokens labeled with a label of j}`.
pub fn build_keyword_sets(
    spec: &FeatureSpec,
    gazetteers: &[GazetteerFile],
    corpus: Option<&Corpus>,
) -> Result<FeatureRegistry, FeatureError> {
    let mut sets = vec![BTreeSet::new(); NUM_FEATURES];
    for file in gazetteers {
        let j = spec
            .position(&file.feature_name)
            .ok_or_else(|| FeatureError::UnknownFeature {
                file: file.feature_name.clone(),
            })?;
        if let Some((first, rest)) = spec.pair_of(j) {
            let (heads, tails) = split_multiword(&file.entries)?;
            sets[first].extend(heads);
            sets[rest].extend(tails);
        } else {
            for entry in &file.entries {
                let mut words = entry.split_whitespace().map(normalize).peekable();
                if words.peek().is_none() {
                    return Err(FeatureError::EmptyEntry);
                }
                sets[j].extend(words);
            }
        }
    }
    if let Some(corpus) = corpus {
        for token in corpus.tokens() {
            if let Some(j) = spec.owner(token.label) {
                sets[j].insert(token.norm.clone());
            }
        }
    }
    Ok(FeatureRegistry::from_parts(
        spec.clone(),
        sets,
        Weights::default(),
    ))
}

impl FeatureRegistry {
    fn from_parts(
        spec: FeatureSpec,
        keyword_sets: Vec<BTreeSet<String>>,
        weights: Weights,
    ) -> Self {
        let mut index: HashMap<String, u32> = HashMap::new();
        for (j, set) in keyword_sets.iter().enumerate() {
            for word in set {
                *index.entry(word.clone()).or_default() |= 1 << j;
            }
        }
        FeatureRegistry {
            spec,
            keyword_sets,
            weights,
            index,
        }
    }

    pub fn with_weights(mut self, weights: Weights) -> Self {
        self.weights = weights;
        self
    }

    pub fn spec(&self) -> &FeatureSpec {
        &self.spec
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn label_counts(&self) -> [usize; NUM_FEATURES] {
        self.spec.label_counts()
    }

    pub fn keyword_set(&self, offset: usize) -> &BTreeSet<String> {
        &self.keyword_sets[offset]
    }

    pub fn gazetteer(&self, offset: usize) -> Gazetteer {
        Gazetteer {
            feature_name: self.spec.features[offset].name.clone(),
            keywords: self.keyword_sets[offset].clone(),
        }
    }

    /// `Σ_j |S_j|`.
    pub fn total_keywords(&self) -> usize {
        self.keyword_sets.iter().map(BTreeSet::len).sum()
    }

    /// Case-insensitive membership of `word` in every keyword set.
    pub fn membership(&self, word: &str) -> Membership {
        let bits = self.index.get(&normalize(word)).copied().unwrap_or(0);
        std::array::from_fn(|j| bits & (1 << j) != 0)
    }

    /// Serializes the built registry so inference can reproduce the exact
    /// keyword sets seen during training.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(REGISTRY_HEADER);
        out.push('\n');
        for (f, w) in self.spec.features.iter().zip(self.weights.0) {
            let labels: Vec<String> = f.labels.iter().map(|l| l.to_string()).collect();
            out.push_str(&format!(
                "feature\t{}\t{}\t{}\t{}\t{}\n",
                f.index,
                f.name,
                if f.remainder { REMAINDER } else { "explicit" },
                labels.join(","),
                w
            ));
        }
        for (f, set) in self.spec.features.iter().zip(&self.keyword_sets) {
            for word in set {
                out.push_str(&format!("keyword\t{}\t{}\n", f.name, word));
            }
        }
        out
    }

    pub fn from_tsv(text: &str, inventory: &LabelInventory) -> Result<Self, FeatureError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, REGISTRY_HEADER)) => {}
            _ => {
                return Err(FeatureError::Registry {
                    line: 1,
                    message: "missing registry header".into(),
                })
            }
        }
        let mut rows = Vec::new();
        let mut weights = Vec::new();
        let mut keywords: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (i, line) in lines {
            let bad = |message: &str| FeatureError::Registry {
                line: i + 1,
                message: message.to_string(),
            };
            let fields: Vec<&str> = line.split('\t').collect();
            match fields.as_slice() {
                ["feature", _, name, kind, labels, weight] => {
                    let set = labels
                        .split(',')
                        .filter(|s| !s.is_empty())
                        .map(|s| s.parse().ok().and_then(LabelId::new))
                        .collect::<Option<BTreeSet<_>>>()
                        .ok_or_else(|| bad("bad label list"))?;
                    rows.push((name.to_string(), (*kind != REMAINDER).then_some(set)));
                    weights.push(weight.parse::<f64>().map_err(|_| bad("bad weight"))?);
                }
                ["keyword", name, word] => {
                    keywords
                        .entry(name.to_string())
                        .or_default()
                        .insert(word.to_string());
                }
                [""] => {}
                _ => return Err(bad("unrecognized record")),
            }
        }
        let spec = FeatureSpec::new(rows, inventory)?;
        let mut sets = vec![BTreeSet::new(); NUM_FEATURES];
        for (name, words) in keywords {
            let j = spec
                .position(&name)
                .ok_or(FeatureError::UnknownFeature { file: name })?;
            sets[j] = words;
        }
        let weights = Weights(weights.try_into().expect("spec has NUM_FEATURES rows"));
        if weights.0.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(FeatureError::Registry {
                line: 0,
                message: "weights must be positive".into(),
            });
        }
        Ok(Self::from_parts(spec, sets, weights))
    }
}

/// Manifest, gazetteers and optional weights read from one directory.
#[derive(Debug, Clone)]
pub struct GazetteerBundle {
    pub spec: FeatureSpec,
    pub gazetteers: Vec<GazetteerFile>,
    pub weights: Weights,
}

impl GazetteerBundle {
    /// Reads `features.tsv`, every `<feature>.txt` and, if present,
    /// `weights.tsv` from `dir`.
    pub fn load(dir: &Path, inventory: &LabelInventory) -> Result<Self, FeatureError> {
        let spec = load_feature_spec(&read(&dir.join(MANIFEST_FILE))?, inventory)?;
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|cause| FeatureError::Io {
                path: dir.to_path_buf(),
                cause,
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "txt"))
            .collect();
        paths.sort();
        let mut gazetteers = Vec::with_capacity(paths.len());
        for path in paths {
            let name = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            if spec.position(&name).is_none() {
                return Err(FeatureError::UnknownFeature {
                    file: path.display().to_string(),
                });
            }
            gazetteers.push(GazetteerFile::parse(name, &read(&path)?));
        }
        let weights_path = dir.join(WEIGHTS_FILE);
        let weights = if weights_path.exists() {
            Weights::parse(&read(&weights_path)?, &spec)?
        } else {
            Weights::default()
        };
        Ok(GazetteerBundle {
            spec,
            gazetteers,
            weights,
        })
    }

    pub fn build(&self, corpus: Option<&Corpus>) -> Result<FeatureRegistry, FeatureError> {
        Ok(build_keyword_sets(&self.spec, &self.gazetteers, corpus)?.with_weights(self.weights))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle;
    use crate::corpus::parse_corpus;

    fn set(words: &[&str]) -> BTreeSet<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn table_one_manifest() {
        let inv = bundle::atis_labels();
        let spec = bundle::atis_feature_spec();
        let city = spec.feature(1).unwrap();
        assert_eq!(city.name, "city_name_1");
        let ids: Vec<usize> = city.labels.iter().map(|l| l.get()).collect();
        assert_eq!(ids, [17, 48, 71, 78]);
        let o = spec.feature(17).unwrap();
        assert_eq!(o.name, "O_set");
        assert_eq!(o.labels.iter().map(|l| l.get()).collect::<Vec<_>>(), [126]);
        assert_eq!(spec.owner(inv.outside()), Some(16));
        assert_eq!(spec.label_count(1).unwrap(), 4);
        assert_eq!(spec.label_count(5).unwrap(), 1);
        assert!(spec.feature(0).is_err());
        assert!(spec.feature(19).is_err());
    }

    #[test]
    fn remainder_count_by_enumeration() {
        let spec = bundle::atis_feature_spec();
        let explicit: usize = (1..=17).map(|j| spec.label_count(j).unwrap()).sum();
        let other = spec.feature(18).unwrap();
        assert!(other.remainder);
        let unclaimed = (1..=127)
            .filter(|&m| {
                !spec.features()[..17]
                    .iter()
                    .any(|f| f.labels.contains(&LabelId::new(m).unwrap()))
            })
            .count();
        assert_eq!(unclaimed, 127 - explicit);
        assert_eq!(other.labels.len(), unclaimed);
        assert_eq!(unclaimed, 68);
    }

    fn manifest_with(row1_labels: &str, row18: &str) -> String {
        let mut rows = vec![format!("1\tf1\t{row1_labels}")];
        for j in 2..=17 {
            rows.push(format!("{j}\tf{j}\t{j}"));
        }
        rows.push(format!("18\tf18\t{row18}"));
        rows.join("\n")
    }

    #[test]
    fn manifest_errors() {
        let inv = bundle::atis_labels();
        assert!(load_feature_spec(&manifest_with("1,20", "remainder"), &inv).is_ok());
        assert!(matches!(
            load_feature_spec(&manifest_with("1,5", "remainder"), &inv),
            Err(FeatureError::DuplicateLabel { label: 5, .. })
        ));
        assert!(matches!(
            load_feature_spec(&manifest_with("1", "30"), &inv),
            Err(FeatureError::MissingRemainder)
        ));
        assert!(matches!(
            load_feature_spec(&manifest_with("remainder", "remainder"), &inv),
            Err(FeatureError::MultipleRemainder { .. })
        ));
        assert!(matches!(
            load_feature_spec(&manifest_with("1,128", "remainder"), &inv),
            Err(FeatureError::Manifest { line: 1, .. })
        ));
        assert!(matches!(
            load_feature_spec("1\tf1\t1\n", &inv),
            Err(FeatureError::FeatureCount { found: 1 })
        ));
    }

    #[test]
    fn city_label_assigned_twice_is_rejected() {
        let inv = bundle::atis_labels();
        let manifest = bundle::ATIS_MANIFEST.replace("2\tcity_name_2\t91", "2\tcity_name_2\t17,91");
        match load_feature_spec(&manifest, &inv) {
            Err(FeatureError::DuplicateLabel {
                label,
                first,
                second,
            }) => {
                assert_eq!(label, 17);
                assert_eq!(first, "city_name_1");
                assert_eq!(second, "city_name_2");
            }
            other => panic!("expected duplicate label error, got {other:?}"),
        }
    }

    #[test]
    fn split_rule() {
        let (first, rest) = split_multiword(&["san antonio", "san francisco", "san jose"]).unwrap();
        assert_eq!(first, set(&["san"]));
        assert_eq!(rest, set(&["antonio", "francisco", "jose"]));

        let (first, rest) = split_multiword(&["boston"]).unwrap();
        assert_eq!(first, set(&["boston"]));
        assert!(rest.is_empty());

        let (first, rest) = split_multiword(&["new york city"]).unwrap();
        assert_eq!(first, set(&["new"]));
        assert_eq!(rest, set(&["york", "city"]));

        assert!(matches!(
            split_multiword(&["  "]),
            Err(FeatureError::EmptyEntry)
        ));
    }

    #[test]
    fn label_and_gazetteer_membership() {
        let inv = bundle::atis_labels();
        let spec = bundle::atis_feature_spec();
        let corpus = parse_corpus("from O\nboston B-fromloc.city_name\n", &inv).unwrap();
        let reg = build_keyword_sets(&spec, &[], Some(&corpus)).unwrap();
        let city = spec.position("city_name_1").unwrap();
        assert!(reg.keyword_set(city).contains("boston"));
        assert!(reg.membership("from")[16]);

        let gaz = GazetteerFile::parse("city_name_1", "# comment\n\nTacoma\n");
        let reg = build_keyword_sets(&spec, &[gaz], None).unwrap();
        assert!(reg.keyword_set(city).contains("tacoma"));
        assert!(reg.membership("TACOMA")[city]);
    }

    #[test]
    fn unknown_gazetteer_feature_is_an_error() {
        let spec = bundle::atis_feature_spec();
        let gaz = GazetteerFile::parse("planet_name", "mars\n");
        assert!(matches!(
            build_keyword_sets(&spec, &[gaz], None),
            Err(FeatureError::UnknownFeature { .. })
        ));
    }

    #[test]
    fn shipped_bundle_memberships() {
        let reg = bundle::atis_registry();
        let on = |w: &str| -> Vec<usize> {
            reg.membership(w)
                .iter()
                .enumerate()
                .filter(|(_, &x)| x)
                .map(|(j, _)| j + 1)
                .collect()
        };
        assert_eq!(on("washington"), [1, 3, 7, 8]);
        assert_eq!(on("boston"), [1, 7]);
        assert_eq!(on("Boston"), [1, 7]);
        assert!(on("zzxqv").is_empty());
    }

    #[test]
    fn weights_file() {
        let spec = bundle::atis_feature_spec();
        let w = Weights::parse("# w\ncity_name_1\t2.5\n", &spec).unwrap();
        assert_eq!(w.0[0], 2.5);
        assert_eq!(w.0[1], 1.0);
        assert!(Weights::parse("city_name_1\t0\n", &spec).is_err());
        assert!(Weights::parse("city_name_1\t-1\n", &spec).is_err());
        assert!(Weights::parse("nope\t1\n", &spec).is_err());
    }

    #[test]
    fn registry_tsv_round_trip() {
        let inv = bundle::atis_labels();
        let corpus = parse_corpus("from O\nboston B-fromloc.city_name\n", &inv).unwrap();
        let mut weights = Weights::default();
        weights.0[3] = 0.3;
        let reg = bundle::atis_bundle()
            .build(Some(&corpus))
            .unwrap()
            .with_weights(weights);
        let back = FeatureRegistry::from_tsv(&reg.to_tsv(), &inv).unwrap();
        assert_eq!(back, reg);
        assert!(FeatureRegistry::from_tsv("nope\n", &inv).is_err());
    }

    #[test]
    fn load_bundle_from_directory() {
        let inv = bundle::atis_labels();
        let dir = tempfile::tempdir().unwrap();
        bundle::write_atis_gazetteers(dir.path()).unwrap();
        let loaded = GazetteerBundle::load(dir.path(), &inv).unwrap();
        assert_eq!(loaded.build(None).unwrap(), bundle::atis_registry());

        fs::write(dir.path().join("weights.tsv"), "day_name\t3\n").unwrap();
        let loaded = GazetteerBundle::load(dir.path(), &inv).unwrap();
        assert_eq!(loaded.weights.0[13], 3.0);

        fs::write(dir.path().join("planet.txt"), "mars\n").unwrap();
        assert!(matches!(
            GazetteerBundle::load(dir.path(), &inv),
            Err(FeatureError::UnknownFeature { .. })
        ));
    }

    #[test]
    fn missing_directory_names_path() {
        let inv = bundle::atis_labels();
        let err = GazetteerBundle::load(Path::new("/nonexistent/gaz"), &inv).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/gaz"));
    }
}
