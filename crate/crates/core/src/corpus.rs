//! Labeled corpora in two-column CoNLL form, label inventories, vocabularies
//! and context windows.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// The label every non-slot token carries.
pub const OUTSIDE_LABEL: &str = "O";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CorpusError {
    #[error("label inventory is empty")]
    EmptyInventory,
    #[error("label inventory line {line}: empty label")]
    EmptyLabel { line: usize },
    #[error("label inventory line {line}: duplicate label {label:?}")]
    DuplicateLabel { line: usize, label: String },
    #[error("label inventory has no {OUTSIDE_LABEL:?} label")]
    MissingOutside,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("line {line}: unknown label {label:?}")]
    UnknownLabel { line: usize, label: String },
    #[error("line {line}: expected `token<whitespace>label`, found {found:?}")]
    MalformedLine { line: usize, found: String },
    #[error("position {position} outside sentence of length {len}")]
    PositionOutOfRange { position: usize, len: usize },
    #[error("window length must be at least 1")]
    EmptyWindow,
    #[error("sentence has no tokens")]
    EmptySentence,
}

/// 1-based index into a [`LabelInventory`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LabelId(usize);

impl LabelId {
    /// Returns `None` for index 0.
    pub const fn new(index: usize) -> Option<Self> {
        if index > 0 {
            Some(LabelId(index))
        } else {
            None
        }
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// Zero-based position, used as the class index of the classifier.
    pub fn offset(self) -> usize {
        self.0 - 1
    }

    pub fn from_offset(offset: usize) -> Self {
        LabelId(offset + 1)
    }
}

impl fmt::Display for LabelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Ordered, index-addressable set of slot labels containing exactly one `O`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelInventory {
    labels: Vec<String>,
    by_name: HashMap<String, LabelId>,
    outside: LabelId,
}

impl LabelInventory {
    pub fn new<I, S>(labels: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(CorpusError::EmptyInventory);
        }
        let mut by_name = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if label.is_empty() {
                return Err(CorpusError::EmptyLabel { line: i + 1 });
            }
            if by_name.insert(label.clone(), LabelId(i + 1)).is_some() {
                return Err(CorpusError::DuplicateLabel {
                    line: i + 1,
                    label: label.clone(),
                });
            }
        }
        let outside = *by_name
            .get(OUTSIDE_LABEL)
            .ok_or(CorpusError::MissingOutside)?;
        Ok(LabelInventory {
            labels,
            by_name,
            outside,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn outside(&self) -> LabelId {
        self.outside
    }

    pub fn id(&self, label: &str) -> Option<LabelId> {
        self.by_name.get(label).copied()
    }

    pub fn name(&self, id: LabelId) -> Option<&str> {
        self.labels.get(id.offset()).map(String::as_str)
    }

    pub fn contains(&self, id: LabelId) -> bool {
        id.get() <= self.labels.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (LabelId, &str)> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, l)| (LabelId(i + 1), l.as_str()))
    }

    /// One label per line, in index order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for label in &self.labels {
            out.push_str(label);
            out.push('\n');
        }
        out
    }
}

impl FromStr for LabelInventory {
    type Err = CorpusError;

    /// One label per line; the 1-based line number is the label index.
    /// Trailing blank lines are ignored, interior blank lines are not.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let labels: Vec<&str> = text.trim_end().lines().map(str::trim).collect();
        if labels.len() == 1 && labels[0].is_empty() {
            return Err(CorpusError::EmptyInventory);
        }
        LabelInventory::new(labels)
    }
}

/// Lookup form of a surface word.
pub fn normalize(word: &str) -> String {
    word.to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub norm: String,
    pub label: LabelId,
}

impl Token {
    pub fn new(surface: impl Into<String>, label: LabelId) -> Self {
        let surface = surface.into();
        let norm = normalize(&surface);
        Token {
            surface,
            norm,
            label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Result<Self, CorpusError> {
        if tokens.is_empty() {
            return Err(CorpusError::EmptySentence);
        }
        Ok(Sentence { tokens })
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = LabelId> + '_ {
        self.tokens.iter().map(|t| t.label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusStats {
    pub sentences: usize,
    pub tokens: usize,
    pub distinct_words: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    sentences: Vec<Sentence>,
}

impl Corpus {
    pub fn new(sentences: Vec<Sentence>) -> Self {
        Corpus { sentences }
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.sentences.iter().flat_map(|s| s.tokens.iter())
    }

    pub fn stats(&self) -> CorpusStats {
        let distinct: BTreeSet<&str> = self.tokens().map(|t| t.norm.as_str()).collect();
        CorpusStats {
            sentences: self.sentences.len(),
            tokens: self.sentences.iter().map(Sentence::len).sum(),
            distinct_words: distinct.len(),
        }
    }

    /// Writes `surface<TAB>label` lines with a blank line after each sentence.
    pub fn to_conll(&self, inventory: &LabelInventory) -> String {
        let mut out = String::new();
        for sentence in &self.sentences {
            for token in &sentence.tokens {
                out.push_str(&token.surface);
                out.push('\t');
                out.push_str(inventory.name(token.label).unwrap_or("?"));
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}

/// Parses two-column content: `token<whitespace>label` per line, blank lines
/// between sentences. Runs of blank lines count as one boundary.
pub fn parse_corpus(text: &str, inventory: &LabelInventory) -> Result<Corpus, CorpusError> {
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            if !current.is_empty() {
                sentences.push(Sentence {
                    tokens: std::mem::take(&mut current),
                });
            }
            continue;
        }
        let mut fields = line.split_whitespace();
        let (Some(surface), Some(label), None) = (fields.next(), fields.next(), fields.next())
        else {
            return Err(CorpusError::MalformedLine {
                line: line_no,
                found: raw.to_string(),
            });
        };
        let label_id = inventory
            .id(label)
            .ok_or_else(|| CorpusError::UnknownLabel {
                line: line_no,
                label: label.to_string(),
            })?;
        current.push(Token::new(surface, label_id));
    }
    if !current.is_empty() {
        sentences.push(Sentence { tokens: current });
    }
    if sentences.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    Ok(Corpus { sentences })
}

/// Word-to-id map with reserved padding and unknown-word ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    ids: HashMap<String, usize>,
    unk_threshold: usize,
}

impl Vocabulary {
    pub const PAD: usize = 0;
    pub const UNK: usize = 1;
    pub const RESERVED: usize = 2;

    /// Words whose training frequency exceeds `unk_threshold` get their own
    /// id, assigned in sorted order after the reserved ids.
    pub fn build(corpus: &Corpus, unk_threshold: usize) -> Self {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for token in corpus.tokens() {
            *counts.entry(token.norm.as_str()).or_default() += 1;
        }
        let words = counts
            .into_iter()
            .filter(|&(_, n)| n > unk_threshold)
            .map(|(w, _)| w.to_string())
            .collect();
        Self::with_threshold(words, unk_threshold)
    }

    /// Rebuilds a vocabulary from its words in id order.
    pub fn from_words(words: Vec<String>) -> Self {
        Self::with_threshold(words, 0)
    }

    /// Rebuilds a vocabulary from its words in id order and the threshold it
    /// was built with.
    pub fn with_threshold(words: Vec<String>, unk_threshold: usize) -> Self {
        let ids = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i + Self::RESERVED))
            .collect();
        Vocabulary {
            words,
            ids,
            unk_threshold,
        }
    }

    /// Number of corpus words, excluding the reserved ids.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Rows of an embedding table indexed by this vocabulary.
    pub fn total_ids(&self) -> usize {
        self.words.len() + Self::RESERVED
    }

    pub fn unk_threshold(&self) -> usize {
        self.unk_threshold
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn contains(&self, word: &str) -> bool {
        self.ids.contains_key(&normalize(word))
    }

    /// Id of an already normalized word.
    pub fn id(&self, norm: &str) -> usize {
        self.ids.get(norm).copied().unwrap_or(Self::UNK)
    }

    pub fn encode(&self, sentence: &Sentence) -> Vec<usize> {
        sentence.tokens.iter().map(|t| self.id(&t.norm)).collect()
    }

    /// Context window of token ids around `position` (0-based).
    pub fn context_window(
        &self,
        sentence: &Sentence,
        position: usize,
        length: usize,
        mode: WindowMode,
    ) -> Result<Vec<usize>, CorpusError> {
        context_window(&self.encode(sentence), position, length, mode, Self::PAD)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WindowMode {
    /// The `length` tokens ending at the position.
    Past,
    /// `length / 2` tokens on each side of the position.
    Centered,
    /// The `length` tokens starting at the position.
    Future,
}

/// Source positions of a window of `length` slots over a sequence of `len`
/// items; `None` marks padding.
pub fn window_positions(
    len: usize,
    position: usize,
    length: usize,
    mode: WindowMode,
) -> Result<Vec<Option<usize>>, CorpusError> {
    if position >= len {
        return Err(CorpusError::PositionOutOfRange { position, len });
    }
    if length == 0 {
        return Err(CorpusError::EmptyWindow);
    }
    let start = position as isize
        - match mode {
            WindowMode::Past => length as isize - 1,
            WindowMode::Centered => (length / 2) as isize,
            WindowMode::Future => 0,
        };
    Ok((0..length as isize)
        .map(|k| {
            let src = start + k;
            (0..len as isize).contains(&src).then_some(src as usize)
        })
        .collect())
}

pub fn context_window<T: Copy>(
    items: &[T],
    position: usize,
    length: usize,
    mode: WindowMode,
    pad: T,
) -> Result<Vec<T>, CorpusError> {
    Ok(window_positions(items.len(), position, length, mode)?
        .into_iter()
        .map(|p| p.map_or(pad, |i| items[i]))
        .collect())
}
