//! Convolutional sequence labeler.
//!
//! Each token is classified from fixed-length context windows. Every window
//! slot contributes one input column: the slot word's embedding, optionally
//! followed by its feature vector. A bank of filters slides over the columns
//! with stride 1, ReLU is applied and each filter is max-pooled over
//! positions. The `past` variant convolves the window ending at the token;
//! `bidir` additionally convolves the window starting at the token with a
//! second bank and concatenates both pooled vectors. A linear layer and a
//! softmax produce the label distribution.
//!
//! Parameters are generic over the float type so the same code runs in
//! `f32` for training and `f64` for gradient checking.

mod io;
mod train;

use std::fmt::{self, Debug};
use std::str::FromStr;

use num_traits::{Float, NumAssign};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{window_positions, CorpusError, LabelId, Sentence, Vocabulary, WindowMode};
use crate::features::{FeatureRegistry, NUM_FEATURES};
use crate::featurizer::{featurize_sentence, FeatureVector};

pub use io::{load_model, read_model, save_model, write_model, ModelFileError, MAGIC};
pub use train::{fit, fit_with, TrainReport, Trainer};

/// Half-width of the uniform initialization range.
pub const INIT_SCALE: f64 = 0.05;
/// Momentum coefficient of the optimizer.
pub const MOMENTUM: f64 = 0.9;

pub trait Scalar: Float + NumAssign + Debug + Default + Send + Sync + 'static {}

impl Scalar for f32 {}
impl Scalar for f64 {}

fn cast<T: Scalar>(x: f64) -> T {
    T::from(x).expect("f64 converts to any float type")
}

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("gold label {label} outside 1..={num_labels}")]
    GoldOutOfRange { label: usize, num_labels: usize },
    #[error("model uses feature vectors but no feature registry was supplied")]
    MissingRegistry,
    #[error("empty batch")]
    EmptyBatch,
    #[error("no training tokens")]
    EmptyCorpus,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("non-finite parameters after update at epoch {epoch}, batch {batch}")]
    NonFiniteParameters { epoch: usize, batch: usize },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Convolution over the window ending at the token.
    Past,
    /// Separate convolutions over the windows ending and starting at the token.
    Bidir,
}

impl Variant {
    pub fn directions(self) -> usize {
        match self {
            Variant::Past => 1,
            Variant::Bidir => 2,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Past => "past",
            Variant::Bidir => "bidir",
        })
    }
}

impl FromStr for Variant {
    type Err = NetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "past" => Ok(Variant::Past),
            "bidir" => Ok(Variant::Bidir),
            _ => Err(NetError::Config(format!("unknown variant {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    pub embed_dim: usize,
    /// 0, or 18 when feature vectors are appended to the embeddings.
    pub feature_dim: usize,
    pub context_length: usize,
    pub filter_width: usize,
    pub num_filters: usize,
    pub num_labels: usize,
    pub variant: Variant,
    pub use_features: bool,
    pub seed: u64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl NetConfig {
    pub fn new(num_labels: usize) -> Self {
        NetConfig {
            embed_dim: 100,
            feature_dim: NUM_FEATURES,
            context_length: 7,
            filter_width: 5,
            num_filters: 100,
            num_labels,
            variant: Variant::Past,
            use_features: true,
            seed: 42,
            learning_rate: 0.01,
            epochs: 30,
            batch_size: 16,
        }
    }

    pub fn with_features(mut self, on: bool) -> Self {
        self.use_features = on;
        self.feature_dim = if on { NUM_FEATURES } else { 0 };
        self
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: String| Err(NetError::Config(m));
        for (name, v) in [
            ("embed_dim", self.embed_dim),
            ("context_length", self.context_length),
            ("filter_width", self.filter_width),
            ("num_filters", self.num_filters),
            ("num_labels", self.num_labels),
            ("batch_size", self.batch_size),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.filter_width > self.context_length {
            return bad(format!(
                "filter_width {} exceeds context_length {}",
                self.filter_width, self.context_length
            ));
        }
        let expected = if self.use_features { NUM_FEATURES } else { 0 };
        if self.feature_dim != expected {
            return bad(format!(
                "feature_dim {} inconsistent with use_features={}",
                self.feature_dim, self.use_features
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!(
                "learning_rate {} must be positive",
                self.learning_rate
            ));
        }
        Ok(())
    }

    /// Depth of one input column.
    pub fn input_depth(&self) -> usize {
        self.embed_dim + self.feature_dim
    }

    /// Convolution outputs per filter before pooling.
    pub fn conv_positions(&self) -> usize {
        self.context_length - self.filter_width + 1
    }

    pub fn hidden_dim(&self) -> usize {
        self.variant.directions() * self.num_filters
    }
}

/// One convolution bank: weights laid out `[filter][depth][offset]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank<T> {
    pub weights: Vec<T>,
    pub biases: Vec<T>,
}

impl<T: Scalar> FilterBank<T> {
    fn zeros(config: &NetConfig) -> Self {
        FilterBank {
            weights: vec![
                T::zero();
                config.num_filters * config.input_depth() * config.filter_width
            ],
            biases: vec![T::zero(); config.num_filters],
        }
    }
}

/// All trainable tensors. [`Params::tensors`] yields them in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    /// `[id][embed_dim]`
    pub embeddings: Vec<T>,
    pub past: FilterBank<T>,
    pub future: Option<FilterBank<T>>,
    /// `[hidden][label]`
    pub classifier: Vec<T>,
    pub classifier_bias: Vec<T>,
}

impl<T: Scalar> Params<T> {
    pub fn zeros(config: &NetConfig, rows: usize) -> Self {
        Params {
            embeddings: vec![T::zero(); rows * config.embed_dim],
            past: FilterBank::zeros(config),
            future: (config.variant == Variant::Bidir).then(|| FilterBank::zeros(config)),
            classifier: vec![T::zero(); config.hidden_dim() * config.num_labels],
            classifier_bias: vec![T::zero(); config.num_labels],
        }
    }

    pub fn tensors(&self) -> Vec<&[T]> {
        let mut out = vec![&self.embeddings[..], &self.past.weights, &self.past.biases];
        if let Some(f) = &self.future {
            out.push(&f.weights);
            out.push(&f.biases);
        }
        out.push(&self.classifier);
        out.push(&self.classifier_bias);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = vec![
            &mut self.embeddings[..],
            &mut self.past.weights[..],
            &mut self.past.biases[..],
        ];
        if let Some(f) = &mut self.future {
            out.push(&mut f.weights);
            out.push(&mut f.biases);
        }
        out.push(&mut self.classifier);
        out.push(&mut self.classifier_bias);
        out
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|x| x.is_finite()))
    }

    pub fn fill(&mut self, value: T) {
        for t in self.tensors_mut() {
            t.fill(value);
        }
    }

    pub fn cast<U: Scalar>(&self) -> Params<U> {
        let c = |v: &[T]| -> Vec<U> {
            v.iter()
                .map(|&x| U::from(x).expect("float conversion"))
                .collect()
        };
        let bank = |b: &FilterBank<T>| FilterBank {
            weights: c(&b.weights),
            biases: c(&b.biases),
        };
        Params {
            embeddings: c(&self.embeddings),
            past: bank(&self.past),
            future: self.future.as_ref().map(bank),
            classifier: c(&self.classifier),
            classifier_bias: c(&self.classifier_bias),
        }
    }
}

/// Token ids (and feature vectors, when the model uses them) of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowInput {
    pub ids: Vec<usize>,
    pub features: Option<Vec<FeatureVector>>,
}

/// The windows one token is classified from.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenWindows {
    pub past: WindowInput,
    pub future: Option<WindowInput>,
}

/// A sentence mapped onto a model's vocabulary, with per-token feature
/// vectors when the model uses them.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSentence {
    pub ids: Vec<usize>,
    pub features: Option<Vec<FeatureVector>>,
    pub labels: Vec<LabelId>,
}

impl EncodedSentence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub windows: TokenWindows,
    pub gold: LabelId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub distribution: Vec<f64>,
    pub label: LabelId,
}

/// Lowest index wins ties.
fn argmax<T: PartialOrd + Copy>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

struct DirectionPass<T> {
    /// `[slot][depth]`
    input: Vec<T>,
    ids: Vec<usize>,
    /// Position of the pooled maximum per filter.
    argmax: Vec<usize>,
    /// Pooled ReLU activation per filter.
    pooled: Vec<T>,
}

struct TokenPass<T> {
    directions: Vec<DirectionPass<T>>,
    hidden: Vec<T>,
    probs: Vec<T>,
    /// `log Σ exp(logit)`
    log_norm: T,
    logits: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T = f32> {
    config: NetConfig,
    vocab: Vocabulary,
    params: Params<T>,
}

impl<T: Scalar> Model<T> {
    /// Parameters drawn uniformly from `±INIT_SCALE` in file order from a
    /// generator seeded with `config.seed`.
    pub fn init(config: NetConfig, vocab: Vocabulary) -> Result<Self, NetError> {
        let mut model = Self::zeroed(config, vocab)?;
        let mut rng = ChaCha8Rng::seed_from_u64(model.config.seed);
        for tensor in model.params.tensors_mut() {
            for x in tensor {
                *x = cast(rng.gen_range(-INIT_SCALE..INIT_SCALE));
            }
        }
        Ok(model)
    }

    pub fn zeroed(config: NetConfig, vocab: Vocabulary) -> Result<Self, NetError> {
        config.validate()?;
        let params = Params::zeros(&config, vocab.total_ids());
        Ok(Model {
            config,
            vocab,
            params,
        })
    }

    pub fn from_parts(
        config: NetConfig,
        vocab: Vocabulary,
        params: Params<T>,
    ) -> Result<Self, NetError> {
        config.validate()?;
        let expected = Params::<T>::zeros(&config, vocab.total_ids());
        let shapes = |p: &Params<T>| p.tensors().iter().map(|t| t.len()).collect::<Vec<_>>();
        if shapes(&expected) != shapes(&params) {
            return Err(NetError::Shape(format!(
                "parameter shapes {:?} do not match config {:?}",
                shapes(&params),
                shapes(&expected)
            )));
        }
        Ok(Model {
            config,
            vocab,
            params,
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn params(&self) -> &Params<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params<T> {
        &mut self.params
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            params: self.params.cast(),
        }
    }

    pub fn encode(
        &self,
        sentence: &Sentence,
        registry: Option<&FeatureRegistry>,
    ) -> Result<EncodedSentence, NetError> {
        let features = if self.config.use_features {
            Some(featurize_sentence(
                registry.ok_or(NetError::MissingRegistry)?,
                sentence,
            ))
        } else {
            None
        };
        Ok(EncodedSentence {
            ids: self.vocab.encode(sentence),
            features,
            labels: sentence.labels().collect(),
        })
    }

    fn window(&self, sentence: &EncodedSentence, position: usize, mode: WindowMode) -> WindowInput {
        let slots = window_positions(sentence.len(), position, self.config.context_length, mode)
            .expect("position within sentence");
        WindowInput {
            ids: slots
                .iter()
                .map(|s| s.map_or(Vocabulary::PAD, |i| sentence.ids[i]))
                .collect(),
            features: sentence.features.as_ref().map(|fs| {
                slots
                    .iter()
                    .map(|s| s.map_or(FeatureVector::ZERO, |i| fs[i]))
                    .collect()
            }),
        }
    }

    /// Windows for the token at `position` (0-based).
    pub fn windows(&self, sentence: &EncodedSentence, position: usize) -> TokenWindows {
        TokenWindows {
            past: self.window(sentence, position, WindowMode::Past),
            future: (self.config.variant == Variant::Bidir)
                .then(|| self.window(sentence, position, WindowMode::Future)),
        }
    }

    pub fn examples(&self, sentence: &EncodedSentence) -> Vec<Example> {
        (0..sentence.len())
            .map(|t| Example {
                windows: self.windows(sentence, t),
                gold: sentence.labels[t],
            })
            .collect()
    }

    fn check_window(&self, w: &WindowInput, which: &str) -> Result<(), NetError> {
        let c = &self.config;
        if w.ids.len() != c.context_length {
            return Err(NetError::Shape(format!(
                "{which} window has {} ids, expected {}",
                w.ids.len(),
                c.context_length
            )));
        }
        if let Some(&id) = w.ids.iter().find(|&&id| id >= self.vocab.total_ids()) {
            return Err(NetError::Shape(format!(
                "{which} window id {id} outside vocabulary of {}",
                self.vocab.total_ids()
            )));
        }
        match (&w.features, c.use_features) {
            (Some(f), true) if f.len() == c.context_length => Ok(()),
            (None, false) => Ok(()),
            (Some(f), true) => Err(NetError::Shape(format!(
                "{which} window has {} feature vectors, expected {}",
                f.len(),
                c.context_length
            ))),
            (Some(_), false) => Err(NetError::Shape(format!(
                "{which} window carries feature vectors but the model does not use them"
            ))),
            (None, true) => Err(NetError::Shape(format!(
                "{which} window lacks feature vectors"
            ))),
        }
    }

    fn check(&self, windows: &TokenWindows) -> Result<(), NetError> {
        self.check_window(&windows.past, "past")?;
        match (&windows.future, self.config.variant) {
            (Some(f), Variant::Bidir) => self.check_window(f, "future"),
            (None, Variant::Past) => Ok(()),
            (None, Variant::Bidir) => {
                Err(NetError::Shape("bidir model needs a future window".into()))
            }
            (Some(_), Variant::Past) => {
                Err(NetError::Shape("past model takes no future window".into()))
            }
        }
    }

    fn convolve(&self, bank: &FilterBank<T>, window: &WindowInput) -> DirectionPass<T> {
        let c = &self.config;
        let (e, depth, width) = (c.embed_dim, c.input_depth(), c.filter_width);
        let mut input = vec![T::zero(); c.context_length * depth];
        for (slot, &id) in window.ids.iter().enumerate() {
            let col = &mut input[slot * depth..(slot + 1) * depth];
            col[..e].copy_from_slice(&self.params.embeddings[id * e..(id + 1) * e]);
            if let Some(fs) = &window.features {
                for (dst, &b) in col[e..].iter_mut().zip(fs[slot].components()) {
                    *dst = cast(b);
                }
            }
        }
        let positions = c.conv_positions();
        let mut best_positions = vec![0; c.num_filters];
        let mut pooled = vec![T::zero(); c.num_filters];
        let mut z = vec![T::zero(); positions];
        for f in 0..c.num_filters {
            let w = &bank.weights[f * depth * width..(f + 1) * depth * width];
            for (p, zp) in z.iter_mut().enumerate() {
                let mut acc = bank.biases[f];
                for o in 0..width {
                    let col = &input[(p + o) * depth..(p + o + 1) * depth];
                    for (d, &x) in col.iter().enumerate() {
                        acc += w[d * width + o] * x;
                    }
                }
                *zp = acc;
            }
            let best = argmax(&z);
            best_positions[f] = best;
            pooled[f] = z[best].max(T::zero());
        }
        DirectionPass {
            input,
            ids: window.ids.clone(),
            argmax: best_positions,
            pooled,
        }
    }

    fn run(&self, windows: &TokenWindows) -> TokenPass<T> {
        let c = &self.config;
        let mut directions = vec![self.convolve(&self.params.past, &windows.past)];
        if let (Some(bank), Some(w)) = (&self.params.future, &windows.future) {
            directions.push(self.convolve(bank, w));
        }
        let hidden: Vec<T> = directions
            .iter()
            .flat_map(|d| d.pooled.iter().copied())
            .collect();
        let labels = c.num_labels;
        let mut logits = self.params.classifier_bias.clone();
        for (i, &h) in hidden.iter().enumerate() {
            if h == T::zero() {
                continue;
            }
            let row = &self.params.classifier[i * labels..(i + 1) * labels];
            for (l, &u) in logits.iter_mut().zip(row) {
                *l += h * u;
            }
        }
        let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
        let mut probs: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
        let sum = probs.iter().copied().fold(T::zero(), |a, b| a + b);
        for p in &mut probs {
            *p /= sum;
        }
        TokenPass {
            directions,
            hidden,
            probs,
            log_norm: max + sum.ln(),
            logits,
        }
    }

    pub fn forward(&self, windows: &TokenWindows) -> Result<Prediction, NetError> {
        self.check(windows)?;
        let pass = self.run(windows);
        let label = LabelId::from_offset(argmax(&pass.probs));
        Ok(Prediction {
            distribution: pass
                .probs
                .iter()
                .map(|p| p.to_f64().unwrap_or(f64::NAN))
                .collect(),
            label,
        })
    }

    fn check_batch(&self, batch: &[Example]) -> Result<(), NetError> {
        if batch.is_empty() {
            return Err(NetError::EmptyBatch);
        }
        for ex in batch {
            if ex.gold.get() > self.config.num_labels {
                return Err(NetError::GoldOutOfRange {
                    label: ex.gold.get(),
                    num_labels: self.config.num_labels,
                });
            }
            self.check(&ex.windows)?;
        }
        Ok(())
    }

    /// Mean negative log-likelihood of the gold labels.
    pub fn loss(&self, batch: &[Example]) -> Result<T, NetError> {
        self.check_batch(batch)?;
        let mut total = T::zero();
        for ex in batch {
            let pass = self.run(&ex.windows);
            total += pass.log_norm - pass.logits[ex.gold.offset()];
        }
        Ok(total / cast(batch.len() as f64))
    }

    /// Mean cross-entropy and its gradient with respect to every parameter.
    /// Feature vectors are inputs, not parameters.
    pub fn loss_and_gradients(&self, batch: &[Example]) -> Result<(T, Params<T>), NetError> {
        self.check_batch(batch)?;
        let c = &self.config;
        let (e, depth, width, labels) =
            (c.embed_dim, c.input_depth(), c.filter_width, c.num_labels);
        let scale: T = cast(1.0 / batch.len() as f64);
        let mut grads = Params::zeros(c, self.vocab.total_ids());
        let mut total = T::zero();
        let mut dhidden = vec![T::zero(); c.hidden_dim()];
        for ex in batch {
            let pass = self.run(&ex.windows);
            let gold = ex.gold.offset();
            total += pass.log_norm - pass.logits[gold];

            let mut dlogits: Vec<T> = pass.probs.iter().map(|&p| p * scale).collect();
            dlogits[gold] -= scale;
            for (g, &d) in grads.classifier_bias.iter_mut().zip(&dlogits) {
                *g += d;
            }
            for (i, &h) in pass.hidden.iter().enumerate() {
                let row = &self.params.classifier[i * labels..(i + 1) * labels];
                let grow = &mut grads.classifier[i * labels..(i + 1) * labels];
                let mut dh = T::zero();
                for l in 0..labels {
                    grow[l] += h * dlogits[l];
                    dh += row[l] * dlogits[l];
                }
                dhidden[i] = dh;
            }

            for (k, dir) in pass.directions.iter().enumerate() {
                let (bank, gbank) = if k == 0 {
                    (&self.params.past, &mut grads.past)
                } else {
                    (
                        self.params.future.as_ref().expect("bidir bank"),
                        grads.future.as_mut().expect("bidir bank"),
                    )
                };
                for f in 0..c.num_filters {
                    if dir.pooled[f] <= T::zero() {
                        continue;
                    }
                    let g = dhidden[k * c.num_filters + f];
                    let p = dir.argmax[f];
                    gbank.biases[f] += g;
                    let base = f * depth * width;
                    for o in 0..width {
                        let slot = p + o;
                        let col = &dir.input[slot * depth..(slot + 1) * depth];
                        let id = dir.ids[slot];
                        for (d, &x) in col.iter().enumerate() {
                            let wi = base + d * width + o;
                            gbank.weights[wi] += g * x;
                            if d < e {
                                grads.embeddings[id * e + d] += g * bank.weights[wi];
                            }
                        }
                    }
                }
            }
        }
        Ok((total * scale, grads))
    }

    /// Which position each filter pooled and whether it was active, per
    /// example and direction. Central differences are only a valid oracle
    /// where this pattern does not change across the step.
    pub fn activation_pattern(&self, batch: &[Example]) -> Result<Vec<usize>, NetError> {
        self.check_batch(batch)?;
        let mut out = Vec::new();
        for ex in batch {
            for dir in self.run(&ex.windows).directions {
                out.extend(dir.argmax.iter().zip(&dir.pooled).map(|(&p, &h)| {
                    if h > T::zero() {
                        p
                    } else {
                        usize::MAX
                    }
                }));
            }
        }
        Ok(out)
    }

    pub fn predict_encoded(&self, sentence: &EncodedSentence) -> Result<Vec<Prediction>, NetError> {
        (0..sentence.len())
            .map(|t| self.forward(&self.windows(sentence, t)))
            .collect()
    }

    /// One prediction per token of `sentence`.
    pub fn predict(
        &self,
        sentence: &Sentence,
        registry: Option<&FeatureRegistry>,
    ) -> Result<Vec<Prediction>, NetError> {
        self.predict_encoded(&self.encode(sentence, registry)?)
    }
}
