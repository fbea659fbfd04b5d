use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{cast, EncodedSentence, Example, Model, NetError, Params, MOMENTUM};
use crate::corpus::Corpus;
use crate::features::FeatureRegistry;

/// Generator stream used for epoch shuffling; stream 0 initializes weights.
const SHUFFLE_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean per-token loss of each epoch, averaged over its batches.
    pub epoch_losses: Vec<f64>,
}

/// Minibatch SGD with momentum over the tokens of a corpus.
pub struct Trainer {
    model: Model<f32>,
    examples: Vec<Example>,
    order: Vec<usize>,
    velocity: Params<f32>,
    rng: ChaCha8Rng,
    epoch: usize,
    losses: Vec<f64>,
}

impl Trainer {
    pub fn new(
        model: Model<f32>,
        corpus: &Corpus,
        registry: Option<&FeatureRegistry>,
    ) -> Result<Self, NetError> {
        let encoded: Vec<EncodedSentence> = corpus
            .sentences()
            .iter()
            .map(|s| model.encode(s, registry))
            .collect::<Result<_, _>>()?;
        let examples: Vec<Example> = encoded.iter().flat_map(|s| model.examples(s)).collect();
        if examples.is_empty() {
            return Err(NetError::EmptyCorpus);
        }
        if let Some(ex) = examples
            .iter()
            .find(|ex| ex.gold.get() > model.config().num_labels)
        {
            return Err(NetError::GoldOutOfRange {
                label: ex.gold.get(),
                num_labels: model.config().num_labels,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(model.config().seed);
        rng.set_stream(SHUFFLE_STREAM);
        let velocity = Params::zeros(model.config(), model.vocab().total_ids());
        Ok(Trainer {
            order: (0..examples.len()).collect(),
            examples,
            velocity,
            rng,
            epoch: 0,
            losses: Vec::new(),
            model,
        })
    }

    pub fn model(&self) -> &Model<f32> {
        &self.model
    }

    pub fn epochs_run(&self) -> usize {
        self.epoch
    }

    /// Shuffles the tokens, runs one pass of updates and returns the epoch's
    /// mean loss.
    pub fn run_epoch(&mut self) -> Result<f64, NetError> {
        let epoch = self.epoch + 1;
        let lr: f32 = cast(self.model.config().learning_rate);
        let momentum: f32 = cast(MOMENTUM);
        let batch_size = self.model.config().batch_size;
        self.order.shuffle(&mut self.rng);
        let mut total = 0.0;
        let mut batches = 0;
        let mut batch = Vec::with_capacity(batch_size);
        for (b, chunk) in self.order.chunks(batch_size).enumerate() {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| self.examples[i].clone()));
            let (loss, grads) = self.model.loss_and_gradients(&batch)?;
            if !loss.is_finite() {
                return Err(NetError::NonFiniteLoss {
                    epoch,
                    batch: b + 1,
                });
            }
            total += loss as f64;
            batches += 1;
            let params = self.model.params_mut();
            for ((p, v), g) in params
                .tensors_mut()
                .into_iter()
                .zip(self.velocity.tensors_mut())
                .zip(grads.tensors())
            {
                for ((p, v), &g) in p.iter_mut().zip(v.iter_mut()).zip(g) {
                    *v = momentum * *v + g;
                    *p -= lr * *v;
                }
            }
            if !params.is_finite() {
                return Err(NetError::NonFiniteParameters {
                    epoch,
                    batch: b + 1,
                });
            }
        }
        self.epoch = epoch;
        let mean = total / batches as f64;
        self.losses.push(mean);
        Ok(mean)
    }

    pub fn finish(self) -> (Model<f32>, TrainReport) {
        (
            self.model,
            TrainReport {
                epoch_losses: self.losses,
            },
        )
    }
}

/// Trains for `model.config().epochs` epochs.
pub fn fit(
    model: Model<f32>,
    corpus: &Corpus,
    registry: Option<&FeatureRegistry>,
) -> Result<(Model<f32>, TrainReport), NetError> {
    fit_with(model, corpus, registry, |_, _| {})
}

/// Like [`fit`], calling `on_epoch(epoch, loss)` after every epoch.
pub fn fit_with(
    model: Model<f32>,
    corpus: &Corpus,
    registry: Option<&FeatureRegistry>,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<(Model<f32>, TrainReport), NetError> {
    let epochs = model.config().epochs;
    let mut trainer = Trainer::new(model, corpus, registry)?;
    for epoch in 1..=epochs {
        let loss = trainer.run_epoch()?;
        on_epoch(epoch, loss);
    }
    Ok(trainer.finish())
}
