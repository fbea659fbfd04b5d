//! Corpus-level evaluation of a tagger.

use crate::corpus::{Corpus, LabelId, Sentence};
use crate::features::FeatureRegistry;
use crate::metrics::Report;
use crate::nn::{Model, NetError, Scalar};

/// Micro-averaged report for any tagger that maps a sentence to one label
/// per token.
pub fn evaluate_with<E>(
    corpus: &Corpus,
    outside: LabelId,
    mut tag: impl FnMut(&Sentence) -> Result<Vec<LabelId>, E>,
) -> Result<Report, E>
where
    E: From<crate::metrics::LengthMismatch>,
{
    let mut gold = Vec::with_capacity(corpus.sentences().len());
    let mut pred = Vec::with_capacity(corpus.sentences().len());
    for sentence in corpus.sentences() {
        gold.push(sentence.labels().collect::<Vec<_>>());
        pred.push(tag(sentence)?);
    }
    Ok(Report::from_sequences(
        gold.iter()
            .zip(&pred)
            .map(|(g, p)| (g.as_slice(), p.as_slice())),
        outside,
    )?)
}

impl From<crate::metrics::LengthMismatch> for NetError {
    fn from(e: crate::metrics::LengthMismatch) -> Self {
        NetError::Shape(e.to_string())
    }
}

pub fn evaluate<T: Scalar>(
    model: &Model<T>,
    registry: Option<&FeatureRegistry>,
    corpus: &Corpus,
    outside: LabelId,
) -> Result<Report, NetError> {
    evaluate_with(corpus, outside, |s| {
        Ok(model
            .predict(s, registry)?
            .into_iter()
            .map(|p| p.label)
            .collect())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle;
    use crate::metrics::{confusion_counts, LengthMismatch};
    use crate::synth::{gen_synthetic, SynthConfig};

    #[test]
    fn oracle_tagger_scores_perfectly() {
        let inv = bundle::atis_labels();
        let data = gen_synthetic(
            &SynthConfig::default_benchmark(),
            1,
            &inv,
            &bundle::atis_feature_spec(),
        )
        .unwrap();
        let report = evaluate_with(&data.test, inv.outside(), |s| {
            Ok::<_, LengthMismatch>(s.labels().collect())
        })
        .unwrap();
        assert_eq!(
            (report.accuracy, report.precision, report.recall, report.f1),
            (1.0, 1.0, 1.0, 1.0)
        );
        assert_eq!(report.token_accuracy, 1.0);
        assert_eq!(report.tokens, data.test.stats().tokens as u64);
    }

    #[test]
    fn mis_sized_tagger_output_is_an_error() {
        let inv = bundle::atis_labels();
        let data = gen_synthetic(
            &SynthConfig::default_benchmark(),
            1,
            &inv,
            &bundle::atis_feature_spec(),
        )
        .unwrap();
        let out = evaluate_with(&data.test, inv.outside(), |_| {
            Ok::<_, LengthMismatch>(vec![inv.outside()])
        });
        assert!(out.is_err());
        let _ = confusion_counts(&[], &[], inv.outside()).unwrap();
    }
}
