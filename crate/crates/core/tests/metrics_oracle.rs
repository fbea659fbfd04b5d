use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use slotfill::metrics::{accuracy, f1, precision, recall};
use slotfill::{confusion_counts, LabelId, Report};

const OUTSIDE: usize = 1;

/// Counts each case by scanning the pairs once per case.
fn brute_force(gold: &[usize], pred: &[usize]) -> (u64, u64, u64, u64) {
    let pairs: Vec<(usize, usize)> = gold.iter().copied().zip(pred.iter().copied()).collect();
    let count =
        |f: &dyn Fn(usize, usize) -> bool| pairs.iter().filter(|&&(g, p)| f(g, p)).count() as u64;
    let tp = count(&|g, p| g != OUTSIDE && g == p);
    let tn = count(&|g, p| g == OUTSIDE && p == OUTSIDE);
    let fp = count(&|g, p| p != OUTSIDE && g != p);
    let fn_ = count(&|g, p| g != OUTSIDE && g != p);
    (tp, tn, fp, fn_)
}

fn div(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn random_sequences(rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let len = rng.gen_range(0..=1000);
    let labels = rng.gen_range(1..=8);
    let p_outside = rng.gen_range(0.0..=1.0);
    let p_copy = rng.gen_range(0.0..=1.0);
    let draw = |rng: &mut ChaCha8Rng| {
        if rng.gen_bool(p_outside) {
            OUTSIDE
        } else {
            rng.gen_range(1..=labels)
        }
    };
    let gold: Vec<usize> = (0..len).map(|_| draw(rng)).collect();
    let pred = gold
        .iter()
        .map(|&g| if rng.gen_bool(p_copy) { g } else { draw(rng) })
        .collect();
    (gold, pred)
}

fn ids(xs: &[usize]) -> Vec<LabelId> {
    xs.iter().map(|&x| LabelId::new(x).unwrap()).collect()
}

#[test]
fn counts_and_scores_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let outside = LabelId::new(OUTSIDE).unwrap();
    for trial in 0..200 {
        let (gold, pred) = random_sequences(&mut rng);
        let c = confusion_counts(&ids(&gold), &ids(&pred), outside).unwrap();
        let (tp, tn, fp, fn_) = brute_force(&gold, &pred);
        assert_eq!(
            (c.tp, c.tn, c.fp, c.fn_),
            (tp, tn, fp, fn_),
            "trial {trial}"
        );

        let a = div(tp + tn, tp + tn + fp + fn_);
        let p = div(tp, tp + fp);
        let r = div(tp, tp + fn_);
        let f = if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        };
        assert_eq!(accuracy(&c), a);
        assert_eq!(precision(&c), p);
        assert_eq!(recall(&c), r);
        assert_eq!(f1(p, r), f);
        // Count form of the harmonic mean agrees to rounding.
        assert!((f - div(2 * tp, 2 * tp + fp + fn_)).abs() < 1e-12);

        let report =
            Report::from_sequences([(ids(&gold).as_slice(), ids(&pred).as_slice())], outside)
                .unwrap();
        assert_eq!(
            (report.accuracy, report.precision, report.recall, report.f1),
            (a, p, r, f)
        );
        assert_eq!(report.tokens, gold.len() as u64);
        let exact = gold.iter().zip(&pred).filter(|(g, p)| g == p).count() as u64;
        assert_eq!(report.token_accuracy, div(exact, gold.len() as u64));
    }
}

#[test]
fn corpus_counts_are_sums_of_sentence_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let outside = LabelId::new(OUTSIDE).unwrap();
    let sentences: Vec<(Vec<LabelId>, Vec<LabelId>)> = (0..50)
        .map(|_| {
            let (g, p) = random_sequences(&mut rng);
            (ids(&g), ids(&p))
        })
        .collect();
    let report = Report::from_sequences(
        sentences.iter().map(|(g, p)| (g.as_slice(), p.as_slice())),
        outside,
    )
    .unwrap();
    let summed = sentences
        .iter()
        .map(|(g, p)| confusion_counts(g, p, outside).unwrap())
        .fold(Default::default(), |a, b| a + b);
    assert_eq!(report.counts(), summed);
}
