use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use slotfill::nn::{Example, TokenWindows, WindowInput};
use slotfill::{FeatureVector, LabelId, Model, NetConfig, Variant, Vocabulary, NUM_FEATURES};

const STEP: f64 = 1e-3;
const TOLERANCE: f64 = 1e-3;

fn random_vector(rng: &mut ChaCha8Rng) -> FeatureVector {
    let mut v = [0.0; NUM_FEATURES];
    if rng.gen_bool(0.3) {
        return FeatureVector(v);
    }
    for x in v.iter_mut() {
        if rng.gen_bool(0.3) {
            *x = rng.gen_range(0.0..1.0);
        }
    }
    let sum: f64 = v.iter().sum();
    if sum > 0.0 {
        v.iter_mut().for_each(|x| *x /= sum);
    }
    FeatureVector(v)
}

fn random_window(rng: &mut ChaCha8Rng, config: &NetConfig, ids: usize) -> WindowInput {
    WindowInput {
        ids: (0..config.context_length)
            .map(|_| rng.gen_range(0..ids))
            .collect(),
        features: config.use_features.then(|| {
            (0..config.context_length)
                .map(|_| random_vector(rng))
                .collect()
        }),
    }
}

/// A random small model and batch; parameters are drawn wider than the
/// default init so ReLUs and pooling are exercised in both states.
fn setup(seed: u64) -> (Model<f64>, Vec<Example>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let context = rng.gen_range(2..=5);
    let mut config = NetConfig {
        embed_dim: rng.gen_range(1..=4),
        context_length: context,
        filter_width: rng.gen_range(1..=context),
        num_filters: rng.gen_range(1..=4),
        variant: if rng.gen_bool(0.5) {
            Variant::Past
        } else {
            Variant::Bidir
        },
        seed,
        ..NetConfig::new(rng.gen_range(2..=6))
    }
    .with_features(rng.gen_bool(0.5));
    config.batch_size = rng.gen_range(1..=4);
    let vocab =
        Vocabulary::from_words((0..rng.gen_range(1..=6)).map(|i| format!("w{i}")).collect());
    let ids = vocab.total_ids();
    let mut model = Model::<f64>::init(config.clone(), vocab).unwrap();
    for tensor in model.params_mut().tensors_mut() {
        for x in tensor {
            *x = rng.gen_range(-1.0..1.0);
        }
    }
    let batch = (0..config.batch_size)
        .map(|_| Example {
            windows: TokenWindows {
                past: random_window(&mut rng, &config, ids),
                future: (config.variant == Variant::Bidir)
                    .then(|| random_window(&mut rng, &config, ids)),
            },
            gold: LabelId::new(rng.gen_range(1..=config.num_labels)).unwrap(),
        })
        .collect();
    (model, batch)
}

fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

struct Outcome {
    checked: usize,
    worst: f64,
    /// Parameters whose step crossed a ReLU or pooling switch even at the
    /// smallest step tried.
    kinked: usize,
}

fn check(seed: u64) -> Outcome {
    let (mut model, batch) = setup(seed);
    let (_, grads) = model.loss_and_gradients(&batch).unwrap();
    let analytic: Vec<f64> = grads.tensors().into_iter().flatten().copied().collect();
    let base_pattern = model.activation_pattern(&batch).unwrap();
    let mut outcome = Outcome {
        checked: 0,
        worst: 0.0,
        kinked: 0,
    };
    for (i, &a) in analytic.iter().enumerate() {
        let original = param(&model, i);
        let mut step = STEP;
        let numeric = loop {
            set_param(&mut model, i, original + step);
            let plus = model.loss(&batch).unwrap();
            let plus_pattern = model.activation_pattern(&batch).unwrap();
            set_param(&mut model, i, original - step);
            let minus = model.loss(&batch).unwrap();
            let minus_pattern = model.activation_pattern(&batch).unwrap();
            set_param(&mut model, i, original);
            if plus_pattern == base_pattern && minus_pattern == base_pattern {
                break Some((plus - minus) / (2.0 * step));
            }
            step /= 10.0;
            if step < 1e-7 {
                break None;
            }
        };
        match numeric {
            Some(n) => {
                outcome.checked += 1;
                outcome.worst = outcome.worst.max(relative_error(a, n));
            }
            None => outcome.kinked += 1,
        }
    }
    outcome
}

fn param(model: &Model<f64>, i: usize) -> f64 {
    *model
        .params()
        .tensors()
        .into_iter()
        .flatten()
        .nth(i)
        .unwrap()
}

fn set_param(model: &mut Model<f64>, i: usize, value: f64) {
    *model
        .params_mut()
        .tensors_mut()
        .into_iter()
        .flatten()
        .nth(i)
        .unwrap() = value;
}

#[test]
fn analytic_gradients_match_central_differences() {
    let mut total_kinked = 0;
    let mut total_checked = 0;
    for seed in 0..24 {
        let (model, _) = setup(seed);
        assert!(model.params().len() <= 5000);
        let out = check(seed);
        assert!(
            out.worst <= TOLERANCE,
            "seed {seed}: relative error {} > {TOLERANCE}",
            out.worst
        );
        total_kinked += out.kinked;
        total_checked += out.checked;
    }
    assert!(total_checked > 0);
    assert_eq!(total_kinked, 0, "parameters stuck on a kink");
}

#[test]
fn default_init_gradients_match() {
    // Small config, but with the stock initialization scale.
    let config = NetConfig {
        embed_dim: 3,
        context_length: 4,
        filter_width: 2,
        num_filters: 3,
        variant: Variant::Bidir,
        ..NetConfig::new(4)
    };
    let vocab = Vocabulary::from_words(vec!["a".into(), "b".into()]);
    let model = Model::<f64>::init(config.clone(), vocab).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let batch: Vec<Example> = (1..=4)
        .map(|g| Example {
            windows: TokenWindows {
                past: random_window(&mut rng, &config, 4),
                future: Some(random_window(&mut rng, &config, 4)),
            },
            gold: LabelId::new(g).unwrap(),
        })
        .collect();
    let (_, grads) = model.loss_and_gradients(&batch).unwrap();
    let mut probe = model.clone();
    for (i, &a) in grads.tensors().into_iter().flatten().enumerate() {
        let x = param(&probe, i);
        set_param(&mut probe, i, x + STEP);
        let plus = probe.loss(&batch).unwrap();
        set_param(&mut probe, i, x - STEP);
        let minus = probe.loss(&batch).unwrap();
        set_param(&mut probe, i, x);
        let n = (plus - minus) / (2.0 * STEP);
        assert!(relative_error(a, n) <= TOLERANCE, "param {i}: {a} vs {n}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]
    #[test]
    fn gradients_match_for_any_seed(seed in any::<u64>()) {
        let out = check(seed);
        prop_assert!(out.worst <= TOLERANCE, "relative error {}", out.worst);
    }
}
