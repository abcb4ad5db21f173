mod support;

use gestibot_core::gesture::GestureClass;
use gestibot_core::mlp::{self, classify_outputs, FeatureVector, MlpModel, TrainingConfig, TrainingExample, OUTPUTS};
use proptest::prelude::*;
use support::gradient::max_gradient_error;

fn example() -> impl Strategy<Value = TrainingExample> {
    (prop::array::uniform9(-1.0f64..1.0), 0usize..OUTPUTS).prop_map(|(x, k)| TrainingExample {
        input: FeatureVector(x),
        label: GestureClass::ALL[k],
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn backprop_matches_central_differences(seed in any::<u64>(), ex in example()) {
        let m = MlpModel::from_seed(seed);
        let (err, j) = max_gradient_error(&m, &ex);
        prop_assert!(err <= 1e-4, "param {j}: relative error {err}");
    }

    #[test]
    fn outputs_stay_in_the_open_unit_interval(seed in any::<u64>(), x in prop::array::uniform9(-1.0f64..1.0)) {
        let m = MlpModel::from_seed(seed);
        for o in m.forward(&FeatureVector(x)) {
            prop_assert!(o > 0.0 && o < 1.0);
        }
    }

    #[test]
    fn raising_the_winner_keeps_it(outs in prop::array::uniform12(0.0f64..1.0), bump in 0.0f64..0.5) {
        let c = classify_outputs(&outs, 0.5);
        if let Some(i) = c.index() {
            let mut raised = outs;
            raised[i] = (raised[i] + bump).min(1.0);
            prop_assert_eq!(classify_outputs(&raised, 0.5), c);
        }
    }

    #[test]
    fn lowering_the_threshold_never_adds_unknowns(outs in prop::array::uniform12(0.0f64..1.0), lo in 0.0f64..1.0, hi in 0.0f64..1.0) {
        let (lo, hi) = (lo.min(hi), lo.max(hi));
        if classify_outputs(&outs, hi) != GestureClass::Unknown {
            prop_assert_ne!(classify_outputs(&outs, lo), GestureClass::Unknown);
        }
    }

    #[test]
    fn model_bytes_round_trip(seed in any::<u64>()) {
        let m = MlpModel::from_seed(seed);
        let bytes = m.to_bytes();
        prop_assert_eq!(bytes.len(), mlp::MODEL_FILE_LEN);
        prop_assert_eq!(MlpModel::from_bytes(&bytes).unwrap(), m);
    }
}

#[test]
fn small_steps_decrease_the_example_error() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let trials = 1000;
    let mut decreased = 0;
    for _ in 0..trials {
        let m = MlpModel::from_seed(rng.random());
        let ex = TrainingExample {
            input: FeatureVector(std::array::from_fn(|_| rng.random_range(-1.0..1.0))),
            label: GestureClass::ALL[rng.random_range(0..OUTPUTS)],
        };
        let mut stepped = m.clone();
        stepped.descend(&m.gradient(&ex), 1e-3);
        if stepped.example_error(&ex) < m.example_error(&ex) {
            decreased += 1;
        }
    }
    assert!(decreased * 100 >= trials * 99, "{decreased}/{trials}");
}

#[test]
fn separates_two_opposite_translations() {
    let x = |s: f64, k: f64| {
        FeatureVector([
            s * k / 3.0,
            0.0,
            1.0 / 3.0,
            s * 0.8 * k / 3.0,
            0.0,
            1.0 / 3.0,
            s * 0.6 * k / 3.0,
            0.0,
            1.0 / 3.0,
        ])
    };
    let data: Vec<TrainingExample> = (0..20)
        .flat_map(|i| {
            let k = 0.5 + i as f64 / 20.0;
            [
                TrainingExample {
                    input: x(1.0, k),
                    label: GestureClass::Xp,
                },
                TrainingExample {
                    input: x(-1.0, k),
                    label: GestureClass::Xn,
                },
            ]
        })
        .collect();
    let cfg = TrainingConfig {
        cycles: 2000,
        seed: 5,
        ..Default::default()
    };
    let (m, report) = mlp::train(&data, &cfg).unwrap();
    assert!(report.final_mse < report.initial_mse);
    use gestibot_core::GestureClassifier;
    for ex in &data {
        assert_eq!(m.classify(&ex.input), ex.label);
    }
}
