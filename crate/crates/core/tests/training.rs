use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use rerum_core::data::{split, Dataset, FeatureSchema, SampleRecord, SplitFractions};
use rerum_core::losses::LossWeights;
use rerum_core::metrics::krcc_against_truth;
use rerum_core::model::{init_model, Gradients, HeadMode, ModelConfig};
use rerum_core::objective::{all_pairs, UpliftObjective};
use rerum_core::optim::{adam_step, AdamConfig, AdamState};
use rerum_core::synthetic::{generate_synthetic, SyntheticConfig};
use rerum_core::trainer::{evaluate_epoch, train, TrainConfig};
use rerum_core::Error;

fn tiny_model() -> ModelConfig {
    ModelConfig { embedding_dim: 2, representation_layers: vec![8], head_layers: vec![4], ..Default::default() }
}

fn one_param_schema() -> FeatureSchema {
    FeatureSchema {
        numeric_columns: vec!["x".into()],
        categorical_columns: vec![],
        treatment_column: "t".into(),
        response_column: "y".into(),
    }
}

fn synthetic_splits(n: usize, seed: u64) -> (Dataset, Dataset, Dataset) {
    let config = SyntheticConfig { n, d_numeric: 3, ..Default::default() };
    let (data, _) = generate_synthetic(&config, seed).unwrap();
    split(&data, SplitFractions::default(), seed).unwrap()
}

fn quick_config(seed: u64) -> TrainConfig {
    TrainConfig { batch_size: 32, pair_sample_size: 8, max_epochs: 3, patience: 3, seed, ..Default::default() }
}

#[test]
fn adam_zero_gradient_is_a_no_op() {
    let mut params = init_model(&tiny_model(), &one_param_schema(), 0).unwrap();
    let before = params.clone();
    let mut state = AdamState::new(&params);
    let zero = Gradients::zeros(params.values().len());
    adam_step(&mut params, &zero, &mut state, &AdamConfig::default()).unwrap();
    assert_eq!(params.values(), before.values());
    assert_eq!(state.step, 1);
}

#[test]
fn adam_first_step_moves_by_learning_rate() {
    let mut params = init_model(&tiny_model(), &one_param_schema(), 0).unwrap();
    let before = params.values().to_vec();
    let mut state = AdamState::new(&params);
    let ones = Gradients { values: vec![1.0; before.len()] };
    let config = AdamConfig::default();
    adam_step(&mut params, &ones, &mut state, &config).unwrap();
    let expected = 1e-3 / (1.0 + 1e-8);
    for (a, b) in params.values().iter().zip(&before) {
        assert!(((b - a) - expected).abs() < 1e-15);
    }
    let first = before[0] - params.values()[0];
    let mid = params.values()[0];
    adam_step(&mut params, &ones, &mut state, &config).unwrap();
    let second = mid - params.values()[0];
    assert!(second <= first + 1e-15, "{second} > {first}");
}

#[test]
fn adam_rejects_mismatched_shapes() {
    let mut params = init_model(&tiny_model(), &one_param_schema(), 0).unwrap();
    let mut state = AdamState::new(&params);
    let short = Gradients::zeros(3);
    assert!(matches!(
        adam_step(&mut params, &short, &mut state, &AdamConfig::default()),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn adam_reports_non_finite_updates() {
    let mut params = init_model(&tiny_model(), &one_param_schema(), 0).unwrap();
    let mut state = AdamState::new(&params);
    let mut g = Gradients::zeros(params.values().len());
    g.values[4] = f64::NAN;
    assert!(matches!(
        adam_step(&mut params, &g, &mut state, &AdamConfig::default()),
        Err(Error::NonFiniteGradient(_))
    ));
}

#[test]
fn regression_only_training_halves_the_loss() {
    let config = tiny_model();
    let schema = one_param_schema();
    let mut rng = SplitMix64::seed_from_u64(4);
    let records: Vec<SampleRecord> = (0..16)
        .map(|i| {
            let x = rng.random::<f64>();
            SampleRecord {
                numeric: vec![x],
                categorical: vec![],
                treated: i % 2 == 0,
                response: if i % 4 == 0 { 0.0 } else { (1.0 + 2.0 * x).exp() },
            }
        })
        .collect();
    let treated: Vec<&SampleRecord> = records.iter().filter(|r| r.treated).collect();
    let control: Vec<&SampleRecord> = records.iter().filter(|r| !r.treated).collect();
    let weights = LossWeights { w_wr: 0.0, w_cr: 0.0, w_lu: 0.0, lambda: 0.0, ..Default::default() };
    let pairs = all_pairs(&[0, 1], &[0, 1]);
    let objective =
        UpliftObjective { config: &config, weights: &weights, treated: &treated, control: &control, pairs: &pairs };
    let mut params = init_model(&config, &schema, 1).unwrap();
    let mut state = AdamState::new(&params);
    let adam = AdamConfig { learning_rate: 1e-2, ..Default::default() };
    let initial = objective.evaluate(&params, false).unwrap().0.ziln;
    for _ in 0..200 {
        let (_, g) = objective.evaluate(&params, true).unwrap();
        adam_step(&mut params, &g.unwrap(), &mut state, &adam).unwrap();
    }
    let last = objective.evaluate(&params, false).unwrap().0.ziln;
    assert!(last <= 0.5 * initial, "{initial} -> {last}");
}

#[test]
fn training_is_deterministic() {
    let (tr, va, _) = synthetic_splits(1500, 2);
    let a = train(&tr, &va, &tiny_model(), &quick_config(7)).unwrap();
    let b = train(&tr, &va, &tiny_model(), &quick_config(7)).unwrap();
    assert_eq!(a, b);
    let c = train(&tr, &va, &tiny_model(), &quick_config(8)).unwrap();
    assert_ne!(a.0, c.0);
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    let (tr, va, _) = synthetic_splits(1500, 2);
    let config = TrainConfig { learning_rate: 0.0, ..quick_config(7) };
    let (params, history) = train(&tr, &va, &tiny_model(), &config).unwrap();
    assert_eq!(params, init_model(&tiny_model(), tr.schema(), 7).unwrap());
    let first = &history.epochs[0];
    for e in &history.epochs {
        assert_eq!(e.validation, first.validation);
    }
}

#[test]
fn best_epoch_has_maximal_validation_auuc() {
    let (tr, va, _) = synthetic_splits(3000, 5);
    let config = TrainConfig { max_epochs: 6, patience: 2, ..quick_config(3) };
    let (params, history) = train(&tr, &va, &tiny_model(), &config).unwrap();
    let best = history.best().validation.auuc_norm;
    for e in &history.epochs {
        if let (Some(v), Some(b)) = (e.validation.auuc_norm, best) {
            assert!(v <= b);
        }
    }
    let again = evaluate_epoch(&params, &tiny_model(), &va, &config.metrics).unwrap();
    assert_eq!(again, history.best().validation);
    assert!(history.epochs.len() <= 6);
}

#[test]
fn small_groups_are_rejected() {
    let (tr, va, _) = synthetic_splits(200, 1);
    let config = TrainConfig { batch_size: 100, pair_sample_size: 8, ..quick_config(1) };
    assert!(matches!(train(&tr, &va, &tiny_model(), &config), Err(Error::GroupTooSmall { .. })));
}

#[test]
fn mse_head_trains() {
    let (tr, va, _) = synthetic_splits(1500, 2);
    let model = ModelConfig { head_mode: HeadMode::Mse, ..tiny_model() };
    let (_, history) = train(&tr, &va, &model, &quick_config(1)).unwrap();
    assert!(history.epochs.iter().all(|e| e.train_loss.total.is_finite()));
}

#[test]
fn symmetric_model_scores_flagged_zero_krcc() {
    let (_, va, _) = synthetic_splits(1000, 3);
    let mut params = init_model(&tiny_model(), va.schema(), 0).unwrap();
    params.mirror_heads();
    let report = evaluate_epoch(&params, &tiny_model(), &va, &Default::default()).unwrap();
    assert_eq!(report.krcc, Some(0.0));
    assert!(report.flags.iter().any(|f| f.contains("constant")));
}

#[test]
fn true_effect_as_prediction_is_perfectly_concordant() {
    let config = SyntheticConfig { n: 5000, ..Default::default() };
    let (_, truth) = generate_synthetic(&config, 8).unwrap();
    assert_eq!(krcc_against_truth(&truth.cate, &truth.cate, 100), Some(1.0));
}
