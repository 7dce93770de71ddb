use feel_core::fl::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_data(n: usize, dim: usize, classes: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features = (0..n * dim).map(|_| rng.random_range(0.0..1.0)).collect();
    let labels = (0..n).map(|_| rng.random_range(0..classes)).collect();
    Dataset::new(features, labels, dim, classes).unwrap()
}

/// Largest relative error between the analytic gradient and central
/// differences with step 1e-5.
fn max_gradient_error(dims: &ModelDims, params: &[f64], data: &Dataset) -> f64 {
    let all: Vec<usize> = (0..data.len()).collect();
    let (_, grad) = loss_and_gradient(dims, params, data, &all).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut p = params.to_vec();
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + h;
        let up = loss_and_gradient(dims, &p, data, &all).unwrap().0;
        p[i] = orig - h;
        let down = loss_and_gradient(dims, &p, data, &all).unwrap().0;
        p[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let scale = grad[i].abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((grad[i] - numeric).abs() / scale);
    }
    worst
}

#[test]
fn gradients_match_finite_differences() {
    for seed in 0..10 {
        let dims = ModelDims::new(4, 6, 3).unwrap();
        let mut model = init_model(dims, seed);
        // non-zero biases so that every block is exercised
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        model.params.iter_mut().for_each(|p| *p += rng.random_range(-0.1..0.1));
        let data = random_data(5, 4, 3, seed);
        let err = max_gradient_error(&dims, &model.params, &data);
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn federated_round_equals_centralized_epoch() {
    let dims = ModelDims::new(5, 8, 3).unwrap();
    let global = init_model(dims, 3);
    let data = random_data(40, 5, 3, 4);
    let full_batch = TrainConfig { epochs: 1, learning_rate: 0.05, batch_size: data.len(), hidden_dim: 8 };
    let central = local_train(0, &global, &data, &full_batch, 0).unwrap();
    let updates: Vec<LocalUpdate> = (0..4).map(|k| local_train(k, &global, &data, &full_batch, 10 + k as u64).unwrap()).collect();
    let merged = fedavg_aggregate(&global, &updates).unwrap();
    for (a, b) in merged.params.iter().zip(&central.params) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn training_improves_separable_data() {
    // two well separated clusters
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in 0..200 {
        let c = i % 2;
        for _ in 0..4 {
            features.push(0.2 + 0.6 * c as f64 + rng.random_range(-0.1..0.1));
        }
        labels.push(c);
    }
    let data = Dataset::new(features, labels, 4, 2).unwrap();
    let mut model = init_model(ModelDims::new(4, 16, 2).unwrap(), 2);
    let config = TrainConfig { epochs: 20, learning_rate: 0.1, batch_size: 16, hidden_dim: 16 };
    let update = local_train(0, &model, &data, &config, 3).unwrap();
    model.params = update.params;
    assert!(evaluate(&model, &data).unwrap().accuracy > 0.95);
}

fn update(params: Vec<f64>, size: usize, id: usize) -> LocalUpdate {
    LocalUpdate { device_id: id, params, dataset_size: size, train_loss: 0.0 }
}

proptest! {
    #[test]
    fn aggregation_is_permutation_invariant_and_convex(
        raw in prop::collection::vec((prop::collection::vec(-10.0f64..10.0, 4), 1usize..500), 1..6),
        rotate in 0usize..6,
    ) {
        let dims = ModelDims::new(1, 1, 1).unwrap();
        let global = init_model(dims, 0);
        let updates: Vec<LocalUpdate> = raw.iter().enumerate().map(|(i, (p, s))| update(p.clone(), *s, i)).collect();
        let mut rotated = updates.clone();
        rotated.rotate_left(rotate % updates.len());
        let a = fedavg_aggregate(&global, &updates).unwrap();
        let b = fedavg_aggregate(&global, &rotated).unwrap();
        for i in 0..4 {
            prop_assert!((a.params[i] - b.params[i]).abs() < 1e-12);
            let lo = updates.iter().map(|u| u.params[i]).fold(f64::INFINITY, f64::min);
            let hi = updates.iter().map(|u| u.params[i]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(a.params[i] >= lo - 1e-12 && a.params[i] <= hi + 1e-12);
        }
    }

    #[test]
    fn identical_updates_aggregate_to_themselves(p in prop::collection::vec(-10.0f64..10.0, 4), sizes in prop::collection::vec(1usize..100, 1..5)) {
        let global = init_model(ModelDims::new(1, 1, 1).unwrap(), 0);
        let updates: Vec<LocalUpdate> = sizes.iter().enumerate().map(|(i, &s)| update(p.clone(), s, i)).collect();
        let agg = fedavg_aggregate(&global, &updates).unwrap();
        for i in 0..4 {
            prop_assert!((agg.params[i] - p[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn accuracy_is_a_fraction(seed in 0u64..1000) {
        let model = init_model(ModelDims::new(3, 4, 5).unwrap(), seed);
        let acc = evaluate(&model, &random_data(20, 3, 5, seed)).unwrap().accuracy;
        prop_assert!((0.0..=1.0).contains(&acc));
    }
}
